//! Small dense helpers on top of `nalgebra` complex matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Dense complex matrix, row/column indexed as `m[(row, col)]`.
pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

/// `|k><k|` in dimension `d`.
pub fn basis_projector(d: usize, k: usize) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    m[(k, k)] = ONE;
    m
}

pub fn diag_real(values: &[f64]) -> CMatrix {
    let d = values.len();
    let mut m = CMatrix::zeros(d, d);
    for (i, &v) in values.iter().enumerate() {
        m[(i, i)] = c(v, 0.0);
    }
    m
}

pub fn real_diagonal(m: &CMatrix) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, i)].re).collect()
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// `(m + m^dag) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5, 0.0)
}

pub fn hermiticity_error(m: &CMatrix) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

/// `Re Tr(a b)` without forming the product.
pub fn trace_product_re(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..a.ncols() {
            let x = a[(i, k)];
            let y = b[(k, i)];
            acc += x.re * y.re - x.im * y.im;
        }
    }
    acc
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues in ascending order,
/// eigenvectors as the matching columns.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = hermitian_part(m).symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigen(m).0.first().copied().unwrap_or(0.0)
}

/// `V diag(f(λ)) V^dag` for a Hermitian matrix.
pub fn hermitian_fn(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(m);
    let n = m.nrows();
    let mut scaled = vectors.clone();
    for (j, &v) in values.iter().enumerate() {
        let s = f(v);
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    scaled * vectors.adjoint()
}

/// Square root of a positive semidefinite matrix; eigenvalues below zero are
/// clipped before the root is taken.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    hermitian_fn(m, |v| v.max(0.0).sqrt())
}

/// Euclidean projection onto the positive semidefinite cone.
pub fn psd_projection(m: &CMatrix) -> CMatrix {
    hermitian_fn(m, |v| v.max(0.0))
}

/// Euclidean projection onto unit-trace positive semidefinite matrices: the
/// eigenvalues are projected onto the probability simplex.
pub fn density_projection(m: &CMatrix) -> CMatrix {
    let (values, _) = hermitian_eigen(m);
    let mut sorted = values;
    sorted.reverse();
    let mut cum = 0.0;
    let mut shift = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        cum += v;
        let t = (cum - 1.0) / (k + 1) as f64;
        if v - t > 0.0 {
            shift = t;
        }
    }
    hermitian_fn(m, |v| (v - shift).max(0.0))
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Partial trace over the second (output) factor of a `d^2 x d^2` matrix laid
/// out as `in ⊗ out`.
pub fn partial_trace_second(m: &CMatrix, d: usize) -> CMatrix {
    let mut out = CMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let mut acc = ZERO;
            for a in 0..d {
                acc += m[(i * d + a, j * d + a)];
            }
            out[(i, j)] = acc;
        }
    }
    out
}

pub fn outer(v: &CVector) -> CMatrix {
    v * v.adjoint()
}

/// Coordinates of a Hermitian matrix in a real orthonormal basis of the
/// Hermitian operator space (`n^2` reals).
pub fn hermitian_to_real_vec(m: &CMatrix) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * n);
    let sqrt2 = std::f64::consts::SQRT_2;
    for i in 0..n {
        out.push(m[(i, i)].re);
        for j in (i + 1)..n {
            out.push(sqrt2 * m[(i, j)].re);
            out.push(sqrt2 * m[(i, j)].im);
        }
    }
    out
}

/// Inverse of [`hermitian_to_real_vec`].
pub fn real_vec_to_hermitian(v: &[f64], n: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut it = v.iter();
    let mut next = || *it.next().expect("coordinate vector too short");
    for i in 0..n {
        m[(i, i)] = c(next(), 0.0);
        for j in (i + 1)..n {
            let z = c(s * next(), s * next());
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

/// Numerical rank: singular values at or above `rel_tol * max` are counted.
pub fn numerical_rank(rows: &[Vec<f64>], rel_tol: f64) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let ncols = rows[0].len();
    let m = DMatrix::<f64>::from_fn(rows.len(), ncols, |i, j| rows[i][j]);
    let sv: Vec<f64> = m.singular_values().iter().copied().collect();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s >= rel_tol * max).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_projection_lands_on_density_matrices() {
        let m = diag_real(&[0.9, 0.5, -0.2]);
        let p = density_projection(&m);
        assert!((real_diagonal(&p).iter().zip([0.7, 0.3, 0.0]).map(|(a, b)| (a - b).abs()).sum::<f64>()) < 1e-12);
        let rho = diag_real(&[0.6, 0.4]);
        assert!(max_abs_diff(&density_projection(&rho), &rho) < 1e-12);
    }

    #[test]
    fn real_coordinates_roundtrip_and_inner_product() {
        let a = CMatrix::from_fn(3, 3, |i, j| c((i + 2 * j) as f64, i as f64 - j as f64));
        let a = hermitian_part(&a);
        let b = hermitian_part(&CMatrix::from_fn(3, 3, |i, j| c((i * j) as f64 - 1.0, (i + j) as f64)));
        let va = hermitian_to_real_vec(&a);
        assert!(max_abs_diff(&real_vec_to_hermitian(&va, 3), &a) < 1e-14);
        let dot: f64 = va.iter().zip(hermitian_to_real_vec(&b)).map(|(x, y)| x * y).sum();
        assert!((dot - trace_product_re(&a, &b)).abs() < 1e-12);
    }

    #[test]
    fn partial_trace_of_product() {
        let a = diag_real(&[0.25, 0.75]);
        let b = diag_real(&[0.5, 0.5]);
        let pt = partial_trace_second(&kron(&a, &b), 2);
        assert!(max_abs_diff(&pt, &a) < 1e-15);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let m = CMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]);
        let s = psd_sqrt(&m);
        assert!(max_abs_diff(&(&s * &s), &m) < 1e-12);
    }

    #[test]
    fn rank_of_dependent_rows() {
        let rows = vec![vec![1.0, 0.0, 1.0], vec![2.0, 0.0, 2.0], vec![0.0, 1.0, 0.0]];
        assert_eq!(numerical_rank(&rows, 1e-8), 2);
    }
}
