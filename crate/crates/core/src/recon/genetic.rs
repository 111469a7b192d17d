use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::qcore::{RandomSeed, SeedRng};

/// Settings of [`genetic_optimize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub population: usize,
    pub generations: usize,
    /// Initial mutation standard deviation as a fraction of each box width.
    pub mutation_scale: f64,
    /// Final mutation scale relative to the initial one; the scale decays
    /// geometrically across generations.
    pub mutation_decay: f64,
    pub elite_fraction: f64,
    pub restarts: usize,
    pub seed: RandomSeed,
    /// A restart ends early once the best value improves by less than this
    /// over `stall_generations` generations.
    pub tolerance: f64,
    pub stall_generations: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            population: 60,
            generations: 300,
            mutation_scale: 0.1,
            mutation_decay: 1e-4,
            elite_fraction: 0.1,
            restarts: 5,
            seed: RandomSeed::new(0),
            tolerance: 1e-13,
            stall_generations: 80,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 4 || self.generations == 0 || self.restarts == 0 || self.stall_generations == 0 {
            return Err(Error::Config("population must be >= 4; generations, restarts and stall window positive".into()));
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction < 1.0) {
            return Err(Error::Config(format!("elite fraction {} outside (0, 1)", self.elite_fraction)));
        }
        if !(self.mutation_scale > 0.0 && self.mutation_decay > 0.0 && self.mutation_decay <= 1.0 && self.tolerance >= 0.0) {
            return Err(Error::Config("mutation scale, decay and tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneticResult {
    pub best: Vec<f64>,
    pub value: f64,
    /// Best value reached by each restart.
    pub restart_values: Vec<f64>,
    pub evaluations: usize,
}

fn evaluate<F>(objective: &F, pop: &[Vec<f64>]) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    pop.par_iter()
        .map(|x| {
            let v = objective(x);
            if v.is_nan() {
                f64::NEG_INFINITY
            } else {
                v
            }
        })
        .collect()
}

fn tournament(values: &[f64], rng: &mut SeedRng) -> usize {
    let mut best = rng.random_range(0..values.len());
    for _ in 0..2 {
        let c = rng.random_range(0..values.len());
        if values[c] > values[best] {
            best = c;
        }
    }
    best
}

/// Maximizes `objective` over the box `bounds`.
///
/// Uniform initialization, size-3 tournaments, BLX-0.5 crossover, Gaussian
/// mutation relative to the box width, elitism and independent restarts.
/// The result depends only on the configuration seed.
pub fn genetic_optimize<F>(objective: F, bounds: &[(f64, f64)], config: &OptimizerConfig) -> Result<GeneticResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    config.validate()?;
    if bounds.is_empty() {
        return domain("no parameters to optimize");
    }
    if let Some((lo, hi)) = bounds.iter().find(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
        return domain(format!("invalid bounds [{lo}, {hi}]"));
    }
    let n = bounds.len();
    let widths: Vec<f64> = bounds.iter().map(|(lo, hi)| hi - lo).collect();
    let n_elite = ((config.population as f64 * config.elite_fraction).round() as usize).clamp(1, config.population - 1);
    let std_normal = Normal::new(0.0, 1.0).map_err(|e| Error::Numerical(e.to_string()))?;
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut restart_values = Vec::with_capacity(config.restarts);
    let mut evaluations = 0;

    for restart in 0..config.restarts {
        let mut rng = config.seed.derive("genetic-restart", restart as u64).rng();
        let mut pop: Vec<Vec<f64>> =
            (0..config.population).map(|_| bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect()).collect();
        let mut values = evaluate(&objective, &pop);
        evaluations += pop.len();
        let mut trace = Vec::with_capacity(config.generations);
        for gen in 0..config.generations {
            let mut order: Vec<usize> = (0..pop.len()).collect();
            order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
            trace.push(values[order[0]]);
            if gen >= config.stall_generations && trace[gen] - trace[gen - config.stall_generations] < config.tolerance {
                break;
            }
            let progress = gen as f64 / config.generations.max(2) as f64;
            let sigma = config.mutation_scale * config.mutation_decay.powf(progress);
            let mut next: Vec<Vec<f64>> = order[..n_elite].iter().map(|&i| pop[i].clone()).collect();
            while next.len() < config.population {
                let a = &pop[tournament(&values, &mut rng)];
                let b = &pop[tournament(&values, &mut rng)];
                let child: Vec<f64> = (0..n)
                    .map(|k| {
                        let (lo, hi) = (a[k].min(b[k]), a[k].max(b[k]));
                        let ext = 0.5 * (hi - lo);
                        let mut v = rng.random_range((lo - ext)..=(hi + ext));
                        if rng.random_bool(0.5) {
                            v += sigma * widths[k] * std_normal.sample(&mut rng);
                        }
                        v.clamp(bounds[k].0, bounds[k].1)
                    })
                    .collect();
                next.push(child);
            }
            let fresh = evaluate(&objective, &next[n_elite..]);
            evaluations += fresh.len();
            let mut next_values: Vec<f64> = order[..n_elite].iter().map(|&i| values[i]).collect();
            next_values.extend(fresh);
            pop = next;
            values = next_values;
        }
        let (i, &v) = values.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0))).expect("nonempty population");
        restart_values.push(v);
        if best.as_ref().is_none_or(|(_, bv)| v > *bv) {
            best = Some((pop[i].clone(), v));
        }
    }
    let (best, value) = best.expect("at least one restart");
    if !value.is_finite() {
        return Err(Error::Numerical("objective was not finite anywhere in the population".into()));
    }
    Ok(GeneticResult { best, value, restart_values, evaluations })
}
