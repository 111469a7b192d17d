"""Smoke test for the qudit_tomo_py extension.

Build the module first, e.g. ``maturin develop -m crates/python/Cargo.toml``,
or copy ``target/release/libqudit_tomo_py.so`` to ``qudit_tomo_py.so`` on the
Python path.
"""

import json

import qudit_tomo_py as qt


def main():
    truth = qt.DensityMatrix.haar_random(3, 7).depolarize(0.05)
    assert truth.dim == 3
    assert abs(sum(truth.populations()) - 1.0) < 1e-12

    two_level = qt.Protocol.two_level(3)
    assert len(two_level) == 7
    assert two_level.gate_counts() == [0, 1, 1, 1, 1, 1, 1]
    assert two_level.completeness() == (9, 9, True)
    assert qt.Protocol.process_two_level(3).completeness() == (81, 81, True)

    counts = qt.simulate_state(two_level, truth, 100_000, seed=3)
    assert counts.total_shots == 100_000
    again = qt.Counts.from_json(counts.to_json())
    assert again.counts() == counts.counts()

    estimate, loglik = qt.reconstruct_state(two_level, counts)
    fidelity = estimate.fidelity(truth)
    assert fidelity > 0.99, fidelity
    assert loglik < 0.0

    report = json.loads(qt.run_experiment(json.dumps({"experiment": "completeness", "dim": 3})))
    assert report["qst_two_level"]["rank"] == 9

    rows = qt.run_experiment(json.dumps({"experiment": "qst_compare", "trials": 2, "grid": [500]}))
    body = [line for line in rows.splitlines() if not line.startswith("#")]
    assert body[0].startswith("experiment,label,dim,N,trial,infidelity")
    assert len(body) == 1 + 2 * 2

    try:
        qt.run_experiment(json.dumps({"experiment": "qst_compare", "trials": 0}))
    except ValueError:
        pass
    else:
        raise AssertionError("invalid config accepted")

    print(f"smoke test passed: fidelity {fidelity:.6f}")


if __name__ == "__main__":
    main()
