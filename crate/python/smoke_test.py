"""Smoke test for the Python extension.

Build and run from the repository root:

    cargo build -p psit-py --features extension-module --release
    cp target/release/libpsit.so python/psit.so
    python3 python/smoke_test.py
"""

import json
import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import psit  # noqa: E402


def main():
    grid = psit.TimeGrid(1.0, 500)
    assert grid.steps == 500 and math.isclose(grid.dt, 1 / 500)

    w = psit.brownian(grid, 50, seed=3)
    q = psit.quad_covar(w, w)
    mean_qv = sum(q["total"].terminal(p) for p in range(w.n_paths)) / w.n_paths
    assert abs(mean_qv - 1.0) < 0.05, mean_qv
    assert psit.ibp_residual(w, w).max_abs() < 1e-10

    ones = psit.Process(w.psit, [[1.0] * (grid.steps + 1)] * w.n_paths)
    assert psit.stoch_integral(ones, w).max_abs_diff(w) < 1e-12

    # a set that ends at the debut, open: the section is [0, 0.4)
    small = psit.Psit(grid, [200, 500], [False, True])
    assert small.last_index(0) == 199 and small.last_index(1) == 500
    x = psit.Process(small, [[k * 0.01 for k in range(grid.steps + 1)]] * 2, [[50], []])
    assert len(x.section(0)) == 200
    assert x.jump_marks(0) == [50]
    stopped = psit.stop(x, [10, 20])
    assert stopped.terminal(0) == x.section(0)[10]

    try:
        psit.TimeGrid(-1.0, 10)
    except ValueError:
        pass
    else:
        raise AssertionError("negative horizon accepted")

    files = psit.run_scenario(
        "[grid]\nhorizon = 1.0\nsteps = 50\n[rng]\nn_paths = 200\n"
        "[[market.regimes]]\ndrift = 0.1\nsigma = 0.2\n"
    )
    assert sorted(files) == ["sample_path.csv", "summary.json", "utility.csv"]
    summary = json.loads(files["summary.json"])
    assert summary["schema_version"] == 1 and summary["n_paths"] == 200

    passed, report = psit.run_verify(filter="identity")
    assert passed, report
    assert len(json.loads(report)["checks"]) == 8

    print("python smoke test passed")


if __name__ == "__main__":
    main()
