"""Regenerate ``frozen.json`` from the independent oracles.

Run ``python3 tests/oracles/freeze.py`` from the repository root.
"""
import json
from pathlib import Path

import numpy as np

from reference import ex1_dense, gaussian_cov_eigs, histogram_l1_independent, trapezoid_grid

HERE = Path(__file__).parent


def main():
    out = {}
    ex1 = {}
    for xi in (-2.0, 0.0, 0.7, 2.5):
        x, u = ex1_dense(xi)
        ex1[repr(xi)] = {"probes": [float(u[i]) for i in (25, 50, 100, 150, 175)]}
    out["ex1_dense_fem"] = {"n": 200, "probe_nodes": [25, 50, 100, 150, 175], "values": ex1}

    pts, w = trapezoid_grid(0.0, 0.5, 0.0, 1.0, 10, 20)
    lam1, tr1 = gaussian_cov_eigs(pts, w, 0.1, 0.5, 0.5, 16)
    pts, w = trapezoid_grid(0.5, 1.0, 0.0, 1.0, 10, 20)
    lam2, tr2 = gaussian_cov_eigs(pts, w, 0.1, 0.05, 0.5, 16)
    out["kl_trapezoid"] = {"d1": {"eigenvalues": lam1.tolist(), "trace": tr1},
                           "d2": {"eigenvalues": lam2.tolist(), "trace": tr2}}

    out["density_self_consistency"] = {
        "bins": 10, "n": 10_000,
        "l1": [histogram_l1_independent(s) for s in range(5)],
    }
    (HERE / "frozen.json").write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
