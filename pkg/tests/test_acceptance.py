"""End-to-end acceptance checks at desk scale.

Each test records a one-line verdict that the terminal summary prints,
then asserts at the stated tolerance.
"""
import filecmp
import os
import time

import numpy as np
import pytest

from sddvs.coeffspace import draw_samples
from sddvs.experiments import default_config, offline_build, online, reference, run_experiment
from sddvs.fem import solve_global
from sddvs.metrics import density_pair, l1_density_distance
from sddvs.problems import ex3
from sddvs.recovery import recover_full
from sddvs.schur import solve_interface_direct

pytestmark = pytest.mark.acceptance


def _record(log, k, ok, detail):
    log[k] = (bool(ok), detail)
    return ok


def test_schur_identity_ex2(acceptance_log):
    t0 = time.perf_counter()
    off = offline_build(default_config("ex2"))
    prob = off.problem
    worst = 0.0
    for xi in draw_samples(prob.space, 20, 123).samples:
        ref = solve_global(prob.op, prob.rhs, xi)
        u_gamma = solve_interface_direct(off.system, xi)
        dd = recover_full(list(prob.blocks), u_gamma, xi).values
        worst = max(worst, np.max(np.abs(dd - ref)) / np.max(np.abs(ref)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed <= 60
    _record(acceptance_log, 1, ok, f"max rel err {worst:.2e} (<= 1e-9), {elapsed:.1f}s (<= 60s)")
    assert worst <= 1e-9
    assert elapsed <= 60


def test_interpolation_all_builds(runs, acceptance_log):
    defects = {name: runs(name)[0].checks["max_interpolation_defect"]
               for name in ("ex1", "ex2", "ex3")}
    worst = max(defects.values())
    _record(acceptance_log, 2, worst <= 1e-9,
            "max snapshot residual/||F|| " + ", ".join(f"{k}={v:.1e}" for k, v in defects.items()))
    assert worst <= 1e-9


def test_ex1_accuracy(runs, acceptance_log):
    report, _, cfg = runs("ex1")
    eps = report.errors["interface"]["epsilon"]
    assert (cfg.mesh, cfg.training, cfg.test) == (200, 20, 1000)
    assert (cfg.caps_S, cfg.caps_F) == ([4, 1], [4, 1])
    _record(acceptance_log, 3, eps <= 1e-4, f"epsilon {eps:.3e} (<= 1e-4)")
    assert eps <= 1e-4


def test_ex1_monotone_in_caps(runs, acceptance_log):
    base = runs("ex1")[0].errors["interface"]["epsilon"]
    more = runs("ex1", caps_S=[6, 1])[0].errors["interface"]["epsilon"]
    _record(acceptance_log, 4, more <= base, f"epsilon(6,1,4,1) {more:.3e} <= epsilon(4,1,4,1) {base:.3e}")
    assert more <= base


def test_ex2_accuracy(runs, acceptance_log):
    report, _, cfg = runs("ex2")
    eps = report.errors["interface"]["epsilon"]
    assert cfg.max_M == 10 and cfg.test == 1000
    _record(acceptance_log, 5, eps <= 1e-8, f"epsilon {eps:.3e} (<= 1e-8), M={report.counts['M']}")
    assert eps <= 1e-8


def test_ex2_online_speedup(runs, acceptance_log):
    report, _, _ = runs("ex2")
    t = report.timing
    assert t["n_online"] >= 500
    ratio = t["online_per_sample"] / t["reference_per_sample"]
    _record(acceptance_log, 6, ratio <= 0.1,
            f"online/monolithic per sample {ratio:.3e} (<= 0.1) over {t['n_online']} samples")
    assert ratio <= 0.1


def test_ex3_convergence(runs, acceptance_log):
    report, _, cfg = runs("ex3")
    assert cfg.training == 120 and cfg.test == 500
    eps = dict(report.sweep)
    ok = eps[20] < eps[8] < eps[4] and eps[20] <= 1e-3
    _record(acceptance_log, 7, ok,
            f"epsilon M=4 {eps[4]:.2e}, M=8 {eps[8]:.2e}, M=20 {eps[20]:.2e} (<= 1e-3)")
    assert eps[20] < eps[8] < eps[4]
    assert eps[20] <= 1e-3


def test_kl_spectrum(acceptance_log):
    t0 = time.perf_counter()
    kl1, kl2 = ex3().extras["kl"]
    ok = True
    for kl in (kl1, kl2):
        lam = kl.eigenvalues
        ok &= bool(np.all(np.diff(lam) <= 0)) and bool(lam.min() >= -1e-12 * lam[0])
    f1, f2 = kl1.captured_fraction(16), kl2.captured_fraction(16)
    elapsed = time.perf_counter() - t0
    ok = ok and f1 >= 0.99 and f2 < f1 and elapsed <= 30
    _record(acceptance_log, 8, ok, f"captured D1 {f1:.5f} (>= 0.99), D2 {f2:.5f} (< D1), {elapsed:.1f}s")
    assert ok


def test_ex2_density(acceptance_log):
    t0 = time.perf_counter()
    off = offline_build(default_config("ex2"))
    prob = off.problem
    node = prob.interface_nodes()[prob.monitor]
    samples = draw_samples(prob.space, 10_000, 2024).samples
    a = online(off, samples)[:, node]
    r = reference(prob, samples)[:, node]
    da, dr = density_pair(a, r)
    l1 = l1_density_distance(da, dr)
    elapsed = time.perf_counter() - t0
    _record(acceptance_log, 9, l1 <= 0.05 and elapsed <= 120,
            f"L1 {l1:.2e} (<= 0.05) on 10^4 shared samples, {elapsed:.1f}s (<= 120s)")
    assert l1 <= 0.05
    assert elapsed <= 120


def test_determinism(runs, acceptance_log, tmp_path):
    same = {}
    for name in ("ex1", "ex2", "ex3"):
        _, first, cfg = runs(name)
        again = tmp_path / name
        run_experiment(cfg, str(again))
        csvs = sorted(f for f in os.listdir(first) if f.endswith(".csv"))
        assert csvs
        match, mismatch, errors = filecmp.cmpfiles(first, again, csvs, shallow=False)
        same[name] = not mismatch and not errors
    _record(acceptance_log, 10, all(same.values()),
            "byte-identical CSVs " + ", ".join(f"{k}={v}" for k, v in same.items()))
    assert all(same.values())
