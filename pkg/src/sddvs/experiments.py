"""Experiment drivers: configuration, offline/online pipeline, outputs.

A run builds the problem, the separated Schur system and the interface
reduced model (offline), evaluates the model plus interior recovery on a
test set (online), optionally solves the monolithic reference for every
test sample, and writes CSV series and a JSON report into ``out``.
"""
import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .coeffspace import draw_samples
from .errors import ConfigError, SddvsError
from .fem import solve_global, write_nodal_csv
from .metrics import (Stopwatch, TimingReport, density_pair, l1_density_distance, mc_mean,
                      relative_mean_error)
from .problems import DEFAULT_MESH, FULL_MESH, build_problem
from .recovery import build_separated_recovery, evaluate_recovery, recover_full
from .schur import assemble_global, build_contribution, build_interface_rom
from .vscore import VsConfig, evaluate_solution, interpolation_defect, jsonl_logger

__all__ = [
    "SCHEMA_VERSION",
    "ExperimentConfig",
    "RunReport",
    "default_config",
    "load_config",
    "run_experiment",
    "offline_build",
    "sweep_errors",
    "emit_sweep",
]

SCHEMA_VERSION = 1

_DEFAULTS = {
    "ex1": dict(training=20, test=1000, caps_S=[4, 1], caps_F=[4, 1], max_M=5),
    "ex2": dict(training=20, test=1000, caps_S=[20, 20, 20], caps_F=[20, 20, 20], max_M=10),
    "ex3": dict(training=120, test=500, caps_S=[20, 20], caps_F=[80, 80], max_M=20),
}
_FULL_TEST = {"ex1": 10000, "ex2": 10000, "ex3": 1000}


@dataclass(frozen=True)
class ExperimentConfig:
    example: str
    mesh: int
    training: int
    test: int
    caps_S: list
    caps_F: list
    max_M: int
    schema: int = SCHEMA_VERSION
    seed: int = 0
    tol_S: float = 1e-12
    tol_F: float = 1e-12
    tol_M: float = 1e-12
    sweep: Optional[list] = None
    density_samples: int = 0
    bins: int = 60
    run_reference: bool = True
    emit_fields: bool = True
    verbose: bool = False
    workers: int = 1
    out: Optional[str] = None

    def __post_init__(self):
        if self.schema != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema version {self.schema}")
        if self.example not in _DEFAULTS:
            raise ConfigError(f"unknown example {self.example!r}")
        n_sub = len(_DEFAULTS[self.example]["caps_S"])
        for name in ("caps_S", "caps_F"):
            caps = getattr(self, name)
            if len(caps) != n_sub or any(int(c) < 1 for c in caps):
                raise ConfigError(f"{name} needs {n_sub} positive entries")
        for name in ("mesh", "training", "test", "max_M", "workers", "bins"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.density_samples < 0:
            raise ConfigError("density_samples must be >= 0")
        for name in ("tol_S", "tol_F", "tol_M"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        caps = list(self.caps_S) + list(self.caps_F) + [self.max_M]
        if max(caps) > self.training:
            raise ConfigError(f"term caps {max(caps)} exceed the training set size {self.training}")
        if self.sweep is not None and any(int(m) < 0 for m in self.sweep):
            raise ConfigError("sweep values must be >= 0")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        if "example" not in d:
            raise ConfigError("config needs an 'example' key")
        base = asdict(default_config(d["example"]))
        base.update(d)
        try:
            return cls(**base)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self):
        return asdict(self)

    def with_(self, **kw):
        return replace(self, **kw)

    @property
    def sweep_values(self):
        return list(range(self.max_M + 1)) if self.sweep is None else sorted(set(self.sweep))


def default_config(example, full_scale=False):
    if example not in _DEFAULTS:
        raise ConfigError(f"unknown example {example!r}")
    d = dict(_DEFAULTS[example])
    d["mesh"] = (FULL_MESH if full_scale else DEFAULT_MESH)[example]
    if full_scale:
        d["test"] = _FULL_TEST[example]
    return ExperimentConfig(example=example, **d)


def load_config(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return ExperimentConfig.from_dict(data)


@dataclass
class Offline:
    problem: object
    training: object
    system: object
    rom: object
    recovery: object        # SeparatedRecovery or None
    solutions: list         # every greedy build, for auditing


@dataclass
class RunReport:
    config: dict
    counts: dict
    errors: dict = field(default_factory=dict)
    sweep: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    manifest: dict = field(default_factory=dict)
    out: Optional[str] = None

    def to_dict(self):
        return asdict(self)


def _stage(name):
    def wrap(exc):
        if not hasattr(exc, "stage"):
            exc.stage = name
        return exc
    return wrap


def offline_build(cfg, on_step=None):
    """Problem assembly, separated Schur system and interface model."""
    stage = "assemble"
    try:
        prob = build_problem(cfg.example, cfg.mesh)
        train = draw_samples(prob.space, cfg.training, cfg.seed)
        stage = "schur"
        contribs = []
        for b, cs, cf in zip(prob.blocks, cfg.caps_S, cfg.caps_F):
            contribs.append(build_contribution(b, VsConfig(cfg.tol_S, int(cs), train, cfg.seed),
                                               VsConfig(cfg.tol_F, int(cf), train, cfg.seed),
                                               on_step=on_step))
        system = assemble_global(contribs, prob.partition)
        stage = "rom"
        rom = build_interface_rom(system, VsConfig(cfg.tol_M, cfg.max_M, train, cfg.seed),
                                  on_step=on_step)
        rec = None
        if all(b.m_a == 1 for b in prob.blocks):
            rec = build_separated_recovery(list(prob.blocks), rom)
    except SddvsError as exc:
        raise _stage(stage)(exc)
    sols = [rom.sol]
    for c in contribs:
        sols.extend(c.X.columns.values())
        if c.y is not None:
            sols.append(c.y)
    return Offline(prob, train, system, rom, rec, sols)


def online(off, samples, rom=None):
    """Full nodal fields from the reduced model plus interior recovery."""
    rom = rom or off.rom
    if off.recovery is not None:
        return evaluate_recovery(off.recovery, rom, samples).values
    u_gamma = evaluate_solution(rom.sol, samples)
    return recover_full(list(off.problem.blocks), u_gamma, samples).values


def reference(prob, samples, workers=1):
    solve = lambda x: solve_global(prob.op, prob.rhs, x)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return np.array(list(pool.map(solve, samples)))
    return np.array([solve(x) for x in samples])


def sweep_errors(rom, samples, ref_gamma, M_values):
    """``[(M, epsilon)]`` for prefix truncations of the reduced model."""
    rows = []
    for m in M_values:
        u = evaluate_solution(rom.sol.truncate(m), samples)
        rows.append((int(m), relative_mean_error(u, ref_gamma).epsilon))
    return rows


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(v) if isinstance(v, (int, np.integer)) else repr(float(v))
                              for v in row) + "\n")


def _digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run_experiment(cfg, out=None):
    """Run one experiment end to end and return its :class:`RunReport`."""
    out = out or cfg.out
    watch = Stopwatch()
    log_fh = None
    if out is not None:
        os.makedirs(out, exist_ok=True)
        if cfg.verbose:
            log_fh = open(os.path.join(out, "build_log.jsonl"), "w")
    try:
        with watch.phase("offline"):
            off = offline_build(cfg, jsonl_logger(log_fh) if log_fh else None)
    finally:
        if log_fh:
            log_fh.close()
    prob, system, rom = off.problem, off.system, off.rom
    gnodes = prob.interface_nodes()

    counts = dict(system.summary())
    counts.update(M=rom.M, m_a=[b.m_a for b in prob.blocks], m_b=[b.m_b for b in prob.blocks],
                  partition=prob.partition.summary(), rom_stop=rom.sol.stop_reason)
    report = RunReport(cfg.to_dict(), counts, out=out)
    report.checks["max_interpolation_defect"] = max(interpolation_defect(s) for s in off.solutions)

    test = draw_samples(prob.space, cfg.test, cfg.seed + 1).samples
    try:
        online(off, test[:1])   # warm the evaluation programs
        t0 = time.perf_counter()
        U = online(off, test)
        t_on = time.perf_counter() - t0
    except SddvsError as exc:
        raise _stage("online")(exc)
    timing = TimingReport(offline=watch.phases["offline"], online=t_on, n_online=len(test))

    files = {}
    if cfg.run_reference:
        t0 = time.perf_counter()
        R = reference(prob, test, cfg.workers)
        timing.reference = time.perf_counter() - t0
        timing.n_reference = len(test)
        err_g = relative_mean_error(U[:, gnodes], R[:, gnodes])
        err_full = relative_mean_error(U, R)
        report.errors = {"interface": err_g.to_dict(), "full": err_full.to_dict()}
        report.sweep = sweep_errors(rom, test, R[:, gnodes], cfg.sweep_values)

        dens_U, dens_R = U[:, gnodes[prob.monitor]], R[:, gnodes[prob.monitor]]
        if cfg.density_samples:
            ds = draw_samples(prob.space, cfg.density_samples, cfg.seed + 2).samples
            dens_U = online(off, ds)[:, gnodes[prob.monitor]]
            dens_R = reference(prob, ds, cfg.workers)[:, gnodes[prob.monitor]]
        da, dr = density_pair(dens_U, dens_R, cfg.bins)
        report.errors["density_l1"] = l1_density_distance(da, dr)
        report.errors["monitor"] = [float(v) for v in prob.mesh.nodes[gnodes[prob.monitor]]]

        if out is not None:
            files["eps_vs_M.csv"] = ("M", "epsilon"), report.sweep
            files["per_sample_errors.csv"] = (("sample", "interface_error", "full_error"),
                                              [(i, a, b) for i, (a, b) in enumerate(
                                                  zip(err_g.per_sample, err_full.per_sample))])
            for tag, d in (("sddvs", da), ("reference", dr)):
                files[f"density_{tag}.csv"] = (("bin_lo", "bin_hi", "mass"),
                                               list(zip(d.edges[:-1], d.edges[1:], d.masses)))
    report.timing = timing.to_dict()

    if out is not None:
        for name, (header, rows) in files.items():
            _write_csv(os.path.join(out, name), header, rows)
        if cfg.emit_fields:
            write_nodal_csv(os.path.join(out, "mean_field_sddvs.csv"), prob.mesh, mc_mean(U))
            if cfg.run_reference:
                write_nodal_csv(os.path.join(out, "mean_field_reference.csv"), prob.mesh,
                                mc_mean(R))
        for name in sorted(os.listdir(out)):
            if name.endswith(".csv"):
                report.manifest[name] = _digest(os.path.join(out, name))
        with open(os.path.join(out, "report.json"), "w") as fh:
            json.dump(_jsonable(report.to_dict()), fh, indent=2, sort_keys=True)
    return report


def emit_sweep(cfg, M_values, out=None):
    """Run with the model built up to ``max(M_values)`` and return the sweep rows."""
    M_values = sorted(set(int(m) for m in M_values))
    cfg = cfg.with_(max_M=max(max(M_values), 1), sweep=M_values, run_reference=True)
    return run_experiment(cfg, out).sweep


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    return x
