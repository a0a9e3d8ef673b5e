"""Error metrics, Monte Carlo means, histogram densities and timing."""
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import gaussian_kde

from .errors import BinMismatch, EmptyInput, ShapeMismatch, ZeroReference

__all__ = [
    "ErrorReport",
    "relative_mean_error",
    "mc_mean",
    "DensityEstimate",
    "pointwise_density",
    "density_pair",
    "l1_density_distance",
    "TimingReport",
    "Stopwatch",
]

DEFAULT_BINS = 60


@dataclass(frozen=True)
class ErrorReport:
    epsilon: float
    per_sample: np.ndarray
    n: int
    norm: str = "l2"

    def to_dict(self):
        return {"epsilon": self.epsilon, "n": self.n, "norm": self.norm,
                "max": float(self.per_sample.max()) if self.n else 0.0}


def relative_mean_error(approx, reference):
    """Mean over samples of ``||u - u_hat||_2 / ||u||_2``.

    Rows are samples; 1-D inputs are treated as scalar-per-sample series.
    """
    a = np.asarray(approx, dtype=float)
    r = np.asarray(reference, dtype=float)
    if a.shape != r.shape:
        raise ShapeMismatch(f"approximation {a.shape} and reference {r.shape} differ")
    if a.shape[0] == 0:
        raise EmptyInput("no samples")
    if a.ndim == 1:
        a, r = a[:, None], r[:, None]
    den = np.linalg.norm(r.reshape(r.shape[0], -1), axis=1)
    bad = np.flatnonzero(den < 1e-300)
    if bad.size:
        raise ZeroReference(f"reference sample {bad[0]} has zero norm")
    errs = np.linalg.norm((a - r).reshape(a.shape[0], -1), axis=1) / den
    return ErrorReport(float(np.mean(errs)), errs, int(errs.size))


def mc_mean(fields):
    """Sample mean with a second corrective pass over the deviations."""
    X = np.asarray(list(fields) if not isinstance(fields, np.ndarray) else fields, dtype=float)
    if X.shape[0] == 0:
        raise EmptyInput("cannot average an empty stream")
    m = X.sum(axis=0) / X.shape[0]
    return m + (X - m).sum(axis=0) / X.shape[0]


@dataclass(frozen=True, eq=False)
class DensityEstimate:
    edges: np.ndarray
    masses: np.ndarray
    clamped: int = 0
    location: Optional[object] = None
    grid: Optional[np.ndarray] = None
    kde: Optional[np.ndarray] = None

    @property
    def centers(self):
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def pdf(self):
        return self.masses / np.diff(self.edges)


def pointwise_density(values, bins=DEFAULT_BINS, range=None, kernel=False, location=None,
                      grid_points=200):
    """Normalized histogram; values outside ``range`` land in the end bins."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise EmptyInput("no values to bin")
    lo, hi = (float(v.min()), float(v.max())) if range is None else map(float, range)
    if hi <= lo:
        pad = max(abs(lo), 1.0) * 1e-12
        lo, hi = lo - pad, hi + pad
    edges = np.linspace(lo, hi, bins + 1)
    clamped = int(np.count_nonzero((v < lo) | (v > hi)))
    counts, _ = np.histogram(np.clip(v, lo, hi), bins=edges)
    masses = counts / v.size
    grid = kde = None
    if kernel and v.size > 1 and np.ptp(v) > 0:
        grid = np.linspace(lo, hi, grid_points)
        kde = gaussian_kde(v, bw_method="silverman")(grid)
    return DensityEstimate(edges, masses, clamped, location, grid, kde)


def density_pair(approx, reference, bins=DEFAULT_BINS, **kw):
    """Two histograms over the pooled range of both series."""
    a = np.asarray(approx, dtype=float).ravel()
    r = np.asarray(reference, dtype=float).ravel()
    pooled = np.concatenate([a, r])
    if pooled.size == 0:
        raise EmptyInput("no values to bin")
    rng = (float(pooled.min()), float(pooled.max()))
    return (pointwise_density(a, bins, rng, **kw), pointwise_density(r, bins, rng, **kw))


def l1_density_distance(a, b):
    if a.edges.shape != b.edges.shape or not np.array_equal(a.edges, b.edges):
        raise BinMismatch("density estimates use different bin edges")
    return float(np.abs(a.masses - b.masses).sum())


@dataclass
class TimingReport:
    offline: float = 0.0
    online: float = 0.0
    n_online: int = 0
    reference: float = 0.0
    n_reference: int = 0
    phases: dict = field(default_factory=dict)

    @property
    def total(self):
        return self.offline + self.online

    @property
    def online_per_sample(self):
        return self.online / self.n_online if self.n_online else float("nan")

    @property
    def reference_per_sample(self):
        return self.reference / self.n_reference if self.n_reference else float("nan")

    def to_dict(self):
        return {"offline": self.offline, "online": self.online, "total": self.total,
                "online_per_sample": self.online_per_sample,
                "reference_per_sample": self.reference_per_sample,
                "n_online": self.n_online, "phases": dict(self.phases)}


class Stopwatch:
    """Accumulates monotonic wall-clock time per named phase."""

    def __init__(self):
        self.phases = {}

    @contextmanager
    def phase(self, name):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.phases[name] = self.phases.get(name, 0.0) + time.perf_counter() - t0
