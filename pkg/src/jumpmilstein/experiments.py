"""Strong-error estimation, order fitting and scheme diagnostics.

Paths are processed in fixed-size batches. Each path draws its own noise
from ``(seed, path_index)`` and zero-length padding never changes a path's
numbers, so the per-path errors, and hence every report, are identical for
any batch order or worker count.
"""

from __future__ import annotations

import csv
import io
import json
import multiprocessing as mp
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .randomness import PaddedBatch, make_path_randomness, pad_batch
from .schemes import EULER, KINDS, MILSTEIN, TRANSFORMED, dynamics_for, interpolate_columns, run_scheme

Oracle = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


class ExcessiveOverflow(ArithmeticError):
    pass


@dataclass(frozen=True)
class GBMJumpOracle:
    """Exact solution of dX = aX dt + bX dW + cX- dN."""

    a: float
    b: float
    c: float
    xi: float

    def __call__(self, t, W, N):
        return self.xi * np.exp((self.a - 0.5 * self.b ** 2) * t + self.b * W) * (1.0 + self.c) ** N


@dataclass(frozen=True)
class ExperimentSpec:
    model: object
    kind: str
    M_list: tuple[int, ...]
    M_ref: int
    p: float = 2.0
    n_paths: int = 1000
    seed: int = 0
    oracle: Optional[Oracle] = None
    nu_fraction: float = 0.5
    tol: float = 1e-12
    batch_size: int = 128
    workers: int = 1
    max_excluded_fraction: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "M_list", tuple(int(m) for m in self.M_list))
        if self.kind not in KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if not self.M_list or min(self.M_list) < 1:
            raise ValueError("M_list must hold positive resolutions")
        if self.oracle is None and self.M_ref < 8 * max(self.M_list):
            raise ValueError("M_ref must be >= 8 * max(M_list) without an oracle")
        if any(self.M_ref % m for m in self.M_list):
            raise ValueError("every M must divide M_ref")
        if self.n_paths < 100:
            raise ValueError("n_paths must be >= 100")
        if self.p < 1:
            raise ValueError("p must be >= 1")


@dataclass
class FitResult:
    slope: float
    intercept: float
    ci_low: float
    ci_high: float
    residuals: np.ndarray


def fit_order(deltas: Sequence[float], errors: Sequence[float]) -> FitResult:
    """Least-squares slope of log2(error) against log2(delta), 95% CI."""
    x = np.log2(np.asarray(deltas, dtype=float))
    y = np.log2(np.asarray(errors, dtype=float))
    n = len(x)
    A = np.column_stack([x, np.ones(n)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    if n > 2:
        s2 = resid @ resid / (n - 2)
        se = np.sqrt(s2 / np.sum((x - x.mean()) ** 2))
        half = stats.t.ppf(0.975, n - 2) * se
    else:
        half = np.nan
    return FitResult(float(slope), float(intercept), float(slope - half), float(slope + half), resid)


@dataclass
class ErrorReport:
    M: np.ndarray
    delta: np.ndarray
    error: np.ndarray
    stderr: np.ndarray
    n_effective: int
    excluded_paths: int
    fit: Optional[FitResult]
    path_errors: np.ndarray = field(repr=False)
    config: dict = field(default_factory=dict)

    @property
    def exact(self) -> bool:
        return bool(np.all(self.error == 0.0))

    @property
    def slope(self) -> float:
        return self.fit.slope if self.fit else float("nan")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["M", "delta", "error", "stderr", "n_effective"])
        for row in zip(self.M, self.delta, self.error, self.stderr):
            w.writerow([int(row[0]), repr(float(row[1])), repr(float(row[2])),
                        repr(float(row[3])), self.n_effective])
        return buf.getvalue()

    def summary(self) -> dict:
        fit = self.fit
        out = {
            "slope": fit.slope if fit else None,
            "intercept": fit.intercept if fit else None,
            "ci_low": fit.ci_low if fit else None,
            "ci_high": fit.ci_high if fit else None,
            "excluded_paths": self.excluded_paths,
            "exact": self.exact,
        }
        if self.config:
            out["config"] = self.config
        return out

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def _batches(n_paths: int, batch_size: int) -> list[np.ndarray]:
    idx = np.arange(n_paths)
    return [idx[i:i + batch_size] for i in range(0, n_paths, batch_size)]


def _batch_randomness(dyn, M_ref: int, seed: int, indices) -> PaddedBatch:
    return pad_batch([make_path_randomness(dyn.lam, dyn.T, M_ref, seed, int(i)) for i in indices])


def _pathwise_sup_error(dyn, kind, batch: PaddedBatch, M, ref_x, ref_x_left):
    cols, times, W, jumps = batch.select(M)
    run = run_scheme(dyn, kind, times, W, jumps)
    approx = np.asarray(dyn.to_original(interpolate_columns(run, cols, batch.times, batch.W)))
    err = np.max(np.abs(ref_x - approx), axis=1)
    jc = batch.is_jump
    if jc.any():
        approx_left = np.asarray(dyn.to_original(
            interpolate_columns(run, cols, batch.times, batch.W, left=True)))
        left_err = np.where(jc, np.abs(ref_x_left - approx_left), 0.0)
        err = np.maximum(err, left_err.max(axis=1))
    return err, run.failed


def _strong_error_batch(spec: ExperimentSpec, indices) -> tuple[np.ndarray, np.ndarray]:
    dyn = dynamics_for(spec.model, spec.kind, spec.nu_fraction, spec.tol)
    batch = _batch_randomness(dyn, spec.M_ref, spec.seed, indices)
    failed = np.zeros(len(indices), dtype=bool)
    if spec.oracle is not None:
        N = batch.jump_counts()
        ref_x = spec.oracle(batch.times, batch.W, N)
        ref_left = spec.oracle(batch.times, batch.W, N - batch.is_jump)
    else:
        ref = run_scheme(dyn, spec.kind, batch.times, batch.W, batch.is_jump)
        ref_x = np.asarray(dyn.to_original(ref.values))
        ref_left = np.asarray(dyn.to_original(ref.pre))
        failed |= ref.failed
    errs = np.empty((len(indices), len(spec.M_list)))
    for j, M in enumerate(spec.M_list):
        errs[:, j], f = _pathwise_sup_error(dyn, spec.kind, batch, M, ref_x, ref_left)
        failed |= f
    return errs, failed


_POOL_JOB = None


def _pool_call(indices):
    fn, spec = _POOL_JOB
    return fn(spec, indices)


def map_batches(fn, spec, n_paths: int, batch_size: int, workers: int) -> list:
    """Apply ``fn(spec, indices)`` to every batch, results in batch order."""
    batches = _batches(n_paths, batch_size)
    if workers <= 1 or len(batches) == 1:
        return [fn(spec, b) for b in batches]
    global _POOL_JOB
    _POOL_JOB = (fn, spec)
    try:
        # fork shares the (possibly lambda-laden) model without pickling it
        with mp.get_context("fork").Pool(workers) as pool:
            return pool.map(_pool_call, batches, chunksize=1)
    finally:
        _POOL_JOB = None


def strong_error(spec: ExperimentSpec) -> ErrorReport:
    """E[sup_t |X_t - approx_t|^p]^(1/p) per resolution, with the fitted order.

    The sup runs over the master grid (and the left limits at jumps), the
    finest mesh on which both the reference and the interpolant are known.
    """
    parts = map_batches(_strong_error_batch, spec, spec.n_paths, spec.batch_size, spec.workers)
    errs = np.concatenate([e for e, _ in parts])
    failed = np.concatenate([f for _, f in parts])
    n_failed = int(failed.sum())
    if n_failed > spec.max_excluded_fraction * spec.n_paths:
        raise ExcessiveOverflow(f"{n_failed} of {spec.n_paths} paths overflowed")
    good = errs[~failed]
    n = len(good)
    moments = good ** spec.p
    mean = moments.mean(axis=0)
    err = mean ** (1.0 / spec.p)
    se_moment = moments.std(axis=0, ddof=1) / np.sqrt(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        se = np.where(mean > 0, err / (spec.p * mean) * se_moment, 0.0)
    M = np.asarray(spec.M_list)
    T = float(getattr(spec.model, "T"))
    delta = T / M
    fit = fit_order(delta, err) if np.all(err > 0) and len(M) >= 2 else None
    return ErrorReport(M, delta, err, se, n, n_failed, fit, errs)


@dataclass
class ComparisonReport:
    first: ErrorReport
    second: ErrorReport
    ratio: np.ndarray
    first_below_at_finest: bool


def compare_schemes(spec_a: ExperimentSpec, spec_b: ExperimentSpec, n_finest: int = 2) -> ComparisonReport:
    """Paired errors of two schemes on identical model, seed and resolutions."""
    for attr in ("model", "M_list", "M_ref", "seed", "n_paths", "p"):
        if getattr(spec_a, attr) is not getattr(spec_b, attr) and getattr(spec_a, attr) != getattr(spec_b, attr):
            raise ValueError(f"specs differ in {attr}")
    a, b = strong_error(spec_a), strong_error(spec_b)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(b.error > 0, a.error / b.error, np.where(a.error == 0, 1.0, np.inf))
    finest = np.argsort(a.M)[-n_finest:]
    return ComparisonReport(a, b, ratio, bool(np.all(a.error[finest] < b.error[finest])))


def _occupation_batch(job, indices):
    dyn, kind, zeta, eps, M_list, M_ref, seed = job
    batch = _batch_randomness(dyn, M_ref, seed, indices)
    dt = np.diff(batch.times, axis=1)
    out = np.empty((len(indices), len(M_list), len(eps)))
    for j, M in enumerate(M_list):
        cols, times, W, jumps = batch.select(M)
        run = run_scheme(dyn, kind, times, W, jumps)
        z = interpolate_columns(run, cols, batch.times, batch.W)[:, :-1]
        dist = np.abs(z - zeta)
        for k, e in enumerate(eps):
            out[:, j, k] = np.sum((dist <= e) * dt, axis=1)
    return out


def occupation_time(dyn, zeta: float, eps, M_list, n_paths: int, seed: int, *, M_ref: int | None = None,
                    kind: str = MILSTEIN, batch_size: int = 128, workers: int = 1) -> np.ndarray:
    """Monte Carlo estimate of the integral over [0, T] of P(|Z_t - zeta| <= eps).

    ``dyn`` is the state-space dynamics the scheme runs on (for a
    discontinuous drift pass the transformed model). Returns an array of
    shape (len(M_list), len(eps)); the time integral is a left Riemann sum
    of the interpolant over the master grid.
    """
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    if np.any(eps <= 0):
        raise ValueError("eps must be positive")
    M_list = tuple(int(m) for m in np.atleast_1d(M_list))
    M_ref = M_ref or 8 * max(M_list)
    job = (dyn, kind, float(zeta), eps, M_list, M_ref, seed)
    parts = map_batches(_occupation_batch, job, n_paths, batch_size, workers)
    return np.concatenate(parts).mean(axis=0)


@dataclass
class OccupationFit:
    coef_eps: float
    coef_sqrt_delta: float
    residuals: np.ndarray


def fit_occupation(eps, deltas, estimates) -> OccupationFit:
    """Least squares of estimates[i, k] on eps[k] and sqrt(deltas[i]).

    No intercept: the bound being checked is c (eps + sqrt(delta)).
    """
    eps = np.asarray(eps, dtype=float)
    deltas = np.asarray(deltas, dtype=float)
    E, D = np.meshgrid(eps, np.sqrt(deltas))
    A = np.column_stack([E.ravel(), D.ravel()])
    y = np.asarray(estimates, dtype=float).ravel()
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return OccupationFit(float(coef[0]), float(coef[1]), y - A @ coef)


@dataclass
class MomentReport:
    M: np.ndarray
    estimate: np.ndarray
    stderr: np.ndarray
    ratio: float
    growth_flag: bool


def _moment_batch(job, indices):
    dyn, kind, p, M_list, M_ref, seed = job
    batch = _batch_randomness(dyn, M_ref, seed, indices)
    out = np.empty((len(indices), len(M_list)))
    for j, M in enumerate(M_list):
        cols, times, W, jumps = batch.select(M)
        run = run_scheme(dyn, kind, times, W, jumps)
        z = interpolate_columns(run, cols, batch.times, batch.W)
        sup = np.maximum(np.max(np.abs(z), axis=1), np.max(np.abs(run.pre), axis=1))
        out[:, j] = sup ** p
    return out


def moment_diagnostic(dyn, kind: str, p: float, M_list, n_paths: int, seed: int, *,
                      M_ref: int | None = None, batch_size: int = 128, workers: int = 1,
                      threshold: float = 1.2) -> MomentReport:
    """E[sup_t |Z^(M)_t|^p] per resolution on shared noise.

    The sup covers the interpolant on the master grid plus every pre-jump
    value. ``growth_flag`` is set when max/min across M reaches
    ``threshold``.
    """
    if p < 2:
        raise ValueError("p must be >= 2")
    if not hasattr(dyn, "coefficients"):
        dyn = dynamics_for(dyn, kind)
    M_list = tuple(int(m) for m in M_list)
    M_ref = M_ref or 8 * max(M_list)
    job = (dyn, kind, float(p), M_list, M_ref, seed)
    vals = np.concatenate(map_batches(_moment_batch, job, n_paths, batch_size, workers))
    est = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / np.sqrt(len(vals))
    lo = est.min()
    ratio = float(est.max() / lo) if lo > 0 else (1.0 if est.max() == 0 else float("inf"))
    return MomentReport(np.asarray(M_list), est, se, ratio, ratio >= threshold)


__all__ = [
    "EULER", "MILSTEIN", "TRANSFORMED", "ExperimentSpec", "ErrorReport", "FitResult", "GBMJumpOracle",
    "ComparisonReport", "ExcessiveOverflow", "compare_schemes", "fit_order", "fit_occupation",
    "moment_diagnostic", "occupation_time", "strong_error", "MomentReport", "OccupationFit",
]
