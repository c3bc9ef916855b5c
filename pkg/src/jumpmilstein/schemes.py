"""Jump-adapted Euler and quasi-Milstein schemes.

All schemes run over a batch of paths at once: ``run_scheme`` takes
(B, L) arrays of grid times, Brownian values and jump flags and steps the
L columns in lockstep. Zero-length columns (duplicated times) are exact
no-ops, which is what lets paths with different jump-adapted grids share
one loop.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .coefficients import JumpDiffusionModel
from .randomness import AdaptedGrid, PathRandomness, build_grid, restrict
from .transform import ModelDynamics, TransformedModel, build_transform, transform_model

EULER = "euler_jump_adapted"
MILSTEIN = "quasi_milstein_jump_adapted"
TRANSFORMED = "transformed_quasi_milstein"
KINDS = (EULER, MILSTEIN, TRANSFORMED)


class SchemeOverflow(FloatingPointError):
    def __init__(self, message, path=None, step=None, time=None):
        self.path, self.step, self.time = path, step, time
        super().__init__(message)


class InterpolationSupportError(LookupError):
    pass


@dataclass(frozen=True)
class SchemeSpec:
    kind: str
    M: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}; choose from {KINDS}")
        if self.M < 1:
            raise ValueError("M must be >= 1")


def step_euler(z, dt, dw, mu, sig):
    return z + mu * dt + sig * dw


def step_quasi_milstein(z, dt, dw, mu, sig, dsig):
    """One quasi-Milstein step given coefficient values at z."""
    return z + mu * dt + sig * dw + 0.5 * sig * dsig * (dw * dw - dt)


def quasi_milstein_step(z, dt, dw, mu_t, sigma_t, d_sigma_t):
    """Same step with the coefficients passed as callables."""
    out = step_quasi_milstein(z, dt, dw, mu_t(z), sigma_t(z), d_sigma_t(z))
    if not np.all(np.isfinite(out)):
        raise SchemeOverflow(f"non-finite state after step from z={z}, dt={dt}, dw={dw}")
    return out


def apply_jump(z_pre, rho_t):
    return z_pre + rho_t(z_pre)


class ZeroDiffusionDerivative:
    """Wrap dynamics so the Milstein correction vanishes."""

    def __init__(self, dyn):
        self.dyn = dyn
        self.xi, self.T, self.lam = dyn.xi, dyn.T, dyn.lam

    def coefficients(self, z):
        mu, sig, _ = self.dyn.coefficients(z)
        return mu, sig, np.zeros_like(np.asarray(z, dtype=float))

    def jump(self, z):
        return self.dyn.jump(z)

    def to_original(self, z):
        return self.dyn.to_original(z)


@dataclass
class SchemeRun:
    """Raw batch output in the scheme's own state space.

    ``mu``, ``sig`` and ``dsig`` hold the coefficients at the post-jump
    value of every column; the interpolant needs them.
    """

    times: np.ndarray
    W: np.ndarray
    values: np.ndarray
    pre: np.ndarray
    mu: np.ndarray
    sig: np.ndarray
    dsig: np.ndarray
    failed: np.ndarray
    n_jumps: np.ndarray


def run_scheme(dyn, kind: str, times, W, is_jump, z0=None, *, raise_on_overflow=False) -> SchemeRun:
    """Step every column of (B, L) ``times``/``W``/``is_jump``.

    ``dyn`` provides ``coefficients(z) -> (mu, sigma, d_sigma)``,
    ``jump(z_pre)`` and ``xi``. The jump at column n+1 fires iff
    ``is_jump[:, n+1]``; each such column carries exactly one jump.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown scheme kind {kind!r}")
    times = np.atleast_2d(np.asarray(times, dtype=float))
    W = np.atleast_2d(np.asarray(W, dtype=float))
    is_jump = np.atleast_2d(np.asarray(is_jump, dtype=bool))
    B, L = times.shape
    z = np.full(B, float(dyn.xi if z0 is None else z0))
    values = np.empty((B, L))
    pre = np.empty((B, L))
    mu_a, sig_a, dsig_a = np.empty((B, L)), np.empty((B, L)), np.empty((B, L))
    failed = np.zeros(B, dtype=bool)
    n_jumps = np.zeros(B, dtype=np.int64)
    values[:, 0] = pre[:, 0] = z
    euler = kind == EULER
    # overflow is detected and handled per path below
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(L - 1):
            mu, sig, dsig = dyn.coefficients(z)
            mu_a[:, n], sig_a[:, n], dsig_a[:, n] = mu, sig, dsig
            dt = times[:, n + 1] - times[:, n]
            dw = W[:, n + 1] - W[:, n]
            if euler:
                z = step_euler(z, dt, dw, mu, sig)
            else:
                z = step_quasi_milstein(z, dt, dw, mu, sig, dsig)
            pre[:, n + 1] = z
            jumps = is_jump[:, n + 1]
            if jumps.any():
                z = z.copy()
                z[jumps] = dyn.jump(z[jumps])
                n_jumps += jumps
            bad = ~np.isfinite(z)
            if bad.any():
                if raise_on_overflow:
                    b = int(np.flatnonzero(bad)[0])
                    raise SchemeOverflow(
                        f"non-finite state on path {b} at step {n + 1} (t={times[b, n + 1]})",
                        path=b, step=n + 1, time=float(times[b, n + 1]))
                failed |= bad
                z = np.where(bad, 0.0, z)
            values[:, n + 1] = z
        mu, sig, dsig = dyn.coefficients(z)
        mu_a[:, -1], sig_a[:, -1], dsig_a[:, -1] = mu, sig, dsig
    return SchemeRun(times, W, values, pre, mu_a, sig_a, dsig_a, failed, n_jumps)


def interpolate_columns(run: SchemeRun, cols: np.ndarray, times, W, *, left: bool = False):
    """Continuous-time interpolant of ``run`` at every column of a finer grid.

    ``cols[k]`` is the fine column holding the run's k-th point; the run's
    own times and Brownian values anchor each interpolation. With
    ``left=True`` the left limit is returned, which differs from the plain
    value only at the run's jump points.
    """
    times = np.atleast_2d(times)
    W = np.atleast_2d(W)
    L = times.shape[1]
    side = "left" if left else "right"
    k = np.searchsorted(cols, np.arange(L), side=side) - 1
    k = np.maximum(k, 0)
    dt = times - run.times[:, k]
    dw = W - run.W[:, k]
    z, mu, sig, dsig = run.values[:, k], run.mu[:, k], run.sig[:, k], run.dsig[:, k]
    return z + mu * dt + sig * dw + 0.5 * sig * dsig * (dw * dw - dt)


def dynamics_for(model, kind: str, nu_fraction: float = 0.5, tol: float = 1e-12):
    """State-space dynamics a scheme kind runs on."""
    if isinstance(model, (TransformedModel, ModelDynamics)):
        return model
    if kind == TRANSFORMED:
        return transform_model(model, build_transform(model, nu_fraction, tol))
    return ModelDynamics(model)


@dataclass
class SamplePath:
    grid: AdaptedGrid
    values: np.ndarray
    pre_jump_values: np.ndarray
    state: np.ndarray
    state_pre: np.ndarray
    run: SchemeRun
    randomness: PathRandomness
    master_index: np.ndarray
    to_original: Callable
    n_jump_steps: int


def simulate(model, spec: SchemeSpec, pr: PathRandomness, *, nu_fraction: float = 0.5,
             tol: float = 1e-12) -> SamplePath:
    """Run one scheme on one path's grid(M), coupled to ``pr``.

    Transformed runs step Z = G(X) and report ``values`` mapped back
    through G^-1; ``state`` keeps the Z-space values.
    """
    dyn = dynamics_for(model, spec.kind, nu_fraction, tol)
    if abs(dyn.T - pr.T) > 0:
        raise ValueError("randomness horizon differs from the model's T")
    grid = build_grid(spec.M, pr.T, pr.jump_times)
    noise = restrict(pr, grid)
    if np.any(noise.dN > 1):
        raise AssertionError("a grid interval carries more than one jump")
    run = run_scheme(dyn, spec.kind, grid.taus, noise.W, grid.is_jump, raise_on_overflow=True)
    state, state_pre = run.values[0], run.pre[0]
    return SamplePath(grid, np.asarray(dyn.to_original(state)), np.asarray(dyn.to_original(state_pre)),
                      state, state_pre, run, pr, noise.master_index, dyn.to_original,
                      int(run.n_jumps[0]))


def interpolate(path: SamplePath, t: float, *, left: bool = False) -> float:
    """Value of the continuous-time scheme at master-grid time ``t``."""
    pr = path.randomness
    hits = np.flatnonzero(pr.master.taus == t)
    if len(hits) == 0:
        raise InterpolationSupportError(f"t={t} is not a master-grid point")
    c = int(hits[0])
    W = pr.W
    taus = path.grid.taus
    n = np.searchsorted(taus, t, side="left" if left else "right") - 1
    n = max(int(n), 0)
    r = path.run
    dt = t - taus[n]
    dw = W[c] - W[path.master_index[n]]
    z = (r.values[0, n] + r.mu[0, n] * dt + r.sig[0, n] * dw
         + 0.5 * r.sig[0, n] * r.dsig[0, n] * (dw * dw - dt))
    return float(path.to_original(np.array(z)))
