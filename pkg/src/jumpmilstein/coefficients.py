"""Piecewise-smooth scalar coefficients and jump-diffusion models.

A coefficient is a list of ordered breakpoints plus one smooth piece per
open interval between them. Pieces are plain numpy-vectorised callables and
come with their analytic derivatives, so the schemes never need finite
differences at run time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

Fn = Callable[[np.ndarray], np.ndarray]


class AssumptionViolation(ValueError):
    """Raised when a model fails one clause of the standing assumptions."""

    def __init__(self, clause: str, message: str, where: float | None = None):
        self.clause = clause
        self.where = where
        super().__init__(f"clause ({clause}): {message}")


class DomainError(ValueError):
    pass


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


def _check_finite(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise DomainError("non-finite argument")


def _apply(fn: Fn, x: np.ndarray) -> np.ndarray:
    # pieces such as ``lambda x: 1.0`` return scalars
    return np.broadcast_to(np.asarray(fn(x), dtype=float), x.shape)


@dataclass(frozen=True)
class PiecewiseSmoothFn:
    """Scalar function that is smooth between ``breakpoints``.

    ``pieces[k]`` is used on the open interval between breakpoint ``k-1`` and
    breakpoint ``k`` and must stay finite on its closure, so one-sided limits
    can be read off by evaluating the neighbouring piece at a breakpoint.
    ``at_breakpoint`` chooses the value taken exactly at a breakpoint,
    ``"right"`` (default) or ``"left"``.
    """

    breakpoints: tuple[float, ...]
    pieces: tuple[Fn, ...]
    derivatives: tuple[Fn, ...]
    at_breakpoint: str = "right"
    label: str = field(default="", compare=False)

    def __post_init__(self):
        bps = tuple(float(b) for b in self.breakpoints)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "pieces", tuple(self.pieces))
        object.__setattr__(self, "derivatives", tuple(self.derivatives))
        if any(not np.isfinite(b) for b in bps):
            raise ValueError("breakpoints must be finite")
        if any(b1 >= b2 for b1, b2 in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if len(self.pieces) != len(bps) + 1 or len(self.derivatives) != len(bps) + 1:
            raise ValueError("need len(breakpoints) + 1 pieces and derivatives")
        if self.at_breakpoint not in ("right", "left"):
            raise ValueError("at_breakpoint must be 'right' or 'left'")

    @classmethod
    def smooth(cls, fn: Fn, dfn: Fn, label: str = "") -> "PiecewiseSmoothFn":
        return cls((), (fn,), (dfn,), label=label)

    @property
    def n_breaks(self) -> int:
        return len(self.breakpoints)

    def _piece_index(self, x: np.ndarray) -> np.ndarray:
        side = "right" if self.at_breakpoint == "right" else "left"
        return np.searchsorted(np.asarray(self.breakpoints), x, side=side)

    def _eval_by_piece(self, fns: Sequence[Fn], x: np.ndarray) -> np.ndarray:
        if not self.breakpoints:
            return _apply(fns[0], x).astype(float, copy=True)
        idx = self._piece_index(x)
        out = np.empty(x.shape)
        for k, fn in enumerate(fns):
            mask = idx == k
            if np.any(mask):
                out[mask] = _apply(fn, x[mask])
        return out

    def __call__(self, x):
        x = _as_array(x)
        out = self._eval_by_piece(self.pieces, x)
        return out if out.ndim else float(out)

    def derivative_or_zero(self, x):
        """Piece derivative off the breakpoints, exactly 0 on them."""
        x = _as_array(x)
        out = self._eval_by_piece(self.derivatives, x)
        if self.breakpoints:
            out[np.isin(x, self.breakpoints)] = 0.0
        return out if out.ndim else float(out)

    def one_sided_limits(self, zeta: float) -> tuple[float, float]:
        try:
            k = self.breakpoints.index(float(zeta))
        except ValueError:
            raise DomainError(f"{zeta} is not a breakpoint") from None
        z = np.array(float(zeta))
        return float(_apply(self.pieces[k], z)), float(_apply(self.pieces[k + 1], z))

    def one_sided_derivative_limits(self, zeta: float) -> tuple[float, float]:
        k = self.breakpoints.index(float(zeta))
        z = np.array(float(zeta))
        return (float(_apply(self.derivatives[k], z)),
                float(_apply(self.derivatives[k + 1], z)))


def evaluate(f: PiecewiseSmoothFn, x):
    x = _as_array(x)
    _check_finite(x)
    return f(x)


def one_sided_limits(f: PiecewiseSmoothFn, zeta: float) -> tuple[float, float]:
    return f.one_sided_limits(zeta)


def d(f: PiecewiseSmoothFn, x):
    """Derivative where it exists, 0 at the breakpoints."""
    x = _as_array(x)
    _check_finite(x)
    return f.derivative_or_zero(x)


@dataclass(frozen=True)
class JumpDiffusionModel:
    """dX = mu(X) dt + sigma(X) dW + rho(X-) dN on [0, T], X_0 = xi."""

    mu: PiecewiseSmoothFn
    sigma: PiecewiseSmoothFn
    rho: PiecewiseSmoothFn
    xi: float
    T: float
    lam: float
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if not (np.isfinite(self.T) and self.T > 0):
            raise ValueError("T must be positive")
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise ValueError("lambda must be positive")
        if not np.isfinite(self.xi):
            raise ValueError("xi must be finite")

    @property
    def drift_breakpoints(self) -> tuple[float, ...]:
        return self.mu.breakpoints


@dataclass(frozen=True)
class LinearGrowthCertificate:
    """Sampled constants with |f(x)| <= c_f (1 + |x|) on ``box``."""

    c_mu: float
    c_sigma: float
    c_rho: float
    box: tuple[float, float]


def _sample_points(f: PiecewiseSmoothFn, box, n_samples: int, offset: float, extra=()) -> np.ndarray:
    lo, hi = box
    xs = np.linspace(lo, hi, n_samples)
    # breakpoints themselves plus two points on each side, so steepness
    # right next to a breakpoint is seen
    near = [b + s for b in f.breakpoints for s in (-2 * offset, -offset, 0.0, offset, 2 * offset)]
    near += list(extra)
    xs = np.union1d(xs, np.asarray(near, dtype=float))
    return xs[(xs >= lo) & (xs <= hi)]


def sampled_lipschitz(fn: Fn, xs: np.ndarray, breakpoints: Sequence[float] = ()) -> float:
    """Largest difference quotient between neighbouring samples.

    Pairs straddling a breakpoint are skipped, so this is the piecewise
    constant when ``breakpoints`` is given and the global one otherwise.
    """
    xs = np.sort(np.asarray(xs, dtype=float))
    ys = _apply(fn, xs)
    if not np.all(np.isfinite(ys)):
        return np.inf
    dx = np.diff(xs)
    keep = dx > 0
    if len(breakpoints):
        bps = np.asarray(breakpoints)
        # no breakpoint in the closed pair interval
        keep &= np.searchsorted(bps, xs[:-1], side="left") == np.searchsorted(bps, xs[1:], side="right")
    if not np.any(keep):
        return 0.0
    return float(np.max(np.abs(np.diff(ys))[keep] / dx[keep]))


def validate_assumption1(
    model: JumpDiffusionModel,
    box: tuple[float, float] | None = None,
    n_samples: int = 4001,
    *,
    lipschitz_cap: float = 1e6,
    jump_tol: float = 1e-9,
    offset: float = 1e-8,
) -> LinearGrowthCertificate:
    """Check the standing assumptions on ``model`` by sampling ``box``.

    Raises AssumptionViolation naming the failed clause (i)-(iv).
    """
    zetas = model.drift_breakpoints
    all_bps = list(zetas) + list(model.sigma.breakpoints) + list(model.rho.breakpoints)
    if box is None:
        anchors = all_bps + [model.xi]
        box = (min(anchors) - 10.0, max(anchors) + 10.0)
    lo, hi = box
    if not (lo <= model.xi <= hi) or any(not (lo <= b <= hi) for b in all_bps):
        raise ValueError("validation box must contain xi and all breakpoints")

    mu, sigma, rho = model.mu, model.sigma, model.rho

    # (i) drift piecewise Lipschitz
    xs = _sample_points(mu, box, n_samples, offset)
    if sampled_lipschitz(mu, xs, zetas) > lipschitz_cap:
        raise AssumptionViolation("i", "drift is not piecewise Lipschitz on the sample")

    # (ii) diffusion Lipschitz and non-degenerate at drift breakpoints
    for zeta in zetas:
        s = float(sigma(np.array(zeta)))
        if s == 0.0:
            raise AssumptionViolation("ii", f"sigma vanishes at drift breakpoint {zeta}", zeta)
    for b in sigma.breakpoints:
        left, right = sigma.one_sided_limits(b)
        if abs(left - right) > jump_tol * max(1.0, abs(left)):
            raise AssumptionViolation("ii", f"sigma jumps at {b}", b)
    xs = _sample_points(sigma, box, n_samples, offset)
    if sampled_lipschitz(sigma, xs) > lipschitz_cap:
        raise AssumptionViolation("ii", "sigma is not Lipschitz on the sample")

    # (iii) jump coefficient Lipschitz
    for b in rho.breakpoints:
        left, right = rho.one_sided_limits(b)
        if abs(left - right) > jump_tol * max(1.0, abs(left)):
            raise AssumptionViolation("iii", f"rho jumps at {b}", b)
    xs = _sample_points(rho, box, n_samples, offset)
    if sampled_lipschitz(rho, xs) > lipschitz_cap:
        raise AssumptionViolation("iii", "rho is not Lipschitz on the sample")

    # (iv) mu, sigma have Lipschitz derivatives between drift breakpoints
    for f, nm in ((mu, "mu"), (sigma, "sigma")):
        for b in f.breakpoints:
            if b in zetas:
                continue
            dl, dr = f.one_sided_derivative_limits(b)
            if abs(dl - dr) > jump_tol * max(1.0, abs(dl)):
                raise AssumptionViolation("iv", f"{nm}' jumps at {b}, not a drift breakpoint", b)
        xs = _sample_points(f, box, n_samples, offset)
        deriv = lambda x, f=f: f._eval_by_piece(f.derivatives, x)
        if sampled_lipschitz(deriv, xs, f.breakpoints) > lipschitz_cap:
            raise AssumptionViolation("iv", f"{nm}' is not piecewise Lipschitz on the sample")

    def growth(f):
        xs = _sample_points(f, box, n_samples, offset, extra=[model.xi, 0.0] + all_bps)
        return float(np.max(np.abs(f(xs)) / (1.0 + np.abs(xs))))

    return LinearGrowthCertificate(growth(mu), growth(sigma), growth(rho), (lo, hi))
