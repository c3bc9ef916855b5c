"""Discontinuity-removing transformation and the transformed coefficients.

G(x) = x + sum_i a_i phi((x - z_i) / nu) (x - z_i) |x - z_i| with the bump
phi(u) = (1 - u^2)^4 on |u| <= 1. Mapping X through G turns a drift with
jumps at z_i into a Lipschitz drift.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coefficients import JumpDiffusionModel, PiecewiseSmoothFn


class InversionError(ArithmeticError):
    pass


def bump(u):
    u = np.asarray(u, dtype=float)
    w = 1.0 - u * u
    out = np.where(np.abs(u) <= 1.0, w * w * w * w, 0.0)
    return out if out.ndim else float(out)


def bump_radius_bound(zetas, alphas) -> float:
    """Upper bound for nu: min(1/(8|a_i|), half the smallest breakpoint gap)."""
    cands = [np.inf]
    cands += [1.0 / (8.0 * abs(a)) for a in alphas if a != 0.0]
    cands += [(z2 - z1) / 2.0 for z1, z2 in zip(zetas, zetas[1:])]
    return float(min(cands))


@dataclass(frozen=True)
class TransformG:
    zetas: tuple[float, ...]
    alphas: tuple[float, ...]
    nu: float
    gpp_at_zeta: tuple[float, ...]
    tol: float = 1e-12

    def __post_init__(self):
        if len(self.zetas) != len(self.alphas) or len(self.zetas) != len(self.gpp_at_zeta):
            raise ValueError("zetas, alphas and gpp_at_zeta must have equal length")
        if self.zetas:
            bound = bump_radius_bound(self.zetas, self.alphas)
            if not 0.0 < self.nu < bound:
                raise ValueError(f"nu={self.nu} outside (0, {bound})")

    @property
    def is_identity(self) -> bool:
        return not self.zetas

    @property
    def support(self) -> tuple[float, float] | None:
        if self.is_identity:
            return None
        return self.zetas[0] - self.nu, self.zetas[-1] + self.nu

    def _local(self, i: int, s: np.ndarray, order: int) -> np.ndarray:
        """Order-th derivative of bump term i at offsets s, |s| <= nu."""
        nu, alpha = self.nu, self.alphas[i]
        u = s / nu
        a = np.abs(s)
        w = 1.0 - u * u
        w3 = w * w * w
        if order == 0:
            return alpha * (w3 * w) * s * a
        if order == 1:
            return alpha * ((-8.0 * u * w3) / nu * s * a + (w3 * w) * 2.0 * a)
        return alpha * ((-8.0 * w3 + 48.0 * u * u * w * w) / (nu * nu) * s * a
                        + 4.0 * (-8.0 * u * w3) / nu * a
                        + 2.0 * (w3 * w) * np.sign(s))

    def _terms(self, x: np.ndarray, order: int) -> np.ndarray:
        out = np.zeros_like(x)
        for i, zeta in enumerate(self.zetas):
            s = x - zeta
            mask = np.abs(s) < self.nu
            if np.any(mask):
                out[mask] += self._local(i, s[mask], order)
        return out

    def g(self, x):
        x = np.asarray(x, dtype=float)
        out = x + self._terms(x, 0) if not self.is_identity else x.copy()
        return out if out.ndim else float(out)

    def g_prime(self, x):
        x = np.asarray(x, dtype=float)
        out = 1.0 + self._terms(x, 1)
        return out if out.ndim else float(out)

    def g_second(self, x):
        """G'' off the breakpoints, extended by ``gpp_at_zeta`` on them."""
        x = np.asarray(x, dtype=float)
        out = self._terms(x, 2)
        for zeta, val in zip(self.zetas, self.gpp_at_zeta):
            out[x == zeta] = val
        return out if out.ndim else float(out)

    def g_second_limits(self, i: int, h: float = 1e-12) -> tuple[float, float]:
        """G'' just left and right of breakpoint ``i`` (offset ``h``)."""
        out = self._local(i, np.array([-h, h]), 2)
        return float(out[0]), float(out[1])

    def _table(self, i: int):
        tables = self.__dict__.setdefault("_tables", {})
        if i not in tables:
            xs = np.linspace(-self.nu, self.nu, 4097)
            gs = xs + self._local(i, xs, 0)
            gs[0], gs[-1] = -self.nu, self.nu
            tables[i] = (xs, gs)
        return tables[i]

    def g_inverse(self, y, tol: float | None = None, max_iter: int = 200):
        """Solve G(x) = y; G is the identity outside the bump supports."""
        tol = self.tol if tol is None else tol
        y = np.asarray(y, dtype=float)
        x = y.copy()
        if self.is_identity:
            return x if x.ndim else float(x)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        yy = np.atleast_1d(y)
        for i, zeta in enumerate(self.zetas):
            # G maps [zeta - nu, zeta + nu] onto itself
            mask = np.abs(yy - zeta) < self.nu
            if np.any(mask):
                x[mask] = zeta + self._invert_local(i, yy[mask] - zeta, tol, max_iter)
        return float(x[0]) if scalar else x

    def _invert_local(self, i, r, tol, max_iter):
        """Offset s with s + term_i(s) = r, all |r| < nu."""
        xs, gs = self._table(i)
        # binary search over monotone samples brackets each root
        k = np.clip(np.searchsorted(gs, r) - 1, 0, len(xs) - 2)
        lo, hi = xs[k], xs[k + 1]
        s = np.interp(r, gs, xs)
        slack = tol + 4.0 * np.finfo(float).eps * (np.abs(r + self.zetas[i]))
        for _ in range(max_iter):
            res = s + self._local(i, s, 0) - r
            done = np.abs(res) <= slack
            if np.all(done):
                return s
            lo = np.where(res < 0, np.maximum(lo, s), lo)
            hi = np.where(res > 0, np.minimum(hi, s), hi)
            step = s - res / (1.0 + self._local(i, s, 1))
            # bisect when Newton leaves the bracket
            bad = (step <= lo) | (step >= hi)
            s = np.where(done, s, np.where(bad, 0.5 * (lo + hi), step))
        raise InversionError(f"G inverse did not reach tol={tol} in {max_iter} iterations")

    def inverse_with_derivatives(self, z: np.ndarray):
        """(x, G'(x), G''(x)) at x = G^-1(z) for a 1-d array z."""
        x = z.copy()
        gp = np.ones_like(z)
        gpp = np.zeros_like(z)
        for i, zeta in enumerate(self.zetas):
            mask = np.abs(z - zeta) < self.nu
            if not np.any(mask):
                continue
            s = self._invert_local(i, z[mask] - zeta, self.tol, 200)
            x[mask] = zeta + s
            gp[mask] = 1.0 + self._local(i, s, 1)
            g2 = self._local(i, s, 2)
            gpp[mask] = np.where(s == 0.0, self.gpp_at_zeta[i], g2)
        return x, gp, gpp


def identity_transform() -> TransformG:
    return TransformG((), (), 1.0, ())


def build_transform(model: JumpDiffusionModel, nu_fraction: float = 0.5,
                    tol: float = 1e-12) -> TransformG:
    if not 0.0 < nu_fraction < 1.0:
        raise ValueError("nu_fraction must lie in (0, 1)")
    zetas = model.mu.breakpoints
    if not zetas:
        return TransformG((), (), 1.0, (), tol)
    alphas, gpp = [], []
    for zeta in zetas:
        left, right = model.mu.one_sided_limits(zeta)
        s2 = float(model.sigma(np.array(zeta))) ** 2
        at = float(model.mu(np.array(zeta)))
        a = (left - right) / (2.0 * s2)
        alphas.append(a)
        gpp.append(2.0 * a + 2.0 * (right - at) / s2)
    bound = bump_radius_bound(zetas, alphas)
    if not np.isfinite(bound):
        # every jump is zero; any radius works
        bound = 1.0
    return TransformG(tuple(zetas), tuple(alphas), nu_fraction * bound, tuple(gpp), tol)


class ModelDynamics:
    """Coefficients of the original equation in the form the schemes use."""

    def __init__(self, model: JumpDiffusionModel):
        self.model = model
        self.xi = float(model.xi)
        self.T = float(model.T)
        self.lam = float(model.lam)

    def coefficients(self, z):
        m = self.model
        return m.mu(z), m.sigma(z), m.sigma.derivative_or_zero(z)

    def rho(self, z):
        return self.model.rho(z)

    def jump(self, z):
        return z + self.model.rho(z)

    def to_original(self, z):
        return z


@dataclass(frozen=True)
class TransformedModel:
    """Coefficients of Z = G(X), all evaluated through one inversion."""

    model: JumpDiffusionModel
    transform: TransformG
    zeta_t: tuple[float, ...]
    eta_t: tuple[float, ...]
    xi_t: float
    x_kinks: tuple[float, ...] = ()

    @property
    def xi(self) -> float:
        return self.xi_t

    @property
    def T(self) -> float:
        return self.model.T

    @property
    def lam(self) -> float:
        return self.model.lam

    def coefficients(self, z):
        """Return (mu_t, sigma_t, d sigma_t) at z."""
        m, G = self.model, self.transform
        if G.is_identity:
            return m.mu(z), m.sigma(z), m.sigma.derivative_or_zero(z)
        x, gp, gpp = G.inverse_with_derivatives(np.atleast_1d(np.asarray(z, dtype=float)))
        mu, sig = m.mu(x), m.sigma(x)
        mu_t = gp * mu + 0.5 * gpp * sig * sig
        sig_t = gp * sig
        dsig_t = (gpp * sig + gp * m.sigma.derivative_or_zero(x)) / gp
        dsig_t = np.where(np.isin(x, self.x_kinks), 0.0, dsig_t)
        if np.ndim(z) == 0:
            return float(mu_t[0]), float(sig_t[0]), float(dsig_t[0])
        return mu_t, sig_t, dsig_t

    def mu_t(self, z):
        return self.coefficients(z)[0]

    def sigma_t(self, z):
        return self.coefficients(z)[1]

    def d_sigma_t(self, z):
        return self.coefficients(z)[2]

    def rho_t(self, z):
        m, G = self.model, self.transform
        if G.is_identity:
            return m.rho(z)
        x = G.g_inverse(z)
        # G(x) equals z up to the inversion tolerance; differencing two G
        # values keeps rho_t exactly 0 wherever rho is
        return G.g(x + m.rho(x)) - G.g(x)

    rho = rho_t

    def jump(self, z):
        m, G = self.model, self.transform
        if G.is_identity:
            return z + m.rho(z)
        x = G.g_inverse(z)
        return z + (G.g(x + m.rho(x)) - G.g(x))

    def to_original(self, z):
        return self.transform.g_inverse(z)


def transform_model(model: JumpDiffusionModel, t: TransformG) -> TransformedModel:
    if t.is_identity:
        return TransformedModel(model, t, (), tuple(model.sigma.breakpoints), float(model.xi))
    x_kinks = set(t.zetas) | set(model.sigma.breakpoints)
    for zeta in t.zetas:
        x_kinks.update((zeta - t.nu, zeta + t.nu))
    eta_t = sorted(float(t.g(k)) for k in x_kinks)
    return TransformedModel(model, t, tuple(t.zetas), tuple(eta_t), float(t.g(model.xi)),
                            tuple(sorted(x_kinks)))
