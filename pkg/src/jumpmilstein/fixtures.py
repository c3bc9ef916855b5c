"""Built-in model fixtures and the piece families used to describe models.

A coefficient is written as ``family:arg,arg`` per piece, pieces separated
by ``|``, e.g. ``constant:1 | constant:-1`` with breakpoints ``0``.
Families: ``constant:c``, ``linear:a`` (a x), ``affine:a,b`` (a x + b),
``sin:amp,freq,phase,offset`` (offset + amp sin(freq x + phase)), plus
anything added with ``register_piece``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .coefficients import JumpDiffusionModel, PiecewiseSmoothFn
from .experiments import GBMJumpOracle


def constant(c: float):
    c = float(c)
    return (lambda x: np.full(np.shape(x), c)), (lambda x: np.zeros(np.shape(x)))


def linear(a: float):
    a = float(a)
    return (lambda x: a * x), (lambda x: np.full(np.shape(x), a))


def affine(a: float, b: float):
    a, b = float(a), float(b)
    return (lambda x: a * x + b), (lambda x: np.full(np.shape(x), a))


def sine(amp: float, freq: float = 1.0, phase: float = 0.0, offset: float = 0.0):
    amp, freq, phase, offset = map(float, (amp, freq, phase, offset))
    return ((lambda x: offset + amp * np.sin(freq * x + phase)),
            (lambda x: amp * freq * np.cos(freq * x + phase)))


_FAMILIES: dict[str, Callable] = {"constant": constant, "linear": linear, "affine": affine, "sin": sine}


def register_piece(name: str, fn: Callable, dfn: Callable) -> None:
    """Make ``name`` usable in piece specs; ``fn``/``dfn`` take no arguments."""
    if name in _FAMILIES:
        raise ValueError(f"piece family {name!r} already registered")
    _FAMILIES[name] = lambda: (fn, dfn)


def piece_families() -> list[str]:
    return sorted(_FAMILIES)


def parse_piece(text: str):
    name, _, args = text.strip().partition(":")
    name = name.strip()
    if name not in _FAMILIES:
        raise ValueError(f"unknown piece family {name!r}; known: {', '.join(piece_families())}")
    values = [float(a) for a in args.split(",") if a.strip()]
    try:
        return _FAMILIES[name](*values)
    except TypeError as exc:
        raise ValueError(f"bad arguments for piece {text!r}: {exc}") from None


def parse_coefficient(pieces: str, breakpoints: str = "", at_breakpoint: str = "right") -> PiecewiseSmoothFn:
    bps = tuple(float(b) for b in breakpoints.replace(",", " ").split())
    parsed = [parse_piece(p) for p in pieces.split("|")]
    if len(parsed) != len(bps) + 1:
        raise ValueError(f"{len(parsed)} pieces given for {len(bps)} breakpoints in {pieces!r}")
    return PiecewiseSmoothFn(bps, [f for f, _ in parsed], [df for _, df in parsed],
                             at_breakpoint=at_breakpoint, label=f"{pieces} @ {bps}")


def _smooth(spec: str) -> PiecewiseSmoothFn:
    return parse_coefficient(spec)


@dataclass(frozen=True)
class Fixture:
    name: str
    formulas: dict
    breakpoints: tuple[float, ...]
    oracle_note: str
    build: Callable[[], JumpDiffusionModel]
    oracle: Optional[Callable] = None

    def describe(self) -> str:
        lines = [f"{self.name}:"]
        lines += [f"  {k} = {v}" for k, v in self.formulas.items()]
        lines.append(f"  drift breakpoints: {list(self.breakpoints) or 'none'}")
        lines.append(f"  oracle: {self.oracle_note}")
        return "\n".join(lines)


def gbm_jump(a=0.05, b=0.2, c=-0.1, xi=1.0, T=1.0, lam=2.0) -> JumpDiffusionModel:
    return JumpDiffusionModel(_smooth(f"linear:{a}"), _smooth(f"linear:{b}"), _smooth(f"linear:{c}"),
                              xi, T, lam, name="gbm-jump")


def sign_drift(xi=0.1, T=1.0, lam=1.0) -> JumpDiffusionModel:
    mu = parse_coefficient("constant:1 | constant:-1", "0")
    return JumpDiffusionModel(mu, _smooth("constant:1"), _smooth("linear:0.25"), xi, T, lam,
                              name="sign-drift")


def lipschitz_sine(xi=1.0, T=1.0, lam=2.0) -> JumpDiffusionModel:
    return JumpDiffusionModel(_smooth("affine:-1,0.5"), _smooth("sin:0.2,1,0,0.4"),
                              _smooth("linear:0.1"), xi, T, lam, name="lipschitz-sine")


def additive_ou(xi=1.0, T=1.0, lam=2.0) -> JumpDiffusionModel:
    return JumpDiffusionModel(_smooth("linear:-1"), _smooth("constant:0.5"), _smooth("constant:0.2"),
                              xi, T, lam, name="additive-ou")


def frozen(xi=1.0, T=1.0, lam=2.0) -> JumpDiffusionModel:
    zero = _smooth("constant:0")
    return JumpDiffusionModel(zero, zero, zero, xi, T, lam, name="frozen")


def pure_drift(a=0.5, xi=0.0, T=1.0, lam=2.0) -> JumpDiffusionModel:
    zero = _smooth("constant:0")
    return JumpDiffusionModel(_smooth(f"constant:{a}"), zero, zero, xi, T, lam, name="pure-drift")


def _pure_drift_oracle(t, W, N):
    return 0.5 * t


CATALOGUE: dict[str, Fixture] = {
    f.name: f
    for f in [
        Fixture("gbm-jump", {"mu": "a x (a=0.05)", "sigma": "b x (b=0.2)", "rho": "c x (c=-0.1)",
                             "xi, T, lambda": "1, 1, 2"},
                (), "closed form xi exp((a - b^2/2) t + b W_t) (1 + c)^N_t", gbm_jump,
                GBMJumpOracle(0.05, 0.2, -0.1, 1.0)),
        Fixture("sign-drift", {"mu": "1 for x < 0, -1 for x >= 0", "sigma": "1", "rho": "x / 4",
                               "xi, T, lambda": "0.1, 1, 1"},
                (0.0,), "none (self-reference)", sign_drift),
        Fixture("lipschitz-sine", {"mu": "0.5 - x", "sigma": "0.4 + 0.2 sin x", "rho": "0.1 x",
                                   "xi, T, lambda": "1, 1, 2"},
                (), "none (self-reference)", lipschitz_sine),
        Fixture("additive-ou", {"mu": "-x", "sigma": "0.5", "rho": "0.2",
                                "xi, T, lambda": "1, 1, 2"},
                (), "none (self-reference)", additive_ou),
        Fixture("frozen", {"mu": "0", "sigma": "0", "rho": "0", "xi, T, lambda": "1, 1, 2"},
                (), "constant path xi", frozen),
        Fixture("pure-drift", {"mu": "0.5", "sigma": "0", "rho": "0", "xi, T, lambda": "0, 1, 2"},
                (), "xi + 0.5 t", pure_drift, _pure_drift_oracle),
    ]
}


def list_models() -> list[str]:
    return sorted(CATALOGUE)


def describe_model(name: str) -> Fixture:
    try:
        return CATALOGUE[name]
    except KeyError:
        raise KeyError(f"unknown model {name!r}; valid names: {', '.join(list_models())}") from None
