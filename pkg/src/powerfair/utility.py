"""Sigmoidal user utilities and their calculus.

Each user is described by a normalized logistic utility

    U(P) = c * (1 / (1 + exp(-a*(P - b))) - d),
    c = (1 + exp(a*b)) / exp(a*b),   d = 1 / (1 + exp(a*b)),

which satisfies U(0) = 0 and U(inf) = 1.  The normalization admits exact,
overflow-free rewrites that all evaluators below use:

    U(P)      = (1 - exp(-a*P)) / (1 + exp(-a*(P - b)))
    S(P)      = d(log U)/dP = a * (1/(exp(a*P) - 1) + 1/(1 + exp(a*(P - b))))
    dS/dP     = -a^2 * (t*(1 + t) + s*(1 - s)),  t = 1/(exp(a*P) - 1),
                                                 s = 1/(1 + exp(a*(P - b)))

S is strictly positive, strictly decreasing, with S -> inf as P -> 0+ and
S -> 0 as P -> inf; dS/dP < 0 everywhere, which is what makes log U strictly
concave and the allocation problem convex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = [
    "UtilityParams",
    "ChannelParams",
    "DegenerateChannelError",
    "utility_value",
    "log_utility",
    "slope",
    "slope_derivative",
    "inflection_power",
    "sinr",
]

# exp() overflows past ~709; exponents are clamped and the saturated branch
# is substituted analytically.
_EXP_CLAMP = 700.0

_A_MAX = 100.0
_B_MAX = 1e6


class DegenerateChannelError(ValueError):
    """SINR denominator is not positive (e.g. single user with I = 0)."""


@dataclass(frozen=True)
class UtilityParams:
    """Sigmoid steepness ``a`` and center ``b``; ``c``/``d`` are derived."""

    a: float
    b: float
    c: float = field(init=False, repr=False)
    d: float = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not (0.0 < self.a <= _A_MAX):
            raise ValueError(f"a must be in (0, {_A_MAX}], got {self.a}")
        if not (0.0 < self.b <= _B_MAX):
            raise ValueError(f"b must be in (0, {_B_MAX}], got {self.b}")
        ab = min(self.a * self.b, _EXP_CLAMP)
        e_ab = math.exp(ab)
        object.__setattr__(self, "c", (1.0 + e_ab) / e_ab)
        object.__setattr__(self, "d", 1.0 / (1.0 + e_ab))


@dataclass(frozen=True)
class ChannelParams:
    """Link gain G (path loss/shadowing/fading) and noise-plus-interference I."""

    G: float
    I: float

    def __post_init__(self) -> None:
        if self.G <= 0.0:
            raise ValueError(f"G must be positive, got {self.G}")
        if self.I < 0.0:
            raise ValueError(f"I must be nonnegative, got {self.I}")


def _sigmoid(x: float) -> float:
    """1 / (1 + exp(-x)), safe for any finite x."""
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-min(x, _EXP_CLAMP)))
    z = math.exp(max(x, -_EXP_CLAMP))
    return z / (1.0 + z)


def utility_value(params: UtilityParams, P: float) -> float:
    """Utility of power P, in [0, 1); exact 0 at P = 0 and increasing in P."""
    if P < 0.0:
        raise ValueError(f"P must be nonnegative, got {P}")
    a, b = params.a, params.b
    head = -math.expm1(-min(a * P, _EXP_CLAMP))
    # 1 / (1 + exp(-a*(P - b))) is the logistic of +a*(P - b)
    return head * _sigmoid(a * (P - b))


def log_utility(params: UtilityParams, P: float) -> float:
    """ln U(P) for P > 0, evaluated without cancellation for P << b."""
    if P <= 0.0:
        raise ValueError(f"P must be positive, got {P}")
    a, b = params.a, params.b
    t = a * P
    # log(1 - exp(-t)) without forming the near-zero difference
    if t > _EXP_CLAMP:
        log_head = 0.0
    else:
        log_head = math.log(-math.expm1(-t))
    x = -a * (P - b)
    # log(1 + exp(x)) (softplus), stable on both sides
    if x > 0.0:
        log_tail = x + math.log1p(math.exp(-min(x, _EXP_CLAMP)))
    else:
        log_tail = math.log1p(math.exp(max(x, -_EXP_CLAMP)))
    return log_head - log_tail


def slope(params: UtilityParams, P: float) -> float:
    """S(P) = d(ln U)/dP; strictly positive and strictly decreasing."""
    if P <= 0.0:
        raise ValueError(f"P must be positive, got {P}")
    return _slope_ab(params.a, params.b, P)


def _slope_ab(a: float, b: float, P: float) -> float:
    # hot path used by the solvers; same formula as slope()
    t = a * P
    head = 0.0 if t > _EXP_CLAMP else 1.0 / math.expm1(t)
    return a * (head + _sigmoid(-a * (P - b)))


def slope_derivative(params: UtilityParams, P: float) -> float:
    """dS/dP, strictly negative for all P > 0 (strict concavity of ln U)."""
    if P <= 0.0:
        raise ValueError(f"P must be positive, got {P}")
    a, b = params.a, params.b
    t = a * P
    head = 0.0 if t > _EXP_CLAMP else 1.0 / math.expm1(t)
    s = _sigmoid(-a * (P - b))
    return -a * a * (head * (1.0 + head) + s * (1.0 - s))


def inflection_power(params: UtilityParams) -> float:
    """Power at which the utility's curvature flips (equals b)."""
    return params.b


def sinr(channel: ChannelParams, allocation: list[float], i: int) -> float:
    """SINR of user i under a full power vector: G*P_i / (G*sum(P) - G*P_i + I)."""
    if not allocation:
        raise ValueError("allocation must be non-empty")
    if not 0 <= i < len(allocation):
        raise ValueError(f"user index {i} out of range for {len(allocation)} users")
    if any(p < 0.0 for p in allocation):
        raise ValueError("allocation entries must be nonnegative")
    total = math.fsum(allocation)
    denom = channel.G * (total - allocation[i]) + channel.I
    if denom <= 0.0:
        raise DegenerateChannelError(
            f"SINR denominator {denom} is not positive (G={channel.G}, I={channel.I})"
        )
    return channel.G * allocation[i] / denom
