"""Per-user best response and the centralized allocation oracle.

The best response to a price p is the unique P with S(P) = p (the stationarity
condition of max_P ln U(P) - p*P).  Because S is strictly decreasing, plain
bisection is unconditionally convergent; Newton steps started near the
inflection region can overshoot into the flat tail, so bisection is used at
both levels (power and price).

The oracle solves max sum ln U_i(P_i) s.t. sum P_i = P_T by bisecting on the
shadow price: sum_i S_i^{-1}(p) is strictly decreasing in p, so the clearing
price is a simple root.  The budget constraint is treated as an equality
(utilities are strictly increasing, so it is active at the optimum).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .utility import UtilityParams, _slope_ab, slope_derivative

__all__ = [
    "BestResponseConfig",
    "OracleResult",
    "BracketOverflowError",
    "best_response",
    "oracle_allocate",
]

# Powers are never evaluated below this floor: P = 0 is excluded by the log.
POWER_EPS = 1e-12

_PRICE_ITERATIONS = 200
_BUDGET_RTOL = 1e-8


class BracketOverflowError(RuntimeError):
    """Upper bisection bracket exceeded the configured cap."""


@dataclass(frozen=True)
class BestResponseConfig:
    power_tolerance: float = 1e-10
    max_bracket: float = 1e9

    def __post_init__(self) -> None:
        if self.power_tolerance <= 0.0:
            raise ValueError("power_tolerance must be positive")
        if self.max_bracket <= self.power_tolerance:
            raise ValueError("max_bracket must exceed power_tolerance")


@dataclass(frozen=True)
class OracleResult:
    powers: list[float]
    shadow_price: float
    kkt_residual: float


DEFAULT_CONFIG = BestResponseConfig()


def best_response(
    params: UtilityParams, p: float, cfg: BestResponseConfig = DEFAULT_CONFIG
) -> float:
    """The unique P > 0 with S(P) = p, found by bisection."""
    if p <= 0.0:
        raise ValueError(f"price must be positive, got {p}")
    return _best_response_ab(params.a, params.b, p, cfg)


def _best_response_ab(a: float, b: float, p: float, cfg: BestResponseConfig) -> float:
    lo = b
    while _slope_ab(a, b, lo) <= p:
        lo *= 0.5
        if lo < POWER_EPS:
            # S(POWER_EPS) ~ 1/POWER_EPS; prices above that clip to the floor
            return POWER_EPS
    hi = b
    while _slope_ab(a, b, hi) >= p:
        hi *= 2.0
        if hi > cfg.max_bracket:
            raise BracketOverflowError(
                f"no solution below max_bracket={cfg.max_bracket} for price {p}"
            )
    # invariant: S(lo) > p > S(hi)
    while hi - lo > cfg.power_tolerance:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _slope_ab(a, b, mid) > p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _demand(users: list[UtilityParams], p: float, cfg: BestResponseConfig) -> list[float]:
    return [_best_response_ab(u.a, u.b, p, cfg) for u in users]


def oracle_allocate(
    users: list[UtilityParams], P_T: float, cfg: BestResponseConfig = DEFAULT_CONFIG
) -> OracleResult:
    """Globally optimal powers, clearing price, and KKT residual.

    Bisects on ln p (total demand spans many orders of magnitude in price)
    until the budget matches to 1e-8 relative or 200 iterations.  Any budget
    residual left by the finite price resolution is assigned to the least
    price-sensitive user, whose S barely moves.
    """
    if not users:
        raise ValueError("users must be non-empty")
    if P_T <= 0.0:
        raise ValueError(f"P_T must be positive, got {P_T}")

    p_hi = max(_slope_ab(u.a, u.b, POWER_EPS) for u in users)
    log_lo, log_hi = math.log(1e-300), math.log(p_hi)
    budget_tol = _BUDGET_RTOL * max(1.0, P_T)

    p = math.exp(0.5 * (log_lo + log_hi))
    for _ in range(_PRICE_ITERATIONS):
        mid = 0.5 * (log_lo + log_hi)
        if mid <= log_lo or mid >= log_hi:
            break
        p = math.exp(mid)
        total = math.fsum(_demand(users, p, cfg))
        if abs(total - P_T) <= budget_tol:
            break
        if total > P_T:
            log_lo = mid
        else:
            log_hi = mid

    powers = _demand(users, p, cfg)
    residual = P_T - math.fsum(powers)
    if residual != 0.0:
        j = max(range(len(users)), key=lambda i: 1.0 / abs(slope_derivative(users[i], powers[i])))
        if powers[j] + residual > POWER_EPS:
            powers[j] += residual
    kkt = max(abs(_slope_ab(u.a, u.b, P) - p) for u, P in zip(users, powers))
    return OracleResult(powers=powers, shadow_price=p, kkt_residual=kkt)
