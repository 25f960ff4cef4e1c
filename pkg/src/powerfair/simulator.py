"""Synchronized-round simulation of the distributed allocation, regime
classification, fluctuation detection, and total-power sweeps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

from .agents import (
    BsState,
    DecayPolicy,
    StopAllocation,
    UeState,
    bs_step,
    ue_step,
)
from .solvers import BestResponseConfig, DEFAULT_CONFIG, OracleResult, oracle_allocate
from .utility import UtilityParams

__all__ = [
    "Scenario",
    "IterationTrace",
    "AllocationResult",
    "RunStatus",
    "Regime",
    "SingularityError",
    "SweepRow",
    "drive_rounds",
    "effective_policy",
    "run",
    "classify_regime",
    "detect_fluctuation",
    "steady_price_bound",
    "critical_price",
    "sweep",
]


class SingularityError(ValueError):
    """Closed-form expression evaluated at (numerically) zero denominator."""


class RunStatus(str, Enum):
    CONVERGED = "converged"
    MAX_ITERATIONS_REACHED = "max_iterations_reached"


class Regime(str, Enum):
    CONVERGENT = "convergent"
    FLUCTUATION_RISK = "fluctuation_risk"


@dataclass(frozen=True)
class Scenario:
    users: list[UtilityParams]
    P_T: float
    delta: float = 1e-3
    decay: DecayPolicy = field(default_factory=DecayPolicy.none)
    decay_start: int = 1
    initial_bids: Optional[list[float]] = None
    max_iterations: int = 10000

    def __post_init__(self) -> None:
        if not self.users:
            raise ValueError("users must be non-empty")
        if self.P_T <= 0.0:
            raise ValueError(f"P_T must be positive, got {self.P_T}")
        if self.delta <= 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.decay_start < 1:
            raise ValueError(f"decay_start must be >= 1, got {self.decay_start}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.initial_bids is not None:
            if len(self.initial_bids) != len(self.users):
                raise ValueError("initial_bids length must match users length")
            if any(w <= 0.0 for w in self.initial_bids):
                raise ValueError("initial_bids must be positive")

    def starting_bids(self) -> list[float]:
        if self.initial_bids is not None:
            return list(self.initial_bids)
        return [1.0] * len(self.users)


@dataclass(frozen=True)
class IterationTrace:
    n: int
    price: float
    bids: list[float]
    powers: list[float]
    max_bid_step: float


@dataclass(frozen=True)
class AllocationResult:
    status: RunStatus
    final_powers: list[float]
    final_price: float
    iterations: int
    trace: list[IterationTrace]
    oracle_gap: float
    oracle: OracleResult


def effective_policy(scenario: Scenario, n: int) -> DecayPolicy:
    """The decay policy in force when forming the round-n bid."""
    if n >= scenario.decay_start:
        return scenario.decay
    return DecayPolicy.none()


def drive_rounds(
    scenario: Scenario,
    gather: Callable[[int], list[float]],
    broadcast: Callable[[int, float, bool], None],
    cfg: BestResponseConfig = DEFAULT_CONFIG,
) -> AllocationResult:
    """The base-station round loop shared by every delivery backend.

    ``gather(n)`` returns the M round-n bids in user order; ``broadcast(n, p,
    stop)`` delivers the round-n price (or the stop notice carrying the
    allocation price).  Round n records the bids w(n), their implied price
    p(n) = sum(w(n))/P_T, the bid-implied powers w_i(n)/p(n), and the largest
    bid movement since round n-1.  On stop, the allocation divides the final
    bids by the last broadcast price, so the reported powers are the best
    responses the UEs actually computed.
    """
    bs = BsState(P_T=scenario.P_T, delta=scenario.delta)
    trace: list[IterationTrace] = []
    prev_bids = [0.0] * len(scenario.users)
    status = RunStatus.MAX_ITERATIONS_REACHED

    n = 1
    while True:
        bids = gather(n)
        row_price = math.fsum(bids) / scenario.P_T
        step = max(abs(w - v) for w, v in zip(bids, prev_bids))
        trace.append(
            IterationTrace(
                n=n,
                price=row_price,
                bids=list(bids),
                powers=[w / row_price for w in bids],
                max_bid_step=step,
            )
        )
        decision = bs_step(bs, bids)
        if isinstance(decision, StopAllocation):
            status = RunStatus.CONVERGED
            final_price = decision.p
            final_powers = decision.powers
            broadcast(n, final_price, True)
            break
        if n >= scenario.max_iterations:
            final_price = decision.p
            final_powers = [w / decision.p for w in bids]
            broadcast(n, final_price, True)
            break
        broadcast(n, decision.p, False)
        prev_bids = bids
        n += 1

    oracle = oracle_allocate(scenario.users, scenario.P_T, cfg)
    gap = max(abs(p - q) for p, q in zip(final_powers, oracle.powers))
    return AllocationResult(
        status=status,
        final_powers=final_powers,
        final_price=final_price,
        iterations=n,
        trace=trace,
        oracle_gap=gap,
        oracle=oracle,
    )


def run(scenario: Scenario, cfg: BestResponseConfig = DEFAULT_CONFIG) -> AllocationResult:
    """Execute synchronized bid/price rounds until the BS stops or the cap."""
    ues = [
        UeState(user_id=i, params=u, current_bid=w)
        for i, (u, w) in enumerate(zip(scenario.users, scenario.starting_bids()))
    ]
    pending = [ue.current_bid for ue in ues]

    def gather(n: int) -> list[float]:
        return list(pending)

    def broadcast(n: int, price: float, stop: bool) -> None:
        if stop:
            return
        policy = effective_policy(scenario, n + 1)
        for i, ue in enumerate(ues):
            ues[i], msg = ue_step(ue, price, n + 1, policy, cfg)
            pending[i] = msg.w

    return drive_rounds(scenario, gather, broadcast, cfg)


def classify_regime(scenario: Scenario) -> Regime:
    """Fluctuation risk iff the inflection powers outweigh the budget."""
    total_inflection = math.fsum(u.b for u in scenario.users)
    if total_inflection > scenario.P_T:
        return Regime.FLUCTUATION_RISK
    return Regime.CONVERGENT


def detect_fluctuation(trace: Sequence[IterationTrace], window: int = 20) -> bool:
    """True iff the price zigzags over the whole window and bid steps persist.

    The price's successive differences over the last `window` rounds must
    alternate in sign at every adjacent pair (a zero difference breaks the
    alternation), and max_bid_step must not have decayed by half or more.
    """
    if window < 4:
        raise ValueError(f"window must be >= 4, got {window}")
    if len(trace) < window:
        raise ValueError(f"trace length {len(trace)} is shorter than window {window}")
    tail = trace[-window:]
    prices = [row.price for row in tail]
    diffs = [b - a for a, b in zip(prices, prices[1:])]
    signs = [0 if d == 0.0 else (1 if d > 0.0 else -1) for d in diffs]
    alternations = sum(1 for s, t in zip(signs, signs[1:]) if s * t < 0)
    if alternations < window - 2:
        return False
    return tail[-1].max_bid_step >= 0.5 * tail[0].max_bid_step


def steady_price_bound(users: list[UtilityParams]) -> float:
    """Steady-state price cap a*d/(1-d) + a/2 at the largest-b user."""
    if not users:
        raise ValueError("users must be non-empty")
    i_max = 0
    for i, u in enumerate(users):
        if u.b > users[i_max].b:
            i_max = i
    u = users[i_max]
    # d/(1-d) = exp(-a*b) exactly
    return u.a * math.exp(-min(u.a * u.b, 700.0)) + u.a / 2.0


def critical_price(params: UtilityParams) -> float:
    """Price at which the best response crosses b/2, the fluctuation trigger.

    Evaluates a*d*E/(1 - d*(1+E)) + a*E/(1+E) with E = exp(a*b/2); both terms
    reduce to overflow-free forms a/(E - 1) and a/(1 + 1/E).
    """
    a, b = params.a, params.b
    half = a * b / 2.0
    denom = -math.expm1(-half) / (1.0 + math.exp(-min(a * b, 700.0)))
    if abs(denom) < 1e-12:
        raise SingularityError("1 - d*(1 + exp(a*b/2)) is numerically zero")
    first = a / math.expm1(half) if half <= 700.0 else 0.0
    second = a / (1.0 + math.exp(-min(half, 700.0)))
    return first + second


@dataclass(frozen=True)
class SweepRow:
    P_T: float
    status: RunStatus
    powers: list[float]
    bids: list[float]
    price: float
    sum_power: float
    oracle_powers: list[float]
    oracle_price: float


def sweep(
    users: list[UtilityParams],
    P_T_values: Sequence[float],
    delta: float = 1e-3,
    decay: Optional[DecayPolicy] = None,
    decay_start: int = 20,
    initial_bids: Optional[list[float]] = None,
    max_iterations: int = 10000,
    cfg: BestResponseConfig = DEFAULT_CONFIG,
) -> list[SweepRow]:
    """Run the damped algorithm once per P_T and tabulate the endpoints.

    Defaults follow the reference experiment: delta = 1e-3, exponential decay
    5*exp(-n/10) activating at iteration 20.  Rows are independent runs, so
    they may be computed in any order.
    """
    if any(p <= 0.0 for p in P_T_values):
        raise ValueError("all P_T values must be positive")
    if decay is None:
        decay = DecayPolicy.exponential(5.0, 10.0)
    rows = []
    for P_T in P_T_values:
        scenario = Scenario(
            users=users,
            P_T=float(P_T),
            delta=delta,
            decay=decay,
            decay_start=decay_start,
            initial_bids=initial_bids,
            max_iterations=max_iterations,
        )
        result = run(scenario, cfg)
        rows.append(
            SweepRow(
                P_T=float(P_T),
                status=result.status,
                powers=result.final_powers,
                bids=result.trace[-1].bids,
                price=result.final_price,
                sum_power=math.fsum(result.final_powers),
                oracle_powers=result.oracle.powers,
                oracle_price=result.oracle.shadow_price,
            )
        )
    return rows
