"""UE and BS state machines for the distributed bid/price protocol.

One round: every UE turns the latest price into a bid w = p * P(p) (optionally
clamped by a fluctuation decay cap), the BS sums bids into the next price
p = sum(w) / P_T, and stops once no bid moved by delta or more.  On stop the
BS allocates P_i = w_i / p using the price it last broadcast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Union

from .messages import BidMessage
from .solvers import BestResponseConfig, DEFAULT_CONFIG, best_response
from .utility import UtilityParams

__all__ = [
    "DecayKind",
    "DecayPolicy",
    "UeState",
    "BsState",
    "PriceUpdate",
    "StopAllocation",
    "DegenerateBidsError",
    "decay_value",
    "ue_step",
    "bs_step",
]


class DegenerateBidsError(ValueError):
    """All bids are zero while the BS has positive power to sell."""


class DecayKind(str, Enum):
    NONE = "none"
    EXPONENTIAL = "exponential"
    RATIONAL = "rational"


@dataclass(frozen=True)
class DecayPolicy:
    """Per-iteration cap on bid movement: l1*exp(-n/l2), l3/n, or no cap."""

    kind: DecayKind = DecayKind.NONE
    l1: float = 0.0
    l2: float = 0.0
    l3: float = 0.0

    def __post_init__(self) -> None:
        if self.kind == DecayKind.EXPONENTIAL and (self.l1 <= 0.0 or self.l2 <= 0.0):
            raise ValueError("exponential decay requires l1 > 0 and l2 > 0")
        if self.kind == DecayKind.RATIONAL and self.l3 <= 0.0:
            raise ValueError("rational decay requires l3 > 0")

    @staticmethod
    def none() -> "DecayPolicy":
        return DecayPolicy(kind=DecayKind.NONE)

    @staticmethod
    def exponential(l1: float, l2: float) -> "DecayPolicy":
        return DecayPolicy(kind=DecayKind.EXPONENTIAL, l1=l1, l2=l2)

    @staticmethod
    def rational(l3: float) -> "DecayPolicy":
        return DecayPolicy(kind=DecayKind.RATIONAL, l3=l3)


def decay_value(policy: DecayPolicy, n: int) -> float:
    """Bid-step cap at iteration n; +inf disables clamping entirely."""
    if n < 1:
        raise ValueError(f"iteration must be >= 1, got {n}")
    if policy.kind == DecayKind.EXPONENTIAL:
        return policy.l1 * math.exp(-n / policy.l2)
    if policy.kind == DecayKind.RATIONAL:
        return policy.l3 / n
    return math.inf


@dataclass(frozen=True)
class UeState:
    user_id: int
    params: UtilityParams
    last_bid: float = 0.0
    current_bid: float = 0.0
    current_power: float = 0.0


def ue_step(
    state: UeState,
    price: float,
    n: int,
    policy: DecayPolicy = DecayPolicy.none(),
    cfg: BestResponseConfig = DEFAULT_CONFIG,
) -> tuple[UeState, BidMessage]:
    """Respond to a price: solve the best response, emit the (clamped) bid."""
    if price <= 0.0:
        raise ValueError(f"price must be positive, got {price}")
    power = best_response(state.params, price, cfg)
    w = price * power
    cap = decay_value(policy, n)
    delta = w - state.current_bid
    if abs(delta) > cap:
        # sign(0) never reaches here, so a candidate equal to the previous
        # bid passes through unchanged and fixed points stay fixed
        w = state.current_bid + math.copysign(cap, delta)
        if abs(w - state.current_bid) > cap:  # undo a 1-ulp rounding overshoot
            w = math.nextafter(w, state.current_bid)
    new_state = replace(
        state,
        last_bid=state.current_bid,
        current_bid=w,
        current_power=w / price,
    )
    return new_state, BidMessage(user_id=state.user_id, n=n, w=w)


@dataclass
class BsState:
    P_T: float
    delta: float
    previous_bids: Optional[list[float]] = None  # w(0) = 0 until bids arrive
    price: Optional[float] = None

    def __post_init__(self) -> None:
        if self.P_T <= 0.0:
            raise ValueError(f"P_T must be positive, got {self.P_T}")
        if self.delta <= 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")


@dataclass(frozen=True)
class PriceUpdate:
    p: float


@dataclass(frozen=True)
class StopAllocation:
    p: float
    powers: list[float]


def bs_step(state: BsState, bids: list[float]) -> Union[PriceUpdate, StopAllocation]:
    """Consume one round of bids: broadcast a price or stop and allocate.

    The stop allocation divides each final bid by the price the BS last
    broadcast (the one those bids responded to), so budget feasibility holds
    only up to sum_i(delta / p) of slack.
    """
    if not bids:
        raise ValueError("bids must be non-empty")
    total = math.fsum(bids)
    if total <= 0.0:
        raise DegenerateBidsError("sum of bids is zero with P_T > 0")
    prev = state.previous_bids if state.previous_bids is not None else [0.0] * len(bids)
    if len(prev) != len(bids):
        raise ValueError(f"expected {len(prev)} bids, got {len(bids)}")
    if state.price is not None and max(abs(w - v) for w, v in zip(bids, prev)) < state.delta:
        return StopAllocation(p=state.price, powers=[w / state.price for w in bids])
    price = total / state.P_T
    state.previous_bids = list(bids)
    state.price = price
    return PriceUpdate(p=price)
