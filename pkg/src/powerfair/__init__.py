"""Utility-proportional-fair downlink power allocation.

A base station splits a power budget P_T across M users whose satisfaction is
a sigmoidal utility of received power.  The package provides the closed-form
utility calculus, a convex centralized oracle, the distributed bid/price
agents (with fluctuation-damping bid caps), a round simulator with sweeps,
and a line-JSON TCP deployment of the same protocol.
"""

from .agents import (
    BsState,
    DecayKind,
    DecayPolicy,
    DegenerateBidsError,
    PriceUpdate,
    StopAllocation,
    UeState,
    bs_step,
    decay_value,
    ue_step,
)
from .messages import (
    BidMessage,
    HelloMessage,
    PriceMessage,
    ProtocolError,
    StopMessage,
    decode,
    encode,
)
from .simulator import (
    AllocationResult,
    IterationTrace,
    Regime,
    RunStatus,
    Scenario,
    SingularityError,
    SweepRow,
    classify_regime,
    critical_price,
    detect_fluctuation,
    run,
    steady_price_bound,
    sweep,
)
from .solvers import (
    BestResponseConfig,
    BracketOverflowError,
    OracleResult,
    best_response,
    oracle_allocate,
)
from .transport import (
    BsServer,
    DuplicateBidError,
    InProcessRouter,
    RoundTimeoutError,
    UeOutcome,
    run_ue_client,
)
from .utility import (
    ChannelParams,
    DegenerateChannelError,
    UtilityParams,
    inflection_power,
    log_utility,
    sinr,
    slope,
    slope_derivative,
    utility_value,
)

__version__ = "0.1.0"
