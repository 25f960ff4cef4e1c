"""Message delivery for the bid/price protocol.

Two interchangeable backends share the same round-barrier contract: the BS
consumes exactly M bids for round n (arriving in any order) before any UE can
observe the round-n price, bids are applied in user-id order, and no pair of
bids may share (user_id, n).

* ``InProcessRouter`` — deterministic, queue-based, for tests and local runs.
* ``BsServer`` / ``run_ue_client`` — one TCP server (the BS) and M line-JSON
  clients (the UEs), newline-delimited messages as in :mod:`.messages`.
"""

from __future__ import annotations

import socket
import sys
import threading
from dataclasses import dataclass, field
from typing import Callable

from .agents import UeState, ue_step
from .messages import (
    BidMessage,
    HelloMessage,
    Message,
    PriceMessage,
    ProtocolError,
    StopMessage,
    decode,
    encode,
)
from .simulator import AllocationResult, Scenario, drive_rounds, effective_policy
from .solvers import BestResponseConfig, DEFAULT_CONFIG

__all__ = [
    "DuplicateBidError",
    "RoundTimeoutError",
    "InProcessRouter",
    "BsServer",
    "UeOutcome",
    "run_ue_client",
]


class DuplicateBidError(ValueError):
    """Two bids share the same (user_id, round)."""


class RoundTimeoutError(TimeoutError):
    """A bid for the current round did not arrive within the deadline."""


class _ConnectionClosed(ProtocolError):
    """Peer closed the connection; distinguishable from malformed input."""


class InProcessRouter:
    """Round barrier over in-memory queues.

    UEs are registered up front; each submits exactly one bid per round.  Once
    all M round-n bids are in, the supplied BS reaction is invoked with the
    bids sorted by user id and its price (or stop) message is copied to every
    UE inbox.  Submission order never affects the outcome.
    """

    def __init__(self, M: int, on_round: Callable[[int, list[float]], Message]):
        if M < 1:
            raise ValueError("M must be >= 1")
        self._M = M
        self._on_round = on_round
        self._pending: dict[int, BidMessage] = {}
        self._seen: set[tuple[int, int]] = set()
        self._round = 1
        self.inboxes: list[list[Message]] = [[] for _ in range(M)]
        self.audit: list[tuple[str, int, int]] = []  # (event, round, user_id)

    def submit(self, bid: BidMessage) -> None:
        if not 0 <= bid.user_id < self._M:
            raise ProtocolError(f"unknown user id {bid.user_id}")
        if bid.n != self._round:
            raise ProtocolError(f"bid for round {bid.n}, expected round {self._round}")
        key = (bid.user_id, bid.n)
        if key in self._seen:
            raise DuplicateBidError(f"duplicate bid for user {bid.user_id}, round {bid.n}")
        self._seen.add(key)
        self._pending[bid.user_id] = bid
        self.audit.append(("bid", bid.n, bid.user_id))
        if len(self._pending) == self._M:
            bids = [self._pending[i].w for i in range(self._M)]
            reply = self._on_round(self._round, bids)
            for uid in range(self._M):
                self.inboxes[uid].append(reply)
                self.audit.append(("deliver", self._round, uid))
            self._pending.clear()
            self._round += 1


class _Connection:
    def __init__(self, sock: socket.socket, deadline: float):
        self.sock = sock
        self.file = sock.makefile("rb")
        self.lock = threading.Lock()
        self.deadline = deadline

    def read_message(self) -> Message:
        self.sock.settimeout(self.deadline)
        try:
            line = self.file.readline()
        except (socket.timeout, TimeoutError) as exc:
            raise RoundTimeoutError("timed out waiting for a message") from exc
        if not line:
            raise _ConnectionClosed("connection closed mid-protocol")
        return decode(line)

    def send(self, message: Message) -> None:
        with self.lock:
            self.sock.sendall(encode(message))

    def close(self) -> None:
        try:
            self.file.close()
        finally:
            self.sock.close()


class BsServer:
    """TCP base station: waits for M registered UEs, then runs the rounds.

    Bids are read per-connection (one line per round) and applied at the
    barrier in user-id order, so the trace is identical to the in-process
    run of the same scenario.
    """

    def __init__(self, scenario: Scenario, host: str = "127.0.0.1", port: int = 0,
                 deadline: float = 5.0, verbose: bool = False):
        self.scenario = scenario
        self.deadline = deadline
        self.verbose = verbose
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((host, port))
        self._listener.listen(len(scenario.users))
        self.address: tuple[str, int] = self._listener.getsockname()

    def serve(self) -> AllocationResult:
        M = len(self.scenario.users)
        conns: dict[int, _Connection] = {}
        self._listener.settimeout(self.deadline)
        try:
            while len(conns) < M:
                try:
                    sock, _ = self._listener.accept()
                except (socket.timeout, TimeoutError) as exc:
                    raise RoundTimeoutError("timed out waiting for registrations") from exc
                conn = _Connection(sock, self.deadline)
                try:
                    hello = conn.read_message()
                except _ConnectionClosed:
                    conn.close()  # port probe or dropped client; keep waiting
                    continue
                if not isinstance(hello, HelloMessage):
                    raise ProtocolError(f"expected hello, got {hello!r}")
                if hello.user_id in conns or not 0 <= hello.user_id < M:
                    raise ProtocolError(f"bad registration id {hello.user_id}")
                conns[hello.user_id] = conn

            def gather(n: int) -> list[float]:
                bids = [0.0] * M
                for uid in range(M):
                    msg = conns[uid].read_message()
                    if self.verbose:
                        print(f"bs <- {msg}", file=sys.stderr)
                    if not isinstance(msg, BidMessage):
                        raise ProtocolError(f"expected bid, got {msg!r}")
                    if msg.user_id != uid:
                        raise ProtocolError(
                            f"bid from user {msg.user_id} on user {uid}'s connection"
                        )
                    if msg.n != n:
                        if msg.n < n:
                            raise DuplicateBidError(
                                f"second bid for round {msg.n} from user {uid}"
                            )
                        raise ProtocolError(f"bid for round {msg.n}, expected {n}")
                    bids[uid] = msg.w
                return bids

            def broadcast(n: int, price: float, stop: bool) -> None:
                message: Message = (
                    StopMessage(n=n, p=price) if stop else PriceMessage(n=n, p=price)
                )
                if self.verbose:
                    print(f"bs -> {message}", file=sys.stderr)
                for uid in range(M):
                    conns[uid].send(message)

            return drive_rounds(self.scenario, gather, broadcast)
        finally:
            for conn in conns.values():
                conn.close()
            self._listener.close()

    def close(self) -> None:
        self._listener.close()


@dataclass
class UeOutcome:
    user_id: int
    final_power: float
    final_price: float
    rounds: int
    log: list[Message] = field(default_factory=list)


def run_ue_client(
    user_id: int,
    scenario: Scenario,
    address: tuple[str, int],
    cfg: BestResponseConfig = DEFAULT_CONFIG,
    deadline: float = 5.0,
    keep_log: bool = False,
    verbose: bool = False,
) -> UeOutcome:
    """One UE: register, send the initial bid, answer prices until stop."""
    state = UeState(
        user_id=user_id,
        params=scenario.users[user_id],
        current_bid=scenario.starting_bids()[user_id],
    )
    sock = socket.create_connection(address, timeout=deadline)
    conn = _Connection(sock, deadline)
    log: list[Message] = []

    def note(direction: str, message: Message) -> None:
        if keep_log:
            log.append(message)
        if verbose:
            print(f"ue{user_id} {direction} {message}", file=sys.stderr)

    try:
        conn.send(HelloMessage(user_id=user_id))
        first = BidMessage(user_id=user_id, n=1, w=state.current_bid)
        conn.send(first)
        note("->", first)
        while True:
            msg = conn.read_message()
            note("<-", msg)
            if isinstance(msg, StopMessage):
                power = state.current_bid / msg.p
                return UeOutcome(
                    user_id=user_id,
                    final_power=power,
                    final_price=msg.p,
                    rounds=msg.n,
                    log=log,
                )
            if not isinstance(msg, PriceMessage):
                raise ProtocolError(f"expected price or stop, got {msg!r}")
            n = msg.n + 1
            state, bid = ue_step(state, msg.p, n, effective_policy(scenario, n), cfg)
            conn.send(bid)
            note("->", bid)
    finally:
        conn.close()
