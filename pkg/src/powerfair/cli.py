"""Command-line front end.

Subcommands: ``run`` (one distributed allocation, trace CSV), ``sweep``
(one run per total power, endpoint CSV), ``oracle`` (centralized optimum),
``serve``/``ue`` (socket deployment of the BS and a single UE).

Exit codes: 0 converged/ok, 1 error, 2 non-convergence.  All floats in CSV
output carry 12 significant digits so repeated runs are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from .agents import DecayKind, DecayPolicy
from .simulator import (
    RunStatus,
    Scenario,
    run,
    sweep,
)
from .solvers import oracle_allocate
from .transport import BsServer, run_ue_client
from .utility import UtilityParams

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2


class ConfigError(ValueError):
    """Scenario file failed validation; message names the offending field."""


def _fmt(x: float) -> str:
    return format(x, ".12g")


def _require(obj: dict, key: str, kinds: tuple[type, ...], where: str = "") -> object:
    label = f"{where}{key}"
    if key not in obj:
        raise ConfigError(f"missing field {label!r}")
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, kinds):
        raise ConfigError(f"field {label!r} has wrong type {type(value).__name__}")
    return value


def _optional(obj: dict, key: str, kinds: tuple[type, ...], default, where: str = ""):
    if key not in obj:
        return default
    return _require(obj, key, kinds, where)


def _parse_decay(obj: dict) -> DecayPolicy:
    kind = str(_require(obj, "kind", (str,), "decay."))
    try:
        dk = DecayKind(kind)
    except ValueError as exc:
        raise ConfigError(f"field 'decay.kind' must be one of none/exponential/rational") from exc
    if dk == DecayKind.EXPONENTIAL:
        l1 = float(_require(obj, "l1", (int, float), "decay."))
        l2 = float(_require(obj, "l2", (int, float), "decay."))
        try:
            return DecayPolicy.exponential(l1, l2)
        except ValueError as exc:
            raise ConfigError(f"field 'decay': {exc}") from exc
    if dk == DecayKind.RATIONAL:
        l3 = float(_require(obj, "l3", (int, float), "decay."))
        try:
            return DecayPolicy.rational(l3)
        except ValueError as exc:
            raise ConfigError(f"field 'decay': {exc}") from exc
    return DecayPolicy.none()


def load_scenario(path: str) -> Scenario:
    """Parse and validate a scenario JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")

    raw_users = _require(doc, "users", (list,))
    if not raw_users:
        raise ConfigError("field 'users' must be a non-empty array")
    users = []
    for i, entry in enumerate(raw_users):
        if not isinstance(entry, dict):
            raise ConfigError(f"field 'users[{i}]' must be an object")
        a = float(_require(entry, "a", (int, float), f"users[{i}]."))
        b = float(_require(entry, "b", (int, float), f"users[{i}]."))
        try:
            users.append(UtilityParams(a=a, b=b))
        except ValueError as exc:
            raise ConfigError(f"field 'users[{i}]': {exc}") from exc

    P_T = float(_require(doc, "P_T", (int, float)))
    delta = float(_optional(doc, "delta", (int, float), 1e-3))
    decay_obj = _optional(doc, "decay", (dict,), None)
    decay = _parse_decay(decay_obj) if decay_obj is not None else DecayPolicy.none()
    decay_start = int(_optional(doc, "decay_start", (int,), 1))
    max_iterations = int(_optional(doc, "max_iterations", (int,), 10000))
    raw_bids = _optional(doc, "initial_bids", (list,), None)
    initial_bids = None
    if raw_bids is not None:
        initial_bids = []
        for i, w in enumerate(raw_bids):
            if isinstance(w, bool) or not isinstance(w, (int, float)):
                raise ConfigError(f"field 'initial_bids[{i}]' has wrong type")
            initial_bids.append(float(w))

    try:
        return Scenario(
            users=users,
            P_T=P_T,
            delta=delta,
            decay=decay,
            decay_start=decay_start,
            initial_bids=initial_bids,
            max_iterations=max_iterations,
        )
    except ValueError as exc:
        raise ConfigError(f"invalid scenario: {exc}") from exc


def _write_trace_csv(path: str, result, M: int) -> None:
    cols = ["n", "price", "max_bid_step"]
    cols += [f"w_{i + 1}" for i in range(M)]
    cols += [f"P_{i + 1}" for i in range(M)]
    lines = [",".join(cols)]
    for row in result.trace:
        cells = [str(row.n), _fmt(row.price), _fmt(row.max_bid_step)]
        cells += [_fmt(w) for w in row.bids]
        cells += [_fmt(p) for p in row.powers]
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_run(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.config)
    result = run(scenario)
    _write_trace_csv(args.output, result, len(scenario.users))
    print(f"status: {result.status.value}")
    print(f"iterations: {result.iterations}")
    print(f"final price: {_fmt(result.final_price)}")
    print(f"oracle gap: {_fmt(result.oracle_gap)}")
    return EXIT_OK if result.status == RunStatus.CONVERGED else EXIT_NOT_CONVERGED


def _parse_range(text: str) -> list[float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"--range must look like start:end:step, got {text!r}")
    try:
        start, end, step = (float(x) for x in parts)
    except ValueError as exc:
        raise ConfigError(f"--range has non-numeric parts: {text!r}") from exc
    if step <= 0.0:
        raise ConfigError(f"--range step must be positive, got {step}")
    if start > end:
        raise ConfigError(f"--range start {start} exceeds end {end}")
    values = []
    k = 0
    while True:
        v = start + k * step
        if v > end + 1e-9:
            break
        values.append(v)
        k += 1
    return values


def cmd_sweep(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.config)
    if args.range:
        values = _parse_range(args.range)
    else:
        try:
            values = [float(x) for x in args.pt.split(",")]
        except ValueError as exc:
            raise ConfigError(f"--pt has non-numeric parts: {args.pt!r}") from exc
    if any(v <= 0.0 for v in values):
        raise ConfigError("all P_T values must be positive")

    rows = sweep(
        scenario.users,
        values,
        delta=scenario.delta,
        decay=scenario.decay,
        decay_start=scenario.decay_start,
        initial_bids=scenario.initial_bids,
        max_iterations=scenario.max_iterations,
    )
    M = len(scenario.users)
    cols = ["P_T", "p", "sum_P"]
    cols += [f"P_{i + 1}" for i in range(M)]
    cols += [f"w_{i + 1}" for i in range(M)]
    cols += [f"oracle_P_{i + 1}" for i in range(M)]
    lines = [",".join(cols)]
    for row in rows:
        cells = [_fmt(row.P_T), _fmt(row.price), _fmt(row.sum_power)]
        cells += [_fmt(p) for p in row.powers]
        cells += [_fmt(w) for w in row.bids]
        cells += [_fmt(p) for p in row.oracle_powers]
        lines.append(",".join(cells))
    with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"rows: {len(rows)}")
    if all(r.status == RunStatus.CONVERGED for r in rows):
        return EXIT_OK
    return EXIT_NOT_CONVERGED


def cmd_oracle(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.config)
    result = oracle_allocate(scenario.users, scenario.P_T)
    if args.json:
        print(
            json.dumps(
                {
                    "powers": result.powers,
                    "shadow_price": result.shadow_price,
                    "kkt_residual": result.kkt_residual,
                }
            )
        )
    else:
        for i, p in enumerate(result.powers):
            print(f"P_{i + 1}: {_fmt(p)}")
        print(f"shadow price: {_fmt(result.shadow_price)}")
        print(f"kkt residual: {_fmt(result.kkt_residual)}")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.config)
    server = BsServer(
        scenario,
        host=args.host,
        port=args.port,
        deadline=args.timeout,
        verbose=args.verbose,
    )
    host, port = server.address
    print(f"listening on {host}:{port}", flush=True)
    result = server.serve()
    print(f"status: {result.status.value}")
    print(f"iterations: {result.iterations}")
    print(f"final price: {_fmt(result.final_price)}")
    for i, p in enumerate(result.final_powers):
        print(f"P_{i + 1}: {_fmt(p)}")
    return EXIT_OK if result.status == RunStatus.CONVERGED else EXIT_NOT_CONVERGED


def cmd_ue(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.config)
    if not 0 <= args.user_index < len(scenario.users):
        raise ConfigError(
            f"--user-index {args.user_index} out of range for {len(scenario.users)} users"
        )
    host, _, port_text = args.addr.rpartition(":")
    if not host:
        raise ConfigError(f"--addr must look like host:port, got {args.addr!r}")
    try:
        port = int(port_text)
    except ValueError as exc:
        raise ConfigError(f"--addr port is not an integer: {args.addr!r}") from exc
    outcome = run_ue_client(
        args.user_index,
        scenario,
        (host, port),
        deadline=args.timeout,
        verbose=args.verbose,
    )
    print(f"user: {outcome.user_id}")
    print(f"rounds: {outcome.rounds}")
    print(f"final price: {_fmt(outcome.final_price)}")
    print(f"final power: {_fmt(outcome.final_power)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="powerfair",
        description="Utility-proportional-fair downlink power allocation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one distributed allocation")
    p_run.add_argument("config", help="scenario JSON file")
    p_run.add_argument("-o", "--output", required=True, help="trace CSV path")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run the allocation across total powers")
    p_sweep.add_argument("config", help="scenario JSON file (P_T is overridden per row)")
    group = p_sweep.add_mutually_exclusive_group(required=True)
    group.add_argument("--range", help="P_T grid as start:end:step")
    group.add_argument("--pt", help="comma-separated P_T values")
    p_sweep.add_argument("-o", "--output", required=True, help="sweep CSV path")
    p_sweep.set_defaults(func=cmd_sweep)

    p_oracle = sub.add_parser("oracle", help="compute the centralized optimum")
    p_oracle.add_argument("config", help="scenario JSON file")
    p_oracle.add_argument("--json", action="store_true", help="machine-readable output")
    p_oracle.set_defaults(func=cmd_oracle)

    p_serve = sub.add_parser("serve", help="run the base station over TCP")
    p_serve.add_argument("config", help="scenario JSON file")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=0, help="0 picks a free port")
    p_serve.add_argument("--timeout", type=float, default=5.0, help="per-message deadline (s)")
    p_serve.add_argument("--verbose", action="store_true", help="log every message")
    p_serve.set_defaults(func=cmd_serve)

    p_ue = sub.add_parser("ue", help="run one user client over TCP")
    p_ue.add_argument("config", help="scenario JSON file")
    p_ue.add_argument("--user-index", type=int, required=True)
    p_ue.add_argument("--addr", required=True, help="base station address host:port")
    p_ue.add_argument("--timeout", type=float, default=5.0, help="per-message deadline (s)")
    p_ue.add_argument("--verbose", action="store_true", help="log every message")
    p_ue.set_defaults(func=cmd_ue)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, TimeoutError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
