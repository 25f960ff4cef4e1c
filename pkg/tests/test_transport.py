import threading

import pytest

from powerfair import (
    BidMessage,
    BsServer,
    BsState,
    DecayPolicy,
    DuplicateBidError,
    InProcessRouter,
    PriceMessage,
    ProtocolError,
    RoundTimeoutError,
    RunStatus,
    Scenario,
    UtilityParams,
    bs_step,
    run,
    run_ue_client,
)


def make_router(P_T, M):
    bs = BsState(P_T=P_T, delta=1e-3)

    def on_round(n, bids):
        decision = bs_step(bs, bids)
        return PriceMessage(n=n, p=decision.p)

    return InProcessRouter(M, on_round)


def test_router_barrier_delivers_price_to_all():
    router = make_router(100.0, 2)
    router.submit(BidMessage(0, 1, 1.0))
    assert router.inboxes[0] == [] and router.inboxes[1] == []  # barrier holds
    router.submit(BidMessage(1, 1, 1.0))
    assert router.inboxes[0] == [PriceMessage(1, 0.02)]
    assert router.inboxes[1] == [PriceMessage(1, 0.02)]


def test_router_rejects_duplicates_and_bad_rounds():
    router = make_router(100.0, 2)
    router.submit(BidMessage(0, 1, 1.0))
    with pytest.raises(DuplicateBidError):
        router.submit(BidMessage(0, 1, 2.0))
    with pytest.raises(ProtocolError):
        router.submit(BidMessage(1, 5, 1.0))
    with pytest.raises(ProtocolError):
        router.submit(BidMessage(7, 1, 1.0))


def test_router_audit_orders_bids_before_delivery():
    router = make_router(50.0, 3)
    for round_n in (1, 2):
        for uid in (2, 0, 1):
            router.submit(BidMessage(uid, round_n, 1.0 + uid))
    for n in (1, 2):
        events = [e for e in router.audit if e[1] == n]
        kinds = [kind for kind, _, _ in events]
        assert kinds == ["bid"] * 3 + ["deliver"] * 3


def two_user_scenario(**kw):
    users = [UtilityParams(3.0, 15.0), UtilityParams(3.0, 15.0)]
    defaults = dict(P_T=20.0, delta=1e-3, decay=DecayPolicy.exponential(5.0, 10.0))
    defaults.update(kw)
    return Scenario(users=users, **defaults)


def run_socket_scenario(scenario, deadline=10.0):
    server = BsServer(scenario, deadline=deadline)
    outcome = {}

    def serve():
        try:
            outcome["result"] = server.serve()
        except Exception as exc:  # surfaced by the main thread
            outcome["error"] = exc

    thread = threading.Thread(target=serve)
    thread.start()
    clients = []
    errors = []

    def client(uid):
        try:
            clients.append(run_ue_client(uid, scenario, server.address, deadline=deadline))
        except Exception as exc:
            errors.append(exc)

    workers = [
        threading.Thread(target=client, args=(uid,)) for uid in range(len(scenario.users))
    ]
    for w in workers:
        w.start()
    for w in workers:
        w.join()
    thread.join()
    if "error" in outcome:
        raise outcome["error"]
    assert not errors
    return outcome["result"], sorted(clients, key=lambda c: c.user_id)


def test_socket_run_matches_in_process_run():
    scenario = two_user_scenario()
    local = run(scenario)
    remote, ues = run_socket_scenario(scenario)
    assert remote.status == local.status == RunStatus.CONVERGED
    assert remote.iterations == local.iterations
    for a, b in zip(remote.trace, local.trace):
        assert abs(a.price - b.price) <= 1e-12 * max(1.0, abs(b.price))
        for wa, wb in zip(a.bids, b.bids):
            assert abs(wa - wb) <= 1e-12 * max(1.0, abs(wb))
    # symmetric users split the budget in half through the full stack
    for ue in ues:
        assert abs(ue.final_power - 10.0) <= scenario.delta / remote.final_price
        assert ue.final_price == remote.final_price


def test_socket_silent_ue_times_out():
    scenario = two_user_scenario()
    server = BsServer(scenario, deadline=0.4)
    outcome = {}

    def serve():
        try:
            server.serve()
            outcome["error"] = None
        except Exception as exc:
            outcome["error"] = exc

    thread = threading.Thread(target=serve)
    thread.start()
    # only one of the two UEs ever shows up
    holder = {}

    def lonely():
        try:
            holder["ue"] = run_ue_client(0, scenario, server.address, deadline=2.0)
        except Exception as exc:
            holder["error"] = exc

    worker = threading.Thread(target=lonely)
    worker.start()
    thread.join()
    worker.join()
    assert isinstance(outcome["error"], RoundTimeoutError)
    assert "error" in holder  # connection drops when the server gives up
