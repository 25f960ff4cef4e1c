import math
import random

import pytest

from powerfair import (
    BestResponseConfig,
    BracketOverflowError,
    UtilityParams,
    best_response,
    oracle_allocate,
    slope,
    utility_value,
)

SIX_USERS = [
    UtilityParams(4.0, 5.0),
    UtilityParams(3.5, 10.0),
    UtilityParams(3.0, 15.0),
    UtilityParams(2.5, 20.0),
    UtilityParams(1.5, 25.0),
    UtilityParams(1.0, 30.0),
]


def test_best_response_inverts_slope_at_center():
    u = UtilityParams(4.0, 5.0)
    p = slope(u, 5.0)
    assert best_response(u, p) == pytest.approx(5.0, abs=1e-8)


def test_best_response_at_price_two():
    u = UtilityParams(4.0, 5.0)
    P = best_response(u, 2.0)
    assert P == pytest.approx(5.000000002061154, abs=1e-8)
    assert abs(slope(u, P) - 2.0) <= 1e-9


def test_best_response_steep_price():
    u = UtilityParams(1.0, 30.0)
    P = best_response(u, 1000.0)
    assert 0.0 < P < 30.0
    # |S'| ~ 1/P^2 here, so the 1e-10 power tolerance leaves ~1e-4 in S
    assert abs(slope(u, P) - 1000.0) <= 1e-7 * 1000.0
    assert P < best_response(u, 0.5)


def test_best_response_domain_and_bracket_errors():
    u = UtilityParams(4.0, 5.0)
    with pytest.raises(ValueError):
        best_response(u, 0.0)
    with pytest.raises(ValueError):
        best_response(u, -1.0)
    small = BestResponseConfig(max_bracket=100.0)
    with pytest.raises(BracketOverflowError):
        best_response(UtilityParams(0.5, 50.0), 1e-300, small)


def test_config_validation():
    with pytest.raises(ValueError):
        BestResponseConfig(power_tolerance=0.0)
    with pytest.raises(ValueError):
        BestResponseConfig(power_tolerance=1.0, max_bracket=0.5)


def test_best_response_inverse_identity_randomized():
    rng = random.Random(3)
    for _ in range(60):
        u = UtilityParams(rng.uniform(0.5, 8.0), rng.uniform(1.0, 50.0))
        hi = slope(u, 0.01)
        p = math.exp(rng.uniform(math.log(1e-3), math.log(hi)))
        P = best_response(u, p)
        assert abs(slope(u, P) - p) <= 1e-8 * p


def test_best_response_monotone_in_price():
    rng = random.Random(5)
    for _ in range(60):
        u = UtilityParams(rng.uniform(0.5, 8.0), rng.uniform(1.0, 50.0))
        p1 = math.exp(rng.uniform(math.log(1e-3), math.log(u.a)))
        p2 = p1 * rng.uniform(1.5, 10.0)
        assert best_response(u, p1) > best_response(u, p2)


def test_oracle_single_user_gets_whole_budget():
    u = UtilityParams(4.0, 5.0)
    res = oracle_allocate([u], 45.0)
    assert res.powers[0] == pytest.approx(45.0, rel=1e-6)
    assert res.shadow_price == pytest.approx(slope(u, 45.0), rel=1e-5)


def test_oracle_symmetry():
    users = [UtilityParams(3.0, 15.0), UtilityParams(3.0, 15.0)]
    res = oracle_allocate(users, 20.0)
    assert res.powers[0] == pytest.approx(10.0, abs=1e-6)
    assert res.powers[1] == pytest.approx(10.0, abs=1e-6)


def test_oracle_six_user_reference_point():
    res = oracle_allocate(SIX_USERS, 100.0)
    expected = [5.276, 10.263, 15.233, 20.165, 24.546, 24.518]
    for got, want in zip(res.powers, expected):
        assert got == pytest.approx(want, rel=0.01)
    assert res.shadow_price == pytest.approx(0.9959, rel=0.01)
    assert abs(math.fsum(res.powers) - 100.0) <= 1e-6


def test_oracle_budget_and_kkt_randomized():
    rng = random.Random(9)
    for _ in range(25):
        M = rng.randint(1, 10)
        users = [
            UtilityParams(rng.uniform(0.5, 8.0), rng.uniform(1.0, 50.0)) for _ in range(M)
        ]
        total_b = sum(u.b for u in users)
        P_T = rng.uniform(0.2, 2.0) * total_b
        res = oracle_allocate(users, P_T)
        assert abs(math.fsum(res.powers) - P_T) <= 1e-6 * max(1.0, P_T)
        assert all(p > 0.0 for p in res.powers)
        # every user's marginal log-utility sits at the shadow price; at
        # starvation prices the achievable residual scales with the price
        tol = 1e-6 * max(1.0, res.shadow_price)
        assert res.kkt_residual <= tol
        for u, P in zip(users, res.powers):
            assert abs(slope(u, P) - res.shadow_price) <= tol


def test_oracle_beats_grid_search_two_users():
    rng = random.Random(21)
    for _ in range(3):
        users = [
            UtilityParams(rng.uniform(1.0, 5.0), rng.uniform(3.0, 20.0)) for _ in range(2)
        ]
        P_T = rng.uniform(0.5, 1.5) * (users[0].b + users[1].b)
        res = oracle_allocate(users, P_T)
        best = utility_value(users[0], res.powers[0]) * utility_value(users[1], res.powers[1])
        step = P_T / 1e5
        k = 1
        while k * step < P_T:
            P1 = k * step
            v = utility_value(users[0], P1) * utility_value(users[1], P_T - P1)
            assert v <= best + 1e-6
            k += 1


def test_oracle_prioritizes_lower_inflection():
    # with equal steepness the smaller-b user reaches at least the other's
    # utility level; requires a*b >= 10 so the normalization terms vanish
    rng = random.Random(23)
    for _ in range(10):
        a = rng.uniform(1.0, 4.0)
        b1 = rng.uniform(5.0, 20.0)
        b2 = b1 + rng.uniform(1.0, 15.0)
        if a * b1 < 10.0:
            continue
        users = [UtilityParams(a, b1), UtilityParams(a, b2)]
        # priority is meaningful while power is scarce; past saturation both
        # utilities round to 1 and the ordering degenerates to ulp noise
        P_T = rng.uniform(0.3, 0.85) * (b1 + b2)
        res = oracle_allocate(users, P_T)
        u1 = utility_value(users[0], res.powers[0])
        u2 = utility_value(users[1], res.powers[1])
        # slack covers differences below the solver's power resolution
        assert u1 >= u2 - 1e-12


def test_oracle_input_validation():
    with pytest.raises(ValueError):
        oracle_allocate([], 10.0)
    with pytest.raises(ValueError):
        oracle_allocate([UtilityParams(4.0, 5.0)], 0.0)
