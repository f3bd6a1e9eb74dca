import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zsgames.aq_hamiltonian import saddle_point
from zsgames.errors import InvalidExponents, NonFiniteEvaluation
from zsgames.game_model import AQGameSpec, GeneralGameSpec, GrowthConstants, bracket, scalar_lq_game
from zsgames.hamiltonian_eval import (audit_growth_bound, direct_modulus_p, eval_lower, eval_upper,
                                      power_gap_max, lipschitz_exponent_pairs, lipschitz_modulus_p,
                                      refinement_study, truncation_radii)
from zsgames.riccati import lq_hamiltonian

UNIT = GrowthConstants(L=1, c=1, sigma1=1, sigma2=1, rho1=2, rho2=2, mu=1)
QUAD = GrowthConstants(L=1, c=1, sigma1=1, sigma2=1, rho1=2, rho2=2, mu=2)


def test_power_gap_examples():
    assert power_gap_max(1, 1, 1, 2) == pytest.approx((0.5, 0.25))
    assert power_gap_max(2, 1, 1, 2) == pytest.approx((1.0, 1.0))
    assert power_gap_max(0, 1, 1, 2) == (0.0, 0.0)


def test_power_gap_against_frozen_grid_search():
    # grid search over [0, 10) with step 1e-5
    r, th = power_gap_max(3, 0.5, 0.7, 2.5)
    assert r == pytest.approx(1.33405, abs=1e-5)
    assert th == pytest.approx(2.642859205741175, rel=1e-9)


def test_power_gap_errors_and_zero_sigma():
    with pytest.raises(InvalidExponents):
        power_gap_max(1, 1, 2, 2)
    with pytest.raises(InvalidExponents):
        power_gap_max(1, 1, 0, 2)
    assert power_gap_max(3, 1, 0, 2, allow_zero_sigma=True) == (0.0, 3.0)


def test_power_gap_out_of_range():
    assert power_gap_max(5, 0.1, 1, 1.001) == (math.inf, math.inf)
    r, th = power_gap_max(1e-3, 10, 0.5, 0.5001)
    assert r == 0.0 and th == 0.0


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 20), st.floats(0.05, 10), st.floats(0.05, 5.8), st.floats(0.1, 1),
       st.lists(st.floats(0, 50), min_size=20, max_size=20))
def test_power_gap_dominates(N, c, sigma, frac, rs):
    rho = sigma + 0.1 + frac * (5.9 - sigma)
    r_bar, th = power_gap_max(N, c, sigma, rho)
    scale = N * r_bar ** sigma
    assert th == pytest.approx(scale - c * r_bar ** rho, rel=1e-10, abs=1e-12 * (1 + scale))
    r = np.asarray(rs)
    assert np.all(N * r ** sigma - c * r ** rho <= th + 1e-12 * (1 + np.abs(th)))


def test_truncation_radius_example():
    r = truncation_radii(UNIT, 0.0, 0.0)
    assert r.r1 == pytest.approx(math.sqrt(6))
    # outside that radius the zero-p pre-Hamiltonian exceeds its upper bound
    spec = scalar_lq_game(0, 1, 1, 0, 1, 1, 0, constants=UNIT)
    u = np.linspace(r.r1, 3 * r.r1, 50)[:, None]
    g = spec.eval_g(0, np.zeros((50, 1)), u, np.zeros((50, 1)))
    assert np.all(g > UNIT.L * bracket(0.0) ** UNIT.mu)


def test_truncation_monotone(rng):
    for _ in range(100):
        x, p = rng.uniform(0, 5, 2)
        a, b = truncation_radii(QUAD, x, p), truncation_radii(QUAD, x, 2 * p)
        c = truncation_radii(QUAD, 2 * x, p)
        assert b.r1 >= a.r1 and b.r2 >= a.r2 and c.r1 >= a.r1 and c.r2 >= a.r2
        assert a.r1 > 0 and a.r2 > 0


def test_radii_contain_lq_saddle(rng):
    A, B1, B2, Q, R1, R2 = 0.5, 1.2, 0.8, 1.0, 0.7, 1.3
    spec = scalar_lq_game(A, B1, B2, Q, R1, R2, 0.0)
    aq = AQGameSpec.constant(A=[0.0], B1=[[B1]], B2=[[B2]], Q=0.0, R1=[[2 * R1]], R2=[[2 * R2]])
    for _ in range(100):
        x, p = rng.uniform(-5, 5, 2)
        res = saddle_point(aq, 0, [x], [p])
        r = truncation_radii(spec.constants, abs(x), abs(p))
        assert abs(res.u1_bar[0]) <= r.r1 and abs(res.u2_bar[0]) <= r.r2


def _aq_example():
    aq = AQGameSpec.constant(A=[0.0], B1=[[1.0]], B2=[[0.0]], Q=lambda t, x: float(x[0]) ** 2,
                             R1=[[2.0]], R2=[[2.0]])
    return aq, aq.to_general(QUAD, dim_state=1)


def test_eval_upper_aq_example():
    aq, spec = _aq_example()
    up = eval_upper(spec, 0, [1.0], [2.0], 241)
    lo = eval_lower(spec, 0, [1.0], [2.0], 241)
    assert abs(up.value - 0.0) <= 0.05 and abs(lo.value - 0.0) <= 0.05
    assert up.value >= lo.value
    assert np.linalg.norm(up.u1_arg) <= up.radii.r1 and np.linalg.norm(up.u2_arg) <= up.radii.r2
    q0 = saddle_point(aq, 0, [1.0], [2.0]).q0
    assert abs(up.value - q0) <= 0.05


def test_zero_game():
    spec = GeneralGameSpec(1, 1, 1, lambda t, x, a, b: 0 * x, lambda t, x, a, b: 0 * x[..., 0],
                           lambda x: 0 * x[..., 0], UNIT, 1.0, vectorized=True)
    assert eval_upper(spec, 0, [1.0], [1.0], 11).value == 0
    assert eval_lower(spec, 0, [1.0], [1.0], 11).value == 0
    assert audit_growth_bound(spec, 50, seed=1, grid_points=11).ok


def _wavy():
    def f(t, x, a, b):
        return np.sin(x + a[..., :1] * b[..., :1]) + 0.5 * a - 0.5 * b

    def g(t, x, a, b):
        return (a[..., 0] ** 2 - b[..., 0] ** 2 + np.cos(3 * a[..., 0] * b[..., 0])
                + 0.1 * x[..., 0])
    return GeneralGameSpec(1, 1, 1, f, g, lambda x: 0 * x[..., 0], UNIT, 1.0, vectorized=True)


def test_upper_dominates_lower_on_nonconvex_game(rng):
    spec = _wavy()
    for _ in range(30):
        x, p = rng.uniform(-2, 2, 2)
        up = eval_upper(spec, 0.0, [x], [p], 61).value
        lo = eval_lower(spec, 0.0, [x], [p], 61).value
        assert up >= lo


def test_separated_game_orders_coincide(rng):
    spec = scalar_lq_game(0.3, 1.0, 0.5, 1.0, 1.0, 1.0, 0.0)
    for _ in range(10):
        x, p = rng.uniform(-2, 2, 2)
        assert eval_upper(spec, 0, [x], [p], 81).value == pytest.approx(
            eval_lower(spec, 0, [x], [p], 81).value, abs=1e-12)


def test_refinement_converges():
    aq, spec = _aq_example()
    out = refinement_study(spec, 0, [1.0], [2.0])
    # successive changes are within a grid spacing's worth of variation
    assert max(out["deltas"]) <= 0.05
    assert abs(out["values"][-1]) <= abs(out["values"][0]) + 1e-12 <= 0.05


def test_non_finite_detected():
    spec = GeneralGameSpec(1, 1, 1, lambda t, x, a, b: x, lambda t, x, a, b: np.log(a[..., 0]),
                           lambda x: 0 * x[..., 0], UNIT, 1.0, vectorized=True)
    with pytest.raises(NonFiniteEvaluation):
        eval_upper(spec, 0, [0.0], [0.0], 11)


def test_growth_audit_lq_and_rogue():
    spec = scalar_lq_game(0.5, 1.0, 0.7, 1.0, 1.0, 1.0, 0.0)
    assert audit_growth_bound(spec, 200, seed=3).ok

    def g_rogue(t, x, a, b):
        return x[..., 0] ** 4 + a[..., 0] ** 2 - b[..., 0] ** 2

    rogue = GeneralGameSpec(1, 1, 1, spec.f, g_rogue, spec.h, spec.constants, 1.0, vectorized=True)
    assert not audit_growth_bound(rogue, 100, seed=3, x_box=5.0).ok


def test_modulus_bounded_controls():
    k = GrowthConstants(1, 1, 0, 0, 2, 2, mu=1)
    a = lipschitz_modulus_p(k, 1.0, 0.0, 0.0)
    assert a == pytest.approx(lipschitz_modulus_p(k, 1.0, 7.0, 3.0))
    # affine in <x> with all other terms constant
    b, c = lipschitz_modulus_p(k, 2.0, 0, 0), lipschitz_modulus_p(k, 3.0, 0, 0)
    slope = (c - b) / (bracket(3.0) - bracket(2.0))
    assert a - slope * bracket(1.0) == pytest.approx(b - slope * bracket(2.0))


def test_modulus_audit_lq(rng):
    for A, B1, B2, Q, R1, R2 in [(0, 1, 0, 1, 1, 1), (0.5, 1.2, 0.8, 1, 0.7, 1.3), (-1, 0.3, 2, 2, 1, 0.5)]:
        spec = scalar_lq_game(A, B1, B2, Q, R1, R2, 0.0)
        H = lq_hamiltonian(A, B1, B2, Q, R1, R2)
        for _ in range(300):
            x, p, q = rng.uniform(-5, 5, 3)
            diff = abs(H(0, x, p) - H(0, x, q))
            direct = direct_modulus_p(spec.constants, abs(x), abs(p), abs(q))
            full = lipschitz_modulus_p(spec.constants, abs(x), abs(p), abs(q))
            assert diff <= direct * abs(p - q) + 1e-12
            assert direct <= full * (1 + 1e-12)


def test_modulus_monotone(rng):
    for _ in range(100):
        x, p, q = rng.uniform(0, 4, 3)
        base = lipschitz_modulus_p(QUAD, x, p, q)
        assert lipschitz_modulus_p(QUAD, x + 0.5, p, q) >= base
        assert lipschitz_modulus_p(QUAD, x, p + 0.5, q) >= base
        assert lipschitz_modulus_p(QUAD, x, p, q + 0.5) >= base


def test_exponent_pairs_nonnegative():
    pairs = lipschitz_exponent_pairs(GrowthConstants(1, 1, 0.5, 1.5, 2, 3, mu=1.5))
    assert len(pairs) == 12 and all(a >= 0 and b >= 0 for a, b in pairs)


def test_compatibility_matches_exponent_pairs():
    from zsgames.game_model import check_compatibility

    k = GrowthConstants(1, 1, 0.5, 1.5, 2, 3, mu=1.5)
    lhs = sorted(v for _, v, _ in check_compatibility(k).entries)
    pairs = [lam + (k.mu - 1) * nu for lam, nu in lipschitz_exponent_pairs(k)]
    assert all(min(abs(p - v) for v in lhs) < 1e-12 for p in pairs if p != 1.0)
