import math
import warnings

import numpy as np
import pytest

from zsgames.aq_hamiltonian import saddle_point
from zsgames.dp_value import (DPConfig, growth_envelope_check, isaacs_coincidence,
                              optimality_principle_check, value_iterate)
from zsgames.errors import TruncationTooSmall
from zsgames.game_model import GeneralGameSpec, GrowthConstants, scalar_lq_game
from zsgames.hj_grid_solver import Grid1D, solve
from zsgames.scenario import LQGame, lq_as_aq

pytestmark = pytest.mark.filterwarnings("ignore:growth constants do not satisfy:RuntimeWarning")

LQ = scalar_lq_game(0, 1, 0, 1, 1, 1, 0)


@pytest.fixture(scope="module")
def lq_small():
    cfg = DPConfig.from_truncation(LQ, -2, 2, 81, 40, 41, 4.0)
    return cfg, value_iterate(LQ, cfg)


def nonseparable_game():
    k = GrowthConstants(2, 1, 1, 1, 3, 3, 1.5)
    f = lambda t, x, a, b: np.sin(3 * x) * a + 0.5 * np.abs(a - b)  # noqa: E731
    g = lambda t, x, a, b: ((a[..., 0] ** 2 - b[..., 0] ** 2 + 0.8 * a[..., 0] * b[..., 0])  # noqa: E731
                            * np.cos(x[..., 0]) ** 2 + 0.1 * a[..., 0] ** 2)
    return GeneralGameSpec(1, 1, 1, f, g, lambda x: np.cos(2 * x[..., 0]), k, 1.0, vectorized=True)


def test_zero_game():
    k = GrowthConstants(1, 1, 0.5, 0.5, 2, 2, 1)
    zero = GeneralGameSpec(1, 1, 1, lambda t, x, a, b: a - b, lambda t, x, a, b: 0 * a[..., 0],
                           lambda x: 0 * x[..., 0], k, 1.0, vectorized=True)
    vp = value_iterate(zero, DPConfig(Grid1D(-1, 1, 21, 5, 1.0), 1, 5, 1, 5))
    assert np.all(vp.upper.values == 0) and np.all(vp.lower.values == 0) and vp.gap == 0


def test_lq_small(lq_small):
    cfg, vp = lq_small
    assert cfg.u1_radius == pytest.approx(9.043068485862342)
    assert abs(vp.upper.at(0, 1.0) - math.tanh(1)) / math.tanh(1) <= 0.05
    assert vp.upper.at(0, 0.0) == 0.0
    assert np.array_equal(vp.upper.values[-1], np.zeros(cfg.grid.nx))
    assert vp.stats["edge_fraction"] == 0.0


def test_incompatible_exponents_warning():
    cfg = DPConfig(Grid1D(-1, 1, 11, 2, 1.0), 2, 5, 2, 5)
    with pytest.warns(RuntimeWarning):
        value_iterate(LQ, cfg)


def test_upper_dominates_lower():
    spec = nonseparable_game()
    vp = value_iterate(spec, DPConfig(Grid1D(-2, 2, 81, 40, 1.0), 3, 31, 3, 31,
                                      boundary_tolerance=1.0))
    assert vp.gap > 0.1
    assert np.all(vp.upper.values >= vp.lower.values - 1e-12)


def test_truncation_too_small():
    cfg = DPConfig.from_truncation(LQ, -2, 2, 81, 40, 41, 4.0)
    with pytest.raises(TruncationTooSmall):
        value_iterate(LQ, DPConfig(cfg.grid, 0.2, 11, 0.2, 11))


def test_monotone_in_terminal_data(rng):
    cfg = DPConfig(Grid1D(-2, 2, 41, 20, 1.0), 3, 21, 3, 21, boundary_tolerance=1.0)
    spec = nonseparable_game()
    bump = rng.uniform(0, 0.5, cfg.grid.nx)
    lo = value_iterate(spec, cfg, terminal=np.cos)
    hi = value_iterate(spec, cfg, terminal=lambda x: np.cos(x) + bump)
    assert np.all(hi.upper.values >= lo.upper.values)
    assert np.all(hi.lower.values >= lo.lower.values)


def test_deterministic():
    cfg = DPConfig(Grid1D(-2, 2, 41, 10, 1.0), 3, 21, 3, 21, boundary_tolerance=1.0)
    a = value_iterate(nonseparable_game(), cfg)
    b = value_iterate(nonseparable_game(), cfg)
    assert np.array_equal(a.upper.values, b.upper.values)


def test_optimality_principle(lq_small):
    cfg, vp = lq_small
    nodes = cfg.grid.x[[30, 40, 45, 60]]
    last = optimality_principle_check(LQ, cfg, cfg.grid.nt - 1, nodes, value=vp)
    assert last["max_discrepancy"] == 0.0
    mid = optimality_principle_check(LQ, cfg, cfg.grid.nt // 2, [0.5], value=vp)
    assert mid["max_discrepancy"] <= 1e-8
    with pytest.raises(ValueError):
        optimality_principle_check(LQ, cfg, cfg.grid.nt, [0.5], value=vp)
    coarse = DPConfig(cfg.grid, cfg.u1_radius, 5, cfg.u2_radius, 5)
    rep = optimality_principle_check(LQ, cfg, cfg.grid.nt // 2, [0.5], value=vp, intermediate=coarse)
    assert rep["max_discrepancy"] >= 0


def test_isaacs_coincidence_one_player():
    cfg = DPConfig.from_truncation(LQ, -2, 2, 81, 40, 41, 4.0)
    rep = isaacs_coincidence(lq_as_aq(LQGame(type="lq", B2=0.0)), cfg, LQ.constants)
    assert rep["gap"] <= 1e-6 and rep["within_tolerance"] and rep["shrinks"]


def test_isaacs_coincidence_two_player():
    spec = scalar_lq_game(0, 1, 0.5, 1, 1, 1, 0)
    cfg = DPConfig.from_truncation(spec, -2, 2, 81, 40, 41, 4.0)
    rep = isaacs_coincidence(lq_as_aq(LQGame(type="lq", B2=0.5)), cfg, spec.constants)
    assert rep["gap"] <= 0.02 and rep["within_tolerance"] and rep["shrinks"]


def test_cross_check_with_grid_solver(lq_small):
    cfg, vp = lq_small
    aq = lq_as_aq(LQGame(type="lq"))

    def H(t, x, p):
        xs, ps = np.broadcast_arrays(x, p)
        return np.array([saddle_point(aq, t, [a], [b]).q0 for a, b in zip(xs.ravel(), ps.ravel())])\
            .reshape(xs.shape)

    assert H(0.0, 1.5, 2.0) == pytest.approx(1.5 ** 2 - 1.0, abs=1e-12)
    grid = Grid1D.from_cfl(-2, 2, 81, 1.0, max_dissipation=2.5)
    hj = solve(H, lambda x: 0 * x, grid)
    mask = np.abs(grid.x) <= 1
    assert np.max(np.abs(hj.values[0, mask] - vp.upper.values[0, mask])) <= 0.05


def test_growth_envelope(lq_small):
    cfg, vp = lq_small
    rep = growth_envelope_check(vp, LQ.constants)
    assert rep["reference_time_exponent"] == 0.5
    for order in ("upper", "lower"):
        assert 1.8 <= rep[order]["space_exponent"] <= 2.2
        assert rep[order]["time_exponent"] >= 0.4
        assert rep[order]["C"] > 0 and rep[order]["K"] > 0


def test_growth_envelope_constant():
    k = GrowthConstants(1, 1, 0.5, 0.5, 2, 2, 1)
    const = GeneralGameSpec(1, 1, 1, lambda t, x, a, b: a - b, lambda t, x, a, b: 0 * a[..., 0],
                            lambda x: 0 * x[..., 0] + 3.0, k, 1.0, vectorized=True)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        vp = value_iterate(const, DPConfig(Grid1D(-1, 1, 21, 8, 1.0), 1, 5, 1, 5))
    rep = growth_envelope_check(vp, k)
    assert rep["upper"]["K"] == 0.0 and np.all(vp.upper.values == 3.0)
