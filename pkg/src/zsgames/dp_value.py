"""Discrete min-max / max-min dynamic programming for upper and lower values (1-D state).

Semi-Lagrangian recursion on a uniform state lattice

    V+_k(x) = min_{u1} max_{u2} [dt g(t_k, x, u1, u2) + I V+_{k+1}(x + dt f(t_k, x, u1, u2))]

with ``I`` piecewise-linear interpolation (monotone and nonexpansive) and
``V-`` defined with the order swapped.  Both control grids contain zero.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .aq_hamiltonian import ball_grid
from .errors import NonFiniteEvaluation, TruncationTooSmall
from .game_model import AQGameSpec, GeneralGameSpec, GrowthConstants, bracket, check_strictly_compatible
from .hamiltonian_eval import truncation_radii
from .hj_grid_solver import Grid1D, ValueField

__all__ = [
    "DPConfig",
    "ValuePair",
    "value_iterate",
    "optimality_principle_check",
    "isaacs_coincidence",
    "growth_envelope_check",
]


@dataclass(frozen=True)
class DPConfig:
    grid: Grid1D
    u1_radius: float
    u1_points: int
    u2_radius: float
    u2_points: int
    boundary_tolerance: float = 0.01

    @classmethod
    def from_truncation(cls, spec: GeneralGameSpec, x_min: float, x_max: float, nx: int,
                        nt: int, control_points: int, p_bound: float) -> "DPConfig":
        """Control radii from the truncation balls at the largest ``|x|`` and ``|p| = p_bound``.

        ``p_bound`` should bound ``|V_x|`` on the domain; the radii grow with it.
        """
        radii = truncation_radii(spec.constants, max(abs(x_min), abs(x_max)), p_bound)
        grid = Grid1D(x_min, x_max, nx, nt, spec.T)
        return cls(grid, radii.r1, control_points, radii.r2, control_points)

    def control_grids(self, spec: GeneralGameSpec) -> tuple[np.ndarray, np.ndarray]:
        """Control lattices sorted by norm, so ties resolve toward the zero control."""
        out = []
        for dim, radius, points in ((spec.dim_u1, self.u1_radius, self.u1_points),
                                    (spec.dim_u2, self.u2_radius, self.u2_points)):
            U = ball_grid(dim, radius, points)
            out.append(U[np.argsort(np.linalg.norm(U, axis=1), kind="stable")])
        return out[0], out[1]

    def control_spacing(self) -> float:
        return max(2 * self.u1_radius / (self.u1_points - 1), 2 * self.u2_radius / (self.u2_points - 1))

    def as_dict(self) -> dict:
        return {"grid": self.grid.as_dict(), "u1_radius": self.u1_radius,
                "u1_points": self.u1_points, "u2_radius": self.u2_radius,
                "u2_points": self.u2_points}


@dataclass
class ValuePair:
    upper: ValueField
    lower: ValueField
    gap: float
    stats: dict = field(default_factory=dict)


def _locate(grid: Grid1D, y: np.ndarray):
    """Cell index, weight and clamp mask for linear interpolation on the lattice."""
    lo, hi = grid.x_min, grid.x_max
    outside = (y < lo) | (y > hi)
    pos = (np.clip(y, lo, hi) - lo) / grid.dx
    i = np.minimum(pos.astype(np.intp), grid.nx - 2)
    return i, pos - i, outside


def _interp(V: np.ndarray, cell: np.ndarray, weight: np.ndarray) -> np.ndarray:
    slope = np.diff(V)
    return np.take(V, cell) + np.take(slope, cell) * weight


class _Tables:
    """Running payoff and successor states for one time level, shared by both orders."""

    def __init__(self, spec: GeneralGameSpec, config: DPConfig, t: float, xs: np.ndarray,
                 U1: np.ndarray, U2: np.ndarray):
        dt = config.grid.dt
        X = xs[:, None, None, None]
        u1 = U1[None, :, None, :]
        u2 = U2[None, None, :, :]
        with np.errstate(all="ignore"):
            f = spec.eval_f(t, X, u1, u2)[..., 0]
            g = spec.eval_g(t, X, u1, u2)
        f = np.broadcast_to(f, (len(xs), len(U1), len(U2)))
        g = np.broadcast_to(g, f.shape)
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(g))):
            raise NonFiniteEvaluation(f"f or g not finite at t={t}")
        self.cell, self.weight, self.outside = _locate(config.grid, xs[:, None, None] + dt * f)
        self.cost = dt * g
        self.speed = np.abs(f)


def _bellman(tables: _Tables, V_next: np.ndarray, upper: bool):
    W = tables.cost + _interp(V_next, tables.cell, tables.weight)
    rows = np.arange(W.shape[0])
    if upper:
        inner = W.argmax(axis=2)
        inner_val = np.take_along_axis(W, inner[..., None], axis=2)[..., 0]
        i1 = inner_val.argmin(axis=1)
        i2 = inner[rows, i1]
    else:
        inner = W.argmin(axis=1)
        inner_val = np.take_along_axis(W, inner[:, None, :], axis=1)[:, 0, :]
        i2 = inner_val.argmax(axis=1)
        i1 = inner[rows, i2]
    values = W[rows, i1, i2]
    return values, i1, i2, tables.outside[rows, i1, i2], tables.speed[rows, i1, i2]


def _on_edge(U: np.ndarray, idx: np.ndarray, radius: float) -> np.ndarray:
    norms = np.linalg.norm(U, axis=1)
    spacing = 2 * radius / max(int(round(len(U) ** (1 / U.shape[1]))) - 1, 1)
    return norms[idx] > radius - 0.5 * spacing


def value_iterate(spec: GeneralGameSpec, config: DPConfig, terminal=None,
                  orders=("upper", "lower")) -> ValuePair:
    """Backward recursion for both orders on identical grids.

    ``terminal`` overrides ``spec.h`` (used by monotonicity checks).  Raises
    :class:`TruncationTooSmall` when optimal controls sit on the edge of their
    grid at more than ``boundary_tolerance`` of the node updates.
    """
    if spec.dim_state != 1:
        raise ValueError("value_iterate supports one-dimensional states only")
    if not check_strictly_compatible(spec.constants):
        warnings.warn("growth constants do not satisfy sigma_i * mu < rho_i; "
                      "value bounds are not guaranteed", RuntimeWarning, stacklevel=2)
    grid = config.grid
    xs = grid.x
    U1, U2 = config.control_grids(spec)
    h = spec.eval_h(xs[:, None]) if terminal is None else np.asarray(terminal(xs), dtype=float)
    h = h * np.ones(grid.nx)
    fields = {o: np.empty((grid.nt + 1, grid.nx)) for o in orders}
    for o in orders:
        fields[o][grid.nt] = h
    edge_hits = 0
    clamped = 0
    reach = 0.0
    times = grid.t
    for k in range(grid.nt - 1, -1, -1):
        tables = _Tables(spec, config, times[k], xs, U1, U2)
        for o in orders:
            vals, i1, i2, out, speed = _bellman(tables, fields[o][k + 1], o == "upper")
            fields[o][k] = vals
            outer_edge = _on_edge(U1, i1, config.u1_radius) if o == "upper" else \
                _on_edge(U2, i2, config.u2_radius)
            edge_hits += int(np.count_nonzero(outer_edge))
            clamped += int(np.count_nonzero(out))
            reach = max(reach, float(speed.max()))
    updates = grid.nt * grid.nx * len(orders)
    stats = {"clamp_fraction": clamped / updates, "edge_fraction": edge_hits / updates,
             "max_optimal_speed": reach, "config": config.as_dict()}
    if edge_hits / updates > config.boundary_tolerance:
        raise TruncationTooSmall(
            f"optimal controls on the grid edge in {edge_hits / updates:.2%} of updates")
    upper = ValueField(grid, fields.get("upper", fields[orders[0]]), "dp-upper", stats)
    lower = ValueField(grid, fields.get("lower", fields[orders[-1]]), "dp-lower", stats)
    mask = upper.inner_mask()
    gap = float(np.max(np.abs(upper.values[:, mask] - lower.values[:, mask])))
    return ValuePair(upper, lower, gap, stats)


def optimality_principle_check(spec: GeneralGameSpec, config: DPConfig, t_index: int, x_sample,
                               value: ValuePair | None = None,
                               intermediate: DPConfig | None = None) -> dict:
    """Recompute ``V+(t_index, x)`` by one step onto the stored tail at ``t_index + 1``.

    ``intermediate`` may supply different control grids for the recomputed
    step (sensitivity run); otherwise the grids match and the discrepancy is
    pure interpolation error, zero at lattice nodes.
    """
    grid = config.grid
    if not 0 <= t_index < grid.nt:
        raise ValueError("t_index must lie in [0, nt)")
    value = value or value_iterate(spec, config)
    xs = np.atleast_1d(np.asarray(x_sample, dtype=float))
    cfg = intermediate or config
    U1, U2 = cfg.control_grids(spec)
    tables = _Tables(spec, config, grid.t[t_index], xs, U1, U2)
    two_stage = _bellman(tables, value.upper.values[t_index + 1], True)[0]
    stored = value.upper.at(t_index, xs)
    disc = np.abs(two_stage - stored)
    return {"t_index": t_index, "x": xs.tolist(), "two_stage": two_stage.tolist(),
            "stored": np.atleast_1d(stored).tolist(), "max_discrepancy": float(disc.max())}


def _coarsen(config: DPConfig) -> DPConfig:
    g = config.grid
    grid = Grid1D(g.x_min, g.x_max, (g.nx - 1) // 2 + 1, max(1, g.nt // 2), g.T)
    return replace(config, grid=grid, u1_points=(config.u1_points - 1) // 2 + 1,
                   u2_points=(config.u2_points - 1) // 2 + 1)


def isaacs_coincidence(spec_aq: AQGameSpec, config: DPConfig, constants: GrowthConstants,
                       scale: float = 1.0) -> dict:
    """Gap ``max |V+ - V-|`` on the inner half, at the given and a halved resolution.

    Passes when the gap is at most ``scale * (dx + dt + control spacing)`` and
    does not grow under refinement.
    """
    spec = spec_aq.to_general(constants, dim_state=1)
    coarse = _coarsen(config)
    gaps = []
    for cfg in (coarse, config):
        gaps.append(value_iterate(spec, cfg).gap)
    g = config.grid
    tolerance = scale * (g.dx + g.dt + config.control_spacing())
    return {"gap": gaps[-1], "coarse_gap": gaps[0], "tolerance": tolerance,
            "within_tolerance": gaps[-1] <= tolerance, "shrinks": gaps[-1] <= gaps[0]}


def _loglog_slope(x: np.ndarray, y: np.ndarray) -> float:
    keep = (x > 0) & (y > 0)
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])


def growth_envelope_check(value: ValuePair, constants: GrowthConstants,
                          fit_range: tuple[float, float] = (0.5, 1.5)) -> dict:
    """Fitted growth, spatial Lipschitz and temporal Hoelder data for both values.

    Reports the smallest ``C`` with ``|V| <= C <x>^mu``, the smallest ``K`` with
    ``|V(x) - V(y)| <= K (<x> v <y>)^{mu-1} |x - y|`` between neighbours, the
    spatial growth exponent fitted on ``fit_range`` and a temporal exponent
    fitted from differences between time rows.
    """
    mu = constants.mu
    out = {"reference_time_exponent": min((constants.rho1 - constants.sigma1) / constants.rho1,
                                          (constants.rho2 - constants.sigma2) / constants.rho2)}
    for name, fld in (("upper", value.upper), ("lower", value.lower)):
        g = fld.grid
        x = g.x
        mask = fld.inner_mask()
        V = fld.values[:, mask]
        xm = x[mask]
        C = float(np.max(np.abs(V) / bracket(xm) ** mu))
        weight = np.maximum(bracket(xm[1:]), bracket(xm[:-1])) ** (mu - 1)
        K = float(np.max(np.abs(np.diff(V, axis=1)) / (weight * g.dx)))
        sel = (np.abs(x) >= fit_range[0]) & (np.abs(x) <= fit_range[1])
        space_exp = _loglog_slope(np.abs(x[sel]), np.abs(fld.values[0, sel]))
        lags = np.unique(np.clip(np.round(np.geomspace(1, max(g.nt // 4, 1), 6)).astype(int), 1, g.nt))
        moduli = np.array([np.max(np.abs(fld.values[lag:, mask] - fld.values[:-lag, mask]))
                           for lag in lags])
        time_exp = _loglog_slope(lags * g.dt, moduli)
        out[name] = {"C": C, "K": K, "space_exponent": space_exp, "time_exponent": time_exp}
    return out
