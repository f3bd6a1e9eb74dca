"""Monotone finite-difference solver for ``V_t + H(t, x, V_x) = 0``, ``V(T, x) = h(x)``, in 1-D.

Backward explicit marching with the local Lax-Friedrichs numerical Hamiltonian

    V_k = V_{k+1} + dt * [H(t, x, (p- + p+)/2) + 1/2 alpha (p+ - p-)]

which is nondecreasing in every neighbouring value whenever
``alpha >= |H_p|`` on ``[p-, p+]`` and ``alpha dt / dx <= 1/2``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NonFiniteValue, OrderingViolated, UnstableParameters

__all__ = [
    "Grid1D",
    "ValueField",
    "solve",
    "step",
    "numeric_dissipation",
    "residual_check",
    "monotonicity_probe",
    "comparison_harness",
    "stationary_quadratic_roots",
    "stationary_quadratic_residual",
    "write_field_csv",
    "write_field_json",
]

_CFL_LIMIT = 0.5


@dataclass(frozen=True)
class Grid1D:
    """Uniform space-time grid; ``dt = T / nt``.

    If ``max_dissipation`` is given the constructor rejects time steps that
    break ``dt <= dx / (2 max_dissipation)``.
    """

    x_min: float
    x_max: float
    nx: int
    nt: int
    T: float
    max_dissipation: float | None = None

    def __post_init__(self):
        if self.nx < 3 or self.nt < 1:
            raise ValueError("need nx >= 3 and nt >= 1")
        if not self.x_max > self.x_min or not self.T > 0:
            raise ValueError("empty domain or horizon")
        if self.max_dissipation is not None and self.max_dissipation * self.dt / self.dx > _CFL_LIMIT:
            raise UnstableParameters(
                f"alpha dt/dx = {self.max_dissipation * self.dt / self.dx:.4g} exceeds 1/2")

    @classmethod
    def from_cfl(cls, x_min: float, x_max: float, nx: int, T: float, max_dissipation: float,
                 cfl: float = 0.4) -> "Grid1D":
        """Smallest ``nt`` with ``max_dissipation * dt / dx <= cfl``."""
        dx = (x_max - x_min) / (nx - 1)
        nt = max(1, math.ceil(T * max_dissipation / (cfl * dx) - 1e-9))
        return cls(x_min, x_max, nx, nt, T, max_dissipation)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def dt(self) -> float:
        return self.T / self.nt

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.nt + 1)

    def as_dict(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max, "nx": self.nx, "nt": self.nt,
                "T": self.T, "dx": self.dx, "dt": self.dt}


@dataclass
class ValueField:
    grid: Grid1D
    values: np.ndarray
    hamiltonian_tag: str = ""
    params: dict = field(default_factory=dict)

    def at(self, t_index: int, x) -> np.ndarray:
        return np.interp(x, self.grid.x, self.values[t_index])

    def inner_mask(self) -> np.ndarray:
        """Nodes in the inner half of the domain, away from boundary pollution."""
        mid = 0.5 * (self.grid.x_min + self.grid.x_max)
        quarter = 0.25 * (self.grid.x_max - self.grid.x_min)
        return np.abs(self.grid.x - mid) <= quarter + 1e-12


def _one_sided(V: np.ndarray, dx: float):
    d = np.diff(V, axis=-1) / dx
    pm = np.concatenate([d[..., :1], d], axis=-1)
    pp = np.concatenate([d, d[..., -1:]], axis=-1)
    return pm, pp


def numeric_dissipation(H: Callable, t: float, x, pm, pp, eps: float = 1e-6):
    """``max |H_p|`` over ``p-``, ``p+`` and their midpoint by central differences."""
    best = None
    for p in (pm, pp, 0.5 * (pm + pp)):
        h = eps * np.maximum(1.0, np.abs(p))
        slope = np.abs(H(t, x, p + h) - H(t, x, p - h)) / (2 * h)
        best = slope if best is None else np.maximum(best, slope)
    return best


def _dissipation(mode, H, t, x, pm, pp):
    if callable(mode):
        return np.broadcast_to(np.asarray(mode(t, x, pm, pp), dtype=float), pm.shape)
    if mode == "auto":
        return numeric_dissipation(H, t, x, pm, pp)
    return np.full(pm.shape, float(mode))


def step(H: Callable, V_next: np.ndarray, grid: Grid1D, t: float, dissipation="auto",
         shared: bool = True) -> np.ndarray:
    """One backward step from the row at time ``t`` (rows may be batched on axis 0).

    With ``shared`` the dissipation is the maximum over the batch at each node,
    so every member is advanced by the same monotone operator.
    """
    x = grid.x
    pm, pp = _one_sided(V_next, grid.dx)
    alpha = _dissipation(dissipation, H, t, x, pm, pp)
    if shared and alpha.ndim > 1:
        alpha = np.broadcast_to(alpha.max(axis=0), alpha.shape)
    ratio = float(np.max(alpha)) * grid.dt / grid.dx
    if ratio > _CFL_LIMIT:
        raise UnstableParameters(f"alpha dt/dx = {ratio:.4g} exceeds 1/2 at t={t}")
    with np.errstate(all="ignore"):
        out = V_next + grid.dt * (H(t, x, 0.5 * (pm + pp)) + 0.5 * alpha * (pp - pm))
    if not np.all(np.isfinite(out)):
        raise NonFiniteValue(f"value overflow at t={t}")
    return out


def _march(H, rows0: np.ndarray, grid: Grid1D, dissipation) -> np.ndarray:
    out = np.empty((grid.nt + 1,) + rows0.shape)
    out[grid.nt] = rows0
    times = grid.t
    for k in range(grid.nt - 1, -1, -1):
        out[k] = step(H, out[k + 1], grid, times[k + 1], dissipation)
    return out


def solve(H: Callable, h: Callable, grid: Grid1D, dissipation="auto", tag: str = "") -> ValueField:
    """Solve backward from ``V(T) = h``.

    ``H(t, x, p)`` and ``h(x)`` must accept arrays.  ``dissipation`` is a
    number, ``"auto"`` (numeric ``|H_p|`` per node and step) or a callable
    ``(t, x, p-, p+) -> alpha``.
    """
    terminal = np.asarray(h(grid.x), dtype=float) * np.ones(grid.nx)
    values = _march(H, terminal, grid, dissipation)
    values[grid.nt] = terminal
    mode = dissipation if isinstance(dissipation, (int, float, str)) else "callable"
    return ValueField(grid, values, tag, {"grid": grid.as_dict(), "dissipation": mode,
                                          "scheme": "local Lax-Friedrichs"})


def residual_check(field: ValueField, H: Callable) -> dict:
    """Centered-difference residual ``|V_t + H(t, x, V_x)|`` at interior nodes of the inner half."""
    g = field.grid
    V = field.values
    if g.nt < 2:
        return {"median": 0.0, "max": 0.0, "mean": 0.0, "count": 0}
    Vt = (V[2:, 1:-1] - V[:-2, 1:-1]) / (2 * g.dt)
    Vx = (V[1:-1, 2:] - V[1:-1, :-2]) / (2 * g.dx)
    t = g.t[1:-1, None]
    x = g.x[None, 1:-1]
    res = np.abs(Vt + H(t, x, Vx))
    res = res[:, field.inner_mask()[1:-1]]
    return {"median": float(np.median(res)), "max": float(res.max()),
            "mean": float(res.mean()), "count": int(res.size)}


def monotonicity_probe(H: Callable, V_next: np.ndarray, grid: Grid1D, t: float, index: int,
                       eps: float = 1e-3, dissipation="auto") -> float:
    """Raise ``V_next[index]`` by ``eps`` and return the most negative change of the step output.

    Only interior outputs are compared: the two edge nodes use the one-sided
    closure, which is consistent but not monotone.  A monotone update gives a
    result ``>= 0`` up to rounding.
    """
    bumped = np.array(V_next, dtype=float)
    bumped[index] += eps
    rows = step(H, np.stack([np.asarray(V_next, dtype=float), bumped]), grid, t, dissipation,
                shared=False)
    return float(np.min(rows[1, 1:-1] - rows[0, 1:-1]))


def comparison_harness(H: Callable, h_sub: Callable, h_super: Callable, grid: Grid1D,
                       dissipation="auto", tolerance: float = 1e-10) -> dict:
    """Solve both terminal problems with one shared operator and check ``V_sub <= V_super``.

    Raises :class:`OrderingViolated` with the worst node if the order breaks.
    """
    x = grid.x
    lo = np.asarray(h_sub(x), dtype=float) * np.ones(grid.nx)
    hi = np.asarray(h_super(x), dtype=float) * np.ones(grid.nx)
    if np.any(lo > hi):
        raise ValueError("terminal data are not ordered")
    both = _march(H, np.stack([lo, hi]), grid, dissipation)
    excess = both[:, 0] - both[:, 1]
    worst = np.unravel_index(np.argmax(excess), excess.shape)
    worst_excess = float(excess[worst])
    node = {"t_index": int(worst[0]), "x_index": int(worst[1]),
            "t": float(grid.t[worst[0]]), "x": float(x[worst[1]])}
    if worst_excess > tolerance:
        raise OrderingViolated("sub-solution exceeds super-solution", node=node,
                               excess=worst_excess)
    return {"ordered": True, "max_excess": worst_excess, "worst_node": node,
            "sub": both[:, 0], "super": both[:, 1]}


def stationary_quadratic_roots(a: float) -> tuple[float, float, tuple[float, float]]:
    """Both roots of ``4 lam^2 - 2 a lam - 1 = 0`` and their residuals.

    Each gives an exact stationary solution ``V = lam x^2`` of
    ``-x^2 - a x V' + (V')^2 = 0``.  The negative root is taken from the
    product of roots to avoid cancellation.
    """
    if a < 0:
        raise ValueError("a must be nonnegative")
    lam_plus = (a + math.sqrt(a * a + 4)) / 4
    lam_minus = -1 / (4 * lam_plus)
    res = tuple(abs(-1 - 2 * a * lam + 4 * lam * lam) for lam in (lam_plus, lam_minus))
    return lam_plus, lam_minus, res


def stationary_quadratic_residual(a: float, lam: float, x) -> np.ndarray:
    """``|-x^2 - a x V'(x) + V'(x)^2|`` for ``V = lam x^2``."""
    x = np.asarray(x, dtype=float)
    dV = 2 * lam * x
    return np.abs(-x * x - a * x * dV + dV * dV)


def write_field_csv(path, field: ValueField) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "V"])
        for t, row in zip(field.grid.t, field.values):
            for x, v in zip(field.grid.x, row):
                w.writerow([f"{t:.17g}", f"{x:.17g}", f"{v:.17g}"])


def write_field_json(path, field: ValueField, extra: dict | None = None) -> None:
    payload = {"hamiltonian": field.hamiltonian_tag, **field.params}
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, default=float)
        fh.write("\n")
