"""State trajectories under open-loop controls and a-priori bound certificates."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NonFiniteState
from .game_model import GeneralGameSpec, bracket

__all__ = [
    "ControlSignal",
    "Trajectory",
    "CertificateReport",
    "integrate",
    "integrate_on",
    "gronwall_bound",
    "certify_state_bound",
    "certify_displacement_and_stability",
    "write_trajectory_csv",
]


class ControlSignal:
    """Piecewise-constant control: ``values[k]`` holds on ``[times[k], times[k+1])``.

    ``times`` has one more entry than ``values``.  When ``sigma``/``rho`` are
    given, ``sigma_norm_cache`` and ``p_norm_cache`` store the integrals of
    ``|u|^sigma`` and ``|u|^rho`` over the whole interval.
    """

    def __init__(self, times, values, sigma: float | None = None, rho: float | None = None):
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if times.ndim != 1 or len(times) != len(values) + 1:
            raise ValueError("need len(times) == len(values) + 1")
        if np.any(np.diff(times) <= 0):
            raise ValueError("sample times must be strictly increasing")
        self.times = times
        self.values = values
        self._norms = np.linalg.norm(values, axis=1)
        self.sigma_norm_cache = None if sigma is None else self.norm_integral(sigma)
        self.p_norm_cache = None if rho is None else self.norm_integral(rho)

    @classmethod
    def constant(cls, value, t0: float, T: float, **kw) -> "ControlSignal":
        return cls([t0, T], [np.atleast_1d(np.asarray(value, dtype=float))], **kw)

    @classmethod
    def from_function(cls, fn: Callable, t0: float, T: float, pieces: int, **kw) -> "ControlSignal":
        """Sample ``fn`` at the midpoints of ``pieces`` equal sub-intervals."""
        times = np.linspace(t0, T, pieces + 1)
        mids = 0.5 * (times[:-1] + times[1:])
        return cls(times, [np.atleast_1d(np.asarray(fn(s), dtype=float)) for s in mids], **kw)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def _index(self, s):
        idx = np.searchsorted(self.times, s, side="right") - 1
        return np.clip(idx, 0, len(self.values) - 1)

    def value_at(self, s) -> np.ndarray:
        return self.values[self._index(s)]

    def cumulative(self, power: float, s) -> np.ndarray:
        """``int_{t0}^{s} |u|^power`` (exact for the step function)."""
        s = np.clip(np.asarray(s, dtype=float), self.times[0], self.times[-1])
        with np.errstate(divide="ignore"):
            pieces = np.where(self._norms == 0, 0.0 if power > 0 else 1.0, self._norms ** power)
        full = np.concatenate([[0.0], np.cumsum(pieces * np.diff(self.times))])
        idx = self._index(s)
        return full[idx] + pieces[idx] * (s - self.times[idx])

    def norm_integral(self, power: float, a: float | None = None, b: float | None = None) -> float:
        a = self.t0 if a is None else a
        b = self.T if b is None else b
        return float(self.cumulative(power, b) - self.cumulative(power, a))


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    provenance: dict = field(default_factory=dict)

    @property
    def terminal(self) -> np.ndarray:
        return self.states[-1]


def integrate_on(spec: GeneralGameSpec, times, x0, u1: ControlSignal, u2: ControlSignal,
                 method_tag: str = "rk4") -> Trajectory:
    """Classical RK4 over the given time nodes.

    Controls are frozen at their value at the step midpoint for all four
    stages, which is exact when steps do not straddle a control switch.
    """
    times = np.asarray(times, dtype=float)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    states = np.empty((len(times), x0.shape[0]))
    states[0] = x0
    y = x0
    for k in range(len(times) - 1):
        t, h = times[k], times[k + 1] - times[k]
        mid = t + 0.5 * h
        a, b = u1.value_at(mid), u2.value_at(mid)
        with np.errstate(all="ignore"):
            k1 = spec.eval_f(t, y, a, b)
            k2 = spec.eval_f(mid, y + 0.5 * h * k1, a, b)
            k3 = spec.eval_f(mid, y + 0.5 * h * k2, a, b)
            k4 = spec.eval_f(t + h, y + h * k3, a, b)
            y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not (np.all(np.isfinite(k4)) and np.all(np.isfinite(y))):
            raise NonFiniteState(f"state is not finite at step {k} (t={t})")
        states[k + 1] = y
    prov = {"t0": float(times[0]), "x0": x0.tolist(), "steps": len(times) - 1, "method": method_tag}
    return Trajectory(times, states, prov)


def integrate(spec: GeneralGameSpec, t0: float, x0, u1: ControlSignal, u2: ControlSignal,
              steps: int) -> Trajectory:
    """RK4 on a uniform grid from ``t0`` to ``spec.T`` (last node is exactly ``T``)."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    times = np.linspace(t0, spec.T, steps + 1)
    times[-1] = spec.T
    return integrate_on(spec, times, x0, u1, u2)


def _trapezoid_cumulative(fn: Callable, a: float, b: float, steps: int):
    grid = np.linspace(a, b, steps + 1)
    vals = np.array([float(fn(s)) for s in grid])
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (vals[1:] + vals[:-1]) * np.diff(grid))])
    return grid, cum


def gronwall_bound(theta0: float, alpha: Callable, beta: Callable, t: float, T: float,
                   quadrature_steps: int = 1000) -> Callable:
    """``s -> exp(1/2 int_t^T alpha) theta0 + 1/2 exp(int_t^T alpha) int_t^s beta``.

    Integrals use the composite trapezoid rule; ``int_t^s beta`` is linearly
    interpolated between quadrature nodes.
    """
    if theta0 < 0:
        raise ValueError("theta0 must be nonnegative")
    _, cum_a = _trapezoid_cumulative(alpha, t, T, quadrature_steps)
    grid, cum_b = _trapezoid_cumulative(beta, t, T, quadrature_steps)
    total_a = cum_a[-1]
    head = np.exp(0.5 * total_a) * theta0
    tail = 0.5 * np.exp(total_a)

    def bound(s):
        out = head + tail * np.interp(s, grid, cum_b)
        return float(out) if np.ndim(out) == 0 else out
    return bound


@dataclass
class CertificateReport:
    name: str
    checked: int = 0
    violations: list = field(default_factory=list)
    min_slack: float = np.inf
    max_slack: float = -np.inf

    @property
    def ok(self) -> bool:
        return not self.violations

    def record(self, s, lhs, rhs):
        slack = np.atleast_1d(np.asarray(rhs, dtype=float) - np.asarray(lhs, dtype=float))
        s = np.atleast_1d(s)
        self.checked += slack.size
        self.min_slack = min(self.min_slack, float(slack.min()))
        self.max_slack = max(self.max_slack, float(slack.max()))
        for k in np.flatnonzero(slack < 0):
            self.violations.append({"s": float(s[k]), "slack": float(slack[k])})

    def as_dict(self) -> dict:
        return {"name": self.name, "checked": self.checked, "violations": len(self.violations),
                "min_slack": self.min_slack, "max_slack": self.max_slack}


def _control_mass(u1: ControlSignal, u2: ControlSignal, spec: GeneralGameSpec, s) -> np.ndarray:
    k = spec.constants
    return u1.cumulative(k.sigma1, s) + u2.cumulative(k.sigma2, s)


def certify_state_bound(spec: GeneralGameSpec, trajectory: Trajectory, u1: ControlSignal,
                        u2: ControlSignal) -> CertificateReport:
    """``<y(s)> <= e^{L(T-t)} <x> + L e^{2L(T-t)} int_t^s (1 + |u1|^sigma1 + |u2|^sigma2)``."""
    L = spec.constants.L
    s = trajectory.times
    t = s[0]
    span = spec.T - t
    mass = (s - t) + _control_mass(u1, u2, spec, s) - _control_mass(u1, u2, spec, t)
    lhs = bracket(np.linalg.norm(trajectory.states, axis=1))
    rhs = np.exp(L * span) * bracket(np.linalg.norm(trajectory.states[0])) \
        + L * np.exp(2 * L * span) * mass
    report = CertificateReport("state_bound")
    report.record(s, lhs, rhs)
    return report


def certify_displacement_and_stability(spec: GeneralGameSpec, t: float, x, t_bar: float, x_bar,
                                       u1: ControlSignal, u2: ControlSignal,
                                       steps: int) -> tuple[CertificateReport, CertificateReport]:
    """Check the displacement and two-point stability bounds.

    Displacement: ``|y(s) - x| <= L e^{2L(T-t)} (<x>(s-t) + int_t^s (|u1|^sigma1 + |u2|^sigma2))``.
    Stability for ``s >= t_bar``: ``|y(s) - ybar(s)| <= e^{L(s - t_bar)} (|x - x_bar|
    + L e^{2L(T-t)} (<x>(t_bar - t) + int_t^{t_bar} (...)))``.  Both trajectories
    share the nodes after ``t_bar`` so the comparison needs no interpolation.
    """
    if not t <= t_bar <= spec.T:
        raise ValueError("need t <= t_bar <= T")
    L = spec.constants.L
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x_bar = np.atleast_1d(np.asarray(x_bar, dtype=float))
    grid = np.linspace(t, spec.T, steps + 1)
    grid[-1] = spec.T
    y = integrate_on(spec, grid, x, u1, u2)
    later = grid[grid > t_bar]
    grid_bar = np.concatenate([[t_bar], later])
    factor = L * np.exp(2 * L * (spec.T - t))
    bx = float(bracket(np.linalg.norm(x)))
    m0 = _control_mass(u1, u2, spec, t)

    disp = CertificateReport("displacement")
    lhs = np.linalg.norm(y.states - x, axis=1)
    rhs = factor * (bx * (grid - t) + _control_mass(u1, u2, spec, grid) - m0)
    disp.record(grid, lhs, rhs)

    stab = CertificateReport("stability")
    if len(grid_bar) > 1:
        ybar = integrate_on(spec, grid_bar, x_bar, u1, u2)
        common = slice(len(grid) - len(later), None)
        lhs = np.linalg.norm(y.states[common] - ybar.states[1:], axis=1)
        head = np.linalg.norm(x - x_bar) + factor * (
            bx * (t_bar - t) + _control_mass(u1, u2, spec, t_bar) - m0)
        rhs = np.exp(L * (later - t_bar)) * head
        stab.record(later, lhs, rhs)
    if t_bar in grid:
        k = int(np.flatnonzero(grid == t_bar)[0])
        head = np.linalg.norm(x - x_bar) + factor * (
            bx * (t_bar - t) + _control_mass(u1, u2, spec, t_bar) - m0)
        stab.record(t_bar, np.linalg.norm(y.states[k] - x_bar), head)
    return disp, stab


def write_trajectory_csv(path, trajectory: Trajectory, u1: ControlSignal, u2: ControlSignal) -> None:
    """Columns ``s, y_1..y_n, u1_1.., u2_1..`` at 17 significant digits."""
    n = trajectory.states.shape[1]
    header = (["s"] + [f"y_{i + 1}" for i in range(n)]
              + [f"u1_{i + 1}" for i in range(u1.dim)] + [f"u2_{i + 1}" for i in range(u2.dim)])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for s, y in zip(trajectory.times, trajectory.states):
            row = [s, *y, *u1.value_at(s), *u2.value_at(s)]
            w.writerow([f"{v:.17g}" for v in row])
