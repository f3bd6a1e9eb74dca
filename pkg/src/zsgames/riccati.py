"""Scalar terminal-value Riccati equation ``p' + alpha p + beta p^2 + gamma = 0``, ``p(T) = g``.

Everything is written in the backward time ``s = T - t``, in which the
equation reads ``dp/ds = beta p^2 + alpha p + gamma`` with ``p = g`` at ``s = 0``.
The roots of the right-hand side are ``-a +- kappa`` with ``a = alpha / (2 beta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import ode

from .errors import NonPositiveWeights, OutsideValidityWindow

__all__ = [
    "CASE_TAGS",
    "RiccatiProblem",
    "RiccatiClassification",
    "RiccatiSolution",
    "classify",
    "closed_form",
    "integrate_numeric",
    "lq_to_riccati",
    "lq_hamiltonian",
]

CASE_TAGS = (
    "LinearBetaZero",
    "DiscZeroConstant",
    "DiscZeroRational",
    "DiscNegativeTan",
    "DiscPositiveConstant",
    "DiscPositiveExponential",
)

_PSI_GUARD = 1e-12


@dataclass(frozen=True)
class RiccatiProblem:
    alpha: float
    beta: float
    gamma: float
    g: float
    T: float = 1.0

    def __post_init__(self):
        vals = (self.alpha, self.beta, self.gamma, self.g, self.T)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("Riccati coefficients must be finite")
        if not self.T > 0:
            raise ValueError("horizon T must be positive")

    @property
    def disc(self) -> float:
        return self.alpha ** 2 - 4 * self.beta * self.gamma


@dataclass(frozen=True)
class RiccatiClassification:
    case_tag: str
    kappa: float | None
    solvable_all_T: bool
    max_horizon: float

    def as_dict(self) -> dict:
        return {
            "case_tag": self.case_tag,
            "kappa": self.kappa,
            "solvable_all_T": self.solvable_all_T,
            "max_horizon": None if math.isinf(self.max_horizon) else self.max_horizon,
        }


def classify(problem: RiccatiProblem) -> RiccatiClassification:
    """Case tag, global solvability and the blow-up horizon (in ``T - t``)."""
    al, be, ga, g = problem.alpha, problem.beta, problem.gamma, problem.g
    if be == 0:
        return RiccatiClassification("LinearBetaZero", None, True, math.inf)
    disc = problem.disc
    kappa = math.sqrt(abs(disc)) / (2 * abs(be))
    lead = 2 * be * g + al
    if disc == 0:
        if lead == 0:
            return RiccatiClassification("DiscZeroConstant", kappa, True, math.inf)
        horizon = 2 / lead if lead > 0 else math.inf
        return RiccatiClassification("DiscZeroRational", kappa, math.isinf(horizon), horizon)
    if disc < 0:
        phi0 = math.atan(lead / (2 * kappa * be))
        horizon = (math.pi / 2 - math.copysign(1.0, be) * phi0) / (kappa * abs(be))
        return RiccatiClassification("DiscNegativeTan", kappa, False, horizon)
    k0 = lead - 2 * kappa * be
    d = lead + 2 * kappa * be
    solvable = lead <= math.sqrt(disc)
    if k0 * d == 0:
        return RiccatiClassification("DiscPositiveConstant", kappa, True, math.inf)
    horizon = math.inf
    ratio = d / k0
    if ratio > 0:
        s_star = math.log(ratio) / (2 * kappa * be)
        if s_star > 0:
            horizon = s_star
    # the horizon formula and the solvability predicate agree analytically;
    # trust the predicate if rounding puts a root at s = 0
    if solvable:
        horizon = math.inf
    elif math.isinf(horizon):
        horizon = math.nextafter(0.0, 1.0)
    return RiccatiClassification("DiscPositiveExponential", kappa, solvable, horizon)


def _value(problem: RiccatiProblem, cls: RiccatiClassification, s: float) -> float:
    al, be, ga, g = problem.alpha, problem.beta, problem.gamma, problem.g
    tag = cls.case_tag
    if tag == "LinearBetaZero":
        if al == 0:
            return g + ga * s
        return (g + ga / al) * math.exp(al * s) - ga / al
    a = al / (2 * be)
    kappa = cls.kappa
    lead = 2 * be * g + al
    if tag == "DiscZeroConstant":
        return -a
    if tag == "DiscZeroRational":
        return -a + lead / (2 * be - be * lead * s)
    if tag == "DiscNegativeTan":
        phi0 = math.atan(lead / (2 * kappa * be))
        return -a + kappa * math.tan(kappa * be * s + phi0)
    k0 = lead - 2 * kappa * be
    d = lead + 2 * kappa * be
    if tag == "DiscPositiveConstant":
        # k0 == 0 means g sits on the root -a + kappa, d == 0 on -a - kappa
        return -a + kappa if k0 == 0 else -a - kappa
    rate = 2 * kappa * be * s
    if rate <= 0:
        kp = math.exp(rate) * k0
        psi = kp - d
        if abs(psi) < _PSI_GUARD:
            raise OutsideValidityWindow("denominator vanishes (pole)")
        return -a - kappa * (d + kp) / psi
    # divide through by exp(rate) to avoid overflow
    dr = d * math.exp(-rate)
    psi = k0 - dr
    if abs(psi) < _PSI_GUARD:
        raise OutsideValidityWindow("denominator vanishes (pole)")
    return -a - kappa * (dr + k0) / psi


def closed_form(problem: RiccatiProblem, t, classification: RiccatiClassification | None = None):
    """Exact solution at ``t`` (scalar or array).

    Raises :class:`OutsideValidityWindow` when ``T - t`` reaches the blow-up
    horizon (the endpoint itself counts as blow-up).
    """
    cls = classification or classify(problem)
    ts = np.asarray(t, dtype=float)
    out = np.empty(ts.shape)
    for idx, tv in np.ndenumerate(ts):
        s = problem.T - tv
        if s >= cls.max_horizon:
            raise OutsideValidityWindow(
                f"t={tv} precedes the blow-up time {problem.T - cls.max_horizon}")
        out[idx] = _value(problem, cls, s)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class RiccatiSolution:
    t: np.ndarray
    p: np.ndarray
    blew_up: bool
    blowup_time: float | None


def _dominant(problem: RiccatiProblem, p: float) -> float:
    al, be, ga = problem.alpha, problem.beta, problem.gamma
    return abs(be) * p * p - 10 * (abs(al) * abs(p) + abs(ga))


def integrate_numeric(problem: RiccatiProblem, blowup_threshold: float = 1e8,
                      samples: int = 201, rtol: float = 1e-11,
                      atol: float = 1e-12) -> RiccatiSolution:
    """Adaptive backward integration from ``T`` to 0 with blow-up detection.

    Blow-up is declared when ``|p|`` passes the threshold while the quadratic
    term dominates the right-hand side (so plain exponential growth when
    ``beta = 0`` is not mistaken for a pole), or when the adaptive step
    collapses to the integrator's floor.  On blow-up the samples cover
    ``[blowup_time, T]`` up to the last step before the crossing.
    """
    if not blowup_threshold > 0:
        raise ValueError("blowup_threshold must be positive")
    al, be, ga = problem.alpha, problem.beta, problem.gamma
    T = problem.T

    def rhs(s, y):
        p = y[0]
        return [be * p * p + al * p + ga]

    def exploded(p):
        return abs(p) > blowup_threshold and _dominant(problem, p) > 0

    def make(watch):
        solver = ode(rhs).set_integrator("dop853", rtol=rtol, atol=atol, nsteps=10 ** 6)
        solver.set_solout(watch)
        solver.set_initial_value([problem.g], 0.0)
        return solver

    last = [0.0, problem.g, 0.0]  # last safe s, p there, s at first crossing

    def watch(s, y):
        if exploded(y[0]):
            last[2] = s
            return -1
        last[0], last[1] = s, y[0]
        return 0

    def sweep(s_grid, watch):
        solver = make(watch)
        p = np.empty(len(s_grid))
        p[0] = problem.g
        with np.errstate(all="ignore"):
            for k in range(1, len(s_grid)):
                p[k] = solver.integrate(s_grid[k])[0]
                if not solver.successful():
                    return p, solver.get_return_code()
        return p, solver.get_return_code()

    s_grid = np.linspace(0.0, T, max(samples, 2))
    p, code = sweep(s_grid, watch)
    blew_up = code == 2
    if code < 0:
        # the step size collapsed; only a pole can cause that here
        if code == -3 or abs(last[1]) > abs(problem.g):
            blew_up = True
            last[2] = last[0]
        else:
            raise RuntimeError(f"integrator failed with code {code}")
    if blew_up:
        s_grid = np.linspace(0.0, last[0], max(samples, 2))
        p, _ = sweep(s_grid, lambda s, y: 0)
    t_grid = T - s_grid
    return RiccatiSolution(t_grid[::-1].copy(), p[::-1].copy(), blew_up,
                           T - last[2] if blew_up else None)


def lq_to_riccati(A: float, B1: float, B2: float, Q: float, R1: float, R2: float,
                  G: float, T: float = 1.0) -> RiccatiProblem:
    """Coefficient map for the scalar LQ game with cost ``Q y^2 + R1 u1^2 - R2 u2^2``.

    The value is ``p(t) x^2``; the cost has no 1/2 factors, so an affine-quadratic
    game with weight ``R`` in the 1/2 convention corresponds to ``R / 2`` here.
    """
    if not (R1 > 0 and R2 > 0):
        raise NonPositiveWeights("R1 and R2 must be positive")
    return RiccatiProblem(2 * A, B2 ** 2 / R2 - B1 ** 2 / R1, Q, G, T)


def lq_hamiltonian(A: float, B1: float, B2: float, Q: float, R1: float, R2: float):
    """``H(t, x, p) = Q x^2 + A p x + (B2^2/(4 R2) - B1^2/(4 R1)) p^2`` (vectorized)."""
    k = B2 ** 2 / (4 * R2) - B1 ** 2 / (4 * R1)

    def H(t, x, p):
        return Q * x * x + A * p * x + k * p * p
    return H
