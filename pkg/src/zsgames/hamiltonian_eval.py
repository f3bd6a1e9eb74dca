"""Upper and lower Hamiltonians of general games by brute-force grid search.

``H+(t,x,p) = inf_{u1} sup_{u2} <p, f> + g`` and ``H-`` with the order swapped.
Coercivity (``sigma_i < rho_i``) confines the relevant controls to balls whose
radii are computed explicitly from the growth constants, which makes the
nested optimisations finite.
"""

from __future__ import annotations

import math

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .aq_hamiltonian import ball_grid
from .errors import InvalidExponents, NonFiniteEvaluation
from .game_model import GeneralGameSpec, GrowthConstants, bracket, check_coercive

__all__ = [
    "TruncationRadii",
    "HamiltonianValue",
    "GrowthAudit",
    "power_gap_max",
    "young_constants",
    "truncation_radii",
    "eval_upper",
    "eval_lower",
    "refinement_study",
    "audit_growth_bound",
    "growth_envelope",
    "lipschitz_exponent_pairs",
    "lipschitz_constant",
    "lipschitz_modulus_p",
    "direct_modulus_p",
    "growth_modulus",
]


def power_gap_max(N: float, c: float, sigma: float, rho: float,
                allow_zero_sigma: bool = False) -> tuple[float, float]:
    """Maximiser and maximum of ``theta(r) = N r^sigma - c r^rho`` on ``r >= 0``.

    Returns ``(r_bar, theta_max)``.  ``sigma == 0`` is only accepted with
    ``allow_zero_sigma``; the supremum is then ``N``, attained at ``r = 0``.
    """
    if not (c > 0 and N >= 0):
        raise InvalidExponents("need c > 0 and N >= 0")
    if sigma >= rho or sigma < 0:
        raise InvalidExponents(f"need 0 < sigma < rho, got sigma={sigma}, rho={rho}")
    if sigma == 0:
        if not allow_zero_sigma:
            raise InvalidExponents("sigma = 0 requires allow_zero_sigma=True")
        return 0.0, float(N)
    if N == 0:
        return 0.0, 0.0
    e = 1.0 / (rho - sigma)
    # log space throughout; a tiny rho - sigma sends both values past the float range
    log_r = e * (math.log(sigma * N) - math.log(rho * c))
    log_inner = (sigma * math.log(sigma) + rho * math.log(N)
                 - rho * math.log(rho) - sigma * math.log(c))
    r_bar = _exp_or_inf(log_r)
    theta_max = (rho - sigma) * _exp_or_inf(e * log_inner)
    return r_bar, theta_max


def _exp_or_inf(v: float) -> float:
    return math.exp(v) if v < 709.0 else math.inf


@dataclass(frozen=True)
class YoungConstants:
    k1_bar: float
    k2_bar: float
    k2: float


def young_constants(constants: GrowthConstants) -> YoungConstants:
    """``K1_bar, K2_bar`` bound ``L|p| r^sigma_i - c/2 r^rho_i``; ``K2`` bounds it with ``c``.

    Each is the maximum of scalar power-gap problems with ``N = L`` so that the
    bound scales as ``|p|^{rho/(rho - sigma)}``.
    """
    if not check_coercive(constants):
        raise InvalidExponents("coercivity requires sigma_i < rho_i")
    k = constants
    k1b = power_gap_max(k.L, k.c / 2, k.sigma1, k.rho1, allow_zero_sigma=True)[1]
    k2b = power_gap_max(k.L, k.c / 2, k.sigma2, k.rho2, allow_zero_sigma=True)[1]
    k2 = power_gap_max(k.L, k.c, k.sigma2, k.rho2, allow_zero_sigma=True)[1]
    return YoungConstants(k1b, k2b, k2)


@dataclass(frozen=True)
class TruncationRadii:
    r1: float
    r2: float
    k1_bar: float
    k2_bar: float
    k2: float


def _exponents(k: GrowthConstants) -> tuple[float, float]:
    return k.rho1 / (k.rho1 - k.sigma1), k.rho2 / (k.rho2 - k.sigma2)


def truncation_radii(constants: GrowthConstants, x_norm: float, p_norm: float) -> TruncationRadii:
    """Radii of the balls outside of which controls are strictly suboptimal.

    ``r1`` makes the outer player's cost exceed the zero-control upper bound by
    at least one; ``r2`` bounds the inner maximiser for every ``|u1| <= r1``.
    """
    k = constants
    y = young_constants(k)
    a1, a2 = _exponents(k)
    bx = float(bracket(x_norm))
    P = float(p_norm)
    base = bx ** k.mu + bx * P
    r1 = ((2 / k.c) * (2 * k.L * base + y.k1_bar * P ** a1 + y.k2 * P ** a2 + 1)) ** (1 / k.rho1)
    k2_tilde = (2 * k.L * (base + P * r1 ** k.sigma1)
                + max(k.L - k.c, 0.0) * r1 ** k.rho1 + y.k2_bar * P ** a2)
    r2 = (2 * k2_tilde / k.c) ** (1 / k.rho2)
    # r2 may be 0 only if every term vanishes, which cannot happen (base >= 1)
    return TruncationRadii(float(r1), float(r2), y.k1_bar, y.k2_bar, y.k2)


@dataclass(frozen=True)
class HamiltonianValue:
    value: float
    u1_arg: np.ndarray
    u2_arg: np.ndarray
    radii: TruncationRadii
    grid_points: int


def _control_grid(dim: int, radius: float, points: int, member: Callable | None) -> np.ndarray:
    grid = ball_grid(dim, radius, points)
    if member is not None:
        keep = np.array([bool(member(u)) for u in grid])
        grid = grid[keep]
        if grid.shape[0] == 0:
            raise ValueError("control set does not meet the truncation ball")
    return grid


def _prehamiltonian_table(spec: GeneralGameSpec, t, x, p, U1, U2) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    u1 = U1[:, None, :]
    u2 = U2[None, :, :]
    xb = x[None, None, :]
    with np.errstate(all="ignore"):
        f = spec.eval_f(t, xb, u1, u2)
        g = spec.eval_g(t, xb, u1, u2)
        values = np.broadcast_to(f @ p + g, (U1.shape[0], U2.shape[0]))
    if not np.all(np.isfinite(values)):
        raise NonFiniteEvaluation("f or g is not finite inside the control search box")
    return values


def _evaluate(spec, t, x, p, grid_points, radii, control_sets, upper: bool) -> HamiltonianValue:
    if grid_points < 3:
        raise ValueError("grid_points must be >= 3")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if radii is None:
        radii = truncation_radii(spec.constants, float(np.linalg.norm(x)), float(np.linalg.norm(p)))
    sets = control_sets or (None, None)
    U1 = _control_grid(spec.dim_u1, radii.r1, grid_points, sets[0])
    U2 = _control_grid(spec.dim_u2, radii.r2, grid_points, sets[1])
    table = _prehamiltonian_table(spec, t, x, p, U1, U2)
    # argmin/argmax return the first index, which is the lexicographically lowest grid point
    if upper:
        inner = table.argmax(axis=1)
        outer = int(np.argmin(table[np.arange(len(U1)), inner]))
        i1, i2 = outer, int(inner[outer])
    else:
        inner = table.argmin(axis=0)
        outer = int(np.argmax(table[inner, np.arange(len(U2))]))
        i1, i2 = int(inner[outer]), outer
    return HamiltonianValue(float(table[i1, i2]), U1[i1].copy(), U2[i2].copy(), radii, grid_points)


def eval_upper(spec: GeneralGameSpec, t, x, p, grid_points: int,
               radii: TruncationRadii | None = None,
               control_sets: tuple | None = None) -> HamiltonianValue:
    """``min_{u1} max_{u2}`` of the pre-Hamiltonian over uniform grids in the truncation balls.

    ``control_sets`` is an optional pair of membership predicates restricting
    each player's grid; both should admit the zero control.
    """
    return _evaluate(spec, t, x, p, grid_points, radii, control_sets, upper=True)


def eval_lower(spec: GeneralGameSpec, t, x, p, grid_points: int,
               radii: TruncationRadii | None = None,
               control_sets: tuple | None = None) -> HamiltonianValue:
    """``max_{u2} min_{u1}``; on identical grids never exceeds :func:`eval_upper`."""
    return _evaluate(spec, t, x, p, grid_points, radii, control_sets, upper=False)


def refinement_study(spec: GeneralGameSpec, t, x, p, levels=(61, 121, 241), upper: bool = True) -> dict:
    """Evaluate at several grid sizes and report successive differences."""
    fn = eval_upper if upper else eval_lower
    values = [fn(spec, t, x, p, n).value for n in levels]
    deltas = [abs(b - a) for a, b in zip(values, values[1:])]
    return {"levels": list(levels), "values": values, "deltas": deltas}


def growth_envelope(constants: GrowthConstants, x_norm, p_norm) -> tuple:
    """Lower and upper envelope for ``H+-`` at given norms."""
    y = young_constants(constants)
    a1, a2 = _exponents(constants)
    bx = bracket(x_norm)
    P = np.asarray(p_norm, dtype=float)
    common = constants.L * bx ** constants.mu + constants.L * bx * P
    return -common - y.k1_bar * P ** a1, common + y.k2 * P ** a2


@dataclass
class GrowthAudit:
    samples: int
    violations: list = field(default_factory=list)
    min_slack: float = np.inf

    @property
    def ok(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return {"samples": self.samples, "violations": len(self.violations),
                "min_slack": self.min_slack}


def audit_growth_bound(spec: GeneralGameSpec, samples: int, seed=0, x_box: float = 3.0,
                       p_box: float = 3.0, grid_points: int = 41) -> GrowthAudit:
    """Check both Hamiltonians against the growth envelope at random points.

    Violations mean the declared constants do not describe ``f`` and ``g``.
    The control grids always contain zero, so correct constants give zero
    violations regardless of grid resolution.
    """
    rng = np.random.default_rng(seed)
    audit = GrowthAudit(samples)
    n = spec.dim_state
    for _ in range(samples):
        t = rng.uniform(0, spec.T)
        x = rng.uniform(-x_box, x_box, n)
        p = rng.uniform(-p_box, p_box, n)
        lo, hi = growth_envelope(spec.constants, np.linalg.norm(x), np.linalg.norm(p))
        for fn, tag in ((eval_upper, "upper"), (eval_lower, "lower")):
            v = fn(spec, t, x, p, grid_points).value
            slack = min(v - lo, hi - v)
            audit.min_slack = min(audit.min_slack, float(slack))
            if slack < 0:
                audit.violations.append({"which": tag, "t": t, "x": x.tolist(),
                                         "p": p.tolist(), "value": v, "slack": float(slack)})
    return audit


def lipschitz_exponent_pairs(constants: GrowthConstants) -> list[tuple[float, float]]:
    """The twelve ``(lambda, nu)`` pairs of the p-Lipschitz modulus."""
    k = constants
    s1, s2 = k.sigma1 / k.rho1, k.sigma2 / k.rho2
    d1, d2 = k.rho1 - k.sigma1, k.rho2 - k.sigma2
    if d1 <= 0 or d2 <= 0:
        raise InvalidExponents("coercivity requires sigma_i < rho_i")
    return [
        (1.0, 0.0),
        (k.sigma1 * k.mu / k.rho1, 0.0),
        (k.sigma2 * k.mu / k.rho2, 0.0),
        (s1, s1),
        (s2, s2),
        (0.0, k.sigma1 / d1),
        (0.0, k.sigma2 / d2),
        (0.0, k.sigma1 * k.rho2 / (k.rho1 * d2)),
        (0.0, k.sigma2 * k.rho1 / (k.rho2 * d1)),
        (s1 * s2 * k.mu, s2),
        (s1 * s2, k.sigma2 * (k.sigma1 + k.rho1) / (k.rho1 * k.rho2)),
        (0.0, k.sigma1 * k.sigma2 / (k.rho1 * d2) + s2),
    ]


def lipschitz_constant(constants: GrowthConstants) -> float:
    """Prefactor ``C`` making the twelve-term sum dominate :func:`direct_modulus_p`.

    Obtained by bounding ``r1^rho1`` and ``r2^rho2`` by sums of monomials and
    using subadditivity of ``t -> t^s`` for ``s <= 1``.
    """
    k = constants
    y = young_constants(k)
    s1, s2 = k.sigma1 / k.rho1, k.sigma2 / k.rho2
    excess = max(k.L - k.c, 0.0)
    A1 = (2 / k.c) * max(2 * k.L + 1, 2 * k.L, y.k1_bar, y.k2)
    A1s = A1 ** s1
    A2 = (2 / k.c) * max(2 * k.L + excess * A1, 2 * k.L * A1s,
                         2 * k.L * A1s + excess * A1, y.k2_bar + excess * A1)
    return k.L * max(1.0, A1s, A2 ** s2)


def lipschitz_modulus_p(constants: GrowthConstants, x_norm, p_norm, q_norm):
    """``C sum_i <x>^lambda_i (|p| v |q|)^nu_i``, a Lipschitz bound for ``H+-`` in ``p``."""
    P = np.maximum(np.asarray(p_norm, dtype=float), np.asarray(q_norm, dtype=float))
    bx = bracket(x_norm)
    total = sum(bx ** lam * P ** nu for lam, nu in lipschitz_exponent_pairs(constants))
    out = lipschitz_constant(constants) * total
    return float(out) if np.ndim(out) == 0 else out


def direct_modulus_p(constants: GrowthConstants, x_norm, p_norm, q_norm) -> float:
    """``L(<x> + r1^sigma1 + r2^sigma2)`` with radii taken at ``|p| v |q|``.

    Sharper than :func:`lipschitz_modulus_p`, which dominates it.
    """
    P = max(float(p_norm), float(q_norm))
    r = truncation_radii(constants, float(x_norm), P)
    k = constants
    return float(k.L * (bracket(x_norm) + r.r1 ** k.sigma1 + r.r2 ** k.sigma2))


def growth_modulus(constants: GrowthConstants) -> Callable:
    """Dissipation callable ``(t, x, p_minus, p_plus) -> array`` for the grid solver."""
    def modulus(t, x, pm, pp):
        return lipschitz_modulus_p(constants, np.abs(x), np.abs(pm), np.abs(pp))
    return modulus
