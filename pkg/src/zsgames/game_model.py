"""Game specifications, growth constants and the hypothesis predicates.

Two-person zero-sum game with state equation ``y' = f(s, y, u1, u2)`` and
payoff ``J = int g ds + h(y(T))``.  Player 1 minimises, player 2 maximises.

The growth constants describe

    |f| <= L (<x> + |u1|^sigma1 + |u2|^sigma2)
    c|u1|^rho1 - L(<x>^mu + |u2|^rho2) <= g <= L(<x>^mu + |u1|^rho1) - c|u2|^rho2

with ``<x> = sqrt(1 + |x|^2)``.  The predicates below are evaluated in exact
rational arithmetic on the binary values of the inputs, so that boundary cases
such as ``mu * sigma == rho`` are decided without rounding noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .errors import DegenerateExponents, InvalidExponents

__all__ = [
    "GrowthConstants",
    "GeneralGameSpec",
    "AQGameSpec",
    "CompatibilityReport",
    "bracket",
    "check_coercive",
    "check_strictly_compatible",
    "check_compatibility",
    "compatibility_implication_holds",
    "scalar_lq_game",
]


def bracket(x) -> np.ndarray:
    """Japanese bracket ``<x> = sqrt(1 + |x|^2)`` of a norm (or array of norms)."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(1.0 + x * x)


@dataclass(frozen=True)
class GrowthConstants:
    L: float
    c: float
    sigma1: float
    sigma2: float
    rho1: float
    rho2: float
    mu: float = 1.0

    def __post_init__(self):
        for name in ("L", "c", "sigma1", "sigma2", "rho1", "rho2", "mu"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise InvalidExponents(f"{name} must be finite, got {value!r}")
        if self.L <= 0 or self.c <= 0:
            raise InvalidExponents("L and c must be positive")
        if self.sigma1 < 0 or self.sigma2 < 0:
            raise InvalidExponents("sigma1, sigma2 must be nonnegative")
        if self.rho1 <= 0 or self.rho2 <= 0:
            raise InvalidExponents("rho1, rho2 must be positive")
        if self.mu < 1:
            raise InvalidExponents("mu must be >= 1")

    @property
    def sigma(self) -> tuple[float, float]:
        return (self.sigma1, self.sigma2)

    @property
    def rho(self) -> tuple[float, float]:
        return (self.rho1, self.rho2)


@dataclass(frozen=True)
class GeneralGameSpec:
    """Black-box game data.

    ``f(t, x, u1, u2)`` returns the velocity, ``g(t, x, u1, u2)`` the running
    payoff and ``h(x)`` the terminal payoff.  With ``vectorized=True`` the
    callables must broadcast: ``x`` of shape ``(..., n)``, ``u1`` of shape
    ``(..., m1)`` and ``u2`` of shape ``(..., m2)``, returning ``(..., n)`` for
    ``f`` and ``(...)`` for ``g`` and ``h``.  Otherwise they are called one
    point at a time.
    """

    dim_state: int
    dim_u1: int
    dim_u2: int
    f: Callable
    g: Callable
    h: Callable
    constants: GrowthConstants
    T: float
    vectorized: bool = False
    name: str = "game"

    def __post_init__(self):
        if min(self.dim_state, self.dim_u1, self.dim_u2) < 1:
            raise ValueError("dimensions must be positive")
        if not self.T > 0:
            raise ValueError("horizon T must be positive")

    def eval_f(self, t, x, u1, u2) -> np.ndarray:
        x, u1, u2 = (np.asarray(a, dtype=float) for a in (x, u1, u2))
        if self.vectorized:
            return np.asarray(self.f(t, x, u1, u2), dtype=float)
        return _pointwise(lambda a, b, c: self.f(t, a, b, c), x, u1, u2, (self.dim_state,))

    def eval_g(self, t, x, u1, u2) -> np.ndarray:
        x, u1, u2 = (np.asarray(a, dtype=float) for a in (x, u1, u2))
        if self.vectorized:
            return np.asarray(self.g(t, x, u1, u2), dtype=float)
        return _pointwise(lambda a, b, c: self.g(t, a, b, c), x, u1, u2, ())

    def eval_h(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.vectorized:
            return np.asarray(self.h(x), dtype=float)
        flat = x.reshape(-1, x.shape[-1])
        out = np.array([float(self.h(row)) for row in flat])
        return out.reshape(x.shape[:-1])


def _pointwise(fn, x, u1, u2, out_tail):
    batch = np.broadcast_shapes(x.shape[:-1], u1.shape[:-1], u2.shape[:-1])
    xb = np.broadcast_to(x, batch + x.shape[-1:]).reshape(-1, x.shape[-1])
    ab = np.broadcast_to(u1, batch + u1.shape[-1:]).reshape(-1, u1.shape[-1])
    bb = np.broadcast_to(u2, batch + u2.shape[-1:]).reshape(-1, u2.shape[-1])
    out = np.empty((xb.shape[0],) + out_tail)
    for k in range(xb.shape[0]):
        out[k] = fn(xb[k], ab[k], bb[k])
    return out.reshape(batch + out_tail)


@dataclass(frozen=True)
class AQGameSpec:
    """Affine-quadratic game.

    Dynamics ``A + B1 u1 + B2 u2``; running payoff
    ``Q + 1/2 <R1 u1, u1> + <S u1, u2> - 1/2 <R2 u2, u2> + <theta1, u1> + <theta2, u2>``
    (note the 1/2 factors).  Every coefficient is a callable of ``(t, x)`` for
    a single state ``x`` of shape ``(n,)``; ``G`` is a callable of ``x``.
    """

    A: Callable
    B1: Callable
    B2: Callable
    Q: Callable
    R1: Callable
    R2: Callable
    S: Callable
    theta1: Callable
    theta2: Callable
    G: Callable
    T: float = 1.0

    @classmethod
    def constant(cls, A, B1, B2, Q, R1, R2, S=None, theta1=None, theta2=None,
                 G=None, T: float = 1.0) -> "AQGameSpec":
        """Build a spec with state-independent coefficients.

        ``Q`` may be a number (constant) or a callable of ``(t, x)``;
        ``G`` defaults to the zero terminal payoff.
        """
        A = np.atleast_1d(np.asarray(A, dtype=float))
        B1 = np.atleast_2d(np.asarray(B1, dtype=float))
        B2 = np.atleast_2d(np.asarray(B2, dtype=float))
        R1 = np.atleast_2d(np.asarray(R1, dtype=float))
        R2 = np.atleast_2d(np.asarray(R2, dtype=float))
        m1, m2 = R1.shape[0], R2.shape[0]
        S = np.zeros((m2, m1)) if S is None else np.asarray(S, dtype=float).reshape(m2, m1)
        th1 = np.zeros(m1) if theta1 is None else np.asarray(theta1, dtype=float).reshape(m1)
        th2 = np.zeros(m2) if theta2 is None else np.asarray(theta2, dtype=float).reshape(m2)
        q = Q if callable(Q) else (lambda t, x, _q=float(Q): _q)
        g = G if G is not None else (lambda x: 0.0)
        return cls(
            A=lambda t, x: A, B1=lambda t, x: B1, B2=lambda t, x: B2, Q=q,
            R1=lambda t, x: R1, R2=lambda t, x: R2, S=lambda t, x: S,
            theta1=lambda t, x: th1, theta2=lambda t, x: th2, G=g, T=T,
        )

    def coefficients(self, t, x) -> dict:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        n = x.shape[0]
        B1 = np.asarray(self.B1(t, x), dtype=float).reshape(n, -1)
        B2 = np.asarray(self.B2(t, x), dtype=float).reshape(n, -1)
        m1, m2 = B1.shape[1], B2.shape[1]
        return {
            "A": np.asarray(self.A(t, x), dtype=float).reshape(n),
            "B1": B1,
            "B2": B2,
            "Q": float(self.Q(t, x)),
            "R1": np.asarray(self.R1(t, x), dtype=float).reshape(m1, m1),
            "R2": np.asarray(self.R2(t, x), dtype=float).reshape(m2, m2),
            "S": np.asarray(self.S(t, x), dtype=float).reshape(m2, m1),
            "theta1": np.asarray(self.theta1(t, x), dtype=float).reshape(m1),
            "theta2": np.asarray(self.theta2(t, x), dtype=float).reshape(m2),
        }

    def dims(self, t=0.0, x=None) -> tuple[int, int, int]:
        x = np.zeros(1) if x is None else np.atleast_1d(x)
        co = self.coefficients(t, x)
        return co["B1"].shape[0], co["B1"].shape[1], co["B2"].shape[1]

    def to_general(self, constants: GrowthConstants, dim_state: int | None = None) -> GeneralGameSpec:
        """Wrap as a vectorized :class:`GeneralGameSpec`.

        Coefficients are evaluated once per distinct state in the batch, so
        the cost scales with the number of states, not the number of controls.
        """
        n, m1, m2 = self.dims(0.0, np.zeros(dim_state or 1))
        spec = self

        def batched(t, x):
            x = np.asarray(x, dtype=float)
            flat = x.reshape(-1, n)
            cos = [spec.coefficients(t, row) for row in flat]
            stack = {k: np.stack([np.asarray(c[k]) for c in cos]) for k in cos[0]}
            return {k: v.reshape(x.shape[:-1] + v.shape[1:]) for k, v in stack.items()}

        def f(t, x, u1, u2):
            co = batched(t, x)
            return (co["A"] + np.einsum("...ij,...j->...i", co["B1"], u1)
                    + np.einsum("...ij,...j->...i", co["B2"], u2))

        def g(t, x, u1, u2):
            co = batched(t, x)
            return (co["Q"]
                    + 0.5 * np.einsum("...i,...ij,...j->...", u1, co["R1"], u1)
                    + np.einsum("...i,...ij,...j->...", u2, co["S"], u1)
                    - 0.5 * np.einsum("...i,...ij,...j->...", u2, co["R2"], u2)
                    + np.einsum("...i,...i->...", co["theta1"], u1)
                    + np.einsum("...i,...i->...", co["theta2"], u2))

        def h(x):
            x = np.asarray(x, dtype=float)
            flat = x.reshape(-1, n)
            return np.array([float(spec.G(row)) for row in flat]).reshape(x.shape[:-1])

        return GeneralGameSpec(n, m1, m2, f, g, h, constants, self.T, vectorized=True,
                               name="aq")


def scalar_lq_game(A: float, B1: float, B2: float, Q: float, R1: float, R2: float,
                   G: float, T: float = 1.0,
                   constants: GrowthConstants | None = None) -> GeneralGameSpec:
    """Scalar linear-quadratic game without the 1/2 factors.

    ``y' = A y + B1 u1 + B2 u2`` and payoff
    ``int (Q y^2 + R1 u1^2 - R2 u2^2) ds + G y(T)^2``.  The returned spec is
    vectorized.  Default constants are the tightest ones valid for this form:
    ``sigma = (1, 1)``, ``rho = mu = 2``.
    """
    if R1 <= 0 or R2 <= 0:
        raise ValueError("R1 and R2 must be positive")
    if constants is None:
        L = max(abs(A), abs(B1), abs(B2), abs(Q), R1, R2, 2 * abs(G), 1e-12)
        constants = GrowthConstants(L=L, c=min(R1, R2), sigma1=1.0, sigma2=1.0,
                                    rho1=2.0, rho2=2.0, mu=2.0)

    def f(t, x, u1, u2):
        return A * x + B1 * u1 + B2 * u2

    def g(t, x, u1, u2):
        return Q * x[..., 0] ** 2 + R1 * u1[..., 0] ** 2 - R2 * u2[..., 0] ** 2

    def h(x):
        return G * x[..., 0] ** 2

    return GeneralGameSpec(1, 1, 1, f, g, h, constants, T, vectorized=True, name="lq")


def _q(value) -> Fraction:
    return Fraction(value)


def check_coercive(constants: GrowthConstants) -> bool:
    """``sigma_i < rho_i`` for both players."""
    return (_q(constants.sigma1) < _q(constants.rho1)
            and _q(constants.sigma2) < _q(constants.rho2))


def check_strictly_compatible(constants: GrowthConstants) -> bool:
    """``sigma_i * mu < rho_i`` for both players."""
    mu = _q(constants.mu)
    return (_q(constants.sigma1) * mu < _q(constants.rho1)
            and _q(constants.sigma2) * mu < _q(constants.rho2))


@dataclass(frozen=True)
class CompatibilityReport:
    entries: tuple = field(default_factory=tuple)  # (id, lhs as float, holds)

    @property
    def all_hold(self) -> bool:
        return all(holds for _, _, holds in self.entries)

    def as_dict(self) -> dict:
        return {
            "all_hold": self.all_hold,
            "inequalities": [{"id": i, "lhs": lhs, "holds": ok} for i, lhs, ok in self.entries],
        }


def _compatibility_lhs(constants: GrowthConstants) -> list[Fraction]:
    s1, s2 = _q(constants.sigma1), _q(constants.sigma2)
    r1, r2 = _q(constants.rho1), _q(constants.rho2)
    mu = _q(constants.mu)
    if r1 - s1 <= 0 or r2 - s2 <= 0:
        raise DegenerateExponents("rho_i - sigma_i must be positive")
    m = mu - 1
    return [
        s1 * mu / r1,
        s2 * mu / r2,
        m * s1 / (r1 - s1),
        m * s2 / (r2 - s2),
        m * s1 * r2 / (r1 * (r2 - s2)),
        m * s2 * r1 / (r2 * (r1 - s1)),
        s1 * s2 * mu / (r1 * r2) + m * s1 / r1,
        s1 * s2 * mu / (r1 * r2) + m * s2 / r2,
        s1 * s2 / (r1 * r2) + m * s2 * (s1 + r1) / (r1 * r2),
        s1 * s2 / (r1 * r2) + m * s1 * (s2 + r2) / (r1 * r2),
        m * s1 * s2 / (r1 * (r2 - s2)) + m * s2 / r2,
        m * s1 * s2 / (r2 * (r1 - s1)) + m * s1 / r1,
    ]


def check_compatibility(constants: GrowthConstants) -> CompatibilityReport:
    """Evaluate the twelve exponent-compatibility inequalities (each ``lhs <= 1``).

    Raises :class:`DegenerateExponents` when ``rho_i - sigma_i <= 0``.
    """
    lhs = _compatibility_lhs(constants)
    return CompatibilityReport(tuple(
        (k + 1, float(v), v <= 1) for k, v in enumerate(lhs)
    ))


def compatibility_implication_holds(constants: GrowthConstants) -> bool:
    """Self-test: ``mu sigma_i <= rho_i`` must imply all twelve inequalities.

    Vacuously true when the antecedent fails or when ``sigma_i >= rho_i``
    (the inequalities are then undefined).
    """
    mu = _q(constants.mu)
    antecedent = (mu * _q(constants.sigma1) <= _q(constants.rho1)
                  and mu * _q(constants.sigma2) <= _q(constants.rho2))
    if not antecedent or not check_coercive(constants):
        return True
    return check_compatibility(constants).all_hold
