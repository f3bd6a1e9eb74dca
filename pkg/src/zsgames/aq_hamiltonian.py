"""Closed-form saddle point of the affine-quadratic pre-Hamiltonian.

For ``HH(u1, u2) = <p, A + B1 u1 + B2 u2> + Q + 1/2 u1'R1 u1 + u2'S u1
- 1/2 u2'R2 u2 + theta1'u1 + theta2'u2`` the stationarity system is

    [[R1, S'], [S, -R2]] (u1, u2) = -(B1'p + theta1, B2'p + theta2)

and the block matrix is invertible whenever R1, R2 are positive definite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotPositiveDefinite, SingularSystem
from .game_model import AQGameSpec

__all__ = [
    "SaddleResult",
    "IsaacsGap",
    "assemble_block_matrix",
    "saddle_point",
    "hessian_pp",
    "aq_prehamiltonian",
    "isaacs_gap",
    "check_spd",
]

_SYM_TOL = 1e-10


@dataclass(frozen=True)
class SaddleResult:
    u1_bar: np.ndarray
    u2_bar: np.ndarray
    q0: float
    block_matrix: np.ndarray
    hessian_pp: np.ndarray


def check_spd(M: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Return the Cholesky factor of ``M`` or raise :class:`NotPositiveDefinite`."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise NotPositiveDefinite(f"{name} is not square: shape {M.shape}")
    scale = max(np.abs(M).max(), np.finfo(float).tiny)
    if np.abs(M - M.T).max() > _SYM_TOL * scale:
        raise NotPositiveDefinite(f"{name} is not symmetric")
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite(f"{name} is not positive definite") from None


def _block(co: dict) -> np.ndarray:
    check_spd(co["R1"], "R1")
    check_spd(co["R2"], "R2")
    return np.block([[co["R1"], co["S"].T], [co["S"], -co["R2"]]])


def assemble_block_matrix(spec: AQGameSpec, t, x) -> np.ndarray:
    """``[[R1, S'], [S, -R2]]`` at ``(t, x)``; checks R1, R2 first."""
    return _block(spec.coefficients(t, x))


def _rhs(co: dict, p: np.ndarray) -> np.ndarray:
    return np.concatenate([co["B1"].T @ p + co["theta1"], co["B2"].T @ p + co["theta2"]])


def _hessian(co: dict, M: np.ndarray) -> np.ndarray:
    B = np.hstack([co["B1"], co["B2"]])
    try:
        H = -B @ np.linalg.solve(M, B.T)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from None
    return 0.5 * (H + H.T)


def saddle_point(spec: AQGameSpec, t, x, p) -> SaddleResult:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    co = spec.coefficients(t, x)
    M = _block(co)
    rhs = _rhs(co, p)
    try:
        u = -np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from None
    m1 = co["R1"].shape[0]
    # -1/2 rhs' M^{-1} rhs == 1/2 rhs' u
    q0 = co["Q"] + float(p @ co["A"]) + 0.5 * float(rhs @ u)
    return SaddleResult(u[:m1].copy(), u[m1:].copy(), q0, M, _hessian(co, M))


def hessian_pp(spec: AQGameSpec, t, x) -> np.ndarray:
    """Hessian in ``p`` of the saddle value, ``-B M^{-1} B'`` with ``B = [B1 B2]``.

    The saddle value is exactly quadratic in ``p`` so this equals its second
    difference quotient.
    """
    co = spec.coefficients(t, np.atleast_1d(np.asarray(x, dtype=float)))
    return _hessian(co, _block(co))


def aq_prehamiltonian(spec: AQGameSpec, t, x, p, u1, u2):
    """Evaluate the pre-Hamiltonian; ``u1``/``u2`` may carry leading batch axes."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    co = spec.coefficients(t, x)
    return (p @ co["A"] + co["Q"]
            + (u1 @ (co["B1"].T @ p + co["theta1"]))
            + (u2 @ (co["B2"].T @ p + co["theta2"]))
            + 0.5 * np.einsum("...i,ij,...j->...", u1, co["R1"], u1)
            + np.einsum("...i,ij,...j->...", u2, co["S"], u1)
            - 0.5 * np.einsum("...i,ij,...j->...", u2, co["R2"], u2))


@dataclass(frozen=True)
class IsaacsGap:
    gap: float
    inf_sup: float
    sup_inf: float


def ball_grid(dim: int, radius: float, points: int) -> np.ndarray:
    """Uniform per-axis grid on ``[-radius, radius]^dim`` restricted to the ball.

    Zero is always a grid point (inserted when ``points`` is even).
    """
    axis = np.linspace(-radius, radius, points)
    if not np.any(axis == 0.0):
        axis = np.sort(np.append(axis, 0.0))
    mesh = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    keep = np.sum(mesh * mesh, axis=1) <= radius * radius * (1 + 1e-12)
    return mesh[keep]


def isaacs_gap(spec: AQGameSpec, t, x, p, search_radius: float, grid_points: int) -> IsaacsGap:
    """Brute-force ``|inf sup - sup inf|`` over control grids in a ball."""
    if not search_radius > 0:
        raise ValueError("search_radius must be positive")
    co = spec.coefficients(t, np.atleast_1d(np.asarray(x, dtype=float)))
    m1, m2 = co["R1"].shape[0], co["R2"].shape[0]
    U1 = ball_grid(m1, search_radius, grid_points)
    U2 = ball_grid(m2, search_radius, grid_points)
    values = aq_prehamiltonian(spec, t, x, p, U1[:, None, :], U2[None, :, :])
    inf_sup = float(values.max(axis=1).min())
    sup_inf = float(values.min(axis=0).max())
    return IsaacsGap(abs(inf_sup - sup_inf), inf_sup, sup_inf)
