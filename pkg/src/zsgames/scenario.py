"""Scenario file schema (YAML) and builders for game objects.

AQ coefficients are given as a number, a constant vector/matrix, or a
polynomial table ``{poly: P}`` meaning ``sum_ij P[i][j] t^i x^j`` (scalar
state only).
"""

from __future__ import annotations

from typing import Annotated, Literal, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field

from .game_model import AQGameSpec, GeneralGameSpec, GrowthConstants, scalar_lq_game

KINDS = ("saddle", "hamiltonian", "trajectory", "riccati", "hj-solve", "dp-value",
         "check-hypotheses")


class ParseError(ValueError):
    """Unreadable or schema-violating scenario; ``problems`` lists every issue."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class Poly(Strict):
    poly: list[list[float]]


Coefficient = Union[float, list[float], list[list[float]], Poly]


class ConstantsModel(Strict):
    L: float
    c: float
    sigma1: float
    sigma2: float
    rho1: float
    rho2: float
    mu: float = 1.0

    def build(self) -> GrowthConstants:
        return GrowthConstants(**self.model_dump())


class LQGame(Strict):
    type: Literal["lq"]
    A: float = 0.0
    B1: float = 1.0
    B2: float = 0.0
    Q: float = 1.0
    R1: float = 1.0
    R2: float = 1.0
    G: float = 0.0
    T: float = 1.0
    constants: ConstantsModel | None = None


class AQGame(Strict):
    type: Literal["aq"]
    T: float = 1.0
    A: Coefficient = 0.0
    B1: Coefficient = 1.0
    B2: Coefficient = 0.0
    Q: Coefficient = 0.0
    R1: Coefficient = 1.0
    R2: Coefficient = 1.0
    S: Coefficient | None = None
    theta1: Coefficient | None = None
    theta2: Coefficient | None = None
    G: Coefficient | None = None
    constants: ConstantsModel | None = None


Game = Annotated[Union[LQGame, AQGame], Field(discriminator="type")]


def _poly_fn(table):
    P = np.asarray(table, dtype=float)

    def fn(t, x):
        xv = float(np.atleast_1d(x)[0])
        return float(sum(P[i, j] * t ** i * xv ** j
                         for i in range(P.shape[0]) for j in range(P.shape[1])))
    return fn


def _coef(value, default=None):
    if value is None:
        value = default
    if isinstance(value, Poly):
        return _poly_fn(value.poly)
    arr = np.asarray(value, dtype=float)
    return lambda t, x, _a=arr: _a


def build_aq(game: AQGame) -> AQGameSpec:
    R1 = np.atleast_2d(np.asarray(0.0 if isinstance(game.R1, Poly) else game.R1))
    R2 = np.atleast_2d(np.asarray(0.0 if isinstance(game.R2, Poly) else game.R2))
    m1, m2 = R1.shape[0], R2.shape[0]
    G = game.G
    if isinstance(G, Poly):
        g_fn = _poly_fn(G.poly)
        terminal = lambda x: g_fn(0.0, x)  # noqa: E731
    else:
        gval = 0.0 if G is None else float(np.asarray(G))
        terminal = lambda x, _g=gval: _g * float(np.dot(x, x))  # noqa: E731
    return AQGameSpec(
        A=_coef(game.A), B1=_coef(game.B1), B2=_coef(game.B2), Q=_coef(game.Q),
        R1=_coef(game.R1), R2=_coef(game.R2), S=_coef(game.S, np.zeros((m2, m1))),
        theta1=_coef(game.theta1, np.zeros(m1)), theta2=_coef(game.theta2, np.zeros(m2)),
        G=terminal, T=game.T)


def build_general(game) -> GeneralGameSpec:
    """General spec for either game type; AQ games need explicit constants."""
    if isinstance(game, LQGame):
        consts = game.constants.build() if game.constants else None
        return scalar_lq_game(game.A, game.B1, game.B2, game.Q, game.R1, game.R2, game.G,
                              game.T, consts)
    if game.constants is None:
        raise ParseError(["game.constants: required for this subcommand with an aq game"])
    return build_aq(game).to_general(game.constants.build())


def lq_as_aq(game: LQGame) -> AQGameSpec:
    """The same LQ game in the 1/2 convention (weights doubled, drift ``A x``)."""
    B1, B2 = np.array([[game.B1]]), np.array([[game.B2]])
    R1, R2 = np.array([[2 * game.R1]]), np.array([[2 * game.R2]])
    z1, z2 = np.zeros(1), np.zeros(1)
    return AQGameSpec(
        A=lambda t, x: np.array([game.A * float(x[0])]),
        B1=lambda t, x: B1, B2=lambda t, x: B2,
        Q=lambda t, x: game.Q * float(x[0]) ** 2,
        R1=lambda t, x: R1, R2=lambda t, x: R2, S=lambda t, x: np.zeros((1, 1)),
        theta1=lambda t, x: z1, theta2=lambda t, x: z2,
        G=lambda x: game.G * float(x[0]) ** 2, T=game.T)


class Point(Strict):
    t: float = 0.0
    x: float | list[float] = 0.0
    p: float | list[float] = 0.0


class IsaacsProbe(Strict):
    radius: float = 3.0
    grid_points: int = 241


class SaddleParams(Strict):
    game: Game
    points: list[Point]
    isaacs: IsaacsProbe | None = None


class GrowthAuditParams(Strict):
    samples: int = 100
    x_box: float = 3.0
    p_box: float = 3.0
    grid_points: int = 41


class HamiltonianParams(Strict):
    game: Game
    points: list[Point]
    grid_points: int = 241
    audit: GrowthAuditParams | None = None


class ConstantControl(Strict):
    type: Literal["constant"]
    value: float | list[float] = 0.0


class SineControl(Strict):
    type: Literal["sine"]
    amplitude: float = 1.0
    frequency: float = 1.0
    phase: float = 0.0
    pieces: int = 100


class SampledControl(Strict):
    type: Literal["samples"]
    times: list[float]
    values: list[float] | list[list[float]]


class RandomControl(Strict):
    type: Literal["random"]
    bound: float = 1.0
    pieces: int = 20


Control = Annotated[Union[ConstantControl, SineControl, SampledControl, RandomControl],
                    Field(discriminator="type")]


class StabilityProbe(Strict):
    t_bar: float
    x_bar: float | list[float]


class TrajectoryParams(Strict):
    game: Game
    t0: float = 0.0
    x0: float | list[float] = 0.0
    steps: int = 100
    u1: Control = ConstantControl(type="constant")
    u2: Control = ConstantControl(type="constant")
    stability: StabilityProbe | None = None


class RiccatiCoeffs(Strict):
    alpha: float
    beta: float
    gamma: float
    g: float
    T: float = 1.0


class RiccatiParams(Strict):
    problem: RiccatiCoeffs | None = None
    lq: LQGame | None = None
    samples: int = 201
    blowup_threshold: float = 1e8


class Transport(Strict):
    type: Literal["transport"]
    b: float


class LQHamiltonian(Strict):
    type: Literal["lq"]
    A: float = 0.0
    B1: float = 1.0
    B2: float = 0.0
    Q: float = 1.0
    R1: float = 1.0
    R2: float = 1.0


HamiltonianSpec = Annotated[Union[Transport, LQHamiltonian], Field(discriminator="type")]


class Domain(Strict):
    x_min: float = -2.0
    x_max: float = 2.0
    nx: int = 401


class ComparisonPair(Strict):
    h_sub: list[float]
    h_super: list[float]
    tolerance: float = 1e-10


class HJParams(Strict):
    hamiltonian: HamiltonianSpec
    terminal: list[float] = [0.0]
    T: float = 1.0
    domain: Domain = Domain()
    cfl: float = 0.4
    max_dissipation: float | None = None
    dissipation: float | Literal["auto"] = "auto"
    comparison: ComparisonPair | None = None


class DPParams(Strict):
    game: Game
    domain: Domain = Domain()
    nt: int = 200
    control_points: int = 81
    p_bound: float = 4.0


class HypothesesParams(Strict):
    constants: ConstantsModel


_PARAMS = {
    "saddle": SaddleParams,
    "hamiltonian": HamiltonianParams,
    "trajectory": TrajectoryParams,
    "riccati": RiccatiParams,
    "hj-solve": HJParams,
    "dp-value": DPParams,
    "check-hypotheses": HypothesesParams,
}


class Scenario(Strict):
    kind: Literal[KINDS]  # type: ignore[valid-type]
    name: str = "scenario"
    seed: int = 0
    params: dict


def load_scenario(text: str):
    """Parse YAML text into ``(Scenario, params model)`` or raise :class:`ParseError`."""
    from pydantic import ValidationError

    try:
        raw = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}: " if mark else ""
        raise ParseError([f"{where}{exc.problem or exc}"]) from None
    except yaml.YAMLError as exc:
        raise ParseError([str(exc)]) from None
    if not isinstance(raw, dict):
        raise ParseError(["top level must be a mapping"])
    problems = []
    try:
        scenario = Scenario.model_validate(raw)
    except ValidationError as exc:
        problems.extend(_describe(exc))
        scenario = None
    if scenario is None:
        raise ParseError(problems)
    try:
        params = _PARAMS[scenario.kind].model_validate(scenario.params)
    except ValidationError as exc:
        raise ParseError(_describe(exc, prefix="params")) from None
    return scenario, params


def _describe(exc, prefix: str = "") -> list[str]:
    out = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in ((prefix,) if prefix else ()) + tuple(err["loc"]))
        out.append(f"{loc}: {err['msg']}")
    return out
