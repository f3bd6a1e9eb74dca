"""Command-line scenario runner.

    zsgames <subcommand> --scenario file.yaml [--out-dir DIR] [--summary] [--seed N]

Exit status: 0 on success, 1 on unreadable or invalid input, 2 when a check
fails (ordering violated, certificate violated, self-test failed).  Artifacts
are written only after the whole scenario has run, so failures leave no
partial output.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import aq_hamiltonian as aqh
from . import dp_value as dpv
from . import hamiltonian_eval as hev
from . import hj_grid_solver as hjs
from . import riccati as ric
from . import trajectory as trj
from .errors import GameError, OrderingViolated
from .game_model import check_compatibility, check_coercive, check_strictly_compatible, compatibility_implication_holds
from .scenario import (KINDS, AQGame, LQGame, ParseError, build_aq, build_general,
                       load_scenario, lq_as_aq)


class CheckFailed(Exception):
    """Raised by a runner when the scenario completed but a check did not pass."""

    def __init__(self, message: str, summary: dict, artifacts: dict):
        super().__init__(message)
        self.summary = summary
        self.artifacts = artifacts


def _g17(v) -> str:
    return f"{float(v):.17g}"


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_g17(v) for v in row) + "\n")
    return buf.getvalue()


def _clean(obj):
    """JSON-safe copy: arrays to lists, non-finite floats to null."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _json(obj) -> str:
    return json.dumps(_clean(obj), indent=2) + "\n"


def _vec(v) -> np.ndarray:
    return np.atleast_1d(np.asarray(v, dtype=float))


def _aq_spec(game):
    return lq_as_aq(game) if isinstance(game, LQGame) else build_aq(game)


def run_saddle(params, seed):
    spec = _aq_spec(params.game)
    results = []
    for pt in params.points:
        res = aqh.saddle_point(spec, pt.t, _vec(pt.x), _vec(pt.p))
        entry = {"t": pt.t, "x": _vec(pt.x), "p": _vec(pt.p), "u1_bar": res.u1_bar,
                 "u2_bar": res.u2_bar, "q0": res.q0, "hessian_pp": res.hessian_pp,
                 "block_det": float(np.linalg.det(res.block_matrix))}
        if params.isaacs:
            gap = aqh.isaacs_gap(spec, pt.t, _vec(pt.x), _vec(pt.p), params.isaacs.radius,
                                 params.isaacs.grid_points)
            entry["isaacs"] = {"gap": gap.gap, "inf_sup": gap.inf_sup, "sup_inf": gap.sup_inf}
        results.append(entry)
    summary = {"kind": "saddle", "points": len(results)}
    return summary, {"saddle.json": _json({"results": results})}


def run_hamiltonian(params, seed):
    spec = build_general(params.game)
    results = []
    for pt in params.points:
        up = hev.eval_upper(spec, pt.t, _vec(pt.x), _vec(pt.p), params.grid_points)
        lo = hev.eval_lower(spec, pt.t, _vec(pt.x), _vec(pt.p), params.grid_points)
        results.append({"t": pt.t, "x": _vec(pt.x), "p": _vec(pt.p), "upper": up.value,
                        "lower": lo.value, "u1_arg": up.u1_arg, "u2_arg": up.u2_arg,
                        "r1": up.radii.r1, "r2": up.radii.r2})
    payload = {"results": results}
    summary = {"kind": "hamiltonian", "points": len(results)}
    if params.audit:
        a = params.audit
        audit = hev.audit_growth_bound(spec, a.samples, seed, a.x_box, a.p_box, a.grid_points)
        payload["growth_audit"] = {**audit.as_dict(), "details": audit.violations}
        summary["growth_violations"] = len(audit.violations)
        if not audit.ok:
            raise CheckFailed("growth bound violated", summary,
                              {"hamiltonian.json": _json(payload)})
    return summary, {"hamiltonian.json": _json(payload)}


def _control(model, t0, T, dim, rng) -> trj.ControlSignal:
    if model.type == "constant":
        value = np.broadcast_to(_vec(model.value), (dim,))
        return trj.ControlSignal.constant(value, t0, T)
    if model.type == "sine":
        fn = lambda s: np.full(dim, model.amplitude * math.sin(  # noqa: E731
            2 * math.pi * model.frequency * s + model.phase))
        return trj.ControlSignal.from_function(fn, t0, T, model.pieces)
    if model.type == "random":
        times = np.linspace(t0, T, model.pieces + 1)
        return trj.ControlSignal(times, rng.uniform(-model.bound, model.bound, (model.pieces, dim)))
    return trj.ControlSignal(model.times, model.values)


def run_trajectory(params, seed):
    spec = build_general(params.game)
    rng = np.random.default_rng(seed)
    u1 = _control(params.u1, params.t0, spec.T, spec.dim_u1, rng)
    u2 = _control(params.u2, params.t0, spec.T, spec.dim_u2, rng)
    x0 = _vec(params.x0)
    path = trj.integrate(spec, params.t0, x0, u1, u2, params.steps)
    reports = [trj.certify_state_bound(spec, path, u1, u2)]
    if params.stability:
        reports.extend(trj.certify_displacement_and_stability(
            spec, params.t0, x0, params.stability.t_bar, _vec(params.stability.x_bar),
            u1, u2, params.steps))
    buf = io.StringIO()
    n = path.states.shape[1]
    header = (["s"] + [f"y_{i + 1}" for i in range(n)]
              + [f"u1_{i + 1}" for i in range(u1.dim)] + [f"u2_{i + 1}" for i in range(u2.dim)])
    rows = [[s, *y, *u1.value_at(s), *u2.value_at(s)] for s, y in zip(path.times, path.states)]
    buf.write(_csv(header, rows))
    payload = {"terminal_state": path.terminal, "provenance": path.provenance,
               "certificates": [r.as_dict() for r in reports]}
    violations = sum(len(r.violations) for r in reports)
    summary = {"kind": "trajectory", "terminal_state": path.terminal, "violations": violations}
    artifacts = {"trajectory.csv": buf.getvalue(), "trajectory.json": _json(payload)}
    if violations:
        raise CheckFailed("bound certificate violated", summary, artifacts)
    return summary, artifacts


def run_riccati(params, seed):
    if (params.problem is None) == (params.lq is None):
        raise ParseError(["params: give exactly one of 'problem' or 'lq'"])
    if params.lq is not None:
        q = params.lq
        prob = ric.lq_to_riccati(q.A, q.B1, q.B2, q.Q, q.R1, q.R2, q.G, q.T)
    else:
        c = params.problem
        prob = ric.RiccatiProblem(c.alpha, c.beta, c.gamma, c.g, c.T)
    cls = ric.classify(prob)
    sol = ric.integrate_numeric(prob, params.blowup_threshold, params.samples)
    closed = []
    for t in sol.t:
        try:
            closed.append(ric.closed_form(prob, t, cls))
        except GameError:
            closed.append(float("nan"))
    closed = np.array(closed)
    ok = np.isfinite(closed)
    deviation = float(np.max(np.abs(closed[ok] - sol.p[ok]))) if ok.any() else None
    payload = {
        "problem": {"alpha": prob.alpha, "beta": prob.beta, "gamma": prob.gamma, "g": prob.g,
                    "T": prob.T},
        "classification": cls.as_dict(),
        "solvable_all_T": cls.solvable_all_T,
        "horizon": None if math.isinf(cls.max_horizon) else cls.max_horizon,
        "blew_up": sol.blew_up,
        "blowup_time": sol.blowup_time,
        "max_deviation": deviation,
        "samples": {"t": sol.t, "p_closed": closed, "p_numeric": sol.p},
    }
    csv_text = _csv(["t", "p_closed", "p_numeric"], zip(sol.t, closed, sol.p))
    summary = {"kind": "riccati", "case_tag": cls.case_tag, "solvable_all_T": cls.solvable_all_T,
               "horizon": payload["horizon"], "blew_up": sol.blew_up}
    return summary, {"riccati.json": _json(payload), "riccati.csv": csv_text}


def _hj_hamiltonian(spec):
    if spec.type == "transport":
        b = spec.b
        return (lambda t, x, p: b * p + 0 * x), "transport"
    return ric.lq_hamiltonian(spec.A, spec.B1, spec.B2, spec.Q, spec.R1, spec.R2), "lq"


def _poly_x(coeffs):
    c = np.asarray(coeffs, dtype=float)
    return lambda x: np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), c)


def run_hj(params, seed):
    H, tag = _hj_hamiltonian(params.hamiltonian)
    h = _poly_x(params.terminal)
    d = params.domain
    oracle = None
    if tag == "lq":
        hs = params.hamiltonian
        G = params.terminal[2] if len(params.terminal) > 2 else 0.0
        if any(params.terminal[i] for i in range(len(params.terminal)) if i != 2):
            G = None
        if G is not None:
            prob = ric.lq_to_riccati(hs.A, hs.B1, hs.B2, hs.Q, hs.R1, hs.R2, G, params.T)
            if ric.classify(prob).max_horizon > params.T:
                oracle = prob
    alpha = params.max_dissipation
    if alpha is None:
        alpha = _estimate_dissipation(H, h, d, params.T, oracle)
    grid = hjs.Grid1D.from_cfl(d.x_min, d.x_max, d.nx, params.T, alpha, params.cfl)
    field = hjs.solve(H, h, grid, params.dissipation, tag)
    extra = {"residual": hjs.residual_check(field, H)}
    summary = {"kind": "hj-solve", "nt": grid.nt}
    if oracle is not None:
        p0 = ric.closed_form(oracle, 0.0)
        x = grid.x
        mask = np.abs(x) <= 0.5 * (d.x_max - d.x_min) / 2 + 1e-12
        exact = p0 * x[mask] ** 2
        err = float(np.max(np.abs(field.values[0, mask] - exact)) / max(np.max(np.abs(exact)), 1e-300))
        extra["err_vs_riccati"] = err
        summary["err_vs_riccati"] = err
    artifacts = {}
    if params.comparison:
        cp = params.comparison
        try:
            report = hjs.comparison_harness(H, _poly_x(cp.h_sub), _poly_x(cp.h_super), grid,
                                            params.dissipation, cp.tolerance)
            extra["comparison"] = {"ordered": True, "max_excess": report["max_excess"]}
        except OrderingViolated as exc:
            extra["comparison"] = {"ordered": False, "max_excess": exc.excess, "node": exc.node}
            summary["ordered"] = False
            raise CheckFailed(str(exc), summary, {}) from None
        summary["ordered"] = True
    buf = io.StringIO()
    buf.write("t,x,V\n")
    for t, row in zip(grid.t, field.values):
        for xv, v in zip(grid.x, row):
            buf.write(f"{_g17(t)},{_g17(xv)},{_g17(v)}\n")
    sidecar = {"hamiltonian": tag, **field.params, "max_dissipation": alpha, "cfl": params.cfl,
               **extra}
    artifacts.update({"value_field.csv": buf.getvalue(), "value_field.json": _json(sidecar)})
    return summary, artifacts


def _estimate_dissipation(H, h, d, T, oracle) -> float:
    """Bound on ``|H_p|`` over the gradient range the solution can reach."""
    x = np.linspace(d.x_min, d.x_max, d.nx)
    slopes = np.abs(np.gradient(h(x) * np.ones_like(x), x))
    pmax = float(slopes.max())
    if oracle is not None:
        ts = np.linspace(0.0, T, 101)
        coef = np.max(np.abs(ric.closed_form(oracle, ts)))
        pmax = max(pmax, 2 * coef * max(abs(d.x_min), abs(d.x_max)))
    pmax = 1.25 * pmax + 1.0
    ps = np.linspace(-pmax, pmax, 401)
    xs = x[:, None]
    return float(np.max(hjs.numeric_dissipation(H, 0.0, xs, ps[None, :], ps[None, :]))) * 1.05 + 1e-9


def run_dp(params, seed):
    spec = build_general(params.game)
    d = params.domain
    config = dpv.DPConfig.from_truncation(spec, d.x_min, d.x_max, d.nx, params.nt,
                                          params.control_points, params.p_bound)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        pair = dpv.value_iterate(spec, config)
    payload = {"gap": pair.gap, **pair.stats,
               "min_upper_minus_lower": float(np.min(pair.upper.values - pair.lower.values))}
    summary = {"kind": "dp-value", "gap": pair.gap}
    g = params.game
    if isinstance(g, LQGame):
        prob = ric.lq_to_riccati(g.A, g.B1, g.B2, g.Q, g.R1, g.R2, g.G, g.T)
        if ric.classify(prob).max_horizon > g.T:
            x = config.grid.x
            mask = np.abs(x) <= 0.5 * (d.x_max - d.x_min) / 2 + 1e-12
            exact = ric.closed_form(prob, 0.0) * x[mask] ** 2
            err = float(np.max(np.abs(pair.upper.values[0, mask] - exact))
                        / max(np.max(np.abs(exact)), 1e-300))
            payload["err_vs_riccati"] = err
            summary["err_vs_riccati"] = err
    payload["growth"] = dpv.growth_envelope_check(pair, spec.constants)
    artifacts = {"dp_value.json": _json(payload)}
    for name, fld in (("dp_upper.csv", pair.upper), ("dp_lower.csv", pair.lower)):
        rows = ((t, xv, v) for t, row in zip(config.grid.t, fld.values)
                for xv, v in zip(config.grid.x, row))
        artifacts[name] = _csv(["t", "x", "V"], rows)
    if payload["min_upper_minus_lower"] < -1e-12:
        raise CheckFailed("upper value below lower value", summary, artifacts)
    return summary, artifacts


def run_hypotheses(params, seed):
    k = params.constants.build()
    coercive = check_coercive(k)
    payload = {"coercive": coercive, "strictly_compatible": check_strictly_compatible(k)}
    if coercive:
        payload["compatibility"] = check_compatibility(k).as_dict()
    payload["implication_self_test"] = compatibility_implication_holds(k)
    summary = {"kind": "check-hypotheses", **{key: payload[key] for key in ("coercive", "strictly_compatible")},
               "implication_self_test": payload["implication_self_test"]}
    artifacts = {"hypotheses.json": _json(payload)}
    if not payload["implication_self_test"]:
        raise CheckFailed("compatibility implication failed", summary, artifacts)
    return summary, artifacts


RUNNERS = {
    "saddle": run_saddle,
    "hamiltonian": run_hamiltonian,
    "trajectory": run_trajectory,
    "riccati": run_riccati,
    "hj-solve": run_hj,
    "dp-value": run_dp,
    "check-hypotheses": run_hypotheses,
}


def _write(out_dir: Path, name: str, artifacts: dict) -> list[str]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for fname, text in artifacts.items():
        target = out_dir / f"{name}.{fname}"
        tmp = target.with_suffix(target.suffix + ".tmp")
        tmp.write_text(text)
        tmp.replace(target)
        written.append(str(target))
    return written


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zsgames", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind)
        p.add_argument("--scenario", required=True, type=Path)
        p.add_argument("--out-dir", type=Path, default=Path("."))
        p.add_argument("--summary", action="store_true",
                       help="print a one-line JSON verdict to standard output")
        p.add_argument("--seed", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = args.scenario.read_text()
    except OSError as exc:
        print(f"error: cannot read scenario: {exc}", file=sys.stderr)
        return 1
    try:
        scenario, params = load_scenario(text)
        if scenario.kind != args.command:
            raise ParseError([f"kind: scenario is '{scenario.kind}', subcommand is '{args.command}'"])
        seed = scenario.seed if args.seed is None else args.seed
        summary, artifacts = RUNNERS[args.command](params, seed)
        status, code = "ok", 0
    except ParseError as exc:
        for problem in exc.problems:
            print(f"error: {problem}", file=sys.stderr)
        return 1
    except CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        summary, artifacts, status, code = exc.summary, exc.artifacts, "violation", 2
    except (GameError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    written = _write(args.out_dir, scenario.name, artifacts)
    if args.summary:
        print(json.dumps(_clean({"status": status, **summary, "artifacts": written})))
    return code


if __name__ == "__main__":
    sys.exit(main())
