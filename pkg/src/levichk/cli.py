"""Command-line front end.

Problem files are JSON; expression strings inside them carry the math.
Subcommands write a report bundle under the output directory and print
either a human summary or, with --json, the machine payload.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass
from typing import List, Optional, Tuple

from . import __version__
from . import levi
from . import oracle
from . import reduction as rd
from . import schur
from . import spectral as sp
from . import symbolcalc as sc
from .exprlang import ExprSyntaxError, Num, parse, to_source

__all__ = [
    "SchemaError",
    "SolverOptions",
    "SweepOptions",
    "ProblemFile",
    "load_problem",
    "load_problem_file",
    "serialize_problem",
    "input_hash",
    "main",
]

USAGE = "levichk <check|schur|solve|sweep|verify> <problem.json> [--out DIR] [--seed S] [--json]"

_TOP_KEYS = {
    "order", "dim", "horizon", "parameters", "roots", "lower_order",
    "forcing", "data", "solver", "sweep",
}
_SOLVER_KEYS = {"modes", "cfl", "sobolev_s", "cadence", "dealias"}
_SWEEP_KEYS = {"n_list", "mode_fraction"}


class SchemaError(Exception):
    pass


@dataclass
class SolverOptions:
    modes: int = 64
    cfl: float = 0.5
    sobolev_s: float = 2.0
    cadence: int = 10
    dealias: bool = False


@dataclass
class SweepOptions:
    n_list: Tuple[int, ...] = (16, 32, 64, 128, 256)
    mode_fraction: float = 0.25


@dataclass
class ProblemFile:
    spec: rd.ProblemSpec
    solver: SolverOptions
    sweep: SweepOptions


def _want(doc, key, kinds, where, required=True, default=None):
    if key not in doc:
        if required:
            raise SchemaError(f"{where}: missing key '{key}'")
        return default
    val = doc[key]
    if kinds is bool:
        if not isinstance(val, bool):
            raise SchemaError(f"{where}: '{key}' must be a boolean")
        return val
    if kinds is int:
        # bool is an int subclass; reject it explicitly
        if isinstance(val, bool) or not isinstance(val, int):
            raise SchemaError(f"{where}: '{key}' must be an integer")
        return val
    if kinds is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise SchemaError(f"{where}: '{key}' must be a number")
        return float(val)
    if kinds is str:
        if not isinstance(val, str):
            raise SchemaError(f"{where}: '{key}' must be a string")
        return val
    if kinds is list:
        if not isinstance(val, list):
            raise SchemaError(f"{where}: '{key}' must be an array")
        return val
    if kinds is dict:
        if not isinstance(val, dict):
            raise SchemaError(f"{where}: '{key}' must be an object")
        return val
    raise AssertionError(kinds)


def _parse_expr(src, where):
    if not isinstance(src, str):
        raise SchemaError(f"{where}: expected an expression string")
    try:
        return parse(src)
    except ExprSyntaxError as e:
        raise SchemaError(f"{where}: {e}") from e


def load_problem_doc(doc: dict) -> ProblemFile:
    """Validate a parsed JSON document into a spec plus runner options."""
    if not isinstance(doc, dict):
        raise SchemaError("problem file: top level must be an object")
    for key in doc:
        if key not in _TOP_KEYS:
            raise SchemaError(f"problem file: unknown key '{key}'")
    order = _want(doc, "order", int, "problem file")
    dim = _want(doc, "dim", int, "problem file")
    horizon = _want(doc, "horizon", float, "problem file")

    params = {}
    raw_params = _want(doc, "parameters", dict, "problem file", required=False, default={})
    for name, value in raw_params.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError(f"parameters['{name}']: must be a number")
        params[name] = float(value)

    raw_roots = _want(doc, "roots", list, "problem file")
    if len(raw_roots) != order:
        raise SchemaError(f"roots: expected {order} rows, got {len(raw_roots)}")
    roots = []
    for i, row in enumerate(raw_roots, start=1):
        if not isinstance(row, list):
            raise SchemaError(f"roots[{i}]: must be an array of expression strings")
        if len(row) != dim:
            raise SchemaError(f"roots[{i}]: expected {dim} components, got {len(row)}")
        roots.append(tuple(_parse_expr(c, f"roots[{i}][{j}]") for j, c in enumerate(row, start=1)))

    lower = {}
    raw_lower = _want(doc, "lower_order", list, "problem file", required=False, default=[])
    for idx, entry in enumerate(raw_lower, start=1):
        where = f"lower_order[{idx}]"
        if not isinstance(entry, dict):
            raise SchemaError(f"{where}: must be an object")
        for key in entry:
            if key not in {"dt", "dx", "coeff"}:
                raise SchemaError(f"{where}: unknown key '{key}'")
        dt = _want(entry, "dt", int, where)
        dx = _want(entry, "dx", list, where)
        if len(dx) != dim:
            raise SchemaError(f"{where}: dx length {len(dx)} != dim {dim}")
        for v in dx:
            if isinstance(v, bool) or not isinstance(v, int):
                raise SchemaError(f"{where}: dx entries must be integers")
        coeff = _parse_expr(_want(entry, "coeff", str, where), f"{where}.coeff")
        key = (dt, tuple(dx))
        if key in lower:
            raise SchemaError(f"{where}: duplicate entry for dt={dt}, dx={list(dx)}")
        lower[key] = coeff

    forcing = _parse_expr(doc["forcing"], "forcing") if "forcing" in doc else Num(0.0)
    data: Tuple = ()
    raw_data = _want(doc, "data", list, "problem file", required=False, default=[])
    if raw_data:
        if len(raw_data) != order:
            raise SchemaError(f"data: expected {order} entries, got {len(raw_data)}")
        data = tuple(_parse_expr(g, f"data[{k}]") for k, g in enumerate(raw_data, start=1))

    solver = SolverOptions()
    raw_solver = _want(doc, "solver", dict, "problem file", required=False, default=None)
    if raw_solver is not None:
        for key in raw_solver:
            if key not in _SOLVER_KEYS:
                raise SchemaError(f"solver: unknown key '{key}'")
        solver = SolverOptions(
            modes=_want(raw_solver, "modes", int, "solver", required=False, default=solver.modes),
            cfl=_want(raw_solver, "cfl", float, "solver", required=False, default=solver.cfl),
            sobolev_s=_want(raw_solver, "sobolev_s", float, "solver", required=False,
                            default=solver.sobolev_s),
            cadence=_want(raw_solver, "cadence", int, "solver", required=False,
                          default=solver.cadence),
            dealias=_want(raw_solver, "dealias", bool, "solver", required=False,
                          default=solver.dealias),
        )

    sweep = SweepOptions()
    raw_sweep = _want(doc, "sweep", dict, "problem file", required=False, default=None)
    if raw_sweep is not None:
        for key in raw_sweep:
            if key not in _SWEEP_KEYS:
                raise SchemaError(f"sweep: unknown key '{key}'")
        n_list = _want(raw_sweep, "n_list", list, "sweep", required=False,
                       default=list(sweep.n_list))
        for v in n_list:
            if isinstance(v, bool) or not isinstance(v, int):
                raise SchemaError("sweep: n_list entries must be integers")
        sweep = SweepOptions(
            n_list=tuple(n_list),
            mode_fraction=_want(raw_sweep, "mode_fraction", float, "sweep", required=False,
                                default=sweep.mode_fraction),
        )

    spec = rd.ProblemSpec(
        order=order,
        dim=dim,
        horizon=horizon,
        roots=tuple(roots),
        lower=lower,
        forcing=forcing,
        data=data,
        params=params,
    )
    rd.validate(spec)
    return ProblemFile(spec=spec, solver=solver, sweep=sweep)


def load_problem_file(path: str) -> ProblemFile:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise SchemaError(f"{path}: invalid JSON: {e}") from e
    return load_problem_doc(doc)


def load_problem(path: str) -> rd.ProblemSpec:
    return load_problem_file(path).spec


def serialize_problem(pf: ProblemFile) -> dict:
    """Canonical document: every key explicit, expressions re-printed."""
    spec = pf.spec
    lower = [
        {"dt": dt, "dx": list(beta), "coeff": to_source(coeff)}
        for (dt, beta), coeff in sorted(spec.lower.items())
    ]
    return {
        "order": spec.order,
        "dim": spec.dim,
        "horizon": spec.horizon,
        "parameters": {k: v for k, v in sorted(spec.params.items())},
        "roots": [[to_source(c) for c in row] for row in spec.roots],
        "lower_order": lower,
        "forcing": to_source(spec.forcing),
        "data": [to_source(g) for g in spec.data],
        "solver": {
            "modes": pf.solver.modes,
            "cfl": pf.solver.cfl,
            "sobolev_s": pf.solver.sobolev_s,
            "cadence": pf.solver.cadence,
            "dealias": pf.solver.dealias,
        },
        "sweep": {
            "n_list": list(pf.sweep.n_list),
            "mode_fraction": pf.sweep.mode_fraction,
        },
    }


def input_hash(pf: ProblemFile) -> str:
    blob = json.dumps(serialize_problem(pf), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# output helpers


def _g17(x: float) -> str:
    return "%.17g" % x


def _write_json(path: str, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_bundle(outdir, command, pf, seed, levi_report=None, oracle_reports=None,
                  run_csv=None, sweep_csv=None):
    bundle = {
        "tool_version": __version__,
        "command": command,
        "seed": seed,
        "input_hash": input_hash(pf),
        "levi_report": levi_report,
        "oracle_reports": oracle_reports,
        "run_csv": run_csv,
        "sweep_csv": sweep_csv,
    }
    _write_json(os.path.join(outdir, "bundle.json"), bundle)
    return bundle


def _emit(payload, as_json, human_lines):
    if as_json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for line in human_lines:
            print(line)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_check(pf, args, outdir):
    spec = pf.spec
    report = levi.check_main_theorem(spec)
    corollary = levi.check_corollary(spec)
    payload = {"main": report.to_dict(), "corollary": corollary.to_dict()}
    if spec.order == 2 and spec.dim == 1:
        payload["oleinik"] = levi.check_oleinik(spec).to_dict()
    _write_json(os.path.join(outdir, "check.json"), payload)
    _write_bundle(outdir, "check", pf, args.seed, levi_report=payload)

    lines = []
    for cond in report.conditions:
        lines.append(f"{cond.verdict.verdict:12s} {cond.cond_id}")
    lines.append(f"main criterion: {report.overall}")
    lines.append(f"corollary ({'applicable' if corollary.corollary_applicable else 'not applicable'}): "
                 f"{corollary.overall}")
    if "oleinik" in payload:
        ole = payload["oleinik"]
        if ole["applicable"]:
            lines.append(f"constant scan: {'feasible' if ole['feasible'] else 'infeasible'}")
        else:
            lines.append(f"constant scan: not applicable ({ole['reason']})")
    _emit(payload, args.json, lines)
    return {"PASS": 0, "FAIL": 1, "INCONCLUSIVE": 2}[report.overall]


def _matrix_debug(M):
    return [[sc.debug_str(entry) for entry in row] for row in M]


def _cmd_schur(pf, args, outdir):
    spec = pf.spec
    data = schur.build_schur(rd.root_symbols(spec))
    payload = {
        "T": _matrix_debug(data.T),
        "Tinv": _matrix_debug(data.Tinv),
        "J": _matrix_debug(data.J),
    }
    _write_json(os.path.join(outdir, "schur.json"), payload)
    _write_bundle(outdir, "schur", pf, args.seed)
    lines = []
    for name in ("T", "Tinv", "J"):
        lines.append(f"{name}:")
        for i, row in enumerate(payload[name]):
            for j, entry in enumerate(row):
                if entry != "0":
                    lines.append(f"  [{i + 1},{j + 1}] {entry}")
    _emit(payload, args.json, lines)
    return 0


def _cmd_solve(pf, args, outdir):
    spec = pf.spec
    opts = pf.solver
    grid = sp.TorusGrid(spec.dim, opts.modes)
    run = sp.solve(spec, grid, s=opts.sobolev_s, cfl=opts.cfl,
                   cadence=opts.cadence, dealias=opts.dealias)
    m = spec.order
    csv_path = os.path.join(outdir, "solve.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        header = ",".join(["t"] + [f"norm_c{k + 1}" for k in range(m)] + ["aniso"])
        fh.write(header + "\n")
        for i, t in enumerate(run.times):
            row = [_g17(t)] + [_g17(v) for v in run.comp_norms[i]] + [_g17(run.aniso[i])]
            fh.write(",".join(row) + "\n")
    from . import plots

    fig_path = os.path.join(outdir, "solve.png")
    plots.plot_run(run, fig_path)
    _write_bundle(outdir, "solve", pf, args.seed, run_csv="solve.csv")
    payload = {
        "dt": run.dt,
        "steps": run.steps,
        "snapshots": len(run.times),
        "final_aniso": run.aniso[-1],
        "blowup_time": run.blowup_time,
        "csv": "solve.csv",
        "figure": "solve.png",
    }
    lines = [
        f"integrated {run.steps} steps, dt={run.dt:.6g}",
        f"final anisotropic norm {run.aniso[-1]:.6g}",
    ]
    if run.blowup_time is not None:
        lines.append(f"run halted: non-finite field at t={run.blowup_time:.6g}")
    lines.append(f"wrote {csv_path} and {fig_path}")
    _emit(payload, args.json, lines)
    return 0


def _cmd_sweep(pf, args, outdir):
    spec = pf.spec
    out = sp.frequency_sweep(spec, pf.solver.sobolev_s, pf.sweep.n_list,
                             mode_fraction=pf.sweep.mode_fraction,
                             cfl=pf.solver.cfl, dealias=pf.solver.dealias)
    csv_path = os.path.join(outdir, "sweep.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("N,rho,fitted_q\n")
        for N, rho in zip(out.n_values, out.rho):
            fh.write(f"{N},{_g17(rho)},{_g17(out.fitted_q)}\n")
    from . import plots

    fig_path = os.path.join(outdir, "sweep.png")
    plots.plot_sweep(out, fig_path)
    _write_bundle(outdir, "sweep", pf, args.seed, sweep_csv="sweep.csv")
    payload = {
        "n_values": list(out.n_values),
        "rho": list(out.rho),
        "fitted_q": out.fitted_q,
        "csv": "sweep.csv",
        "figure": "sweep.png",
    }
    lines = [f"N={N:5d}  rho={rho:.6g}" for N, rho in zip(out.n_values, out.rho)]
    lines.append(f"fitted growth exponent q={out.fitted_q:.4f}")
    lines.append(f"wrote {csv_path} and {fig_path}")
    _emit(payload, args.json, lines)
    return 0


def _cmd_verify(pf, args, outdir):
    reports = oracle.verify_all(pf.spec, seed=args.seed)
    payload = [r.to_dict() for r in reports]
    _write_json(os.path.join(outdir, "verify.json"), payload)
    _write_bundle(outdir, "verify", pf, args.seed, oracle_reports=payload)
    lines = []
    for r in reports:
        status = "PASS" if r.passed else "FAIL"
        extra = f" ({r.note})" if r.note else ""
        lines.append(f"{status} {r.name}: max_dev={r.max_dev:.3e} tol={r.tol:.0e} "
                     f"samples={r.samples}{extra}")
    _emit(payload, args.json, lines)
    return 0


_COMMANDS = {
    "check": _cmd_check,
    "schur": _cmd_schur,
    "solve": _cmd_solve,
    "sweep": _cmd_sweep,
    "verify": _cmd_verify,
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser():
    parser = _Parser(prog="levichk", usage=USAGE, add_help=True)
    sub = parser.add_subparsers(dest="command")
    for name in _COMMANDS:
        p = sub.add_parser(name, usage=USAGE)
        p.add_argument("problem")
        p.add_argument("--out", default=None)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--json", action="store_true")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(f"usage: {USAGE}", file=sys.stderr)
        print(f"error: {e}", file=sys.stderr)
        return 64
    if args.command is None:
        print(f"usage: {USAGE}", file=sys.stderr)
        return 64
    outdir = args.out or os.environ.get("LEVICHK_OUT") or "./out"
    try:
        pf = load_problem_file(args.problem)
        os.makedirs(outdir, exist_ok=True)
        return _COMMANDS[args.command](pf, args, outdir)
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
