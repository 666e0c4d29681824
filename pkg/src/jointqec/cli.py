"""Command line interface.

Exit codes: 0 success, 1 usage or input error, 2 Heisenberg scaling not
achievable, 3 solver failure, 4 a supplied code fails verification.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import run_benchmark
from .codes import CodeError, covariance_check, derive_measurement, protocol_cost, verify_qec
from .jnt import HnlsViolation, SolverFailure
from .lindblad import build_lindblad_span, check_hnls
from .models import BUILTINS, ModelFormatError, builtin_model, load_code, parse_builtin_spec, resolve_model, save_code
from .protocol import synthesize_protocol
from .sep import DEFAULT_RESTARTS, DEFAULT_SEED, SepError, bounds, optimize_sep_transform

EXIT_OK, EXIT_USAGE, EXIT_NOT_HS, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2, 3, 4

log = logging.getLogger("jointqec")


def _g(v) -> str:
    return f"{v:.12g}"


def _csv_paths(out: str) -> tuple[Path, Path]:
    p = Path(out)
    base = p.with_suffix("") if p.suffix == ".csv" else p
    return base.with_suffix(".csv"), Path(str(base) + ".code.json")


def _print_matrix(name: str, m: np.ndarray) -> None:
    print(f"{name}:")
    for row in np.atleast_2d(m):
        print("  " + "  ".join(f"{v: .6g}" for v in row))


def cmd_hnls(args) -> int:
    model = resolve_model(args.model)
    v = check_hnls(model)
    print(f"model: {model.name or args.model}  d={model.dim}  P={model.n_params}")
    print(f"lindblad span dimension: {v.span.size}")
    print(f"projected rank: {v.projected_rank} of {model.n_params}")
    print(f"smallest singular value: {v.smallest_singular_value:.6g}")
    print(f"Heisenberg scaling achievable: {'yes' if v.achievable else 'no'}")
    return EXIT_OK if v.achievable else EXIT_NOT_HS


def cmd_jnt(args) -> int:
    model = resolve_model(args.model)
    tol = args.tol if args.tol is not None else model.metadata.get("options", {}).get("tol", 1e-8)
    jp = synthesize_protocol(model, tol=tol)
    sol = jp.solution
    cov = jp.covariance
    print(f"model: {model.name or args.model}  d={model.dim}  P={model.n_params}  T={model.time:g}")
    print(f"optimal joint cost Tr(W Sigma): {_g(sol.cost)}")
    print(f"  code evaluation of the cost:  {_g(jp.code_cost)}")
    print(f"  sdp: {sol.sdp.solver}, {sol.sdp.iterations} iterations, gap {sol.sdp.duality_gap:.2e}, "
          f"violation {sol.sdp.max_constraint_violation:.2e}")
    print(f"code: {jp.code.n_states} states, ancilla dimension {jp.code.layout.dim_ancilla}, "
          f"QEC residual {jp.qec.max_residual:.2e}")
    res = jp.protocol.measurement_residuals()
    print(f"measurement: {jp.protocol.n_outcomes} outcomes, orthogonality residual {res['orthogonality']:.2e}")
    print(f"unbiasedness residuals: bias {cov.bias_residual:.2e}, derivative {cov.derivative_residual:.2e}")
    _print_matrix("covariance Sigma", cov.sigma)
    if args.out:
        csv_path, code_path = _csv_paths(args.out)
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["parameter", "variance", "weight", "weighted_variance"])
            for i in range(model.n_params):
                wi = model.cost_matrix[i, i]
                w.writerow([i, _g(cov.sigma[i, i]), _g(wi), _g(wi * cov.sigma[i, i])])
        save_code(code_path, jp.code, jp.protocol, {"cost": sol.cost, "model": model.name})
        print(f"wrote {csv_path} and {code_path}")
    return EXIT_OK


def cmd_sep(args) -> int:
    model = resolve_model(args.model)
    opts = model.metadata.get("options", {})
    restarts = args.restarts if args.restarts is not None else opts.get("restarts", DEFAULT_RESTARTS)
    seed = args.seed if args.seed is not None else opts.get("seed", DEFAULT_SEED)
    sol = optimize_sep_transform(model, restarts=restarts, seed=seed)
    b = bounds(model, restarts=restarts, seed=seed)
    print(f"model: {model.name or args.model}  d={model.dim}  P={model.n_params}  T={model.time:g}")
    print(f"best-found separate cost: {_g(sol.cost)}  (A = I: {_g(sol.identity_cost)})")
    print(f"  restarts {restarts}, seed {seed}, best restart {sol.diagnostics['best_restart']}")
    print("  F_i: " + " ".join(_g(f) for f in sol.fishers))
    print("  p_i: " + " ".join(_g(p) for p in sol.weights))
    _print_matrix("transform A (unit rows)", sol.transform)
    print("single generator spreads: " + " ".join(_g(s) for s in b.spreads))
    print(f"best-found max spread: {_g(b.max_spread)}  (certified upper bound {_g(b.certified_max_spread)})")
    if b.sep_lower_bound is None:
        print("spread and QFI bounds: skipped (cost matrix is not the identity)")
    else:
        print(f"separate lower bound (best-found spread): {_g(b.sep_lower_bound)}")
        print(f"separate lower bound (certified):         {_g(b.sep_lower_bound_certified)}")
        print(f"joint lower bound from single spreads:    {_g(b.jnt_lower_bound)}")
        print(f"QFI trace bound:                          {_g(b.qfi_trace_bound)}")
    if args.out:
        csv_path, _ = _csv_paths(args.out)
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["parameter", "fisher", "weight"] + [f"a{k}" for k in range(model.n_params)])
            for i in range(model.n_params):
                w.writerow([i, _g(sol.fishers[i]), _g(sol.weights[i])] + [_g(v) for v in sol.transform[i]])
        print(f"wrote {csv_path}")
    return EXIT_OK


def cmd_verify(args) -> int:
    model = resolve_model(args.model)
    code = load_code(args.code)
    if code.layout.dim_system != model.dim:
        print(f"error: code system dimension {code.layout.dim_system} != model dimension {model.dim}", file=sys.stderr)
        return EXIT_USAGE
    span = build_lindblad_span(model.dim, model.strong_lindblads)
    ortho = code.orthonormality_residual()
    qec = verify_qec(code, span, args.tol)
    print(f"code: {code.n_states} states, ancilla dimension {code.layout.dim_ancilla}")
    print(f"orthonormality residual: {ortho:.3e}")
    print(f"QEC residual: {qec.max_residual:.3e}  ({'pass' if qec.passed else 'FAIL'} at {args.tol:g})")
    ok = qec.passed and ortho <= args.tol
    try:
        pc = protocol_cost(code, model.generators, model.cost_matrix, model.time)
        protocol = derive_measurement(code, pc.d_matrix, model.cost_matrix)
        cov = covariance_check(protocol, model.generators, model.cost_matrix, model.time)
    except CodeError as exc:
        print(f"protocol: {exc}")
        return EXIT_VERIFY
    print(f"protocol cost Tr(W (D^T D)^-1): {_g(pc.cost)}")
    print(f"estimator covariance cost:      {_g(cov.cost)}")
    print(f"unbiasedness residuals: bias {cov.bias_residual:.2e}, derivative {cov.derivative_residual:.2e}")
    ok = ok and cov.unbiased
    print("verdict: " + ("valid" if ok else "INVALID"))
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_bench(args) -> int:
    if args.dmin < 3 or args.dmax < args.dmin:
        print("error: need 3 <= dmin <= dmax", file=sys.stderr)
        return EXIT_USAGE
    res = run_benchmark(range(args.dmin, args.dmax + 1), args.out, tol=args.tol)
    print(f"{'d':>3} {'P':>4} {'jnt_cost':>14} {'sep_line':>10} {'P^1.5/4':>10} {'d(d^2-1)/4':>11} "
          f"{'qfi_bound':>11} {'appendixD':>11} order")
    for r in res.rows:
        print(f"{r.d:>3} {r.p:>4} {r.jnt_cost:>14.8g} {r.sep_line:>10.6g} {r.noiseless_line:>10.6g} "
              f"{r.noiseless_full_set:>11.6g} {r.qfi_trace_bound:>11.6g} {r.appendix_d_cost:>11.6g} "
              f"{'ok' if r.ordering_ok else 'VIOLATED'}" + ("" if r.status == "ok" else f"  [{r.status}]"))
    print(f"log-log slope of jnt_cost vs P: {res.slope:.4f}")
    for f in res.files:
        print(f"wrote {f}")
    if any(r.status != "ok" for r in res.rows):
        return EXIT_SOLVER
    return EXIT_OK if res.ordering_ok else EXIT_VERIFY


def cmd_show(args) -> int:
    name, params = parse_builtin_spec(args.name)
    model = builtin_model(name, **params)
    print(f"model: {name} {params if params else ''}".rstrip())
    print(f"d={model.dim}  P={model.n_params}  T={model.time:g}")
    print(f"strong Lindblad operators: {len(model.strong_lindblads)}, weak: {len(model.weak_lindblads)}")
    span = build_lindblad_span(model.dim, model.strong_lindblads)
    print(f"lindblad span dimension: {span.size}")
    _print_matrix("cost matrix W", model.cost_matrix)
    if args.json:
        from .models import model_to_dict
        import json
        print(json.dumps(model_to_dict(model), indent=1))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="jointqec", description="Joint error-corrected multi-parameter estimation.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)
    model_help = "model file or builtin spec such as su_d_jz:3"

    p = sub.add_parser("hnls", help="decide whether Heisenberg scaling is achievable")
    p.add_argument("model", help=model_help)
    p.set_defaults(func=cmd_hnls)

    p = sub.add_parser("jnt", help="optimal joint protocol")
    p.add_argument("model", help=model_help)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--out", help="CSV path; the code artifact goes next to it as .code.json")
    p.set_defaults(func=cmd_jnt)

    p = sub.add_parser("sep", help="best-found separate protocol and lower bounds")
    p.add_argument("model", help=model_help)
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sep)

    p = sub.add_parser("verify", help="check a code artifact against a model")
    p.add_argument("model", help=model_help)
    p.add_argument("code", help="code artifact (.code.json)")
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench-sud", help="SU(d) generators under J_z noise")
    p.add_argument("--dmin", type=int, default=3)
    p.add_argument("--dmax", type=int, default=5)
    p.add_argument("--out")
    p.add_argument("--tol", type=float, default=1e-7)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("show", help="describe a builtin model")
    p.add_argument("name", help=f"one of {', '.join(BUILTINS)}, optionally with parameters (name:1,key=v)")
    p.add_argument("--json", action="store_true", help="also print the model file")
    p.set_defaults(func=cmd_show)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (HnlsViolation, SepError) as exc:
        print(f"not achievable: {exc}", file=sys.stderr)
        return EXIT_NOT_HS
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except CodeError as exc:
        print(f"code construction failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ModelFormatError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
