"""Command-line front end.

Exit codes
----------
0  success
1  other numerical failure (singular matrix, reducible chain, ...)
2  invalid model file or arguments
3  model is not ergodic
4  iteration did not converge
5  requested truncation is too large
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import analysis, oracle
from .errors import CapacityExceeded, ModelError, NoConvergence, NotErgodic, QsfError
from .finite import POLICIES, solve_finite
from .model import BatchService, QueueModel, model_from_dict, model_to_dict
from .product import Method, stationary_distribution

EXIT_OK, EXIT_FAILURE, EXIT_SCHEMA, EXIT_NOT_ERGODIC, EXIT_NO_CONVERGENCE, EXIT_CAPACITY = 0, 1, 2, 3, 4, 5

CSV_HELP = """CSV columns
  solve        quantity,value  (gamma, alpha_i, pi00, boundary_i, L, W, V)
  finite       m,i,pi
  sweep        k,lambda_k,gamma,alpha,pi0,L,W,V  (verdicts as JSON on stderr)
  table1/2     q,k,gamma,alpha,approx_zero  (4 decimals; approx_zero=1 when gamma < 5e-5)
  dm1          m,pi
  oracle-check section,quantity,value
"""


def load_model(path: str) -> QueueModel:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ModelError("model", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ModelError("model", f"{path} is not valid JSON: {exc.msg} (line {exc.lineno})") from None
    return model_from_dict(doc)


def _num(x: float) -> str:
    """Full-precision, platform-independent float text."""
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return repr(float(x))


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return None if math.isnan(x) else x
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _gamma_kwargs(args) -> dict:
    kw = {"tol": args.tol, "gamma0": args.gamma0, "method": args.method}
    if args.max_iter is not None:
        kw["max_iter"] = args.max_iter
    return kw


# ---------------------------------------------------------------------------
# Commands: each returns (json_payload, csv_text)
# ---------------------------------------------------------------------------

def cmd_solve(args):
    model = load_model(args.model)
    dist = stationary_distribution(model, **_gamma_kwargs(args))
    m = analysis.metrics(model, dist.solution)
    payload = {
        "model": model_to_dict(model),
        "gamma": dist.gamma,
        "alphas": dist.solution.alphas,
        "pi00": dist.pi00,
        "pi10": dist.pi10,
        "boundary": dist.boundary,
        "L": m.L, "W": m.W, "V": m.V,
        "iterations": dist.solution.iterations,
        "residual": dist.solution.residual,
    }
    rows = [("gamma", _num(dist.gamma))]
    rows += [(f"alpha_{i + 1}", _num(a)) for i, a in enumerate(dist.solution.alphas)]
    rows += [("pi00", _num(dist.pi00))]
    rows += [(f"boundary_{i}", _num(p)) for i, p in enumerate(dist.boundary)]
    rows += [("L", _num(m.L)), ("W", _num(m.W)), ("V", _num(m.V))]
    return payload, _csv(rows, ("quantity", "value"))


def cmd_finite(args):
    model = load_model(args.model)
    sol = solve_finite(model, args.capacity, args.policy)
    Q = oracle.queue_transitions(model, args.capacity, args.policy).dense()
    residual = float(np.max(np.abs(sol.pi.ravel() @ Q)))
    payload = {"model": model_to_dict(model), **sol.to_dict(), "balance_residual": residual}
    rows = [(m, i, _num(sol.pi[m, i])) for m in range(sol.S + 1) for i in range(sol.pi.shape[1])]
    return payload, _csv(rows, ("m", "i", "pi"))


def _service_arg(args) -> BatchService:
    if args.model:
        return load_model(args.model).service
    return BatchService(args.mu, tuple(args.p))


def _int_list(text: str) -> list[int]:
    try:
        ks = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not ks or min(ks) < 1:
        raise argparse.ArgumentTypeError("orders must be positive integers")
    return ks


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def cmd_sweep(args):
    service = _service_arg(args)
    res = analysis.monotonicity_sweep(args.lambda_star, args.q, args.ks, service, **_gamma_kwargs(args))
    payload = {"rows": [r.to_dict() for r in res.rows], **res.summary()}
    rows = [(r.k, _num(r.lambda_k), _num(r.gamma), _num(r.alpha), _num(r.pi0_bar), _num(r.L), _num(r.W), _num(r.V))
            for r in res.rows]
    text = _csv(rows, ("k", "lambda_k", "gamma", "alpha", "pi0", "L", "W", "V"))
    return payload, text, res.summary()


def _table(cells):
    payload = [{"q": c.q, "k": c.k, "gamma": c.gamma, "alpha": c.alpha, "approx_zero": c.approx_zero}
               for c in cells]
    rows = []
    for c in cells:
        k = "inf" if c.k == math.inf else str(int(c.k))
        gamma = 0.0 if c.approx_zero else c.gamma
        rows.append((f"{c.q:.1f}", k, f"{gamma:.4f}", f"{c.alpha:.4f}", int(c.approx_zero)))
    return payload, _csv(rows, ("q", "k", "gamma", "alpha", "approx_zero"))


def cmd_table1(args):
    return _table(analysis.table1(**_gamma_kwargs(args)))


def cmd_table2(args):
    return _table(analysis.table2(**_gamma_kwargs(args)))


def cmd_dm1(args):
    if args.model:
        model = load_model(args.model)
        rho, service = model.rho, model.service
    else:
        if args.rho is None:
            raise ModelError("rho", "give --rho or --model")
        rho, service = args.rho, BatchService(args.mu, tuple(args.p))
    law = analysis.dm1_distribution(rho, service)
    payload = law.to_dict(args.levels)
    rows = [(m, _num(p)) for m, p in enumerate(law.head(args.levels))]
    return payload, _csv(rows, ("m", "pi"))


def cmd_oracle_check(args):
    model = load_model(args.model)
    report = oracle.compare_with_product_form(model, args.cap, args.max_level)
    rng = np.random.default_rng(args.seed)
    cens, series = [], []
    for n in range(2, 9):
        q = oracle.random_transient_generator(n, rng)
        for s in range(n):
            r = oracle.censoring_identity_check(q, s)
            cens.append(max(r.restricted_error, r.row_error))
        n_terms = oracle.terms_for_tolerance(q, 1e-12)
        series.append(oracle.sojourn_series_check(q, n_terms).max_error)
    payload = {
        "product_form": report.to_dict(),
        "censoring_max_error": max(cens),
        "sojourn_series_max_error": max(series),
        "seed": args.seed,
    }
    if args.capacity:
        fin = solve_finite(model, args.capacity)
        ref = oracle.oracle_stationary(model, args.capacity)
        payload["finite_capacity"] = {"S": args.capacity, "max_abs_error": float(np.max(np.abs(fin.pi - ref)))}
    rows = [("product_form", key, _num(val) if isinstance(val, float) else val)
            for key, val in report.to_dict().items()]
    rows += [("censoring", "max_error", _num(payload["censoring_max_error"])),
             ("sojourn_series", "max_error", _num(payload["sojourn_series_max_error"]))]
    if "finite_capacity" in payload:
        rows.append(("finite_capacity", "max_abs_error", _num(payload["finite_capacity"]["max_abs_error"])))
    return payload, _csv(rows, ("section", "quantity", "value"))


COMMANDS = {
    "solve": cmd_solve,
    "finite": cmd_finite,
    "sweep": cmd_sweep,
    "table1": cmd_table1,
    "table2": cmd_table2,
    "dm1": cmd_dm1,
    "oracle-check": cmd_oracle_check,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=1e-12, help="fixpoint tolerance (default 1e-12)")
    common.add_argument("--max-iter", type=int, default=None, help="iteration cap")
    common.add_argument("--gamma0", type=float, default=0.5, help="initial level factor in (0, 1)")
    common.add_argument("--method", choices=[m.value for m in Method], default=Method.FIXED_POINT.value)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--out", default=None, help="write output here instead of stdout")

    svc = argparse.ArgumentParser(add_help=False)
    svc.add_argument("--mu", type=float, default=analysis.TABLE_MU, help="service rate (without --model)")
    svc.add_argument("--p", type=_float_list, default=list(analysis.TABLE_PMF),
                     help="batch-size pmf, comma separated (without --model)")

    parser = argparse.ArgumentParser(
        prog="qsfqueue", description="Stationary analysis of Cox(k)/M^Y/1 queues.",
        epilog=CSV_HELP + "\nExit codes: 0 ok, 1 numerical failure, 2 bad input, 3 not ergodic, "
                          "4 no convergence, 5 truncation too large.",
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="level factor, boundary law and L, W, V")
    p.add_argument("--model", required=True)

    p = sub.add_parser("finite", parents=[common], help="finite-capacity stationary law")
    p.add_argument("--model", required=True)
    p.add_argument("--capacity", "-S", type=int, required=True)
    p.add_argument("--policy", choices=POLICIES, default="loss",
                   help="top level rule: loss (arrival lost, clock restarts) or printed (last phase waits)")

    p = sub.add_parser("sweep", parents=[common, svc], help="calibrated family over k with monotonicity verdicts")
    p.add_argument("--model", default=None, help="take the service law from this model file")
    p.add_argument("--lambda-star", type=float, default=analysis.TABLE_LAMBDA)
    p.add_argument("--q", type=float, default=1.0)
    p.add_argument("--ks", type=_int_list, default=list(range(1, 51)), help="comma-separated orders")

    for name, text in (("table1", "Table 1 grid (fixed phase rate)"), ("table2", "Table 2 grid (fixed mean)")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.set_defaults(gamma0=analysis.TABLE_GAMMA0)

    p = sub.add_parser("dm1", parents=[common, svc], help="D/M^Y/1 reference law and sigma")
    p.add_argument("--model", default=None, help="take rho and the service law from this model file")
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--levels", type=int, default=10)

    p = sub.add_parser("oracle-check", parents=[common], help="compare with the truncated-chain oracle")
    p.add_argument("--model", required=True)
    p.add_argument("--cap", type=int, default=300)
    p.add_argument("--max-level", type=int, default=100)
    p.add_argument("--capacity", type=int, default=None, help="also check the finite-capacity solver")
    p.add_argument("--seed", type=int, default=0)
    return parser


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.tol <= 0:
        parser.error("--tol must be positive")
    if not 0.0 < args.gamma0 < 1.0:
        parser.error("--gamma0 must lie in (0, 1)")
    if getattr(args, "cap", 1) < 1:
        parser.error("--cap must be >= 1")
    try:
        result = COMMANDS[args.command](args)
    except ModelError as exc:
        print(f"error: invalid model: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except NotErgodic as exc:
        print(f"error: not ergodic: {exc}", file=sys.stderr)
        return EXIT_NOT_ERGODIC
    except NoConvergence as exc:
        print(f"error: no convergence: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except CapacityExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (QsfError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    payload, text = result[0], result[1]
    if args.format == "json":
        _emit(json.dumps(_json_safe(payload), indent=2, sort_keys=True) + "\n", args.out)
    else:
        _emit(text, args.out)
        if len(result) > 2:
            print(json.dumps(_json_safe(result[2]), sort_keys=True), file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
