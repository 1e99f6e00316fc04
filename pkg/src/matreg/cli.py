"""Command-line entry point: ``matreg <command> [options]``.

Exit codes: 0 on success, 1 on a usage error or invalid input, 2 when the
computation or file handling fails.
"""

import argparse
import json
import sys
from dataclasses import replace

from . import harness, lowerbound, reglab
from .errors import ContractViolation, MatregError
from .io import load_matrix, save_matrix
from .matcore import norm_report
from .randgen import sample_matrix

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser():
    p = _Parser(prog="matreg", description="Norm regularization of heavy-tailed random matrices.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seed=True, fmt=True, budget=False):
        if seed:
            sp.add_argument("--seed", type=int, default=0)
        if fmt:
            sp.add_argument("--format", choices=("csv", "json"), default=None)
        if budget:
            sp.add_argument("--budget-iters", type=int, default=reglab.Budgets.gp_iters,
                            help="mirror-descent iterations for the Pietsch weights")

    g = sub.add_parser("gen", help="sample a random matrix")
    g.add_argument("--spec", required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--out", required=True)
    common(g, fmt=False)

    nr = sub.add_parser("norms", help="print the norm report of a matrix file")
    nr.add_argument("path")
    nr.add_argument("--restarts", type=int, default=10)
    common(nr)

    rg = sub.add_parser("regularize", help="zero one submatrix to shrink the operator norm")
    rg.add_argument("path")
    rg.add_argument("--eps", type=float, required=True)
    rg.add_argument("--out", required=True)
    rg.add_argument("--report", help="JSON report path (default: <out>.json)")
    common(rg, fmt=False, budget=True)

    tr = sub.add_parser("truncate", help="zero every entry above n^(1/2 - eps/8)")
    tr.add_argument("path")
    tr.add_argument("--eps", type=float, required=True, help="moment exponent: 2 + eps moments")
    tr.add_argument("--out", required=True)

    ce = sub.add_parser("certify", help="lower-bound certificates")
    ce.add_argument("path", nargs="?")
    ce.add_argument("--kind", choices=("optimality", "mean_sum", "frobenius", "min_submatrix"),
                    default="optimality")
    ce.add_argument("--n", type=int)
    ce.add_argument("--eps", type=float)
    common(ce, fmt=False)

    ex = sub.add_parser("experiment", help="run an experiment grid and write CSV or JSON")
    ex.add_argument("--experiment", choices=harness.EXPERIMENTS, required=True)
    ex.add_argument("--spec")
    ex.add_argument("--n", type=_int_list)
    ex.add_argument("--eps", type=_float_list)
    ex.add_argument("--trials", type=int)
    ex.add_argument("--out")
    ex.add_argument("--timing", action="store_true", help="add a wall_time_ms column (breaks byte-identity)")
    common(ex, budget=True)
    return p


def _emit(obj, fmt):
    if fmt == "csv":
        for key, value in obj.items():
            print(f"{key},{json.dumps(value) if isinstance(value, (dict, list)) else value}")
    else:
        print(json.dumps(obj, indent=2, sort_keys=True))


def _cmd_gen(a):
    save_matrix(sample_matrix(a.spec, a.n, a.seed), a.out)


def _cmd_norms(a):
    A = load_matrix(a.path)
    report = norm_report(A, restarts=a.restarts, seed=a.seed)
    _emit(report.to_dict(), a.format)


def _budgets(a):
    return replace(reglab.Budgets(), gp_iters=a.budget_iters)


def _cmd_regularize(a):
    A = load_matrix(a.path)
    Atilde, report = reglab.regularize_full(A, a.eps, budgets=_budgets(a), seed=a.seed)
    save_matrix(Atilde, a.out)
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True)
    with open(a.report or f"{a.out}.json", "w") as fh:
        fh.write(text + "\n")
    print(text)


def _cmd_truncate(a):
    res = reglab.topk_truncate(load_matrix(a.path), a.eps)
    save_matrix(res.Atilde, a.out)
    _emit({"K_actual": res.K_actual, "K_budget": res.K_budget, "R": res.R, "within_budget": res.within_budget},
          "json")


def _cmd_certify(a):
    if a.kind == "optimality":
        if a.n is None or a.eps is None:
            raise UsageError("certify --kind optimality needs --n and --eps")
        cert = lowerbound.optimality_witness(a.n, a.eps, a.seed)
    else:
        if a.path is None:
            raise UsageError(f"certify --kind {a.kind} needs a matrix path")
        A = load_matrix(a.path)
        if a.kind == "min_submatrix":
            if a.eps is None:
                raise UsageError("certify --kind min_submatrix needs --eps")
            cert = lowerbound.min_submatrix_frobenius_lower(A, a.eps)
        else:
            func = lowerbound.mean_sum_lower if a.kind == "mean_sum" else lowerbound.frobenius_lower
            # mean_sum can be negative; the certificate carries the trivial bound 0 then
            value = func(A)
            cert = lowerbound.LowerBoundCertificate(a.kind, max(value, 0.0), {"raw": value, "m": A.shape[0]})
    _emit(cert.to_dict(), "json")


def _cmd_experiment(a):
    overrides = {"master_seed": a.seed, "budgets": _budgets(a), "output_path": a.out}
    for key, value in (("spec", a.spec), ("n_list", a.n), ("eps_list", a.eps), ("trials", a.trials)):
        if value is not None:
            overrides[key] = value
    cfg = harness.ExperimentConfig.default(a.experiment, **overrides)
    rows = harness.run_experiment(cfg)
    if a.format == "json":
        text = json.dumps(harness.to_json(rows, cfg.experiment), indent=2, sort_keys=True) + "\n"
        if a.out:
            with open(a.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    elif a.out:
        harness.write_csv(rows, cfg.experiment, a.out, timing=a.timing)
    else:
        sys.stdout.write(harness.to_csv(rows, cfg.experiment, timing=a.timing))


COMMANDS = {
    "gen": _cmd_gen,
    "norms": _cmd_norms,
    "regularize": _cmd_regularize,
    "truncate": _cmd_truncate,
    "certify": _cmd_certify,
    "experiment": _cmd_experiment,
}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except ContractViolation as exc:
        print(f"matreg: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MatregError, OSError, ValueError) as exc:
        print(f"matreg: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cli(argv=None):
    return main(argv)
