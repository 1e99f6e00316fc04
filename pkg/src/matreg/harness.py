"""Experiment drivers and CSV output.

Each experiment is a grid of ``(n, eps)`` cells with ``trials`` runs per cell.
A run is a pure function of its derived seed, so trials can be farmed out to
worker processes in any order and the sorted output is the same.
"""

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import lowerbound, reglab
from .errors import ContractViolation, MatregError
from .matcore import op_norm
from .randgen import format_spec, parse_spec, sample_matrix
from .seeding import check_seed, derive_seed

EXPERIMENTS = ("scaling", "optimality", "global", "twoplus", "bernoulli")
THREADS_ENV = "MATREG_THREADS"

METRICS = {
    "scaling": ("op_before", "op_after", "norm_ratio", "fitted_ratio", "mask_rows", "mask_cols", "mask_cap",
                "within_cap", "moderate_entries", "large_entries", "damping_cols", "damping_rows", "gp_cols",
                "gp_rows", "mean_shift_norm"),
    "bernoulli": ("op_before", "op_after", "norm_ratio", "log_ratio", "mask_rows", "mask_cols", "mask_cap",
                  "within_cap", "moderate_entries", "moderate_schur_after", "moderate_schur_cap"),
    "optimality": ("certified_bound", "conclusive", "nonzeros", "nonzero_rows", "nonzero_cols", "bound_over_sqrt_n"),
    "global": ("min_submatrix_frobenius_lower", "frobenius_lower", "mean_sum_lower", "min_sub_over_sqrt_n",
               "frobenius_over_sqrt_n", "mean_sum_over_sqrt_n"),
    "twoplus": ("K_actual", "K_budget", "within_budget", "R", "op_before", "op_after", "op_after_over_sqrt_n"),
}

DEFAULTS = {
    "scaling": ("pareto_sym:alpha=2.05", [1024], [0.02, 0.05, 0.1, 0.2, 0.3], 30),
    "bernoulli": ("sparse_sign:p=0.002", [1024], [0.05, 0.1, 0.2], 10),
    "optimality": ("sparse_sign", [2000], [0.05], 50),
    "global": ("pareto_sym:alpha=1.5", [256, 2048], [0.1], 50),
    # for twoplus the eps column carries the moment exponent of 2 + eps moments
    "twoplus": ("pareto_sym:alpha=3.5,moment=3", [2000], [1.0], 50),
}

_EPS_RANGE = {
    "scaling": (0.0, 0.5),
    "bernoulli": (0.0, 0.5),
    "optimality": (0.0, 1.0 - 1e-12),
    "global": (0.0, 1.0 - 1e-12),
    "twoplus": (0.0, 1.0),
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    spec: str
    n_list: tuple
    eps_list: tuple
    trials: int
    master_seed: int = 0
    budgets: reglab.Budgets = field(default_factory=reglab.Budgets)
    output_path: str = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ContractViolation(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        object.__setattr__(self, "spec", format_spec(parse_spec(self.spec)))
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        object.__setattr__(self, "eps_list", tuple(float(e) for e in self.eps_list))
        check_seed(self.master_seed)
        if self.trials < 1:
            raise ContractViolation("trials must be >= 1")
        if not self.n_list or min(self.n_list) < 2:
            raise ContractViolation("n_list needs at least one size >= 2")
        lo, hi = _EPS_RANGE[self.experiment]
        for eps in self.eps_list:
            if not lo < eps <= hi:
                raise ContractViolation(f"eps = {eps} outside ({lo}, {hi}] for experiment {self.experiment}")
        if not self.eps_list:
            raise ContractViolation("eps_list is empty")

    @classmethod
    def default(cls, experiment, **overrides):
        if experiment not in DEFAULTS:
            raise ContractViolation(f"unknown experiment {experiment!r}; expected one of {EXPERIMENTS}")
        spec, n_list, eps_list, trials = DEFAULTS[experiment]
        base = cls(experiment, spec, tuple(n_list), tuple(eps_list), trials)
        return replace(base, **overrides)


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    n: int
    eps: float
    trial: int
    seed: int
    success: bool
    failures: str
    metrics: dict
    wall_time_ms: float = 0.0

    @property
    def key(self):
        return (self.n, self.eps, self.trial)


def trial_seed(master_seed, n, trial):
    """Seed of trial ``trial`` at size ``n``; shared by every eps cell so the grid compares like with like."""
    return derive_seed(master_seed, n, trial)


def run_trial(experiment, spec, n, eps, seed, budgets=None):
    """Metrics and failure list for one run; depends on nothing but its arguments."""
    budgets = budgets or reglab.Budgets()
    sqrt_n = math.sqrt(n)
    if experiment == "optimality":
        cert = lowerbound.optimality_witness(n, eps, seed)
        d = cert.details
        return {
            "certified_bound": cert.value,
            "conclusive": cert.conclusive,
            "nonzeros": d["nonzeros"],
            "nonzero_rows": d["nonzero_rows"],
            "nonzero_cols": d["nonzero_cols"],
            "bound_over_sqrt_n": cert.value / sqrt_n,
        }, []

    A = sample_matrix(spec, n, seed)
    if experiment == "global":
        ms = lowerbound.min_submatrix_frobenius_lower(A, eps).value
        fro = lowerbound.frobenius_lower(A)
        mean = lowerbound.mean_sum_lower(A)
        return {
            "min_submatrix_frobenius_lower": ms,
            "frobenius_lower": fro,
            "mean_sum_lower": mean,
            "min_sub_over_sqrt_n": ms / sqrt_n,
            "frobenius_over_sqrt_n": fro / sqrt_n,
            "mean_sum_over_sqrt_n": mean / sqrt_n,
        }, []

    if experiment == "twoplus":
        res = reglab.topk_truncate(A, eps)
        op_after = op_norm(res.Atilde, rel_tol=budgets.op_rel_tol)
        return {
            "K_actual": res.K_actual,
            "K_budget": res.K_budget,
            "within_budget": res.within_budget,
            "R": res.R,
            "op_before": op_norm(A, rel_tol=budgets.op_rel_tol),
            "op_after": op_after,
            "op_after_over_sqrt_n": op_after / sqrt_n,
        }, []

    _, report = reglab.regularize_full(A, eps, budgets=budgets, seed=seed)
    rows, cols = report.mask.sizes
    cap = 3 * math.ceil(eps * n)
    diag = report.diagnostics
    op_after = report.norms_after.op
    common = {
        "op_before": report.norms_before.op,
        "op_after": op_after,
        "norm_ratio": op_after / sqrt_n,
        "mask_rows": rows,
        "mask_cols": cols,
        "mask_cap": cap,
        "within_cap": rows <= cap and cols <= cap,
        "moderate_entries": diag["band_counts"]["moderate"],
    }
    failures = [f["stage"] for f in report.failures]
    if experiment == "scaling":
        b = diag["bounded"]
        return {
            **common,
            "fitted_ratio": op_after / (sqrt_n * math.log(1 / eps) / math.sqrt(eps)),
            "large_entries": diag["band_counts"]["large"],
            "damping_cols": b["damping_cols"],
            "damping_rows": b["damping_rows"],
            "gp_cols": b["gp_cols"],
            "gp_rows": b["gp_rows"],
            "mean_shift_norm": report.mean_shift_norm,
        }, failures
    return {
        **common,
        "log_ratio": op_after / (sqrt_n * math.log(1 / eps)),
        "moderate_schur_after": diag["moderate_schur_after"],
        "moderate_schur_cap": diag["moderate_schur_cap"],
    }, failures


def _execute(task):
    experiment, spec, n, eps, trial, seed, budgets = task
    start = time.perf_counter()
    # single-threaded BLAS keeps floating-point reductions identical across runs
    with threadpool_limits(limits=1):
        try:
            metrics, failures = run_trial(experiment, spec, n, eps, seed, budgets)
        except (MatregError, np.linalg.LinAlgError) as exc:
            metrics, failures = {}, [f"{type(exc).__name__}: {exc}"]
    elapsed = 1000.0 * (time.perf_counter() - start)
    full = {name: metrics.get(name, math.nan) for name in METRICS[experiment]}
    return ResultRow(experiment, n, eps, trial, seed, not failures, ";".join(failures), full, elapsed)


def worker_count():
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        raise ContractViolation(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if value < 0:
        raise ContractViolation(f"{THREADS_ENV} must be >= 0")
    return value or os.cpu_count() or 1


def run_experiment(cfg, workers=None):
    """All trial rows for ``cfg``, sorted by ``(n, eps, trial)``."""
    tasks = [
        (cfg.experiment, cfg.spec, n, eps, trial, trial_seed(cfg.master_seed, n, trial), cfg.budgets)
        for n in cfg.n_list
        for eps in cfg.eps_list
        for trial in range(cfg.trials)
    ]
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(tasks) == 1:
        rows = [_execute(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            rows = list(pool.map(_execute, tasks))
    return sorted(rows, key=lambda r: r.key)


def summarize(rows):
    """Per-cell medians of every metric, ignoring failed (NaN) entries."""
    cells = {}
    for r in rows:
        cells.setdefault((r.n, r.eps), []).append(r)
    out = []
    for (n, eps), group in sorted(cells.items()):
        names = list(group[0].metrics)
        medians = {}
        for name in names:
            vals = np.array([float(r.metrics[name]) for r in group])
            vals = vals[np.isfinite(vals)]
            medians[name] = float(np.median(vals)) if vals.size else math.nan
        out.append({"n": n, "eps": eps, "trials": len(group), "successes": sum(r.success for r in group),
                    "medians": medians})
    return out


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return "%.17g" % float(v)


def _csv_field(text):
    if any(c in text for c in ',"\n'):
        return '"' + text.replace('"', '""') + '"'
    return text


def to_csv(rows, experiment, timing=False):
    """Header, one line per trial, then one ``median`` line per cell."""
    metric_names = list(METRICS[experiment])
    header = ["kind", "experiment", "n", "eps", "trial", "seed", "success", "failures", *metric_names]
    if timing:
        header.append("wall_time_ms")
    lines = [",".join(header)]
    for r in rows:
        fields = ["trial", experiment, _fmt(r.n), _fmt(r.eps), _fmt(r.trial), _fmt(r.seed), _fmt(r.success),
                  _csv_field(r.failures), *(_fmt(r.metrics[m]) for m in metric_names)]
        if timing:
            fields.append(_fmt(r.wall_time_ms))
        lines.append(",".join(fields))
    for cell in summarize(rows):
        # trial holds the trial count and success the number of clean runs
        fields = ["median", experiment, _fmt(cell["n"]), _fmt(cell["eps"]), _fmt(cell["trials"]), "",
                  _fmt(cell["successes"]), "", *(_fmt(cell["medians"][m]) for m in metric_names)]
        if timing:
            fields.append("")
        lines.append(",".join(fields))
    return "\n".join(lines) + "\n"


def write_csv(rows, experiment, path, timing=False):
    text = to_csv(rows, experiment, timing=timing)
    path = Path(path)
    try:
        path.write_text(text, encoding="ascii", newline="")
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc
    return text


def to_json(rows, experiment):
    return {
        "experiment": experiment,
        "rows": [
            {"n": r.n, "eps": r.eps, "trial": r.trial, "seed": r.seed, "success": r.success,
             "failures": r.failures, "metrics": {k: _json_num(v) for k, v in r.metrics.items()}}
            for r in rows
        ],
        "summary": [{**c, "medians": {k: _json_num(v) for k, v in c["medians"].items()}} for c in summarize(rows)],
    }


def _json_num(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    v = float(v)
    return v if math.isfinite(v) else None
