"""Regularization of heavy-tailed square matrices by zeroing one submatrix.

Entries are split by magnitude into three bands:

* bounded  ``|a| <= sqrt(n)/2``: centered, then columns are removed by damping
  (:func:`~matreg.damping.column_select`) and Pietsch pruning, and the same is
  done for rows on the transpose;
* moderate ``sqrt(n)/2 < |a| <= 5 sqrt(n/eps)``: heavy rows and columns of the
  sparsity pattern are removed;
* large    ``|a| > 5 sqrt(n/eps)``: the few rows and columns holding them are
  removed.

The three masks are merged into one rectangle of at most ``3 ceil(eps n)``
rows and columns. :func:`topk_truncate` is the simpler alternative for entries
with more than two moments: zero every entry above ``n^(1/2 - eps/8)``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import damping, gp
from .errors import BandFailure, ContractViolation
from .matcore import (NormReport, RemovalMask, as_matrix, norm_report,
                      require_square, schur_bound, zero_submatrix)
from .seeding import derive_seed

REPORT_SCHEMA = 1


@dataclass(frozen=True)
class Budgets:
    """Iteration limits for the optimization steps of the pipeline."""

    gp_iters: int = 20
    inf_to_two_restarts: int = 4
    op_rel_tol: float = 1e-10

    def to_dict(self):
        return dict(self.__dict__)


@dataclass(frozen=True)
class EntrySplit:
    bounded: np.ndarray
    moderate: np.ndarray
    large: np.ndarray
    t1: float
    t2: float

    def band(self, A, which):
        return np.where(getattr(self, which), A, 0.0)


def band_thresholds(n, eps):
    return math.sqrt(n) / 2, 5.0 * math.sqrt(n / eps)


def classify_entries(A, eps):
    """Boolean masks of the nonzero entries in each magnitude band."""
    A = as_matrix(A)
    require_square(A)
    if not 0 < eps <= 0.5:
        raise ContractViolation("eps must lie in (0, 1/2]")
    t1, t2 = band_thresholds(A.shape[0], eps)
    mag = np.abs(A)
    nonzero = mag > 0
    return EntrySplit(
        bounded=nonzero & (mag <= t1),
        moderate=(mag > t1) & (mag <= t2),
        large=mag > t2,
        t1=t1,
        t2=t2,
    )


# ---------------------------------------------------------------------------
# bounded band


@dataclass
class BoundedDiagnostics:
    mean: float = 0.0
    mean_shift_norm: float = 0.0
    damping_cols: int = 0
    damping_rows: int = 0
    gp_cols: int = 0
    gp_rows: int = 0
    gp_C_cols: float = 0.0
    gp_C_rows: float = 0.0
    damping_capped: bool = False


def _column_removal(G, eps, budgets, seed, diag, side):
    """Columns of ``G`` to drop: damping selection, then Pietsch pruning on the rest."""
    n = G.shape[1]
    sel = damping.column_select(G, eps / 2)
    J1 = sel.selected.to_array()
    limit = int(math.floor(eps * n / 2))
    if J1.size > limit:
        # keep the hard size contract: retain only the most damped columns
        diag.damping_capped = True
        J1 = np.sort(J1[np.argsort(sel.v[J1], kind="stable")[:limit]])
    keep = np.setdiff1d(np.arange(n), J1)
    J2 = np.empty(0, dtype=np.int64)
    C = 0.0
    sub = G[:, keep]
    if keep.size and np.any(sub):
        w = gp.pietsch_weights(sub, max_iters=budgets.gp_iters, seed=seed)
        pruned, _ = gp.gp_prune(sub, w, eps / 2)
        J2 = keep[pruned.to_array()]
        C = w.certificate_C
    setattr(diag, f"damping_{side}", int(J1.size))
    setattr(diag, f"gp_{side}", int(J2.size))
    setattr(diag, f"gp_C_{side}", float(C))
    return np.union1d(J1, J2)


def regularize_bounded(Ab, eps, budgets=None, seed=0, diagnostics=None):
    """Mask of at most ``eps n`` rows and ``eps n`` columns for the bounded band."""
    Ab = as_matrix(Ab)
    require_square(Ab)
    budgets = budgets or Budgets()
    n = Ab.shape[0]
    if not 0 < eps <= 1:
        raise ContractViolation("eps must lie in (0, 1]")
    if np.any(np.abs(Ab) > math.sqrt(n) / 2 * (1 + 1e-12)):
        raise ContractViolation("bounded band has an entry above sqrt(n)/2")
    diag = diagnostics if diagnostics is not None else BoundedDiagnostics()
    if not np.any(Ab):
        return RemovalMask.empty(n, n)
    mean = float(Ab.mean())
    diag.mean = mean
    diag.mean_shift_norm = n * abs(mean)
    # |G| <= sqrt(n), so G/2 meets the sqrt(n)/2 entry cap
    G = 0.5 * (Ab - mean)
    cols = _column_removal(G, eps, budgets, derive_seed(seed, 0), diag, "cols")
    rows = _column_removal(G.T, eps, budgets, derive_seed(seed, 1), diag, "rows")
    return RemovalMask.of(rows, cols, Ab.shape)


# ---------------------------------------------------------------------------
# moderate band


def heavy_line_threshold(p_hat, n, eps):
    """Rows/columns with more nonzeros than ``21 p n + 2 ln(1/eps)`` are heavy."""
    return 21.0 * p_hat * n + 2.0 * math.log(1.0 / eps)


def regularize_moderate(Am, eps):
    """Rectangle covering every nonzero that lies in a heavy row or column.

    Raises :class:`BandFailure` when more than ``eps n`` nonzeros need covering.
    """
    Am = as_matrix(Am)
    require_square(Am)
    if not 0 < eps <= 0.5:
        raise ContractViolation("eps must lie in (0, 1/2]")
    n = Am.shape[0]
    nz = Am != 0
    p_hat = float(nz.sum()) / n**2
    tau = heavy_line_threshold(p_hat, n, eps)
    heavy_rows = nz.sum(axis=1) > tau
    heavy_cols = nz.sum(axis=0) > tau
    covered = nz & (heavy_rows[:, None] | heavy_cols[None, :])
    count = int(covered.sum())
    mask = RemovalMask.of(covered.any(axis=1), covered.any(axis=0), Am.shape)
    if count > eps * n:
        raise BandFailure("moderate", f"{count} entries in heavy lines exceed eps*n = {eps * n:.6g}",
                          {"flagged_entries": count, "heavy_rows": int(heavy_rows.sum()),
                           "heavy_cols": int(heavy_cols.sum())}, mask)
    return mask


def moderate_schur_cap(n, eps, p_hat):
    """Schur-bound cap for the retained moderate band: entry cap times per-line count."""
    return 5.0 * math.sqrt(n / eps) * (21.0 * p_hat * n + 4.0 * math.log(1.0 / eps))


# ---------------------------------------------------------------------------
# large band


def regularize_large(Al, eps):
    """Rows x columns holding a nonzero; fails when either exceeds ``eps n``."""
    Al = as_matrix(Al)
    require_square(Al)
    n = Al.shape[0]
    nz = Al != 0
    rows, cols = nz.any(axis=1), nz.any(axis=0)
    mask = RemovalMask.of(rows, cols, Al.shape)
    if rows.sum() > eps * n or cols.sum() > eps * n:
        raise BandFailure("large", f"{int(rows.sum())} rows / {int(cols.sum())} cols exceed eps*n = {eps * n:.6g}",
                          {"rows": int(rows.sum()), "cols": int(cols.sum()), "nonzeros": int(nz.sum())}, mask)
    return mask


# ---------------------------------------------------------------------------
# full pipeline


@dataclass
class RegularizationReport:
    eps: float
    mask: RemovalMask
    norms_before: NormReport
    norms_after: NormReport
    stage_masks: dict
    mean_shift_norm: float
    p_hat: float
    parameters: dict
    seed: int
    success: bool = True
    failures: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def effective_eps(self):
        """Size of the removed block as a fraction of ``n`` (three bands merged)."""
        return 3 * self.eps

    def to_dict(self):
        return {
            "mrreport": REPORT_SCHEMA,
            "eps": self.eps,
            "effective_eps": self.effective_eps,
            "seed": self.seed,
            "success": self.success,
            "failures": self.failures,
            "mask": self.mask.to_dict(),
            "mask_sizes": list(self.mask.sizes),
            "stage_masks": {k: m.to_dict() for k, m in self.stage_masks.items()},
            "norms_before": self.norms_before.to_dict(),
            "norms_after": self.norms_after.to_dict(),
            "mean_shift_norm": self.mean_shift_norm,
            "p_hat": self.p_hat,
            "parameters": self.parameters,
            "diagnostics": self.diagnostics,
        }


def regularize_full(A, eps, budgets=None, seed=0):
    """Zero one submatrix of ``A`` and return ``(Atilde, report)``.

    Band failures do not raise: the failing band contributes an empty mask and
    the report records the stage in ``failures`` with ``success = False``.
    """
    A = as_matrix(A)
    require_square(A)
    if not 0 < eps <= 0.5:
        raise ContractViolation("eps must lie in (0, 1/2]")
    budgets = budgets or Budgets()
    n = A.shape[0]
    split = classify_entries(A, eps)
    bounded_diag = BoundedDiagnostics()
    failures = []
    stage_masks = {}

    stage_masks["bounded"] = regularize_bounded(split.band(A, "bounded"), eps, budgets, seed, bounded_diag)

    Am = split.band(A, "moderate")
    p_hat = float(split.moderate.sum()) / n**2
    for stage, func, band in (("moderate", regularize_moderate, Am),
                              ("large", regularize_large, split.band(A, "large"))):
        try:
            stage_masks[stage] = func(band, eps)
        except BandFailure as exc:
            failures.append({"stage": exc.stage, "message": str(exc), **exc.counts})
            stage_masks[stage] = RemovalMask.empty(n, n)

    mask = stage_masks["bounded"].union(stage_masks["moderate"]).union(stage_masks["large"])
    Atilde = zero_submatrix(A, mask)
    norm_seed = derive_seed(seed, 2)
    before = norm_report(A, restarts=budgets.inf_to_two_restarts, seed=norm_seed, rel_tol=budgets.op_rel_tol)
    after = norm_report(Atilde, restarts=budgets.inf_to_two_restarts, seed=norm_seed, rel_tol=budgets.op_rel_tol)

    retained_moderate = zero_submatrix(Am, mask)
    report = RegularizationReport(
        eps=eps,
        mask=mask,
        norms_before=before,
        norms_after=after,
        stage_masks=stage_masks,
        mean_shift_norm=bounded_diag.mean_shift_norm,
        p_hat=p_hat,
        parameters={
            "t1": split.t1,
            "t2": split.t2,
            "L_damping": damping.level_constant(min(eps / 2, 0.5 - 1e-12), 1.0),
            "gp_delta": eps / 2,
            "heavy_line_threshold": heavy_line_threshold(p_hat, n, eps),
            "p_bound_2_over_n": p_hat <= 2.0 / n,
            "budgets": budgets.to_dict(),
        },
        seed=seed,
        success=not failures,
        failures=failures,
        diagnostics={
            "bounded": dict(bounded_diag.__dict__),
            "band_counts": {"bounded": int(split.bounded.sum()), "moderate": int(split.moderate.sum()),
                            "large": int(split.large.sum())},
            "moderate_schur_after": schur_bound(retained_moderate),
            "moderate_schur_cap": moderate_schur_cap(n, eps, p_hat),
            "mean_shift_budget": 2.0 * math.sqrt(n),
        },
    )
    return Atilde, report


# ---------------------------------------------------------------------------
# truncation under 2 + eps moments


@dataclass(frozen=True)
class TruncationResult:
    Atilde: np.ndarray
    K_actual: int
    R: float
    K_budget: float

    @property
    def within_budget(self):
        return self.K_actual <= self.K_budget

    def __iter__(self):
        return iter((self.Atilde, self.K_actual, self.R))


def topk_truncate(A, moment_eps):
    """Zero every entry with ``|a| > R = n^(1/2 - moment_eps/8)``.

    The number zeroed is compared against the budget ``n^(1 - moment_eps/9)``.
    Unpacks as ``(Atilde, K_actual, R)``.
    """
    A = as_matrix(A)
    require_square(A)
    if not 0 < moment_eps <= 1:
        raise ContractViolation("moment_eps must lie in (0, 1]")
    n = A.shape[0]
    R = n ** (0.5 - moment_eps / 8)
    big = np.abs(A) > R
    return TruncationResult(
        Atilde=np.where(big, 0.0, A),
        K_actual=int(big.sum()),
        R=float(R),
        K_budget=float(n ** (1 - moment_eps / 9)),
    )
