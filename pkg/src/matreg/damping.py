"""Damping weights for sums of non-negative random variables.

A sum ``sum_j x_j`` of i.i.d. non-negative terms is only ``O(n)`` in
expectation. Multiplying the terms by weights ``w_j in [0, 1]`` that are close
to one (``E prod_j 1/w_j <= 1 + eps``) makes the damped sum ``O(L n)`` for
every sample, with ``L ~ K log(1/eps)``.

The weights are built level by level from a quantile ladder ``q_0 < q_1 <
...``: a term is active on level ``k`` when it reaches the previous rung
``q_{k-1}``; a level whose active count exceeds ``L p_k n`` damps all of its
active terms by the common factor ``L p_k n / count``.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .matcore import IndexSet, as_matrix

SELECT_LOG_THRESHOLD = -2.0  # columns with V_j < e^-2 are removed


@dataclass(frozen=True)
class QuantileLadder:
    """Rungs ``q_0..q_kappa`` and level probabilities ``p_0..p_kappa``.

    ``q_k`` for ``k < kappa`` is the smallest ``t`` with
    ``P(X >= t) <= 2^-(k+1)``; the top rung is the a.s. bound
    ``bound_M * scale``. ``p_k = 2^-k`` below the top and ``p_kappa = 1/bound_M``.
    """

    q: np.ndarray
    p: np.ndarray
    kappa: int
    bound_M: float
    scale: float = 1.0

    @property
    def degenerate(self):
        return not np.any(self.q > 0)

    def level_mass(self):
        """``sum_k p_k q_k``: the mean of the dominating variable, up to the top-level slack."""
        return float(np.dot(self.p, self.q))

    def sum_bound(self, L, n):
        """Deterministic upper bound ``L n sum_k p_k q_k`` on a damped sum of ``n`` terms."""
        return L * n * self.level_mass()


def quantile_ladder(survival, bound_M, scale=1.0, check_points=257):
    """Build the ladder for a variable with survival ``t -> P(X >= t)``.

    ``X`` must be bounded by ``bound_M * scale``. Quantiles are found by
    bisection to absolute tolerance ``1e-12 * bound_M * scale``.
    """
    if not bound_M >= 1:
        raise ContractViolation("bound_M must be >= 1")
    if not scale > 0:
        raise ContractViolation("scale must be > 0")
    top = float(bound_M) * float(scale)
    grid = np.linspace(0.0, top, check_points)
    s = np.array([float(survival(t)) for t in grid])
    if s[0] > 1 + 1e-12 or np.any(s < -1e-12):
        raise ContractViolation("survival values must lie in [0, 1]")
    if np.any(np.diff(s) > 1e-12):
        k = int(np.argmax(np.diff(s) > 1e-12))
        raise ContractViolation(
            f"survival function is not non-increasing between t={grid[k]:.6g} and t={grid[k + 1]:.6g}")

    kappa = int(math.ceil(math.log2(bound_M))) if bound_M > 1 else 0
    tol = 1e-12 * top
    q = np.empty(kappa + 1)
    for k in range(kappa):
        q[k] = _bisect_quantile(survival, 2.0 ** (-k - 1), top, tol)
    # a.s. zero variable: every rung collapses to zero
    q[kappa] = 0.0 if float(survival(tol)) == 0.0 else top
    if np.any(np.diff(q) < 0):
        raise ContractViolation("survival function produced decreasing quantiles")
    p = 2.0 ** -np.arange(kappa + 1, dtype=float)
    p[kappa] = 1.0 / bound_M
    return QuantileLadder(q=q, p=p, kappa=kappa, bound_M=float(bound_M), scale=float(scale))


def _bisect_quantile(survival, target, top, tol):
    if float(survival(0.0)) <= target:
        return 0.0
    if float(survival(top)) > target:
        return top
    lo, hi = 0.0, top
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if float(survival(mid)) <= target:
            hi = mid
        else:
            lo = mid
    return 0.0 if hi <= tol else hi


def empirical_survival(samples):
    """``t -> fraction of samples >= t``."""
    xs = np.sort(np.asarray(samples, dtype=float).ravel())
    n = xs.size

    def surv(t):
        return (n - np.searchsorted(xs, t, side="left")) / n

    return surv


def squared_survival(abs_survival):
    """Survival of ``Y**2`` given the survival of ``|Y|``."""
    return lambda t: abs_survival(np.sqrt(np.maximum(t, 0.0)))


def truncated_square_survival(abs_survival, cap):
    """Survival of ``Y**2 * 1{|Y| <= cap}`` given the survival of ``|Y|``.

    Entries above ``cap`` are zeroed, not clipped, so they only add to the atom at 0.
    """
    tail = float(abs_survival(np.nextafter(cap, np.inf)))

    def surv(t):
        t = np.asarray(t, dtype=float)
        inside = np.maximum(abs_survival(np.sqrt(np.maximum(t, 0.0))) - tail, 0.0)
        return np.where(t <= 0, 1.0, np.where(t > cap * cap, 0.0, inside))

    return surv


def damp_single(x, eps):
    """Weight ``min(1, (1/eps)/x)``; guarantees ``x * w <= 1/eps``."""
    if x < 0:
        raise ContractViolation("damp_single needs x >= 0")
    if not 0 < eps < 1:
        raise ContractViolation("eps must lie in (0, 1)")
    if x == 0:
        return 1.0
    return min(1.0, (1.0 / eps) / x)


def level_constant(eps, K):
    """``L = max(10, 6 K ln(1/eps))``."""
    return max(10.0, 6.0 * K * math.log(1.0 / eps))


def level_indicators(x, ladder):
    """Boolean array ``xi[..., k] = (x > 0) & (x >= q_{k-1})`` with ``q_{-1} = 0``."""
    x = np.asarray(x, dtype=float)
    prev = np.concatenate(([0.0], ladder.q[:-1]))
    return (x[..., None] > 0) & (x[..., None] >= prev)


def dominating_values(x, ladder):
    """``X'_j = sum_k q_k xi_jk``; pointwise ``X' >= x`` whenever ``x <= top rung``."""
    return level_indicators(x, ladder) @ ladder.q


def _log_weights(X, ladder, L):
    """Log damping weights for each row of ``X`` (rows are independent sums)."""
    n = X.shape[-1]
    logw = np.zeros(X.shape)
    if ladder.degenerate:
        return logw
    prev = np.concatenate(([0.0], ladder.q[:-1]))
    positive = X > 0
    for k in range(ladder.kappa + 1):
        xi = positive & (X >= prev[k])
        nu = xi.sum(axis=-1, keepdims=True)
        cap = L * ladder.p[k] * n
        over = nu > cap
        if not over.any():
            continue
        factor = np.where(over, np.log(cap / np.maximum(nu, 1)), 0.0)
        logw += xi * factor
    return logw


@dataclass(frozen=True)
class DampingWeights:
    w: np.ndarray
    L: float

    @property
    def inverse_product(self):
        """``prod_j 1/w_j``."""
        return float(np.exp(-np.log(self.w).sum()))


def _check_bounded(X, ladder):
    top = ladder.bound_M * ladder.scale
    if np.any(X < 0):
        raise ContractViolation("damping needs non-negative summands")
    over = np.argwhere(X > top * (1 + 1e-12))
    if over.size:
        raise ContractViolation(
            f"{len(over)} summand(s) exceed K*n*scale = {top:.6g}; first at {tuple(over[0].tolist())}")


def damp_sum_weights(x, ladder, eps, K):
    """Weights ``W_j = prod_k W_jk`` for one sum ``sum_j x_j``.

    The damped sum obeys ``sum_j W_j x_j <= ladder.sum_bound(L, n)`` for every
    input, which is at most ``5 L n * scale`` when the ladder comes from the
    true distribution of ``x_j`` and ``E x_j <= scale``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ContractViolation("x must be a 1-D array")
    if not 0 < eps < 0.5:
        raise ContractViolation("eps must lie in (0, 1/2)")
    if K < 1:
        raise ContractViolation("K must be >= 1")
    _check_bounded(x, ladder)
    L = level_constant(eps, K)
    return DampingWeights(w=np.exp(_log_weights(x[None, :], ladder, L)[0]), L=L)


@dataclass(frozen=True)
class ColumnSelection:
    v: np.ndarray
    selected: IndexSet
    L: float
    K: float
    ladder: QuantileLadder

    def row_norm_bound(self, n):
        """Deterministic bound on every row norm of the matrix with ``selected`` removed."""
        return math.e * math.sqrt(self.ladder.sum_bound(self.L, n))

    def to_dict(self):
        return {"v": self.v.tolist(), "selected": list(self.selected.indices)}


def column_select(A, eps, K=None, survival=None, mean_bound=None):
    """Pick a few columns whose removal bounds every row norm of ``A``.

    Each row's squared entries are damped as one sum; ``V_j`` is the product
    of column ``j``'s weights over all rows and the columns with
    ``V_j < e^-2`` are selected. Entries must satisfy ``|A_ij| <= sqrt(n)/2``.

    ``survival`` is the survival function of the squared entries; by default
    the pooled empirical one. ``mean_bound`` (the scale of the ladder)
    defaults to the empirical mean of the squares. ``K`` defaults to
    ``max(1, max A_ij^2 / (n * mean_bound))``.
    """
    A = as_matrix(A)
    if not 0 < eps <= 0.5:
        raise ContractViolation("eps must lie in (0, 1/2]")
    n = A.shape[1]
    cap = math.sqrt(n) / 2
    bad = np.argwhere(np.abs(A) > cap * (1 + 1e-12))
    if bad.size:
        shown = ", ".join(str(tuple(b)) for b in bad[:5].tolist())
        raise ContractViolation(f"{len(bad)} entries exceed sqrt(n)/2 = {cap:.6g}: {shown}")
    X = A * A
    if mean_bound is None:
        mean_bound = float(X.mean())
    if mean_bound <= 0:
        ladder = QuantileLadder(q=np.zeros(1), p=np.ones(1), kappa=0, bound_M=1.0)
        return ColumnSelection(v=np.ones(n), selected=IndexSet.empty(n), L=level_constant(min(eps, 0.49), 1.0),
                               K=1.0, ladder=ladder)
    if K is None:
        K = max(1.0, float(X.max()) / (n * mean_bound))
    if survival is None:
        survival = empirical_survival(X)
    ladder = quantile_ladder(survival, K * n, scale=mean_bound)
    _check_bounded(X, ladder)
    # eps = 1/2 sits on the boundary of the damping bound; nudge inside
    L = level_constant(min(eps, 0.5 - 1e-12), K)
    logv = _log_weights(X, ladder, L).sum(axis=0)
    return ColumnSelection(
        v=np.exp(logv),
        selected=IndexSet.of(logv < SELECT_LOG_THRESHOLD, n),
        L=L,
        K=float(K),
        ladder=ladder,
    )
