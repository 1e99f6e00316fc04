"""Dense matrices, submatrix masks and the norms used throughout the package.

Matrices are plain 2-D ``float64`` numpy arrays; :func:`as_matrix` validates
them. The three norms compared in the regularization argument are

* ``two_to_inf_norm``: largest Euclidean row norm,
* ``inf_to_two_exact`` / ``inf_to_two_estimate``: max of ``||Ax||_2`` over
  sign vectors ``x``,
* ``op_norm``: largest singular value,

together with the Frobenius norm and the Schur bound
``sqrt(max row l1 * max col l1)``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh

from .errors import ContractViolation, DimensionMismatch, DimensionTooLarge
from .seeding import make_rng

INF_TO_TWO_MAX_COLS = 24
DENSE_SVD_CUTOFF = 32


def as_matrix(A, copy=False):
    """Return ``A`` as a finite 2-D float64 array, raising on bad input."""
    A = np.array(A, dtype=np.float64, copy=copy) if copy else np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ContractViolation(f"expected a 2-D matrix, got shape {A.shape}")
    if A.shape[0] < 1 or A.shape[1] < 1:
        raise ContractViolation(f"matrix must have at least one row and column, got {A.shape}")
    if not np.isfinite(A).all():
        bad = np.argwhere(~np.isfinite(A))[0]
        raise ContractViolation(f"non-finite entry at ({bad[0]}, {bad[1]})")
    return A


def require_square(A, what="matrix"):
    if A.shape[0] != A.shape[1]:
        raise ContractViolation(f"{what} must be square, got shape {A.shape}")


@dataclass(frozen=True)
class IndexSet:
    """Strictly increasing set of indices into ``range(dim)``."""

    indices: tuple
    dim: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if self.dim < 0:
            raise ContractViolation("dim must be non-negative")
        for a, b in zip(idx, idx[1:]):
            if b <= a:
                raise ContractViolation("indices must be strictly increasing")
        if idx and (idx[0] < 0 or idx[-1] >= self.dim):
            raise ContractViolation(f"indices must lie in [0, {self.dim})")

    @classmethod
    def of(cls, indices, dim):
        """Build from any iterable of indices (unsorted, repeated or a boolean mask)."""
        arr = np.asarray(indices)
        if arr.dtype == bool:
            arr = np.flatnonzero(arr)
        return cls(tuple(np.unique(arr.astype(np.int64)).tolist()), dim)

    @classmethod
    def empty(cls, dim):
        return cls((), dim)

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, i):
        return i in set(self.indices)

    def to_array(self):
        return np.asarray(self.indices, dtype=np.int64)

    def union(self, other):
        if other.dim != self.dim:
            raise DimensionMismatch(f"cannot union index sets of dims {self.dim} and {other.dim}")
        return IndexSet.of(self.indices + other.indices, self.dim)

    def complement(self):
        keep = np.ones(self.dim, dtype=bool)
        keep[self.to_array()] = False
        return IndexSet.of(keep, self.dim)


@dataclass(frozen=True)
class RemovalMask:
    """The rectangle ``rows x cols`` of entries to zero out."""

    rows: IndexSet
    cols: IndexSet

    @classmethod
    def empty(cls, n_rows, n_cols):
        return cls(IndexSet.empty(n_rows), IndexSet.empty(n_cols))

    @classmethod
    def of(cls, rows, cols, shape):
        return cls(IndexSet.of(rows, shape[0]), IndexSet.of(cols, shape[1]))

    @property
    def shape(self):
        return (self.rows.dim, self.cols.dim)

    @property
    def sizes(self):
        return (len(self.rows), len(self.cols))

    def union(self, other):
        return RemovalMask(self.rows.union(other.rows), self.cols.union(other.cols))

    def transpose(self):
        return RemovalMask(self.cols, self.rows)

    def to_dict(self):
        return {"rows": list(self.rows.indices), "cols": list(self.cols.indices)}

    @classmethod
    def from_dict(cls, data, shape):
        return cls.of(data["rows"], data["cols"], shape)


def zero_submatrix(A, mask):
    """Copy of ``A`` with the entries in ``mask.rows x mask.cols`` set to zero."""
    A = as_matrix(A)
    if mask.shape != A.shape:
        raise DimensionMismatch(f"mask shape {mask.shape} does not match matrix shape {A.shape}")
    out = A.copy()
    if len(mask.rows) and len(mask.cols):
        out[np.ix_(mask.rows.to_array(), mask.cols.to_array())] = 0.0
    return out


# ---------------------------------------------------------------------------
# operator norm


def _gram_operator(A):
    # Work on the smaller of A^T A and A A^T.
    k, m = A.shape
    if m <= k:
        return m, lambda x: A.T @ (A @ x)
    return k, lambda x: A @ (A.T @ x)


def _deterministic_start(dim):
    x = np.ones(dim)
    return x / np.sqrt(dim)


def _power_top_eig(matvec, dim, rel_tol, max_iter=100_000):
    """Power iteration for the top eigenvalue of a PSD operator."""
    x = _deterministic_start(dim)
    theta = 0.0
    bump = 0
    for _ in range(max_iter):
        y = matvec(x)
        ynorm = np.linalg.norm(y)
        if ynorm == 0.0:
            # start vector is in the null space; perturb deterministically
            bump += 1
            x = x + np.cos(np.arange(dim) * (1.0 + bump))
            if not np.any(x):
                return 0.0
            x /= np.linalg.norm(x)
            if bump > dim:
                return 0.0
            continue
        theta_new = float(x @ y)
        resid = np.linalg.norm(y - theta_new * x)
        x = y / ynorm
        if abs(theta_new - theta) <= rel_tol * theta_new and resid <= np.sqrt(rel_tol) * theta_new:
            return theta_new
        theta = theta_new
    return theta


def op_norm(A, rel_tol=1e-10, method="auto"):
    """Largest singular value of ``A``.

    ``method`` is ``"svd"`` (dense decomposition), ``"lanczos"`` (ARPACK on
    the Gram operator, deterministic start vector), ``"power"`` (plain power
    iteration on the Gram operator) or ``"auto"``: dense SVD when the smaller
    dimension is at most 32, Lanczos otherwise.
    """
    A = as_matrix(A)
    if not 0 < rel_tol <= 1e-3:
        raise ContractViolation("rel_tol must lie in (0, 1e-3]")
    if not np.any(A):
        return 0.0
    if method == "auto":
        method = "svd" if min(A.shape) <= DENSE_SVD_CUTOFF else "lanczos"
    if method == "svd":
        return float(np.linalg.svd(A, compute_uv=False)[0])
    dim, matvec = _gram_operator(A)
    if method == "power":
        return float(np.sqrt(max(_power_top_eig(matvec, dim, rel_tol), 0.0)))
    if method != "lanczos":
        raise ContractViolation(f"unknown method {method!r}")
    if dim <= 2:
        return float(np.linalg.svd(A, compute_uv=False)[0])
    op = LinearOperator((dim, dim), matvec=matvec, dtype=np.float64)
    lam = eigsh(op, k=1, which="LA", v0=_deterministic_start(dim), tol=rel_tol,
                return_eigenvectors=False)[0]
    return float(np.sqrt(max(lam, 0.0)))


# ---------------------------------------------------------------------------
# cheap norms


def two_to_inf_norm(A):
    A = as_matrix(A)
    return float(np.sqrt(np.max(np.einsum("ij,ij->i", A, A))))


def frobenius_norm(A):
    A = as_matrix(A)
    return float(np.sqrt(np.einsum("ij,ij->", A, A)))


def l1_row_max(A):
    return float(np.max(np.abs(as_matrix(A)).sum(axis=1)))


def l1_col_max(A):
    return float(np.max(np.abs(as_matrix(A)).sum(axis=0)))


def schur_bound(A):
    """``sqrt(max_i ||A_i||_1 * max_j ||A^j||_1)``, an upper bound on ``op_norm``."""
    A = as_matrix(A)
    absA = np.abs(A)
    return float(np.sqrt(absA.sum(axis=1).max() * absA.sum(axis=0).max()))


# ---------------------------------------------------------------------------
# infinity -> 2 norm


def _sign_block(nbits):
    codes = np.arange(2**nbits, dtype=np.int64)
    bits = (codes[None, :] >> np.arange(nbits, dtype=np.int64)[:, None]) & 1
    return 1.0 - 2.0 * bits


def _inf_to_two_argmax(A):
    k, m = A.shape
    # ||Ax|| = ||Rx|| for A = QR; shrinks the row count when k > m
    M = np.linalg.qr(A, mode="r") if k > m else A
    rest = m - 1
    n_low = min(rest, 12)
    n_high = rest - n_low
    low = _sign_block(n_low)
    high = _sign_block(n_high)
    P_low = M[:, 1:1 + n_low] @ low
    P_high = M[:, 0:1] + M[:, 1 + n_low:] @ high
    best_val, best_lo, best_hi = -1.0, 0, 0
    for h in range(high.shape[1]):
        Y = P_low + P_high[:, h:h + 1]
        sq = np.einsum("ij,ij->j", Y, Y)
        j = int(np.argmax(sq))
        if sq[j] > best_val:
            best_val, best_lo, best_hi = float(sq[j]), j, h
    x = np.concatenate(([1.0], low[:, best_lo], high[:, best_hi]))
    return x


def inf_to_two_exact(A, return_vector=False):
    """Exact ``max ||Ax||_2`` over ``x in {-1, 1}^m`` by enumeration (m <= 24).

    Only ``2^(m-1)`` vectors are scanned since ``x`` and ``-x`` agree.
    """
    A = as_matrix(A)
    m = A.shape[1]
    if m > INF_TO_TWO_MAX_COLS:
        raise DimensionTooLarge(
            f"exact infinity->2 norm enumerates 2^(n_cols-1) vectors; n_cols={m} > {INF_TO_TWO_MAX_COLS}")
    x = _inf_to_two_argmax(A)
    val = float(np.linalg.norm(A @ x))
    return (val, x) if return_vector else val


def _greedy_ascent(G, x):
    """Steepest single-flip ascent of ``x^T G x``; ties go to the lowest index."""
    g = G @ x
    diag = np.diag(G)
    value = float(x @ g)
    while True:
        gain = 4.0 * (diag - x * g)
        j = int(np.argmax(gain))
        if gain[j] <= 1e-12 * max(value, 1e-300):
            return x
        g -= 2.0 * x[j] * G[:, j]
        x[j] = -x[j]
        value += gain[j]


def inf_to_two_estimate(A, restarts=20, seed=0, return_vector=False):
    """Lower bound on the infinity->2 norm by greedy sign-flip ascent.

    Each restart begins from a random sign vector. Any local maximum ``x``
    satisfies ``||Ax||_2 >= ||A||_F``, so the result never falls below the
    Frobenius norm (and hence the operator norm).
    """
    A = as_matrix(A)
    if restarts < 1:
        raise ContractViolation("restarts must be >= 1")
    m = A.shape[1]
    G = A.T @ A
    rng = make_rng(seed)
    best, best_x = -1.0, None
    for _ in range(restarts):
        x = rng.choice(np.array([-1.0, 1.0]), size=m)
        x = _greedy_ascent(G, x)
        val = float(np.linalg.norm(A @ x))
        if val > best:
            best, best_x = val, x.copy()
    return (best, best_x) if return_vector else best


# ---------------------------------------------------------------------------
# norm report


@dataclass(frozen=True)
class NormReport:
    op: float
    two_to_inf: float
    inf_to_two: float
    inf_to_two_is_exact: bool
    frobenius: float
    schur: float
    l1_row_max: float
    l1_col_max: float

    def to_dict(self):
        return dict(self.__dict__)

    def check_sandwich(self, n_cols, slack=1e-9):
        """Return the list of violated norm inequalities (empty when consistent)."""
        def le(a, b):
            return a <= b + slack * max(abs(a), abs(b), 1.0)

        problems = []
        if not le(self.two_to_inf, self.op):
            problems.append("two_to_inf > op")
        if not le(self.op, min(self.schur, self.frobenius)):
            problems.append("op > min(schur, frobenius)")
        if not le(self.op, self.inf_to_two):
            problems.append("op > inf_to_two")
        if not le(self.inf_to_two, np.sqrt(n_cols) * self.op):
            problems.append("inf_to_two > sqrt(n_cols) * op")
        return problems


def norm_report(A, restarts=10, seed=0, exact_max_cols=16, rel_tol=1e-10):
    A = as_matrix(A)
    if A.shape[1] <= exact_max_cols:
        i2, exact = inf_to_two_exact(A), True
    else:
        i2, exact = inf_to_two_estimate(A, restarts=restarts, seed=seed), False
    absA = np.abs(A)
    row1 = float(absA.sum(axis=1).max())
    col1 = float(absA.sum(axis=0).max())
    return NormReport(
        op=op_norm(A, rel_tol=rel_tol),
        two_to_inf=two_to_inf_norm(A),
        inf_to_two=i2,
        inf_to_two_is_exact=exact,
        frobenius=frobenius_norm(A),
        schur=float(np.sqrt(row1 * col1)),
        l1_row_max=row1,
        l1_col_max=col1,
    )
