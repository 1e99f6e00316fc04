"""Lower bounds showing when a matrix norm cannot be repaired by small removals."""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation
from .matcore import as_matrix, frobenius_norm, require_square
from .randgen import SparseSign, sample_matrix
from .seeding import check_seed

KINDS = ("mean_sum", "frobenius", "min_submatrix_frobenius", "optimality_witness")


@dataclass(frozen=True)
class LowerBoundCertificate:
    kind: str
    value: float
    details: dict = field(default_factory=dict)
    conclusive: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractViolation(f"unknown certificate kind {self.kind!r}")
        if not self.value >= 0:
            raise ContractViolation("certificate value must be >= 0")

    def to_dict(self):
        return {"kind": self.kind, "value": self.value, "conclusive": self.conclusive, "details": self.details}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        return cls(data["kind"], float(data["value"]), dict(data.get("details", {})), bool(data.get("conclusive", True)))


def mean_sum_lower(B):
    """``sum(B) / m``: the quadratic form at the flat unit vector, so ``<= ||B||``."""
    B = as_matrix(B)
    require_square(B)
    return float(B.sum()) / B.shape[0]


def frobenius_lower(B):
    """``||B||_F / sqrt(m)``, since ``||B||_F^2 <= rank * ||B||^2``."""
    B = as_matrix(B)
    require_square(B)
    return frobenius_norm(B) / math.sqrt(B.shape[0])


def min_submatrix_frobenius_lower(A, eps):
    """Bound ``||A'||`` from below for every ``m x m`` submatrix, ``m = ceil((1-eps) n)``.

    Deleting ``floor(eps n)`` rows and as many columns removes at most the
    heaviest row masses plus the heaviest column masses, so every retained
    block keeps ``||A||_F^2 - removable`` of the squared mass.
    """
    A = as_matrix(A)
    require_square(A)
    if not 0 < eps < 1:
        raise ContractViolation("eps must lie in (0, 1)")
    n = A.shape[0]
    k = math.floor(eps * n)
    # ceil((1 - eps) n) without the rounding drift of 1 - eps
    m = n - k
    sq = A * A
    total = float(sq.sum())
    rows = np.sort(sq.sum(axis=1))[::-1]
    cols = np.sort(sq.sum(axis=0))[::-1]
    removable = float(rows[:k].sum() + cols[:k].sum())
    value = math.sqrt(max(0.0, total - removable)) / math.sqrt(m)
    return LowerBoundCertificate(
        "min_submatrix_frobenius",
        value,
        {"n": n, "m": m, "removed_lines": k, "frobenius_sq": total, "removable": removable},
    )


def optimality_witness(n, eps, seed):
    """Sparse sign matrix that no ``eps n x eps n`` zeroing can bring below ``sqrt(n / (2 eps))``.

    Entries are ``+-1/sqrt(p)`` with ``p = 2 eps / n``. If more than ``eps n``
    rows carry a nonzero, every zeroed rectangle misses one of them, and a
    single surviving entry already forces ``||A~|| >= 1/sqrt(p)``.
    """
    check_seed(seed)
    if not 0 < eps < 1:
        raise ContractViolation("eps must lie in (0, 1)")
    if n * eps < 1:
        raise ContractViolation("optimality_witness needs n * eps >= 1")
    p = 2.0 * eps / n
    A = sample_matrix(SparseSign(p=p), n, seed)
    nz = A != 0
    nz_rows = int(nz.any(axis=1).sum())
    nz_cols = int(nz.any(axis=0).sum())
    conclusive = nz_rows > eps * n
    details = {
        "n": n,
        "eps": eps,
        "p": p,
        "seed": int(seed),
        "nonzeros": int(nz.sum()),
        "nonzero_rows": nz_rows,
        "nonzero_cols": nz_cols,
        "status": "conclusive" if conclusive else "inconclusive",
    }
    value = 1.0 / math.sqrt(p) if conclusive else 0.0
    return LowerBoundCertificate("optimality_witness", value, details, conclusive)
