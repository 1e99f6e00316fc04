"""Constructive Pietsch factorization and column pruning.

For a ``k x m`` matrix ``B`` we look for simplex weights ``mu`` with

    ||B x||^2 <= C^2 * sum_j mu_j x_j^2      for all x,

where ``C^2 = lambda_max(D^-1/2 B^T B D^-1/2)`` and ``D = diag(mu)``. The
smallest achievable ``C`` is within ``sqrt(pi/2)`` of ``||B||_{inf->2}``.
Columns with ``mu_j > 1/(delta m)`` are then pruned; at most ``delta m`` of
them exist and the rest of the matrix has operator norm at most
``C / sqrt(delta m)``.

The weights are found by entropic mirror descent on ``log lambda_max``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import eigsh

from .errors import ContractViolation
from .matcore import IndexSet, as_matrix
from .seeding import make_rng

DENSE_EIG_MAX = 200
INNER_EIG_TOL = 1e-6  # gradient steps only need a rough eigenvector
LOG_MU_FLOOR = -600.0


def _log_normalize(x):
    top = x.max()
    return x - (top + np.log(np.exp(x - top).sum()))


@dataclass(frozen=True)
class PietschWeights:
    mu: np.ndarray
    certificate_C: float
    iterations_used: int

    def to_dict(self):
        return {
            "mu": self.mu.tolist(),
            "certificate_C": self.certificate_C,
            "iterations_used": self.iterations_used,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(np.asarray(data["mu"], dtype=float), float(data["certificate_C"]), int(data["iterations_used"]))


class _ScaledGram:
    """Top eigenpair of ``S(mu) = D^-1/2 B^T B D^-1/2`` for a fixed ``B``.

    Works on whichever of ``B^T B`` (m x m) and ``B D^-1 B^T`` (k x k) is
    smaller and always returns the eigenvector in column space.
    """

    def __init__(self, B, rng):
        self.B = B
        k, m = B.shape
        self.column_side = m <= k
        self.G = B.T @ B if self.column_side else None
        self.dim = m if self.column_side else k
        self.prev = None
        self.rng = rng

    def _matrix(self, mu):
        d = 1.0 / np.sqrt(mu)
        if self.column_side:
            return self.G * np.outer(d, d)
        Bs = self.B * d
        return Bs @ Bs.T

    def top(self, mu, exact=False):
        M = self._matrix(mu)
        if self.dim <= DENSE_EIG_MAX:
            vals, vecs = np.linalg.eigh(M)
            lam, u = float(vals[-1]), vecs[:, -1]
        else:
            v0 = self.prev if self.prev is not None else self.rng.standard_normal(self.dim)
            tol = 0.0 if exact else INNER_EIG_TOL
            vals, vecs = eigsh(M, k=1, which="LA", v0=v0, tol=tol)
            lam, u = float(vals[0]), vecs[:, 0]
        self.prev = u
        if self.column_side:
            v = u
        else:
            v = (self.B.T @ u) / np.sqrt(mu)
            nv = np.linalg.norm(v)
            v = v / nv if nv > 0 else v
        return lam, v


def pietsch_weights(B, max_iters=2000, seed=0, step=0.5):
    """Simplex weights ``mu`` minimizing ``lambda_max(D^-1/2 B^T B D^-1/2)``.

    Mirror descent starts from the uniform vector with step ``step/sqrt(t)``
    and uses the gradient of ``log lambda_max``, ``-v_j^2 / mu_j``, where
    ``v`` is the top eigenvector, scaled by its largest entry. Zero columns of ``B`` are pinned to
    ``mu_j = 0``. The best iterate is returned with its certificate
    ``C = sqrt(lambda_max)`` re-evaluated exactly.
    """
    B = as_matrix(B)
    if max_iters < 1:
        raise ContractViolation("max_iters must be >= 1")
    active = np.einsum("ij,ij->j", B, B) > 0
    if not active.any():
        raise ContractViolation("pietsch_weights needs a matrix with a nonzero entry")
    Ba = B[:, active]
    m_act = Ba.shape[1]
    solver = _ScaledGram(Ba, make_rng(seed))

    log_mu = np.full(m_act, -np.log(m_act))
    best_f, best_log_mu = np.inf, log_mu
    for t in range(1, max_iters + 1):
        mu = np.exp(log_mu)
        f, v = solver.top(mu)
        if f < best_f:
            best_f, best_log_mu = f, log_mu
        if m_act == 1:
            break
        grad = (v * v) / mu
        # sup-norm normalized step keeps the multiplicative update bounded
        log_mu = log_mu + (step / np.sqrt(t)) * grad / grad.max()
        log_mu = np.maximum(_log_normalize(log_mu), LOG_MU_FLOOR)

    mu_act = np.exp(_log_normalize(best_log_mu))
    lam, _ = solver.top(mu_act, exact=True)
    mu = np.zeros(B.shape[1])
    mu[active] = mu_act
    return PietschWeights(mu=mu, certificate_C=float(np.sqrt(max(lam, 0.0))), iterations_used=t)


def certificate_value(B, mu):
    """Exact ``sqrt(lambda_max(D^-1/2 B^T B D^-1/2))`` over the support of ``mu``."""
    B = as_matrix(B)
    mu = np.asarray(mu, dtype=float)
    support = mu > 0
    Bs = B[:, support] / np.sqrt(mu[support])
    return float(np.linalg.svd(Bs, compute_uv=False)[0]) if Bs.size else 0.0


def check_weights(B, weights, atol=1e-9):
    mu = np.asarray(weights.mu, dtype=float)
    if mu.shape != (B.shape[1],):
        raise ContractViolation(f"weights have length {mu.size}, matrix has {B.shape[1]} columns")
    if np.any(mu < 0) or not np.all(np.isfinite(mu)):
        raise ContractViolation("weights must be finite and non-negative")
    if abs(mu.sum() - 1.0) > atol:
        raise ContractViolation(f"weights sum to {mu.sum():.12g}, expected 1")
    zero_w = mu == 0
    if np.any(np.abs(B[:, zero_w]).sum(axis=0) > 0):
        raise ContractViolation("zero weight on a nonzero column")
    if not weights.certificate_C >= 0:
        raise ContractViolation("certificate_C must be >= 0")


def gp_prune(B, weights, delta):
    """Columns ``J = {j : mu_j > 1/(delta m)}`` and the bound ``C / sqrt(delta m)``.

    Since ``sum mu = 1``, fewer than ``delta m`` columns can exceed the
    threshold; a column exactly at it stays.
    """
    B = as_matrix(B)
    if not 0 < delta <= 1:
        raise ContractViolation("delta must lie in (0, 1]")
    check_weights(B, weights)
    m = B.shape[1]
    J = IndexSet.of(weights.mu > 1.0 / (delta * m), m)
    return J, weights.certificate_C / np.sqrt(delta * m)


def zero_columns(B, J):
    out = np.array(B, dtype=float, copy=True)
    out[:, J.to_array()] = 0.0
    return out
