"""Seeded entry distributions for random test matrices.

Specs serialize to short config strings such as ``gaussian:mean=0,variance=1``,
``sparse_sign:p=0.0001``, ``sparse_big``, ``pareto_sym:alpha=2.1`` and
``shifted_gaussian:mu=0.5``.
"""

from dataclasses import dataclass, fields

import numpy as np

from .errors import ContractViolation
from .matcore import as_matrix
from .seeding import make_rng

JITTER = 1e-9


@dataclass(frozen=True)
class Gaussian:
    mean: float = 0.0
    variance: float = 1.0

    def validate(self):
        if not self.variance > 0:
            raise ContractViolation("gaussian variance must be > 0")

    def sample(self, rng, size, n):
        return rng.normal(self.mean, np.sqrt(self.variance), size=size)

    def abs_survival(self, n):
        from scipy.stats import norm

        sd = np.sqrt(self.variance)

        def surv(t):
            t = np.asarray(t, dtype=float)
            s = norm.sf((t - self.mean) / sd) + norm.cdf((-t - self.mean) / sd)
            return np.where(t <= 0, 1.0, s)

        return surv


@dataclass(frozen=True)
class SparseSign:
    """``+-1/sqrt(p)`` with probability ``p/2`` each, zero otherwise."""

    p: float = 0.5
    jitter: bool = False

    def validate(self):
        if not 0 < self.p <= 1:
            raise ContractViolation("sparse_sign p must lie in (0, 1]")

    def sample(self, rng, size, n):
        return _sparse_sign(rng, size, self.p, 1.0 / np.sqrt(self.p), self.jitter)

    def abs_survival(self, n):
        mag = 1.0 / np.sqrt(self.p)
        return lambda t: np.where(np.asarray(t) <= 0, 1.0,
                                  np.where(np.asarray(t) <= mag, self.p, 0.0))


@dataclass(frozen=True)
class SparseBig:
    """``+-sqrt(n)`` with probability ``1/(2n)`` each, zero otherwise."""

    jitter: bool = False

    def validate(self):
        pass

    def sample(self, rng, size, n):
        return _sparse_sign(rng, size, 1.0 / n, np.sqrt(n), self.jitter)

    def abs_survival(self, n):
        mag = np.sqrt(n)
        return lambda t: np.where(np.asarray(t) <= 0, 1.0,
                                  np.where(np.asarray(t) <= mag, 1.0 / n, 0.0))


@dataclass(frozen=True)
class ParetoSym:
    """Symmetric two-sided Pareto: ``sign * U**(-1/alpha)`` with ``U ~ (0, 1]``.

    When ``alpha > moment`` the draws are rescaled so that
    ``E|X|**moment == 1`` (``moment=2`` gives unit variance). Otherwise the
    raw variable is used and ``infinite_variance`` may be set.
    """

    alpha: float = 3.0
    moment: float = 2.0

    def validate(self):
        if not self.alpha > 0:
            raise ContractViolation("pareto_sym alpha must be > 0")
        if not self.moment > 0:
            raise ContractViolation("pareto_sym moment must be > 0")

    @property
    def infinite_variance(self):
        return self.alpha <= 2

    @property
    def scale(self):
        if self.alpha > self.moment:
            # E U^(-moment/alpha) = alpha / (alpha - moment)
            return ((self.alpha - self.moment) / self.alpha) ** (1.0 / self.moment)
        return 1.0

    def sample(self, rng, size, n):
        u = 1.0 - rng.random(size)
        sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
        return sign * self.scale * u ** (-1.0 / self.alpha)

    def abs_survival(self, n):
        s, a = self.scale, self.alpha

        def surv(t):
            t = np.asarray(t, dtype=float)
            with np.errstate(divide="ignore"):
                return np.minimum(1.0, (np.maximum(t, 0.0) / s) ** (-a))

        return surv


@dataclass(frozen=True)
class ShiftedGaussian:
    mu: float = 1.0

    def validate(self):
        if self.mu == 0:
            raise ContractViolation("shifted_gaussian mu must be nonzero")

    def sample(self, rng, size, n):
        return rng.normal(self.mu, 1.0, size=size)

    def abs_survival(self, n):
        return Gaussian(self.mu, 1.0).abs_survival(n)


def _sparse_sign(rng, size, p, mag, jitter):
    u = rng.random(size)
    out = np.where(u < p / 2, mag, np.where(u < p, -mag, 0.0))
    if jitter:
        out = out + rng.uniform(0.0, JITTER, size=size)
    return out


_KINDS = {
    "gaussian": Gaussian,
    "sparse_sign": SparseSign,
    "sparse_big": SparseBig,
    "pareto_sym": ParetoSym,
    "shifted_gaussian": ShiftedGaussian,
}
_NAMES = {cls: name for name, cls in _KINDS.items()}


def parse_spec(text):
    """Parse ``kind:key=value,...`` into a distribution spec."""
    kind, _, params = text.strip().partition(":")
    try:
        cls = _KINDS[kind]
    except KeyError:
        raise ContractViolation(f"unknown distribution {kind!r}; expected one of {sorted(_KINDS)}") from None
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for item in filter(None, (s.strip() for s in params.split(","))):
        key, eq, value = item.partition("=")
        if not eq or key not in known:
            raise ContractViolation(f"bad parameter {item!r} for {kind}")
        if known[key].type in (bool, "bool"):
            kwargs[key] = value.lower() in ("1", "true", "yes", "on")
        else:
            kwargs[key] = float(value)
    spec = cls(**kwargs)
    spec.validate()
    return spec


def format_spec(spec):
    parts = []
    for f in fields(spec):
        v = getattr(spec, f.name)
        if isinstance(v, bool):
            if v:
                parts.append(f"{f.name}=1")
        else:
            parts.append(f"{f.name}={v!r}")
    name = _NAMES[type(spec)]
    return f"{name}:{','.join(parts)}" if parts else name


def sample_matrix(spec, n, seed, n_cols=None):
    """``n x n`` (or ``n x n_cols``) matrix of i.i.d. draws from ``spec``."""
    if isinstance(spec, str):
        spec = parse_spec(spec)
    spec.validate()
    if n < 1 or (n_cols is not None and n_cols < 1):
        raise ContractViolation("matrix dimensions must be >= 1")
    shape = (n, n if n_cols is None else n_cols)
    return spec.sample(make_rng(seed), shape, n).astype(np.float64)


def moment_summary(A):
    """Empirical ``(mean, second_moment, fourth_moment, max_abs)`` over all entries."""
    A = as_matrix(A)
    sq = A * A
    return (float(A.mean()), float(sq.mean()), float((sq * sq).mean()), float(np.abs(A).max()))
