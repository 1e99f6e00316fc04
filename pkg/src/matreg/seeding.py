"""Seed handling.

Every random draw in the package goes through :func:`make_rng`, which builds a
counter-based Philox generator from a 64-bit seed plus optional integer keys.
Keys address independent substreams (for example ``(master_seed, trial)``), so
results never depend on the order in which trials are scheduled.
"""

import numpy as np

from .errors import ContractViolation

UINT64_MAX = 2**64 - 1


def check_seed(seed):
    seed = int(seed)
    if not 0 <= seed <= UINT64_MAX:
        raise ContractViolation(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def make_rng(seed, *keys):
    entropy = [check_seed(seed), *(int(k) for k in keys)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def derive_seed(master_seed, *keys):
    """Derive a child 64-bit seed from ``master_seed`` and integer keys."""
    ss = np.random.SeedSequence([check_seed(master_seed), *(int(k) for k in keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])
