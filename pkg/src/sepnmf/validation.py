"""Input validation helpers and the deterministic RNG contract.

All numeric data flows through ``check_matrix`` so that no NaN/Inf ever
enters the solvers, and all stochastic code receives a
``numpy.random.Generator`` created by ``ensure_rng``: the same 64-bit seed
always reproduces the same stream within this package.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, PreconditionError

__all__ = [
    "check_matrix",
    "check_vector",
    "check_positive_vector",
    "check_l1_normalized",
    "distinct_entries",
    "ensure_rng",
    "spawn_seeds",
]


def check_matrix(a, name="matrix", allow_empty=False):
    """Coerce ``a`` to a 2-D float64 array with all entries finite.

    Raises ``DimensionError`` for empty input unless ``allow_empty`` and
    ``ValueError`` for non-finite entries.
    """
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got ndim={arr.ndim}")
    if arr.size == 0 and not allow_empty:
        raise DimensionError(f"{name} is empty (shape {arr.shape})")
    if arr.size and not np.isfinite(arr).all():
        raise ValueError(f"{name} contains NaN or Inf entries")
    return arr


def check_vector(v, name="vector", length=None):
    arr = np.asarray(v, dtype=float).ravel()
    if arr.size == 0:
        raise DimensionError(f"{name} is empty")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains NaN or Inf entries")
    if length is not None and arr.size != length:
        raise DimensionError(f"{name} has length {arr.size}, expected {length}")
    return arr


def check_positive_vector(v, name="p", length=None):
    arr = check_vector(v, name=name, length=length)
    if np.any(arr <= 0):
        raise PreconditionError(f"{name} must have strictly positive entries")
    return arr


def check_l1_normalized(a, tol=1e-9, name="matrix", allow_zero_columns=False):
    """Require every column's absolute sum to be 1 within ``tol``.

    Zero columns are accepted when ``allow_zero_columns`` (they cannot be
    normalized and are handled separately downstream).
    """
    arr = check_matrix(a, name=name)
    sums = np.abs(arr).sum(axis=0)
    bad = np.abs(sums - 1.0) > tol
    if allow_zero_columns:
        bad &= sums > tol
    if np.any(bad):
        j = int(np.argmax(bad))
        raise PreconditionError(
            f"{name} column {j} has absolute sum {sums[j]:.12g}, expected 1"
        )
    return arr


def distinct_entries(p, rel=1e-9):
    """Return a copy of ``p`` with exact duplicates broken by a tiny
    deterministic, index-ordered perturbation."""
    p = np.array(p, dtype=float)
    if np.unique(p).size == p.size:
        return p
    scale = max(float(np.max(np.abs(p))), 1.0) * rel
    return p + scale * np.arange(p.size)


def ensure_rng(seed=None):
    """Return a ``numpy.random.Generator``.

    Accepts ``None`` (fresh entropy), a 64-bit integer seed, a
    ``SeedSequence`` or an existing ``Generator`` (passed through).
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def spawn_seeds(root_seed, *key):
    """Derive a collision-free child seed from ``root_seed`` and an integer
    key tuple; deterministic across runs."""
    seq = np.random.SeedSequence(entropy=int(root_seed), spawn_key=tuple(int(k) for k in key))
    return int(seq.generate_state(1, dtype=np.uint64)[0])
