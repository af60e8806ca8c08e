"""Synthetic data generators for the benchmark and the theory checks.

Every generator returns an :class:`Instance`: an observed matrix together
with the ground truth that produced it (anchor basis, mixing weights,
noise, anchor positions, noise budget). Columns are data points; the
canonical, unpermuted column order is ``[anchors | (outliers) | mixtures]``
and the stored permutation maps observed positions back to that order.
"""

from __future__ import annotations

import itertools
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, GenerationError
from .linalg import norm1_induced, normalize_columns_l1, read_matrix_text, write_matrix_text
from .validation import ensure_rng

__all__ = [
    "ModelDescriptor",
    "Instance",
    "gen_noise",
    "gen_dirichlet",
    "gen_middle_points",
    "gen_swimmer",
    "gen_example1",
    "gen_thm1b",
    "thm1b_adversarial_p",
    "gen_outlier_instance",
    "save_instance",
    "load_instance",
]

H_MODELS = ("dirichlet", "middle_points", "adversarial_example1", "adversarial_thm1b", "swimmer", "outlier")
NOISE_PATTERNS = ("dense", "sparse", "pointwise", "structural", "none")


@dataclass
class ModelDescriptor:
    """Names the recipe an instance came from plus its scalar parameters."""

    h_model: str
    noise_pattern: str
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.h_model not in H_MODELS:
            raise ValueError(f"unknown h_model {self.h_model!r}")
        if self.noise_pattern not in NOISE_PATTERNS:
            raise ValueError(f"unknown noise_pattern {self.noise_pattern!r}")

    def to_dict(self):
        return {
            "h_model": self.h_model,
            "noise_pattern": self.noise_pattern,
            "parameters": {k: float(v) for k, v in self.parameters.items()},
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["h_model"], d["noise_pattern"], dict(d.get("parameters", {})))

    @property
    def tag(self):
        """Short name used in benchmark CSV rows, e.g. ``dirichlet/sparse``."""
        return f"{self.h_model}/{self.noise_pattern}"


@dataclass
class Instance:
    """A (possibly noisy) separable problem with its ground truth.

    ``m_tilde = w_true @ h_true + noise`` holds entrywise; ``h_true`` and
    ``noise`` are stored in observed (permuted) column order, so
    ``h_true[:, true_indices]`` is the identity.
    """

    m_tilde: np.ndarray
    w_true: np.ndarray
    h_true: np.ndarray
    noise: np.ndarray
    true_indices: np.ndarray
    outlier_indices: np.ndarray
    epsilon: float
    model: ModelDescriptor
    seed: int
    permutation: np.ndarray  # observed position -> canonical position

    @property
    def shape(self):
        return self.m_tilde.shape

    @property
    def rank(self):
        return len(self.true_indices)

    def canonical_order(self):
        """Column order that undoes the permutation (observed -> canonical)."""
        return np.argsort(self.permutation)


def _finish_instance(w, h, noise, true_cols, outlier_cols, epsilon, model, seed, rng=None):
    """Permute canonical columns and assemble the Instance record."""
    n = h.shape[1]
    if rng is None:
        perm = np.arange(n)
    else:
        perm = rng.permutation(n)
    inv = np.empty(n, dtype=int)
    inv[perm] = np.arange(n)
    h_obs = h[:, perm]
    noise_obs = noise[:, perm]
    return Instance(
        m_tilde=w @ h_obs + noise_obs,
        w_true=w,
        h_true=h_obs,
        noise=noise_obs,
        true_indices=inv[np.asarray(true_cols, dtype=int)],
        outlier_indices=inv[np.asarray(outlier_cols, dtype=int)],
        epsilon=float(epsilon),
        model=model,
        seed=int(seed) if seed is not None else 0,
        permutation=perm,
    )


def _apply_pattern(noise, pattern, rng):
    """Mask ``noise`` in place according to the density pattern."""
    if pattern in ("dense", "structural", "none"):
        return noise
    if pattern == "sparse":
        keep = rng.random(noise.shape) < 0.25
        return noise * keep
    if pattern == "pointwise":
        out = np.zeros_like(noise)
        for j in range(noise.shape[1]):
            nz = np.flatnonzero(noise[:, j])
            if nz.size:
                i = nz[rng.integers(nz.size)]
                out[i, j] = noise[i, j]
        return out
    raise ValueError(f"unknown noise pattern {pattern!r}")


def _scale_to_budget(noise, epsilon):
    cur = norm1_induced(noise) if noise.size else 0.0
    if epsilon == 0:
        return np.zeros_like(noise)
    if cur == 0:
        raise GenerationError("noise requested but every entry was masked to zero")
    return noise * (epsilon / cur)


def gen_noise(shape, pattern, protect, epsilon, rng):
    """Draw a noise matrix with max column absolute sum exactly ``epsilon``.

    ``dense`` keeps every standard-normal entry, ``sparse`` keeps a
    Bernoulli(0.25) subset, ``pointwise`` keeps at most one nonzero per
    column. Columns listed in ``protect`` are forced to zero before
    scaling.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    m, n = shape
    if epsilon == 0:
        return np.zeros((m, n))
    noise = rng.standard_normal((m, n))
    protect = np.asarray(protect, dtype=int)
    if protect.size:
        noise[:, protect] = 0.0
    noise = _apply_pattern(noise, pattern, rng)
    return _scale_to_budget(noise, epsilon)


def _dirichlet_columns(r, count, rng, beta_max=None):
    """Mixture weight columns on the unit simplex, one Dirichlet parameter
    vector (drawn uniformly) per call."""
    if count == 0:
        return np.zeros((r, 0))
    alpha = np.maximum(rng.random(r), 1e-12)
    cols = rng.dirichlet(alpha, size=count).T
    if beta_max is not None:
        if r == 1:
            raise GenerationError("cannot cap the largest weight with a single anchor")
        if beta_max < 1.0 / r:
            raise GenerationError(f"beta_max={beta_max} below simplex floor 1/r")
        cols = _cap_max_entry(cols, beta_max)
    return cols


def _cap_max_entry(cols, beta_max):
    """Shrink simplex columns toward the barycenter until no entry exceeds
    ``beta_max``; column sums stay 1."""
    r = cols.shape[0]
    top = cols.max(axis=0)
    need = top > beta_max
    if np.any(need):
        c = (beta_max - 1.0 / r) / (top[need] - 1.0 / r)
        cols[:, need] = c * cols[:, need] + (1.0 - c) / r
    return cols


def gen_dirichlet(m, n, r, epsilon, pattern, rng, beta_max=None):
    """Random anchors with Dirichlet-mixed interior points and patterned
    Gaussian noise scaled to the requested budget."""
    rng = ensure_rng(rng)
    if r > min(m, n):
        raise DimensionError(f"need r <= min(m, n), got r={r}, m={m}, n={n}")
    w = normalize_columns_l1(rng.random((m, r)))[0]
    h = np.hstack([np.eye(r), _dirichlet_columns(r, n - r, rng, beta_max)])
    noise = gen_noise((m, n), pattern, [], epsilon, rng)
    model = ModelDescriptor("dirichlet", pattern, {"m": m, "n": n, "r": r})
    return _finish_instance(w, h, noise, np.arange(r), [], epsilon, model, _seed_of(rng), rng)


def gen_middle_points(m, n, r, epsilon, pattern, rng):
    """Anchors plus all pairwise midpoints, with the non-anchor columns
    pushed away from the barycenter of the anchors by the noise."""
    rng = ensure_rng(rng)
    pairs = list(itertools.combinations(range(r), 2))
    if n < r + len(pairs):
        raise DimensionError(f"need n >= r + r(r-1)/2 = {r + len(pairs)}, got {n}")
    if r > m:
        raise DimensionError(f"need r <= m, got r={r}, m={m}")
    w = normalize_columns_l1(rng.random((m, r)))[0]
    mid = np.zeros((r, len(pairs)))
    for col, (a, b) in enumerate(pairs):
        mid[a, col] = mid[b, col] = 0.5
    rest = _dirichlet_columns(r, n - r - len(pairs), rng)
    h = np.hstack([np.eye(r), mid, rest])
    data = w @ h
    centroid = w.mean(axis=1)
    direction = data - centroid[:, None]
    direction[:, :r] = 0.0
    direction = _apply_pattern(direction, pattern, rng)
    noise = _scale_to_budget(direction, epsilon)
    model = ModelDescriptor("middle_points", pattern, {"m": m, "n": n, "r": r})
    return _finish_instance(w, h, noise, np.arange(r), [], epsilon, model, _seed_of(rng), rng)


def gen_swimmer(limbs=4, positions=4, background=None):
    """Binary stick-figure image collection, one row per image and one
    column per pixel.

    Each of the ``limbs * positions`` limb placements owns three identical
    pixel columns, body pixels are all-ones columns, background pixels are
    zero columns. The default (4, 4) gives the classic 256x220 matrix whose
    nonnegative rank is 16 while its linear rank is 13.
    """
    if limbs < 1 or positions < 2:
        raise DimensionError("need limbs >= 1 and positions >= 2")
    r = limbs * positions
    images = positions ** limbs
    w = np.zeros((images, r))
    for img in range(images):
        rem = img
        for limb in range(limbs):
            pos = rem % positions
            rem //= positions
            w[img, limb * positions + pos] = 1.0
    body = r - 2
    if background is None:
        background = 158 if (limbs, positions) == (4, 4) else 2 * r
    h = np.hstack(
        [
            np.eye(r),
            np.eye(r),
            np.eye(r),
            np.full((r, body), 1.0 / limbs),
            np.zeros((r, background)),
        ]
    )
    noise = np.zeros((images, h.shape[1]))
    model = ModelDescriptor(
        "swimmer", "none", {"limbs": limbs, "positions": positions, "r": r}
    )
    return _finish_instance(w, h, noise, np.arange(r), [], 0.0, model, 0, None)


def gen_example1(r):
    """Identity anchors plus their barycenter as the single extra column."""
    if r < 2:
        raise DimensionError("need r >= 2")
    w = np.eye(r)
    h = np.hstack([np.eye(r), np.full((r, 1), 1.0 / r)])
    noise = np.zeros((r, r + 1))
    model = ModelDescriptor("adversarial_example1", "none", {"r": r})
    return _finish_instance(w, h, noise, np.arange(r), [], 0.0, model, 0, None)


def gen_thm1b(r, kappa, beta, big=1e6):
    """Worst-case construction whose anchors sit at a controlled conic
    margin ``kappa`` with companion points at mixing weight ``beta``.

    Returns ``(instance, p)`` where ``p`` is the adversarial objective
    vector (large entries on the anchors, ones elsewhere).
    """
    if r < 2:
        raise DimensionError("need r >= 2")
    if not (0 < kappa <= 1):
        raise ValueError("need 0 < kappa <= 1")
    if not (1.0 / r <= beta < 1):
        raise ValueError("need 1/r <= beta < 1")
    w = np.vstack([0.5 * kappa * np.eye(r), (1 - 0.5 * kappa) * np.ones((1, r))])
    companions = beta * np.eye(r) + (1 - beta) / (r - 1) * (np.ones((r, r)) - np.eye(r))
    h = np.hstack([np.eye(r), companions])
    noise = np.zeros((r + 1, 2 * r))
    model = ModelDescriptor(
        "adversarial_thm1b", "none", {"r": r, "kappa": kappa, "beta": beta}
    )
    inst = _finish_instance(w, h, noise, np.arange(r), [], 0.0, model, 0, None)
    return inst, thm1b_adversarial_p(r, big)


def thm1b_adversarial_p(r, big=1e6):
    """Objective vector that makes the anchors maximally expensive."""
    return np.concatenate([np.full(r, float(big)), np.ones(r)])


def gen_outlier_instance(m, r, t, n, epsilon, rng, max_tries=25):
    """Separable instance with ``t`` outlier columns appended to the
    anchors, built so the outlier cone keeps a positive angle to the
    anchor span and every anchor is needed by at least one data point.

    The achieved conditioning (kappa of ``[anchors, outliers]``, the cone
    angle, the necessity margin and the max mixing weight) is recorded in
    the model parameters; construction retries until all are positive.
    """
    from .analysis import kappa as kappa_of
    from .analysis import outlier_conditions

    rng = ensure_rng(rng)
    if m < r:
        raise DimensionError("need m >= r")
    if n < r + t + 1:
        raise DimensionError("need n >= r + t + 1")
    if t > 0 and m < r + 1:
        raise DimensionError("need m > r to fit outliers outside the anchor span")
    n_data = n - r - t
    last_err = None
    for _ in range(max_tries):
        w = 0.85 * np.vstack([np.eye(r), np.zeros((m - r, r))]) + 0.15 * rng.random((m, r))
        w = normalize_columns_l1(w)[0]
        h_data = _cap_max_entry(rng.dirichlet(np.ones(r), size=n_data).T, 0.85)
        t_mat = np.zeros((m, t))
        for k in range(t):
            inside = w @ rng.dirichlet(np.ones(r))
            spike = np.zeros(m)
            spike[r + (k % (m - r))] = 1.0
            t_mat[:, k] = 0.45 * inside + 0.55 * spike
        t_mat = normalize_columns_l1(t_mat)[0] if t else t_mat
        data = w @ h_data
        if t:
            eta, delta = outlier_conditions(w, t_mat, data)
            kap = kappa_of(np.hstack([w, t_mat]))
        else:
            eta, delta = np.inf, np.inf
            kap = kappa_of(w)
        beta = float(h_data.max()) if n_data else 0.0
        if min(kap, eta, delta) > 1e-3 and beta < 1:
            break
        last_err = f"kappa={kap:.3g}, eta={eta:.3g}, delta={delta:.3g}"
    else:
        raise GenerationError(f"could not reach positive conditioning: {last_err}")

    h = np.zeros((r + t, n))
    h[:r, :r] = np.eye(r)
    h[r:, r : r + t] = np.eye(t)
    h[:r, r + t :] = h_data
    basis = np.hstack([w, t_mat])
    noise = gen_noise((m, n), "dense", [], epsilon, rng)
    params = {
        "m": m, "n": n, "r": r, "t": t,
        "kappa": kap, "beta": beta,
        "eta": eta if np.isfinite(eta) else -1.0,
        "delta": delta if np.isfinite(delta) else -1.0,
        "nu": min(kap, eta, delta) if t else kap,
    }
    model = ModelDescriptor("outlier", "dense", params)
    inst = _finish_instance(
        basis, h, noise, np.arange(r), np.arange(r, r + t), epsilon, model, _seed_of(rng), rng
    )
    # ground truth of the factorization is the anchor block only
    inst.w_true = w
    return inst


def _seed_of(rng):
    """Best-effort seed echo for provenance; 0 when untraceable."""
    try:
        return int(rng.bit_generator.seed_seq.entropy) & 0xFFFFFFFFFFFFFFFF
    except (AttributeError, TypeError):
        return 0


def save_instance(instance, directory):
    """Write an instance as matrix text files plus a JSON manifest.

    Index lists in the manifest are 1-based, matching the extraction
    result dumps.
    """
    os.makedirs(directory, exist_ok=True)
    write_matrix_text(instance.m_tilde, os.path.join(directory, "m_tilde.txt"))
    write_matrix_text(instance.w_true, os.path.join(directory, "w_true.txt"))
    write_matrix_text(instance.h_true, os.path.join(directory, "h_true.txt"))
    write_matrix_text(instance.noise, os.path.join(directory, "noise.txt"))
    manifest = {
        "model": instance.model.to_dict(),
        "epsilon": instance.epsilon,
        "seed": instance.seed,
        "true_indices": [int(i) + 1 for i in instance.true_indices],
        "outlier_indices": [int(i) + 1 for i in instance.outlier_indices],
        "permutation": [int(i) + 1 for i in instance.permutation],
    }
    with open(os.path.join(directory, "manifest.json"), "w", encoding="ascii") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_instance(directory):
    with open(os.path.join(directory, "manifest.json"), "r", encoding="ascii") as fh:
        manifest = json.load(fh)
    return Instance(
        m_tilde=read_matrix_text(os.path.join(directory, "m_tilde.txt")),
        w_true=read_matrix_text(os.path.join(directory, "w_true.txt")),
        h_true=read_matrix_text(os.path.join(directory, "h_true.txt")),
        noise=read_matrix_text(os.path.join(directory, "noise.txt")),
        true_indices=np.array([i - 1 for i in manifest["true_indices"]], dtype=int),
        outlier_indices=np.array([i - 1 for i in manifest["outlier_indices"]], dtype=int),
        epsilon=float(manifest["epsilon"]),
        model=ModelDescriptor.from_dict(manifest["model"]),
        seed=int(manifest["seed"]),
        permutation=np.array([i - 1 for i in manifest["permutation"]], dtype=int),
    )
