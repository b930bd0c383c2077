"""Dense float64 vector/matrix helpers and a counter-based deterministic RNG.

Everything downstream (groups, kernels, samplers, training) draws randomness
through :class:`Rng` so that runs are bit-reproducible for a fixed seed and
independent of evaluation order across logical streams.
"""
from __future__ import annotations

import hashlib

import numpy as np

Array = np.ndarray


def as_vector(x) -> Array:
    """Coerce to a finite float64 1-D array."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite")
    return v


def as_matrix(x) -> Array:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("matrix entries must be finite")
    return v


def mat_apply(m, v) -> Array:
    """Matrix-vector product with an explicit shape check."""
    m = as_matrix(m)
    v = as_vector(v)
    if m.shape[1] != v.shape[0]:
        raise ValueError(f"shape mismatch: {m.shape} @ {v.shape}")
    return m @ v


def _derive_key(seed: int, labels: tuple) -> int:
    # Stable 128-bit Philox key from (seed, *labels); repr of ints/strs is
    # platform-independent.
    digest = hashlib.blake2b(repr((seed,) + labels).encode(), digest_size=16).digest()
    return int.from_bytes(digest, "little")


class Rng:
    """Seedable counter-based stream (Philox) with deterministic splitting.

    ``split(*labels)`` derives an independent stream keyed by the labels, so
    per-particle or per-epoch draws do not depend on the order in which other
    streams are consumed.
    """

    def __init__(self, seed: int, _key: int | None = None):
        self.seed = int(seed)
        key = _key if _key is not None else _derive_key(self.seed, ())
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def split(self, *labels) -> "Rng":
        return Rng(self.seed, _key=_derive_key(self.seed, labels))

    def uniform(self, n: int) -> Array:
        """n i.i.d. uniforms in [0, 1)."""
        return self._gen.random(int(n))

    def integers(self, lo: int, hi: int, n: int) -> Array:
        return self._gen.integers(lo, hi, size=int(n))


def sample_standard_normal(rng: Rng, dim: int) -> Array:
    """i.i.d. standard normals via Box-Muller on the uniform stream."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    half = (dim + 1) // 2
    u = rng.uniform(2 * half)
    u1 = 1.0 - u[:half]  # in (0, 1], keeps log finite
    u2 = u[half:]
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * half)
    z[0::2] = r * np.cos(2.0 * np.pi * u2)
    z[1::2] = r * np.sin(2.0 * np.pi * u2)
    return z[:dim]


def sample_normal_matrix(rng: Rng, rows: int, cols: int) -> Array:
    """Row-major block of standard normals (one Box-Muller stream)."""
    return sample_standard_normal(rng, rows * cols).reshape(rows, cols)


def sample_uniform_box(rng: Rng, dim: int, lo: float, hi: float) -> Array:
    """Entries uniform in [lo, hi)."""
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi})")
    return lo + (hi - lo) * rng.uniform(dim)
