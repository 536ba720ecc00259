"""Dense vector/matrix helpers and the seeded generator.

Vectors and matrices are plain ``numpy.ndarray`` objects, float64 unless a
caller deliberately passes another floating dtype (the gradient checker
evaluates the forward pass in ``numpy.longdouble``).  Non-float input is
converted to float64.  The random generator is numpy's PCG64 bit
generator, which is documented and stable across platforms for a given
seed.
"""
import numpy as np

from .errors import DimensionMismatch, ZeroVector

DTYPE = np.float64


def as_float_array(values):
    a = np.asarray(values)
    if a.dtype.kind != "f":
        a = a.astype(DTYPE)
    return a


def as_vector(values):
    v = as_float_array(values)
    if v.ndim != 1:
        raise DimensionMismatch(f"expected a vector, got shape {v.shape}")
    return v


def concat(a, b):
    return np.concatenate([as_vector(a), as_vector(b)])


def softmax(z):
    z = as_vector(z)
    if z.size == 0:
        raise DimensionMismatch("softmax of an empty vector")
    e = np.exp(z - z.max())
    return e / e.sum()


def norm(a):
    return np.sqrt(np.dot(a, a))


def cosine(a, b):
    a = as_vector(a)
    b = as_vector(b)
    check_same_length(a, b)
    na, nb = norm(a), norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine of a zero-norm vector")
    c = np.dot(a, b) / (na * nb)
    return min(1.0, max(-1.0, c))


def matvec(m, v):
    """``m @ v`` with an explicit shape check."""
    if m.ndim != 2 or v.ndim != 1 or m.shape[1] != v.shape[0]:
        raise DimensionMismatch(f"cannot multiply {m.shape} by {v.shape}")
    return m @ v


def outer(a, b):
    return np.outer(a, b)


def check_same_length(a, b):
    if a.shape != b.shape:
        raise DimensionMismatch(f"length {a.shape} != {b.shape}")


class RngState:
    """Single-owner PCG64 stream.  Same seed, same draws."""

    def __init__(self, seed):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.generator = np.random.Generator(np.random.PCG64(self.seed))

    @classmethod
    def derived(cls, seed, stream):
        """Independent stream ``stream`` of a master seed."""
        rng = cls.__new__(cls)
        rng.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        ss = np.random.SeedSequence([rng.seed, int(stream)])
        rng.generator = np.random.Generator(np.random.PCG64(ss))
        return rng

    def normal(self, shape, scale):
        return seeded_normal(self, shape, scale)

    def permutation(self, n):
        return self.generator.permutation(n)


def seeded_normal(rng, n, scale):
    """``n`` (int or shape) draws from N(0, scale^2)."""
    if not scale > 0:
        raise ValueError("scale must be positive")
    if np.prod(n) < 1:
        raise ValueError("need at least one draw")
    return rng.generator.normal(0.0, scale, size=n).astype(DTYPE)
