import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from safenews.errors import DimensionMismatch, ZeroVector
from safenews.numerics import RngState, concat, cosine, matvec, seeded_normal, softmax

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


@pytest.mark.parametrize("a,b,expected", [
    ([1, 2], [3], [1, 2, 3]),
    ([], [5], [5]),
    ([0], [0], [0, 0]),
])
def test_concat(a, b, expected):
    assert concat(a, b).tolist() == expected


def test_softmax_examples():
    np.testing.assert_allclose(softmax([0, 0]), [0.5, 0.5])
    np.testing.assert_allclose(softmax([1000, 1000]), [0.5, 0.5])
    e = math.e
    np.testing.assert_allclose(softmax([1, 0]), [e / (e + 1), 1 / (e + 1)], atol=1e-15)
    np.testing.assert_allclose(softmax([1, 0]), [0.7311, 0.2689], atol=1e-4)


def test_softmax_rejects_empty():
    with pytest.raises(DimensionMismatch):
        softmax([])


@given(arrays(np.float64, st.integers(1, 8), elements=finite), finite)
def test_softmax_properties(z, c):
    p = softmax(z)
    assert np.all(p > 0)
    assert abs(p.sum() - 1.0) < 1e-12
    np.testing.assert_allclose(softmax(z + c), p, rtol=1e-9, atol=1e-15)
    perm = np.arange(len(z))[::-1]
    np.testing.assert_allclose(softmax(z[perm]), p[perm], rtol=1e-12)


@given(st.lists(finite, max_size=5), st.lists(finite, max_size=5), st.lists(finite, max_size=5))
def test_concat_associative(a, b, c):
    left = concat(concat(a, b), c)
    assert left.tolist() == concat(a, concat(b, c)).tolist()
    assert len(concat(a, b)) == len(a) + len(b)


def test_cosine_examples():
    assert cosine([1, 1], [1, 1]) == pytest.approx(1.0)
    assert cosine([1, 0], [0, 1]) == 0.0
    assert cosine([1, 0], [-1, 0]) == -1.0
    with pytest.raises(ZeroVector):
        cosine([0, 0], [1, 0])


@settings(max_examples=200)
@given(arrays(np.float64, 4, elements=st.floats(-10, 10)), st.floats(1e-3, 1e3))
def test_cosine_scale_and_symmetry(a, lam):
    if np.linalg.norm(a) < 1e-6:
        return
    assert cosine(a, lam * a) == pytest.approx(1.0, abs=1e-12)
    b = a[::-1] + 0.5
    if np.linalg.norm(b) > 1e-6:
        assert cosine(a, b) == cosine(b, a)


def test_matvec_checks_dimensions():
    with pytest.raises(DimensionMismatch):
        matvec(np.zeros((2, 3)), np.zeros(2))


def test_seeded_normal_determinism():
    a = seeded_normal(RngState(7), 3, 1.0)
    b = seeded_normal(RngState(7), 3, 1.0)
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, seeded_normal(RngState(8), 3, 1.0))


def test_seeded_normal_rejects_zero_scale():
    with pytest.raises(ValueError):
        seeded_normal(RngState(7), 3, 0.0)


def test_seeded_normal_moments():
    x = seeded_normal(RngState(7), 10_000, 1.0)
    assert abs(x.mean()) < 0.05
    assert abs(x.std() - 1.0) < 0.05
    y = seeded_normal(RngState(7), 10_000, 0.1)
    assert abs(y.std() - 0.1) < 0.005


def test_derived_streams_are_independent_and_reproducible():
    a = RngState.derived(1, 0).normal(5, 1.0)
    assert a.tobytes() == RngState.derived(1, 0).normal(5, 1.0).tobytes()
    assert not np.array_equal(a, RngState.derived(1, 1).normal(5, 1.0))
