import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from aogd.dataio import Example
from aogd.features import (
    IdentityMap,
    RffMap,
    default_feature_count,
    exact_gaussian,
    median_sq_distance,
    pairwise_kernel,
    rff_error_profile,
    rff_map,
    rff_sample,
)

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


def test_sample_shape_and_determinism():
    m = rff_sample(2, 4, [1.0, 1.0], seed=3)
    assert m.freqs.shape == (2, 2)
    again = rff_sample(2, 4, [1.0, 1.0], seed=3)
    np.testing.assert_array_equal(m.freqs, again.freqs)
    assert not np.array_equal(m.freqs, rff_sample(2, 4, 1.0, seed=4).freqs)


@pytest.mark.parametrize("kwargs", [dict(D=3), dict(D=0), dict(sigma=0.0), dict(sigma=[1.0, -1.0]), dict(d=0)])
def test_sample_rejects(kwargs):
    args = dict(d=2, D=4, sigma=1.0, seed=0)
    args.update(kwargs)
    with pytest.raises(ValueError):
        rff_sample(**args)


def test_frequency_mean_near_zero():
    # half a million rows of N(0, sigma) frequencies
    m = rff_sample(3, 2 * 500_000, [0.5, 1.0, 2.0], seed=11)
    assert np.all(np.abs(m.freqs.mean(axis=0)) < 0.01)
    np.testing.assert_allclose(m.freqs.var(axis=0), [0.5, 1.0, 2.0], rtol=0.01)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 4, elements=finite))
def test_unit_norm(x):
    m = rff_sample(4, 64, 0.7, seed=1)
    assert float(rff_map(m, x) @ rff_map(m, x)) == pytest.approx(1.0, abs=1e-12)


def test_zero_input_pattern():
    D = 8
    out = rff_sample(3, D, 1.0, seed=0).map(np.zeros(3))
    expect = math.sqrt(2 / D) * np.array([1.0, 0.0] * (D // 2))
    np.testing.assert_allclose(out, expect, atol=1e-15)


def test_sparse_and_dense_agree():
    m = rff_sample(5, 16, 1.0, seed=2)
    ex = Example.from_dict({2: 1.5, 5: -0.5}, 1)
    np.testing.assert_allclose(m.map(ex), m.map(ex.dense(5)), atol=1e-14)
    np.testing.assert_allclose(m.transform(ex.dense(5)[None, :])[0], m.map(ex), atol=1e-14)


def test_index_overflow():
    m = rff_sample(2, 4, 1.0, seed=0)
    with pytest.raises(ValueError, match="exceeds"):
        m.map(Example.from_dict({3: 1.0}, 1))
    with pytest.raises(ValueError):
        m.map(np.zeros(3))


def test_json_round_trip():
    m = rff_sample(3, 10, [0.1, 1.0, 2.0], seed=5)
    back = RffMap.from_json(json.loads(m.to_json()))
    np.testing.assert_array_equal(m.freqs, back.freqs)


def test_inner_product_approximates_kernel():
    rng = np.random.default_rng(0)
    sigma = np.array([0.5, 2.0, 1.0])
    m = rff_sample(3, 2 ** 14, sigma, seed=9)
    for _ in range(20):
        x, x2 = rng.uniform(-1, 1, (2, 3))
        assert abs(float(m.map(x) @ m.map(x2)) - exact_gaussian(x, x2, sigma)) < 0.05


def test_exact_gaussian_values():
    assert exact_gaussian([0.0], [2.0], [1.0]) == pytest.approx(math.exp(-2.0))
    assert exact_gaussian([1.0, 2.0], [1.0, 2.0], 1.0) == 1.0
    vals = [exact_gaussian([0.0], [r], 1.0) for r in (0.5, 1, 2, 4, 8)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-12


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (4, 3), elements=st.floats(-2, 2)))
def test_pairwise_kernel_identities(Q):
    x1, x2, x1p, x2p = Q
    assert pairwise_kernel(x1, x1, x1p, x2p, 1.0) == pytest.approx(0.0, abs=1e-12)
    assert pairwise_kernel(x1, x2, x1, x2, 1.0) >= -1e-12


def test_pairwise_kernel_matches_rff():
    rng = np.random.default_rng(4)
    m = rff_sample(2, 2 ** 12, 1.0, seed=13)
    for _ in range(20):
        x1, x2, x1p, x2p = rng.uniform(0, 1, (4, 2))
        est = float((m.map(x1) - m.map(x2)) @ (m.map(x1p) - m.map(x2p)))
        assert abs(est - pairwise_kernel(x1, x2, x1p, x2p, 1.0)) < 0.1


def test_error_profile_rate_and_determinism():
    sizes = [64, 256, 1024, 4096]
    rows = rff_error_profile(sizes, 300, seed=1)
    assert [r[0] for r in rows] == sizes
    assert rows == rff_error_profile(sizes, 300, seed=1)
    means = [r[2] for r in rows]
    # two quadruplings of D: error drops by about 4 overall
    assert 2.0 < means[0] / means[2] < 8.0
    with pytest.raises(ValueError):
        rff_error_profile(sizes, 0)


def test_identity_map():
    m = IdentityMap(3)
    np.testing.assert_array_equal(m.map(Example.from_dict({3: 2.0}, -1)), [0, 0, 2.0])
    assert m.dim_out == 3
    with pytest.raises(ValueError):
        m.map(Example.from_dict({4: 1.0}, 1))


@pytest.mark.parametrize("T,expect", [(1, 2), (100, 48), (614, 160), (2000, 340)])
def test_default_feature_count(T, expect):
    n = default_feature_count(T)
    assert n == expect and n % 2 == 0
    if T > 1:
        assert n >= math.sqrt(T) * math.log(T) > n - 2


def test_median_sq_distance():
    X = np.array([[0.0], [1.0], [3.0]])
    # squared distances 1, 9, 4
    assert median_sq_distance(X) == 4.0
    assert median_sq_distance(np.ones((4, 2))) == 1.0
