import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nargpas.kernels import (
    NargpKernelParams,
    RbfArdParams,
    cross_matrix,
    gram,
    gram_with_gradients,
    nargp_kernel,
    params_from_dict,
    params_from_log,
    rbf_ard,
)


def unit_nargp(m=1):
    one = RbfArdParams(1.0, np.ones(m))
    return NargpKernelParams(one, RbfArdParams(1.0, [1.0]), one)


def random_params(rng, family, m):
    if family == "rbf":
        return RbfArdParams(np.exp(rng.normal()), np.exp(rng.normal(size=m)))
    r = lambda k: RbfArdParams(np.exp(rng.normal()), np.exp(rng.normal(size=k)))  # noqa: E731
    return NargpKernelParams(r(m), r(1), r(m))


def test_rbf_examples():
    assert rbf_ard([0.3, -1.2], [0.3, -1.2], RbfArdParams(2.5, [0.7, 3.0])) == 2.5
    assert rbf_ard([0.0], [1.0], RbfArdParams(1.0, [1.0])) == pytest.approx(0.6065306597126334, abs=1e-15)
    assert rbf_ard([0, 0], [1, 2], RbfArdParams(1.0, [1.0, 2.0])) == pytest.approx(np.exp(-1.0), rel=1e-15)


def test_rbf_errors():
    with pytest.raises(ValueError):
        rbf_ard([0.0, 1.0], [0.0], RbfArdParams(1.0, [1.0]))
    with pytest.raises(ValueError):
        RbfArdParams(0.0, [1.0])
    with pytest.raises(ValueError):
        RbfArdParams(1.0, [1.0, -2.0])


def test_nargp_examples():
    p = unit_nargp()
    assert nargp_kernel([0.4], 0.1, [0.4], 0.1, p) == 2.0
    e = np.exp(-0.5)
    assert nargp_kernel([0.0], 0.0, [1.0], 1.0, p) == pytest.approx(e * e + e, rel=1e-15)
    tiny = NargpKernelParams(RbfArdParams(1e-300, [1.0]), RbfArdParams(1.0, [1.0]), RbfArdParams(0.8, [2.0]))
    assert nargp_kernel([0.0], 3.0, [1.0], -1.0, tiny) == pytest.approx(rbf_ard([0.0], [1.0], tiny.delta))


def test_nargp_requires_one_f_lengthscale():
    one = RbfArdParams(1.0, [1.0, 1.0])
    with pytest.raises(ValueError):
        NargpKernelParams(one, RbfArdParams(1.0, [1.0, 1.0]), one)
    with pytest.raises(ValueError):
        NargpKernelParams(one, RbfArdParams(1.0, [1.0]), RbfArdParams(1.0, [1.0]))


def test_gram_examples(rng):
    np.testing.assert_array_equal(gram(np.array([[0.2, 0.1]]), RbfArdParams(3.0, [1.0, 1.0])), [[3.0]])
    K = gram(np.array([[0.5], [0.5]]), RbfArdParams(1.7, [0.3]))
    assert np.all(K == K[0, 0]) and np.linalg.matrix_rank(K) == 1
    P = rng.normal(size=(3, 2))
    p = RbfArdParams(1.3, [0.5, 2.0])
    brute = np.array([[rbf_ard(a, b, p) for b in P] for a in P])
    np.testing.assert_allclose(gram(P, p), brute, rtol=1e-13, atol=1e-15)


def test_gram_nargp_matches_brute_force(rng):
    X, f = rng.normal(size=(4, 2)), rng.normal(size=4)
    p = random_params(rng, "nargp", 2)
    brute = np.array([[nargp_kernel(X[i], f[i], X[j], f[j], p) for j in range(4)] for i in range(4)])
    np.testing.assert_allclose(gram(X, p, fvals=f), brute, rtol=1e-12)
    np.testing.assert_allclose(gram(np.hstack([X, f[:, None]]), p), brute, rtol=1e-12)
    with pytest.raises(ValueError):
        gram(X, RbfArdParams(1.0, [1.0, 1.0]), fvals=f)


@given(st.integers(0, 10_000), st.integers(1, 20), st.integers(1, 4), st.sampled_from(["rbf", "nargp"]))
def test_gram_symmetric_psd(seed, n, m, family):
    rng = np.random.default_rng(seed)
    p = random_params(rng, family, m)
    P = rng.normal(size=(n, m + (family == "nargp")))
    K = gram(P, p)
    assert np.array_equal(K, K.T)
    assert np.linalg.eigvalsh(K).min() >= -1e-8 * np.trace(K) / n


@given(st.integers(0, 10_000), st.floats(1.0001, 10.0))
def test_ard_monotone_in_lengthscale(seed, factor):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=3), rng.normal(size=3)
    ls = np.exp(rng.normal(size=3))
    j = int(rng.integers(3))
    longer = ls.copy()
    longer[j] *= factor
    assert rbf_ard(a, b, RbfArdParams(1.0, longer)) >= rbf_ard(a, b, RbfArdParams(1.0, ls))


@pytest.mark.parametrize("family", ["rbf", "nargp"])
def test_gram_gradients_finite_difference(rng, family):
    m = 3
    for _ in range(5):
        p = random_params(rng, family, m)
        X = rng.normal(size=(6, m + (family == "nargp")))
        theta = p.to_log()
        _, dK = gram_with_gradients(X, p)
        for k in range(theta.size):
            e = np.zeros_like(theta)
            e[k] = 1e-6
            fd = (gram(X, params_from_log(family, theta + e)) - gram(X, params_from_log(family, theta - e))) / 2e-6
            err = np.abs(fd - dK[k]).max() / max(np.abs(dK[k]).max(), 1e-12)
            assert err < 1e-5


def test_log_and_dict_round_trip(rng):
    for family in ("rbf", "nargp"):
        p = random_params(rng, family, 3)
        q = params_from_log(family, p.to_log())
        np.testing.assert_allclose(q.to_log(), p.to_log(), rtol=1e-15)
        r = params_from_dict(family, p.to_dict())
        np.testing.assert_array_equal(r.to_log(), p.to_log())


def test_cross_matrix_shape_check():
    with pytest.raises(ValueError):
        cross_matrix(np.zeros((2, 2)), np.zeros((2, 3)), RbfArdParams(1.0, [1.0, 1.0]))
