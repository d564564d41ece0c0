import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nargpas.core import Box
from nargpas.sampling import SamplerSpec, latin_hypercube, sample, sobol


def strata_ok(u):
    n = u.shape[0]
    return all(np.array_equal(np.sort(np.floor(u[:, j] * n)), np.arange(n)) for j in range(u.shape[1]))


@pytest.mark.parametrize("n", [4, 101, 1000])
def test_lhs_stratification(n):
    box = Box(np.array([-3.0, 0.0, 10.0]), np.array([5.0, 1e-3, 11.0]))
    X = sample(SamplerSpec("lhs", n, box, seed=n))
    assert strata_ok((X - box.lower) / (box.upper - box.lower))


def test_lhs_quarters_1d():
    u = sample(SamplerSpec("lhs", 4, Box.unit(1), seed=0))[:, 0]
    assert sorted(np.floor(u * 4).astype(int).tolist()) == [0, 1, 2, 3]


@given(st.integers(1, 300), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_lhs_property(n, m, seed):
    u = latin_hypercube(n, m, np.random.default_rng(seed))
    assert u.min() >= 0 and u.max() < 1 and strata_ok(u)


def gray_sobol(n, skip=1):
    """Reference 2D Sobol: dimension 1 has direction numbers m_k = 1, dimension 2
    uses the primitive polynomial x + 1 (m_1 = 1); Gray-code point order."""
    B = 32
    m1 = [1] * B
    m2 = [1]
    for _ in range(1, B):
        m2.append((2 * m2[-1]) ^ m2[-1])
    v1 = [m1[k] << (B - k - 1) for k in range(B)]
    v2 = [m2[k] << (B - k - 1) for k in range(B)]
    out = []
    for i in range(skip, skip + n):
        g = i ^ (i >> 1)
        a = b = 0
        for k in range(B):
            if g >> k & 1:
                a ^= v1[k]
                b ^= v2[k]
        out.append((a / 2**B, b / 2**B))
    return np.array(out)


def test_sobol_first_points():
    assert sobol(3, 1)[:, 0].tolist() == [0.5, 0.75, 0.25]
    np.testing.assert_array_equal(sobol(64, 2), gray_sobol(64))
    np.testing.assert_array_equal(sobol(10, 2, skip=5), gray_sobol(10, skip=5))


def test_sobol_deterministic_and_skip_zero():
    box = Box(np.array([1.0, 2.0]), np.array([3.0, 4.0]))
    a = sample(SamplerSpec("sobol", 16, box, sobol_skip=0))
    assert np.array_equal(a, sample(SamplerSpec("sobol", 16, box, sobol_skip=0)))
    np.testing.assert_array_equal(a[0], box.lower)


def test_uniform_deterministic_and_inside():
    box = Box(np.array([-1.0, 5.0]), np.array([1.0, 6.0]))
    a = sample(SamplerSpec("uniform", 50, box, seed=4))
    assert np.array_equal(a, sample(SamplerSpec("uniform", 50, box, seed=4)))
    assert box.contains(a).all()


def star_discrepancy(P):
    """Brute force over every anchored box whose corner coordinates are point
    coordinates or 1, counting both open and closed boxes."""
    n = P.shape[0]
    xs = np.unique(np.append(P[:, 0], 1.0))
    ys = np.unique(np.append(P[:, 1], 1.0))
    lt_x = P[:, 0][None, :] < xs[:, None]
    le_x = P[:, 0][None, :] <= xs[:, None]
    lt_y = P[:, 1][None, :] < ys[:, None]
    le_y = P[:, 1][None, :] <= ys[:, None]
    area = xs[:, None] * ys[None, :]
    open_count = lt_x.astype(float) @ lt_y.T.astype(float)
    closed_count = le_x.astype(float) @ le_y.T.astype(float)
    return max(np.max(area - open_count / n), np.max(closed_count / n - area))


def test_star_discrepancy_oracle_small():
    assert star_discrepancy(np.array([[0.5, 0.5]])) == pytest.approx(0.75)


@pytest.mark.parametrize("seed", range(10))
def test_sobol_beats_uniform_discrepancy(seed):
    s = star_discrepancy(sobol(256, 2))
    u = star_discrepancy(np.random.default_rng(seed).uniform(size=(256, 2)))
    assert s < u


def test_spec_validation():
    with pytest.raises(ValueError):
        SamplerSpec("grid", 3, Box.unit(1))
    with pytest.raises(ValueError):
        SamplerSpec("lhs", 0, Box.unit(1))
    assert SamplerSpec("LHS", 3, Box.unit(1)).kind == "lhs"
