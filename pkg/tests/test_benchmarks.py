import math

import numpy as np
import pytest

from nargpas import benchmarks as bm


def ebola_reference(p):
    b1, b2, b3, r1, g1, g2, w, psi = (float(v) for v in p)
    return (b1 + b2 * r1 * g1 / w + b3 * psi / g2) / (g1 + psi)


def piston_reference(p):
    M, S, V0, k, P0, Ta, T0 = (float(v) for v in p)
    A = P0 * S + 19.62 * M - k * V0 / S
    V = S / (2 * k) * (math.sqrt(A * A + 4 * k * P0 * V0 * Ta / T0) - A)
    return 2 * math.pi * math.sqrt(M / (k + S * S * P0 * V0 * Ta / (T0 * V * V)))


def test_ebola_examples():
    p = np.array([0.2, 0.1, 0.1, 0.5, 0.1, 0.2, 0.25, 0.2])
    # (0.2 + 0.02 + 0.1) / 0.3 by hand
    assert bm.ebola_r0(p) == pytest.approx(16 / 15, rel=1e-14)
    q = np.array([0.3, 0.0, 0.0, 0.7, 0.15, 0.1, 0.3, 0.0])
    assert bm.ebola_r0(q) == pytest.approx(0.3 / 0.15, rel=1e-14)
    q[0] = 0.0
    assert bm.ebola_r0(q) == 0.0
    with pytest.raises(ZeroDivisionError):
        bm.ebola_r0(np.array([0.2, 0.1, 0.1, 0.5, 0.1, 0.0, 0.25, 0.2]))


def test_ebola_matches_independent_evaluation():
    rng = np.random.default_rng(0)
    P = bm.EBOLA_BOX.from_unit(rng.uniform(size=(1000, 8)))
    ref = np.array([ebola_reference(p) for p in P])
    assert np.abs(bm.ebola_r0(P) - ref).max() <= 1e-12 * max(1.0, np.abs(ref).max())


def test_ebola_linear_in_beta1():
    rng = np.random.default_rng(1)
    P = bm.EBOLA_BOX.from_unit(rng.uniform(size=(50, 8)))
    np.testing.assert_allclose(bm.ebola_r0_grad(P)[:, 0], 1 / (P[:, 4] + P[:, 7]), rtol=1e-15)


def test_piston_midpoint_against_scratch():
    mid = 0.5 * (bm.PISTON_BOX.lower + bm.PISTON_BOX.upper)
    assert bm.piston_cycle_time(mid) == pytest.approx(piston_reference(mid), rel=1e-14)
    rng = np.random.default_rng(2)
    P = bm.PISTON_BOX.from_unit(rng.uniform(size=(200, 7)))
    np.testing.assert_allclose(bm.piston_cycle_time(P), [piston_reference(p) for p in P], rtol=1e-13)
    assert np.all(bm.piston_cycle_time(P) > 0)


def test_piston_mass_response():
    rng = np.random.default_rng(3)
    P = bm.PISTON_BOX.from_unit(rng.uniform(size=(2000, 7)))
    Q = P.copy()
    Q[:, 0] = np.minimum(P[:, 0] * rng.uniform(1.01, 2.0, 2000), 60.0)
    up = bm.piston_cycle_time(Q) > bm.piston_cycle_time(P)
    assert up.mean() > 0.95
    # heavier pistons also compress the gas volume, which stiffens the cycle:
    # the response is not monotone everywhere in the box
    x = np.array([50.0, 5.418e-03, 4.258e-03, 1027.520427, 90493.94479, 295.549947, 345.69631])
    y = x.copy()
    y[0] = 60.0
    assert piston_reference(y) < piston_reference(x)
    assert bm.piston_cycle_time(y) < bm.piston_cycle_time(x)


def test_paraboloid_examples():
    assert bm.paraboloid(np.array([0.0, 0.0])) == 0.0
    assert bm.paraboloid(np.array([1.0, 1.0])) == 0.0
    assert bm.paraboloid(np.array([0.5, 0.25])) == 0.1875
    a = np.array([0.6, 0.8])
    c = np.array([np.sqrt(0.6**2 + 0.01), np.sqrt(0.8**2 + 0.01)])
    assert bm.paraboloid(a) == pytest.approx(bm.paraboloid(c), abs=1e-15)


@pytest.mark.parametrize("name", sorted(bm.BENCHMARKS))
def test_gradients_finite_difference(name):
    b = bm.get(name)
    rng = np.random.default_rng(4)
    P = b.box.from_unit(rng.uniform(0.01, 0.99, size=(100, b.dim)))
    G = b.gradient(P)
    for j in range(b.dim):
        h = 1e-6 * np.maximum(np.abs(P[:, j]), 1e-3)
        E = np.zeros_like(P)
        E[:, j] = h
        fd = (b.evaluate(P + E) - b.evaluate(P - E)) / (2 * h)
        scale = np.linalg.norm(G, axis=1)
        assert np.all(np.abs(fd - G[:, j]) <= 1e-4 * scale)


def test_registry_and_dataset():
    with pytest.raises(KeyError):
        bm.get("borehole")
    b = bm.get("PISTON")
    d = b.dataset(b.box.from_unit(np.full((3, 7), 0.5)))
    assert d.has_gradients and len(d) == 3
    assert not b.dataset(b.box.lower[None], with_gradients=False).has_gradients
