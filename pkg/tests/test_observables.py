import numpy as np
import pytest

from hypsig import geometry as G
from hypsig import observables as O
from hypsig.lattice import Boundary, LatticeError, LatticeSpec, SpinField, sweep


def test_te_examples():
    f = SpinField.cold(LatticeSpec((3,)))
    assert O.order_parameter_Te(f, 0.0, (1,)) == 0.0
    a = float(np.arcsinh(1.0))
    assert O.order_parameter_Te(f, a, (1,)) == pytest.approx(np.tanh(1.0), abs=1e-14)
    assert O.order_parameter_Te(f, -0.7, 1) == pytest.approx(-O.order_parameter_Te(f, 0.7, 1), abs=1e-15)
    e = G.spacelike_axis(0.7)
    assert O.order_parameter_Te(f, e, 1) == O.order_parameter_Te(f, 0.7, 1)
    with pytest.raises(LatticeError):
        O.order_parameter_Te(f, 0.1, 5)


def test_two_point_examples():
    spec = LatticeSpec((5, 5), Boundary.FIXED_SITE_INTERIOR)
    f = SpinField.cold(spec)
    assert O.invariant_two_point(f, (1, 1), (3, 4)) == 1.0
    f = SpinField.hot(spec, 1.0, seed=1)
    assert O.invariant_two_point(f, (2, 3), (2, 3)) == pytest.approx(1.0, abs=1e-12)
    vals = [O.invariant_two_point(f, i, j) for i in range(25) for j in range(25)]
    assert min(vals) >= 1.0 - 1e-9


def test_sz_fluctuation_examples():
    spec = LatticeSpec((2,), Boundary.EXTERNAL_FIELD, epsilon=0.1)
    assert O.sz_fluctuation(SpinField.cold(spec)) == 0.0
    t = 1.0
    f = SpinField(spec, np.stack([G.n_up(), G.boost(1, t) @ G.n_up()]))
    # m_hat is the geodesic midpoint, at distance t/2 from both spins
    assert O.sz_fluctuation(f) == pytest.approx(np.cosh(t / 2) - 1.0, rel=1e-12)


def test_sz_fluctuation_invariant():
    rng = np.random.default_rng(2)
    spec = LatticeSpec((4, 4), Boundary.EXTERNAL_FIELD, N=3, epsilon=0.1)
    f = SpinField.hot(spec, 1.0, seed=3)
    v = O.sz_fluctuation(f)
    assert v >= 0
    for _ in range(10):
        g = G.random_lorentz(rng, 3, 2.0)
        h = SpinField(spec, f.spins @ g.T)
        assert O.sz_fluctuation(h) == pytest.approx(v, rel=1e-9, abs=1e-12)


def test_magnetization_and_action_density():
    spec = LatticeSpec((4, 4), Boundary.FIXED_SPIN_BOUNDARY)
    f = SpinField.cold(spec, seed=1)
    assert O.action_density(f) == 1.0
    np.testing.assert_array_equal(O.magnetization(f), [4.0, 0.0, 0.0])
    sweep(f, 1.0)
    m = O.magnetization(f)
    assert m[0] > 0 and G.mdot(m, m) > 0
    with pytest.raises(LatticeError):
        O.magnetization(SpinField.cold(LatticeSpec((2, 2))))


def test_default_probe_site():
    assert O.default_probe_site(LatticeSpec((9,))) == (4,)
    assert O.default_probe_site(LatticeSpec((5, 5), Boundary.FIXED_SITE_INTERIOR)) == (3, 2)
