import mpmath
import numpy as np
import pytest
from scipy import linalg, special

from hypsig import geometry as G
from hypsig import spectrum as S


@pytest.mark.parametrize("N", range(2, 9))
def test_value_at_one(N):
    ev = S.ConicalEvaluator.for_dimension(N)
    # P^mu_(-1/2) vanishes at 1 for mu < 0; 1/Gamma(1 - mu) is the coefficient of its boundary behaviour
    expect = 1.0 if N == 2 else 0.0
    assert S.conical_eval(ev, 1.0) == expect == ev.value_at_one()
    assert ev.boundary_coefficient() == pytest.approx(1.0 / special.gamma(N / 2.0), rel=1e-15)
    assert S.boundary_limit(ev) == pytest.approx(ev.boundary_coefficient(), abs=1e-8)
    # continuity at the origin, for the conical function and the ground-state profile
    lead = (0.5e-9) ** (-ev.mu) * ev.boundary_coefficient()
    assert S.conical_of_rho(ev, np.array([1e-9]))[0] == pytest.approx(lead, rel=1e-8)
    g0, g1 = S.ground_state_profile(ev, np.array([0.0, 1e-7]))
    assert g0 == pytest.approx(g1, rel=1e-8)


def test_agm_oracle():
    ev = S.ConicalEvaluator(0.0)
    for x in (1.0, 1.001, 2.0, 10.0, 1e4):
        assert S.conical_eval(ev, x) == pytest.approx(S.legendre_half_agm(x), rel=1e-12)
    assert S.legendre_half_agm(1.0) == pytest.approx(1.0, rel=1e-15)


@pytest.mark.parametrize("mu", [0.0, -0.5, -1.0, -1.5, -3.0])
def test_against_mpmath(mu):
    ev = S.ConicalEvaluator(mu)
    xs = np.array([1.01, 1.5, 3.0, 20.0, 500.0])
    with mpmath.workdps(30):
        ref = [float(mpmath.legenp(-0.5, mu, x, type=3)) for x in xs]
    np.testing.assert_allclose(S.conical_eval(ev, xs), ref, rtol=1e-12)


@pytest.mark.parametrize("N", [2, 3, 5, 8])
def test_ground_state_decay(N):
    ev = S.ConicalEvaluator.for_dimension(N)
    rho = np.linspace(5, 15, 400)
    # generalized (non-normalizable) eigenfunction: psi ~ rho exp(-(N-1) rho / 2)
    q = S.ground_state_profile(ev, rho) * np.exp(0.5 * (N - 1) * rho) / rho
    assert np.all(np.isfinite(q)) and np.all(q > 0)
    assert q.max() / q.min() < 2.0


def test_literal_form_only_differs_above_n2():
    rho = np.linspace(0.1, 5, 7)
    ev2 = S.ConicalEvaluator.for_dimension(2)
    np.testing.assert_array_equal(S.ground_state_profile(ev2, rho), S.ground_state_profile(ev2, rho, literal=True))
    ev3 = S.ConicalEvaluator.for_dimension(3)
    # N = 3: the spherical function is sinh^(-1/2) P^(-1/2) = sqrt(2/pi) rho / sinh rho
    np.testing.assert_allclose(S.ground_state_profile(ev3, rho), np.sqrt(2 / np.pi) * rho / np.sinh(rho), rtol=1e-12)


def test_conical_errors():
    with pytest.raises(S.SpectrumError):
        S.ConicalEvaluator(0.5)
    with pytest.raises(S.SpectrumError):
        S.conical_eval(S.ConicalEvaluator(0.0), 0.9)
    with pytest.raises(S.SpectrumError):
        S.legendre_half_agm(0.5)


@pytest.mark.parametrize("N", range(2, 9))
def test_operator_structure(N):
    op = S.RadialOperator.build(N, 6.0, 120)
    A = op.matrix()
    assert np.max(np.abs(A - A.T)) == 0
    w = linalg.eigvalsh(A)
    assert w[0] >= 0
    assert S.lowest_eigenvalue(op) == pytest.approx(w[0], rel=1e-9)


def test_n2_bottom():
    v = S.lowest_eigenvalue(S.RadialOperator.build(2, 40.0))
    assert 0.25 <= v <= 0.2575
    assert v == pytest.approx(S.dirichlet_shift_estimate(2, 40.0), rel=0.01)


def test_n3_bottom():
    v = S.lowest_eigenvalue(S.RadialOperator.build(3, 40.0))
    assert 1.0 <= v <= 1.03


@pytest.mark.parametrize("N", range(2, 9))
def test_monotone_and_above_gap(N):
    vals = {R: S.lowest_eigenvalue(S.RadialOperator.build(N, R)) for R in (20.0, 40.0, 80.0)}
    assert vals[80.0] <= vals[40.0] <= vals[20.0]
    for R in (20.0, 40.0):
        for n in (int(50 * R), int(100 * R), int(110 * R), int(200 * R)):
            assert S.lowest_eigenvalue(S.RadialOperator.build(N, R, n)) >= S.gap(N) - 1e-6


@pytest.mark.parametrize("N", [2, 3, 8])
def test_eigenvalue_continuity(N):
    a = S.lowest_eigenvalue(S.RadialOperator.build(N, 40.0, 4000))
    b = S.lowest_eigenvalue(S.RadialOperator.build(N, 40.0, 4400))
    assert abs(a - b) < 1e-3


def test_residual_n2_default():
    ev = S.ConicalEvaluator.for_dimension(2)
    assert S.ground_state_residual(ev, 2) <= 1e-4
    assert S.ground_state_residual(ev, 2, np.eye(3)) <= 1e-4


@pytest.mark.parametrize("N", [2, 3, 4, 8])
def test_residual_second_order(N):
    ev = S.ConicalEvaluator.for_dimension(N)
    r = [S.ground_state_residual(ev, N, n_nodes=n) for n in (250, 500, 1000)]
    for a, b in zip(r, r[1:]):
        assert 3.5 <= a / b <= 4.5


def test_residual_combination():
    ev = S.ConicalEvaluator.for_dimension(2)
    gs = [np.eye(3), G.boost(1, 1.0, 2)]
    res = S.ground_state_residual(ev, 2, gs)
    assert res <= 1e-4
    coarse = S.ground_state_residual(ev, 2, gs, n_nodes=500, n_angles=128)
    assert 3.0 <= coarse / res <= 5.0


def test_residual_of_boosted_single_state():
    ev = S.ConicalEvaluator.for_dimension(2)
    # a single translate is the same radial function about another centre
    assert S.ground_state_residual(ev, 2, G.boost(1, 2.0, 2)) == S.ground_state_residual(ev, 2)


def test_literal_form_is_not_an_eigenfunction_in_n3():
    ev = S.ConicalEvaluator.for_dimension(3)
    assert S.ground_state_residual(ev, 3) < 1e-4
    assert S.ground_state_residual(ev, 3, literal=True) > 1.0


def test_residual_errors():
    with pytest.raises(S.SpectrumError):
        S.ground_state_residual(S.ConicalEvaluator(0.0), 3)
    off_axis = [np.eye(3), G.boost(1, 1.0, 2), G.boost(2, 1.0, 2)]
    with pytest.raises(S.SpectrumError):
        S.ground_state_residual(S.ConicalEvaluator(0.0), 2, off_axis, n_nodes=50, n_angles=16)
    with pytest.raises(S.SpectrumError):
        S.RadialOperator.build(9)
    with pytest.raises(S.SpectrumError):
        S.RadialOperator.build(2, 10.0, 2)


def test_spectrum_row():
    row = S.spectrum_row(2, 40.0)
    assert set(row) == {"N", "rho_max", "n_nodes", "lowest_eigenvalue", "gap_target", "residual"}
    assert row["n_nodes"] == 4000 and row["gap_target"] == 0.25
