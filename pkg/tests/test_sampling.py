import numpy as np
import pytest
from scipy import integrate, stats

from hypsig import geometry as G
from hypsig import stats as hs
from hypsig.rng import RngState
from hypsig.sampling import (
    ConditionalTarget,
    SamplerError,
    acceptance_rate,
    heatbath_attempts,
    heatbath_batch,
    heatbath_sample,
    metropolis_accept_prob,
    metropolis_step,
    radial_density,
)


def _target(N, m, beta=1.0):
    return ConditionalTarget(m * G.n_up(N), beta)


def _quad_moment(N, b, k):
    num, _ = integrate.quad(lambda u: u**k * radial_density(u, b, N), 1, np.inf)
    den, _ = integrate.quad(lambda u: radial_density(u, b, N), 1, np.inf)
    return num / den


def test_n2_mean_cosh():
    u = heatbath_batch(_target(2, 4.0), 10**6, seed=1)[:, 0]
    # E[u] = 1 + 1/(beta m)
    assert abs(u.mean() - 1.25) <= 3 * u.std() / np.sqrt(u.size)


def test_n2_ks():
    b = 4.0
    u = heatbath_batch(_target(2, b), 10**5, seed=2)[:, 0]
    res = stats.kstest(u, lambda x: 1.0 - np.exp(-b * (x - 1.0)))
    assert res.pvalue > 0.01


@pytest.mark.parametrize("N,m", [(3, 2.0), (5, 1.0), (8, 6.0)])
def test_rejection_sampler_moments(N, m):
    u = heatbath_batch(_target(N, m), 2 * 10**5, seed=N)[:, 0]
    for k in (1, 2):
        exact = _quad_moment(N, m, k)
        x = u**k
        assert abs(x.mean() - exact) <= 3 * x.std() / np.sqrt(x.size)


def test_n3_example_value():
    # u sqrt(u^2 - 1) e^(-2u) against sqrt(u^2 - 1) e^(-2u)
    num, _ = integrate.quad(lambda u: u * np.sqrt(u * u - 1) * np.exp(-2 * u), 1, np.inf)
    den, _ = integrate.quad(lambda u: np.sqrt(u * u - 1) * np.exp(-2 * u), 1, np.inf)
    assert _quad_moment(3, 2.0, 1) == pytest.approx(num / den, rel=1e-10)


def test_directions_uniform():
    x = heatbath_batch(_target(3, 1.0), 10**5, seed=4)
    d = x[:, 1:] / np.linalg.norm(x[:, 1:], axis=1, keepdims=True)
    # each coordinate of a uniform point on S^2 is uniform on [-1, 1]
    for j in range(3):
        assert stats.kstest(d[:, j], "uniform", args=(-1, 2)).pvalue > 1e-3


@pytest.mark.parametrize("N", [2, 3])
def test_equivariance(N):
    rng = np.random.default_rng(N)
    g = G.random_lorentz(rng, N, 1.0)
    base = _target(N, 2.0)
    moved = ConditionalTarget(g @ base.m_vector, 1.0)
    a = heatbath_batch(base, 10**5, seed=10) @ g.T
    b = heatbath_batch(moved, 10**5, seed=11)
    probes = [G.n_up(N), G.boost(1, 0.5, N) @ G.n_up(N), G.spacelike_axis(0.3, N)]
    for p in probes:
        for k in (1, 2):
            xa, xb = G.mdot(a, p) ** k, G.mdot(b, p) ** k
            se = np.sqrt(xa.var() / xa.size + xb.var() / xb.size)
            assert abs(xa.mean() - xb.mean()) <= 3.5 * se


def test_points_on_hyperboloid():
    rng = np.random.default_rng(0)
    for N in (2, 3, 6):
        M = 3.0 * (G.random_lorentz(rng, N, 2.0) @ G.n_up(N))
        G.check_hpoint(heatbath_batch(ConditionalTarget(M, 0.7), 10**4, seed=N))


def test_reproducible():
    t = _target(3, 2.5)
    a = heatbath_sample(t, RngState(9, 4, 17))
    assert np.array_equal(a, heatbath_sample(t, RngState(9, 4, 17)))
    assert not np.array_equal(a, heatbath_sample(t, RngState(9, 4, 18)))
    assert np.array_equal(a, heatbath_batch(t, 5, seed=9, sweep=17)[4])


@pytest.mark.parametrize("N", [3, 4, 8])
def test_acceptance_rate_bound(N):
    for b in np.geomspace(0.5, 20.0, 12):
        assert acceptance_rate(b, N) >= 0.3
    assert acceptance_rate(2.0, 2) == 1.0


def test_attempts_match_acceptance_rate():
    t = _target(4, 1.0)
    n = np.array([heatbath_attempts(t, RngState(3, s, 0)) for s in range(20000)])
    p = acceptance_rate(1.0, 4)
    # attempts are geometric
    assert abs(n.mean() - 1 / p) <= 4 * np.sqrt((1 - p) / p**2 / n.size)


def test_invalid_targets():
    with pytest.raises(SamplerError):
        ConditionalTarget(np.array([1.0, 2.0, 0.0]), 1.0)
    with pytest.raises(SamplerError):
        ConditionalTarget(np.array([-1.0, 0.0, 0.0]), 1.0)
    with pytest.raises(SamplerError):
        ConditionalTarget(G.n_up(), 0.0)
    with pytest.raises(SamplerError):
        metropolis_step(G.n_up(), _target(2, 1.0), 0.0, RngState(0))


def test_metropolis_small_scale_accepts():
    t = _target(2, 4.0)
    acc = [metropolis_step(G.n_up(), t, 1e-9, RngState(1, s, 0))[1] for s in range(500)]
    assert np.mean(acc) > 0.999


def test_metropolis_stationary():
    t = _target(2, 4.0)
    n = G.n_up()
    xs = np.empty(60000)
    for i in range(xs.size):
        n, _ = metropolis_step(n, t, 0.6, RngState(5, 0, i))
        xs[i] = G.mdot(n, G.n_up())
    xs = xs[1000:]
    m, e = hs.jackknife(xs, tau=hs.tau_int(xs))
    h = G.mdot(heatbath_batch(t, 10**5, seed=6), G.n_up())
    assert abs(m - h.mean()) <= 3 * np.hypot(e, h.std() / np.sqrt(h.size))


def test_detailed_balance_three_states():
    t = _target(2, 1.5, beta=0.8)
    rng = np.random.default_rng(1)
    pts = [G.random_hpoint(1.0, rng) for _ in range(3)]
    e = np.array([G.mdot(p, t.m_vector) for p in pts])
    pi = np.exp(-t.beta * e)
    pi /= pi.sum()
    # uniform proposal among the other two states
    P = np.zeros((3, 3))
    for i in range(3):
        for j in range(3):
            if i != j:
                P[i, j] = 0.5 * metropolis_accept_prob(pts[i], pts[j], t)
        P[i, i] = 1 - P[i].sum()
    flow = pi[:, None] * P
    np.testing.assert_allclose(flow, flow.T, rtol=1e-13, atol=0)
    np.testing.assert_allclose(pi @ P, pi, rtol=1e-13)
