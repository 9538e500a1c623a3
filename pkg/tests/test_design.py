import math

import mpmath as mp
import numpy as np
import pytest
from scipy import stats

from optspec import channels as C
from optspec import design as D
from optspec import numerics as nm
from optspec.preprocess import c_star_of_ratio

mp.mp.dps = 30


@pytest.fixture(scope="module")
def pois():
    return C.poisson(5)


def _f_closed_mp(kappa, beta):
    # the same closed form in high precision, integrated over x in [0, k/(k+1)]
    k, b = mp.mpf(kappa), mp.mpf(beta)
    u = b * (k + 1)
    v = k / (k + 1)
    integ = mp.quad(lambda t: t ** u / (1 - v * t), [0, 1])
    return float((b + 1) ** 2 * b * integ - b * (b + 1))


@pytest.mark.parametrize("beta", [0.1, 1.0, 10.0])
def test_f_series_vs_closed_form(pois, beta):
    series = D.f_beta(pois, beta, check=False)
    assert D.poisson_f_closed_form(5.0, beta) == pytest.approx(series, abs=1e-9)
    assert series == pytest.approx(_f_closed_mp(5.0, beta), abs=1e-12)
    assert D.f_beta(pois, beta) == series


def test_f_limits(pois):
    assert D.f_beta(pois, 1e6) == pytest.approx(5 / 6, abs=1e-4)
    nl = C.noiseless()
    assert D.f_beta(nl, 1e6) == pytest.approx(1.0, abs=1e-4)
    assert D.f_beta(nl, 1e8) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("ch", [C.poisson(5), C.gaussian_noise(1.0)], ids=repr)
def test_f_small_beta_bounded_ratio(ch):
    assert 0 < D.f_beta(ch, 1e-8) <= 1e-7


def test_f_small_beta_noiseless_oracle():
    # inf mu/eta = 0 here, so f(beta) ~ beta log(1/beta) rather than O(beta)
    b = mp.mpf("1e-8")
    oracle = float(mp.quad(lambda y: b * (y - 1) ** 2 / (b + y) * mp.e ** -y, [0, b, 1e-4, 1, mp.inf]))
    assert D.f_beta(C.noiseless(), 1e-8) == pytest.approx(oracle, rel=1e-7)


@pytest.mark.parametrize("ch", [C.poisson(5), C.gaussian_noise(1.0), C.noiseless()], ids=repr)
def test_f_strictly_increasing(ch):
    vals = [D.f_beta(ch, b, check=False) for b in np.geomspace(1e-3, 1e4, 50)]
    assert np.all(np.diff(vals) > 0)
    assert vals[-1] < 1 / C.alpha_weak(ch)


def test_beta_alpha_root(pois):
    assert math.isinf(D.beta_alpha(pois, 1.2))
    b = D.beta_alpha(pois, 3.0)
    assert D.f_beta(pois, b) == pytest.approx(1 / 3, abs=1e-12)
    # oracle: bisection on the high-precision closed form
    lo, hi = 0.5, 5.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if _f_closed_mp(5.0, mid) < 1 / 3 else (lo, mid)
    assert b == pytest.approx(0.5 * (lo + hi), rel=1e-9)


def test_root_not_bracketed_below_threshold(pois):
    with pytest.raises(nm.NotBracketed):
        nm.find_root_increasing(lambda b: D.f_beta(pois, b, check=False) - 1 / 1.1, 1e-6, 1e6)


def test_large_alpha(pois):
    assert D.beta_alpha(pois, 1e6) <= 1e-3
    assert D.rho_optimal(pois, 1e6) >= 0.999
    assert D.beta_alpha(C.gaussian_noise(1.0), 1e6) <= 1e-3


def test_rho_optimal_curve(pois):
    assert D.rho_optimal(pois, 1.0) == 0.0
    assert D.rho_optimal(C.noiseless(), 1.0) == 0.0
    alphas = np.arange(1.0, 12.01, 0.25)
    rho = [D.rho_optimal(pois, a) for a in alphas]
    assert np.all(np.diff(rho) >= 0)
    res = D.design(pois, 3.0)
    assert res.regime == "above-threshold"
    assert res.rho_opt == pytest.approx(1 / (1 + res.beta_alpha))
    assert D.design(pois, 1.1).regime == "below-threshold"


def test_degenerate_channel_is_always_below():
    y = np.arange(30.0)
    eta = stats.poisson.pmf(y, 3.0)
    ch = C.CustomChannel(y, eta, eta, kind="discrete")
    for a in (1.0, 10.0, 1e4):
        assert D.design(ch, a).regime == "below-threshold"
    assert not D.optimal_preprocessor(ch)


def test_optimal_preprocessor(pois):
    T = D.optimal_preprocessor(pois)
    assert T and T(7.0) == pytest.approx(2 / 8)
    assert D.optimal_preprocessor(C.gaussian_noise(1.0)).is_feasible(C.gaussian_noise(1.0))
    rep = D.optimal_preprocessor(C.noiseless())
    assert not rep and rep.infimum == 0.0 and rep.remedy == "epsilon_preprocessor"


def test_L_Q_at_c_star(pois):
    zero = D.CFunction(lambda y, r: np.zeros_like(np.asarray(r, dtype=float)))
    assert D.L(zero, pois) == 0.0 and D.Q(zero, pois, 1.0) == 0.0
    c = D.c_star(pois, 3.0)
    b = c.params["beta"]
    assert D.L(c, pois) == pytest.approx(1 / 3, abs=1e-8)
    assert D.Q(c, pois, b) == pytest.approx(1 / 3, abs=1e-8)


def test_c_star_pointwise(pois):
    c = D.c_star(pois, 3.0)
    b = c.params["beta"]
    assert c(5.0, pois.ratio(5.0)) == pytest.approx(0.0, abs=1e-15)
    assert c(1e9, pois.ratio(1e9)) == pytest.approx(b, rel=1e-7)
    assert c(0.0, math.inf) == b
    nl = C.noiseless()
    assert D.c_star(nl, 3.0)(0.0, nl.ratio(0.0)) == -1.0
    y = np.arange(0, 500.0)
    vals = c(y, pois.ratio(y))
    assert np.all(vals >= -1) and np.all(vals <= b)
    with pytest.raises(D.BelowThreshold):
        D.c_star(pois, 1.2)


@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
def test_min_norm_value_identity(pois, beta):
    alpha = 3.0
    c = D.c_min_norm(pois, alpha, beta)
    assert D.L(c, pois) == pytest.approx(1 / alpha, abs=1e-10)
    assert D.Q(c, pois, beta) == pytest.approx(1 / (alpha ** 2 * D.f_beta(pois, beta)), abs=1e-8)


def test_min_norm_matches_discrete_qp(pois):
    # brute force: minimise sum c^2 q subject to sum c l = 1/alpha on a truncated lattice
    alpha, beta = 3.0, 0.8
    y = np.arange(400.0)
    eta, mu = pois.eta(y), pois.mu(y)
    q = mu / beta + eta
    ell = mu - eta
    kkt = np.zeros((y.size + 1, y.size + 1))
    kkt[np.arange(y.size), np.arange(y.size)] = 2 * q
    kkt[:-1, -1] = ell
    kkt[-1, :-1] = ell
    rhs = np.zeros(y.size + 1)
    rhs[-1] = 1 / alpha
    sol = np.linalg.solve(kkt, rhs)[:-1]
    c = D.c_min_norm(pois, alpha, beta)
    head = slice(0, 80)
    assert np.allclose(sol[head], c(y, pois.ratio(y))[head], rtol=1e-9, atol=1e-12)


def test_epsilon_noiseless():
    ch = C.noiseless()
    T = D.epsilon_preprocessor(ch, 3.0, 0.3)
    assert T.bounds(ch)[1] == pytest.approx(-7 / 3)
    c = D.epsilon_cfunction(T)
    # constraint residual by an independent plain quadrature
    resid = nm.integrate(lambda y: float(c(y, y)) * (y - 1) * math.exp(-y), points=c.points) - 1 / 3
    assert abs(resid) <= 1e-10
    assert D.L(c, ch) == pytest.approx(1 / 3, abs=1e-10)


def test_epsilon_unclipped_gives_unit_v(pois):
    b = D.beta_alpha(pois, 3.0)
    c0 = float(c_star_of_ratio(1 / 6, b))
    eps = 0.5 * (1 + c0)
    T = D.epsilon_preprocessor(pois, 3.0, eps)
    assert T.v == pytest.approx(1.0, abs=1e-9)


def test_epsilon_v_monotone_and_bounded():
    ch = C.noiseless()
    vs = [D.epsilon_preprocessor(ch, 3.0, e).v for e in (0.5, 0.3, 0.1, 0.03)]
    assert vs[0] >= vs[1] >= vs[2] >= vs[3] >= 1.0
    for e, v in zip((0.3, 0.1, 0.03), vs[1:]):
        assert v <= D.epsilon_v_bound(ch, 3.0, e)
    with pytest.raises(D.BelowThreshold):
        D.epsilon_preprocessor(ch, 1.0, 0.3)
    with pytest.raises(ValueError):
        D.epsilon_preprocessor(ch, 3.0, 1.5)


def test_positive_part_integral(pois):
    b = D.beta_alpha(pois, 3.0)
    y = np.arange(6, 2000.0)
    r = pois.ratio(y)
    direct = math.fsum(b * (r - 1) ** 2 / (b + r) * pois.eta(y))
    assert D.positive_part_integral(pois, b) == pytest.approx(direct, rel=1e-10)
