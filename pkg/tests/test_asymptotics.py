import math

import numpy as np
import pytest
from scipy import special

from optspec import asymptotics as A
from optspec import channels as C
from optspec import design as D
from optspec import preprocess as P


@pytest.fixture(scope="module")
def pois():
    return C.poisson(5)


def test_constant_preprocessor_closed_forms():
    ch = C.gaussian_noise(1.0)
    t0, alpha = 0.7, 2.0
    T = P.Constant(t0)
    for lam in (0.8, 2.0, 10.0):
        assert A.psi(ch, T, lam) == pytest.approx(lam * t0 / (lam - t0), rel=1e-10)
        assert A.phi(ch, T, alpha, lam) == pytest.approx(lam / alpha + lam * t0 / (lam - t0), rel=1e-10)
        assert A.psi_prime(ch, T, lam) == pytest.approx(-t0 ** 2 / (lam - t0) ** 2, rel=1e-10)


def test_subset_noiseless_incomplete_gamma():
    ch = C.noiseless()
    b = 1.7
    T = P.Subset(b)
    for lam in (1.5, 3.0):
        tail = special.gammaincc(2, b)  # ∫_b^∞ y e^{-y} dy
        assert A.psi(ch, T, lam) == pytest.approx(lam / (lam - 1) * tail, rel=1e-10)


def test_psi_decreasing_and_domain(pois):
    T = P.Trim(7)
    tau = T.bounds(pois)[0]
    assert A.psi(pois, T, 100 * tau) < A.psi(pois, T, 10 * tau)
    lam = np.linspace(1.01 * tau, 50 * tau, 200)
    assert np.all(np.diff(A.psi(pois, T, lam)) < 0)
    with pytest.raises(A.DomainError):
        A.psi(pois, T, tau)
    with pytest.raises(A.DomainError):
        A.phi_prime(pois, T, 2.0, 0.5 * tau)


def test_convexity(pois):
    T = P.OptimalStar(pois)
    lam = np.linspace(1.001, 30, 400)
    assert np.all(np.diff(A.psi(pois, T, lam), 2) > -1e-12)
    assert np.all(np.diff(A.phi(pois, T, 3.0, lam), 2) > -1e-12)


@pytest.mark.parametrize("make", [lambda ch: P.Trim(7), lambda ch: P.OptimalStar(ch),
                                  lambda ch: P.MM(3.0, ch), lambda ch: P.Subset(4.0)])
def test_derivatives_match_central_differences(pois, make):
    T = make(pois)
    tau = T.bounds(pois)[0]
    lam = 2 * tau
    h = 1e-4 * lam
    fd_psi = (A.psi(pois, T, lam + h) - A.psi(pois, T, lam - h)) / (2 * h)
    fd_phi = (A.phi(pois, T, 3.0, lam + h) - A.phi(pois, T, 3.0, lam - h)) / (2 * h)
    assert abs(A.psi_prime(pois, T, lam) - fd_psi) <= 1e-6
    assert abs(A.phi_prime(pois, T, 3.0, lam) - fd_phi) <= 1e-6
    assert A.psi_prime(pois, T, lam) <= 0


def test_phi_prime_tends_to_inverse_alpha(pois):
    T = P.Trim(7)
    assert A.phi_prime(pois, T, 4.0, 1e9) == pytest.approx(0.25, abs=1e-12)


def test_below_threshold_is_uncorrelated(pois):
    p = A.solve_lambda_star(pois, P.OptimalStar(pois), 1.1)
    assert p.rho == 0.0 and p.phase == "uncorrelated" and p.lambda_star is None


@pytest.mark.parametrize("alpha", [2.0, 3.0, 5.0, 10.0])
def test_prediction_matches_design(pois, alpha):
    p = A.solve_lambda_star(pois, P.OptimalStar(pois), alpha)
    assert p.correlated and p.lambda_star > p.tau
    assert p.rho == pytest.approx(D.rho_optimal(pois, alpha), abs=1e-6)
    d = p.diagnostics
    assert d.phi_prime > 0 >= d.psi_prime
    assert abs(d.residual) < 1e-10


def test_derivative_identity(pois):
    for T, alpha in ((P.OptimalStar(pois), 3.0), (P.Trim(20), 5.0), (P.MM(2.0, pois), 2.0)):
        p = A.solve_lambda_star(pois, T, alpha)
        q = A.quadratic_constraint(pois, T, p.lambda_star)
        assert q == pytest.approx(1 / alpha - p.diagnostics.phi_prime, abs=1e-10)
        assert (q < 1 / alpha) == (p.diagnostics.phi_prime > 0)


@pytest.mark.parametrize("factor", [0.5, 2.0, 10.0])
def test_scale_invariance(pois, factor):
    for T in (P.OptimalStar(pois), P.MM(3.0, pois), P.Trim(30), P.Subset(8.0),
              D.epsilon_preprocessor(pois, 3.0, 0.3)):
        base = A.solve_lambda_star(pois, T, 3.0)
        scaled = A.solve_lambda_star(pois, P.Scaled(T, factor), 3.0)
        assert scaled.rho == pytest.approx(base.rho, abs=1e-9)
        if base.correlated:
            assert scaled.lambda_star == pytest.approx(factor * base.lambda_star, rel=1e-9)


def test_infeasible_raises():
    ch = C.noiseless()
    with pytest.raises(A.InfeasiblePreprocessor):
        A.solve_lambda_star(ch, P.OptimalStar(ch), 3.0)
    with pytest.raises(A.InfeasiblePreprocessor):
        A.solve_lambda_star(ch, P.Constant(-1.0), 3.0)


def test_mm_positive_above_threshold(pois):
    for a in (1.25, 1.5, 2.0, 4.0, 8.0):
        assert A.solve_lambda_star(pois, P.MM(a, pois), a).rho > 0


def test_tuning(pois):
    a, pred, T = A.tune_trim(pois, 5.0)
    assert a in A.TRIM_GRID and isinstance(T, P.Trim)
    assert pred.rho == max(A.solve_lambda_star(pois, P.Trim(k), 5.0).rho for k in A.TRIM_GRID)
    b, pred_b, _ = A.tune_subset(pois, 5.0, grid=[2.0, 6.0, 9.0])
    assert b in (2.0, 6.0, 9.0) and pred_b.rho >= 0
    assert len(A.SUBSET_GRID) == 50
    assert A.SUBSET_GRID[0] == pytest.approx(0.1) and A.SUBSET_GRID[-1] == pytest.approx(20.0)


def test_gaussian_channel_with_atom_matches_design():
    ch = C.gaussian_noise(1.0)
    p = A.solve_lambda_star(ch, P.OptimalStar(ch), 3.0)
    assert p.rho == pytest.approx(D.rho_optimal(ch, 3.0), abs=1e-6)


def test_epsilon_family_below_bound():
    ch = C.noiseless()
    for alpha in (2.0, 3.0):
        ro = D.rho_optimal(ch, alpha)
        gaps = [ro - A.solve_lambda_star(ch, D.epsilon_preprocessor(ch, alpha, e), alpha).rho
                for e in (0.5, 0.3, 0.1)]
        assert all(g >= -1e-9 for g in gaps)
        assert gaps[0] > gaps[1] > gaps[2]
