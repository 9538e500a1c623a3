"""Acceptance criteria 1-10, each at its stated tolerance.

Run under pytest (a PASS/FAIL line per criterion is printed in the
terminal summary) or directly with ``python tests/test_acceptance.py``.
The optional n=4096 simulation runs only with ``--long`` or OPTSPEC_LONG=1.
"""

import time

import numpy as np
import pytest

from optspec import asymptotics as A
from optspec import channels as C
from optspec import design as D
from optspec import montecarlo as M
from optspec import preprocess as P

ALL_CHANNELS = [
    lambda: C.poisson(5), lambda: C.poisson(0.5), lambda: C.poisson(20),
    lambda: C.noiseless(), lambda: C.gaussian_noise(1.0), lambda: C.gaussian_noise(0.2),
    lambda: C.gaussian_noise(3.0), lambda: C.poisson(5, "real"), lambda: C.noiseless("real"),
    lambda: C.gaussian_noise(1.0, "real"),
]


def criterion(num, title):
    return pytest.mark.criterion(num, title)


@criterion(1, "weak thresholds")
def test_c01_thresholds():
    t0 = time.perf_counter()
    assert abs(C.alpha_weak(C.poisson(5)) - 1.2) <= 1e-9
    assert abs(C.alpha_weak(C.noiseless()) - 1.0) <= 1e-8
    assert abs(C.alpha_weak(C.noiseless("real")) - 0.5) <= 1e-8
    assert time.perf_counter() - t0 < 1.0


@criterion(2, "f(beta) limit and closed form")
def test_c02_f_beta():
    t0 = time.perf_counter()
    ch = C.poisson(5)
    assert abs(D.f_beta(ch, 1e6) - 5 / 6) <= 1e-4
    for beta in (0.1, 1.0, 10.0):
        assert abs(D.f_beta(ch, beta, check=False) - D.poisson_f_closed_form(5.0, beta)) <= 1e-8
    assert time.perf_counter() - t0 < 1.0


@criterion(3, "asymptotic prediction of T_opt equals 1/(1+beta_alpha)")
@pytest.mark.parametrize("make", [lambda: C.poisson(5), lambda: C.gaussian_noise(1.0)],
                         ids=["poisson5", "gaussian1"])
def test_c03_self_consistency(make):
    ch = make()
    T = D.optimal_preprocessor(ch)
    for alpha in (2.0, 3.0, 5.0, 10.0):
        pred = A.solve_lambda_star(ch, T, alpha)
        assert abs(pred.rho - 1.0 / (1.0 + D.beta_alpha(ch, alpha))) <= 1e-6


@criterion(4, "optimal preprocessing dominates mm, trim, subset")
def test_c04_dominance():
    ch = C.poisson(5)
    T_opt = D.optimal_preprocessor(ch)
    for alpha in (1.5, 2.0, 3.0, 5.0, 10.0):
        best = A.solve_lambda_star(ch, T_opt, alpha).rho
        mm = A.solve_lambda_star(ch, P.MM(alpha, ch), alpha).rho
        _, trim, _ = A.tune_trim(ch, alpha)
        _, subset, _ = A.tune_subset(ch, alpha)
        for other in (mm, trim.rho, subset.rho):
            assert best >= other - 1e-9
        assert mm > 0


def _catalog(ch):
    cat = [D.optimal_preprocessor(ch), P.MM(1.5, ch), P.MM(3.0, ch),
           D.epsilon_preprocessor(ch, 2.0, 0.3), D.epsilon_preprocessor(ch, 5.0, 0.1),
           P.Tabulated((0.0, 5.0, 10.0), (-1.0, 0.0, 1.0)), P.Constant(1.0)]
    cat += [P.Trim(a) for a in A.TRIM_GRID]
    cat += [P.Subset(float(b)) for b in A.SUBSET_GRID]
    return cat + [P.Scaled(T, 3.0) for T in cat[:5]]


@criterion(5, "no correlation below the weak threshold")
def test_c05_phase_transition():
    ch = C.poisson(5)
    cat = _catalog(ch)
    for alpha in (0.5, 1.0, 1.15):
        for T in cat:
            assert A.solve_lambda_star(ch, T, alpha).rho == 0.0, T.label()


@criterion(6, "epsilon family approaches the optimal curve")
def test_c06_epsilon_family():
    ch = C.noiseless()
    for alpha in (2.0, 3.0, 5.0):
        ro = D.rho_optimal(ch, alpha)
        for eps in (0.5, 0.3, 0.1, 0.05):
            T = D.epsilon_preprocessor(ch, alpha, eps)
            rho = A.solve_lambda_star(ch, T, alpha).rho
            assert rho <= ro + 1e-9
            if eps == 0.05:
                assert ro - rho <= 0.02
            assert T.v >= 1.0
            assert T.v - 1.0 <= 2 * eps / D.positive_part_integral(ch, T.beta)


@criterion(7, "minimum-norm solution of the quadratic design problem")
def test_c07_min_norm_oracle():
    ch = C.poisson(5)
    alpha = 3.0
    beta = D.beta_alpha(ch, alpha)
    c = D.c_star(ch, alpha)
    Qc = D.Q(c, ch, beta)
    rng = np.random.default_rng(2024)
    support = 60
    ys = np.arange(support, dtype=float)
    grad = ch.ratio(ys) - 1.0  # L is linear with this gradient on the table support
    u = D.CFunction(lambda y, r: _lookup(grad, y))
    Lu = D.L(u, ch)
    for _ in range(100):
        table = rng.standard_normal(support)
        d = D.CFunction(lambda y, r, tb=table: _lookup(tb, y))
        table = table - (D.L(d, ch) / Lu) * grad
        d = D.CFunction(lambda y, r, tb=table: _lookup(tb, y))
        assert abs(D.L(d, ch)) < 1e-12
        for t in (0.1, -0.1, 0.01, -0.01):
            moved = D.CFunction(lambda y, r, t=t, d=d: c(y, r) + t * d(y, r))
            assert D.Q(moved, ch, beta) >= Qc - 1e-10
    for b in (0.5, 1.0, 2.0, beta):
        cm = D.c_min_norm(ch, alpha, b)
        assert abs(D.Q(cm, ch, b) - 1 / (alpha ** 2 * D.f_beta(ch, b))) <= 1e-8


def _lookup(table, y):
    y = np.asarray(y)
    idx = y.astype(int)
    inside = (idx >= 0) & (idx < table.size) & (idx == y)
    return np.where(inside, table[np.clip(idx, 0, table.size - 1)], 0.0)


def _mc_against(ch, T, n, alphas, target, trials=16, seed=20240101):
    rows = M.run_sweep(ch, T, n, alphas, trials, base_seed=seed)
    for row in rows:
        # unconverged trials contribute their last iterate and are counted, not dropped
        assert len(row.results) == trials
        assert abs(row.cos2_mean - target(row.alpha)) <= 0.05, (row.alpha, row.cos2_mean)


@criterion(8, "simulation matches the optimal curve (poisson, n=1024)")
def test_c08_monte_carlo_poisson():
    ch = C.poisson(5)
    _mc_against(ch, D.optimal_preprocessor(ch), 1024, [3.0, 5.0, 10.0],
                lambda a: D.rho_optimal(ch, a))


@pytest.mark.long
@criterion(8, "simulation matches the optimal curve (poisson, n=4096, optional)")
def test_c08_monte_carlo_poisson_long():
    ch = C.poisson(5)
    _mc_against(ch, D.optimal_preprocessor(ch), 4096, [3.0, 5.0, 10.0],
                lambda a: D.rho_optimal(ch, a))


@criterion(9, "simulation matches the epsilon-family prediction (noiseless, n=1024)")
def test_c09_monte_carlo_epsilon():
    ch = C.noiseless()
    make = lambda a: D.epsilon_preprocessor(ch, a, 0.3)
    rows = M.run_sweep(ch, make, 1024, [3.0, 5.0], 16, base_seed=20240102)
    for row in rows:
        assert len(row.results) == 16
        assert abs(row.cos2_mean - row.prediction.rho) <= 0.05, (row.alpha, row.cos2_mean)


@criterion(10, "invariances, normalization, moment bound, derivatives")
def test_c10_invariance_suite():
    pois = C.poisson(5)
    # scale invariance of predictions
    for T in (D.optimal_preprocessor(pois), P.MM(3.0, pois), P.Trim(30), P.Subset(8.0)):
        base = A.solve_lambda_star(pois, T, 3.0).rho
        for f in (0.5, 2.0, 10.0):
            assert abs(A.solve_lambda_star(pois, P.Scaled(T, f), 3.0).rho - base) <= 1e-9
    # scale equivariance of simulated eigenvectors
    T = D.optimal_preprocessor(pois)
    inst = M.generate_instance(pois, 128, 384, 99)
    x1, _, _, _ = M.leading_eigenvector(inst, T)
    x2, _, _, _ = M.leading_eigenvector(inst, P.Scaled(T, 2.0))
    assert M.squared_cosine(x1, x2) >= 1 - 1e-10
    # normalization and the fourth-moment bound
    for make in ALL_CHANNELS:
        ch = make()
        assert abs(ch.expect(lambda y, r: np.ones_like(r)) - 1) <= 1e-8
        assert abs(ch.expect(lambda y, r: r) - 1) <= 1e-8
        bound = 2.0 if ch.mode == "complex" else 3.0
        assert C.weak_threshold_integral(ch) <= bound + 1e-8
    # analytic derivatives against central differences
    for T in (P.Trim(7), D.optimal_preprocessor(pois), P.MM(3.0, pois)):
        lam = 2 * T.bounds(pois)[0]
        h = 1e-4 * lam
        fd = (A.psi(pois, T, lam + h) - A.psi(pois, T, lam - h)) / (2 * h)
        assert abs(A.psi_prime(pois, T, lam) - fd) <= 1e-6
        fd = (A.phi(pois, T, 3.0, lam + h) - A.phi(pois, T, 3.0, lam - h)) / (2 * h)
        assert abs(A.phi_prime(pois, T, 3.0, lam) - fd) <= 1e-6


if __name__ == "__main__":
    import sys

    cases = [
        (1, test_c01_thresholds, ()),
        (2, test_c02_f_beta, ()),
        (3, test_c03_self_consistency, (lambda: C.poisson(5),)),
        (3, test_c03_self_consistency, (lambda: C.gaussian_noise(1.0),)),
        (4, test_c04_dominance, ()),
        (5, test_c05_phase_transition, ()),
        (6, test_c06_epsilon_family, ()),
        (7, test_c07_min_norm_oracle, ()),
        (8, test_c08_monte_carlo_poisson, ()),
        (9, test_c09_monte_carlo_epsilon, ()),
        (10, test_c10_invariance_suite, ()),
    ]
    status = {}
    for num, fn, args in cases:
        t0 = time.perf_counter()
        try:
            fn(*args)
            ok = True
        except AssertionError:
            ok = False
        status[num] = status.get(num, True) and ok
        print(f"  ran {fn.__name__} in {time.perf_counter() - t0:.1f}s", file=sys.stderr)
    for num in sorted(status):
        print(f"criterion {num:>2} {'PASS' if status[num] else 'FAIL'}")
    sys.exit(0 if all(status.values()) else 1)
