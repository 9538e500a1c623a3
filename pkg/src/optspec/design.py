"""Optimal preprocessing design.

With ``r = mu / eta`` every quantity is an eta-expectation:

* ``f(beta) = E[(r - 1)^2 / (1 + r / beta)]``, increasing from 0 to ``1 / alpha_weak``;
* ``beta_alpha`` solves ``f(beta) = 1 / alpha`` and ``rho_opt = 1 / (1 + beta_alpha)``;
* ``L(c) = E[c (r - 1)]`` and ``Q_beta(c) = E[c^2 (1 + r / beta)]``; the
  minimum of Q subject to ``L(c) = 1 / alpha`` is ``1 / (alpha^2 f(beta))``,
  attained by ``c = (r - 1) / (alpha f(beta) (1 + r / beta))``.

The optimal preprocessor ``T = c / (1 + c)`` is a rescaling of ``1 - 1/r``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate as _spi

from . import numerics as nm
from .channels import (Channel, PoissonChannel, alpha_weak, mu_over_eta_infimum)
from .preprocess import Epsilon, OptimalStar, c_star_of_ratio

__all__ = [
    "DesignResult",
    "CFunction",
    "InfeasibleReport",
    "BelowThreshold",
    "ConsistencyError",
    "f_beta",
    "poisson_f_closed_form",
    "beta_alpha",
    "rho_optimal",
    "design",
    "optimal_preprocessor",
    "L",
    "Q",
    "c_star",
    "c_min_norm",
    "epsilon_preprocessor",
    "epsilon_v_bound",
    "positive_part_integral",
]

log = logging.getLogger(__name__)

BETA_CAP = 1e12
ROOT_TOL = 1e-12
_CLOSED_FORM_MAX_BETA = 100.0


class BelowThreshold(ValueError):
    pass


class ConsistencyError(RuntimeError):
    pass


@dataclass(frozen=True)
class DesignResult:
    alpha: float
    alpha_weak: float
    beta_alpha: float
    rho_opt: float
    regime: str


@dataclass(frozen=True)
class CFunction:
    """A c-function ``c(y, r)``; ``points`` are kinks in ``y`` for quadrature."""

    func: Callable
    points: tuple = ()
    label: str = ""
    params: dict = field(default_factory=dict)

    def __call__(self, y, r):
        return self.func(y, r)


@dataclass(frozen=True)
class InfeasibleReport:
    """Why no feasible preprocessor attains the optimal curve."""

    infimum: float
    reason: str
    remedy: str = "epsilon_preprocessor"

    def __bool__(self):
        return False


# -- f(beta) ---------------------------------------------------------------------

def _f_integrand(beta):
    def g(y, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(invalid="ignore"):
            # (r-1)^2 / (1 + r/beta) = beta (r-1)^2 / (beta + r); finite limit beta as r -> inf
            return np.where(np.isinf(r), beta * r, beta * np.square(r - 1.0) / (beta + r))
    return g


def poisson_f_closed_form(kappa: float, beta: float) -> float:
    """``f(beta)`` for the complex Poisson channel via the incomplete-beta-like integral.

    ``C ∫_0^{k/(k+1)} x^u / (1 - x) dx - beta (beta + 1)`` with ``u = beta (k + 1)``.
    Substituting ``x = v t`` folds the huge prefactor into the integrand.
    The difference cancels as ``beta`` grows, so use it for moderate ``beta``.
    """
    v = kappa / (kappa + 1.0)
    u = beta * (kappa + 1.0)
    integ, _ = _spi.quad(lambda t: math.exp(u * math.log(t)) / (1.0 - v * t) if t > 0 else 0.0,
                         0.0, 1.0, epsabs=1e-300, epsrel=1e-13, limit=400,
                         points=[max(0.0, 1.0 - 50.0 / max(u, 1.0))])
    return (beta + 1.0) ** 2 * beta * integ - beta * (beta + 1.0)


def f_beta(ch: Channel, beta: float, check: bool = True) -> float:
    """``∫ (mu - eta)^2 / (eta + mu / beta)`` over the support, atoms included."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    val = ch.expect(_f_integrand(beta))
    if (check and isinstance(ch, PoissonChannel) and ch.mode == "complex"
            and beta <= _CLOSED_FORM_MAX_BETA):
        closed = poisson_f_closed_form(ch.kappa, beta)
        if abs(closed - val) > 1e-8:
            raise ConsistencyError(f"series f={val!r} vs closed form {closed!r} at beta={beta}")
    return val


def beta_alpha(ch: Channel, alpha: float) -> float:
    """Root of ``f(beta) = 1 / alpha``; ``inf`` at or below the weak threshold."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    aw = alpha_weak(ch)
    if alpha <= aw:
        return math.inf
    target = 1.0 / alpha
    g = lambda b: f_beta(ch, b, check=False) - target
    lo, hi = 1e-6, 1.0
    while g(lo) > 0:
        lo /= 10.0
        if lo < 1e-300:
            raise nm.NumericalError("f(beta) does not vanish at 0+")
    while g(hi) < 0:
        hi *= 10.0
        if hi > BETA_CAP:
            gap = abs(f_beta(ch, BETA_CAP, check=False) - 1.0 / aw)
            warnings.warn(f"alpha={alpha} is numerically at the weak threshold "
                          f"(|f(cap) - 1/alpha_weak| = {gap:.3g}); treating as below", RuntimeWarning)
            return math.inf
    return nm.find_root_increasing(g, lo, hi, ROOT_TOL)


def rho_optimal(ch: Channel, alpha: float) -> float:
    b = beta_alpha(ch, alpha)
    return 0.0 if math.isinf(b) else 1.0 / (1.0 + b)


def design(ch: Channel, alpha: float) -> DesignResult:
    b = beta_alpha(ch, alpha)
    above = not math.isinf(b)
    return DesignResult(alpha=alpha, alpha_weak=alpha_weak(ch), beta_alpha=b,
                        rho_opt=1.0 / (1.0 + b) if above else 0.0,
                        regime="above-threshold" if above else "below-threshold")


def optimal_preprocessor(ch: Channel):
    """``1 - eta/mu`` when it is bounded below, else an :class:`InfeasibleReport`."""
    inf = mu_over_eta_infimum(ch)
    if inf.value > 0 and math.isfinite(alpha_weak(ch)):
        return OptimalStar(ch)
    return InfeasibleReport(
        infimum=inf.value,
        reason="inf mu/eta = 0: 1 - eta/mu is unbounded below, so the optimal curve is "
               "not attained by any feasible preprocessor" if inf.value <= 0 else
               "channel carries no information (alpha_weak is infinite)")


# -- functionals ---------------------------------------------------------------

def L(c: CFunction, ch: Channel) -> float:
    """``∫ c (mu - eta)``."""
    return ch.expect(lambda y, r: np.asarray(c(y, r), dtype=float) * (np.asarray(r) - 1.0),
                     points=c.points)


def Q(c: CFunction, ch: Channel, beta: float) -> float:
    """``∫ c^2 (mu / beta + eta)``."""
    return ch.expect(lambda y, r: np.square(c(y, r)) * (1.0 + np.asarray(r) / beta),
                     points=c.points)


def c_min_norm(ch: Channel, alpha: float, beta: float) -> CFunction:
    """Minimiser of ``Q_beta`` on the hyperplane ``L(c) = 1 / alpha``."""
    scale = 1.0 / (alpha * f_beta(ch, beta, check=False))
    return CFunction(lambda y, r: scale * c_star_of_ratio(r, beta), label="c_min_norm",
                     params={"alpha": alpha, "beta": beta, "scale": scale})


def c_star(ch: Channel, alpha: float) -> CFunction:
    """``(mu - eta) / (eta + mu / beta_alpha)``; lies in ``[-1, beta_alpha]``."""
    b = beta_alpha(ch, alpha)
    if math.isinf(b):
        raise BelowThreshold(f"alpha={alpha} <= alpha_weak={alpha_weak(ch)}")
    return CFunction(lambda y, r: c_star_of_ratio(r, b), label="c_star",
                     params={"alpha": alpha, "beta": b})


# -- epsilon-truncated family -----------------------------------------------------

def _seam_points(ch: Channel, r_target: float) -> tuple:
    if ch.is_discrete:
        return ()
    y = ch.ratio_inverse(r_target)
    if y is not None:
        return (y,)
    scan = getattr(ch, "_scan", None)
    if scan is None:
        return ()
    ys, rs = scan
    d = rs - r_target
    idx = np.nonzero(np.sign(d[:-1]) * np.sign(d[1:]) < 0)[0]
    gi = lambda yy: float(ch.ratio(yy)) - r_target
    return tuple(_bisect(gi, ys[i], ys[i + 1]) for i in idx)


def _bisect(g, a, b, iters=80):
    ga = g(a)
    for _ in range(iters):
        m = 0.5 * (a + b)
        gm = g(m)
        if (gm > 0) == (ga > 0):
            a, ga = m, gm
        else:
            b = m
    return 0.5 * (a + b)


def _L_clipped(ch: Channel, beta: float, eps: float, v: float) -> float:
    seam = (v - 1.0 + eps) / (v + (1.0 - eps) / beta)
    pts = _seam_points(ch, seam)
    floor = -1.0 + eps
    g = lambda y, r: np.maximum(v * c_star_of_ratio(r, beta), floor) * (np.asarray(r) - 1.0)
    return ch.expect(g, points=pts)


def epsilon_preprocessor(ch: Channel, alpha: float, eps: float) -> Epsilon:
    """Feasible near-optimal preprocessor ``c/(1+c)``, ``c = max(v c*, -1 + eps)``.

    ``v >= 1`` solves ``L(c) = 1/alpha``; ``L`` is increasing in ``v``.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    b = beta_alpha(ch, alpha)
    if math.isinf(b):
        raise BelowThreshold(f"alpha={alpha} <= alpha_weak={alpha_weak(ch)}")
    target = 1.0 / alpha
    g = lambda v: _L_clipped(ch, b, eps, v) - target
    g1 = g(1.0)
    if g1 >= -1e-13:
        v = 1.0
    else:
        hi = 2.0
        while g(hi) < 0:
            hi *= 2.0
            if hi > 1e12:
                raise nm.NonConvergent("could not bracket v for the epsilon family")
        v = nm.find_root_increasing(g, 1.0, hi, 1e-14)
    return Epsilon(eps=eps, alpha=alpha, channel=ch, v=v, beta=b)


def positive_part_integral(ch: Channel, beta: float) -> float:
    """``∫ over {mu > eta} of (mu - eta)^2 / (eta + mu/beta)``."""
    f = _f_integrand(beta)
    pts = _seam_points(ch, 1.0)
    return ch.expect(lambda y, r: np.where(np.asarray(r) > 1.0, f(y, r), 0.0), points=pts)


def epsilon_v_bound(ch: Channel, alpha: float, eps: float) -> float:
    """Upper bound ``1 + 2 eps / ∫_{mu > eta} (mu - eta)^2 / (eta + mu/beta_alpha)`` on v."""
    b = beta_alpha(ch, alpha)
    if math.isinf(b):
        raise BelowThreshold(f"alpha={alpha} <= alpha_weak={alpha_weak(ch)}")
    return 1.0 + 2.0 * eps / positive_part_integral(ch, b)


def epsilon_cfunction(T: Epsilon) -> CFunction:
    pts = T.breakpoints(T.channel)
    return CFunction(lambda y, r: T.c_values(r), points=pts, label="c_eps",
                     params={"eps": T.eps, "v": T.v, "beta": T.beta})
