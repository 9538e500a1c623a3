"""Large-system prediction of the squared cosine for a given preprocessor.

With ``t = T(y)`` and ``lam > tau = sup T``::

    psi(lam)   = lam * E_mu [t / (lam - t)]
    phi(lam)   = lam / alpha + lam * E_eta[t / (lam - t)]
    psi'(lam)  = -E_mu [(t / (lam - t))^2]
    phi'(lam)  = 1 / alpha - E_eta[(t / (lam - t))^2]

The outlier sits at the largest root ``lam*`` of ``phi - psi`` on
``(tau, inf)`` with ``phi'(lam*) > 0``; the squared cosine then tends to
``phi' / (phi' - psi')``.  No such root means no correlation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import optimize as _spo

from .channels import Channel, QuadratureRule
from .preprocess import Preprocessor, Subset, Trim

__all__ = [
    "Prediction",
    "DomainError",
    "InfeasiblePreprocessor",
    "psi",
    "phi",
    "psi_prime",
    "phi_prime",
    "solve_lambda_star",
    "quadratic_constraint",
    "tune_trim",
    "tune_subset",
    "TRIM_GRID",
    "SUBSET_GRID",
]

log = logging.getLogger(__name__)

TRIM_GRID = tuple(range(1, 51))
SUBSET_GRID = tuple(np.geomspace(0.1, 20.0, 50))

_SCAN_LO = 1e-6
_SCAN_HI = 1e8
_PER_DECADE = 400
_REFINE = 10
_CHUNK = 256


class DomainError(ValueError):
    pass


class InfeasiblePreprocessor(ValueError):
    pass


@dataclass(frozen=True)
class Diagnostics:
    phi_prime: float
    psi_prime: float
    residual: float


@dataclass(frozen=True)
class Prediction:
    alpha: float
    lambda_star: float | None
    rho: float
    phase: str
    diagnostics: Diagnostics | None = None
    tau: float = math.nan

    @property
    def correlated(self) -> bool:
        return self.phase == "correlated"


class _Nodes:
    """Preprocessor values on a channel's fixed quadrature rule."""

    def __init__(self, ch: Channel, T: Preprocessor):
        rule: QuadratureRule = ch.quadrature_rule(T.breakpoints(ch))
        t = np.asarray(T.values(rule.y, rule.r), dtype=float)
        keep = t != 0
        self.t = t[keep]
        self.w = rule.w[keep]
        self.w_mu = rule.w_mu[keep]
        self.tau, self.t_min = T.bounds(ch)

    def _frac(self, lam):
        lam = np.asarray(lam, dtype=float)
        if np.any(lam <= self.tau):
            raise DomainError(f"lambda must exceed tau = {self.tau}")
        return self.t / (lam[..., None] - self.t)

    def values(self, lam, alpha):
        """(phi, psi) at an array of lambdas, chunked to bound memory."""
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        ph = np.empty_like(lam)
        ps = np.empty_like(lam)
        for i in range(0, lam.size, _CHUNK):
            sl = slice(i, i + _CHUNK)
            fr = self._frac(lam[sl])
            ph[sl] = lam[sl] / alpha + lam[sl] * (fr @ self.w)
            ps[sl] = lam[sl] * (fr @ self.w_mu)
        return ph, ps

    def primes(self, lam, alpha):
        fr2 = np.square(self._frac(lam))
        return 1.0 / alpha - fr2 @ self.w, -(fr2 @ self.w_mu)


@lru_cache(maxsize=128)
def _nodes(ch: Channel, T: Preprocessor) -> _Nodes:
    return _Nodes(ch, T)


def _scalar(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def psi(ch: Channel, T: Preprocessor, lam):
    nd = _nodes(ch, T)
    lam = np.asarray(lam, dtype=float)
    return _scalar(lam * (nd._frac(lam) @ nd.w_mu))


def phi(ch: Channel, T: Preprocessor, alpha: float, lam):
    nd = _nodes(ch, T)
    lam = np.asarray(lam, dtype=float)
    return _scalar(lam / alpha + lam * (nd._frac(lam) @ nd.w))


def psi_prime(ch: Channel, T: Preprocessor, lam):
    return _scalar(_nodes(ch, T).primes(lam, 1.0)[1])


def phi_prime(ch: Channel, T: Preprocessor, alpha: float, lam):
    return _scalar(_nodes(ch, T).primes(lam, alpha)[0])


def quadratic_constraint(ch: Channel, T: Preprocessor, lam: float) -> float:
    """``E_eta[(T / (lam - T))^2]`` by adaptive quadrature.

    ``phi'(lam) > 0`` exactly when this is below ``1 / alpha``; computed
    independently of the fixed rule as a cross-check.
    """
    tau = T.bounds(ch)[0]
    if lam <= tau:
        raise DomainError(f"lambda must exceed tau = {tau}")

    def g(y, r):
        t = np.asarray(T.values(y, r), dtype=float)
        return np.square(t / (lam - t))

    return ch.expect(g, points=T.breakpoints(ch))


def _sign_changes(g):
    s = np.sign(g)
    return np.nonzero(s[:-1] * s[1:] < 0)[0]


def _brackets(nd: _Nodes, alpha: float):
    tau = nd.tau
    decades = math.log10(_SCAN_HI / _SCAN_LO)
    d = tau * np.geomspace(_SCAN_LO, _SCAN_HI, int(decades * _PER_DECADE) + 1)
    lam = tau + d
    ph, ps = nd.values(lam, alpha)
    g = ph - ps
    out = []
    for i in _sign_changes(g):
        # refine each coarse bracket in case it hides several crossings
        fine_d = np.geomspace(d[i], d[i + 1], _REFINE + 1)
        fph, fps = nd.values(tau + fine_d, alpha)
        fg = fph - fps
        for j in _sign_changes(fg):
            out.append((tau + fine_d[j], tau + fine_d[j + 1]))
    return out, g


def solve_lambda_star(ch: Channel, T: Preprocessor, alpha: float) -> Prediction:
    """Fixed point ``phi = psi`` and the limiting squared cosine."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if not T.is_feasible(ch):
        raise InfeasiblePreprocessor(f"{T.label()} is not feasible: bounds {T.bounds(ch)}")
    nd = _nodes(ch, T)
    brackets, _ = _brackets(nd, alpha)

    def g(x):
        a, b = nd.values(x, alpha)
        return float(a[0] - b[0])

    qualifying = []
    for lo, hi in reversed(brackets):
        root = _spo.brentq(g, lo, hi, xtol=1e-300, rtol=1e-15, maxiter=300)
        dphi, dpsi = nd.primes(root, alpha)
        if dphi > 0:
            qualifying.append((root, float(dphi), float(dpsi)))
    if not qualifying:
        return Prediction(alpha=alpha, lambda_star=None, rho=0.0, phase="uncorrelated", tau=nd.tau)
    if len(qualifying) > 1:
        log.info("%d roots with phi' > 0 for %s at alpha=%g; using the largest",
                 len(qualifying), T.label(), alpha)
    root, dphi, dpsi = qualifying[0]
    rho = dphi / (dphi - dpsi)
    return Prediction(alpha=alpha, lambda_star=root, rho=rho, phase="correlated",
                      diagnostics=Diagnostics(dphi, dpsi, g(root)), tau=nd.tau)


def _tune(ch, alpha, make, grid):
    best = None
    for p in grid:
        T = make(p)
        if not T.is_feasible(ch):
            continue
        pred = solve_lambda_star(ch, T, alpha)
        if best is None or pred.rho > best[1].rho:
            best = (p, pred, T)
    if best is None:
        raise InfeasiblePreprocessor("no feasible parameter on the tuning grid")
    return best


def tune_trim(ch: Channel, alpha: float, grid=TRIM_GRID):
    """Best trim level on ``grid`` by predicted squared cosine: ``(a, Prediction, T)``."""
    return _tune(ch, alpha, Trim, grid)


def tune_subset(ch: Channel, alpha: float, grid=SUBSET_GRID):
    """Best subset level on ``grid`` by predicted squared cosine: ``(b, Prediction, T)``."""
    return _tune(ch, alpha, lambda b: Subset(float(b)), grid)
