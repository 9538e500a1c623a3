"""Numerical kernels shared by the rest of the package.

Everything here is deterministic given its inputs.  Integrals over the
half line are split into an inner panel ``[0, 1]`` (integrated after the
substitution ``y = u**2`` so that ``y**-0.5`` endpoint singularities
become smooth), a body ``[1, y_max]`` and a sequence of doubling tail
panels that stop once their contribution drops below the tail bound.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as _spi
from scipy import optimize as _spo
from scipy import special as _sps

__all__ = [
    "Atom",
    "SupportDescriptor",
    "Quadrature",
    "NumericalError",
    "NonConvergent",
    "NonFinite",
    "NotBracketed",
    "integrate",
    "sum_series",
    "find_root_increasing",
    "normal_cdf",
    "normal_pdf",
    "inverse_mills_h",
    "make_rng",
    "standard_complex_gaussian",
    "standard_real_gaussian",
    "poisson",
]


class NumericalError(RuntimeError):
    """Base class for numerical failures."""


class NonConvergent(NumericalError):
    pass


class NonFinite(NumericalError):
    pass


class NotBracketed(NumericalError):
    pass


@dataclass(frozen=True)
class Atom:
    """A point mass of the measurement law at ``location``.

    ``eta`` and ``mu`` are the masses the two channel densities put there.
    """

    location: float
    eta: float
    mu: float

    @property
    def ratio(self) -> float:
        return self.mu / self.eta if self.eta > 0 else math.inf


@dataclass(frozen=True)
class SupportDescriptor:
    kind: str
    atoms: tuple[Atom, ...] = ()

    KINDS = ("continuous", "discrete", "mixed")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown support kind {self.kind!r}")
        if self.atoms and self.kind != "mixed":
            raise ValueError("only mixed supports carry atoms")
        locs = [a.location for a in self.atoms]
        if len(set(locs)) != len(locs):
            raise ValueError("atom locations must be distinct")
        for a in self.atoms:
            if a.location < 0:
                raise ValueError("atom locations must be nonnegative")
            if not (0.0 <= a.eta <= 1.0 and 0.0 <= a.mu <= 1.0):
                raise ValueError("atom weights must lie in [0, 1]")

    @property
    def is_discrete(self) -> bool:
        return self.kind == "discrete"


@dataclass(frozen=True)
class Quadrature:
    rtol: float = 1e-10
    atol: float = 1e-14
    tail_bound: float = 1e-12
    panel_budget: int = 200
    max_doublings: int = 40

    def __post_init__(self):
        if min(self.rtol, self.atol, self.tail_bound) <= 0:
            raise ValueError("quadrature tolerances must be strictly positive")


DEFAULT_QUADRATURE = Quadrature()


def _checked(f):
    def wrapped(y):
        v = f(y)
        v = float(v)
        if not math.isfinite(v):
            raise NonFinite(f"integrand is {v} at y={y!r}")
        return v

    return wrapped


def _quad(f, a, b, q, points=None):
    pts = None
    if points is not None:
        pts = sorted(p for p in points if a < p < b)
        if not pts:
            pts = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", _spi.IntegrationWarning)
        out = _spi.quad(f, a, b, epsabs=q.atol, epsrel=q.rtol, limit=q.panel_budget,
                        points=pts, full_output=1)
    val, err, info = out[0], out[1], out[2]
    if len(out) > 3:
        # ier 2 (roundoff) is tolerated when the error estimate is still tiny
        if info.get("last", 0) >= q.panel_budget or err > max(q.atol, q.rtol * abs(val)) * 100:
            raise NonConvergent(f"quadrature on [{a}, {b}] failed: {out[3]}")
    return val, err


def integrate(f, support: SupportDescriptor | None = None, q: Quadrature = DEFAULT_QUADRATURE,
              points=(), y_max: float = 50.0) -> float:
    """Integrate ``f`` over the continuum part of a half-line support.

    Atoms are *not* included; callers add ``weight * f(location)`` for
    those.  ``points`` lists interior locations where ``f`` has kinks or
    jumps.  The tail beyond ``y_max`` is integrated over doubling panels
    until one contributes less than ``q.tail_bound``.
    """
    if support is not None and support.is_discrete:
        raise ValueError("integrate handles continuum supports; use sum_series")
    g = _checked(f)
    points = [float(p) for p in points if p > 0]

    inner_hi = min(1.0, y_max)
    inner_pts = [math.sqrt(p) for p in points if p < inner_hi]
    total, err = _quad(lambda u: 2.0 * u * g(u * u), 0.0, math.sqrt(inner_hi), q, inner_pts)
    v, e = _quad(g, inner_hi, y_max, q, [p for p in points if p > inner_hi])
    total += v
    err += e

    lo = y_max
    for _ in range(q.max_doublings):
        hi = 2.0 * lo
        v, e = _quad(g, lo, hi, q, [p for p in points if lo < p < hi])
        total += v
        err += e
        if abs(v) < q.tail_bound and not any(p > hi for p in points):
            return total
        lo = hi
    raise NonConvergent("tail contribution never fell below the tail bound")


def sum_series(f, ratio_hint: float, q: Quadrature = DEFAULT_QUADRATURE,
               chunk: int = 256, max_terms: int = 2_000_000) -> float:
    """Sum ``f(y)`` over ``y = 0, 1, 2, ...``.

    ``f`` must accept an integer array.  Summation stops when the geometric
    tail bound ``|f(y)| r / (1 - r)`` drops below ``q.atol``, with ``r`` the
    larger of ``ratio_hint`` and the observed term ratio.
    """
    if not 0.0 <= ratio_hint < 1.0:
        raise ValueError("ratio_hint must lie in [0, 1)")
    total = 0.0
    comp = []
    start = 0
    while start < max_terms:
        ys = np.arange(start, start + chunk)
        vals = np.asarray(f(ys), dtype=float)
        if not np.all(np.isfinite(vals)):
            bad = ys[~np.isfinite(vals)][0]
            raise NonFinite(f"series term is not finite at y={bad}")
        comp.append(math.fsum(vals))
        last, prev = abs(vals[-1]), abs(vals[-2])
        r = ratio_hint
        if prev > 0:
            r = max(r, last / prev)
        tail_ok = last == 0.0 or (r < 1.0 and last * r / (1.0 - r) < q.atol)
        decaying = np.all(np.abs(vals[-8:]) <= np.abs(vals[-9:-1]) + 1e-300)
        if tail_ok and decaying:
            total = math.fsum(comp)
            return total
        start += chunk
    raise NonConvergent(f"series did not decay within {max_terms} terms")


def find_root_increasing(g, lo: float, hi: float, tol: float = 1e-12) -> float:
    """Root of an increasing function bracketed by ``[lo, hi]``.

    Uses Brent's method (bisection safeguarded secant / inverse quadratic
    steps), so convergence is guaranteed once the bracket is valid.
    """
    glo, ghi = g(lo), g(hi)
    if glo > 0 or ghi < 0:
        raise NotBracketed(f"g({lo})={glo}, g({hi})={ghi}: sign condition fails")
    if glo == 0:
        return lo
    if ghi == 0:
        return hi
    return _spo.brentq(g, lo, hi, xtol=tol * 1e-4 * max(1.0, abs(lo)),
                       rtol=max(4 * np.finfo(float).eps, min(tol, 1e-13)), maxiter=500)


def normal_cdf(x):
    return _sps.ndtr(x)


def normal_pdf(x):
    return np.exp(-0.5 * np.square(x)) / math.sqrt(2.0 * math.pi)


_CF_SWITCH = -8.0
_CF_DEPTH = 120


def _h_continued_fraction(t):
    # h(-t) = 1 / (t + 2/(t + 3/(t + 4/(...)))), from Laplace's fraction for Mills' ratio
    acc = np.asarray(t, dtype=float).copy()
    for k in range(_CF_DEPTH, 1, -1):
        acc = t + k / acc
    return 1.0 / acc


def inverse_mills_h(x):
    """``h(x) = x + phi(x) / Phi(x)``; positive and strictly increasing.

    Below ``x = -8`` the difference cancels badly, so a continued fraction
    in ``t = -x`` is used there instead.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    far = x < _CF_SWITCH
    near = ~far
    xn = x[near]
    out[near] = xn + np.exp(-0.5 * xn * xn - 0.5 * math.log(2 * math.pi) - _sps.log_ndtr(xn))
    out[far] = _h_continued_fraction(-x[far])
    return out[()] if out.ndim == 0 else out


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Generator determined by ``(seed, stream)``; streams are independent."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(int(stream),))
    return np.random.Generator(np.random.PCG64(ss))


def standard_complex_gaussian(rng: np.random.Generator, size=None):
    """CN(0, 1) draws: independent real and imaginary parts of variance 1/2."""
    z = rng.standard_normal(size=(2,) if size is None else (2, *np.atleast_1d(size)))
    out = (z[0] + 1j * z[1]) / math.sqrt(2.0)
    return complex(out) if size is None else out


def standard_real_gaussian(rng: np.random.Generator, size=None):
    return rng.standard_normal(size=size)


def poisson(rng: np.random.Generator, rate, size=None):
    """Poisson draws; numpy uses inversion for small rates and PTRS above 10."""
    return rng.poisson(rate, size=size)
