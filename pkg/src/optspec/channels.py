"""Sensing models ``p(y | |s|)`` and their tilted marginals eta and mu.

For a channel, ``eta(y) = E[p(y | |S|)]`` is the marginal law of a
measurement and ``mu(y) = E[|S|^2 p(y | |S|)]`` its ``|S|^2``-tilted
version; ``S`` is CN(0, 1) in complex mode and N(0, 1) in real mode.
Almost every downstream quantity is an expectation under eta of a
function of ``y`` and the ratio ``r(y) = mu(y) / eta(y) = E[|S|^2 | Y = y]``,
so channels expose the ratio directly (computed stably) and an
``expect`` method that integrates ``g(y, r)`` against eta, atoms included.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import integrate as _spi
from scipy import interpolate as _spint
from scipy import special as _sps

from . import numerics as nm
from .numerics import Atom, Quadrature, SupportDescriptor, DEFAULT_QUADRATURE

__all__ = [
    "Channel",
    "PoissonChannel",
    "GaussianNoiseChannel",
    "CustomChannel",
    "ChannelFunctions",
    "QuadratureRule",
    "InfimumReport",
    "NormalizationFailure",
    "DegenerateChannel",
    "poisson",
    "gaussian_noise",
    "noiseless",
    "channel_functions",
    "mu_over_eta_infimum",
    "alpha_weak",
    "weak_threshold_integral",
    "sample_measurement",
    "load_channel",
]

MODES = ("complex", "real")
_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)

# Gauss-Legendre panels used by the fixed quadrature rules
_GL_ORDER = 24
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_ORDER)


class NormalizationFailure(ValueError):
    pass


class DegenerateChannel(ValueError):
    pass


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and eta-weights such that ``sum(w * g(y, r))`` approximates ``E_eta[g]``.

    Atom nodes are appended last and flagged in ``atom``.
    """

    y: np.ndarray
    r: np.ndarray
    w: np.ndarray
    atom: np.ndarray

    @property
    def w_mu(self) -> np.ndarray:
        return self.w * self.r


class Channel:
    """Base class.  Subclasses provide ``eta``, ``ratio`` and ``sample``."""

    name = "channel"
    #: fourth moment of |S|: bounds the integral of mu^2 / eta
    fourth_moment = 2.0

    def __init__(self, mode: str = "complex", support: SupportDescriptor | None = None):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        self.mode = mode
        self.fourth_moment = 2.0 if mode == "complex" else 3.0
        self.support = support or SupportDescriptor("continuous")
        self._rules = {}

    # -- densities ---------------------------------------------------------
    def eta(self, y):
        raise NotImplementedError

    def ratio(self, y):
        """``mu / eta`` on the continuum (or lattice) part of the support."""
        raise NotImplementedError

    def mu(self, y):
        return self.eta(y) * self.ratio(y)

    @property
    def atoms(self) -> tuple[Atom, ...]:
        return self.support.atoms

    @property
    def is_discrete(self) -> bool:
        return self.support.is_discrete

    def ratio_at(self, y):
        """Ratio at measurement values, with atom locations taking the atom ratio."""
        y = np.asarray(y, dtype=float)
        r = np.asarray(self.ratio(y), dtype=float).copy()
        for a in self.atoms:
            r[y == a.location] = a.ratio
        return r[()] if r.ndim == 0 else r

    def ratio_range(self) -> tuple[float, float]:
        """(inf, sup) of the ratio over the continuum part."""
        raise NotImplementedError

    def ratio_inverse(self, r: float):
        """Continuum ``y`` with ``ratio(y) == r`` when the ratio is monotone, else None."""
        return None

    # -- sampling ----------------------------------------------------------
    def sample(self, s_mag, rng: np.random.Generator):
        raise NotImplementedError(f"{self.name} channel has no sampler")

    # -- integration -------------------------------------------------------
    #: geometric decay of eta on the lattice (discrete channels)
    series_ratio = 0.5
    #: where the body of the continuum integral ends
    y_body = 50.0

    def expect(self, g, points=(), q: Quadrature = DEFAULT_QUADRATURE) -> float:
        """``E_eta[g(Y, r(Y))]`` including atoms, by adaptive quadrature or series."""
        if self.is_discrete:
            val = nm.sum_series(lambda ys: _mul0(g(ys, self.ratio(ys)), self.eta(ys)),
                                self.series_ratio, q)
        else:
            val = nm.integrate(lambda y: _mul0(g(y, self.ratio(y)), self.eta(y)),
                               self.support, q, points=points, y_max=self.y_body)
        for a in self.atoms:
            if a.eta > 0:
                val += a.eta * float(g(np.float64(a.location), np.float64(a.ratio)))
        return val

    def _tail_end(self) -> float:
        y = self.y_body
        while True:
            e = float(self.eta(y))
            if e * (1 + y) ** 3 < 1e-24:
                return y
            y *= 1.5
            if y > 1e7:
                raise nm.NonConvergent("eta does not decay")

    def quadrature_rule(self, points=()) -> QuadratureRule:
        """Fixed rule for fast vectorized expectations; cached per breakpoint set."""
        key = tuple(sorted(float(p) for p in points))
        rule = self._rules.get(key)
        if rule is None:
            rule = self._build_rule(key)
            self._rules[key] = rule
        return rule

    def _build_rule(self, points) -> QuadratureRule:
        if self.is_discrete:
            ys = []
            y0 = 0
            while True:
                chunk = np.arange(y0, y0 + 256, dtype=float)
                e = self.eta(chunk)
                ys.append(chunk)
                if e[-1] * (1 + chunk[-1]) ** 3 < 1e-24 and e[-1] <= e[-2]:
                    break
                y0 += 256
            y = np.concatenate(ys)
            w = self.eta(y)
        else:
            end = self._tail_end()
            edges = np.unique(np.concatenate([
                np.arange(0.0, min(end, 20.0) + 1e-12, 0.5),
                np.arange(20.0, end, 1.0) if end > 20 else [],
                [end],
                [p for p in points if 0 < p < end],
            ]))
            ys, ws = [], []
            for a, b in zip(edges[:-1], edges[1:]):
                if a == 0.0:
                    # y = u^2 removes y^-1/2 endpoint singularities
                    ub = math.sqrt(b)
                    u = 0.5 * ub * (_GL_X + 1.0)
                    yy = u * u
                    ww = 0.5 * ub * _GL_W * 2.0 * u
                else:
                    yy = 0.5 * (b - a) * (_GL_X + 1.0) + a
                    ww = 0.5 * (b - a) * _GL_W
                ys.append(yy)
                ws.append(ww)
            y = np.concatenate(ys)
            w = np.concatenate(ws) * self.eta(y)
        r = np.asarray(self.ratio(y), dtype=float)
        atom = np.zeros(y.size, dtype=bool)
        if self.atoms:
            y = np.concatenate([y, [a.location for a in self.atoms]])
            r = np.concatenate([r, [a.ratio for a in self.atoms]])
            w = np.concatenate([w, [a.eta for a in self.atoms]])
            atom = np.concatenate([atom, np.ones(len(self.atoms), dtype=bool)])
        keep = w > 0
        return QuadratureRule(y=y[keep], r=r[keep], w=w[keep], atom=atom[keep])

    def describe(self) -> dict:
        return {"kind": self.name, "mode": self.mode}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.describe().items() if k != "kind")
        return f"{type(self).__name__}({args})"


def _mul0(g, e):
    # 0 * anything = 0 where eta vanishes (underflow or outside the support)
    return np.where(e == 0, 0.0, np.asarray(g, dtype=float) * e)


class PoissonChannel(Channel):
    """``y ~ Poisson(kappa |s|^2)``."""

    name = "poisson"

    def __init__(self, kappa: float, mode: str = "complex"):
        if not kappa > 0:
            raise ValueError("kappa must be positive")
        super().__init__(mode, SupportDescriptor("discrete"))
        self.kappa = float(kappa)
        k = self.kappa
        self.series_ratio = k / (k + 1.0) if mode == "complex" else k / (k + 0.5)

    def eta(self, y):
        y = np.asarray(y, dtype=float)
        k = self.kappa
        yy = np.maximum(y, 0.0)
        with np.errstate(divide="ignore"):
            if self.mode == "complex":
                log_e = yy * math.log(k) - (yy + 1.0) * math.log1p(k)
            else:
                log_e = (yy * math.log(k) + _sps.gammaln(yy + 0.5) - _sps.gammaln(yy + 1.0)
                         - _LOG_SQRT_2PI - (yy + 0.5) * math.log(k + 0.5))
        out = np.where((y >= 0) & (y == np.floor(y)), np.exp(log_e), 0.0)
        return out[()] if out.ndim == 0 else out

    def ratio(self, y):
        y = np.asarray(y, dtype=float)
        if self.mode == "complex":
            return (y + 1.0) / (self.kappa + 1.0)
        return (y + 0.5) / (self.kappa + 0.5)

    def ratio_range(self):
        return (float(self.ratio(0.0)), math.inf)

    def sample(self, s_mag, rng):
        return nm.poisson(rng, self.kappa * np.square(s_mag)).astype(float)

    def describe(self):
        return {"kind": self.name, "kappa": self.kappa, "mode": self.mode}


class GaussianNoiseChannel(Channel):
    """``y = max(|s|^2 + w, 0)`` with ``w ~ N(0, sigma^2)``; ``sigma = 0`` is noiseless.

    For ``sigma > 0`` the clipping puts a point mass at ``y = 0``.
    """

    name = "gaussian"

    def __init__(self, sigma: float = 0.0, mode: str = "complex"):
        if not sigma >= 0:
            raise ValueError("sigma must be nonnegative")
        self.sigma = float(sigma)
        self._pair_cache = {}
        super().__init__(mode)
        if self.sigma > 0:
            self.support = SupportDescriptor("mixed", (self._atom(),))
        self.y_body = max(50.0, self.sigma ** 2 + 12.0 * self.sigma + 50.0)

    @property
    def noiseless(self) -> bool:
        return self.sigma == 0.0

    # real-mode / sigma > 0 has no closed form: integrate over s = |S| >= 0
    def _s_weight(self, s):
        if self.mode == "complex":
            return 2.0 * s * np.exp(-s * s)
        return 2.0 * nm.normal_pdf(s)

    def _numeric(self, y: float, power: int) -> float:
        sig = self.sigma
        f = lambda s: self._s_weight(s) * s ** power * nm.normal_pdf((y - s * s) / sig) / sig
        pk = math.sqrt(y) if y > 0 else 0.0
        pts = [p for p in (pk - 8 * sig / max(pk, 1.0), pk, pk + 8 * sig / max(pk, 1.0)) if p > 0]
        hi = max(pk + 12.0 * sig / max(pk, 0.1) + 12.0, 12.0)
        val, _ = _spi.quad(f, 0.0, hi, points=pts or None, epsabs=1e-300, epsrel=1e-12, limit=400)
        return val

    def _pair(self, y: float):
        y = float(y)
        hit = self._pair_cache.get(y)
        if hit is None:
            hit = (self._numeric(y, 0), self._numeric(y, 2))
            if len(self._pair_cache) < 200_000:
                self._pair_cache[y] = hit
        return hit

    def _atom(self) -> Atom:
        sig = self.sigma
        if self.mode == "complex":
            e0 = 0.5 - math.exp(sig * sig / 2) * nm.normal_cdf(-sig)
            m0 = 0.5 + (sig * sig - 1) * math.exp(sig * sig / 2) * nm.normal_cdf(-sig) - sig / math.sqrt(2 * math.pi)
            # the closed forms cancel for large sigma; fall back to quadrature there
            if sig > 5:
                e0 = _spi.quad(lambda z: nm.normal_cdf(-z / sig) * math.exp(-z), 0, np.inf, epsrel=1e-13)[0]
                m0 = _spi.quad(lambda z: nm.normal_cdf(-z / sig) * z * math.exp(-z), 0, np.inf, epsrel=1e-13)[0]
        else:
            g = lambda s, p: self._s_weight(s) * s ** p * nm.normal_cdf(-s * s / sig)
            e0 = _spi.quad(g, 0, np.inf, args=(0,), epsabs=1e-15, epsrel=1e-13)[0]
            m0 = _spi.quad(g, 0, np.inf, args=(2,), epsabs=1e-15, epsrel=1e-13)[0]
        return Atom(0.0, float(e0), float(m0))

    def eta(self, y):
        y = np.asarray(y, dtype=float)
        pos = y > 0
        yp = np.where(pos, y, 1.0)
        sig = self.sigma
        if self.noiseless:
            if self.mode == "complex":
                e = np.exp(-yp)
            else:
                e = np.exp(-0.5 * yp) / np.sqrt(2 * math.pi * yp)
        elif self.mode == "complex":
            e = np.exp(0.5 * sig * sig - yp + _sps.log_ndtr(yp / sig - sig))
        else:
            e = np.vectorize(lambda v: self._pair(v)[0], otypes=[float])(yp)
        out = np.where(pos, e, 0.0)
        if self.noiseless and self.mode == "complex":
            out = np.where(y == 0, 1.0, out)
        return out[()] if out.ndim == 0 else out

    def ratio(self, y):
        y = np.asarray(y, dtype=float)
        sig = self.sigma
        if self.noiseless:
            return np.maximum(y, 0.0)
        if self.mode == "complex":
            return sig * nm.inverse_mills_h(y / sig - sig)
        yp = np.where(y > 0, y, 1e-300)
        out = np.vectorize(lambda v: self._pair(v)[1] / self._pair(v)[0], otypes=[float])(yp)
        return out[()] if out.ndim == 0 else out

    def mu(self, y):
        y = np.asarray(y, dtype=float)
        if self.mode == "real" and not self.noiseless:
            out = np.where(y > 0, np.vectorize(lambda v: self._pair(v)[1] if v > 0 else 0.0,
                                               otypes=[float])(y), 0.0)
            return out[()] if out.ndim == 0 else out
        return super().mu(y)

    def ratio_range(self):
        if self.noiseless:
            return (0.0, math.inf)
        if self.mode == "complex":
            return (float(self.sigma * nm.inverse_mills_h(-self.sigma)), math.inf)
        return (float(self.ratio(1e-12)), math.inf)

    def ratio_inverse(self, r: float):
        lo, hi = self.ratio_range()
        if not lo < r < hi:
            return None
        if self.noiseless:
            return float(r)
        if self.mode == "complex":
            # invert h(y/sigma - sigma) = r / sigma
            target = r / self.sigma
            g = lambda x: float(nm.inverse_mills_h(x)) - target
            a, b = -self.sigma, max(target, -self.sigma) + 1.0
            while g(b) < 0:
                b = 2 * b + 1
            x = nm.find_root_increasing(g, a, b, 1e-14)
            return self.sigma * (x + self.sigma)
        g = lambda y: float(self.ratio(y)) - r
        b = max(2 * r, 1.0)
        while g(b) < 0:
            b *= 2
        return nm.find_root_increasing(g, 1e-12, b, 1e-13)

    def sample(self, s_mag, rng):
        s2 = np.square(np.asarray(s_mag, dtype=float))
        if self.noiseless:
            return s2
        w = self.sigma * nm.standard_real_gaussian(rng, np.shape(s2))
        return np.maximum(s2 + w, 0.0)

    def describe(self):
        if self.noiseless:
            return {"kind": "noiseless", "mode": self.mode}
        return {"kind": self.name, "sigma": self.sigma, "mode": self.mode}


class CustomChannel(Channel):
    """A channel given by tables of eta and mu (or built from a density).

    Continuum tables are interpolated monotone-cubically (PCHIP) and are
    zero beyond the last knot; discrete tables are read at integer ``y``.
    """

    name = "custom"
    _SCAN_POINTS = 10_000

    def __init__(self, y, eta, mu, kind: str = "continuous", mode: str = "complex",
                 atoms=(), sampler=None, check: bool = True):
        y = np.asarray(y, dtype=float)
        eta = np.asarray(eta, dtype=float)
        mu = np.asarray(mu, dtype=float)
        if y.ndim != 1 or y.shape != eta.shape or y.shape != mu.shape:
            raise ValueError("y, eta and mu must be 1-d arrays of equal length")
        if np.any(np.diff(y) <= 0) or y[0] < 0:
            raise ValueError("y grid must be nonnegative and strictly increasing")
        if np.any(eta < 0) or np.any(mu < 0):
            raise ValueError("eta and mu must be nonnegative")
        atoms = tuple(a if isinstance(a, Atom) else Atom(*a) for a in atoms)
        if kind == "discrete":
            if np.any(y != np.round(y)):
                raise ValueError("discrete tables need integer y")
            support = SupportDescriptor("discrete")
        elif atoms:
            support = SupportDescriptor("mixed", atoms)
        else:
            support = SupportDescriptor("continuous")
        super().__init__(mode, support)
        self.y_grid, self.eta_table, self.mu_table = y, eta, mu
        self._sampler = sampler
        if kind == "discrete":
            self._lut_eta = dict(zip(y.astype(int), eta))
            self._lut_mu = dict(zip(y.astype(int), mu))
            nz = eta[eta > 0]
            self.series_ratio = 0.0 if nz.size < 2 else 0.5
        else:
            self._eta_i = _spint.PchipInterpolator(y, eta, extrapolate=False)
            self._mu_i = _spint.PchipInterpolator(y, mu, extrapolate=False)
            self.y_body = float(y[-1])
        if check:
            channel_functions(self)

    @classmethod
    def from_density(cls, density, kind: str = "continuous", mode: str = "complex",
                     y_grid=None, point_masses=None, sampler=None, rel_tol: float = 1e-7):
        """Tabulate eta/mu from ``density(y, s)``, the law of ``y`` given ``|s| = s``.

        ``point_masses`` maps atom locations to ``P(Y = loc | s)`` callables.
        For continuum supports the grid is refined until PCHIP midpoints
        agree with direct evaluation to ``rel_tol``.
        """
        if mode == "complex":
            sw = lambda s: 2.0 * s * math.exp(-s * s)
        else:
            sw = lambda s: 2.0 * float(nm.normal_pdf(s))

        def tilt(fun, power):
            val, _ = _spi.quad(lambda s: sw(s) * s ** power * fun(s), 0.0, np.inf,
                               epsabs=1e-15, epsrel=1e-12, limit=400)
            return val

        def pair(yv):
            return (tilt(lambda s: density(yv, s), 0), tilt(lambda s: density(yv, s), 2))

        if kind == "discrete":
            if y_grid is None:
                ys, vals, k = [], [], 0
                while True:
                    e, m = pair(float(k))
                    ys.append(k)
                    vals.append((e, m))
                    if k > 10 and e < 1e-18 and m < 1e-18:
                        break
                    k += 1
                    if k > 100_000:
                        raise nm.NonConvergent("discrete density does not decay")
                y = np.array(ys, dtype=float)
            else:
                y = np.asarray(y_grid, dtype=float)
                vals = [pair(v) for v in y]
        else:
            y = np.asarray(y_grid if y_grid is not None else
                           np.concatenate([np.linspace(0, 1, 17), np.linspace(1.25, 60, 236)]), dtype=float)
            table = {float(v): pair(float(v)) for v in y}
            for _ in range(12):
                ys = np.array(sorted(table))
                e = np.array([table[v][0] for v in ys])
                m = np.array([table[v][1] for v in ys])
                ie = _spint.PchipInterpolator(ys, e)
                im = _spint.PchipInterpolator(ys, m)
                mids = 0.5 * (ys[1:] + ys[:-1])
                refine = []
                for mid in mids:
                    ev, mv = pair(float(mid))
                    scale = max(e.max(), 1e-300)
                    if abs(ie(mid) - ev) > rel_tol * scale or abs(im(mid) - mv) > rel_tol * max(m.max(), 1e-300):
                        refine.append((float(mid), (ev, mv)))
                if not refine:
                    break
                table.update(dict(refine))
            y = np.array(sorted(table))
            vals = [table[v] for v in y]
        eta = np.array([v[0] for v in vals])
        mu = np.array([v[1] for v in vals])
        atoms = []
        for loc, pm in (point_masses or {}).items():
            atoms.append(Atom(float(loc), tilt(pm, 0), tilt(pm, 2)))
        return cls(y, eta, mu, kind=kind, mode=mode, atoms=atoms, sampler=sampler)

    def eta(self, y):
        y = np.asarray(y, dtype=float)
        if self.is_discrete:
            out = np.vectorize(lambda v: self._lut_eta.get(int(v), 0.0) if v == int(v) else 0.0,
                               otypes=[float])(y)
        else:
            out = np.nan_to_num(np.maximum(self._eta_i(y), 0.0), nan=0.0)
        return out[()] if out.ndim == 0 else out

    def mu(self, y):
        y = np.asarray(y, dtype=float)
        if self.is_discrete:
            out = np.vectorize(lambda v: self._lut_mu.get(int(v), 0.0) if v == int(v) else 0.0,
                               otypes=[float])(y)
        else:
            out = np.nan_to_num(np.maximum(self._mu_i(y), 0.0), nan=0.0)
        return out[()] if out.ndim == 0 else out

    def ratio(self, y):
        e, m = np.asarray(self.eta(y)), np.asarray(self.mu(y))
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(e > 0, m / np.where(e > 0, e, 1.0), 1.0)
        return out[()] if out.ndim == 0 else out

    def expect(self, g, points=(), q=DEFAULT_QUADRATURE):
        if self.is_discrete:
            y = self.y_grid
            val = math.fsum(_mul0(g(y, self.ratio(y)), self.eta(y)))
            for a in self.atoms:
                val += a.eta * float(g(np.float64(a.location), np.float64(a.ratio)))
            return val
        f = lambda y: float(_mul0(g(y, self.ratio(y)), self.eta(y)))
        edges = np.unique(np.concatenate([self.y_grid, [p for p in points if self.y_grid[0] < p < self.y_grid[-1]]]))
        # integrate knot interval by knot interval; the table is piecewise cubic
        vals = []
        for a, b in zip(edges[:-1], edges[1:]):
            v, _ = _spi.quad(f, a, b, epsabs=q.atol, epsrel=q.rtol, limit=q.panel_budget)
            vals.append(v)
        total = math.fsum(vals)
        for a in self.atoms:
            total += a.eta * float(g(np.float64(a.location), np.float64(a.ratio)))
        return total

    def _tail_end(self):
        return float(self.y_grid[-1])

    def _build_rule(self, points):
        if self.is_discrete:
            y = self.y_grid.copy()
            w = self.eta(y)
            r = self.ratio(y)
            atom = np.zeros(y.size, dtype=bool)
            if self.atoms:
                y = np.concatenate([y, [a.location for a in self.atoms]])
                r = np.concatenate([r, [a.ratio for a in self.atoms]])
                w = np.concatenate([w, [a.eta for a in self.atoms]])
                atom = np.concatenate([atom, np.ones(len(self.atoms), bool)])
            keep = w > 0
            return QuadratureRule(y[keep], r[keep], w[keep], atom[keep])
        edges = np.unique(np.concatenate([self.y_grid, [p for p in points
                                                        if self.y_grid[0] < p < self.y_grid[-1]]]))
        a, b = edges[:-1, None], edges[1:, None]
        y = (0.5 * (b - a) * (_GL_X + 1.0) + a).ravel()
        w = (0.5 * (b - a) * _GL_W).ravel() * self.eta(y)
        r = np.asarray(self.ratio(y), dtype=float)
        atom = np.zeros(y.size, dtype=bool)
        if self.atoms:
            y = np.concatenate([y, [at.location for at in self.atoms]])
            r = np.concatenate([r, [at.ratio for at in self.atoms]])
            w = np.concatenate([w, [at.eta for at in self.atoms]])
            atom = np.concatenate([atom, np.ones(len(self.atoms), bool)])
        keep = w > 0
        return QuadratureRule(y[keep], r[keep], w[keep], atom[keep])

    @cached_property
    def _scan(self):
        if self.is_discrete:
            y = self.y_grid[self.eta_table > 0]
        else:
            y = np.linspace(self.y_grid[0], self.y_grid[-1], self._SCAN_POINTS)
            y = y[self.eta(y) > 0]
        return y, np.asarray(self.ratio(y), dtype=float)

    def ratio_range(self):
        _, r = self._scan
        return (float(r.min()), float(r.max()))

    def sample(self, s_mag, rng):
        if self._sampler is None:
            raise NotImplementedError("this custom channel was built without a sampler")
        return np.asarray(self._sampler(np.asarray(s_mag, dtype=float), rng), dtype=float)

    def describe(self):
        return {"kind": self.name, "support": self.support.kind, "mode": self.mode,
                "knots": int(self.y_grid.size)}


# -- factories ---------------------------------------------------------------

def poisson(kappa: float, mode: str = "complex") -> PoissonChannel:
    return PoissonChannel(kappa, mode)


def gaussian_noise(sigma: float, mode: str = "complex") -> GaussianNoiseChannel:
    return GaussianNoiseChannel(sigma, mode)


def noiseless(mode: str = "complex") -> GaussianNoiseChannel:
    return GaussianNoiseChannel(0.0, mode)


# -- operations ---------------------------------------------------------------

@dataclass(frozen=True)
class ChannelFunctions:
    eta: object
    mu: object
    atoms: tuple[Atom, ...]
    eta_mass: float
    mu_mass: float


def channel_functions(ch: Channel, tol: float = 1e-6) -> ChannelFunctions:
    """eta, mu and atoms of ``ch``, after checking both integrate to one."""
    e_mass = ch.expect(lambda y, r: np.ones_like(r))
    m_mass = ch.expect(lambda y, r: r)
    if abs(e_mass - 1) > tol or abs(m_mass - 1) > tol:
        raise NormalizationFailure(f"integral of eta = {e_mass!r}, of mu = {m_mass!r}")
    return ChannelFunctions(ch.eta, ch.mu, ch.atoms, e_mass, m_mass)


@dataclass(frozen=True)
class InfimumReport:
    """Infimum of mu/eta over the support, resolved by branch."""

    value: float
    continuum: float
    atoms: tuple[tuple[float, float], ...] = ()
    numerical: bool = False

    @property
    def positive(self) -> bool:
        return self.value > 0

    def __float__(self):
        return self.value


def mu_over_eta_infimum(ch: Channel) -> InfimumReport:
    cont, _ = ch.ratio_range()
    atoms = tuple((a.location, a.ratio) for a in ch.atoms if a.eta > 0)
    value = min([cont] + [r for _, r in atoms])
    return InfimumReport(value=value, continuum=cont, atoms=atoms,
                         numerical=isinstance(ch, CustomChannel))


def mu_over_eta_supremum(ch: Channel) -> float:
    _, cont = ch.ratio_range()
    return max([cont] + [a.ratio for a in ch.atoms if a.eta > 0])


def weak_threshold_integral(ch: Channel) -> float:
    """``∫ mu^2 / eta`` (atoms included); at most E|S|^4 for any channel."""
    return ch.expect(lambda y, r: np.square(r))


def alpha_weak(ch: Channel, tol: float = 1e-12) -> float:
    """Weak reconstruction threshold ``1 / ∫ (mu - eta)^2 / eta``.

    Returns ``inf`` for a channel whose measurements carry no information.
    """
    cached = getattr(ch, "_alpha_weak", None)
    if cached is not None:
        return cached
    excess = weak_threshold_integral(ch) - 1.0
    if excess < -tol:
        raise DegenerateChannel(f"∫mu²/eta - 1 = {excess} < 0: numerical failure")
    val = math.inf if excess <= tol else 1.0 / excess
    ch._alpha_weak = val
    return val


def sample_measurement(ch: Channel, s_mag, rng: np.random.Generator):
    return ch.sample(s_mag, rng)


# -- file format ----------------------------------------------------------------

def load_channel(path) -> CustomChannel:
    """Read a custom channel from JSON (schema in the README).

    Either ``eta``/``mu`` tables over ``y`` or a conditional density table
    ``p[i][j] = p(y_i | s_j)`` over grids ``y`` and ``s``.
    """
    spec = json.loads(Path(path).read_text())
    kind = spec.get("support", "continuous")
    mode = spec.get("mode", "complex")
    y = np.asarray(spec["y"], dtype=float)
    atoms = [Atom(float(a["location"]), float(a["eta"]), float(a["mu"])) for a in spec.get("atoms", [])]
    if "eta" in spec:
        return CustomChannel(y, spec["eta"], spec["mu"], kind=kind, mode=mode, atoms=atoms)
    s = np.asarray(spec["s"], dtype=float)
    p = np.asarray(spec["p"], dtype=float)
    if p.shape != (y.size, s.size):
        raise ValueError("p must have shape (len(y), len(s))")
    if mode == "complex":
        ws = 2.0 * s * np.exp(-s * s)
    else:
        ws = 2.0 * nm.normal_pdf(s)
    eta = _spi.simpson(p * ws, x=s, axis=1)
    mu = _spi.simpson(p * ws * s * s, x=s, axis=1)
    return CustomChannel(y, eta, mu, kind=kind, mode=mode, atoms=atoms)


def channel_from_spec(spec: dict) -> Channel:
    """Build a channel from a small dict such as ``{"kind": "poisson", "kappa": 5}``."""
    kind = spec.get("kind", "noiseless")
    mode = spec.get("mode", "complex")
    if kind == "poisson":
        return PoissonChannel(float(spec.get("kappa", 5.0)), mode)
    if kind in ("gaussian", "gaussian-noise"):
        return GaussianNoiseChannel(float(spec.get("sigma", 1.0)), mode)
    if kind == "noiseless":
        return GaussianNoiseChannel(0.0, mode)
    if kind == "custom":
        return load_channel(spec["file"])
    raise ValueError(f"unknown channel kind {kind!r}")
