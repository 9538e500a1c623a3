"""Preprocessing functions ``T(y)`` applied to measurements before forming D.

Every preprocessor evaluates on pairs ``(y, r)`` where ``r`` is the channel
ratio mu/eta at ``y`` (see :mod:`optspec.channels`).  Catalog members that
depend only on ``y`` ignore ``r``; the channel-derived ones (optimal,
mm, epsilon-truncated) are functions of ``r`` alone, which
is what lets point masses of the measurement law take their own value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channels import Channel, alpha_weak, mu_over_eta_infimum, mu_over_eta_supremum

__all__ = [
    "Preprocessor",
    "Trim",
    "Subset",
    "Constant",
    "OptimalStar",
    "MM",
    "Epsilon",
    "Tabulated",
    "Scaled",
    "evaluate",
    "bounds",
    "is_feasible",
    "load_tabulated",
    "c_star_of_ratio",
]


def c_star_of_ratio(r, beta: float):
    """``(r - 1) / (1 + r / beta)``: the minimum-norm c-function as a function of mu/eta.

    Increasing in ``r``; ``-1`` at ``r = 0`` and ``beta`` as ``r -> inf``.
    """
    r = np.asarray(r, dtype=float)
    with np.errstate(invalid="ignore", over="ignore"):
        out = np.where(np.isinf(r), beta, (r - 1.0) / (1.0 + r / beta))
    return out[()] if out.ndim == 0 else out


class Preprocessor:
    """Base class.  ``values(y, r)`` is the workhorse; ``__call__`` looks ``r`` up."""

    kind = "base"

    def values(self, y, r):
        raise NotImplementedError

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        ch = getattr(self, "channel", None)
        r = ch.ratio_at(y) if ch is not None else np.ones_like(y)
        out = np.asarray(self.values(y, r), dtype=float)
        return out[()] if out.ndim == 0 else out

    def bounds(self, ch: Channel) -> tuple[float, float]:
        """``(sup T, inf T)`` over the support of the measurement law."""
        raise NotImplementedError

    def breakpoints(self, ch: Channel) -> tuple[float, ...]:
        """Measurement values where ``T`` jumps or kinks (for quadrature)."""
        return ()

    def is_feasible(self, ch: Channel) -> bool:
        tau, t_min = self.bounds(ch)
        return bool(0 < tau < math.inf and t_min > -math.inf)

    def scaled(self, factor: float) -> "Scaled":
        return Scaled(self, factor)

    def label(self) -> str:
        return self.kind


def _support_sup(ch: Channel) -> float:
    if hasattr(ch, "y_grid"):
        return float(ch.y_grid[-1])
    return math.inf


@dataclass(frozen=True, eq=False)
class Trim(Preprocessor):
    """``T(y) = y`` for ``|y| <= a`` and 0 otherwise."""

    a: float
    kind = "trim"

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("trim level must be positive")

    def values(self, y, r):
        y = np.asarray(y, dtype=float)
        return np.where(np.abs(y) <= self.a, y, 0.0)

    def bounds(self, ch):
        top = min(self.a, _support_sup(ch))
        if ch.is_discrete:
            top = math.floor(top)
        return (float(top), 0.0)

    def breakpoints(self, ch):
        return () if ch.is_discrete else (self.a,)

    def label(self):
        return f"trim(a={self.a:g})"


@dataclass(frozen=True, eq=False)
class Subset(Preprocessor):
    """``T(y) = 1{|y| >= b}``."""

    b: float
    kind = "subset"

    def __post_init__(self):
        if not self.b >= 0:
            raise ValueError("subset level must be nonnegative")

    def values(self, y, r):
        return (np.abs(np.asarray(y, dtype=float)) >= self.b).astype(float)

    def bounds(self, ch):
        if self.b > _support_sup(ch):
            return (0.0, 0.0)
        return (1.0, 0.0 if self.b > 0 else 1.0)

    def breakpoints(self, ch):
        return () if ch.is_discrete or self.b == 0 else (self.b,)

    def label(self):
        return f"subset(b={self.b:g})"


@dataclass(frozen=True, eq=False)
class Constant(Preprocessor):
    value: float
    kind = "constant"

    def values(self, y, r):
        return np.full(np.shape(y), float(self.value))

    def bounds(self, ch):
        return (float(self.value), float(self.value))

    def label(self):
        return f"constant({self.value:g})"


@dataclass(frozen=True, eq=False)
class OptimalStar(Preprocessor):
    """``T(y) = 1 - eta(y) / mu(y)``; optimal whenever it is bounded below."""

    channel: Channel
    kind = "optimal"

    def values(self, y, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            return 1.0 - 1.0 / r

    def bounds(self, ch):
        lo = mu_over_eta_infimum(ch).value
        hi = mu_over_eta_supremum(ch)
        tau = 1.0 - 1.0 / hi if hi > 0 else -math.inf
        t_min = 1.0 - 1.0 / lo if lo > 0 else -math.inf
        return (tau, t_min)


@dataclass(frozen=True, eq=False)
class MM(Preprocessor):
    """Threshold-adapted preprocessing: a Moebius image of ``OptimalStar``.

    ``T = sqrt(aw) x / (sqrt(a) - (sqrt(a) - sqrt(aw)) x)`` with ``x = 1 - eta/mu``;
    defined for sampling ratios above the weak threshold ``aw``.
    """

    alpha: float
    channel: Channel
    kind = "mm"
    alpha_weak: float = field(init=False)

    def __post_init__(self):
        aw = alpha_weak(self.channel)
        if not self.alpha > aw:
            raise ValueError(f"MM preprocessing needs alpha > alpha_weak = {aw}")
        object.__setattr__(self, "alpha_weak", aw)

    def _map(self, x):
        sa, sw = math.sqrt(self.alpha), math.sqrt(self.alpha_weak)
        x = np.asarray(x, dtype=float)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(np.isneginf(x), -sw / (sa - sw), sw * x / (sa - (sa - sw) * x))
        return out

    def values(self, y, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            x = 1.0 - 1.0 / r
        return self._map(x)

    def bounds(self, ch):
        tau, t_min = OptimalStar(self.channel).bounds(ch)
        return (float(self._map(tau)), float(self._map(t_min)))

    def label(self):
        return f"mm(alpha={self.alpha:g})"


@dataclass(frozen=True, eq=False)
class Epsilon(Preprocessor):
    """Truncated family ``T = c / (1 + c)`` with ``c = max(v c*, -1 + eps)``.

    ``c*`` is the minimum-norm c-function at ``beta``; ``v`` is fixed by
    the linear constraint (see :func:`optspec.design.epsilon_preprocessor`).
    """

    eps: float
    alpha: float
    channel: Channel
    v: float
    beta: float
    kind = "epsilon"

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")

    def c_values(self, r):
        return np.maximum(self.v * c_star_of_ratio(r, self.beta), -1.0 + self.eps)

    def values(self, y, r):
        c = self.c_values(r)
        return c / (1.0 + c)

    def seam_ratio(self) -> float:
        """Ratio at which the floor ``-1 + eps`` starts to bind."""
        v, e, b = self.v, self.eps, self.beta
        return (v - 1.0 + e) / (v + (1.0 - e) / b)

    def bounds(self, ch):
        lo = mu_over_eta_infimum(ch).value
        hi = mu_over_eta_supremum(ch)
        c_hi = float(self.c_values(hi))
        c_lo = float(self.c_values(lo))
        return (c_hi / (1 + c_hi), c_lo / (1 + c_lo))

    def breakpoints(self, ch):
        if ch.is_discrete:
            return ()
        y = ch.ratio_inverse(self.seam_ratio())
        return () if y is None else (y,)

    def label(self):
        return f"epsilon(eps={self.eps:g})"


@dataclass(frozen=True, eq=False)
class Tabulated(Preprocessor):
    """Linear interpolation of knots; constant at the end values beyond them."""

    grid: tuple
    table: tuple
    kind = "tabulated"

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        if g.ndim != 1 or g.size != len(self.table) or g.size < 1:
            raise ValueError("grid and values must be 1-d and of equal length")
        if np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing")
        object.__setattr__(self, "grid", tuple(map(float, self.grid)))
        object.__setattr__(self, "table", tuple(map(float, self.table)))

    def values(self, y, r):
        return np.interp(np.asarray(y, dtype=float), self.grid, self.table)

    def bounds(self, ch):
        # linear interpolation never leaves the range of the knot values
        return (max(self.table), min(self.table))

    def breakpoints(self, ch):
        return () if ch.is_discrete else self.grid

    def label(self):
        return f"tabulated({len(self.grid)} knots)"


@dataclass(frozen=True, eq=False)
class Scaled(Preprocessor):
    base: Preprocessor
    factor: float
    kind = "scaled"

    def __post_init__(self):
        if not self.factor > 0:
            raise ValueError("scale factor must be positive")

    @property
    def channel(self):
        return self.base.channel

    def values(self, y, r):
        return self.factor * np.asarray(self.base.values(y, r), dtype=float)

    def bounds(self, ch):
        tau, t_min = self.base.bounds(ch)
        return (self.factor * tau, self.factor * t_min)

    def breakpoints(self, ch):
        return self.base.breakpoints(ch)

    def label(self):
        return f"{self.factor:g}*{self.base.label()}"


def evaluate(T: Preprocessor, y):
    return T(y)


def bounds(T: Preprocessor, ch: Channel) -> tuple[float, float]:
    return T.bounds(ch)


def is_feasible(T: Preprocessor, ch: Channel) -> bool:
    return T.is_feasible(ch)


def load_tabulated(path) -> Tabulated:
    """Two whitespace- or comma-separated columns ``y T(y)``; ``#`` starts a comment."""
    data = np.loadtxt(path, comments="#", delimiter=None, ndmin=2,
                      converters=None) if not _has_commas(path) else \
        np.loadtxt(path, comments="#", delimiter=",", ndmin=2)
    if data.shape[1] != 2:
        raise ValueError("tabulated preprocessor files need exactly two columns")
    order = np.argsort(data[:, 0])
    return Tabulated(tuple(data[order, 0]), tuple(data[order, 1]))


def _has_commas(path) -> bool:
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                return "," in line
    return False
