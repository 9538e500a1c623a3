"""Finite-size simulation of spectral initialization.

An instance draws ``m`` Gaussian sensing rows ``a_i``, a unit signal ``xi``
and measurements ``y_i ~ p(y | |<a_i, xi>|)``.  The data matrix
``D = (1/m) sum_i T(y_i) a_i a_i^*`` is applied implicitly by
:func:`matvec_D`; :func:`leading_eigenvector` runs shifted power iteration
on ``D + s I`` (``T`` may be negative, so ``D`` can be indefinite).
"""

from __future__ import annotations

import io
import math
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import numerics as nm
from .asymptotics import Prediction, solve_lambda_star
from .channels import Channel
from .preprocess import Preprocessor

__all__ = [
    "Instance",
    "TrialResult",
    "SweepRow",
    "NoConvergence",
    "ZeroVector",
    "generate_instance",
    "matvec_D",
    "data_matrix",
    "power_iteration",
    "leading_eigenvector",
    "squared_cosine",
    "run_trial",
    "run_sweep",
    "save_instance",
    "load_instance",
]

#: sweeps give each alpha its own block of rng streams
STREAMS_PER_ALPHA = 1 << 20
#: largest n for which D is formed explicitly
DENSE_MAX_N = 4096
MAX_ESCALATIONS = 3
SAFETY_ITERS = 50


class NoConvergence(nm.NumericalError):
    """Power iteration ran out of steps; the last iterate is kept for reporting."""

    def __init__(self, msg, x=None, eigenvalue=math.nan, iterations=0, shift=math.nan):
        super().__init__(msg)
        self.x = x
        self.eigenvalue = eigenvalue
        self.iterations = iterations
        self.shift = shift


class ZeroVector(ValueError):
    pass


@dataclass
class Instance:
    n: int
    m: int
    mode: str
    signal: np.ndarray
    rows: np.ndarray
    y: np.ndarray
    seed: int = 0
    stream: int = 0

    @property
    def alpha(self) -> float:
        return self.m / self.n


def generate_instance(ch: Channel, n: int, m: int, rng, signal: str = "first-basis",
                      stream: int = 0) -> Instance:
    """Draw one instance.  ``rng`` is a Generator or an integer seed."""
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    seed = -1
    if not isinstance(rng, np.random.Generator):
        seed = int(rng)
        rng = nm.make_rng(seed, stream)
    cplx = ch.mode == "complex"
    draw = nm.standard_complex_gaussian if cplx else nm.standard_real_gaussian
    if signal == "first-basis":
        xi = np.zeros(n, dtype=complex if cplx else float)
        xi[0] = 1.0
    elif signal == "random-unit":
        xi = draw(rng, n)
        xi = xi / np.linalg.norm(xi)
    else:
        raise ValueError(f"unknown signal choice {signal!r}")
    rows = draw(rng, (m, n))
    s = rows.conj() @ xi
    y = np.asarray(ch.sample(np.abs(s), rng), dtype=float)
    return Instance(n=n, m=m, mode=ch.mode, signal=xi, rows=rows, y=y, seed=seed, stream=stream)


def _weights(inst: Instance, T) -> np.ndarray:
    t = T(inst.y) if callable(T) else T
    return np.asarray(t, dtype=float)


def matvec_D(inst: Instance, T, x):
    """``(1/m) sum_i T(y_i) a_i (a_i^* x)`` without forming D.

    ``T`` is a preprocessor or the precomputed vector ``T(y)``.
    """
    t = _weights(inst, T)
    return inst.rows.T @ (t * (inst.rows.conj() @ x)) / inst.m


def data_matrix(inst: Instance, T) -> np.ndarray:
    t = _weights(inst, T)
    D = (inst.rows.T * t) @ inst.rows.conj() / inst.m
    # exact Hermitian symmetry regardless of BLAS summation order
    return 0.5 * (D + D.conj().T)


def power_iteration(matvec: Callable, x0, shift: float = 0.0, tol: float = 1e-8,
                    max_iters: int = 10_000):
    """Power iteration on ``B = A + shift I`` given ``matvec`` for A.

    Stops when the Rayleigh quotient changes by less than ``tol`` relatively
    and ``||Bx - theta x|| < tol * theta``.  Returns ``(x, theta, iterations,
    converged)``; theta is for B.
    """
    x = np.asarray(x0)
    x = x / np.linalg.norm(x)
    theta_old = math.nan
    theta = math.nan
    for it in range(1, max_iters + 1):
        bx = matvec(x) + shift * x
        theta = float(np.vdot(x, bx).real)
        res = float(np.linalg.norm(bx - theta * x))
        if abs(theta - theta_old) < tol * abs(theta) and res < tol * abs(theta):
            return x, theta, it, True
        theta_old = theta
        nb = np.linalg.norm(bx)
        if nb == 0:
            return x, 0.0, it, True
        x = bx / nb
    return x, theta, max_iters, False


def leading_eigenvector(inst: Instance, T, tol: float = 1e-8, max_iters: int = 10_000,
                        rng: np.random.Generator | None = None, dense: bool | None = None,
                        shift: float | None = None):
    """Top (largest signed) eigenpair of D: ``(x, lambda_1, iterations, shift)``.

    The default shift ``2 max|T(y_i)| (1 + 1/sqrt(alpha))^2`` bounds the
    bulk edge of D; it doubles (at most three times) if a short power run on
    ``c I - B`` shows ``B = D + shift I`` is still indefinite.
    """
    t = _weights(inst, T)
    if dense is None:
        dense = inst.n <= DENSE_MAX_N
    if dense:
        D = data_matrix(inst, t)
        mv = lambda v: D @ v
    else:
        mv = lambda v: matvec_D(inst, t, v)
    if shift is None:
        top = float(np.max(np.abs(t))) if t.size else 0.0
        shift = 2.0 * top * (1.0 + 1.0 / math.sqrt(inst.alpha)) ** 2 or 1.0
    if rng is None:
        rng = nm.make_rng(0)
    cplx = np.iscomplexobj(inst.rows)
    draw = nm.standard_complex_gaussian if cplx else nm.standard_real_gaussian
    x0 = draw(rng, inst.n)
    total = 0
    for _ in range(MAX_ESCALATIONS + 1):
        x, theta, its, ok = power_iteration(mv, x0, shift, tol, max_iters)
        total += its
        if not ok:
            raise NoConvergence(f"power iteration did not converge in {max_iters} steps "
                                f"(shift {shift:g})", x, theta - shift, total, shift)
        if theta > 0:
            # estimate lambda_min(B) from the top of c I - B
            c = theta + shift + 1.0
            _, top_c, _, _ = power_iteration(lambda v: c * v - mv(v) - shift * v,
                                             draw(rng, inst.n), 0.0, 0.0, SAFETY_ITERS)
            total += SAFETY_ITERS
            if c - top_c >= 0:
                return x, theta - shift, total, shift
        # theta <= 0 means the iteration locked onto the negative end of B
        shift *= 2.0
        x0 = x
    raise NoConvergence("shift escalation exhausted with B still indefinite",
                        x, theta - shift / 2.0, total, shift / 2.0)


def squared_cosine(x, xi) -> float:
    """``|<xi, x>|^2 / (|xi|^2 |x|^2)``, invariant to unit-modulus rescaling."""
    nx, nxi = np.linalg.norm(x), np.linalg.norm(xi)
    if nx == 0 or nxi == 0:
        raise ZeroVector("squared cosine needs nonzero vectors")
    c = abs(np.vdot(xi, x)) ** 2 / (nx * nx * nxi * nxi)
    return float(min(max(c, 0.0), 1.0))


@dataclass
class TrialResult:
    alpha: float
    cos2: float
    eigenvalue: float
    iterations: int
    shift: float
    seed: int
    stream: int
    wall_time: float
    error: str | None = None


@dataclass
class SweepRow:
    alpha: float
    preprocessor: str
    n: int
    m: int
    cos2_mean: float
    cos2_std: float
    trials: int
    failures: int
    prediction: Prediction | None
    results: list = field(default_factory=list)


def _resolve(T_or_factory, alpha):
    if isinstance(T_or_factory, Preprocessor):
        return T_or_factory
    return T_or_factory(alpha)


def run_trial(ch: Channel, T: Preprocessor, n: int, m: int, seed: int, stream: int,
              signal: str = "first-basis", tol: float = 1e-8, max_iters: int = 10_000) -> TrialResult:
    t0 = time.perf_counter()
    rng = nm.make_rng(seed, stream)
    inst = generate_instance(ch, n, m, rng, signal=signal)
    inst.seed, inst.stream = seed, stream
    try:
        x, lam, its, shift = leading_eigenvector(inst, T, tol, max_iters, rng=rng)
    except NoConvergence as exc:
        cos2 = squared_cosine(exc.x, inst.signal) if exc.x is not None else math.nan
        return TrialResult(m / n, cos2, exc.eigenvalue, exc.iterations, exc.shift, seed, stream,
                           time.perf_counter() - t0, error=str(exc))
    return TrialResult(m / n, squared_cosine(x, inst.signal), lam, its, shift, seed, stream,
                       time.perf_counter() - t0)


def run_sweep(ch: Channel, T_or_factory, n: int, alphas, trials: int, base_seed: int = 0,
              workers: int = 1, signal: str = "first-basis", tol: float = 1e-8,
              max_iters: int = 10_000, predict: bool = True,
              stream_offset: int = 0) -> list[SweepRow]:
    """Trials per alpha with ``m = round(alpha n)``, aggregated in trial order.

    ``T_or_factory`` is a preprocessor or a callable ``alpha -> preprocessor``
    (for alpha-dependent designs).  Trial ``k`` at the ``j``-th alpha uses
    rng stream ``(stream_offset + j) * 2**20 + k`` of ``base_seed``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rows = []
    for j, alpha in enumerate(alphas):
        T = _resolve(T_or_factory, alpha)
        m = max(1, round(alpha * n))
        streams = [(stream_offset + j) * STREAMS_PER_ALPHA + k for k in range(trials)]
        job = lambda s: run_trial(ch, T, n, m, base_seed, s, signal, tol, max_iters)
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(job, streams))
        else:
            results = [job(s) for s in streams]
        # unconverged trials contribute their last iterate and are counted as failures
        vals = np.array([r.cos2 for r in results if math.isfinite(r.cos2)])
        mean = float(vals.mean()) if vals.size else math.nan
        std = float(vals.std(ddof=1)) if vals.size > 1 else math.nan
        failed = sum(r.error is not None for r in results)
        pred = solve_lambda_star(ch, T, alpha) if predict else None
        rows.append(SweepRow(alpha=alpha, preprocessor=T.label(), n=n, m=m, cos2_mean=mean,
                             cos2_std=std, trials=int(vals.size),
                             failures=failed, prediction=pred,
                             results=results))
    return rows


# -- binary dump ------------------------------------------------------------------
#
# little-endian; 40-byte header
#   0  4s  magic b"SPIN"
#   4  u32 format version (1)
#   8  u64 n
#  16  u64 m
#  24  u32 mode (0 complex, 1 real)
#  28  u32 reserved (0)
#  32  i64 seed
# then rows (m x n, row-major; complex entries as interleaved re, im doubles,
# real entries as plain doubles), y (m doubles), signal (n entries, same
# convention as the rows).

_HEADER = struct.Struct("<4sIQQIIq")
_MAGIC = b"SPIN"
_VERSION = 1


def save_instance(inst: Instance, path) -> None:
    cplx = inst.mode == "complex"
    dt = "<c16" if cplx else "<f8"
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, inst.n, inst.m, 0 if cplx else 1, 0, inst.seed))
        fh.write(np.ascontiguousarray(inst.rows, dtype=dt).tobytes())
        fh.write(np.ascontiguousarray(inst.y, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(inst.signal, dtype=dt).tobytes())


def load_instance(path) -> Instance:
    data = Path(path).read_bytes()
    magic, version, n, m, mode, _, seed = _HEADER.unpack_from(data, 0)
    if magic != _MAGIC or version != _VERSION:
        raise ValueError(f"{path}: not an instance dump (magic {magic!r}, version {version})")
    cplx = mode == 0
    dt = np.dtype("<c16" if cplx else "<f8")
    buf = io.BytesIO(data[_HEADER.size:])
    rows = np.frombuffer(buf.read(m * n * dt.itemsize), dtype=dt).reshape(m, n).copy()
    y = np.frombuffer(buf.read(m * 8), dtype="<f8").copy()
    xi = np.frombuffer(buf.read(n * dt.itemsize), dtype=dt).copy()
    if xi.size != n or y.size != m:
        raise ValueError(f"{path}: truncated instance dump")
    return Instance(n=n, m=m, mode="complex" if cplx else "real", signal=xi, rows=rows, y=y,
                    seed=seed, stream=-1)
