"""Chebyshev polynomial utilities for the linear-gradient stepsize schedules."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def cheb_eval(n: int, x):
    """T_n(x) by the three-term recurrence. Vectorized over ``x``."""
    if n < 0:
        raise ValueError("degree must be non-negative")
    x = np.asarray(x, dtype=float)
    t_prev, t_cur = np.ones_like(x), x.copy()
    if n == 0:
        return t_prev if t_prev.ndim else float(t_prev)
    for _ in range(n - 1):
        t_prev, t_cur = t_cur, 2.0 * x * t_cur - t_prev
    return t_cur if t_cur.ndim else float(t_cur)


def to_unit_interval(lam, a: float, b: float):
    """Affine map sending [a, b] onto [-1, 1]."""
    return (2.0 * np.asarray(lam, dtype=float) - a - b) / (b - a)


def cheb_eval_shifted(n: int, lam, a: float, b: float):
    return cheb_eval(n, to_unit_interval(lam, a, b))


def cheb_roots_shifted(T: int, a: float, b: float) -> np.ndarray:
    """Roots of T_T shifted to [a, b], strictly decreasing in the index."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if not a < b:
        raise ValueError("need a < b")
    t = np.arange(T)
    return (a + b) / 2.0 + (b - a) / 2.0 * np.cos((2 * t + 1) * np.pi / (2 * T))


def bilinear_roots(T: int, m: float, M: float) -> np.ndarray:
    """Inverse squared stepsize magnitudes for the bilinear schedule.

    Same as :func:`cheb_roots_shifted` but also accepts the degenerate
    interval ``m == M`` (every root equals ``m``).
    """
    if not 0 < m <= M:
        raise ValueError(f"need 0 < m <= M, got m={m}, M={M}")
    if m == M:
        return np.full(T, float(m))
    return cheb_roots_shifted(T, m, M)


def quadratic_roots(T: int, L: float) -> np.ndarray:
    """The 2T nonzero roots of T_{2T+1} on [-L, L], indexed by t in {0..2T} minus {T}."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if L <= 0:
        raise ValueError("L must be positive")
    t = np.array([k for k in range(2 * T + 1) if k != T])
    return L * np.cos((2 * t + 1) * np.pi / (4 * T + 2))


def extremal_rate_bilinear(T: int, m: float, M: float, check: bool = True) -> float:
    """Optimal T-pair contraction ``R_T = 1 / T_T^{[m, M]}(0)``.

    Computed from the ratio form with ``q = (sqrt(k) - 1) / (sqrt(k) + 1)`` in
    the log domain, ``R_T = 2 q^T / (1 + q^{2T})``, which cannot overflow. When
    ``check`` is set and T <= 64, the value is cross-checked against the
    reciprocal of the recurrence value at zero.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if not m > 0:
        raise ValueError("m must be positive")
    if M < m:
        raise ValueError("need m <= M")
    if M == m:
        return 0.0
    sk = math.sqrt(M / m)
    log_q = math.log(sk - 1.0) - math.log(sk + 1.0)
    qT = math.exp(T * log_q)
    rate = 2.0 * qT / (1.0 + qT * qT)
    if check and T <= 64:
        direct = 1.0 / abs(cheb_eval(T, to_unit_interval(0.0, m, M)))
        if abs(direct - rate) > 1e-11 * rate:
            raise ArithmeticError(f"R_T forms disagree: {rate!r} vs {direct!r}")
    return rate


def extremal_rate_quadratic(T: int, L: float) -> float:
    """``L / (2T + 1)``, the optimal worst-case gradient-norm factor."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if L <= 0:
        raise ValueError("L must be positive")
    return L / (2 * T + 1)


@dataclass(frozen=True)
class InducedPolynomial:
    """``p(lam) = prod_t (1 - lam / r_t)`` over the inverse roots ``r_t``."""

    roots: tuple

    def __init__(self, roots: Sequence[float] = ()):
        object.__setattr__(self, "roots", tuple(float(r) for r in roots))

    @property
    def degree(self) -> int:
        return len(self.roots)

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        out = np.ones_like(lam)
        for r in self.roots:
            out = out * (1.0 - lam / r)
        return out if out.ndim else float(out)

    def log_abs(self, lam):
        """``log |p(lam)|``, safe for high degree."""
        lam = np.asarray(lam, dtype=float)
        out = np.zeros_like(lam)
        for r in self.roots:
            with np.errstate(divide="ignore"):
                out = out + np.log(np.abs(1.0 - lam / r))
        return out if out.ndim else float(out)


def _golden_max(fn, lo: float, hi: float, iters: int = 80) -> tuple[float, float]:
    c = hi - _GOLDEN * (hi - lo)
    d = lo + _GOLDEN * (hi - lo)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - _GOLDEN * (hi - lo)
            fc = fn(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _GOLDEN * (hi - lo)
            fd = fn(d)
        if hi - lo <= 1e-15 * max(1.0, abs(lo), abs(hi)):
            break
    return (c, fc) if fc >= fd else (d, fd)


def _argmax_on_grid(score, a: float, b: float, grid: int, refine: bool) -> tuple[float, float]:
    if grid < 2:
        raise ValueError("grid must have at least 2 points")
    lam = np.linspace(a, b, grid)
    vals = score(lam)
    i = int(np.argmax(vals))
    best_lam, best_val = float(lam[i]), float(vals[i])
    if refine:
        lo, hi = lam[max(i - 1, 0)], lam[min(i + 1, grid - 1)]
        r_lam, r_val = _golden_max(lambda t: float(score(np.array([t]))[0]), float(lo), float(hi))
        if r_val > best_val:
            best_lam, best_val = r_lam, r_val
    return best_lam, best_val


def induced_polynomial_max(p: InducedPolynomial, a: float, b: float, grid: int = 100_000, refine: bool = True):
    """Maximize ``|p|`` on [a, b]: uniform grid (endpoints included) plus a golden-section pass.

    Returns ``(lam_star, max_value)``.
    """
    return _argmax_on_grid(lambda lam: np.abs(p(lam)), a, b, grid, refine)


def induced_polynomial_logmax(p: InducedPolynomial, a: float, b: float, grid: int = 4096, refine: bool = True):
    """Like :func:`induced_polynomial_max` but returns ``(lam_star, log max |p|)``; for high degree."""
    return _argmax_on_grid(p.log_abs, a, b, grid, refine)


def weighted_polynomial_max(p: InducedPolynomial, a: float, b: float, grid: int = 100_000, refine: bool = True):
    """Maximize ``|lam p(lam)|`` on [a, b]; the quadratic-schedule objective."""
    return _argmax_on_grid(lambda lam: np.abs(lam * p(lam)), a, b, grid, refine)


def lebedev_order(T: int) -> list[int]:
    """Stable fractal ordering: ``s^1 = [0]``, ``s^{2T} = interlace(s^T, 2T - 1 - s^T)``."""
    if T < 1 or T & (T - 1):
        raise ValueError(f"lebedev order needs a power of two, got T={T}")
    s = [0]
    while len(s) < T:
        n = 2 * len(s)
        s = [v for pair in zip(s, (n - 1 - a for a in s)) for v in pair]
    return s
