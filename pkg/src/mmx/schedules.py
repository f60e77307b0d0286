"""Stepsize schedules for GDA and the slingshot family check.

A schedule is a finite sequence of pairs ``(alpha_t, beta_t)``: ``alpha_t``
multiplies the descent step in ``x``, ``beta_t`` the ascent step in ``y``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .chebyshev import bilinear_roots, lebedev_order, quadratic_roots

Ordering = Union[None, str, Sequence[int]]


@dataclass(frozen=True)
class StepPairSchedule:
    alphas: np.ndarray
    betas: np.ndarray
    kind: str
    params: dict = field(default_factory=dict)
    seed: Optional[int] = None

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=float).ravel()
        b = np.asarray(self.betas, dtype=float).ravel()
        if a.shape != b.shape:
            raise ValueError("alphas and betas must have equal length")
        object.__setattr__(self, "alphas", a)
        object.__setattr__(self, "betas", b)

    @property
    def horizon(self) -> int:
        return self.alphas.size

    def __len__(self):
        return self.horizon

    def __iter__(self):
        return iter(zip(self.alphas.tolist(), self.betas.tolist()))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "alpha", "beta"])
        for t, (a, b) in enumerate(self):
            w.writerow([t, repr(a), repr(b)])
        return buf.getvalue()

    def to_config(self) -> dict:
        cfg = {"kind": self.kind, **self.params}
        if self.seed is not None:
            cfg["seed"] = self.seed
        return cfg


# -- pair-indexed randomness ---------------------------------------------------
#
# Draw k of stream s under seed is a pure function of (seed, s, k): Philox is
# counter based, so any window of draws can be produced without replaying the
# preceding ones.


def _philox_key(seed: int, stream: int) -> np.ndarray:
    return np.random.SeedSequence([int(seed), int(stream)]).generate_state(2, np.uint64)


def pair_uniforms(seed: int, stream: int, start: int, count: int) -> np.ndarray:
    """Uniform(0, 1) draws with indices ``start .. start + count - 1``."""
    if count <= 0:
        return np.empty(0)
    bitgen = np.random.Philox(key=_philox_key(seed, stream))
    bitgen.advance(start // 4)
    skip = start % 4
    raw = bitgen.random_raw(skip + count)[skip:]
    # top 53 bits, offset by half an ulp so the draw is never exactly 0
    return ((raw >> np.uint64(11)).astype(float) + 0.5) * 2.0**-53


_STREAM_CC_BRANCH = 1
_STREAM_ARCSINE = 2


# -- orderings -----------------------------------------------------------------


def resolve_ordering(T: int, ordering: Ordering) -> np.ndarray:
    """Permutation of root indices ``0..T-1``.

    ``None`` selects the Lebedev order when T is a power of two and the
    canonical order otherwise. ``"ascending"`` / ``"descending"`` sort by
    stepsize magnitude (canonical roots decrease, so magnitudes increase).
    """
    if ordering is None:
        ordering = "lebedev" if T & (T - 1) == 0 else "canonical"
    if isinstance(ordering, str):
        if ordering == "canonical" or ordering == "ascending":
            return np.arange(T)
        if ordering == "descending":
            return np.arange(T)[::-1].copy()
        if ordering == "lebedev":
            return np.asarray(lebedev_order(T))
        raise ValueError(f"unknown ordering {ordering!r}")
    perm = np.asarray(ordering, dtype=int)
    if sorted(perm.tolist()) != list(range(T)):
        raise ValueError("custom ordering must be a permutation of 0..T-1")
    return perm


def _ordering_label(ordering: Ordering):
    if ordering is None or isinstance(ordering, str):
        return ordering
    return [int(i) for i in ordering]


def _paired(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``alpha_2t = -beta_2t = -alpha_2t+1 = beta_2t+1 = h_t``."""
    alphas = np.empty(2 * h.size)
    betas = np.empty(2 * h.size)
    alphas[0::2], alphas[1::2] = h, -h
    betas[0::2], betas[1::2] = -h, h
    return alphas, betas


# -- slingshot schedules -------------------------------------------------------


def slingshot_bilinear(T: int, m: float, M: float, ordering: Ordering = None) -> StepPairSchedule:
    """Chebyshev slingshot schedule for bilinear couplings with squared singular values in [m, M]."""
    if T < 1:
        raise ValueError("T must be >= 1")
    roots = bilinear_roots(T, m, M)
    perm = resolve_ordering(T, ordering)
    alphas, betas = _paired(roots[perm] ** -0.5)
    return StepPairSchedule(
        alphas, betas, "slingshot_bilinear", {"T": T, "m": m, "M": M, "ordering": _ordering_label(ordering)}
    )


def slingshot_quadratic(T: int, L: float, ordering: Ordering = None) -> StepPairSchedule:
    """``alpha_t = -beta_t = 1 / rho`` over the 2T nonzero roots of T_{2T+1} on [-L, L].

    Every pair uses a positive root ``rho`` followed by its partner ``-rho``.
    The order of the pairs defaults to Lebedev when T is a power of two and to
    largest stepsize first otherwise; canonical order (largest steps last)
    amplifies rounding error badly from T of about 30 on. A string ordering
    (``"lebedev"``, ``"canonical"``, ...) picks the pair order explicitly; a
    sequence of length 2T permutes the individual roots (indices into the
    positive-then-negative list ``rho_0, .., rho_{T-1}, -rho_0, .., -rho_{T-1}``).
    """
    rho = quadratic_roots(T, L)
    pos = rho[:T]
    # rho_{2T-t} == -rho_t in exact arithmetic; negate so pair sums vanish exactly
    neg = -pos
    if ordering is not None and not isinstance(ordering, str) and len(ordering) == 2 * T:
        perm = np.asarray(ordering, dtype=int)
        if sorted(perm.tolist()) != list(range(2 * T)):
            raise ValueError("custom root ordering must be a permutation of 0..2T-1")
        inv = np.concatenate([pos, neg])[perm]
    else:
        if ordering is None:
            ordering_ = "lebedev" if T & (T - 1) == 0 else "descending"
        else:
            ordering_ = ordering
        pair_perm = resolve_ordering(T, ordering_)
        inv = np.empty(2 * T)
        inv[0::2], inv[1::2] = pos[pair_perm], neg[pair_perm]
    h = 1.0 / inv
    return StepPairSchedule(h, -h, "slingshot_quadratic", {"T": T, "L": L, "ordering": _ordering_label(ordering)})


def cc_branches(T: int, seed: int, start: int = 0) -> np.ndarray:
    """Per-pair coin flips (True = first branch) for :func:`slingshot_cc`."""
    return pair_uniforms(seed, _STREAM_CC_BRANCH, start, T) < 0.5


def slingshot_cc(T: int, h: float, seed: int) -> StepPairSchedule:
    """Randomized convex-concave schedule.

    Each pair is independently ``(h, -h, 0, h)`` or ``(-h, h, h, 0)`` for
    ``(alpha_2t, beta_2t, alpha_2t+1, beta_2t+1)`` with probability 1/2.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if h <= 0:
        raise ValueError("h must be positive")
    first = cc_branches(T, seed)
    alphas = np.empty(2 * T)
    betas = np.empty(2 * T)
    alphas[0::2] = np.where(first, h, -h)
    betas[0::2] = np.where(first, -h, h)
    alphas[1::2] = np.where(first, 0.0, h)
    betas[1::2] = np.where(first, h, 0.0)
    return StepPairSchedule(alphas, betas, "slingshot_cc", {"T": T, "h": h}, seed=seed)


def arcsine_roots(T: int, m: float, M: float, seed: int, start: int = 0) -> np.ndarray:
    """I.i.d. Arcsine(m, M) draws via ``(M+m)/2 + (M-m)/2 cos(pi U)``."""
    u = pair_uniforms(seed, _STREAM_ARCSINE, start, T)
    return (M + m) / 2.0 + (M - m) / 2.0 * np.cos(np.pi * u)


def arcsine_random(T: int, m: float, M: float, seed: int) -> StepPairSchedule:
    """Slingshot pairs with Arcsine-distributed inverse squared magnitudes."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if not 0 < m < M:
        raise ValueError("need 0 < m < M")
    alphas, betas = _paired(arcsine_roots(T, m, M, seed) ** -0.5)
    return StepPairSchedule(alphas, betas, "arcsine_random", {"T": T, "m": m, "M": M}, seed=seed)


# -- classical schedules -------------------------------------------------------


def constant(alpha: float, beta: float, T: int) -> StepPairSchedule:
    return StepPairSchedule(np.full(T, float(alpha)), np.full(T, float(beta)), "constant", {"alpha": alpha, "beta": beta, "T": T})


def alternating(alpha: float, T: int, beta: Optional[float] = None) -> StepPairSchedule:
    """``(alpha, 0)`` on even iterations, ``(0, beta)`` on odd ones."""
    beta = alpha if beta is None else beta
    t = np.arange(T)
    alphas = np.where(t % 2 == 0, float(alpha), 0.0)
    betas = np.where(t % 2 == 1, float(beta), 0.0)
    return StepPairSchedule(alphas, betas, "alternating", {"alpha": alpha, "beta": beta, "T": T})


def two_timescale(alpha: float, beta: float, T: int) -> StepPairSchedule:
    if alpha == beta:
        raise ValueError("two-timescale GDA needs alpha != beta")
    s = constant(alpha, beta, T)
    return StepPairSchedule(s.alphas, s.betas, "two-timescale", s.params)


def classical(kind: str, T: int, **params) -> StepPairSchedule:
    """Dispatch on ``constant`` / ``alternating`` / ``two-timescale``."""
    if kind == "constant":
        return constant(params["alpha"], params.get("beta", params["alpha"]), T)
    if kind == "alternating":
        return alternating(params["alpha"], T, params.get("beta"))
    if kind in ("two-timescale", "two_timescale"):
        return two_timescale(params["alpha"], params["beta"], T)
    raise ValueError(f"unknown classical schedule {kind!r}")


def from_config(cfg: dict) -> StepPairSchedule:
    """Inverse of :meth:`StepPairSchedule.to_config`."""
    cfg = dict(cfg)
    kind = cfg.pop("kind")
    if kind == "slingshot_bilinear":
        return slingshot_bilinear(cfg["T"], cfg["m"], cfg["M"], cfg.get("ordering"))
    if kind == "slingshot_quadratic":
        return slingshot_quadratic(cfg["T"], cfg["L"], cfg.get("ordering"))
    if kind == "slingshot_cc":
        return slingshot_cc(cfg["T"], cfg["h"], cfg["seed"])
    if kind == "arcsine_random":
        return arcsine_random(cfg["T"], cfg["m"], cfg["M"], cfg["seed"])
    T = cfg.pop("T")
    return classical(kind, T, **cfg)


# -- family check --------------------------------------------------------------


@dataclass(frozen=True)
class SlingshotFamilyCheck:
    negative: np.ndarray
    alternating_products: np.ndarray
    consecutive_sums: np.ndarray

    @property
    def passed(self) -> bool:
        return bool(self.negative.all() and self.alternating_products.all() and self.consecutive_sums.all())

    def __bool__(self):
        return self.passed


def validate_slingshot_family(schedule: StepPairSchedule) -> SlingshotFamilyCheck:
    """Evaluate the three pairwise slingshot properties on every pair.

    (i) some stepsize of the pair is negative; (ii) ``alpha_2t beta_2t+1`` and
    ``alpha_2t+1 beta_2t`` are non-negative; (iii) ``alpha_2t + alpha_2t+1``
    and ``beta_2t + beta_2t+1`` are non-negative.
    """
    if schedule.horizon % 2:
        raise ValueError("slingshot family check needs an even horizon")
    a0, a1 = schedule.alphas[0::2], schedule.alphas[1::2]
    b0, b1 = schedule.betas[0::2], schedule.betas[1::2]
    negative = (a0 < 0) | (a1 < 0) | (b0 < 0) | (b1 < 0)
    products = (a0 * b1 >= 0) & (a1 * b0 >= 0)
    sums = (a0 + a1 >= 0) & (b0 + b1 >= 0)
    return SlingshotFamilyCheck(negative, products, sums)
