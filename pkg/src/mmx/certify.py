"""Numerical checks of the two-step certificate, the second-order expansion,
the divergence witnesses, the Hamiltonian equivalence and lower-bound tightness.

Each check is a pure function. Tolerances are relative to a per-check scale
``1 + (magnitudes involved)`` rather than absolute.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .chebyshev import InducedPolynomial, bilinear_roots, extremal_rate_bilinear, induced_polynomial_max
from .problems import (
    BilinearProblem,
    Problem,
    UnsupportedOperation,
    as_vector,
    hamiltonian_grad,
    make_huber_coupling,
    make_log_cosh,
    random_scsc_quadratic,
    scalar_bilinear,
)
from .schedules import StepPairSchedule, _paired, slingshot_bilinear
from .solvers import run_baseline, run_gda

IDENTITY_RTOL = 1e-8
TERM_RTOL = 1e-10


def certificate_coefficient(h: float, mu: float) -> float:
    """``c_{h,mu}``, the gradient-norm coefficient of the two-step bound (L = 1)."""
    num = h * h * (1.0 + (4.0 * mu - 5.0) * h + (6.0 - 9.0 * mu + 2.0 * mu * mu) * h * h)
    return num / (2.0 * (1.0 + (mu - 2.0) * h))


def coefficient_monotonicity_sweep(hs=None, mus=None) -> bool:
    """Soft check that ``c_{h,mu}`` is nondecreasing in ``mu`` on a grid of ``h < 1/3``."""
    hs = np.linspace(1e-3, 1 / 3 - 1e-3, 60) if hs is None else np.asarray(hs)
    mus = np.linspace(0.0, 1.0, 201) if mus is None else np.asarray(mus)
    for h in hs:
        c = np.array([certificate_coefficient(h, mu) for mu in mus])
        if np.any(np.diff(c) < -1e-15 * np.abs(c[1:])):
            return False
    return True


def _two_trajectories(grad, z0: np.ndarray, h: float, dx: int):
    """Both branches of one randomized slingshot pair started at ``z0``.

    (-) branch, steps (h, -h) then (0, h): ``z1 = z0 - h g``, then ``y += h grad_y``.
    (+) branch, steps (-h, h) then (h, 0): ``z1 = z0 + h g``, then ``x -= h grad_x``.
    """
    g0 = grad(z0)
    z1m = z0 - h * g0
    z1p = z0 + h * g0
    z2m = z1m.copy()
    z2m[dx:] += h * grad(z1m)[dx:]
    z2p = z1p.copy()
    z2p[:dx] -= h * grad(z1p)[:dx]
    return g0, z1m, z1p, z2m, z2p


@dataclass(frozen=True)
class CertificateReport:
    lhs: float
    q_terms: tuple
    p_term: float
    s_terms: tuple
    h: float
    mu: float
    coefficient: float

    @property
    def terms(self) -> tuple:
        return self.q_terms + (0.5 * self.p_term,) + self.s_terms

    @property
    def identity_residual(self) -> float:
        return abs(self.lhs - self.h * sum(self.terms))

    @property
    def min_term(self) -> float:
        return min(self.q_terms + (self.p_term,) + self.s_terms)

    @property
    def scale(self) -> float:
        return 1.0 + abs(self.lhs) + sum(abs(t) for t in self.terms)

    @property
    def passed(self) -> bool:
        s = self.scale
        return self.identity_residual <= IDENTITY_RTOL * s and self.min_term >= -TERM_RTOL * s


def _rescaled(problem: Problem, h: float):
    L = float(problem.L)
    mu = float(problem.mu) / L
    hs = h * L
    if not 0 < hs <= 1 / 3 * (1 + 1e-12):
        raise ValueError(f"need 0 < h L <= 1/3, got h L = {hs}")
    if not 0 <= mu < 1:
        raise ValueError(f"need mu / L in [0, 1), got {mu}")
    return L, mu, hs


def verify_two_step_certificate(problem: Problem, z0, h: float) -> CertificateReport:
    """Evaluate both sides of the two-step identity and every term of the sum.

    The problem is rescaled to ``L = 1`` (``f -> f/L``, ``h -> h L``). The
    left side is ``(1 - h mu)|z0 - z*|^2 - c |grad f(z0)|^2`` minus the
    expected squared distance after the pair; the right side is ``h`` times
    six co-coercivity terms, half a smoothness term and seven squares.
    """
    L, mu, h = _rescaled(problem, h)
    z0 = as_vector(problem, z0)
    zs = problem.closest_saddle(z0)
    dx = problem.dx

    def f(x, y):
        return problem.value(np.concatenate([x, y])) / L

    def g(x, y):
        return problem.grad(np.concatenate([x, y])) / L

    def gx(x, y):
        return g(x, y)[:dx]

    def gy(x, y):
        return g(x, y)[dx:]

    def n2(v):
        return float(v @ v)

    g0, z1m, z1p, z2m, z2p = _two_trajectories(lambda z: problem.grad(z) / L, z0, h, dx)
    x0, y0 = z0[:dx], z0[dx:]
    xs, ys = zs[:dx], zs[dx:]
    x1m, y1m = z1m[:dx], z1m[dx:]
    x1p, y1p = z1p[:dx], z1p[dx:]
    gx0, gy0 = g0[:dx], g0[dx:]

    c = certificate_coefficient(h, mu)
    lhs = (1 - h * mu) * n2(z0 - zs) - c * n2(g0) - 0.5 * (n2(z2m - zs) + n2(z2p - zs))

    k = 1.0 / (2.0 * (1.0 - mu))

    def Q(val, dval, v, w):
        # interpolation inequality for a mu-strongly convex, 1-smooth function
        return val(v) - val(w) + k * (2.0 * (dval(w) - mu * dval(v)) @ (w - v) - n2(dval(v) - dval(w)) - mu * n2(v - w))

    phi, dphi = (lambda x: f(x, y1p)), (lambda x: gx(x, y1p))
    phis, dphis = (lambda x: f(x, ys)), (lambda x: gx(x, ys))
    psi, dpsi = (lambda y: -f(x1m, y)), (lambda y: -gy(x1m, y))
    psis, dpsis = (lambda y: -f(xs, y)), (lambda y: -gy(xs, y))
    q_terms = (
        Q(phi, dphi, x1p, x1m),
        Q(phi, dphi, xs, x1p),
        Q(phis, dphis, x1m, xs),
        Q(psi, dpsi, y1m, y1p),
        Q(psi, dpsi, ys, y1m),
        Q(psis, dpsis, y1p, ys),
    )
    p_term = n2(z0 - np.concatenate([x1m, y1p])) - n2(g0 - g(x1m, y1p))

    rho = 1.0 + h * mu - h
    s_terms = (
        k * n2(h * mu * gx0 - gx(x1p, y1p) + gx(xs, y1p) + mu * x0 - mu * xs),
        k * n2(h * mu * gy0 - gy(x1m, y1m) + gy(x1m, ys) - mu * y0 + mu * ys),
        k * n2(h * mu * gx0 + gx(x1m, ys) - mu * x0 + mu * xs),
        k * n2(h * mu * gy0 + gy(xs, y1p) + mu * y0 - mu * ys),
        n2(rho * gx(x1p, y1p) - gx(x1m, y1p) - 2 * h * mu * gx0) / (2 * rho * (1 - mu)),
        n2(rho * gy(x1m, y1m) - gy(x1m, y1p) - 2 * h * mu * gy0) / (2 * rho * (1 - mu)),
        n2((rho - h) * g(x1m, y1p) - (rho + 2 * h * (h - 1)) * g0) / (2 * rho * (rho - h)),
    )
    return CertificateReport(lhs, q_terms, p_term, s_terms, h, mu, c)


@dataclass(frozen=True)
class ProgressCheck:
    margin: float
    scale: float

    @property
    def passed(self) -> bool:
        return self.margin >= -TERM_RTOL * self.scale


def check_two_step_progress(problem: Problem, z0, h: float) -> ProgressCheck:
    """Exact expectation over the pair's coin flip versus the two-step bound.

    ``margin = (1 - h mu)|z0 - z*|^2 - h^2 (1 - 3 L h)/2 |grad f(z0)|^2 - E|z2 - z*|^2``.
    """
    L = float(problem.L)
    if not 0 < h * L <= 1 / 3 * (1 + 1e-12):
        raise ValueError("need 0 < h <= 1/(3L)")
    z0 = as_vector(problem, z0)
    zs = problem.closest_saddle(z0)
    g0, _, _, z2m, z2p = _two_trajectories(problem.grad, z0, h, problem.dx)
    d0 = float((z0 - zs) @ (z0 - zs))
    gsq = float(g0 @ g0)
    expected = 0.5 * (float((z2m - zs) @ (z2m - zs)) + float((z2p - zs) @ (z2p - zs)))
    rhs = (1 - h * problem.mu) * d0 - h * h * (1 - 3 * L * h) / 2 * gsq
    return ProgressCheck(rhs - expected, 1.0 + d0 + h * h * gsq + expected)


def check_second_order_expansion(problem: Problem, z, h: float) -> float:
    """Distance between the expected pair update and the consensus-style prediction
    ``z - (h/2) J grad f(z) - (h^2/2) hess f(z) grad f(z)``."""
    if not problem.has_hvp:
        raise UnsupportedOperation("second-order expansion needs a Hessian-vector oracle")
    z = as_vector(problem, z)
    dx = problem.dx
    g, _, _, z2m, z2p = _two_trajectories(problem.grad, z, h, dx)
    Jg = g.copy()
    Jg[dx:] *= -1.0
    predicted = z - 0.5 * h * Jg - 0.5 * h * h * problem.hvp(z, g)
    return float(np.linalg.norm(0.5 * (z2m + z2p) - predicted))


def check_hamiltonian_equivalence(problem: BilinearProblem, z, h: float) -> float:
    """``|| two slingshot steps of size h - (z - h^2 grad Phi(z)) ||``."""
    if not isinstance(problem, BilinearProblem):
        raise ValueError("Hamiltonian equivalence is only exact for bilinear problems")
    z = as_vector(problem, z)
    sched = StepPairSchedule(*_paired(np.array([float(h)])), "pair")
    two_step = run_gda(problem, sched, z, record_every=2).final_z
    gd = z - h * h * hamiltonian_grad(problem, z)
    return float(np.linalg.norm(two_step - gd))


# -- divergence ----------------------------------------------------------------


@dataclass(frozen=True)
class DivergenceWitness:
    det_bound: float  # prod sqrt(1 + alpha_t beta_t)
    radius_bound: float  # spectral radius of the product (constant kind: rho(U)^T)
    realized_ratio: float  # largest |z_T| / |z_0| over unit initializations
    simulated_ratio: float  # GDA run from the worst-case unit vector

    @property
    def lower_bound(self) -> float:
        return max(self.det_bound, self.radius_bound)

    @property
    def passed(self) -> bool:
        return self.lower_bound >= 1.0 - 1e-12 and self.lower_bound <= self.realized_ratio * (1 + 1e-10) + 1e-10


def _validate_kind(schedule: StepPairSchedule, kind: str):
    a, b = schedule.alphas, schedule.betas
    if kind == "constant":
        ok = np.all(a == a[0]) and np.all(b == b[0])
    elif kind == "nonnegative":
        ok = np.all(a >= 0) and np.all(b >= 0)
    elif kind == "symmetric":
        ok = np.array_equal(a, b)
    else:
        raise ValueError(f"unknown kind {kind!r}")
    if not ok:
        raise ValueError(f"schedule violates the {kind} constraints")


def product_log_norm(schedule: StepPairSchedule) -> tuple[np.ndarray, float]:
    """Normalized product of the xy update matrices and the log of its scale.

    Returns ``(P, s)`` with ``prod_t U_t = exp(s) P`` and ``|P|_2 = 1``.
    """
    P = np.eye(2)
    log_scale = 0.0
    for a, b in schedule:
        P = np.array([[1.0, -a], [b, 1.0]]) @ P
        nrm = np.linalg.norm(P, 2)
        P /= nrm
        log_scale += math.log(nrm)
    return P, log_scale


def check_divergence_witness(schedule: StepPairSchedule, kind: str) -> DivergenceWitness:
    """Lower bounds on ``|z_T| / |z_0|`` for GDA on ``xy``, against the realized worst case."""
    if schedule.horizon < 1:
        raise ValueError("empty schedule")
    _validate_kind(schedule, kind)
    prod_det = 1.0 + schedule.alphas * schedule.betas
    det_bound = float(np.exp(0.5 * np.sum(np.log(prod_det)))) if np.all(prod_det > 0) else 0.0
    P, log_s = product_log_norm(schedule)
    if kind == "constant":
        U = np.array([[1.0, -schedule.alphas[0]], [schedule.betas[0], 1.0]])
        radius = float(np.max(np.abs(np.linalg.eigvals(U)))) ** schedule.horizon
    else:
        radius = float(np.max(np.abs(np.linalg.eigvals(P)))) * math.exp(log_s)
    realized = math.exp(log_s)
    v = np.linalg.svd(P)[2][0]
    trace = run_gda(scalar_bilinear(1.0), schedule, v, record_every=schedule.horizon)
    simulated = math.sqrt(trace.final_dist_sq) if trace.status != "diverged" else math.inf
    return DivergenceWitness(det_bound, radius, realized, simulated)


def random_divergence_schedule(kind: str, rng: np.random.Generator, T: Optional[int] = None) -> StepPairSchedule:
    T = int(rng.integers(1, 60)) if T is None else T
    if kind == "nonnegative":
        a, b = rng.uniform(0, 1, T), rng.uniform(0, 1, T)
    elif kind == "symmetric":
        a = rng.uniform(-1, 1, T)
        b = a.copy()
    elif kind == "constant":
        a, b = np.full(T, rng.uniform(-1, 1)), np.full(T, rng.uniform(-1, 1))
    else:
        raise ValueError(kind)
    return StepPairSchedule(a, b, kind)


# -- counterexamples -----------------------------------------------------------


def check_cycling_counterexamples(pairs: int = 50) -> dict:
    """Three Huber-coupling cases.

    ``zero_net_cycles``: pairs ``(h, -h, -h, h)`` with h = 1/2 from x0 = 3
    return to z0 after every pair. ``hgd_stationary``: HGD from x0 = 3 never
    moves. ``zero_net_moves_near_saddle``: the same pairs from x0 = 0.9, inside
    the quadratic branch, do move.
    """
    huber = make_huber_coupling()
    h = 0.5
    sched = StepPairSchedule(*_paired(np.full(pairs, h)), "zero_net")
    z0 = np.array([3.0, 0.25])
    tr = run_gda(huber, sched, z0, record_every=1)
    z = z0.copy()
    cycles = True
    for t in range(pairs):
        z[0] -= sched.alphas[2 * t] * huber.grad(z)[0]
        z[0] -= sched.alphas[2 * t + 1] * huber.grad(z)[0]
        cycles &= bool(np.array_equal(z, z0))
    cycles &= bool(np.array_equal(tr.final_z, z0))
    cycles &= all(tr.dist_sq[tr.at(2 * t)] == tr.dist_sq[0] for t in range(pairs))

    hgd = run_baseline(huber, "hgd", 2 * pairs, z0)
    stationary = bool(np.array_equal(hgd.final_z, z0)) and len(set(hgd.grad_norm_sq)) == 1

    near = run_gda(huber, StepPairSchedule(*_paired(np.array([h])), "zero_net"), np.array([0.9, 0.25]))
    moves = bool(np.linalg.norm(near.final_z - np.array([0.9, 0.25])) > 0)
    return {"zero_net_cycles": cycles, "hgd_stationary": stationary, "zero_net_moves_near_saddle": moves}


# -- tightness -----------------------------------------------------------------


@dataclass(frozen=True)
class TightnessResult:
    lam_star: float
    realized_ratio: float
    rate: float

    @property
    def relative_error(self) -> float:
        if self.rate == 0.0:
            return abs(self.realized_ratio)
        return abs(self.realized_ratio - self.rate) / self.rate

    @property
    def passed(self) -> bool:
        return self.relative_error <= 1e-6


def lower_bound_tightness(T: int, m: float, M: float, ordering=None) -> TightnessResult:
    """Run the slingshot schedule on the 1-D instance ``sqrt(lam*) x y`` where ``lam*``
    maximizes the schedule's induced polynomial on [m, M]."""
    if T < 1:
        raise ValueError("T must be >= 1")
    p = InducedPolynomial(bilinear_roots(T, m, M))
    lam, _ = induced_polynomial_max(p, m, M)
    lam = min(max(lam, m), M)
    problem = BilinearProblem([[math.sqrt(lam)]], m=m, M=M)
    tr = run_gda(problem, slingshot_bilinear(T, m, M, ordering=ordering), np.array([1.0, 0.0]))
    ratio = math.sqrt(tr.final_dist_sq / tr.dist_sq[0])
    return TightnessResult(float(lam), ratio, extremal_rate_bilinear(T, m, M))


# -- fuzzing / CLI rows --------------------------------------------------------


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial)]))


def random_certificate_case(seed: int, trial: int):
    """Random SCSC quadratic, ``z0``, ``h in (0, 1/3]`` and ``mu in [0, 0.9]``."""
    rng = trial_rng(seed, trial)
    d = int(rng.integers(1, 7))
    mu = float(rng.uniform(0.0, 0.9))
    h = float((1.0 - rng.uniform(0.0, 1.0)) / 3.0)
    problem = random_scsc_quadratic(d, mu, seed=int(rng.integers(2**31)))
    z0 = rng.normal(size=2 * d) * rng.uniform(0.1, 10.0)
    return problem, z0, h


VERIFY_CHECKS = ("two-step", "expansion", "divergence", "hamiltonian", "tightness", "cycling")


def run_verification(check: str, trials: int = 10, seed: int = 0) -> Iterator[tuple[int, str, float]]:
    """Yield ``(trial, status, residual_or_margin)`` rows for ``mmx verify``."""
    if check not in VERIFY_CHECKS:
        raise ValueError(f"unknown check {check!r}; choose from {VERIFY_CHECKS}")

    def status(ok):
        return "pass" if ok else "fail"

    if check == "cycling":
        for i, (name, ok) in enumerate(check_cycling_counterexamples().items()):
            yield i, status(ok), 0.0 if ok else 1.0
        return

    for trial in range(trials):
        rng = trial_rng(seed, trial)
        if check == "two-step":
            problem, z0, h = random_certificate_case(seed, trial)
            rep = verify_two_step_certificate(problem, z0, h)
            prog = check_two_step_progress(problem, z0, h)
            yield trial, status(rep.passed and prog.passed), rep.identity_residual / rep.scale
        elif check == "expansion":
            problem = make_log_cosh()
            z = np.array([rng.uniform(0.2, 2.0), rng.normal()])
            h = 0.1
            ratio = check_second_order_expansion(problem, z, h) / check_second_order_expansion(problem, z, h / 2)
            yield trial, status(6.0 <= ratio <= 10.0), ratio
        elif check == "divergence":
            kind = ("constant", "nonnegative", "symmetric")[trial % 3]
            w = check_divergence_witness(random_divergence_schedule(kind, rng), kind)
            yield trial, status(w.passed), w.realized_ratio - w.lower_bound
        elif check == "hamiltonian":
            dx, dy = int(rng.integers(1, 8)), int(rng.integers(1, 8))
            problem = BilinearProblem(rng.normal(size=(dx, dy)))
            z = rng.normal(size=dx + dy)
            res = check_hamiltonian_equivalence(problem, z, float(rng.uniform(0.0, 1.0)))
            yield trial, status(res <= 1e-12 * (1 + np.linalg.norm(z))), res
        elif check == "tightness":
            T = trial % 8 + 1
            kappa = (4.0, 100.0)[(trial // 8) % 2]
            r = lower_bound_tightness(T, 1.0, kappa)
            yield trial, status(r.passed), r.relative_error
