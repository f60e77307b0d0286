"""GDA under arbitrary stepsize schedules, plus the standard baselines."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .chebyshev import extremal_rate_bilinear, extremal_rate_quadratic
from .problems import Problem, UnsupportedOperation, as_vector, hamiltonian_grad
from .schedules import StepPairSchedule

TRACE_COLUMNS = ("t", "alpha", "beta", "grad_norm_sq", "dist_sq", "cum_grad_evals")
DIVERGENCE_NORM = 1e100
# final squared gradient norm, relative to the initial one, reported as converged
CONVERGED_RTOL = 1e-24

BASELINE_KINDS = ("extragradient", "ogda", "eag", "negative_momentum", "hgd", "consensus")


@dataclass
class Trace:
    """Recorded metrics of one run.

    Row ``t`` holds the metrics of iterate ``z_t`` together with the
    stepsizes applied to it; rows for the final iterate carry ``nan`` steps.
    """

    t: list = field(default_factory=list)
    alpha: list = field(default_factory=list)
    beta: list = field(default_factory=list)
    grad_norm_sq: list = field(default_factory=list)
    dist_sq: list = field(default_factory=list)
    cum_grad_evals: list = field(default_factory=list)
    status: str = "completed"
    final_z: Optional[np.ndarray] = None
    T: int = 0
    method: str = "gda"

    def record(self, t, alpha, beta, gsq, dsq, evals):
        self.t.append(int(t))
        self.alpha.append(float(alpha))
        self.beta.append(float(beta))
        self.grad_norm_sq.append(float(gsq))
        self.dist_sq.append(float(dsq))
        self.cum_grad_evals.append(int(evals))

    def __len__(self):
        return len(self.t)

    def column(self, name: str) -> np.ndarray:
        return np.asarray(getattr(self, name))

    def at(self, t: int) -> int:
        """Row index of iterate ``t``; ``KeyError`` if it was not recorded."""
        for i in range(len(self.t) - 1, -1, -1):
            if self.t[i] == t:
                return i
        raise KeyError(f"iterate {t} was not recorded")

    @property
    def final_grad_norm_sq(self) -> float:
        return self.grad_norm_sq[-1] if self.t else math.nan

    @property
    def final_dist_sq(self) -> float:
        return self.dist_sq[-1] if self.t else math.nan

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in zip(self.t, self.alpha, self.beta, self.grad_norm_sq, self.dist_sq, self.cum_grad_evals):
            w.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3]), repr(row[4]), row[5]])
        return buf.getvalue()

    def _settle(self, z):
        self.final_z = z
        g0 = self.grad_norm_sq[0]
        if self.status != "diverged" and self.grad_norm_sq[-1] <= CONVERGED_RTOL * g0:
            self.status = "converged"

    def final_state(self) -> dict:
        return {
            "status": self.status,
            "final_grad_norm_sq": self.final_grad_norm_sq,
            "final_dist_sq": self.final_dist_sq,
            "T": self.T,
        }

    def final_state_json(self) -> str:
        return json.dumps(self.final_state(), sort_keys=True)


def _target(problem: Problem, z0: np.ndarray, z_star) -> Optional[np.ndarray]:
    if z_star is not None:
        return as_vector(problem, z_star)
    try:
        return problem.closest_saddle(z0)
    except UnsupportedOperation:
        return None


def _dist_sq(z, z_star):
    if z_star is None:
        return math.nan
    d = z - z_star
    return float(d @ d)


def _bad(z) -> bool:
    return not np.all(np.isfinite(z)) or float(np.max(np.abs(z))) > DIVERGENCE_NORM


def run_gda(
    problem: Problem,
    schedule: StepPairSchedule,
    z0,
    record_every: int = 1,
    z_star=None,
    grad_noise: float = 0.0,
    noise_seed: Optional[int] = None,
) -> Trace:
    """Simultaneous GDA ``x -= alpha_t grad_x f``, ``y += beta_t grad_y f``.

    One gradient evaluation per iteration; the same gradient also supplies the
    recorded ``grad_norm_sq``. ``grad_noise`` injects a relative perturbation
    ``delta ||g|| xi / sqrt(n)`` with standard normal ``xi`` into each gradient
    (used for stability experiments).

    Iterates with an entry above 1e100 in magnitude, or non-finite ones, end
    the run with status ``diverged``.
    """
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    z = as_vector(problem, z0).copy()
    z_star = _target(problem, z, z_star)
    dx = problem.dx
    T = schedule.horizon
    alphas, betas = schedule.alphas, schedule.betas
    rng = np.random.default_rng(noise_seed) if grad_noise else None
    sqrt_n = math.sqrt(z.size)
    trace = Trace(T=T, method=schedule.kind)

    evals = 0
    for t in range(T):
        g = problem.grad(z)
        evals += 1
        if t % record_every == 0:
            trace.record(t, alphas[t], betas[t], g @ g, _dist_sq(z, z_star), evals - 1)
        if rng is not None:
            g = g + grad_noise * math.sqrt(float(g @ g)) * rng.standard_normal(z.size) / sqrt_n
        z[:dx] -= alphas[t] * g[:dx]
        z[dx:] += betas[t] * g[dx:]
        if _bad(z):
            trace.status = "diverged"
            trace.final_z = z
            trace.record(t + 1, math.nan, math.nan, math.inf, math.inf, evals)
            return trace

    g = problem.grad(z)
    trace.record(T, math.nan, math.nan, g @ g, _dist_sq(z, z_star), evals)
    trace._settle(z)
    return trace


def run_gda_batch(problem: Problem, alphas: np.ndarray, betas: np.ndarray, Z0: np.ndarray, grad_norms: bool = False):
    """GDA on many independent runs at once for linear-gradient problems.

    ``alphas`` and ``betas`` have shape ``(runs, T)``; ``Z0`` has shape
    ``(runs, dim)``. Returns the final iterates, and with ``grad_norms`` also
    the ``(runs, T + 1)`` array of squared gradient norms at ``z_0 .. z_T``.
    Meant for large seed sweeps where the per-run loop of :func:`run_gda`
    would dominate.
    """
    if not problem.linear_gradient:
        raise UnsupportedOperation("batched GDA needs a linear gradient")
    Z = np.array(Z0, dtype=float)
    dx = problem.dx
    T = alphas.shape[1]
    g0 = problem.grad(np.zeros(problem.dim))
    H = np.column_stack([problem.grad(e) - g0 for e in np.eye(problem.dim)])
    gsq = np.empty((Z.shape[0], T + 1)) if grad_norms else None
    for t in range(T + 1):
        G = Z @ H.T + g0
        if grad_norms:
            gsq[:, t] = np.einsum("ij,ij->i", G, G)
        if t == T:
            break
        Z[:, :dx] -= alphas[:, t : t + 1] * G[:, :dx]
        Z[:, dx:] += betas[:, t : t + 1] * G[:, dx:]
    return (Z, gsq) if grad_norms else Z


# -- baselines -----------------------------------------------------------------


def _flip(problem: Problem, g: np.ndarray) -> np.ndarray:
    """``J g`` with ``J = blockdiag(I, -I)``: the descent-ascent field."""
    out = g.copy()
    out[problem.dx :] *= -1.0
    return out


def default_baseline_params(kind: str, L: float) -> dict:
    if kind == "extragradient":
        return {"stepsize": 1.0 / (math.sqrt(2.0) * L)}
    if kind == "ogda":
        return {"stepsize": 1.0 / (3.0 * L)}
    if kind == "eag":
        return {"stepsize": 1.0 / (8.0 * L)}
    if kind == "negative_momentum":
        return {"stepsize": 0.1 / L, "momentum": -0.5}
    if kind == "hgd":
        return {"gamma": 1.0 / L**2, "fallback": True}
    if kind == "consensus":
        return {"h": 0.1 / L, "gamma": 0.1 / L**2, "fallback": True}
    raise ValueError(f"unknown baseline {kind!r}")


def run_baseline(problem: Problem, kind: str, T: int, z0, params: Optional[dict] = None, record_every: int = 1, z_star=None) -> Trace:
    """Run a baseline for ``T`` iterations.

    Gradient accounting: extragradient and EAG use 2 gradient evaluations per
    iteration, OGDA and negative momentum 1. HGD and consensus count one
    gradient plus one Hessian-vector product (or the two extra gradients of
    the finite-difference fallback) per iteration as 2.
    """
    if kind not in BASELINE_KINDS:
        raise ValueError(f"unknown baseline {kind!r}; choose from {BASELINE_KINDS}")
    p = default_baseline_params(kind, problem.L)
    p.update(params or {})
    z = as_vector(problem, z0).copy()
    anchor = z.copy()
    z_star = _target(problem, z, z_star)
    trace = Trace(T=T, method=kind)
    if kind in ("hgd", "consensus") and not problem.has_hvp and not p.get("fallback", True):
        raise UnsupportedOperation(f"{kind} needs a Hessian-vector oracle")

    step = p.get("stepsize", math.nan)
    per_iter = 2 if kind in ("extragradient", "eag", "hgd", "consensus") else 1
    evals = 0
    g_prev = None
    z_prev = z.copy()

    for t in range(T):
        g = problem.grad(z)
        if t % record_every == 0:
            trace.record(t, step, step, g @ g, _dist_sq(z, z_star), evals)
        F = _flip(problem, g)
        if kind == "extragradient":
            z_half = z - step * F
            z = z - step * _flip(problem, problem.grad(z_half))
        elif kind == "eag":
            w = 1.0 / (t + 2)
            z_half = z + w * (anchor - z) - step * F
            z = z + w * (anchor - z) - step * _flip(problem, problem.grad(z_half))
        elif kind == "ogda":
            F_prev = F if g_prev is None else _flip(problem, g_prev)
            g_prev = g
            z = z - step * (2.0 * F - F_prev)
        elif kind == "negative_momentum":
            z_next = z - step * F + p["momentum"] * (z - z_prev)
            z_prev, z = z, z_next
        elif kind == "hgd":
            z = z - p["gamma"] * hamiltonian_grad(problem, z, fallback=p.get("fallback", True))
        else:  # consensus
            z = z - p["h"] * F - p["gamma"] * hamiltonian_grad(problem, z, fallback=p.get("fallback", True))
        evals += per_iter
        if _bad(z):
            trace.status = "diverged"
            trace.final_z = z
            trace.record(t + 1, math.nan, math.nan, math.inf, math.inf, evals)
            return trace

    g = problem.grad(z)
    trace.record(T, math.nan, math.nan, g @ g, _dist_sq(z, z_star), evals)
    trace._settle(z)
    return trace


# -- rate bounds ---------------------------------------------------------------


@dataclass(frozen=True)
class RateCheck:
    passed: bool
    empirical: float
    bound: float
    margin: float  # bound - empirical

    def __bool__(self):
        return self.passed


def check_rate_bound(trace: Trace, bound_kind: str, rtol: float = 1e-8, atol: float = 0.0, **c) -> RateCheck:
    """Compare a trace against a theoretical guarantee.

    ``bilinear_RT`` (needs m, M): ``||z_2T - z*|| <= R_T ||z_0 - z*||`` with T pairs.
    ``quadratic_grad`` (needs L): ``||grad f(z_2T)|| <= L/(2T+1) ||z_0 - z*||``.
    ``scsc_contraction`` (needs mu, h): ``||z_2T - z*||^2 <= (1 - h mu)^T ||z_0 - z*||^2``.
    ``cc_average`` (needs L, h): ``(1/T) sum_t ||grad f(z_2t)||^2 <= 2 ||z_0 - z*||^2 / (h^2 (1 - 3 L h) T)``.

    ``dist0_sq`` may be passed to override ``||z_0 - z*||^2`` read from the trace.
    """
    if trace.status == "diverged":
        return RateCheck(False, math.inf, math.nan, -math.inf)
    T = trace.T // 2
    d0 = c.get("dist0_sq", trace.dist_sq[trace.at(0)])
    if math.isnan(d0):
        raise UnsupportedOperation("distance-based bound needs a saddle projection")
    last = trace.at(trace.T)
    if bound_kind == "bilinear_RT":
        emp = math.sqrt(trace.dist_sq[last])
        bound = extremal_rate_bilinear(T, c["m"], c["M"]) * math.sqrt(d0)
    elif bound_kind == "quadratic_grad":
        emp = math.sqrt(trace.grad_norm_sq[last])
        bound = extremal_rate_quadratic(T, c["L"]) * math.sqrt(d0)
    elif bound_kind == "scsc_contraction":
        emp = trace.dist_sq[last]
        bound = (1.0 - c["h"] * c["mu"]) ** T * d0
    elif bound_kind == "cc_average":
        L, h = c["L"], c["h"]
        if not 3 * L * h < 1:
            raise ValueError("cc_average bound needs h < 1/(3L)")
        vals = [trace.grad_norm_sq[trace.at(2 * t)] for t in range(T)]
        emp = float(np.mean(vals))
        bound = 2.0 * d0 / (h * h * (1.0 - 3.0 * L * h) * T)
    else:
        raise ValueError(f"unknown bound kind {bound_kind!r}")
    passed = bool(emp <= bound * (1.0 + rtol) + atol)
    return RateCheck(passed, float(emp), float(bound), float(bound - emp))
