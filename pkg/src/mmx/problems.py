"""Min-max problem instances, their oracles, and saddle-set geometry.

Every problem works on the concatenated iterate ``z = (x, y)`` stored as a
flat float64 vector of length ``dx + dy``. :class:`Point` is the validated
two-block view used at API boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

# relative singular-value cutoff for kernel detection
KERNEL_RTOL = 1e-12


class UnsupportedOperation(RuntimeError):
    """Raised when a problem lacks the oracle an operation needs."""


@dataclass(frozen=True)
class Point:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float)).ravel()
        y = np.atleast_1d(np.asarray(self.y, dtype=float)).ravel()
        if x.size < 1 or y.size < 1:
            raise ValueError("both blocks of a Point need at least one entry")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("Point entries must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.y])

    @classmethod
    def from_vector(cls, z, dx: int) -> "Point":
        z = np.asarray(z, dtype=float)
        return cls(z[:dx], z[dx:])


def as_vector(problem: "Problem", z) -> np.ndarray:
    """Flatten ``z`` (Point or array) and check it against the problem's dims."""
    if isinstance(z, Point):
        if z.x.size != problem.dx or z.y.size != problem.dy:
            raise ValueError(
                f"point has dims ({z.x.size}, {z.y.size}), problem expects "
                f"({problem.dx}, {problem.dy})"
            )
        return z.vector
    v = np.asarray(z, dtype=float).ravel()
    if v.size != problem.dx + problem.dy:
        raise ValueError(f"vector of length {v.size} does not match dx + dy = {problem.dx + problem.dy}")
    return v


class Problem:
    """Common interface. Subclasses provide ``value``, ``grad`` and optionally ``hvp``."""

    dx: int
    dy: int
    L: float
    mu: float = 0.0
    linear_gradient: bool = False

    @property
    def dim(self) -> int:
        return self.dx + self.dy

    def split(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return z[: self.dx], z[self.dx :]

    def value(self, z: np.ndarray) -> float:
        raise UnsupportedOperation(f"{type(self).__name__} has no value oracle")

    def grad(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def has_hvp(self) -> bool:
        return False

    def hvp(self, z: np.ndarray, v: np.ndarray) -> np.ndarray:
        raise UnsupportedOperation(f"{type(self).__name__} has no Hessian-vector oracle")

    def closest_saddle(self, z0: np.ndarray) -> np.ndarray:
        raise UnsupportedOperation(f"{type(self).__name__} has no saddle projection")


def _rank_basis(U: np.ndarray, s: np.ndarray) -> np.ndarray:
    if s.size == 0 or s[0] == 0.0:
        return U[:, :0]
    return U[:, s > KERNEL_RTOL * s[0]]


class BilinearProblem(Problem):
    """``f(x, y) = (x - x_shift)^T B (y - y_shift)``.

    ``m`` and ``M`` bound the nonzero squared singular values of ``B``; they
    default to the realized extremes. The smoothness of ``f`` is ``sqrt(M)``.
    """

    linear_gradient = True

    def __init__(self, B, x_shift=None, y_shift=None, m: Optional[float] = None, M: Optional[float] = None):
        B = np.atleast_2d(np.asarray(B, dtype=float))
        self.B = B
        self.dx, self.dy = B.shape
        self.x_shift = np.zeros(self.dx) if x_shift is None else np.asarray(x_shift, dtype=float).ravel()
        self.y_shift = np.zeros(self.dy) if y_shift is None else np.asarray(y_shift, dtype=float).ravel()
        if self.x_shift.size != self.dx or self.y_shift.size != self.dy:
            raise ValueError("shift vectors do not match the shape of B")

        U, s, Vt = np.linalg.svd(B)
        self.singular_values = s
        keep = s > KERNEL_RTOL * s[0] if s.size and s[0] > 0 else np.zeros(s.size, dtype=bool)
        self._range_x = U[:, : s.size][:, keep]
        self._range_y = Vt[: s.size].T[:, keep]
        sq = s[keep] ** 2
        if sq.size == 0 and (m is None or M is None):
            raise ValueError("B has no nonzero singular values; pass m and M explicitly")
        self.m = float(sq.min()) if m is None else float(m)
        self.M = float(sq.max()) if M is None else float(M)
        if not 0 < self.m <= self.M:
            raise ValueError(f"need 0 < m <= M, got m={self.m}, M={self.M}")
        if sq.size and (sq.min() < self.m * (1 - 1e-12) or sq.max() > self.M * (1 + 1e-12)):
            raise ValueError(
                f"squared singular values [{sq.min():.6g}, {sq.max():.6g}] fall outside [m, M] = [{self.m}, {self.M}]"
            )
        self.L = float(np.sqrt(self.M))
        self.mu = 0.0

    @property
    def kappa(self) -> float:
        return self.M / self.m

    def value(self, z):
        x, y = self.split(z)
        return float((x - self.x_shift) @ self.B @ (y - self.y_shift))

    def grad(self, z):
        x, y = self.split(z)
        return np.concatenate([self.B @ (y - self.y_shift), self.B.T @ (x - self.x_shift)])

    @property
    def has_hvp(self):
        return True

    def hvp(self, z, v):
        vx, vy = self.split(np.asarray(v, dtype=float))
        return np.concatenate([self.B @ vy, self.B.T @ vx])

    def closest_saddle(self, z0):
        x0, y0 = self.split(np.asarray(z0, dtype=float))
        dx_ = x0 - self.x_shift
        dy_ = y0 - self.y_shift
        # drop the range(B) / range(B^T) components
        xs = self.x_shift + dx_ - self._range_x @ (self._range_x.T @ dx_)
        ys = self.y_shift + dy_ - self._range_y @ (self._range_y.T @ dy_)
        return np.concatenate([xs, ys])


class QuadraticProblem(Problem):
    """``f(z) = 1/2 (z - shift)^T H (z - shift)`` with ``H = [[A, B], [B^T, -C]]``.

    ``A`` and ``C`` must be symmetric PSD. ``L`` is computed as the spectral
    norm of ``H``; a caller-supplied ``L`` must not be smaller.
    """

    linear_gradient = True

    def __init__(self, A, B, C, x_shift=None, y_shift=None, L: Optional[float] = None):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        C = np.atleast_2d(np.asarray(C, dtype=float))
        self.dx, self.dy = B.shape
        if A.shape != (self.dx, self.dx) or C.shape != (self.dy, self.dy):
            raise ValueError("block shapes of A, B, C are inconsistent")
        scale = 1.0 + max(np.abs(A).max(), np.abs(C).max())
        for name, S in (("A", A), ("C", C)):
            if not np.allclose(S, S.T, rtol=0, atol=1e-12 * scale):
                raise ValueError(f"{name} must be symmetric")
            if np.linalg.eigvalsh(S).min() < -1e-10 * scale:
                raise ValueError(f"{name} must be positive semidefinite (convex-concave)")
        self.A, self.B, self.C = A, B, C
        self.H = np.block([[A, B], [B.T, -C]])
        self.x_shift = np.zeros(self.dx) if x_shift is None else np.asarray(x_shift, dtype=float).ravel()
        self.y_shift = np.zeros(self.dy) if y_shift is None else np.asarray(y_shift, dtype=float).ravel()
        self.shift = np.concatenate([self.x_shift, self.y_shift])

        evals, evecs = np.linalg.eigh(self.H)
        norm_H = float(np.abs(evals).max())
        if L is not None and L < norm_H * (1 - 1e-10):
            raise ValueError(f"supplied L={L} is below the spectral norm of H ({norm_H})")
        self.L = norm_H if L is None else float(L)
        self.mu = float(max(0.0, min(np.linalg.eigvalsh(A).min(), np.linalg.eigvalsh(C).min())))
        self._kernel = evecs[:, np.abs(evals) <= KERNEL_RTOL * max(norm_H, 1e-300)]

    def value(self, z):
        d = z - self.shift
        return float(0.5 * d @ self.H @ d)

    def grad(self, z):
        return self.H @ (z - self.shift)

    @property
    def has_hvp(self):
        return True

    def hvp(self, z, v):
        return self.H @ np.asarray(v, dtype=float)

    def closest_saddle(self, z0):
        d = np.asarray(z0, dtype=float) - self.shift
        return self.shift + self._kernel @ (self._kernel.T @ d)


@dataclass
class SmoothProblem(Problem):
    """Problem given by explicit oracles (the smooth convex-concave case)."""

    dx: int
    dy: int
    value_fn: Optional[Callable[[np.ndarray], float]]
    grad_fn: Callable[[np.ndarray], np.ndarray]
    L: float
    mu: float = 0.0
    hvp_fn: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    saddle_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "smooth"
    linear_gradient: bool = field(default=False, init=False)

    def value(self, z):
        if self.value_fn is None:
            raise UnsupportedOperation(f"{self.name} has no value oracle")
        return float(self.value_fn(z))

    def grad(self, z):
        return np.asarray(self.grad_fn(z), dtype=float)

    @property
    def has_hvp(self):
        return self.hvp_fn is not None

    def hvp(self, z, v):
        if self.hvp_fn is None:
            raise UnsupportedOperation(f"{self.name} has no Hessian-vector oracle")
        return np.asarray(self.hvp_fn(z, np.asarray(v, dtype=float)), dtype=float)

    def closest_saddle(self, z0):
        if self.saddle_fn is None:
            raise UnsupportedOperation(f"{self.name} has no saddle projection")
        return np.asarray(self.saddle_fn(np.asarray(z0, dtype=float)), dtype=float)


# -- oracle-level operations -------------------------------------------------


def grad(problem: Problem, z) -> np.ndarray:
    return problem.grad(as_vector(problem, z))


def hamiltonian(problem: Problem, z) -> float:
    """``1/2 ||grad f(z)||^2``."""
    g = grad(problem, z)
    return 0.5 * float(g @ g)


def hamiltonian_grad(problem: Problem, z, fallback: bool = True, step: Optional[float] = None) -> np.ndarray:
    """Gradient of the Hamiltonian, ``hess f(z) @ grad f(z)``.

    Uses the Hessian-vector oracle when present. Otherwise, if ``fallback``
    is set, takes a central difference of ``grad f`` along the unit direction
    ``g / ||g||`` and rescales by ``||g||``. The default difference step is
    ``1e-5 (1 + ||z||) / (1 + ||g||)``.
    """
    z = as_vector(problem, z)
    g = problem.grad(z)
    if problem.has_hvp:
        return problem.hvp(z, g)
    if not fallback:
        raise UnsupportedOperation("no Hessian-vector oracle and finite-difference fallback disabled")
    gnorm = float(np.linalg.norm(g))
    if gnorm == 0.0:
        return np.zeros_like(z)
    u = g / gnorm
    eps = 1e-5 * (1 + np.linalg.norm(z)) / (1 + gnorm) if step is None else float(step)
    return gnorm * (problem.grad(z + eps * u) - problem.grad(z - eps * u)) / (2 * eps)


def closest_saddle(problem: Problem, z0) -> np.ndarray:
    """Orthogonal projection of ``z0`` onto the saddle set."""
    return problem.closest_saddle(as_vector(problem, z0))


# -- instances -----------------------------------------------------------------


def random_bilinear(d: int, M_target: Optional[float] = None, seed: int = 0) -> BilinearProblem:
    """Random ``d x d`` coupling ``U (S + I) V^T`` built from a uniform[0, 1] draw.

    Every singular value is at least 1, so ``m = 1``. ``M`` is ``M_target``
    when given (it must dominate the realized spectrum), else the realized max.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    rng = np.random.default_rng(seed)
    B_tilde = rng.uniform(0.0, 1.0, size=(d, d))
    U, s, Vt = np.linalg.svd(B_tilde)
    B = (U * (s + 1.0)) @ Vt
    top = float((s[0] + 1.0) ** 2)
    if M_target is not None and top > M_target:
        raise ValueError(f"realized max squared singular value {top:.6g} exceeds M_target={M_target}")
    return BilinearProblem(B, m=1.0, M=float(M_target) if M_target is not None else top)


def diagonal_bilinear(d: int, ratio: float = 0.5) -> BilinearProblem:
    """``B = diag(1, ratio, ratio^2, ...)``; the d = 100, ratio = 1/2 case is 1-smooth."""
    s = ratio ** np.arange(d)
    return BilinearProblem(np.diag(s), m=float(s.min() ** 2), M=float(s.max() ** 2))


def scalar_bilinear(b: float = 1.0) -> BilinearProblem:
    """The 1-D problem ``b x y``."""
    return BilinearProblem([[b]])


def random_convex_concave_quadratic(dx: int, dy: int, L: float = 1.0, seed: int = 0) -> QuadraticProblem:
    """Random convex-concave quadratic with rank-deficient diagonal blocks, scaled so ``||H|| = L``."""
    rng = np.random.default_rng(seed)
    Ga = rng.normal(size=(dx, max(1, dx // 2)))
    Gc = rng.normal(size=(dy, max(1, dy // 2)))
    A = Ga @ Ga.T
    C = Gc @ Gc.T
    B = rng.normal(size=(dx, dy))
    H = np.block([[A, B], [B.T, -C]])
    scale = L / np.abs(np.linalg.eigvalsh(H)).max()
    return QuadraticProblem(
        A * scale, B * scale, C * scale, x_shift=rng.normal(size=dx), y_shift=rng.normal(size=dy)
    )


def random_scsc_quadratic(d: int, mu: float, seed: int = 0) -> QuadraticProblem:
    """``(mu/2)|x|^2 - (mu/2)|y|^2 + x^T B y + a^T x + b^T y`` with Gaussian ``B, a, b``.

    ``B`` is rescaled so that ``||H|| = 1`` (requires ``mu < 1``). The linear
    terms are absorbed into the saddle shift, which is solved in closed form;
    the objective differs from the stated form by a constant only.
    """
    if not 0 <= mu < 1:
        raise ValueError("mu must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(d, d))
    a = rng.normal(size=d)
    b = rng.normal(size=d)
    B *= np.sqrt(1.0 - mu**2) / np.linalg.norm(B, 2)
    eye = np.eye(d)
    H = np.block([[mu * eye, B], [B.T, -mu * eye]])
    shift = np.linalg.solve(H, -np.concatenate([a, b]))
    return QuadraticProblem(mu * eye, B, mu * eye, x_shift=shift[:d], y_shift=shift[d:], L=1.0)


def _huber(x):
    ax = np.abs(x)
    return np.where(ax <= 1.0, 0.5 * x * x, ax - 0.5)


def make_huber_coupling() -> SmoothProblem:
    """``f(x, y) = huber(x)`` on R x R; 1-smooth, convex-concave, saddle set ``{0} x R``."""

    def value(z):
        return float(_huber(z[0]))

    def grad_fn(z):
        return np.array([float(np.clip(z[0], -1.0, 1.0)), 0.0])

    def hvp(z, v):
        return np.array([v[0] if abs(z[0]) <= 1.0 else 0.0, 0.0])

    def saddle(z0):
        return np.array([0.0, z0[1]])

    return SmoothProblem(1, 1, value, grad_fn, L=1.0, mu=0.0, hvp_fn=hvp, saddle_fn=saddle, name="huber")


def make_log_cosh() -> SmoothProblem:
    """``f(x, y) = log cosh x`` on R x R; 1-smooth, convex-concave, saddle set ``{0} x R``."""

    def value(z):
        ax = abs(z[0])
        return ax + np.log1p(np.exp(-2.0 * ax)) - np.log(2.0)

    def grad_fn(z):
        return np.array([np.tanh(z[0]), 0.0])

    def hvp(z, v):
        return np.array([v[0] / np.cosh(z[0]) ** 2, 0.0])

    def saddle(z0):
        return np.array([0.0, z0[1]])

    return SmoothProblem(1, 1, value, grad_fn, L=1.0, mu=0.0, hvp_fn=hvp, saddle_fn=saddle, name="logcosh")


def load_matrix_csv(path) -> np.ndarray:
    """Dense row-major matrix, comma separated, no header."""
    return np.atleast_2d(np.loadtxt(Path(path), delimiter=",", dtype=float, ndmin=2))
