import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmx import problems as P


def test_point_validation():
    p = P.Point([1.0, 2.0], [3.0])
    assert np.array_equal(p.vector, [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        P.Point([], [1.0])
    with pytest.raises(ValueError):
        P.Point([np.nan], [1.0])
    with pytest.raises(ValueError):
        P.as_vector(P.scalar_bilinear(), P.Point([1.0, 2.0], [0.0]))


def test_bilinear_grad_and_saddle_on_rank_deficient_b():
    B = np.array([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]])
    prob = P.BilinearProblem(B)
    assert prob.m == 1.0 and prob.M == 4.0 and prob.L == 2.0
    z0 = np.array([1.0, 1.0, 3.0, -2.0, 5.0])
    zs = P.closest_saddle(prob, z0)
    # only the y-coordinate outside range(B^T) survives
    assert np.allclose(zs, [0.0, 0.0, 0.0, 0.0, 5.0])
    assert np.allclose(prob.grad(zs), 0.0)


def test_bilinear_rejects_spectrum_outside_bounds():
    with pytest.raises(ValueError):
        P.BilinearProblem(np.diag([1.0, 3.0]), m=1.0, M=4.0)


def test_random_bilinear_spectrum():
    prob = P.random_bilinear(30, M_target=300.0, seed=3)
    s2 = prob.singular_values**2
    assert s2.min() >= 1.0 - 1e-12 and s2.max() <= 300.0
    assert prob.m == 1.0 and prob.M == 300.0


def test_quadratic_saddle_is_projection(rng):
    prob = P.random_convex_concave_quadratic(6, 5, L=1.0, seed=2)
    assert prob.L == pytest.approx(1.0)
    z0 = rng.normal(size=11)
    zs = prob.closest_saddle(z0)
    assert np.linalg.norm(prob.grad(zs)) < 1e-10
    # idempotent, and the offset is orthogonal to the saddle set directions
    assert np.allclose(prob.closest_saddle(zs), zs)
    assert np.allclose(prob._kernel.T @ (z0 - zs), 0.0, atol=1e-10)


def test_quadratic_rejects_nonconvex_block():
    with pytest.raises(ValueError):
        P.QuadraticProblem([[-1.0]], [[1.0]], [[0.0]])
    with pytest.raises(ValueError):
        P.QuadraticProblem([[1.0]], [[1.0]], [[0.0]], L=0.5)


def test_scsc_instance_has_unit_smoothness_and_unique_saddle():
    prob = P.random_scsc_quadratic(4, 0.3, seed=9)
    assert np.abs(np.linalg.eigvals(prob.H)).max() == pytest.approx(1.0)
    zs = prob.closest_saddle(np.zeros(8))
    assert np.allclose(zs, prob.shift)
    assert np.linalg.norm(prob.grad(zs)) < 1e-12


def test_huber_and_logcosh_oracles():
    hub = P.make_huber_coupling()
    assert hub.value(np.array([3.0, 1.0])) == 2.5
    assert np.array_equal(hub.grad(np.array([3.0, 1.0])), [1.0, 0.0])
    assert np.array_equal(P.hamiltonian_grad(hub, np.array([3.0, 1.0])), [0.0, 0.0])
    lc = P.make_log_cosh()
    z = np.array([0.7, 0.0])
    assert lc.value(z) == pytest.approx(np.log(np.cosh(0.7)))
    eps = 1e-6
    fd = (lc.value(z + [eps, 0]) - lc.value(z - [eps, 0])) / (2 * eps)
    assert fd == pytest.approx(lc.grad(z)[0], rel=1e-8)


def test_hamiltonian_grad_finite_difference_fallback(rng):
    lc = P.make_log_cosh()
    no_hvp = P.SmoothProblem(1, 1, lc.value_fn, lc.grad_fn, L=1.0)
    for x in rng.uniform(-2, 2, size=10):
        z = np.array([x, 0.3])
        assert np.allclose(P.hamiltonian_grad(no_hvp, z), P.hamiltonian_grad(lc, z), rtol=1e-7, atol=1e-12)
    with pytest.raises(P.UnsupportedOperation):
        P.hamiltonian_grad(no_hvp, np.array([0.5, 0.0]), fallback=False)


def test_load_matrix_csv(tmp_path):
    f = tmp_path / "B.csv"
    f.write_text("1,2\n3,4\n")
    assert np.array_equal(P.load_matrix_csv(f), [[1.0, 2.0], [3.0, 4.0]])


@settings(max_examples=50, deadline=None)
@given(
    st.integers(1, 5),
    st.integers(1, 5),
    st.integers(0, 10_000),
)
def test_bilinear_saddle_projection_properties(dx, dy, seed):
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(dx, dy))
    prob = P.BilinearProblem(B, rng.normal(size=dx), rng.normal(size=dy))
    z0 = rng.normal(size=dx + dy)
    zs = prob.closest_saddle(z0)
    assert np.linalg.norm(prob.grad(zs)) <= 1e-9 * (1 + np.linalg.norm(z0))
    assert np.allclose(prob.closest_saddle(zs), zs)
