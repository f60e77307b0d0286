import math

import numpy as np
import pytest
import sympy as sp

from mmx import certify as C
from mmx import problems as P
from mmx import schedules as S


def _scsc(mu, seed, d=3):
    return P.random_scsc_quadratic(d, mu, seed=seed)


def test_coefficient_matches_symbolic_form():
    h, mu = sp.symbols("h mu")
    c = h**2 * (1 + (4 * mu - 5) * h + (6 - 9 * mu + 2 * mu**2) * h**2) / (2 * (1 + (mu - 2) * h))
    assert sp.simplify(c.subs(mu, 0) - h**2 * (1 - 3 * h) / 2) == 0
    for hv, mv in [(1 / 6, 0.0), (0.1, 0.5), (1 / 3, 0.9)]:
        assert C.certificate_coefficient(hv, mv) == pytest.approx(float(c.subs({h: hv, mu: mv})), rel=1e-14)
    assert C.certificate_coefficient(1 / 6, 0.0) == pytest.approx(1 / 144)


def test_coefficient_monotone_in_mu():
    assert C.coefficient_monotonicity_sweep()


def test_certificate_identity_on_scsc_example(rng):
    prob = _scsc(0.3, seed=11, d=4)
    rep = C.verify_two_step_certificate(prob, rng.normal(size=8), 1 / 6)
    assert rep.identity_residual <= 1e-8
    assert rep.min_term >= -1e-10
    assert len(rep.q_terms) == 6 and len(rep.s_terms) == 7


def test_certificate_at_saddle_is_zero():
    prob = _scsc(0.2, seed=3)
    zs = prob.closest_saddle(np.zeros(6))
    rep = C.verify_two_step_certificate(prob, zs, 0.2)
    assert abs(rep.lhs) < 1e-14
    assert max(abs(t) for t in rep.terms) < 1e-13


def test_certificate_rescales_by_l(rng):
    base = _scsc(0.4, seed=5)
    L = 7.0
    big = P.QuadraticProblem(base.A * L, base.B * L, base.C * L, base.x_shift, base.y_shift)
    z0 = rng.normal(size=6)
    a = C.verify_two_step_certificate(base, z0, 0.25)
    b = C.verify_two_step_certificate(big, z0, 0.25 / L)
    assert b.lhs == pytest.approx(a.lhs, rel=1e-9)
    assert b.passed


def test_certificate_domain_errors():
    prob = _scsc(0.3, seed=1)
    with pytest.raises(ValueError):
        C.verify_two_step_certificate(prob, np.zeros(6), 0.5)
    bare = P.SmoothProblem(1, 1, None, lambda z: np.array([z[1], -z[0]]), L=1.0, saddle_fn=lambda z: np.zeros(2))
    with pytest.raises(P.UnsupportedOperation):
        C.verify_two_step_certificate(bare, np.ones(2), 0.1)


def test_rho_denominators_positive():
    for h in np.linspace(1e-6, 1 / 3, 50):
        for mu in np.linspace(0, 0.999, 50):
            rho = 1 + h * mu - h
            assert rho > 0 and rho - h > 0


def test_two_step_progress_examples():
    xy = P.scalar_bilinear(1.0)
    assert C.check_two_step_progress(xy, np.array([1.0, 1.0]), 1 / 6).margin >= 0
    assert C.check_two_step_progress(xy, np.zeros(2), 1 / 6).margin == 0.0
    for t in range(100):
        prob, z0, h = C.random_certificate_case(42, t)
        assert C.check_two_step_progress(prob, z0, h).passed


def test_certificate_fuzz_small():
    for t in range(100):
        prob, z0, h = C.random_certificate_case(7, t)
        rep = C.verify_two_step_certificate(prob, z0, h)
        assert rep.passed, (t, rep.identity_residual, rep.min_term)


def test_certificate_holds_on_nonlinear_problem():
    # log-cosh coupling: not quadratic, saddle set {0} x R
    lc = P.make_log_cosh()
    for x0 in (-3.0, -0.4, 0.2, 2.5):
        rep = C.verify_two_step_certificate(lc, np.array([x0, 1.3]), 0.3)
        assert rep.passed


def test_second_order_expansion():
    bil = P.BilinearProblem(np.random.default_rng(0).normal(size=(3, 2)))
    z = np.random.default_rng(1).normal(size=5)
    assert C.check_second_order_expansion(bil, z, 0.3) <= 1e-14 * (1 + np.linalg.norm(z))
    lc = P.make_log_cosh()
    assert C.check_second_order_expansion(lc, np.array([0.0, 2.0]), 0.1) == 0.0
    hs = np.array([1e-1, 3e-2, 1e-2, 3e-3, 1e-3])
    errs = np.array([C.check_second_order_expansion(lc, np.array([0.8, 0.0]), h) for h in hs])
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert abs(slope - 3) <= 0.2


def test_hamiltonian_equivalence():
    assert C.check_hamiltonian_equivalence(P.scalar_bilinear(1.0), np.array([1.0, 0.0]), 0.5) == 0.0
    with pytest.raises(ValueError):
        C.check_hamiltonian_equivalence(_scsc(0.1, 0), np.zeros(6), 0.1)


def test_divergence_witness_examples():
    w = C.check_divergence_witness(S.constant(0.1, 0.1, 10), "constant")
    assert w.det_bound == pytest.approx(1.01**5, rel=1e-14)
    assert w.realized_ratio == pytest.approx(1.01**5, rel=1e-12)
    w = C.check_divergence_witness(S.alternating(0.1, 12), "nonnegative")
    assert w.det_bound == 1.0 and w.passed
    sym = S.StepPairSchedule(np.full(4, -0.2), np.full(4, -0.2), "sym")
    w = C.check_divergence_witness(sym, "symmetric")
    assert w.det_bound == pytest.approx(1.04**2) and w.passed
    with pytest.raises(ValueError):
        C.check_divergence_witness(S.slingshot_bilinear(2, 1.0, 2.0), "nonnegative")


def test_divergence_witness_random_and_constant_negative_product():
    rng = np.random.default_rng(3)
    for i in range(200):
        kind = ("constant", "nonnegative", "symmetric")[i % 3]
        w = C.check_divergence_witness(C.random_divergence_schedule(kind, rng), kind)
        assert w.passed
        assert w.simulated_ratio == pytest.approx(w.realized_ratio, rel=1e-9)
    # alpha beta < 0: the determinant shrinks but the spectral radius does not
    w = C.check_divergence_witness(S.constant(0.3, -0.2, 10), "constant")
    assert w.det_bound < 1 and w.radius_bound >= 1 and w.passed


def test_cycling_counterexamples():
    assert all(C.check_cycling_counterexamples().values())


@pytest.mark.parametrize("T,kappa,expected", [(1, 4.0, 0.6), (3, 1.0, 0.0)])
def test_tightness_closed_forms(T, kappa, expected):
    r = C.lower_bound_tightness(T, 1.0, kappa)
    assert r.realized_ratio == pytest.approx(expected, abs=1e-15)


def test_tightness_t8():
    r = C.lower_bound_tightness(8, 1.0, 100.0)
    assert r.relative_error <= 1e-6


def test_run_verification_rows():
    for check in C.VERIFY_CHECKS:
        rows = list(C.run_verification(check, trials=3, seed=1))
        assert rows and all(status == "pass" for _, status, _ in rows)
        assert all(math.isfinite(v) for _, _, v in rows)
    with pytest.raises(ValueError):
        list(C.run_verification("bogus"))
