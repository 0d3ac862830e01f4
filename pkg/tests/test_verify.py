import numpy as np
import pytest

from lipforge.errors import DomainError
from lipforge.fn import DistFn, LinearFn, SumFn, ZeroFn
from lipforge.regions import box_region
from lipforge.smooth import MollifierSpec, mollify
from lipforge.spaces import LinOp, lp_space
from lipforge.verify import (c1_check, dini_check, fd_jacobian, lip_estimate,
                             scan_derivative_set)


def test_scan_linear_zero_error(l2_2):
    M = np.array([[0.3, -0.1], [0.2, 0.4]])
    f = LinearFn(M)
    T = LinOp.build(M, l2_2, l2_2)
    rep = scan_derivative_set(f, [0.2, 0.3], [T], [0.5, 0.25, 0.125])
    assert float(np.max(rep.errors)) <= 1e-12
    assert rep.verdict(0)


def test_scan_negative_norm_rejects_all_linear(l2_2):
    # f(x) = -||x||: no linear map fits at any scale at the origin
    f = SumFn([DistFn(l2_2, np.zeros(2))], [-1.0])
    cands = [LinOp.build(M, l2_2, lp_space(1, 2))
             for M in (np.zeros((1, 2)), np.array([[1.0, 0.0]]),
                       np.array([[-1.0, 0.0]]), np.array([[0.0, 0.6]]))]
    rep = scan_derivative_set(f, [0.0, 0.0], cands, [0.5, 0.25, 0.125, 0.0625])
    for a in range(len(cands)):
        assert not rep.verdict(a, tol=0.1)


def test_scan_triangle_bound_between_operators(l2_2, rng):
    f = SumFn([DistFn(l2_2, np.zeros(2))], [-1.0])
    cod = lp_space(1, 2)
    M1 = rng.normal(size=(1, 2)) * 0.3
    M2 = M1 + rng.normal(size=(1, 2)) * 0.05
    T1, T2 = (LinOp.build(M, l2_2, cod) for M in (M1, M2))
    rep = scan_derivative_set(f, [0.3, 0.1], [T1, T2], [0.1, 0.05], seed=3)
    gap = float(np.max(np.abs(rep.errors[0] - rep.errors[1])))
    assert gap <= T2.opnorm_ub + 1e-9 or gap <= LinOp.build(
        M1 - M2, l2_2, cod).opnorm_ub + 1e-9


def test_scan_domain_guard(l2_2):
    f = LinearFn(np.eye(2))
    T = LinOp.build(np.eye(2), l2_2, l2_2)
    Q = box_region([0.0, 0.0], [1.0, 1.0])
    with pytest.raises(DomainError):
        scan_derivative_set(f, [0.9, 0.5], [T], [0.5], Q=Q)


def test_lip_estimate_scaled_identity(l2_2):
    f = LinearFn(0.7 * np.eye(2))
    Q = box_region([-1, -1], [1, 1])
    est, wit = lip_estimate(f, Q, pairs=2000, seed=0, dom=l2_2, cod=l2_2)
    assert est == pytest.approx(0.7, rel=1e-9)
    x, y = wit
    fx, fy = f(x), f(y)
    assert float(np.linalg.norm(fx - fy)) == pytest.approx(
        0.7 * float(np.linalg.norm(x - y)), rel=1e-9)


def test_dini_linear_flag_false():
    f = LinearFn(np.array([[0.5, 0.0]]))
    rep = dini_check(f, [0.2, 0.1], [1.0, 0.0], [2.0 ** -k for k in range(1, 12)])
    assert rep.lower_plus == pytest.approx(0.5, abs=1e-9)
    assert not rep.empty_flag


def test_dini_negative_norm_flag_true(l2_2):
    f = SumFn([DistFn(l2_2, np.zeros(2))], [-1.0])
    rep = dini_check(f, [0.0, 0.0], [1.0, 0.0], [2.0 ** -k for k in range(1, 20)])
    assert rep.lower_plus == pytest.approx(-1.0, abs=1e-9)
    assert rep.lower_minus == pytest.approx(-1.0, abs=1e-9)
    assert rep.empty_flag


def test_fd_jacobian_polynomial():
    # f(x, y) = (x^2 + y, x y) has an analytic Jacobian oracle
    class Poly(LinearFn):
        def __init__(self):
            super().__init__(np.zeros((2, 2)))

        def eval(self, X):
            return np.stack([X[:, 0] ** 2 + X[:, 1], X[:, 0] * X[:, 1]], axis=1)

    f = Poly()
    x = np.array([0.4, -0.3])
    J = fd_jacobian(f, x, 1e-5)
    want = np.array([[2 * x[0], 1.0], [x[1], x[0]]])
    assert np.allclose(J, want, atol=1e-8)


def test_c1_check_passes_smooth_fails_kink(l2_2):
    lin = LinearFn(np.array([[0.2, -0.1]]))
    ok, worst, _ = c1_check(lin, None, [[0.0, 0.0], [0.3, 0.2]])
    assert ok and worst <= 1e-8
    kink = DistFn(l2_2, np.zeros(2))
    ok2, worst2, pt = c1_check(kink, None, [[0.0, 0.0]])
    assert not ok2


def test_c1_check_mollified_kink(l1_2, l2_2):
    kink = DistFn(l2_2, np.zeros(2))
    sm = mollify(kink, MollifierSpec(0.1, 2, order=12))
    pts = np.random.default_rng(0).uniform(-1, 1, (15, 2))
    ok, worst, _ = c1_check(sm, None, pts, steps=(1e-3, 5e-4))
    assert ok, worst
