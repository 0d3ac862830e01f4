import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lipforge.errors import DescriptorError
from lipforge.spaces import (Functional, LinOp, NormedSpace, OperatorFamily,
                             cyl_constant, dense_ball_sequence, lp_space,
                             op_norm)

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
vec2 = st.tuples(finite, finite).map(np.array)


def test_lp_norms_match_numpy_oracle(rng):
    X = rng.normal(size=(50, 3))
    for p, ord_ in ((1, 1), (2, 2), ("inf", np.inf)):
        sp = lp_space(3, p)
        want = np.linalg.norm(X, ord=ord_, axis=1)
        assert np.allclose(np.asarray(sp.norm(X)), want, rtol=0, atol=1e-12)


def test_weighted_norm(rng):
    # weighted lp: (sum_i w_i |x_i|^p)^(1/p)
    sp = NormedSpace(2, {"kind": "weighted-lp", "p": 2, "weights": [2.0, 0.5]})
    x = np.array([[1.0, 2.0]])
    want = np.sqrt(2.0 * 1.0 ** 2 + 0.5 * 2.0 ** 2)
    assert np.isclose(float(sp.norm(x)[0]), want)


def test_polyhedral_square_equals_linf(rng):
    verts = [[1, 1], [1, -1], [-1, 1], [-1, -1]]
    sp = NormedSpace(2, {"kind": "polyhedral", "vertices": verts})
    X = rng.normal(size=(40, 2))
    want = np.max(np.abs(X), axis=1)
    assert np.allclose(np.asarray(sp.norm(X)), want, atol=1e-9)


def test_bad_descriptor_rejected():
    with pytest.raises(DescriptorError):
        NormedSpace(2, {"kind": "nonsense"})


@settings(max_examples=25, deadline=None)
@given(x=vec2, y=vec2)
def test_triangle_inequality(x, y):
    for p in (1, 2, "inf"):
        sp = lp_space(2, p)
        nx = float(sp.norm(x))
        ny = float(sp.norm(y))
        nxy = float(sp.norm(x + y))
        assert nxy <= nx + ny + 1e-9 * (1 + nx + ny)


@settings(max_examples=25, deadline=None)
@given(x=vec2, c=st.floats(-100, 100, allow_nan=False))
def test_homogeneity(x, c):
    for p in (1, 2, "inf"):
        sp = lp_space(2, p)
        lhs = float(sp.norm(c * x))
        rhs = abs(c) * float(sp.norm(x))
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)


def test_dual_norm_analytic():
    # dual of lp is lq with 1/p + 1/q = 1
    c = np.array([3.0, -4.0])
    cases = ((1, np.inf), (2, 2), ("inf", 1))
    for p, q in cases:
        f = Functional(c, lp_space(2, p))
        assert f.dual_norm == pytest.approx(np.linalg.norm(c, ord=q), rel=1e-9)


def test_attain_dir_attains(rng):
    for p in (1, 2, "inf"):
        sp = lp_space(2, p)
        c = rng.normal(size=2)
        f = Functional(c, sp)
        v = np.asarray(f.attain_dir, dtype=float)
        assert float(sp.norm(v)) == pytest.approx(1.0, abs=1e-9)
        assert float(c @ v) == pytest.approx(f.dual_norm, rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(x=vec2)
def test_dual_inequality(x):
    c = np.array([0.7, -1.3])
    for p in (1, 2, "inf"):
        sp = lp_space(2, p)
        f = Functional(c, sp)
        assert abs(float(c @ x)) <= f.dual_norm * float(sp.norm(x)) + 1e-6


def test_linop_bounds_bracket_svd_oracle(rng):
    sp = lp_space(3, 2)
    for _ in range(5):
        M = rng.normal(size=(3, 3))
        true = np.linalg.svd(M, compute_uv=False)[0]
        T = LinOp.build(M, sp, sp)
        assert T.opnorm_lb <= true + 1e-9
        assert T.opnorm_ub >= true - 1e-9
        assert T.opnorm_ub - T.opnorm_lb <= 1e-6 * max(1.0, true)


def test_linop_scaled(rng):
    sp = lp_space(2, 2)
    T = LinOp.build(rng.normal(size=(2, 2)), sp, sp)
    S = T.scaled(0.5)
    assert np.allclose(S.matrix, 0.5 * T.matrix)
    assert S.opnorm_ub == pytest.approx(0.5 * T.opnorm_ub, rel=1e-9)


def test_cyl_identity_l2_is_one():
    sp = lp_space(2, 2)
    T = LinOp.build(np.eye(2), sp, sp)
    assert cyl_constant(T) == pytest.approx(1.0, abs=1e-6)


def test_cyl_at_least_norm(rng):
    for _ in range(5):
        dom = lp_space(2, rng.choice([1, 2]))
        cod = lp_space(2, 2)
        T = LinOp.build(rng.normal(size=(2, 2)) * 0.5, dom, cod)
        assert cyl_constant(T) >= T.opnorm_lb - 1e-9


def test_cyl_basis_reconstructs(rng):
    sp = lp_space(2, 2)
    T = LinOp.build(np.array([[0.5, 0.0], [0.0, 0.0]]), sp, sp)
    _, ws, duals = cyl_constant(T, return_basis=True)
    recon = sum(np.outer(w, d @ T.matrix) for w, d in zip(ws, duals))
    assert np.allclose(recon, T.matrix, atol=1e-9)


def test_dense_ball_sequence_contracts_and_is_deterministic():
    sp = lp_space(2, 2)
    fam = OperatorFamily([LinOp.build(np.eye(2), sp, sp),
                          LinOp.build(np.array([[0.0, 1.0], [0.0, 0.0]]), sp, sp)])
    seq1 = [dense_ball_sequence(fam, n).matrix for n in range(1, 8)]
    seq2 = [dense_ball_sequence(fam, n).matrix for n in range(1, 8)]
    for a, b in zip(seq1, seq2):
        assert np.array_equal(a, b)
    for n in range(1, 8):
        T = dense_ball_sequence(fam, n)
        assert T.opnorm_ub < 1.0


def test_op_norm_diag_linf():
    sp = lp_space(2, "inf")
    lb, ub, _ = op_norm(np.diag([2.0, -3.0]), sp, sp)
    assert lb <= 3.0 + 1e-9 <= ub + 2e-9
    assert ub - lb < 1e-6
