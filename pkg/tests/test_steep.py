import numpy as np
import pytest

from lipforge.errors import HypothesisError, InputError
from lipforge.fn import LinearFn, PlateauFn, ZeroFn
from lipforge.regions import (BoxUnion, CurveSpec, EmptyRegion, LatticeDP,
                              box_region, gen_four_corner)
from lipforge.spaces import Functional, LinOp, lp_space
from lipforge.steep import (SteepSpec, bmgame_step_pu, build_psi_map,
                            build_pu_map, build_sequence, build_steep,
                            check_steep_properties, enumerate_steep_oracle,
                            pu_map_certificate, slope_radius)


def test_steep_zero_functional(l2_2):
    P = Functional([0.0, 0.0], l2_2)
    g = build_steep(SteepSpec(box_region([0, 0], [1, 1]), P, 0.3, 0.1))
    assert isinstance(g, ZeroFn)
    assert g.gap == 0.0


def test_steep_empty_region(l2_2):
    P = Functional([1.0, 0.0], l2_2)
    g = build_steep(SteepSpec(EmptyRegion(2), P, 0.3, 0.1))
    assert isinstance(g, ZeroFn)


def test_steep_strip_unit_increment(l2_2):
    # (B): inside the strip the increment along v_P is exact
    P = Functional([1.0, 0.0], l2_2)
    G = box_region([-0.1, -2.0], [1.1, 2.0])
    spec = SteepSpec(G, P, 0.3, 0.05)
    g = build_steep(spec)
    d = float(g(np.array([1.0, 0.0]))[0] - g(np.array([0.0, 0.0]))[0])
    assert abs(d - 1.0) <= 3 * spec.h


def test_steep_scales_with_functional_norm(l2_2):
    G = box_region([-0.1, -1.0], [1.1, 1.0])
    g1 = build_steep(SteepSpec(G, Functional([1.0, 0.0], l2_2), 0.3, 0.05))
    g2 = build_steep(SteepSpec(G, Functional([0.5, 0.0], l2_2), 0.3, 0.05))
    X = np.random.default_rng(0).uniform(-0.5, 1.5, (50, 2))
    assert np.allclose(g2.eval(X), 0.5 * g1.eval(X), atol=1e-9)


def test_dp_equals_exhaustive_oracle(l2_2, rng):
    for trial in range(3):
        nb = rng.integers(1, 4)
        lo = rng.uniform(0, 0.7, (nb, 2))
        hi = lo + rng.uniform(0.1, 0.3, (nb, 2))
        G = BoxUnion(lo, hi)
        c = rng.normal(size=2)
        c /= np.linalg.norm(c)
        P = Functional(c, l2_2)
        alpha = float(rng.uniform(0.2, 0.6))
        cs = CurveSpec(P, alpha, 0.25, k=2)
        bbox = (np.array([0.0, 0.0]), np.array([1.0, 1.0]))
        dp = LatticeDP(G, cs, bbox=bbox, pad=0)
        oracle = enumerate_steep_oracle(G, cs, bbox)
        assert dp.value() == pytest.approx(oracle, abs=1e-9)


def test_steep_properties_within_gap(l2_2):
    P = Functional([0.6, 0.8], l2_2)
    G = BoxUnion(np.array([[0.0, 0.0], [0.5, 0.4]]),
                 np.array([[0.4, 0.3], [0.9, 0.9]]))
    spec = SteepSpec(G, P, 0.35, 0.05)
    g = build_steep(spec)
    props = check_steep_properties(g, spec, n=200, seed=1)
    for name, (res, bound) in props.items():
        assert res <= bound + 1e-9, (name, res, bound)


def test_pu_map_trivial_cases(l2_2):
    T0 = LinOp.build(np.zeros((2, 2)), l2_2, l2_2)
    U = box_region([-1, -1], [2, 2], open_=True)
    E = gen_four_corner(1)
    g, H = build_pu_map(E, U, T0, 0.2)
    assert isinstance(g, ZeroFn)
    assert not isinstance(H, EmptyRegion)
    g2, H2 = build_pu_map(EmptyRegion(2), U,
                          LinOp.build(0.5 * np.eye(2), l2_2, l2_2), 0.2)
    assert isinstance(g2, ZeroFn)
    assert isinstance(H2, EmptyRegion)


def test_pu_map_small_instance(l2_2):
    # coarse but complete pipeline on a level-2 set with a modest budget
    E = gen_four_corner(2)
    U = box_region([-2.0, -2.0], [3.0, 3.0], open_=True)
    T = LinOp.build(np.array([[0.15, 0.0], [0.0, 0.0]]), l2_2, l2_2)
    g, H = build_pu_map(E, U, T, 0.25, cover_budget=2)
    cert = pu_map_certificate(g, H, U, T, 0.25, n_points=40, seed=0)
    assert cert["sup_ok"] and cert["support_ok"] and cert["fd_ok"]
    assert cert["lip_ok"], cert
    assert cert["gap"] < 0.1


def test_psi_map_sandwich_and_equality(l2_2, rng):
    E = gen_four_corner(2)
    T = LinOp.build(np.array([[0.3, 0.0], [0.0, 0.0]]), l2_2, l2_2)
    phi = PlateauFn([-0.6, -0.6], [1.6, 1.6], [-0.3, -0.3], [1.3, 1.3])
    f, psi, H = build_psi_map(E, 0.5, phi, T)
    assert psi.k >= 1
    X = rng.uniform(-1.0, 2.0, (10000, 2))
    psiv = psi.eval(X)
    phiv = phi.eval(X)[:, 0]
    assert np.all(psiv >= -1e-12)
    assert np.all(psiv <= phiv + 1e-12)
    inH = H.contains(X)
    assert np.allclose(psiv[inH], phiv[inH], atol=1e-12)
    # vanishes outside the eta-band around E
    off = ~np.all((X > -0.5) & (X < 1.5), axis=1)
    assert np.all(psiv[off] <= 1e-12)


def test_psi_map_zero_multiplier(l2_2):
    E = gen_four_corner(1)
    T = LinOp.build(0.4 * np.eye(2), l2_2, l2_2)
    f, psi, H = build_psi_map(E, 0.5, ZeroFn(2, 1), T)
    assert isinstance(f, ZeroFn)
    assert isinstance(H, EmptyRegion)


def test_psi_map_rescales_large_operator(l2_2):
    E = gen_four_corner(1)
    phi = PlateauFn([-0.6, -0.6], [1.6, 1.6], [-0.3, -0.3], [1.3, 1.3])
    T = LinOp.build(2.0 * np.eye(2), l2_2, l2_2)
    f, psi, H = build_psi_map(E, 0.5, phi, T)
    assert psi.k >= 1  # construction went through the rescaled branch


def test_build_sequence_trivial_and_zero_step(l2_2):
    E = gen_four_corner(1)
    H0 = box_region([-1, -1], [2, 2], open_=True)
    f0 = ZeroFn(2, 2)
    f0.lip_bound = 0.0
    assert len(build_sequence(E, H0, f0, 0.5, [])) == 1
    phi = PlateauFn([-0.6, -0.6], [1.6, 1.6], [-0.3, -0.3], [1.3, 1.3])
    T0 = LinOp.build(np.zeros((2, 2)), l2_2, l2_2)
    seq = build_sequence(E, H0, f0, 0.5, [(T0, phi, 0.1)])
    assert len(seq) == 2
    H1, f1, psi1 = seq[1]
    X = np.random.default_rng(0).uniform(-1, 2, (500, 2))
    assert np.allclose(f1.eval(X), f0.eval(X))


def test_sequence_sup_budget(l2_2, rng):
    E = gen_four_corner(2)
    H0 = box_region([-1, -1], [2, 2], open_=True)
    f0 = ZeroFn(2, 2)
    f0.lip_bound = 0.0
    phi = PlateauFn([-0.6, -0.6], [1.6, 1.6], [-0.3, -0.3], [1.3, 1.3])
    T = LinOp.build(np.array([[0.3, 0.0], [0.0, 0.0]]), l2_2, l2_2)
    seq = build_sequence(E, H0, f0, 0.5, [(T, phi, 0.05), (T, phi, 0.03)])
    X = rng.uniform(-1, 2, (5000, 2))
    dev = float(np.max(np.abs(seq[-1][1].eval(X) - f0.eval(X))))
    assert dev <= 0.05 + 0.03 + 1e-9


def test_bmgame_step_hypothesis_errors(l2_2):
    E = gen_four_corner(1)
    Q = box_region([-2, -2], [3, 3], open_=True)
    H = box_region([-1, -1], [2, 2], open_=True)
    ok_T = LinOp.build(0.3 * np.eye(2), l2_2, l2_2)
    bad_T = LinOp.build(1.2 * np.eye(2), l2_2, l2_2)
    f = LinearFn(0.2 * np.eye(2), lip_bound=0.2)
    with pytest.raises(HypothesisError):
        bmgame_step_pu(E, H, Q, 0.3, f, bad_T)
    steep_f = LinearFn(np.eye(2), lip_bound=1.0)
    with pytest.raises(HypothesisError):
        bmgame_step_pu(E, H, Q, 0.3, steep_f, ok_T)


def test_bmgame_step_linear_multiple(l2_2):
    # f = c T with c in (0,1): the correction restores T near E
    E = gen_four_corner(2)
    Q = box_region([-2.5, -2.5], [3.5, 3.5], open_=True)
    H = box_region([-0.1, -0.1], [1.1, 1.1], open_=True)
    T = LinOp.build(np.array([[0.3, 0.0], [0.0, 0.0]]), l2_2, l2_2)
    f = LinearFn(0.5 * T.matrix, lip_bound=0.15)
    theta = 0.4
    U, g, delta = bmgame_step_pu(E, H, Q, theta, f, T, seed=0)
    assert delta > 0
    rng = np.random.default_rng(1)
    X = rng.uniform(-2, 3, (5000, 2))
    dev = float(np.max(np.asarray(l2_2.norm(g.eval(X) - f.eval(X)))))
    assert dev <= theta + 1e-9
    # slope condition at a box center of E, with margin for perturbations
    x = E.lo[0] + (E.hi[0] - E.lo[0]) / 2
    for rho in (delta, delta / 2):
        Y = rho * np.array([[1.0, 0.0], [0.0, 1.0], [0.6, 0.8]])
        res = g.eval(x[None] + Y) - g.eval(x[None]) - Y @ T.matrix.T
        assert float(np.max(np.asarray(l2_2.norm(res)))) <= theta * rho


def test_slope_radius_linear_exact(l2_2):
    T = LinOp.build(np.array([[0.3, 0.1], [0.0, 0.2]]), l2_2, l2_2)
    f = LinearFn(T.matrix)
    E = gen_four_corner(1)
    assert slope_radius(f, E, T, 0.2) == pytest.approx(0.5)
