import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polybound.basis import gauss_legendre_rule, make_basis, make_node_set
from polybound.boxopt import optimize_values, reference_table
from polybound.bounder import (
    CoeffsFormatError,
    PolyCoeffs,
    bernstein_bounds,
    bound_1d,
    bound_adaptive,
    bound_tensor,
    brute_force_extrema,
    eval_on_grid,
    last_op_count,
    project_p1,
    read_coeffs,
    subdivide,
    write_coeffs,
)

B3 = make_basis("lobatto-nodal", 3)


@pytest.fixture(scope="module")
def t34():
    return reference_table(3, 4)


@pytest.fixture(scope="module")
def t35():
    return reference_table(3, 5)


def _rand_coeffs(dim, seed, p=3, family="lobatto-nodal"):
    rng = np.random.default_rng(seed)
    basis = make_basis(family, p)
    return PolyCoeffs(dim, basis, rng.standard_normal((p + 1,) * dim))


def test_project_p1_orthogonality():
    for seed in range(30):
        c = _rand_coeffs(1, seed)
        lin, fluct = project_p1(c)
        xg, wg = gauss_legendre_rule(6)
        vals = eval_on_grid(fluct, [xg])
        assert abs(wg @ vals) < 1e-12
        assert abs(wg @ (xg * vals)) < 1e-12


def test_project_p1_exact_on_linears():
    u = np.asarray(B3.nodes) * 2.0 - 0.5
    lin, fluct = project_p1(PolyCoeffs(1, B3, u))
    assert abs(lin.a0 + 0.5) < 1e-13 and abs(lin.a1 - 2.0) < 1e-13
    assert np.abs(fluct.u).max() < 1e-13


@given(st.integers(0, 10_000))
@settings(max_examples=60, deadline=None)
def test_bound_1d_sound_and_shift_scale_invariant(seed):
    table = reference_table(3, 4)
    c = _rand_coeffs(1, seed)
    nb = bound_1d(c, table)
    x = np.linspace(-1, 1, 2000)
    vals = eval_on_grid(c, [x])
    assert nb.global_min() <= vals.min() + 1e-12
    assert nb.global_max() >= vals.max() - 1e-12

    # bounds commute with affine changes of the polynomial values
    alpha, beta = 1.7, -2.3
    nb2 = bound_1d(PolyCoeffs(1, c.basis, alpha * c.u + beta), table)
    np.testing.assert_allclose(nb2.lower, alpha * nb.lower + beta, atol=1e-10)
    np.testing.assert_allclose(nb2.upper, alpha * nb.upper + beta, atol=1e-10)
    gap = nb.gap()
    np.testing.assert_allclose(nb2.gap(), alpha * gap, atol=1e-10)


def test_negative_scale_swaps_roles(t34):
    c = _rand_coeffs(1, 7)
    nb = bound_1d(c, t34)
    nb2 = bound_1d(PolyCoeffs(1, c.basis, -c.u), t34)
    np.testing.assert_allclose(nb2.lower, -nb.upper, atol=1e-12)
    np.testing.assert_allclose(nb2.upper, -nb.lower, atol=1e-12)


def test_linear_polynomials_get_tight_bounds(t34):
    # a purely linear polynomial has zero fluctuation: gap stays at the
    # epsilon floor, at most 2 N epsilon
    u = 0.75 - 0.4 * np.asarray(B3.nodes)
    nb = bound_1d(PolyCoeffs(1, B3, u), t34)
    assert nb.gap().max() <= 2 * B3.N * t34.epsilon + 1e-12


@given(st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_bound_tensor_2d_sound(seed):
    table = reference_table(3, 5)
    c = _rand_coeffs(2, seed)
    nb = bound_tensor(c, table)
    x = np.linspace(-1, 1, 120)
    vals = eval_on_grid(c, [x, x])
    assert nb.global_min() <= vals.min() + 1e-12
    assert nb.global_max() >= vals.max() - 1e-12


def test_bound_tensor_3d_sound_and_cost(t34):
    for seed in range(4):
        c = _rand_coeffs(3, seed)
        nb = bound_tensor(c, t34)
        x = np.linspace(-1, 1, 40)
        vals = eval_on_grid(c, [x, x, x])
        assert nb.global_min() <= vals.min() + 1e-12
        assert nb.global_max() >= vals.max() - 1e-12
    N, M = 4, 4
    budget = N**3 * M + N * M**3
    assert last_op_count() <= 3 * budget


def test_bound_tensor_separable_product(t35):
    # u(x, y) = x * y: node bounds must straddle the four corner values
    nodes = np.asarray(B3.nodes)
    U = np.outer(nodes, nodes)
    nb = bound_tensor(PolyCoeffs(2, B3, U), t35)
    assert nb.global_min() <= -1.0 + 1e-9
    assert nb.global_max() >= 1.0 - 1e-9
    # and not be wildly loose for so tame a polynomial
    assert nb.global_max() < 1.6


def test_bernstein_bounds_enclose_and_match_coeff_extremes():
    rng = np.random.default_rng(0)
    for dim in (1, 2):
        c = PolyCoeffs(dim, B3, rng.standard_normal((4,) * dim))
        lo, up = bernstein_bounds(c)
        x = np.linspace(-1, 1, 200 if dim == 1 else 60)
        vals = eval_on_grid(c, [x] * dim)
        assert lo <= vals.min() + 1e-12
        assert up >= vals.max() - 1e-12


def test_bernstein_high_order_warns():
    b10 = make_basis("lobatto-nodal", 10)
    c = PolyCoeffs(1, b10, np.random.default_rng(0).standard_normal(11))
    with pytest.warns(RuntimeWarning):
        bernstein_bounds(c)


def test_brute_force_underapproximates(t34):
    for seed in range(10):
        c = _rand_coeffs(1, seed)
        lo, up = brute_force_extrema(c, 10_000)
        dense = eval_on_grid(c, [np.linspace(-1, 1, 100_001)])
        assert lo >= dense.min() - 1e-9
        assert up <= dense.max() + 1e-9
        # polish should leave essentially no slack on smooth 1D data
        assert abs(lo - dense.min()) < 1e-7
        assert abs(up - dense.max()) < 1e-7


def test_subdivide_is_restriction():
    rng = np.random.default_rng(5)
    c = PolyCoeffs(2, B3, rng.standard_normal((4, 4)))
    sub = subdivide(c, [(-1.0, 0.0), (0.5, 1.0)])
    t = np.linspace(-1, 1, 13)
    xs = -1.0 + (t + 1) / 2
    ys = 0.5 + (t + 1) / 4
    np.testing.assert_allclose(
        eval_on_grid(sub, [t, t]),
        eval_on_grid(c, [xs, ys]),
        atol=1e-12,
    )


def test_subdivide_full_cell_is_identity():
    c = _rand_coeffs(1, 3)
    sub = subdivide(c, [(-1.0, 1.0)])
    np.testing.assert_allclose(sub.u, c.u, atol=1e-12)


def test_bound_adaptive_tightens_to_oracle(t34, t35):
    c = _rand_coeffs(2, 11)
    lo_ref, up_ref = brute_force_extrema(c, 200)
    widths = []
    for levels in (0, 2, 4):
        s = bound_adaptive(c, t34, tol=1e-12, max_levels=levels,
                           strategy="subdivide")
        assert s.global_min <= lo_ref + 1e-12
        assert s.global_max >= up_ref - 1e-12
        widths.append((lo_ref - s.global_min) + (s.global_max - up_ref))
    assert widths[2] < widths[0]
    assert widths[2] < 0.1 * max(widths[0], 1e-30) or widths[2] < 1e-6


def test_bound_adaptive_increase_m_strategy(t34, t35):
    c = _rand_coeffs(2, 13)
    s0 = bound_adaptive(c, [t34, t35], tol=1e-12, max_levels=1,
                        strategy="increase-M")
    s1 = bound_adaptive(c, t34, tol=1e-12, max_levels=0)
    assert s0.global_min >= s1.global_min - 1e-12
    assert s0.global_max <= s1.global_max + 1e-12


def test_bound_adaptive_converges_on_tame_input(t34):
    u = np.outer(np.ones(4), np.asarray(B3.nodes)) * 0.1 + 0.5
    c = PolyCoeffs(2, B3, u)
    s = bound_adaptive(c, t34, tol=1e-3, max_levels=3)
    assert s.converged


def test_coeffs_io_round_trip(tmp_path):
    for dim in (1, 2, 3):
        c = _rand_coeffs(dim, 21 + dim)
        path = tmp_path / f"c{dim}.txt"
        write_coeffs(c, path)
        back = read_coeffs(path)
        assert back.dim == dim and back.basis == c.basis
        np.testing.assert_allclose(back.u, c.u, atol=1e-15, rtol=0)


def test_coeffs_format_errors(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("wrong header\n")
    with pytest.raises(CoeffsFormatError):
        read_coeffs(p)
    p.write_text("polybound-coeffs v1\ndim=2 family=lobatto-nodal p=3\n1.0 2.0\n")
    with pytest.raises(CoeffsFormatError):
        read_coeffs(p)


def test_polycoeffs_shape_guard():
    with pytest.raises(ValueError):
        PolyCoeffs(2, B3, np.zeros((4, 5)))
    with pytest.raises(ValueError):
        PolyCoeffs(4, B3, np.zeros((4,) * 4))


def test_table_mismatch_rejected(t34):
    c = _rand_coeffs(1, 0, p=4)
    with pytest.raises(ValueError):
        bound_1d(c, t34)
