from fractions import Fraction

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from pytest import mark, raises

from oracles import cube_sums, dyadic_rational
from roughmax.errors import DomainError, ParameterError
from roughmax.grid import (CellGrid, Cube, SampledFunctions, SummedAreaTable, integrate, load_functions,
                           lp_norm, product_average, product_average_from_sums, read_grid_file,
                           save_functions, weak_norm, write_grid_file)


@mark.parametrize("K, L, N", [(0, 0, 3), (0, 3, 24), (1, 2, 24), (2, -1, 6), (0, 5, 96)])
def test_cell_count_and_width(K, L, N):
    g = CellGrid(1, K, L)
    assert g.cells_per_side == N
    assert g.width_exact * N == Fraction(2) ** K


def test_grid_rejects_bad_parameters():
    with raises(ParameterError):
        CellGrid(4, 0, 1)
    with raises(ParameterError):
        CellGrid(1, 0, -1)


def test_cell_of_point_and_domain():
    g = CellGrid(2, 0, 1)
    assert g.cell_of_point([0.0, 0.99]) == (0, 5)
    with raises(DomainError):
        g.cell_of_point([1.0, 0.5])


@given(st.integers(0, 2), st.integers(0, 4), st.integers(0, 1), st.integers(-3, 40))
def test_dyadic_cubes_are_cell_aligned(K, L, b, j):
    g = CellGrid(1, K, L)
    for k in range(-(K + 2), L + 1):
        side = Fraction(2) ** (-k)
        lower = side * (j + (1 if k % 2 == 0 else -1) * Fraction(b, 3))
        assert (lower / g.width_exact).denominator == 1
        assert (side / g.width_exact).denominator == 1


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), st.integers(1, 2))
def test_summed_area_matches_slice_sums(seed, n):
    rng = np.random.default_rng(seed)
    g = CellGrid(n, 0, 2)
    f = dyadic_rational(rng, g.shape)
    sat = SummedAreaTable(f)
    N = g.cells_per_side
    for _ in range(20):
        side = int(rng.integers(1, N + 1))
        lo = rng.integers(-side + 1, N, size=n)
        got = sat.box_sum(lo, lo + side)
        assert got == cube_sums(f[None], tuple(int(v) for v in lo), side)[0]


def test_integrate_is_exact_for_dyadic_data(rng):
    g = CellGrid(1, 0, 3)
    f = dyadic_rational(rng, g.shape)
    for lo in range(0, 20, 3):
        for side in (1, 2, 4):
            exact = sum(Fraction(float(v)) for v in f[lo:lo + side]) * g.width_exact
            # the cell sum is exact; only the final multiplication by h rounds
            assert abs(Fraction(integrate(g, f, Cube((lo,), side))) - exact) <= exact * Fraction(1, 2**52)


def test_integrate_outside_box():
    g = CellGrid(1, 0, 1)
    f = np.ones(g.shape)
    with raises(DomainError):
        integrate(g, f, Cube((-1,), 3))
    assert integrate(g, f, Cube((-1,), 3), zero_extend=True) == 2 * g.h


def test_product_average_of_ones_on_unit_box():
    g = CellGrid(1, 0, 3)
    fs = SampledFunctions(g, np.ones((2,) + g.shape))
    for alpha in (0.0, 0.5, 1.5):
        assert product_average(fs, Cube((0,), 24), alpha) == 1.0


def test_product_average_scaling_law():
    # constant data: the average is the volume to the power alpha/n
    g = CellGrid(2, 0, 2)
    fs = SampledFunctions(g, np.ones((2,) + g.shape))
    for side in (1, 3, 6):
        v = product_average(fs, Cube((0, 0), side), 0.8)
        assert np.isclose(v, (side * g.h) ** 0.8, rtol=1e-14)


def test_product_average_rejects_bad_alpha():
    g = CellGrid(1, 0, 1)
    fs = SampledFunctions(g, np.ones(g.shape))
    with raises(ParameterError):
        product_average(fs, Cube((0,), 2), 1.0)


def test_alpha_zero_parent_child_comparison_is_exact():
    g = CellGrid(1, 0, 3)
    # child mean 1/2 and parent mean 1/2 must compare equal bit for bit
    v_child = product_average_from_sums(g, np.array([[3.0]]), 6, 0.0)[0]
    v_parent = product_average_from_sums(g, np.array([[6.0]]), 12, 0.0)[0]
    assert v_child == v_parent == 0.5


def test_sampled_functions_validation():
    g = CellGrid(1, 0, 1)
    with raises(ParameterError):
        SampledFunctions(g, -np.ones(g.shape))
    with raises(ParameterError):
        SampledFunctions(g, np.ones(g.shape), np.zeros(g.shape))
    with raises(ParameterError):
        SampledFunctions(g, np.ones(5))
    with raises(ParameterError):
        SampledFunctions(g, np.full(g.shape, np.nan))


def test_lp_norm_values():
    g = CellGrid(1, 0, 1)
    f = np.array([0, 1, 2, 0, 0, 3.0])
    assert np.isclose(lp_norm(g, f, p=1), 6 / 6)
    assert np.isclose(lp_norm(g, f, p=2), np.sqrt(14 / 6))
    assert lp_norm(g, f, p=np.inf) == 3.0


def _weak_norm_oracle(f, w, h, q):
    best = 0.0
    vals = np.unique(f[f > 0])
    for v in vals:
        for t in (v * (1 - 1e-13), v):
            best = max(best, t * (np.sum(w[f > t]) * h) ** (1 / q))
    return best


@settings(max_examples=60)
@given(st.lists(st.integers(0, 5), min_size=6, max_size=6), st.floats(0.5, 4))
def test_weak_norm_matches_threshold_scan(ints, q):
    g = CellGrid(1, 0, 1)
    f = np.array(ints, dtype=float)
    w = np.arange(1, 7, dtype=float)
    got = weak_norm(g, f, w, q)
    assert np.isclose(got, _weak_norm_oracle(f, w, g.h, q), rtol=1e-11)
    assert got <= lp_norm(g, f, w, q) * (1 + 1e-12)


finite = st.floats(allow_nan=False, allow_infinity=False, allow_subnormal=True)


@settings(max_examples=30)
@given(st.lists(finite, min_size=12, max_size=12), st.sampled_from([".bin", ".csv"]))
def test_grid_file_round_trip_is_bit_exact(tmp_path_factory, vals, suffix):
    g = CellGrid(1, 0, 1)
    fields = np.array(vals).reshape(2, 6)
    path = tmp_path_factory.mktemp("gf") / f"data{suffix}"
    write_grid_file(path, g, 1, fields)
    g2, m2, back = read_grid_file(path)
    assert g2 == g and m2 == 1
    assert back.tobytes() == fields.tobytes()


def test_truncated_binary_file_is_rejected(tmp_path):
    g = CellGrid(1, 0, 1)
    path = tmp_path / "x.bin"
    write_grid_file(path, g, 1, np.ones((1, 6)))
    path.write_bytes(path.read_bytes()[:-8])
    with raises(ParameterError):
        read_grid_file(path)


def test_function_bundle_round_trip(tmp_path, rng):
    g = CellGrid(2, 0, 1)
    fs = SampledFunctions(g, rng.random((2,) + g.shape), 1 + rng.random((2,) + g.shape))
    save_functions(tmp_path / "b.bin", fs)
    back = load_functions(tmp_path / "b.bin")
    assert back.digest() == fs.digest()
