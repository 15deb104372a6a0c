from fractions import Fraction

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from pytest import raises

from oracles import dyadic_rational
from roughmax.dyadic import DyadicCube
from roughmax.errors import ParameterError
from roughmax.grid import CellGrid, SampledFunctions
from roughmax.operators import dyadic_maximal
from roughmax.profile import ExponentProfile
from roughmax.sparse import SparseFamily, build_sparse, sparse_norm_bound, verify_sparse

DIMS = [(1, 1, 0.0, 4), (2, 1, 0.5, 3), (1, 2, 0.5, 1), (2, 2, 1.0, 1)]


def _random_case(seed, dims):
    m, n, alpha, L = dims
    rng = np.random.default_rng(seed)
    g = CellGrid(n, int(rng.integers(0, 2)), L)
    f = dyadic_rational(rng, (m,) + g.shape, zero_prob=float(rng.choice([0.0, 0.5, 0.9])))
    return SampledFunctions(g, f), ExponentProfile(m, n, alpha, (3.0,) * m)


def test_quarter_indicator_family():
    g = CellGrid(1, 0, 3)
    f = (g.centers(axis_only=True) < 0.25).astype(float)
    S = build_sparse(SampledFunctions(g, f), ExponentProfile(1, 1, 0.0, (2.0,)), a=4)
    assert sorted(S.levels) == [-2, -1]
    (q2,), (q1,) = S.levels[-2], S.levels[-1]
    # the function vanishes outside the box, so the coarse level is the parent [0, 2) with average 1/8
    assert (q2.lower(), q2.side, S.averages[-2]) == ((Fraction(0),), Fraction(2), [0.125])
    assert (q1.lower(), q1.side, S.averages[-1]) == ((Fraction(0),), Fraction(1, 2), [0.5])
    assert verify_sparse(S).passed


def test_zero_function_gives_empty_family():
    g = CellGrid(1, 0, 2)
    fs = SampledFunctions(g, np.zeros(g.shape))
    P = ExponentProfile(1, 1, 0.5, (1.5,))
    S = build_sparse(fs, P)
    assert len(S) == 0 and verify_sparse(S).passed
    nb = sparse_norm_bound(S, np.ones(g.shape), P)
    assert nb["sparse_sum"] == nb["direct"] == 0 and nb["within"]


def test_three_quarter_covered_cube_fails_half_check():
    g = CellGrid(1, 0, 3)
    top = DyadicCube((0,), 0, (0,))
    kids = [DyadicCube((0,), 2, (j,)) for j in range(3)]
    S = SparseFamily(g, (0,), 4, 0.0, {0: [top], 1: kids}, {0: [1.0], 1: [2.0] * 3})
    v = verify_sparse(S)
    assert not v.passed
    assert ("half", 0, 0) in [(c, t, j) for c, t, j, _ in v.failures]


def test_overlapping_cubes_fail_disjointness():
    g = CellGrid(1, 0, 3)
    S = SparseFamily(g, (0,), 4, 0.0, {0: [DyadicCube((0,), 0, (0,)), DyadicCube((0,), 1, (1,))]}, {0: [1.0, 1.0]})
    assert "disjoint" in [c for c, *_ in verify_sparse(S).failures]


def test_stray_cube_fails_nesting():
    g = CellGrid(1, 0, 3)
    S = SparseFamily(g, (0,), 4, 0.0, {0: [DyadicCube((0,), 1, (0,))], 1: [DyadicCube((0,), 2, (3,))]},
                     {0: [1.0], 1: [1.0]})
    assert "nested" in [c for c, *_ in verify_sparse(S).failures]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(DIMS), st.integers(0, 1))
def test_built_families_are_sparse(seed, dims, b):
    fs, P = _random_case(seed, dims)
    S = build_sparse(fs, P, beta=(b,) * fs.grid.n)
    v = verify_sparse(S)
    assert v.passed, v.failures


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(DIMS))
def test_level_sets_and_coverage(seed, dims):
    fs, P = _random_case(seed, dims)
    S = build_sparse(fs, P)
    md = dyadic_maximal(fs, P, S.beta)
    if len(S) == 0:
        return
    ts = sorted(S.levels)
    for t in ts:
        assert np.array_equal(S.omega_mask(t), md > S.threshold(t))
        for q, avg in zip(S.levels[t], S.averages[t]):
            sl = q.to_cube(fs.grid).slices(fs.grid)
            assert np.all(md[sl] >= avg)
    carriers = np.zeros(fs.grid.shape, dtype=bool)
    for t in ts:
        carriers |= S.omega_mask(t) & ~S.omega_mask(t + 1)
    assert np.array_equal(carriers, md > S.threshold(ts[0]))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(DIMS[:2]))
def test_norm_bound_brackets_direct_norm(seed, dims):
    fs, P = _random_case(seed, dims)
    rng = np.random.default_rng(seed)
    S = build_sparse(fs, P)
    nb = sparse_norm_bound(S, np.exp(rng.normal(size=fs.grid.shape)), P)
    assert nb["within"]
    assert nb["sparse_sum"] >= nb["direct"]


def test_quarter_indicator_norm_bound():
    g = CellGrid(1, 0, 3)
    fs = SampledFunctions(g, (g.centers(axis_only=True) < 0.25).astype(float))
    P = ExponentProfile(1, 1, 0.0, (2.0,))
    S = build_sparse(fs, P, a=4)
    nb = sparse_norm_bound(S, np.ones(g.shape), P)
    # direct: M^d is 1, 1/2, 1/4 on the three quarters-and-half pieces
    assert np.isclose(nb["direct"], 0.25 + 0.25 * 0.25 + 0.5 * 0.0625)
    assert nb["sparse_sum"] >= nb["direct"]


def test_norm_bound_rejects_other_data():
    g = CellGrid(1, 0, 2)
    P = ExponentProfile(1, 1, 0.0, (2.0,))
    S = build_sparse(SampledFunctions(g, np.ones(g.shape)), P)
    with raises(ParameterError):
        sparse_norm_bound(S, np.ones(g.shape), P, SampledFunctions(g, 2 * np.ones(g.shape)))


def test_bad_stopping_base():
    g = CellGrid(1, 0, 2)
    with raises(ParameterError):
        build_sparse(SampledFunctions(g, np.ones(g.shape)), ExponentProfile(1, 1, 0.0, (2.0,)), a=3)
