import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from pytest import mark, raises

from oracles import all_inbox_cubes, dyadic_cubes_rational
from roughmax.dyadic import all_betas
from roughmax.errors import BudgetError, HypothesisError, ParameterError
from roughmax.families import all_cubes_family, cube_min, dyadic_family, explicit_family, family_from_name
from roughmax.grid import CellGrid, Cube
from roughmax.profile import ExponentProfile, conjugate


def _brute_sup(grid, cubes, value):
    out = np.full(grid.shape, -np.inf)
    for c in cubes:
        sl = c.slices(grid)
        out[sl] = np.maximum(out[sl], value(c))
    return out


@mark.parametrize("clip", ["intersect", "inside"])
@mark.parametrize("n, K, L", [(1, 0, 3), (2, 0, 1), (1, 1, 1)])
def test_dyadic_family_matches_rational_enumeration(clip, n, K, L):
    g = CellGrid(n, K, L)
    fam = dyadic_family(g, clip=clip)
    got = sorted((tuple(int(v) for v in c.lo), c.side) for c in fam.cubes())
    want = []
    for beta in all_betas(n):
        for k, lo, side in dyadic_cubes_rational(g, beta, inside=clip == "inside"):
            if clip == "intersect" or k >= -K:
                want.append((lo, side))
    assert got == sorted(want)
    assert fam.all_inside() == (clip == "inside")


@mark.parametrize("n, K, L", [(1, 0, 2), (2, 0, 1)])
def test_all_cubes_family_enumerates_every_inside_cube(n, K, L):
    g = CellGrid(n, K, L)
    got = sorted((tuple(int(v) for v in c.lo), c.side) for c in all_cubes_family(g).cubes())
    assert got == sorted(all_inbox_cubes(g))


def test_all_cubes_budget():
    with raises(BudgetError):
        all_cubes_family(CellGrid(2, 0, 5), budget=10**5)


def test_family_names():
    g = CellGrid(1, 0, 1)
    assert family_from_name(g, "all-cubes").description["kind"] == "all-cubes"
    with raises(ParameterError):
        family_from_name(g, "balls")


@settings(max_examples=20)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["dyadic", "all", "explicit"]))
def test_sup_field_matches_brute_force(seed, kind):
    rng = np.random.default_rng(seed)
    g = CellGrid(2, 0, 1)
    if kind == "dyadic":
        fam = dyadic_family(g)
    elif kind == "all":
        fam = all_cubes_family(g)
    else:
        fam = explicit_family(g, [Cube(tuple(rng.integers(-2, 6, 2)), int(rng.integers(1, 5))) for _ in range(7)])
    weights = rng.random((g.cells_per_side + 20,) * 2)

    def value(c):
        return weights[c.lo[0] + 10, c.lo[1] + 10] * c.side

    got = fam.sup_field(lambda lo, side: weights[lo[:, 0] + 10, lo[:, 1] + 10] * side)
    assert np.array_equal(got, _brute_sup(g, list(fam.cubes()), value))


def test_cube_min():
    f = np.arange(36.0).reshape(6, 6)
    lo = np.array([[0, 0], [2, 3], [4, 4]])
    assert list(cube_min(f, lo, 2)) == [0.0, 15.0, 28.0]


def test_union_and_order():
    g = CellGrid(1, 0, 1)
    a, b = dyadic_family(g, clip="inside"), all_cubes_family(g)
    assert len(a.union(b)) == len(a) + len(b)
    with raises(ParameterError):
        a.union(all_cubes_family(CellGrid(1, 0, 2)))


# ---------------------------------------------------------------- profile


@given(st.floats(1.0001, 1e6))
def test_conjugate_is_an_involution(p):
    assert np.isclose(conjugate(conjugate(p)), p, rtol=1e-9)
    assert np.isclose(1 / p + 1 / conjugate(p), 1.0)


def test_conjugate_endpoints():
    assert conjugate(1) == np.inf and conjugate(np.inf) == 1.0


def test_profile_derived_exponents():
    P = ExponentProfile(2, 1, 0.5, (2.0, 2.0))
    assert P.p == 1.0 and P.q == 2.0
    assert P.p_primes == (2.0, 2.0)
    assert np.allclose(P.q_list, (4.0, 4.0))
    assert np.isclose(P.q_shift(0.25), 4.0) and np.isclose(P.q_shift(-0.25), 4 / 3)


@mark.parametrize("args", [(1, 1, 1.0, (2.0,)), (2, 1, 0.0, (0.5, 2.0)), (1, 1, 0.0, (2.0,), 1.0)])
def test_profile_rejects_out_of_range(args):
    with raises(HypothesisError):
        ExponentProfile(*args)


def test_strong_range_message_names_condition():
    with raises(HypothesisError, match="1/m < p < n/alpha"):
        ExponentProfile(1, 1, 0.5, (3.0,)).require_strong()
    with raises(HypothesisError, match="1 < p_i"):
        ExponentProfile(2, 1, 0.5, (1.0, 2.0)).require_strong()


def test_weak_range_allows_all_ones_endpoint():
    ExponentProfile(2, 1, 0.5, (1.0, 1.0)).require_weak()
    with raises(HypothesisError):
        ExponentProfile(1, 1, 0.5, (3.0,)).require_weak()


def test_rough_range():
    ExponentProfile(1, 1, 0.0, (4.0,), s=2.0).require_rough()
    with raises(HypothesisError, match="s'"):
        ExponentProfile(1, 1, 0.0, (1.5,), s=2.0).require_rough()
