"""Independent brute-force references for the test-suite.

Nothing here reuses the package's summation or cube-enumeration code; cubes
are enumerated from first principles with exact rationals and sums are taken
with plain ``np.sum`` over slices.
"""

import itertools
from fractions import Fraction

import numpy as np

from roughmax.grid import product_average_from_sums


def dyadic_rational(rng, shape, denom=16, top=16, zero_prob=0.0):
    """Values ``k/denom`` with ``0 <= k <= top``; every partial sum is exact in float64."""
    vals = rng.integers(0, top + 1, size=shape) / denom
    if zero_prob:
        vals = vals * (rng.random(shape) >= zero_prob)
    return vals


def all_cells(grid):
    return list(itertools.product(range(grid.cells_per_side), repeat=grid.n))


def cube_sums(f, lo, side):
    """Sum of each field over ``lo + [0, side)**n`` clipped to the box."""
    N = f.shape[1]
    sl = tuple(slice(max(v, 0), max(min(v + side, N), 0)) for v in lo)
    return np.array([np.sum(fi[sl]) for fi in f])


def brute_maximal(grid, f, alpha, cubes):
    """Per cell, max over ``cubes`` (list of ``(lo, side)``) containing it, via the shared product formula."""
    out = np.zeros(grid.shape)
    N = grid.cells_per_side
    for lo, side in cubes:
        v = product_average_from_sums(grid, cube_sums(f, lo, side)[:, None], side, alpha)[0]
        sl = tuple(slice(max(a, 0), max(min(a + side, N), 0)) for a in lo)
        out[sl] = np.maximum(out[sl], v)
    return out


def all_inbox_cubes(grid):
    N = grid.cells_per_side
    for side in range(1, N + 1):
        for lo in itertools.product(range(N - side + 1), repeat=grid.n):
            yield lo, side


def dyadic_cubes_rational(grid, beta, inside=False):
    """Every ``D_beta`` cube meeting (or inside) the box at levels ``-(K+2)..L``, from the defining formula.

    Returns ``(k, lo_cells, side_cells)`` tuples, converting exact rational
    coordinates to cell units.
    """
    h = Fraction(1, 3 * 2**grid.L) if grid.L >= 0 else Fraction(2 ** (-grid.L), 3)
    box = Fraction(2) ** grid.K
    out = []
    for k in range(-(grid.K + 2), grid.L + 1):
        side = Fraction(2) ** (-k)
        sgn = 1 if k % 2 == 0 else -1
        per_axis = []
        for b in beta:
            shift = sgn * Fraction(b, 3)
            js = []
            j0 = int(np.floor(float(-1 - shift))) - 1
            j = j0
            while side * (j + shift) < box:
                lower = side * (j + shift)
                hi = lower + side
                ok = (lower >= 0 and hi <= box) if inside else (hi > 0 and lower < box)
                if ok:
                    js.append(lower)
                j += 1
            per_axis.append(js)
        for lowers in itertools.product(*per_axis):
            lo_cells = tuple(lw / h for lw in lowers)
            s_cells = side / h
            assert all(x.denominator == 1 for x in lo_cells) and s_cells.denominator == 1
            out.append((k, tuple(int(x) for x in lo_cells), int(s_cells)))
    return out
