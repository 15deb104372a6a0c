"""Shifted dyadic grids ``D_beta``, cube genealogy and the one-third covering search.

A cube of ``D_beta`` at level ``k`` is ``2**-k * ([0,1)**n + j + (-1)**k * beta)``
with ``beta`` in ``{0, 1/3}**n``.  Shifts are stored as bit tuples (1 means 1/3)
and all containment tests run on exact rationals or integer cell units.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import floor
from typing import Iterator, Sequence

import numpy as np

from .errors import RangeError
from .grid import CellGrid, Cube

Bits = tuple[int, ...]


def all_betas(n: int) -> list[Bits]:
    """Every shift in the fixed enumeration order (lexicographic in the bits)."""
    return list(itertools.product((0, 1), repeat=n))


def _sign(k: int) -> int:
    return 1 if k % 2 == 0 else -1


def _pow2(e: int) -> Fraction:
    return Fraction(2**e) if e >= 0 else Fraction(1, 2 ** (-e))


@dataclass(frozen=True, order=True)
class DyadicCube:
    beta: Bits
    k: int
    j: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.beta)

    @property
    def side(self) -> Fraction:
        return _pow2(-self.k)

    def lower(self) -> tuple[Fraction, ...]:
        s = _sign(self.k)
        return tuple(_pow2(-self.k) * (ji + s * Fraction(b, 3)) for ji, b in zip(self.j, self.beta))

    def contains(self, lower: Sequence[Fraction], side: Fraction) -> bool:
        """Whether the half-open cube ``lower + [0, side)**n`` lies inside this cube."""
        mine = self.lower()
        return all(a <= x and x + side <= a + self.side for a, x in zip(mine, lower))

    def cell_lo(self, grid: CellGrid) -> tuple[int, ...]:
        if self.k > grid.L:
            raise RangeError(f"level {self.k} is finer than the grid level {grid.L}")
        scale = 2 ** (grid.L - self.k)
        s = _sign(self.k)
        return tuple(scale * (3 * ji + s * b) for ji, b in zip(self.j, self.beta))

    def cell_side(self, grid: CellGrid) -> int:
        if self.k > grid.L:
            raise RangeError(f"level {self.k} is finer than the grid level {grid.L}")
        return 3 * 2 ** (grid.L - self.k)

    def to_cube(self, grid: CellGrid) -> Cube:
        return Cube(self.cell_lo(grid), self.cell_side(grid))

    def to_json(self) -> dict:
        return {"beta": list(self.beta), "k": self.k, "j": list(self.j)}

    @classmethod
    def from_json(cls, d: dict) -> "DyadicCube":
        return cls(tuple(d["beta"]), int(d["k"]), tuple(d["j"]))


def containing_cube(beta: Bits, k: int, point: Sequence[Fraction]) -> DyadicCube:
    """The level-``k`` cube of ``D_beta`` containing ``point``."""
    s = _sign(k)
    scale = _pow2(k)
    j = tuple(floor(Fraction(x) * scale - s * Fraction(b, 3)) for x, b in zip(point, beta))
    return DyadicCube(tuple(beta), k, j)


def children(q: DyadicCube, max_level: int | None = None) -> list[DyadicCube]:
    if max_level is not None and q.k + 1 > max_level:
        raise RangeError(f"children of a level-{q.k} cube exceed the finest level {max_level}")
    base = containing_cube(q.beta, q.k + 1, q.lower())
    out = []
    for offs in itertools.product((0, 1), repeat=q.n):
        out.append(DyadicCube(q.beta, q.k + 1, tuple(b + o for b, o in zip(base.j, offs))))
    return out


def parent(q: DyadicCube, min_level: int | None = None) -> DyadicCube:
    if min_level is not None and q.k - 1 < min_level:
        raise RangeError(f"parent of a level-{q.k} cube exceeds the coarsest level {min_level}")
    return containing_cube(q.beta, q.k - 1, q.lower())


def enclosing_dyadic(lower: Sequence, side) -> tuple[Bits, DyadicCube]:
    """A shifted dyadic cube containing the cube ``lower + [0, side)**n`` with side at most ``6 * side``.

    Shifts are scanned in :func:`all_betas` order and, within a shift, the
    candidate levels from finest to coarsest; the first admissible cube wins.
    Candidate side lengths are the powers of two in ``[side, 6 * side]``.
    """
    lower = tuple(Fraction(x) for x in lower)
    side = Fraction(side)
    n = len(lower)
    # levels k with side <= 2**-k <= 6*side, finest first
    k_hi = -_log2_floor(side)
    levels = [k for k in range(k_hi, k_hi - 4, -1) if side <= _pow2(-k) <= 6 * side]
    for beta in all_betas(n):
        for k in levels:
            cand = containing_cube(beta, k, lower)
            if cand.contains(lower, side):
                return beta, cand
    raise AssertionError(f"no shifted dyadic cube covers lower={lower} side={side}")


def _log2_floor(x: Fraction) -> int:
    """Largest integer e with 2**e <= x."""
    e = x.numerator.bit_length() - x.denominator.bit_length()
    while _pow2(e) > x:
        e -= 1
    while _pow2(e + 1) <= x:
        e += 1
    return e


def enclosing_for_cube(grid: CellGrid, cube: Cube) -> tuple[Bits, DyadicCube]:
    h = grid.width_exact
    return enclosing_dyadic([h * v for v in cube.lo], h * cube.side)


# ------------------------------------------------------------------ pyramid


def top_level(grid: CellGrid) -> int:
    """Coarsest level needed: each ``D_beta`` has one cube at this level covering the box.

    Above it a cube keeps the same mass but grows, so averages only decrease.
    """
    return -(grid.K + 2)


class DyadicPyramid:
    """Per-level cube sums of ``D_beta`` over the box, fields taken as zero outside.

    Sums are accumulated bottom-up: level-``L`` blocks of ``3**n`` cells, then
    ``2**n`` children per parent.  All sums are over nonnegative terms, so no
    cancellation enters.
    """

    def __init__(self, grid: CellGrid, fields: np.ndarray, beta: Bits):
        self.grid = grid
        self.beta = tuple(beta)
        kt = top_level(grid)
        self.top = kt
        N = grid.cells_per_side
        top_side = 3 * 2 ** (grid.L - kt)
        offset = [2 ** (grid.L - kt) * _sign(kt) * b for b in self.beta]
        # lower corner of the top cube containing the box, per axis
        self.window_lo = np.array([o + top_side * ((-o) // top_side) for o in offset], dtype=np.int64)
        assert np.all(self.window_lo <= 0) and np.all(self.window_lo + top_side >= N)
        self.window = top_side
        fields = np.asarray(fields, dtype=np.float64)
        m = fields.shape[0]
        padded = np.zeros((m,) + (top_side,) * grid.n)
        inner = tuple(slice(-int(w), -int(w) + N) for w in self.window_lo)
        padded[(slice(None),) + inner] = fields
        blocks = top_side // 3
        sums = _block_sum(padded, grid.n, blocks, 3)
        self.levels: dict[int, np.ndarray] = {grid.L: sums}
        for k in range(grid.L, kt, -1):
            b = sums.shape[1] // 2
            sums = _block_sum(sums, grid.n, b, 2)
            self.levels[k - 1] = sums

    def side(self, k: int) -> int:
        return 3 * 2 ** (self.grid.L - k)

    def cell_block_index(self, k: int) -> list[np.ndarray]:
        """Per axis, the level-``k`` block index of every box cell."""
        c = np.arange(self.grid.cells_per_side)
        return [(c - w) // self.side(k) for w in self.window_lo]

    def dyadic_cube(self, k: int, idx: Sequence[int]) -> DyadicCube:
        scale = 2 ** (self.grid.L - k)
        s = _sign(k)
        j = []
        for w, i, b in zip(self.window_lo, idx, self.beta):
            lo = int(w) + int(i) * self.side(k)
            num = lo // scale - s * b
            assert num % 3 == 0 and lo % scale == 0
            j.append(num // 3)
        return DyadicCube(self.beta, k, tuple(j))


def _block_sum(a: np.ndarray, n: int, blocks: int, size: int) -> np.ndarray:
    m = a.shape[0]
    shp = [m]
    for _ in range(n):
        shp += [blocks, size]
    r = a.reshape(shp)
    return r.sum(axis=tuple(range(2, 2 * n + 1, 2)))


def iter_level_cubes(grid: CellGrid, beta: Bits, k: int, inside: bool) -> Iterator[DyadicCube]:
    """Cubes of ``D_beta`` at level ``k`` that lie inside (or meet) the box."""
    N = grid.cells_per_side
    side = 3 * 2 ** (grid.L - k)
    ranges = []
    for b in beta:
        o = 2 ** (grid.L - k) * _sign(k) * b
        if inside:
            lo_j = _ceil_div(-o, side)
            hi_j = (N - side - o) // side
        else:
            lo_j = (0 - o - side) // side + 1
            hi_j = _ceil_div(N - o, side) - 1
        ranges.append(range(lo_j, hi_j + 1))
    scale = 2 ** (grid.L - k)
    s = _sign(k)
    for idx in itertools.product(*ranges):
        lo_cells = [2 ** (grid.L - k) * s * b + i * side for b, i in zip(beta, idx)]
        j = tuple((lc // scale - s * b) // 3 for lc, b in zip(lo_cells, beta))
        yield DyadicCube(tuple(beta), k, j)


def _ceil_div(a: int, b: int) -> int:
    return -((-a) // b)
