"""Finite cube families over which every restricted supremum runs.

A family is a list of groups.  ``lattice`` groups are one level of one shifted
dyadic grid (disjoint cubes on a regular lattice), ``dense`` groups are all
cell-aligned cubes of one side inside the box, ``explicit`` groups are
arbitrary cube lists.  Group order plus row-major order inside a group is the
canonical order used to break ties when reporting a maximising cube.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .dyadic import Bits, _ceil_div, _sign, all_betas, top_level
from .errors import BudgetError, ParameterError
from .grid import CellGrid, Cube

ValueFn = Callable[[np.ndarray, int], np.ndarray]

DEFAULT_ALL_CUBES_BUDGET = 2 * 10**7


@dataclass
class CubeGroup:
    kind: str
    side: int
    lo: np.ndarray
    label: tuple = ()
    origin: tuple[int, ...] = ()
    first: tuple[int, ...] = ()
    counts: tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.lo)


@dataclass
class CubeFamily:
    grid: CellGrid
    groups: list[CubeGroup]
    description: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return sum(len(g) for g in self.groups)

    def cubes(self) -> Iterator[Cube]:
        for g in self.groups:
            for lo in g.lo:
                yield Cube(tuple(int(v) for v in lo), g.side)

    def union(self, other: "CubeFamily") -> "CubeFamily":
        if other.grid != self.grid:
            raise ParameterError("families live on different grids")
        desc = {"kind": "union", "parts": [self.description, other.description]}
        return CubeFamily(self.grid, self.groups + other.groups, desc)

    def all_inside(self) -> bool:
        N = self.grid.cells_per_side
        return all(np.all(g.lo >= 0) and np.all(g.lo + g.side <= N) for g in self.groups)

    def sup_field(self, value_fn: ValueFn) -> np.ndarray:
        """Per cell, the largest ``value_fn`` over family cubes containing the cell (``-inf`` if none)."""
        grid = self.grid
        out = np.full(grid.shape, -np.inf)
        for g in self.groups:
            if len(g) == 0:
                continue
            vals = np.asarray(value_fn(g.lo, g.side), dtype=np.float64)
            np.maximum(out, scatter_group(grid, g, vals), out=out)
        return out

    def best(self, value_fn: ValueFn) -> tuple[float, Cube | None]:
        """Largest value over the family and the first cube attaining it."""
        best_v, best_c = -np.inf, None
        for g in self.groups:
            if len(g) == 0:
                continue
            vals = np.asarray(value_fn(g.lo, g.side), dtype=np.float64)
            i = int(np.argmax(vals))
            if vals[i] > best_v:
                best_v, best_c = float(vals[i]), Cube(tuple(int(v) for v in g.lo[i]), g.side)
        return best_v, best_c


def scatter_group(grid: CellGrid, g: CubeGroup, vals: np.ndarray) -> np.ndarray:
    N = grid.cells_per_side
    n = grid.n
    if g.kind == "lattice":
        c = np.arange(N)
        idx, ok = [], []
        for a in range(n):
            i = (c - g.origin[a]) // g.side - g.first[a]
            good = (i >= 0) & (i < g.counts[a])
            idx.append(np.where(good, i, 0))
            ok.append(good)
        table = vals.reshape(g.counts)
        res = table[np.ix_(*idx)]
        mask = ok[0]
        for a in range(1, n):
            mask = np.logical_and.outer(mask, ok[a])
        return np.where(mask, res, -np.inf)
    if g.kind == "dense":
        s = g.side
        table = vals.reshape((N - s + 1,) * n)
        for a in range(n):
            pad = [(0, 0)] * n
            pad[a] = (s - 1, s - 1)
            padded = np.pad(table, pad, constant_values=-np.inf)
            table = sliding_window_view(padded, s, axis=a).max(axis=-1)
        return table
    out = np.full(grid.shape, -np.inf)
    for lo, v in zip(g.lo, vals):
        sl = Cube(tuple(lo), g.side).slices(grid)
        np.maximum(out[sl], v, out=out[sl])
    return out


def window_reduce(field: np.ndarray, side: int, op: str) -> np.ndarray:
    """Min or max of ``field`` over every in-box cube of the given side, indexed by lower corner."""
    out = field
    for a in range(field.ndim):
        win = sliding_window_view(out, side, axis=a)
        out = win.min(axis=-1) if op == "min" else win.max(axis=-1)
    return out


def cube_min(field: np.ndarray, lo: np.ndarray, side: int) -> np.ndarray:
    """Minimum of ``field`` over each cube ``lo + [0, side)**n`` (cubes must be inside the box)."""
    table = window_reduce(field, side, "min")
    return table[tuple(lo.T)]


# ---------------------------------------------------------------- builders


def _lattice_group(grid: CellGrid, beta: Bits, k: int, inside: bool) -> CubeGroup:
    N = grid.cells_per_side
    side = 3 * 2 ** (grid.L - k)
    origin, first, counts, axes = [], [], [], []
    for b in beta:
        o = 2 ** (grid.L - k) * _sign(k) * b
        if inside:
            lo_j, hi_j = _ceil_div(-o, side), (N - side - o) // side
        else:
            lo_j, hi_j = (-o - side) // side + 1, _ceil_div(N - o, side) - 1
        cnt = max(hi_j - lo_j + 1, 0)
        origin.append(o)
        first.append(lo_j)
        counts.append(cnt)
        axes.append(o + side * np.arange(lo_j, lo_j + cnt))
    if all(c > 0 for c in counts):
        mesh = np.meshgrid(*axes, indexing="ij")
        lo = np.stack([m.ravel() for m in mesh], axis=-1).astype(np.int64)
    else:
        lo = np.zeros((0, grid.n), dtype=np.int64)
    return CubeGroup("lattice", side, lo, ("dyadic", tuple(beta), k), tuple(origin), tuple(first), tuple(counts))


def dyadic_family(grid: CellGrid, betas: Sequence[Bits] | None = None, clip: str = "intersect",
                  levels: Sequence[int] | None = None) -> CubeFamily:
    """Union of shifted dyadic grids restricted to the box.

    ``clip="intersect"`` keeps every cube meeting the box (functions are zero
    outside it), from the level whose cube covers the whole box down to level
    ``L``.  ``clip="inside"`` keeps only cubes contained in the box, as needed
    wherever weights enter.
    """
    if clip not in ("intersect", "inside"):
        raise ParameterError(f"unknown clip mode {clip!r}")
    inside = clip == "inside"
    betas = all_betas(grid.n) if betas is None else [tuple(b) for b in betas]
    if levels is None:
        k0 = -grid.K if inside else top_level(grid)
        levels = range(k0, grid.L + 1)
    groups = []
    for beta in betas:
        for k in levels:
            g = _lattice_group(grid, beta, k, inside)
            if len(g):
                groups.append(g)
    desc = {"kind": "dyadic", "clip": clip, "betas": [list(b) for b in betas], "levels": [min(levels), max(levels)]}
    return CubeFamily(grid, groups, desc)


def all_cubes_family(grid: CellGrid, budget: int | None = None) -> CubeFamily:
    """Every cell-aligned cube inside the box; cost grows like ``cells_per_side**(n+1)``."""
    N = grid.cells_per_side
    budget = DEFAULT_ALL_CUBES_BUDGET if budget is None else budget
    cost = N ** (grid.n + 1)
    if cost > budget:
        raise BudgetError(f"all-cubes family needs ~{cost} cube evaluations, budget is {budget}")
    groups = []
    for s in range(1, N + 1):
        ax = np.arange(N - s + 1)
        mesh = np.meshgrid(*([ax] * grid.n), indexing="ij")
        lo = np.stack([m.ravel() for m in mesh], axis=-1).astype(np.int64)
        groups.append(CubeGroup("dense", s, lo, ("all", s)))
    return CubeFamily(grid, groups, {"kind": "all-cubes"})


def explicit_family(grid: CellGrid, cubes: Sequence[Cube]) -> CubeFamily:
    by_side: dict[int, list] = {}
    for c in cubes:
        by_side.setdefault(c.side, []).append(c.lo)
    groups = [CubeGroup("explicit", s, np.array(los, dtype=np.int64).reshape(-1, grid.n), ("explicit", s))
              for s, los in by_side.items()]
    return CubeFamily(grid, groups, {"kind": "explicit", "count": len(cubes)})


def family_from_name(grid: CellGrid, name: str, clip: str = "intersect", budget: int | None = None) -> CubeFamily:
    if name in ("dyadic", "dyadic-union"):
        return dyadic_family(grid, clip=clip)
    if name in ("all", "all-cubes"):
        return all_cubes_family(grid, budget)
    raise ParameterError(f"unknown cube family {name!r} (use dyadic-union or all-cubes)")
