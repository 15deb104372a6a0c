"""Piecewise-constant fields on a cell-aligned box, with exact cube integrals.

The box is ``[0, 2**K)**n`` split into ``3 * 2**(K+L)`` cells per side, so a
cell has width ``2**-L / 3``.  That width makes every cube of the dyadic grids
shifted by 0 or 1/3 line up with cell boundaries for levels ``k <= L``.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError, ParameterError

MAX_DIM = 3


@dataclass(frozen=True)
class CellGrid:
    n: int
    K: int
    L: int

    def __post_init__(self):
        if not 1 <= self.n <= MAX_DIM:
            raise ParameterError(f"dimension n={self.n} not in 1..{MAX_DIM}")
        if self.K + self.L < 0:
            raise ParameterError("need K + L >= 0 for an integer cell count")

    @property
    def cells_per_side(self) -> int:
        return 3 * 2 ** (self.K + self.L)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.cells_per_side,) * self.n

    @property
    def width_exact(self) -> Fraction:
        return Fraction(1, 3 * 2**self.L) if self.L >= 0 else Fraction(2 ** (-self.L), 3)

    @property
    def h(self) -> float:
        return float(self.width_exact)

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    @property
    def side_length(self) -> Fraction:
        return self.width_exact * self.cells_per_side

    def centers(self, axis_only: bool = False) -> np.ndarray:
        """Cell centres along one axis (``axis_only``) or as an ``(*shape, n)`` array."""
        c = (np.arange(self.cells_per_side) + 0.5) * self.h
        if axis_only:
            return c
        mesh = np.meshgrid(*([c] * self.n), indexing="ij")
        return np.stack(mesh, axis=-1)

    def cell_of_point(self, x: Sequence[float]) -> tuple[int, ...]:
        idx = tuple(int(np.floor(float(xi) / self.h)) for xi in np.atleast_1d(x))
        if len(idx) != self.n or any(not 0 <= i < self.cells_per_side for i in idx):
            raise DomainError(f"point {x} outside the grid box")
        return idx


@dataclass(frozen=True)
class Cube:
    """Axis-parallel cube in cell units: cells ``lo[a] <= c < lo[a] + side``."""

    lo: tuple[int, ...]
    side: int

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(int(v) for v in self.lo))
        if self.side < 1:
            raise ParameterError("cube side must be at least one cell")

    @property
    def hi(self) -> tuple[int, ...]:
        return tuple(v + self.side for v in self.lo)

    def volume(self, grid: CellGrid) -> float:
        return (self.side * grid.h) ** grid.n

    def inside(self, grid: CellGrid) -> bool:
        N = grid.cells_per_side
        return len(self.lo) == grid.n and all(0 <= v and v + self.side <= N for v in self.lo)

    def slices(self, grid: CellGrid | None = None) -> tuple[slice, ...]:
        if grid is None:
            return tuple(slice(v, v + self.side) for v in self.lo)
        N = grid.cells_per_side
        return tuple(slice(max(v, 0), max(min(v + self.side, N), 0)) for v in self.lo)

    def contains_cell(self, cell: Sequence[int]) -> bool:
        return all(v <= c < v + self.side for v, c in zip(self.lo, cell))

    def to_json(self) -> dict:
        return {"lo": list(self.lo), "side": self.side}


class SummedAreaTable:
    """Zero-padded prefix sums, accumulated axis by axis in extended precision."""

    def __init__(self, values: np.ndarray):
        acc = np.asarray(values, dtype=np.longdouble)
        for axis in range(acc.ndim):
            acc = np.cumsum(acc, axis=axis)
        self.table = np.pad(acc, [(1, 0)] * acc.ndim)
        self.shape = values.shape

    def box_sum(self, lo, hi) -> np.ndarray:
        """Sum over cells ``lo <= c < hi`` (arrays of shape ``(..., n)``); boxes are clipped to the grid."""
        lo = np.asarray(lo, dtype=np.int64)
        hi = np.asarray(hi, dtype=np.int64)
        n = len(self.shape)
        N = np.asarray(self.shape)
        lo = np.clip(lo, 0, N)
        hi = np.clip(hi, 0, N)
        hi = np.maximum(hi, lo)
        total = np.zeros(lo.shape[:-1], dtype=np.longdouble)
        for corner in range(2**n):
            idx = []
            sign = 1
            for a in range(n):
                if corner >> a & 1:
                    idx.append(lo[..., a])
                    sign = -sign
                else:
                    idx.append(hi[..., a])
            term = self.table[tuple(idx)]
            total = total + term if sign > 0 else total - term
        return total.astype(np.float64)


def _check_field(grid: CellGrid, field: np.ndarray) -> np.ndarray:
    field = np.asarray(field, dtype=np.float64)
    if field.shape != grid.shape:
        raise ParameterError(f"field shape {field.shape} does not match grid {grid.shape}")
    return field


class SampledFunctions:
    """Nonnegative functions ``f_1..f_m`` and positive weights ``w_1..w_m`` on one grid.

    Instances are treated as immutable; summed-area tables are built lazily.
    """

    def __init__(self, grid: CellGrid, f, w=None):
        f = np.asarray(f, dtype=np.float64)
        if f.shape == grid.shape:
            f = f[None]
        if f.shape[1:] != grid.shape:
            raise ParameterError(f"function array shape {f.shape} does not match grid {grid.shape}")
        if w is None:
            w = np.ones_like(f)
        w = np.asarray(w, dtype=np.float64)
        if w.shape == grid.shape:
            w = w[None]
        if w.shape != f.shape:
            raise ParameterError("need one weight per function")
        if not np.all(np.isfinite(f)) or np.any(f < 0):
            raise ParameterError("functions must be finite and nonnegative (store magnitudes)")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ParameterError("weights must be finite and strictly positive")
        self.grid = grid
        self.f = f
        self.w = w
        self.f.setflags(write=False)
        self.w.setflags(write=False)
        self._sat: list[SummedAreaTable] | None = None

    @property
    def m(self) -> int:
        return self.f.shape[0]

    @property
    def sats(self) -> list[SummedAreaTable]:
        if self._sat is None:
            self._sat = [SummedAreaTable(fi) for fi in self.f]
        return self._sat

    def replace(self, f=None, w=None) -> "SampledFunctions":
        return SampledFunctions(self.grid, self.f if f is None else f, self.w if w is None else w)

    def power(self, r: float) -> "SampledFunctions":
        return self.replace(f=self.f**r)

    def digest(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update(repr((self.grid, self.f.shape)).encode())
        h.update(self.f.tobytes())
        h.update(self.w.tobytes())
        return h.hexdigest()


def integrate(grid: CellGrid, field, cube: Cube, zero_extend: bool = False) -> float:
    """Exact integral of a piecewise-constant field over a cell-aligned cube.

    With ``zero_extend`` the field is taken to vanish outside the box and the
    cube may stick out of it; otherwise such a cube is a domain error.
    """
    field = _check_field(grid, field)
    if not zero_extend and not cube.inside(grid):
        raise DomainError(f"{cube} is not inside the grid box")
    sat = SummedAreaTable(field)
    s = sat.box_sum(np.array(cube.lo), np.array(cube.hi))
    return float(s) * grid.cell_volume


def product_average_from_sums(grid: CellGrid, sums: np.ndarray, side, alpha: float) -> np.ndarray:
    """``prod_i |Q|^(alpha/(mn) - 1) * integral_Q f_i`` from raw cell sums.

    ``sums`` has shape ``(m, k)`` (cell sums, not yet multiplied by the cell
    volume) and ``side`` is the cube side in cells (scalar or length ``k``).
    All callers go through this one formula so that equal sums give equal bits.
    """
    sums = np.asarray(sums, dtype=np.float64)
    m = sums.shape[0]
    n = grid.n
    vol = (np.asarray(side, dtype=np.float64) * grid.h) ** n
    scale = vol ** (alpha / (m * n) - 1.0)
    out = np.ones(sums.shape[1:], dtype=np.float64)
    if alpha == 0:
        # h cancels; dividing by the integer cell count keeps comparisons between
        # a cube and its parent exact (scaling by 2**n is exact in binary)
        cells = np.asarray(side, dtype=np.float64) ** n
        for i in range(m):
            out = out * (sums[i] / cells)
        return out
    hn = grid.cell_volume
    for i in range(m):
        out = out * (scale * (hn * sums[i]))
    return out


def product_average(fs: SampledFunctions, cube: Cube, alpha: float, zero_extend: bool = False) -> float:
    m, n = fs.m, fs.grid.n
    if not 0 <= alpha < m * n:
        raise ParameterError(f"alpha={alpha} outside [0, mn) = [0, {m * n})")
    if not zero_extend and not cube.inside(fs.grid):
        raise DomainError(f"{cube} is not inside the grid box")
    lo = np.array(cube.lo)
    sums = np.array([[sat.box_sum(lo, lo + cube.side)] for sat in fs.sats])
    return float(product_average_from_sums(fs.grid, sums, cube.side, alpha)[0])


def lp_norm(grid: CellGrid, field, weight=None, p: float = 2.0) -> float:
    """``(integral |field|^p weight)^(1/p)`` by exact cell sums."""
    if not p > 0:
        raise ParameterError("exponent must be positive")
    field = np.abs(_check_field(grid, field))
    weight = np.ones(grid.shape) if weight is None else _check_field(grid, weight)
    if np.isinf(p):
        return float(field[weight > 0].max(initial=0.0))
    return float((np.sum(field**p * weight) * grid.cell_volume) ** (1.0 / p))


def weak_norm(grid: CellGrid, field, weight=None, q: float = 2.0) -> float:
    """``sup_t t * weight({|field| > t})^(1/q)`` for a piecewise-constant field.

    Between consecutive attained values the product increases in ``t``, so the
    supremum is the limit from below at an attained value ``v``:
    ``v * weight({|field| >= v})^(1/q)``.
    """
    if not q > 0:
        raise ParameterError("exponent must be positive")
    field = np.abs(_check_field(grid, field)).ravel()
    weight = np.ones(field.shape) if weight is None else _check_field(grid, weight).ravel()
    order = np.argsort(-field, kind="stable")
    vals = field[order]
    mass = np.cumsum(weight[order]) * grid.cell_volume
    # mass of {|field| >= v} is the cumulative mass at the last occurrence of v
    last = np.r_[vals[1:] != vals[:-1], True]
    vals, mass = vals[last], mass[last]
    keep = vals > 0
    if not np.any(keep):
        return 0.0
    return float(np.max(vals[keep] * mass[keep] ** (1.0 / q)))


# ---------------------------------------------------------------- file format

_HEADER = struct.Struct("<5q")


def write_grid_file(path, grid: CellGrid, m: int, fields: np.ndarray) -> None:
    """Write fields as a binary record (``.bin`` and others) or CSV (``.csv``).

    Binary: five little-endian int64 ``(n, m, K, L, field_count)`` then each
    field as row-major little-endian float64.  CSV: a header row
    ``n,m,K,L,fields``, its values, a column row, then one row per cell with
    the cell index followed by every field value in shortest round-trip form.
    """
    fields = np.asarray(fields, dtype=np.float64)
    if fields.shape[1:] != grid.shape:
        raise ParameterError("field shape does not match grid")
    path = Path(path)
    if path.suffix == ".csv":
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["n", "m", "K", "L", "fields"])
            wr.writerow([grid.n, m, grid.K, grid.L, fields.shape[0]])
            wr.writerow([f"i{a}" for a in range(grid.n)] + [f"v{j}" for j in range(fields.shape[0])])
            flat = fields.reshape(fields.shape[0], -1)
            for c, cell in enumerate(np.ndindex(*grid.shape)):
                wr.writerow(list(cell) + [repr(float(v)) for v in flat[:, c]])
        return
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(grid.n, m, grid.K, grid.L, fields.shape[0]))
        fh.write(np.ascontiguousarray(fields, dtype="<f8").tobytes())


def read_grid_file(path) -> tuple[CellGrid, int, np.ndarray]:
    path = Path(path)
    if path.suffix == ".csv":
        with open(path, newline="") as fh:
            rd = csv.reader(fh)
            next(rd)
            n, m, K, L, count = (int(v) for v in next(rd))
            grid = CellGrid(n, K, L)
            next(rd)
            fields = np.empty((count,) + grid.shape)
            for row in rd:
                cell = tuple(int(v) for v in row[:n])
                fields[(slice(None),) + cell] = [float(v) for v in row[n:]]
        return grid, m, fields
    raw = path.read_bytes()
    n, m, K, L, count = _HEADER.unpack_from(raw)
    grid = CellGrid(n, K, L)
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    expected = count * int(np.prod(grid.shape))
    if data.size != expected:
        raise ParameterError(f"grid file holds {data.size} values, header promises {expected}")
    return grid, m, data.reshape((count,) + grid.shape).astype(np.float64)


def save_functions(path, fs: SampledFunctions) -> None:
    write_grid_file(path, fs.grid, fs.m, np.concatenate([fs.f, fs.w]))


def load_functions(path) -> SampledFunctions:
    grid, m, fields = read_grid_file(path)
    if fields.shape[0] == m:
        return SampledFunctions(grid, fields)
    if fields.shape[0] != 2 * m:
        raise ParameterError(f"expected m or 2m fields, found {fields.shape[0]}")
    return SampledFunctions(grid, fields[:m], fields[m:])
