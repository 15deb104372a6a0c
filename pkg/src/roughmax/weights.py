"""Multiple-weight constants restricted to a finite cube family.

``[w]_{A_(P,q)}``, ``[w]_{A_P}``, the Fujii-Wilson ``A_infinity`` constant and a
reverse Hölder diagnostic.  Every supremum runs over an explicit
:class:`~roughmax.families.CubeFamily` of cubes inside the box; the continuum
supremum is never claimed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import isinf

import numpy as np

from .errors import BudgetError, ParameterError
from .families import CubeFamily, CubeGroup, cube_min, window_reduce
from .grid import CellGrid, Cube, SummedAreaTable
from .profile import ExponentProfile

RH_BASE = 2**11  # c_n = 2**(11 + n)


class WeightVector:
    """Weights ``w_1..w_m`` on a grid with the derived products and duals."""

    def __init__(self, grid: CellGrid, w, profile: ExponentProfile):
        w = np.asarray(w, dtype=np.float64)
        if w.shape == grid.shape:
            w = w[None]
        if w.shape != (profile.m,) + grid.shape:
            raise ParameterError(f"expected {profile.m} weights of shape {grid.shape}")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ParameterError("weights must be finite and strictly positive")
        self.grid = grid
        self.w = w
        self.profile = profile
        self._cache: dict = {}

    @property
    def nu(self) -> np.ndarray:
        """``prod_i w_i``, the product weight of the ``A_(P,q)`` class."""
        if "nu" not in self._cache:
            self._cache["nu"] = np.prod(self.w, axis=0)
        return self._cache["nu"]

    @property
    def nu_ap(self) -> np.ndarray:
        """``prod_i w_i^(p/p_i)``, the product weight of the ``A_P`` class."""
        if "nu_ap" not in self._cache:
            p = self.profile.p
            out = np.ones(self.grid.shape)
            for wi, pi in zip(self.w, self.profile.p_list):
                out = out * wi ** (p / pi)
            self._cache["nu_ap"] = out
        return self._cache["nu_ap"]

    def sigma(self, i: int) -> np.ndarray:
        """``w_i^(-p_i')``; undefined for ``p_i = 1``."""
        pp = self.profile.p_primes[i]
        if isinf(pp):
            raise ParameterError("sigma_i = w_i^(-p_i') is undefined when p_i = 1")
        return self.w[i] ** (-pp)


@dataclass
class ConstantResult:
    kind: str
    value: float
    cube: Cube | None
    family: dict
    rows: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"kind": self.kind, "value": self.value,
                "argmax": None if self.cube is None else self.cube.to_json(), "family": self.family}


def _averages(grid: CellGrid, field_values: np.ndarray, lo: np.ndarray, side: int) -> np.ndarray:
    sat = SummedAreaTable(field_values)
    return sat.box_sum(lo, lo + side) / float(side) ** grid.n


def _check_family(family: CubeFamily, grid: CellGrid):
    if family.grid != grid:
        raise ParameterError("family and weights live on different grids")
    if len(family) == 0:
        raise ParameterError("cube family is empty")
    if not family.all_inside():
        raise ParameterError("weight constants need a family of cubes inside the box (clip='inside')")


def _bracket_rows(wv: WeightVector, family: CubeFamily, kind: str):
    """Per group: ``(lo, side, brackets[(m+1), k])``; the constant is the product of the brackets."""
    grid, prof = wv.grid, wv.profile
    _check_family(family, grid)
    if kind == "apq":
        outer, base = prof.q, wv.nu**prof.q
    elif kind == "ap":
        outer, base = prof.p, wv.nu_ap
    else:
        raise ParameterError(f"unknown constant kind {kind!r}")
    out = []
    for g in family.groups:
        br = [_averages(grid, base, g.lo, g.side)]
        for i, pi in enumerate(prof.p_list):
            if pi == 1:
                br.append(cube_min(wv.w[i], g.lo, g.side) ** (-outer))
            else:
                pp = prof.p_primes[i]
                expo = -pp if kind == "apq" else 1.0 - pp
                br.append(_averages(grid, wv.w[i] ** expo, g.lo, g.side) ** (outer / pp))
        out.append((g, np.array(br)))
    return out


def _constant(wv: WeightVector, family: CubeFamily, kind: str, keep_rows: bool) -> ConstantResult:
    best, cube, rows = -np.inf, None, []
    for g, br in _bracket_rows(wv, family, kind):
        prod = np.ones(br.shape[1])
        for b in br:
            prod = prod * b
        i = int(np.argmax(prod))
        if prod[i] > best:
            best, cube = float(prod[i]), Cube(tuple(int(v) for v in g.lo[i]), g.side)
        if keep_rows:
            for r in range(len(g)):
                rows.append((tuple(int(v) for v in g.lo[r]), g.side, [float(b) for b in br[:, r]], float(prod[r])))
    return ConstantResult(kind, best, cube, family.description, rows)


def apq_constant(wv: WeightVector, family: CubeFamily, keep_rows: bool = False) -> ConstantResult:
    """``sup_Q avg_Q(nu^q) * prod_i avg_Q(w_i^(-p_i'))^(q/p_i')`` with ``nu = prod w_i``.

    For ``p_i = 1`` the i-th factor is ``(inf_Q w_i)^(-q)``.
    """
    return _constant(wv, family, "apq", keep_rows)


def multi_ap_constant(wv: WeightVector, family: CubeFamily, keep_rows: bool = False) -> ConstantResult:
    """``sup_Q prod_i avg_Q(w_i^(1-p_i'))^(p/p_i') * avg_Q(nu)`` with ``nu = prod w_i^(p/p_i)``.

    For ``p_i = 1`` the i-th factor is ``(inf_Q w_i)^(-p)``, the exponent that
    keeps the constant invariant under ``w_i -> c w_i``.
    """
    return _constant(wv, family, "ap", keep_rows)


# ------------------------------------------------------------ A_infinity


def _local_maximal(grid: CellGrid, sat: SummedAreaTable, q: Cube, family: CubeFamily) -> np.ndarray:
    """``M(w 1_Q)`` on the cells of ``Q``, the sup running over family cubes."""
    qlo = np.array(q.lo)
    qhi = qlo + q.side
    n = grid.n
    out = np.full((q.side,) * n, -np.inf)
    for g in family.groups:
        if len(g) == 0:
            continue
        vol = float(g.side) ** n
        if g.kind == "lattice":
            idx_axes, lo_axes, hi_axes, ok_axes = [], [], [], []
            for a in range(n):
                c = np.arange(qlo[a], qhi[a])
                i = (c - g.origin[a]) // g.side
                u, inv = np.unique(i, return_inverse=True)
                rlo = g.origin[a] + u * g.side
                lo_axes.append(np.maximum(rlo, qlo[a]))
                hi_axes.append(np.minimum(rlo + g.side, qhi[a]))
                ok_axes.append((u >= g.first[a]) & (u < g.first[a] + g.counts[a]))
                idx_axes.append(inv)
            lo = np.stack(np.meshgrid(*lo_axes, indexing="ij"), axis=-1)
            hi = np.stack(np.meshgrid(*hi_axes, indexing="ij"), axis=-1)
            vals = sat.box_sum(lo, hi) / vol
            ok = ok_axes[0]
            for a in range(1, n):
                ok = np.logical_and.outer(ok, ok_axes[a])
            vals = np.where(ok, vals, -np.inf)
            np.maximum(out, vals[np.ix_(*idx_axes)], out=out)
        elif g.kind == "dense":
            s = g.side
            N = grid.cells_per_side
            p_lo = np.maximum(qlo - s + 1, 0)
            p_hi = np.minimum(qhi - 1, N - s)
            if np.any(p_hi < p_lo):
                continue
            axes = [np.arange(p_lo[a], p_hi[a] + 1) for a in range(n)]
            P = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
            vals = sat.box_sum(np.maximum(P, qlo), np.minimum(P + s, qhi)) / vol
            # cell c of Q sees positions p with p <= c < p + s
            table = vals
            for a in range(n):
                pad = [(0, 0)] * n
                pad[a] = (s - 1, s - 1)
                table = np.lib.stride_tricks.sliding_window_view(
                    np.pad(table, pad, constant_values=-np.inf), s, axis=a).max(axis=-1)
            # table index t along axis a corresponds to cell p_lo[a] + t - (s - 1) + (s - 1) = p_lo[a] + t
            sl = tuple(slice(qlo[a] - p_lo[a], qlo[a] - p_lo[a] + q.side) for a in range(n))
            np.maximum(out, table[sl], out=out)
        else:
            for lo in g.lo:
                rlo, rhi = np.maximum(lo, qlo), np.minimum(lo + g.side, qhi)
                if np.any(rhi <= rlo):
                    continue
                v = float(sat.box_sum(rlo, rhi)) / vol
                sl = tuple(slice(rlo[a] - qlo[a], rhi[a] - qlo[a]) for a in range(n))
                np.maximum(out[sl], v, out=out[sl])
    return out


def ainfty_constant(grid: CellGrid, weight, family: CubeFamily, budget: int = 5 * 10**7) -> ConstantResult:
    """Fujii-Wilson constant ``sup_Q w(Q)^-1 * integral_Q M(w 1_Q)`` over the family.

    ``M`` is the maximal function restricted to the same family, so taking the
    cube itself gives ``M(w 1_Q) >= avg_Q w`` on ``Q`` and the constant is >= 1.
    """
    weight = np.asarray(weight, dtype=np.float64)
    if np.any(weight <= 0):
        raise ParameterError("weight must be strictly positive")
    _check_family(family, grid)
    work = sum(len(g) * g.side**grid.n for g in family.groups) * len(family.groups)
    if work > budget:
        raise BudgetError(f"A_infinity evaluation needs ~{work} cell updates, budget is {budget}")
    sat = SummedAreaTable(weight)
    best, arg = -np.inf, None
    for cube in family.cubes():
        lo = np.array(cube.lo)
        mass = float(sat.box_sum(lo, lo + cube.side))
        mloc = _local_maximal(grid, sat, cube, family)
        val = float(mloc.sum()) / mass
        if val > best:
            best, arg = val, cube
    return ConstantResult("ainfty", best, arg, family.description)


@dataclass
class ReverseHolderReport:
    ainfty: float
    r: float
    r_conjugate: float
    worst_ratio: float
    worst_cube: Cube | None
    passed: bool
    definition: str = "Fujii-Wilson"

    def to_json(self) -> dict:
        return {"ainfty": self.ainfty, "r": self.r, "r_conjugate": self.r_conjugate,
                "worst_ratio": self.worst_ratio, "passed": self.passed, "ainfty_definition": self.definition,
                "worst_cube": None if self.worst_cube is None else self.worst_cube.to_json()}


def reverse_holder_exponent(ainfty: float, n: int) -> float:
    """``r = 1 + 1/(c_n [w]_{A_inf})`` with ``c_n = 2**(11+n)``."""
    return 1.0 + 1.0 / (RH_BASE * 2**n * ainfty)


def reverse_holder_check(grid: CellGrid, weight, family: CubeFamily, ainfty: float | None = None) -> ReverseHolderReport:
    """Compare ``avg_Q(w^r)^(1/r)`` with ``2 avg_Q(w)`` on every family cube.

    ``worst_ratio`` is the largest ``lhs / (2 rhs)``; failures are reported,
    not raised, because a restricted ``A_infinity`` can undershoot.
    """
    weight = np.asarray(weight, dtype=np.float64)
    if ainfty is None:
        ainfty = ainfty_constant(grid, weight, family).value
    r = reverse_holder_exponent(ainfty, grid.n)
    worst, arg = -np.inf, None
    for g in family.groups:
        lhs = _averages(grid, weight**r, g.lo, g.side) ** (1.0 / r)
        rhs = _averages(grid, weight, g.lo, g.side)
        ratio = lhs / (2.0 * rhs)
        i = int(np.argmax(ratio))
        if ratio[i] > worst:
            worst, arg = float(ratio[i]), Cube(tuple(int(v) for v in g.lo[i]), g.side)
    return ReverseHolderReport(ainfty, r, r / (r - 1.0), worst, arg, worst <= 1.0)
