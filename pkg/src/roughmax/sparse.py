"""Stopping-time construction of sparse dyadic families and their verification.

For ``a = 2**(m(n+1))`` and each stopping index ``t`` the selected cubes are
the maximal cubes of one shifted dyadic grid whose product average exceeds
``a**t``; their union is ``{M^d > a**t}``.  Maximality gives the two-sided
selection bound ``a**t < avg_Q <= 2**(mn) a**t`` and, with that choice of
``a``, each cube has at most half its volume inside the next union.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dyadic import Bits, DyadicCube, DyadicPyramid, parent
from .errors import ParameterError
from .grid import CellGrid, SampledFunctions, product_average_from_sums
from .profile import ExponentProfile


@dataclass
class SparseFamily:
    grid: CellGrid
    beta: Bits
    a: int
    alpha: float
    levels: dict[int, list[DyadicCube]]
    averages: dict[int, list[float]]
    source: SampledFunctions | None = field(default=None, repr=False)

    @property
    def log2_a(self) -> int:
        return int(self.a).bit_length() - 1

    def threshold(self, t: int) -> float:
        return 2.0 ** (self.log2_a * t)

    def cubes(self):
        for t in sorted(self.levels):
            for q in self.levels[t]:
                yield t, q

    def __len__(self) -> int:
        return sum(len(v) for v in self.levels.values())

    def omega_mask(self, t: int) -> np.ndarray:
        """Cells of the box inside ``Omega_t``."""
        out = np.zeros(self.grid.shape, dtype=bool)
        for q in self.levels.get(t, []):
            out[q.to_cube(self.grid).slices(self.grid)] = True
        return out

    def to_json(self) -> dict:
        return {"beta": list(self.beta), "a": self.a, "alpha": self.alpha,
                "levels": {str(t): [dict(q.to_json(), average=avg) for q, avg in zip(self.levels[t], self.averages[t])]
                           for t in sorted(self.levels)}}


def _largest_below(v: float, log2_a: int) -> int:
    """Largest integer ``t`` with ``a**t < v``."""
    t = math.ceil(math.log2(v) / log2_a) - 1
    while 2.0 ** (log2_a * (t + 1)) < v:
        t += 1
    while not 2.0 ** (log2_a * t) < v:
        t -= 1
    return t


def build_sparse(fs: SampledFunctions, profile: ExponentProfile, beta: Bits | None = None,
                 a: int | None = None) -> SparseFamily:
    """Maximal ``D_beta`` cubes above each threshold ``a**t`` for every ``t`` where ``{M^d > a**t}`` changes."""
    grid = fs.grid
    if fs.m != profile.m or grid.n != profile.n:
        raise ParameterError("profile does not match the data")
    m, n = fs.m, grid.n
    beta = tuple([0] * n) if beta is None else tuple(beta)
    a = 2 ** (m * (n + 1)) if a is None else int(a)
    if a < 2 or a & (a - 1):
        raise ParameterError("stopping base must be a power of two >= 2")
    log2_a = a.bit_length() - 1
    pyr = DyadicPyramid(grid, fs.f, beta)
    ks = sorted(pyr.levels)
    avgs = {}
    for k in ks:
        s = pyr.levels[k]
        avgs[k] = product_average_from_sums(grid, s.reshape(m, -1), pyr.side(k), profile.alpha).reshape(s.shape[1:])
    empty = SparseFamily(grid, beta, a, profile.alpha, {}, {}, fs)
    md = np.zeros(grid.shape)
    for k in ks:
        np.maximum(md, avgs[k][np.ix_(*pyr.cell_block_index(k))], out=md)
    if not np.all(md > 0):
        return empty
    t_lo, t_hi = _largest_below(float(md.min()), log2_a), _largest_below(float(md.max()), log2_a)

    top = pyr.top
    # the pyramid window is exactly one top-level cube
    top_sums = pyr.levels[top].reshape(m, 1)
    top_cube = pyr.dyadic_cube(top, (0,) * n)
    levels, averages = {}, {}
    for t in range(t_lo, t_hi + 1):
        thr = 2.0 ** (log2_a * t)
        chosen, vals = [], []
        if avgs[top].max() > thr:
            # the whole box sits in the top cube; climb while the average stays above the threshold
            q, side = top_cube, pyr.side(top)
            while True:
                up = product_average_from_sums(grid, top_sums, 2 * side, profile.alpha)[0]
                if not up > thr:
                    break
                q, side = parent(q), 2 * side
            chosen.append(q)
            vals.append(float(product_average_from_sums(grid, top_sums, side,
                                                        profile.alpha)[0]))
        else:
            covered = np.zeros(avgs[top].shape, dtype=bool)
            for k in ks:
                if k > top:
                    covered = _expand(covered, n)
                hit = (avgs[k] > thr) & ~covered
                for idx in zip(*np.nonzero(hit)):
                    chosen.append(pyr.dyadic_cube(k, idx))
                    vals.append(float(avgs[k][idx]))
                covered |= hit
        levels[t], averages[t] = chosen, vals
    return SparseFamily(grid, beta, a, profile.alpha, levels, averages, fs)


def _expand(mask: np.ndarray, n: int) -> np.ndarray:
    for axis in range(n):
        mask = mask.repeat(2, axis=axis)
    return mask


# ------------------------------------------------------------ verification


@dataclass
class SparseVerdict:
    passed: bool
    failures: list[tuple[str, int, int, str]]

    def to_json(self) -> dict:
        return {"passed": self.passed,
                "failures": [{"check": c, "level": t, "index": j, "detail": d} for c, t, j, d in self.failures]}


def _box_sum(values: np.ndarray, grid: CellGrid, q: DyadicCube) -> float:
    return float(np.sum(values[q.to_cube(grid).slices(grid)]))


def verify_sparse(S: SparseFamily, check_selection: bool = True) -> SparseVerdict:
    """Check disjointness, nesting, the half-volume bound and the carrier sets by integer cell counts.

    ``(i)`` cubes of one level are pairwise disjoint; ``(ii)`` every cube of
    level ``t+1`` lies in a cube of level ``t``; ``(iii)``
    ``|Omega_{t+1} ∩ Q| <= |Q|/2``; ``(iv)`` the sets ``E = Q minus Omega_{t+1}``
    are pairwise disjoint with ``|Q| <= 2|E|``.  With ``check_selection`` the
    bound ``a**t < avg_Q <= 2**(mn) a**t`` is rechecked from the source data.
    Failures carry the violating ``(level, index)``.
    """
    grid = S.grid
    fails: list[tuple[str, int, int, str]] = []
    ts = sorted(S.levels)
    index = {t: {q: j for j, q in enumerate(S.levels[t])} for t in ts}

    def vol(q: DyadicCube) -> int:
        return q.cell_side(grid) ** grid.n

    def owner(q: DyadicCube, t: int):
        """The level-``t`` cube containing ``q`` (itself included), if any."""
        cur = q
        kmin = min((c.k for c in S.levels.get(t, [])), default=q.k)
        while True:
            if cur in index.get(t, {}):
                return cur
            if cur.k <= kmin:
                return None
            cur = parent(cur)

    for t in ts:
        cubes = S.levels[t]
        # (i) distinct cubes of one dyadic grid are disjoint unless nested
        if len(index[t]) != len(cubes):
            fails.append(("disjoint", t, 0, "duplicate cube"))
        kmin = min((c.k for c in cubes), default=0)
        for j, q in enumerate(cubes):
            cur = q
            while cur.k > kmin:
                cur = parent(cur)
                if cur in index[t]:
                    fails.append(("disjoint", t, j, f"inside cube {index[t][cur]} of the same level"))
                    break
        # (ii) nesting and (iii) half-volume bound
        inner = {q: 0 for q in cubes}
        for j, q in enumerate(S.levels.get(t + 1, [])):
            o = owner(q, t)
            if o is None:
                fails.append(("nested", t + 1, j, "not inside any cube of the previous level"))
            else:
                inner[o] += vol(q)
        for j, q in enumerate(cubes):
            if 2 * inner[q] > vol(q):
                fails.append(("half", t, j, f"{inner[q]} of {vol(q)} cells in the next level"))
            if vol(q) > 2 * (vol(q) - inner[q]):
                fails.append(("carrier", t, j, f"|E| = {vol(q) - inner[q]} below half of {vol(q)}"))
    # (iv) carrier sets disjoint: paint them on the box
    paint = np.zeros(grid.shape, dtype=np.int64)
    for t in ts:
        nxt = S.omega_mask(t + 1)
        for q in S.levels[t]:
            sl = q.to_cube(grid).slices(grid)
            paint[sl] += ~nxt[sl]
    if np.any(paint > 1):
        cell = tuple(int(v) for v in np.argwhere(paint > 1)[0])
        fails.append(("carrier", ts[0] if ts else 0, 0, f"carrier sets overlap at cell {cell}"))
    if check_selection and S.source is not None:
        fs = S.source
        m, n = fs.m, grid.n
        cap = 2.0 ** (m * n)
        for t in ts:
            thr = S.threshold(t)
            for j, q in enumerate(S.levels[t]):
                sums = np.array([[_box_sum(fi, grid, q)] for fi in fs.f])
                avg = float(product_average_from_sums(grid, sums, q.cell_side(grid), S.alpha)[0])
                if not (thr < avg <= cap * thr):
                    fails.append(("selection", t, j, f"average {avg!r} outside ({thr!r}, {cap * thr!r}]"))
    return SparseVerdict(not fails, fails)


def sparse_norm_bound(S: SparseFamily, nu, profile: ExponentProfile, fs: SampledFunctions | None = None) -> dict:
    """Sparse sum ``sum a**q avg_Q**q nu**q(Q)`` against the direct ``integral (M^d nu)**q``.

    ``nu`` is the product weight on the box.  The ratio sum/direct lies in
    ``[1, a**q 2**(mnq) / (1 - a**-q)]``.
    """
    from .operators import dyadic_maximal

    fs = S.source if fs is None else fs
    if fs is None or (S.source is not None and fs.digest() != S.source.digest()):
        raise ParameterError("sparse family was built from different data")
    grid = S.grid
    nu = np.asarray(nu, dtype=np.float64)
    if nu.shape != grid.shape:
        raise ParameterError("weight does not match the grid")
    q = profile.q
    nuq = nu**q
    total = 0.0
    for t in sorted(S.levels):
        for cube, avg in zip(S.levels[t], S.averages[t]):
            mass = _box_sum(nuq, grid, cube) * grid.cell_volume
            total += float(S.a) ** q * avg**q * mass
    md = dyadic_maximal(fs, profile, S.beta)
    direct = float(np.sum((md * nu) ** q) * grid.cell_volume)
    a_q = float(S.a) ** q
    upper = a_q * 2.0 ** (profile.m * profile.n * q) / (1.0 - 1.0 / a_q)
    ratio = total / direct if direct > 0 else (1.0 if total == 0 else math.inf)
    return {"sparse_sum": total, "direct": direct, "ratio": ratio, "ratio_upper": upper,
            "within": direct == total == 0 or 1.0 <= ratio <= upper}
