"""Fractional maximal operators, their rough and weighted variants, and the
fractional integral, all evaluated cellwise on a :class:`CellGrid`.

Maximal operators return per-cell fields: the value at a cell is the largest
product average over family cubes containing that cell.  Functions are taken
to vanish outside the box, so families may contain cubes that stick out of it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import inf, sqrt

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import fftconvolve

from .dyadic import Bits, DyadicPyramid, all_betas
from .errors import BudgetError, InvariantViolation, ParameterError
from .families import CubeFamily, CubeGroup, all_cubes_family, dyadic_family
from .grid import CellGrid, SampledFunctions, product_average_from_sums
from .kernels import RoughKernel
from .profile import ExponentProfile, conjugate

DEFAULT_JOINT_BUDGET = 2 * 10**7
DEFAULT_SAMPLE_POINTS = 33


def _check(fs: SampledFunctions, profile: ExponentProfile):
    if fs.m != profile.m or fs.grid.n != profile.n:
        raise ParameterError(f"profile (m={profile.m}, n={profile.n}) does not match data "
                             f"(m={fs.m}, n={fs.grid.n})")


def _finish(field_values: np.ndarray) -> np.ndarray:
    # cells no family cube reaches get the empty supremum of nonnegative terms
    return np.where(np.isneginf(field_values), 0.0, field_values)


def maximal_alpha(fs: SampledFunctions, profile: ExponentProfile, family: CubeFamily | None = None) -> np.ndarray:
    """``M_alpha`` at every cell, the sup running over ``family`` (default: shifted dyadic union)."""
    _check(fs, profile)
    family = dyadic_family(fs.grid) if family is None else family
    alpha, sats, grid = profile.alpha, fs.sats, fs.grid

    def value(lo, side):
        sums = np.stack([sat.box_sum(lo, lo + side) for sat in sats])
        return product_average_from_sums(grid, sums, side, alpha)

    return _finish(family.sup_field(value))


def maximal_argmax(fs: SampledFunctions, profile: ExponentProfile, family: CubeFamily | None = None):
    """Largest product average over the family and the first cube attaining it."""
    _check(fs, profile)
    family = dyadic_family(fs.grid) if family is None else family
    sats, grid = fs.sats, fs.grid

    def value(lo, side):
        sums = np.stack([sat.box_sum(lo, lo + side) for sat in sats])
        return product_average_from_sums(grid, sums, side, profile.alpha)

    return family.best(value)


def dyadic_maximal(fs: SampledFunctions, profile: ExponentProfile, beta: Bits) -> np.ndarray:
    """``M_alpha^{D_beta}`` via per-level block sums of one shifted dyadic grid."""
    _check(fs, profile)
    grid = fs.grid
    pyr = DyadicPyramid(grid, fs.f, beta)
    out = np.zeros(grid.shape)
    for k in sorted(pyr.levels):
        sums = pyr.levels[k]
        avg = product_average_from_sums(grid, sums.reshape(fs.m, -1), pyr.side(k), profile.alpha)
        avg = avg.reshape(sums.shape[1:])
        np.maximum(out, avg[np.ix_(*pyr.cell_block_index(k))], out=out)
    return out


# ------------------------------------------------------------ shift bound


@dataclass
class DominationReport:
    constant: float
    worst_ratio: float
    worst_cell: tuple[int, ...] | None
    passed: bool
    lhs: np.ndarray = field(repr=False)
    rhs: np.ndarray = field(repr=False)

    def to_json(self) -> dict:
        return {"constant": self.constant, "worst_ratio": self.worst_ratio,
                "worst_cell": None if self.worst_cell is None else list(self.worst_cell), "passed": self.passed}


def shift_domination_check(fs: SampledFunctions, profile: ExponentProfile, family: CubeFamily | None = None,
                           rtol: float = 1e-12, strict: bool = True, budget: int | None = None) -> DominationReport:
    """Check ``M_alpha <= 6**(mn - alpha) * sum_beta M_alpha^{D_beta}`` at every cell.

    The left side runs over every cell-aligned cube in the box unless another
    family is given.  With ``strict`` a violation beyond ``rtol`` raises.
    """
    _check(fs, profile)
    grid = fs.grid
    family = all_cubes_family(grid, budget) if family is None else family
    lhs = maximal_alpha(fs, profile, family)
    const = 6.0 ** (profile.m * profile.n - profile.alpha)
    total = np.zeros(grid.shape)
    for beta in all_betas(grid.n):
        total = total + dyadic_maximal(fs, profile, beta)
    rhs = const * total
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > 0, lhs / rhs, np.where(lhs > 0, inf, 0.0))
    cell = tuple(int(v) for v in np.unravel_index(int(np.argmax(ratio)), grid.shape))
    worst = float(ratio[cell])
    passed = bool(np.all(lhs <= rhs * (1.0 + rtol)))
    if strict and not passed:
        raise InvariantViolation(f"shifted dyadic bound fails at cell {cell}: ratio {worst!r}")
    return DominationReport(const, worst, cell, passed, lhs, rhs)


# ------------------------------------------------------------ rough operators


def _windows(grid: CellGrid, g: CubeGroup):
    """Per cube: an in-box window of side ``b = min(side, N)`` covering ``cube ∩ box``.

    Returns ``(b, start (k, n), mask (k, b, ..., b))``; ``mask`` marks window
    cells that belong to the cube.
    """
    N = grid.cells_per_side
    n = grid.n
    b = min(g.side, N)
    start = np.clip(g.lo, 0, N - b)
    t = np.arange(b)
    mask = None
    for a in range(n):
        pos = start[:, a, None] + t[None, :]
        ok = (pos >= g.lo[:, a, None]) & (pos < g.lo[:, a, None] + g.side)
        shape = [len(g.lo)] + [1] * n
        shape[a + 1] = b
        ok = ok.reshape(shape)
        mask = ok if mask is None else mask & ok
    return b, start, mask


def _gather(values: np.ndarray, b: int, start: np.ndarray) -> np.ndarray:
    win = sliding_window_view(values, (b,) * values.ndim)
    return win[tuple(start.T)]


def _scatter_max(out: np.ndarray, start: np.ndarray, mask: np.ndarray, vals: np.ndarray):
    n = out.ndim
    b = mask.shape[1]
    grids = np.meshgrid(*([np.arange(b)] * n), indexing="ij")
    coords = [start[:, a].reshape((-1,) + (1,) * n) + grids[a][None] for a in range(n)]
    coords = [np.broadcast_to(c, mask.shape)[mask] for c in coords]
    flat = np.ravel_multi_index(coords, out.shape)
    np.maximum.at(out.reshape(-1), flat, vals[mask])


def _offset_table(b: int, n: int) -> np.ndarray:
    """Cell offsets ``d`` in ``(-b, b)**n`` as an array of shape ``((2b-1)**n, n)``."""
    axes = [np.arange(-b + 1, b)] * n
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _window_convolve(fw: np.ndarray, ker: np.ndarray) -> np.ndarray:
    """``out[c, x] = sum_y ker[x - y] * fw[c, y]`` inside each window."""
    n = fw.ndim - 1
    b = fw.shape[1]
    if ker.size <= 1024:
        out = np.zeros_like(fw)
        for d in itertools.product(range(-b + 1, b), repeat=n):
            kval = ker[tuple(di + b - 1 for di in d)]
            if kval == 0:
                continue
            dst = (slice(None),) + tuple(slice(max(di, 0), b + min(di, 0)) for di in d)
            src = (slice(None),) + tuple(slice(max(-di, 0), b - max(di, 0)) for di in d)
            out[dst] += kval * fw[src]
        return out
    full = fftconvolve(fw, ker[None], mode="full", axes=tuple(range(1, n + 1)))
    sl = (slice(None),) + (slice(b - 1, 2 * b - 1),) * n
    return np.maximum(full[sl], 0.0)


def _joint_weights(kernel: RoughKernel, b: int, n: int, m: int) -> np.ndarray:
    """``|Omega(x - y_1, ..., x - y_m)|`` for all window cells, shape ``(b**n,) * (m + 1)``."""
    cells = np.stack([g.ravel() for g in np.meshgrid(*([np.arange(b)] * n), indexing="ij")], axis=-1)
    c = len(cells)
    idx = np.stack([g.ravel() for g in np.meshgrid(*([np.arange(c)] * (m + 1)), indexing="ij")], axis=-1)
    offsets = cells[idx[:, :1]] - cells[idx[:, 1:]]
    return kernel.joint_stencil(offsets).reshape((c,) * (m + 1))


def rough_maximal(fs: SampledFunctions, kernel: RoughKernel, profile: ExponentProfile,
                  family: CubeFamily | None = None, budget: int | None = None) -> np.ndarray:
    """``M_{Omega,alpha}`` at every cell centre.

    The constant form is ``|c|`` times :func:`maximal_alpha`.  The product form
    factors into one kernel-weighted window sum per function; the joint form is
    the literal ``m``-fold cell sum and is gated by ``budget``.  The cell of the
    evaluation point enters with the sphere average of ``|Omega|``.
    """
    _check(fs, profile)
    if kernel.n != profile.n or kernel.m != profile.m:
        raise ParameterError("kernel shape does not match the profile")
    grid = fs.grid
    family = dyadic_family(grid) if family is None else family
    if kernel.form == "constant":
        return abs(kernel.constant) * maximal_alpha(fs, profile, family)
    n, m = grid.n, fs.m
    budget = DEFAULT_JOINT_BUDGET if budget is None else budget
    if kernel.form == "joint":
        work = sum(len(g) * min(g.side, grid.cells_per_side) ** (n * (m + 1)) for g in family.groups)
        if work > budget:
            raise BudgetError(f"joint rough kernel needs ~{work} cell-tuple evaluations, budget is {budget}")
    out = np.full(grid.shape, -np.inf)
    hn = grid.cell_volume
    for g in family.groups:
        if len(g) == 0:
            continue
        b, start, mask = _windows(grid, g)
        fws = [_gather(fi, b, start) * mask for fi in fs.f]
        scale = ((g.side * grid.h) ** n) ** (profile.alpha / (m * n) - 1.0)
        if kernel.form == "product":
            offs = _offset_table(b, n)
            vals = np.ones(mask.shape)
            for i in range(m):
                ker = kernel.factor_stencil(i, offs).reshape((2 * b - 1,) * n)
                vals = vals * (scale * (hn * _window_convolve(fws[i], ker)))
        else:
            W = _joint_weights(kernel, b, n, m)
            letters = "abcdefgh"[:m]
            spec = "x" + letters + "," + ",".join("k" + c for c in letters) + "->kx"
            flat = [fw.reshape(len(g), -1) for fw in fws]
            vals = np.einsum(spec, W, *flat).reshape(mask.shape) * (scale * hn) ** m
        _scatter_max(out, start, mask, vals)
    return _finish(out)


@dataclass
class RatioReport:
    constant: float
    cell: tuple[int, ...] | None
    details: dict
    lhs: np.ndarray = field(repr=False)
    rhs: np.ndarray = field(repr=False)

    def to_json(self) -> dict:
        return {"empirical_constant": self.constant, "cell": None if self.cell is None else list(self.cell),
                **self.details}


def _sup_ratio(lhs: np.ndarray, rhs: np.ndarray) -> tuple[float, tuple | None]:
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > 0, lhs / rhs, np.where(lhs > 0, inf, 0.0))
    if ratio.size == 0 or not np.any(ratio > 0):
        return 0.0, None
    idx = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    return float(ratio[idx]), tuple(int(v) for v in idx)


def rough_vs_smooth_check(fs: SampledFunctions, kernel: RoughKernel, profile: ExponentProfile,
                          family: CubeFamily | None = None, budget: int | None = None) -> RatioReport:
    """Empirical ``sup M_{Omega,alpha}(f) / (||Omega||_s * M_{alpha s'}(f^{s'})^{1/s'})`` over cells."""
    sp = conjugate(kernel.s)
    if not profile.alpha * sp < profile.m * profile.n:
        raise ParameterError("requires alpha * s' < mn")
    lhs = rough_maximal(fs, kernel, profile, family, budget)
    norm = kernel.ls_norm()
    rhs_base = maximal_alpha(fs.power(sp), profile.with_alpha(profile.alpha * sp), family)
    rhs = norm * rhs_base ** (1.0 / sp)
    const, cell = _sup_ratio(lhs, rhs)
    return RatioReport(const, cell, {"ls_norm": norm, "s": kernel.s, "s_prime": sp}, lhs, rhs)


# ------------------------------------------------------------ fractional integral


def sample_points(grid: CellGrid, count: int = DEFAULT_SAMPLE_POINTS) -> np.ndarray:
    """``count`` equally spaced interior points on the box diagonal, shape ``(count, n)``."""
    side = float(grid.side_length)
    t = side * (np.arange(1, count + 1) / (count + 1))
    return np.repeat(t[:, None], grid.n, axis=1)


def _power_segment(u: np.ndarray, v: np.ndarray, alpha: float, plus: float, minus: float) -> np.ndarray:
    """``integral_u^v |Omega(sign y)| |y|^(alpha-1) dy`` in closed form (1-D)."""
    def G(y):
        return np.sign(y) * np.abs(y) ** alpha / alpha

    pos = plus * (G(np.maximum(v, 0.0)) - G(np.maximum(u, 0.0)))
    neg = minus * (G(np.minimum(v, 0.0)) - G(np.minimum(u, 0.0)))
    return pos + neg


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss(order: int):
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _GL_CACHE[order]


def _box_gauss(lo: np.ndarray, hi: np.ndarray, integrand, order: int) -> np.ndarray:
    """Tensor Gauss-Legendre over boxes ``(k, d)``."""
    x, w = _gauss(order)
    k, d = lo.shape
    nodes = np.stack([g.ravel() for g in np.meshgrid(*([x] * d), indexing="ij")], axis=-1)
    wts = np.prod(np.stack([g.ravel() for g in np.meshgrid(*([w] * d), indexing="ij")], axis=-1), axis=-1)
    mid, half = (lo + hi) / 2, (hi - lo) / 2
    pts = mid[:, None, :] + half[:, None, :] * nodes[None]
    vals = integrand(pts.reshape(-1, d)).reshape(k, -1)
    return (vals @ wts) * np.prod(half, axis=1)


def _regular_boxes(lo, hi, integrand, order, depth):
    """Integrate over boxes away from the origin; boxes close to it are bisected ``depth`` times."""
    if len(lo) == 0:
        return np.zeros(0)
    size = np.max(hi - lo, axis=1)
    gap = np.linalg.norm(np.maximum(np.maximum(lo, -hi), 0.0), axis=1)
    near = (gap < 2.0 * size) & (depth > 0)
    out = np.zeros(len(lo))
    if np.any(~near):
        out[~near] = _box_gauss(lo[~near], hi[~near], integrand, order)
    if np.any(near):
        clo, chi, owner = _bisect(lo[near], hi[near])
        sub = _regular_boxes(clo, chi, integrand, order, depth - 1)
        out[near] = np.bincount(owner, sub, minlength=int(near.sum()))
    return out


def _bisect(lo, hi):
    k, d = lo.shape
    mid = (lo + hi) / 2
    clo, chi, owner = [], [], []
    for bits in itertools.product((0, 1), repeat=d):
        sel = np.array(bits, dtype=bool)
        clo.append(np.where(sel, mid, lo))
        chi.append(np.where(sel, hi, mid))
        owner.append(np.arange(k))
    return np.concatenate(clo), np.concatenate(chi), np.concatenate(owner)


def _corner_box(lo, hi, integrand, order, depth, alpha):
    """Boxes with the origin at a corner: homogeneity of degree ``alpha - d`` gives
    ``I(B) = I(B minus its half-size corner box) / (1 - 2**-alpha)``."""
    clo, chi, owner = _bisect(lo, hi)
    at_origin = np.all((clo == 0) | (chi == 0), axis=1) & np.all(np.minimum(np.abs(clo), np.abs(chi)) == 0, axis=1)
    sub = np.zeros(len(clo))
    sub[~at_origin] = _regular_boxes(clo[~at_origin], chi[~at_origin], integrand, order, depth)
    return np.bincount(owner, sub, minlength=len(lo)) / (1.0 - 2.0 ** (-alpha))


def _box_integrals(lo, hi, integrand, alpha, order=6, depth=3):
    """``integral_B integrand`` for boxes ``(k, d)``, integrand homogeneous of degree ``alpha - d``."""
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    out = np.zeros(len(lo))
    singular = np.all((lo <= 0) & (hi >= 0), axis=1)
    if np.any(~singular):
        out[~singular] = _regular_boxes(lo[~singular], hi[~singular], integrand, order, depth)
    for r in np.flatnonzero(singular):
        parts_lo, parts_hi = [], []
        for bits in itertools.product((0, 1), repeat=lo.shape[1]):
            plo = np.where(bits, 0.0, lo[r])
            phi = np.where(bits, hi[r], 0.0)
            if np.all(phi > plo):
                parts_lo.append(plo)
                parts_hi.append(phi)
        out[r] = _corner_box(np.array(parts_lo), np.array(parts_hi), integrand, order, depth, alpha).sum()
    return out


def frac_integral(fs: SampledFunctions, kernel: RoughKernel | None, profile: ExponentProfile, x,
                  truncation: float | None = None, method: str = "cell", budget: int | None = None) -> float:
    """``I_{Omega,alpha}(f)(x) = integral |Omega(y)| |y|^(alpha - mn) prod f_i(x - y_i) dy`` over ``|y| < truncation``.

    ``method="cell"`` integrates the kernel exactly over each cell (closed form
    when ``mn = 1``, singularity-aware quadrature otherwise), so for
    piecewise-constant data the only error is quadrature error.
    ``method="midpoint"`` samples the kernel at cell centres and drops the
    cell of the singularity.
    """
    _check(fs, profile)
    grid = fs.grid
    n, m = grid.n, fs.m
    d = m * n
    alpha = profile.alpha
    if not 0 < alpha < d:
        raise ParameterError("requires 0 < alpha < mn")
    kernel = RoughKernel.const(1.0, n, m) if kernel is None else kernel
    x = np.asarray(x, dtype=np.float64).reshape(n)
    h = grid.h
    R = (sqrt(d) * float(grid.side_length)) * (1 + 1e-12) if truncation is None else float(truncation)
    if R < h:
        raise ParameterError("truncation radius must be at least one cell width")
    if not np.any(fs.f):
        return 0.0
    supports = [np.argwhere(fi > 0) for fi in fs.f]
    budget = DEFAULT_JOINT_BUDGET if budget is None else budget
    count = int(np.prod([len(s) for s in supports], dtype=np.float64))
    if count > budget:
        raise BudgetError(f"fractional integral needs {count} cell tuples, budget is {budget}")

    if d == 1 and method == "cell":
        c = supports[0][:, 0]
        u = np.clip(x[0] - (c + 1) * h, -R, R)
        v = np.clip(x[0] - c * h, -R, R)
        plus = minus = abs(kernel.constant)
        if kernel.form != "constant":
            tab = kernel.factors[0].table if kernel.form == "product" else kernel.table
            plus, minus = abs(float(tab[0])), abs(float(tab[1]))
        w = _power_segment(u, v, alpha, plus, minus)
        return float(np.sum(fs.f[0][c] * w))

    def integrand(y):
        r = np.linalg.norm(y, axis=1)
        om = kernel.joint_stencil(y.reshape(-1, m, n))
        with np.errstate(divide="ignore"):
            val = om * r ** (alpha - d)
        return np.where((r > 0) & (r < R), val, 0.0)

    # every tuple of support cells as one box in R^(mn): y_i ranges over x - cell_i
    idx = np.stack([g.ravel() for g in np.meshgrid(*[np.arange(len(s)) for s in supports], indexing="ij")], axis=-1)
    cells = [supports[i][idx[:, i]] for i in range(m)]
    lo = np.concatenate([x[None] - (c + 1) * h for c in cells], axis=1)
    hi = np.concatenate([x[None] - c * h for c in cells], axis=1)
    fprod = np.ones(len(idx))
    for i in range(m):
        fprod = fprod * fs.f[i][tuple(cells[i].T)]
    if method == "midpoint":
        mid = (lo + hi) / 2
        own = np.all((lo <= 0) & (hi > 0), axis=1)
        vals = integrand(mid) * h**d
        return float(np.sum(np.where(own, 0.0, vals) * fprod))
    if method != "cell":
        raise ParameterError(f"unknown method {method!r}")
    return float(np.sum(_box_integrals(lo, hi, integrand, alpha) * fprod))


@dataclass
class GeometricMeanReport:
    constant: float
    points: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    eps: float

    def to_json(self) -> dict:
        i = int(np.argmax(np.where(self.rhs > 0, self.lhs / np.where(self.rhs > 0, self.rhs, 1), 0)))
        return {"empirical_constant": self.constant, "eps": self.eps, "points": len(self.points),
                "worst_point": [float(v) for v in self.points[i]]}


def geometric_mean_domination_check(fs: SampledFunctions, kernel: RoughKernel | None, profile: ExponentProfile,
                                    eps: float, points=None, family: CubeFamily | None = None,
                                    budget: int | None = None) -> GeometricMeanReport:
    """Empirical ``sup_x I_{Omega,alpha}(x) / sqrt(M_{Omega,alpha+eps}(x) M_{Omega,alpha-eps}(x))``.

    Maximal values are read at the cell containing each sample point.
    """
    _check(fs, profile)
    if not (0 < eps < profile.alpha and profile.alpha + eps < profile.m * profile.n):
        raise ParameterError("requires 0 < eps < alpha and alpha + eps < mn")
    grid = fs.grid
    kernel = RoughKernel.const(1.0, grid.n, fs.m) if kernel is None else kernel
    points = sample_points(grid) if points is None else np.asarray(points, dtype=np.float64).reshape(-1, grid.n)
    up = rough_maximal(fs, kernel, profile.with_alpha(profile.alpha + eps), family, budget)
    down = rough_maximal(fs, kernel, profile.with_alpha(profile.alpha - eps), family, budget)
    lhs = np.array([frac_integral(fs, kernel, profile, p, budget=budget) for p in points])
    cells = [grid.cell_of_point(p) for p in points]
    mu = np.array([up[c] for c in cells])
    md = np.array([down[c] for c in cells])
    if np.any((md == 0) & (lhs > 0)):
        raise InvariantViolation("fractional integral positive where M_{alpha-eps} vanishes")
    rhs = np.sqrt(mu * md)
    const, _ = _sup_ratio(lhs, rhs)
    return GeometricMeanReport(const, points, lhs, rhs, eps)


# ------------------------------------------------------------ weighted maximal


def weighted_maximal(f, sigma, profile: ExponentProfile, grid: CellGrid, family: CubeFamily | None = None) -> np.ndarray:
    """``sup_{Q containing x} sigma(Q)^(alpha/(nm) - 1) * integral_Q f sigma`` over in-box dyadic cubes."""
    from .grid import SummedAreaTable

    f = np.asarray(f, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    if f.shape != grid.shape or sigma.shape != grid.shape:
        raise ParameterError("f and sigma must match the grid")
    if np.any(sigma <= 0):
        raise ParameterError("sigma must be strictly positive")
    family = dyadic_family(grid, clip="inside") if family is None else family
    expo = profile.alpha / (profile.n * profile.m) - 1.0
    sat_s = SummedAreaTable(sigma)
    sat_fs = SummedAreaTable(np.abs(f) * sigma)
    hn = grid.cell_volume

    def value(lo, side):
        mass = hn * sat_s.box_sum(lo, lo + side)
        return mass**expo * (hn * sat_fs.box_sum(lo, lo + side))

    return _finish(family.sup_field(value))
