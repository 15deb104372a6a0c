"""End-to-end studies: sharp-exponent fitting, weak-type ratios, two-weight testing,
and the small presets that refinement studies run on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import isinf

import numpy as np

from .analytic import ExtremalFamily, PowerSpec, cell_averages, extremal_norms
from .errors import HypothesisError, ParameterError
from .families import CubeFamily, dyadic_family
from .grid import CellGrid, SampledFunctions, SummedAreaTable, Cube, lp_norm, weak_norm
from .kernels import RoughKernel, SphereFunction
from .operators import maximal_alpha
from .profile import ExponentProfile
from .weights import WeightVector, apq_constant

DEFAULT_EPS = tuple(2.0**-k for k in range(3, 13))
SLOPE_TOL = 0.05


# ------------------------------------------------------------ sharpness


def reference_exponents(profile: ExponentProfile) -> dict:
    """Lower, upper and (equal exponents) sharp reference values for the weight-constant power."""
    P = profile
    mp, q = P.m * P.p, P.q
    red = 1 - P.alpha / (P.m * P.n)
    sp = P.s_prime
    out = {
        "gamma_low": mp * red / (q * (mp - 1)),
        "gamma_high": red * max(P.p_primes) / q,
        "gamma_low_s": mp * (1 - sp * P.alpha / (P.m * P.n)) / (q * (mp - sp)) if mp > sp else None,
        "gamma_sharp": None,
    }
    if len(set(P.p_list)) == 1:
        r = P.p_list[0] / sp
        if r > 1:
            rp = r / (r - 1)
            out["gamma_sharp"] = rp * red / q
    return out


@dataclass
class SharpnessReport:
    eps: list[float]
    rows: list[dict]
    gamma_hat: float
    refs: dict
    tol: float
    passed: bool

    def to_json(self) -> dict:
        return {"gamma_hat": self.gamma_hat, **self.refs, "tol": self.tol, "passed": self.passed,
                "eps": self.eps, "fit": "ordinary least squares of log R on log W"}


def sharpness_run(profile: ExponentProfile, eps_list=DEFAULT_EPS, scale: float = 1.0,
                  tol: float = SLOPE_TOL) -> SharpnessReport:
    """Fit the slope of ``log R`` against ``log W`` over the extremal family.

    ``R = ||M_alpha f||_{L^q(nu^q)} / prod ||f_i||`` (witness lower bound for
    the numerator) and ``W = [w]_{A_(P,q)}`` on the interval family.
    ``scale`` multiplies every ``f_i``; the fit must not notice.
    """
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 3:
        raise ParameterError("need at least 3 eps values for a slope fit")
    if any(not 0 < e < 1 for e in eps_list) or any(a <= b for a, b in zip(eps_list, eps_list[1:])):
        raise ParameterError("eps values must be strictly decreasing in (0, 1)")
    if profile.n != 1:
        raise ParameterError("the sharpness family is one-dimensional (n = 1)")
    rows = []
    for e in eps_list:
        r = extremal_norms(ExtremalFamily(e, profile))
        c = scale**profile.m
        num, den = c * r.maximal_lower, c * r.product_norm
        rows.append({"eps": e, "product_norm": den, "maximal_lower": num, "R": num / den, "W": r.apq,
                     "apq_interval_lo": r.apq_interval[0], "apq_interval_hi": r.apq_interval[1]})
    x = np.log([row["W"] for row in rows])
    y = np.log([row["R"] for row in rows])
    gamma_hat = float(np.polyfit(x, y, 1)[0])
    refs = reference_exponents(profile)
    ok = gamma_hat >= refs["gamma_low"] * (1 - tol)
    if refs["gamma_sharp"] is not None:
        ok = ok and abs(gamma_hat - refs["gamma_sharp"]) <= tol * refs["gamma_sharp"]
    return SharpnessReport(eps_list, rows, gamma_hat, refs, tol, bool(ok))


def log_slope(xs, ys) -> float:
    """Least-squares slope of ``log ys`` against ``log xs``."""
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


# ------------------------------------------------------------ weak type


@dataclass
class WeakTypeReport:
    ratio: float
    weak_norm: float
    apq: float
    product_norm: float
    case: str

    def to_json(self) -> dict:
        return {"ratio": self.ratio, "weak_norm": self.weak_norm, "apq": self.apq,
                "product_norm": self.product_norm, "case": self.case}


def exponent_case(profile: ExponentProfile) -> str:
    ones = [pi == 1 for pi in profile.p_list]
    if all(ones):
        return "all p_i = 1"
    if not any(ones):
        return "all p_i > 1"
    return "mixed"


def weaktype_run(fs: SampledFunctions, wv: WeightVector, profile: ExponentProfile,
                 family: CubeFamily | None = None, weight_family: CubeFamily | None = None) -> WeakTypeReport:
    """``||M_alpha(f) nu||_{L^{q,inf}} / ([w]_{A_(P,q)}^{1/q} prod ||f_i||_{L^{p_i}(w_i^{p_i})})``."""
    profile.require_weak()
    grid = fs.grid
    M = maximal_alpha(fs, profile, family)
    q = profile.q
    weak = weak_norm(grid, M * wv.nu, None, q)
    wfam = dyadic_family(grid, clip="inside") if weight_family is None else weight_family
    W = apq_constant(wv, wfam).value
    prod = 1.0
    for i, pi in enumerate(profile.p_list):
        prod *= lp_norm(grid, fs.f[i], wv.w[i] ** pi, pi)
    ratio = weak / (W ** (1 / q) * prod) if prod > 0 else 0.0
    return WeakTypeReport(ratio, weak, W, prod, exponent_case(profile))


# ------------------------------------------------------------ two-weight testing


def x_average(grid: CellGrid, values, cube: Cube, r: float) -> float:
    """``(avg_Q |f|^r)^(1/r)``, the dilation-normalised ``L^r`` norm of ``f 1_Q``."""
    if not r >= 1:
        raise ParameterError("X = L^r needs r >= 1")
    values = np.asarray(values, dtype=np.float64)
    sub = np.abs(values[cube.slices()])
    return float(np.mean(sub**r) ** (1.0 / r))


@dataclass
class TwoWeightConfig:
    u: np.ndarray
    v: np.ndarray
    r: tuple[float, ...]

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.float64)
        self.v = np.asarray(self.v, dtype=np.float64)
        self.r = tuple(float(x) for x in self.r)
        if any(not ri >= 1 for ri in self.r):
            raise ParameterError("X = L^r needs r >= 1")
        if np.any(self.u <= 0) or np.any(self.v <= 0):
            raise ParameterError("weights must be strictly positive")


def testing_constant(cfg: TwoWeightConfig, profile: ExponentProfile, grid: CellGrid,
                     family: CubeFamily | None = None):
    """``K = sup_Q avg_Q(u)^(1/q) prod_i (avg_Q v_i^(-r_i))^(1/r_i)``; returns ``(K, cube)``."""
    family = dyadic_family(grid, clip="inside") if family is None else family
    if not family.all_inside():
        raise ParameterError("testing constant needs cubes inside the box")
    q = profile.q
    sat_u = SummedAreaTable(cfg.u)
    sats = [SummedAreaTable(cfg.v[i] ** (-ri)) for i, ri in enumerate(cfg.r)]

    def value(lo, side):
        cells = float(side) ** grid.n
        out = (sat_u.box_sum(lo, lo + side) / cells) ** (1.0 / q)
        for sat, ri in zip(sats, cfg.r):
            out = out * (sat.box_sum(lo, lo + side) / cells) ** (1.0 / ri)
        return out

    return family.best(value)


@dataclass
class TwoWeightReport:
    K: float
    cube: Cube | None
    lhs: float
    rhs: float
    constant: float

    def to_json(self) -> dict:
        return {"K": self.K, "argmax": None if self.cube is None else self.cube.to_json(),
                "lhs": self.lhs, "rhs": self.rhs, "empirical_constant": self.constant}


def twoweight_check(fs: SampledFunctions, cfg: TwoWeightConfig, profile: ExponentProfile,
                    family: CubeFamily | None = None, weight_family: CubeFamily | None = None) -> TwoWeightReport:
    """Empirical ``C`` in ``||M_alpha f||_{L^q(u)} <= C K prod ||f_i v_i||_{p_i}``."""
    profile.require_strong()
    for ri, pp in zip(cfg.r, profile.p_primes):
        if not ri > pp:
            raise HypothesisError(f"requires r_i > p_i' so that the X'-maximal operator is bounded (r={ri:g}, p'={pp:g})")
    grid = fs.grid
    K, cube = testing_constant(cfg, profile, grid, weight_family)
    M = maximal_alpha(fs, profile, family)
    lhs = lp_norm(grid, M, cfg.u, profile.q)
    prod = 1.0
    for i, pi in enumerate(profile.p_list):
        prod *= lp_norm(grid, fs.f[i] * cfg.v[i], None, pi)
    rhs = K * prod
    return TwoWeightReport(K, cube, lhs, rhs, lhs / rhs if rhs > 0 else 0.0)


# ------------------------------------------------------------ presets


def indicator(grid: CellGrid, lo: float, hi: float) -> np.ndarray:
    """``1_[lo, hi)^n`` on the grid (cell centres)."""
    c = grid.centers(axis_only=True)
    ax = ((c >= lo) & (c < hi)).astype(float)
    out = ax
    for _ in range(grid.n - 1):
        out = np.multiply.outer(out, ax)
    return out


def sign_kernel(m: int, s: float = 2.0) -> RoughKernel:
    """Product of ``m`` one-sided kernels ``Omega(+1) = 2``, ``Omega(-1) = 0``."""
    return RoughKernel.product([SphereFunction(1, {"+": 2.0, "-": 0.0}) for _ in range(m)], s)


def sign_kernel_preset(m: int, L: int):
    """``n = 1``, ``f_i = 1_[0,1)`` on ``[0, 2)``, sign kernel with ``s = 2``."""
    grid = CellGrid(1, 1, L)
    fs = SampledFunctions(grid, np.stack([indicator(grid, 0.0, 1.0)] * m))
    profile = ExponentProfile(m, 1, 0.25, (3.0,) * m, s=2.0)
    return fs, sign_kernel(m), profile


def geometric_preset(L: int):
    """``n = m = 1``, ``Omega = 1``, ``alpha = 1/2``, ``eps = 1/4``, ``f = 1_[0,1)`` on ``[0, 2)``."""
    grid = CellGrid(1, 1, L)
    fs = SampledFunctions(grid, indicator(grid, 0.0, 1.0))
    return fs, RoughKernel.const(1.0, 1, 1), ExponentProfile(1, 1, 0.5, (1.5,)), 0.25


WEAK_CASES = {"ones": (1.0, 1.0), "above": (2.0, 2.0), "mixed": (1.0, 2.0)}


def weaktype_preset(case: str, L: int, eps: float = 0.25):
    """``n = 1``, ``m = 2``, ``alpha = 1/2``: extremal power data on ``[0, 1)`` as exact cell averages."""
    if case not in WEAK_CASES:
        raise ParameterError(f"unknown weak-type case {case!r}")
    profile = ExponentProfile(2, 1, 0.5, WEAK_CASES[case])
    grid = CellGrid(1, 0, L)
    fam = ExtremalFamily(eps, profile)
    f = np.stack([cell_averages(grid, fam.f)] * 2)
    w = np.stack([cell_averages(grid, fam.omega(i)) for i in range(2)])
    w = np.where(w > 0, w, 1.0)
    return SampledFunctions(grid, f, w), WeightVector(grid, w, profile), profile


def twoweight_preset(L: int, eps: float = 0.25):
    """Power weights from the extremal family: ``u = nu^q``, ``v_i = w_i``, ``r_i = p_i' / (1 - eps/2)``."""
    profile = ExponentProfile(2, 1, 0.5, (2.0, 2.0))
    grid = CellGrid(1, 0, L)
    fam = ExtremalFamily(eps, profile)
    f = np.stack([cell_averages(grid, fam.f)] * 2)
    v = np.stack([cell_averages(grid, fam.omega(i)) for i in range(2)])
    u = cell_averages(grid, fam.nu ** profile.q)
    r = tuple(pp / (1 - eps / 2) for pp in profile.p_primes)
    return SampledFunctions(grid, f), TwoWeightConfig(u, v, r), profile


def drift(a: float, b: float) -> float:
    """Relative change ``|b - a| / |a|``."""
    return abs(b - a) / abs(a) if a else (0.0 if b == 0 else float("inf"))
