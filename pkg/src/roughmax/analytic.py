"""Closed-form 1-D power-function backend for the extremal weight family.

With ``f_i = x^(eps-1) 1_(0,1)`` and ``w_i = |x|^((1-eps)(1-1/p_i))`` every
norm, weight constant and witness average is an integral of a pure power, so
no discretisation enters.  ``dps`` switches the arithmetic to mpmath at the
given decimal precision; the default is float64.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import isinf, log

import mpmath

from .errors import DivergenceError, HypothesisError, ParameterError
from .profile import ExponentProfile


@dataclass(frozen=True)
class PowerSpec:
    """``c * x**e`` on ``x > 0``."""

    c: float
    e: float

    def __post_init__(self):
        if not self.c > 0:
            raise ParameterError("power coefficient must be positive")

    def __mul__(self, other: "PowerSpec") -> "PowerSpec":
        return PowerSpec(self.c * other.c, self.e + other.e)

    def __pow__(self, r: float) -> "PowerSpec":
        return PowerSpec(self.c**r, self.e * r)


def power_integral(spec: PowerSpec, a, b, dps: int | None = None):
    """``integral_a^b c x^e dx`` in closed form; ``dps`` selects mpmath precision."""
    if not 0 <= a < b:
        raise ParameterError("need 0 <= a < b")
    if a == 0 and spec.e <= -1:
        raise DivergenceError(f"x^{spec.e} is not integrable at 0")
    if dps is None:
        c, e = spec.c, spec.e
        if e == -1:
            return c * log(b / a)
        return c * (b ** (e + 1) - a ** (e + 1)) / (e + 1)
    with mpmath.workdps(dps):
        c, e, a, b = mpmath.mpf(spec.c), mpmath.mpf(spec.e), mpmath.mpf(a), mpmath.mpf(b)
        if e == -1:
            return c * mpmath.log(b / a)
        return c * (b ** (e + 1) - a ** (e + 1)) / (e + 1)


def _pow(x, y, dps):
    if dps is None:
        return x**y
    with mpmath.workdps(dps):
        return mpmath.mpf(x) ** mpmath.mpf(y)


@dataclass(frozen=True)
class ExtremalFamily:
    eps: float
    profile: ExponentProfile

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ParameterError("eps must lie in (0, 1)")
        if self.profile.n != 1:
            raise ParameterError("the extremal family is one-dimensional (n = 1)")

    @property
    def f(self) -> PowerSpec:
        return PowerSpec(1.0, -1.0 + self.eps)

    def omega(self, i: int) -> PowerSpec:
        return PowerSpec(1.0, (1 - self.eps) * (1 - 1 / self.profile.p_list[i]))

    @property
    def nu(self) -> PowerSpec:
        P = self.profile
        return PowerSpec(1.0, (1 - self.eps) * (P.m - 1 / P.p))

    def sigma(self, i: int) -> PowerSpec:
        """``w_i^(-p_i')``, which is ``x^-(1-eps)`` for every ``p_i > 1``."""
        pp = self.profile.p_primes[i]
        if isinf(pp):
            raise ParameterError("sigma_i is undefined for p_i = 1")
        return self.omega(i) ** (-pp)


def product_norm(fam: ExtremalFamily, dps: int | None = None):
    """``prod_i ||f_i||_{L^{p_i}(w_i^{p_i})}``."""
    out = 1.0 if dps is None else mpmath.mpf(1)
    for pi in fam.profile.p_list:
        # (f w_i)^p_i = x^(p_i(eps-1) + (1-eps)(p_i-1)) = x^(eps-1); the simplified
        # exponent avoids the cancellation in e + 1 = eps for small eps
        integrand = PowerSpec(1.0, fam.eps - 1.0)
        out = out * _pow(power_integral(integrand, 0, 1, dps), 1 / pi, dps)
    return out


def interval_family(j_max: int = 40) -> list[tuple[float, float]]:
    """``(0, t]`` and ``[t, 2t]`` for ``t = 2**-j``, ``j = 0..j_max``."""
    out = []
    for j in range(j_max + 1):
        t = 2.0**-j
        out += [(0.0, t), (t, 2 * t)]
    return out


def apq_on_interval(fam: ExtremalFamily, a: float, b: float, dps: int | None = None):
    """``avg(nu^q) * prod_i avg(w_i^(-p_i'))^(q/p_i')`` on ``(a, b)``; ``(inf w_i)^-q`` when ``p_i = 1``."""
    P = fam.profile
    q = P.q
    length = b - a
    val = power_integral(fam.nu ** q, a, b, dps) / length
    for i, pi in enumerate(P.p_list):
        if pi == 1:
            e = fam.omega(i).e
            inf_w = _pow(a if e >= 0 else b, e, dps) if (a > 0 or e >= 0) else 0.0
            if inf_w == 0:
                raise DivergenceError("inf of w_i vanishes on the interval")
            val = val * _pow(inf_w, -q, dps)
        else:
            pp = P.p_primes[i]
            val = val * _pow(power_integral(fam.sigma(i), a, b, dps) / length, q / pp, dps)
    return val


def apq_constant(fam: ExtremalFamily, intervals=None, dps: int | None = None):
    """Sup of :func:`apq_on_interval` over the interval family; returns ``(value, interval)``."""
    intervals = interval_family() if intervals is None else intervals
    best, arg = None, None
    for a, b in intervals:
        v = apq_on_interval(fam, a, b, dps)
        # intervals (0, t] tie up to rounding; keep the first unless clearly larger
        if best is None or v > best * (1 + 1e-12):
            best, arg = v, (a, b)
    return best, arg


def witness_lower_bound(fam: ExtremalFamily, dps: int | None = None):
    """``(integral_0^1 (eps^-m x^(m(eps-1)+alpha))^q nu^q dx)^(1/q)``, a lower bound for ``||M_alpha f||_{L^q(nu^q)}``.

    The witness at ``x`` is the product average over ``(0, x)``.
    """
    P = fam.profile
    q, eps, m = P.q, fam.eps, P.m
    if dps is not None:
        with mpmath.workdps(dps):
            coef = mpmath.mpf(eps) ** (-m * q)
            e = q * (m * (mpmath.mpf(eps) - 1) + mpmath.mpf(P.alpha)) + q * mpmath.mpf(fam.nu.e)
            if e <= -1:
                raise DivergenceError("witness integral diverges")
            return (coef / (e + 1)) ** (1 / mpmath.mpf(q))
    integrand = PowerSpec(eps ** (-m * q), q * (m * (eps - 1) + P.alpha)) * fam.nu ** q
    return power_integral(integrand, 0, 1) ** (1 / q)


def witness_value(fam: ExtremalFamily, x: float) -> float:
    """Product average of the extremal ``f`` over ``(0, x)`` for ``0 < x <= 1``."""
    P = fam.profile
    return fam.eps ** (-P.m) * x ** (P.m * (fam.eps - 1) + P.alpha)


@dataclass
class ExtremalNorms:
    eps: float
    product_norm: float
    apq: float
    apq_interval: tuple[float, float]
    maximal_lower: float

    @property
    def ratio(self) -> float:
        return self.maximal_lower / self.product_norm


def extremal_norms(fam: ExtremalFamily, dps: int | None = None) -> ExtremalNorms:
    P = fam.profile
    if P.inv_q <= 0:
        raise HypothesisError("requires p < n/alpha so that q is finite")
    apq, arg = apq_constant(fam, dps=dps)
    return ExtremalNorms(fam.eps, float(product_norm(fam, dps)), float(apq), arg, float(witness_lower_bound(fam, dps)))


def apq_closed_form(fam: ExtremalFamily) -> float:
    """Value on ``(0, t]`` (independent of ``t``) when every ``p_i > 1``: ``eps^-q(m-1/p) / (q(1-eps)(m-1/p) + 1)``."""
    P = fam.profile
    s = P.m - 1 / P.p
    return fam.eps ** (-P.q * s) / (P.q * (1 - fam.eps) * s + 1)


def cell_averages(grid, spec: PowerSpec, support: tuple[float, float] | None = None):
    """Exact cell averages of ``spec`` (times the indicator of ``support``) on a 1-D grid."""
    import numpy as np

    if grid.n != 1:
        raise ParameterError("power cell averages are one-dimensional")
    h = grid.h
    lo_s, hi_s = (0.0, float(grid.side_length)) if support is None else support
    out = np.zeros(grid.cells_per_side)
    for c in range(grid.cells_per_side):
        a, b = max(c * h, lo_s), min((c + 1) * h, hi_s)
        if b > a:
            out[c] = power_integral(spec, a, b) / h
    return out
