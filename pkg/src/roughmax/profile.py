"""Exponent bookkeeping shared by every operator and weight constant."""

from __future__ import annotations

from dataclasses import dataclass
from math import inf, isinf

from .errors import HypothesisError, ParameterError


def conjugate(p: float) -> float:
    """Hölder conjugate ``p' = p / (p - 1)``, with ``1' = inf`` and ``inf' = 1``."""
    if p == 1:
        return inf
    if isinf(p):
        return 1.0
    return p / (p - 1.0)


@dataclass(frozen=True)
class ExponentProfile:
    m: int
    n: int
    alpha: float
    p_list: tuple[float, ...]
    s: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "p_list", tuple(float(v) for v in self.p_list))
        object.__setattr__(self, "alpha", float(self.alpha))
        if self.m < 1:
            raise ParameterError("m must be at least 1")
        if not 1 <= self.n <= 3:
            raise ParameterError("n must be 1, 2 or 3")
        if len(self.p_list) != self.m:
            raise ParameterError(f"need {self.m} exponents p_i, got {len(self.p_list)}")
        if any(not pi >= 1 for pi in self.p_list):
            raise HypothesisError("requires 1 <= p_i < inf")
        if not 0 <= self.alpha < self.m * self.n:
            raise HypothesisError("requires 0 <= alpha < mn")
        if self.s is not None and not self.s > 1:
            raise HypothesisError("requires kernel integrability s > 1")

    @property
    def p(self) -> float:
        return 1.0 / sum(1.0 / pi for pi in self.p_list)

    @property
    def inv_q(self) -> float:
        return 1.0 / self.p - self.alpha / self.n

    @property
    def q(self) -> float:
        if self.inv_q <= 0:
            raise HypothesisError("requires 1/m < p < n/alpha (1/q = 1/p - alpha/n must be positive)")
        return 1.0 / self.inv_q

    @property
    def p_primes(self) -> tuple[float, ...]:
        return tuple(conjugate(pi) for pi in self.p_list)

    @property
    def q_list(self) -> tuple[float, ...]:
        """``1/q_i = 1/p_i - alpha/(mn)``."""
        return tuple(1.0 / (1.0 / pi - self.alpha / (self.m * self.n)) for pi in self.p_list)

    @property
    def s_prime(self) -> float:
        return 1.0 if self.s is None else conjugate(self.s)

    def q_shift(self, eps: float) -> float:
        """``1/q_eps = 1/p - (alpha + eps)/n``; pass a negative ``eps`` for ``q_{-eps}``."""
        inv = 1.0 / self.p - (self.alpha + eps) / self.n
        if inv <= 0:
            raise HypothesisError("requires p < n/(alpha + eps)")
        return 1.0 / inv

    def with_alpha(self, alpha: float) -> "ExponentProfile":
        return ExponentProfile(self.m, self.n, alpha, self.p_list, self.s)

    # ---- hypothesis checks; each names the condition it enforces

    def require_strong(self) -> "ExponentProfile":
        if any(pi <= 1 for pi in self.p_list):
            raise HypothesisError("requires 1 < p_i < inf")
        p = self.p
        if not (1.0 / self.m < p and (self.alpha == 0 or p < self.n / self.alpha)):
            raise HypothesisError(f"requires 1/m < p < n/alpha (got p={p:g}, m={self.m}, n/alpha="
                                  f"{self.n / self.alpha if self.alpha else inf:g})")
        return self

    def require_weak(self) -> "ExponentProfile":
        """Weak-type range: ``p_i >= 1``, ``p < n/alpha`` and ``p > 1/m`` unless every ``p_i = 1``."""
        p = self.p
        all_one = all(pi == 1 for pi in self.p_list)
        lower_ok = p > 1.0 / self.m or (all_one and abs(p - 1.0 / self.m) < 1e-15)
        if not (lower_ok and (self.alpha == 0 or p < self.n / self.alpha)):
            raise HypothesisError(f"requires 1/m < p < n/alpha (got p={p:g})")
        return self

    def require_rough(self) -> "ExponentProfile":
        sp = self.s_prime
        if not all(1 <= sp < pi for pi in self.p_list):
            raise HypothesisError(f"requires 1 <= s' < p_i (got s'={sp:g}, p={self.p_list})")
        return self

    def describe(self) -> dict:
        d = {"m": self.m, "n": self.n, "alpha": self.alpha, "p": list(self.p_list), "p_total": self.p}
        if self.inv_q > 0:
            d["q"] = self.q
        if self.s is not None:
            d["s"] = self.s
            d["s_prime"] = self.s_prime
        return d
