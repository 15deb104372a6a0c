"""Rough homogeneous kernels on products of spheres and their L^s norms.

Kernels only ever see directions, so degree-zero homogeneity holds by
construction.  On ``S^0 = {+1, -1}`` the surface measure is counting measure
(total mass 2) and every quantity is a finite sum; for ``n >= 2`` a fixed
product quadrature on the sphere stands in for surface measure.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import inf, isinf, pi
from typing import Callable, Sequence

import numpy as np

from .errors import ParameterError, SingularDirectionError


def sphere_quadrature(n: int, order: int = 32) -> tuple[np.ndarray, np.ndarray]:
    """Nodes ``(Q, n)`` and weights ``(Q,)`` for surface measure on ``S^(n-1)``."""
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if n == 2:
        t = 2 * pi * (np.arange(order) + 0.5) / order
        return np.stack([np.cos(t), np.sin(t)], axis=-1), np.full(order, 2 * pi / order)
    if n == 3:
        z, wz = np.polynomial.legendre.leggauss(order)
        nphi = 2 * order
        phi = 2 * pi * (np.arange(nphi) + 0.5) / nphi
        Z, P = np.meshgrid(z, phi, indexing="ij")
        r = np.sqrt(1 - Z**2)
        nodes = np.stack([r * np.cos(P), r * np.sin(P), Z], axis=-1).reshape(-1, 3)
        weights = (wz[:, None] * np.full(nphi, 2 * pi / nphi)[None, :]).ravel()
        return nodes, weights
    raise ParameterError("sphere quadrature implemented for n <= 3")


class SphereFunction:
    """A function on ``S^(n-1)``.

    For ``n = 1`` give the two values ``{+1: a, -1: b}``.  For ``n >= 2`` give
    either a callable on unit vectors or a table of values on the quadrature
    nodes (looked up by nearest node).
    """

    def __init__(self, n: int, values=None, func: Callable | None = None, order: int = 32):
        self.n = n
        self.nodes, self.weights = sphere_quadrature(n, order)
        self.func = func
        if n == 1:
            if isinstance(values, dict):
                values = [values.get(1, values.get("+")), values.get(-1, values.get("-"))]
            self.table = np.asarray(values, dtype=np.float64).reshape(2)
        elif func is not None:
            self.table = np.asarray(func(self.nodes), dtype=np.float64)
        else:
            self.table = np.asarray(values, dtype=np.float64)
            if self.table.shape != (len(self.nodes),):
                raise ParameterError(f"need {len(self.nodes)} node values for order {order}")

    def node_weights(self, u: np.ndarray) -> np.ndarray:
        """One-hot (nearest node) weights for directions ``u`` of shape ``(k, n)``."""
        if self.n == 1:
            return np.stack([(u[:, 0] > 0), (u[:, 0] < 0)], axis=-1).astype(float)
        idx = np.argmax(u @ self.nodes.T, axis=-1)
        out = np.zeros((len(u), len(self.nodes)))
        out[np.arange(len(u)), idx] = 1.0
        return out

    def __call__(self, u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(np.asarray(u, dtype=np.float64))
        if self.n == 1:
            return np.where(u[:, 0] > 0, self.table[0], self.table[1])
        if self.func is not None:
            return np.asarray(self.func(u), dtype=np.float64)
        return self.node_weights(u) @ self.table

    def mean_abs(self) -> float:
        return float(self.weights @ np.abs(self.table) / self.weights.sum())

    def ls_norm(self, s: float) -> float:
        a = np.abs(self.table)
        if isinf(s):
            return float(a.max())
        return float((self.weights @ a**s) ** (1.0 / s))


@dataclass
class RoughKernel:
    form: str
    n: int
    m: int
    s: float = inf
    constant: float = 1.0
    factors: Sequence[SphereFunction] = ()
    table: np.ndarray | None = None  # joint: values on the product of node sets
    order: int = 32

    def __post_init__(self):
        if self.form not in ("constant", "product", "joint"):
            raise ParameterError(f"unknown kernel form {self.form!r}")
        if not self.s > 1:
            raise ParameterError("kernel integrability exponent s must exceed 1")
        if self.form == "product" and len(self.factors) != self.m:
            raise ParameterError(f"product kernel needs {self.m} factors")
        if self.form == "joint":
            nodes, _ = sphere_quadrature(self.n, self.order)
            self.table = np.asarray(self.table, dtype=np.float64)
            if self.table.shape != (len(nodes),) * self.m:
                raise ParameterError(f"joint table must have shape {(len(nodes),) * self.m}")

    # ---- constructors

    @classmethod
    def const(cls, value: float, n: int, m: int, s: float = inf) -> "RoughKernel":
        return cls("constant", n, m, s, constant=float(value))

    @classmethod
    def product(cls, factors: Sequence[SphereFunction], s: float) -> "RoughKernel":
        return cls("product", factors[0].n, len(factors), s, factors=list(factors),
                   order=len(factors[0].nodes) if factors[0].n == 2 else 32)

    @classmethod
    def joint_1d(cls, values: dict, m: int, s: float) -> "RoughKernel":
        """n = 1 joint kernel from sign strings, e.g. ``{"++": 1, "+-": 0, ...}``."""
        table = np.zeros((2,) * m)
        for key, v in values.items():
            signs = key if isinstance(key, str) else "".join("+" if e > 0 else "-" for e in key)
            if len(signs) != m or set(signs) - {"+", "-"}:
                raise ParameterError(f"bad sign key {key!r}")
            table[tuple(0 if c == "+" else 1 for c in signs)] = v
        return cls("joint", 1, m, s, table=table)

    def to_joint(self) -> "RoughKernel":
        """Joint form carrying the same tensor data (product of factor tables)."""
        if self.form == "joint":
            return self
        nodes, _ = sphere_quadrature(self.n, self.order)
        if self.form == "constant":
            table = np.full((len(nodes),) * self.m, self.constant)
        else:
            table = self.factors[0].table
            for f in self.factors[1:]:
                table = np.multiply.outer(table, f.table)
        return RoughKernel("joint", self.n, self.m, self.s, table=table, order=self.order)

    # ---- evaluation

    def evaluate(self, y) -> float:
        """``|Omega(y_1, ..., y_m)|`` for offsets ``y`` of shape ``(m, n)``."""
        y = np.asarray(y, dtype=np.float64).reshape(self.m, self.n)
        if self.form == "constant":
            return abs(self.constant)
        norms = np.linalg.norm(y, axis=1)
        if np.any(norms == 0):
            raise SingularDirectionError("kernel direction undefined at a zero offset")
        u = y / norms[:, None]
        if self.form == "product":
            return float(abs(np.prod([f(u[i:i + 1])[0] for i, f in enumerate(self.factors)])))
        return float(abs(self._joint_contract([self._component_weights(u[i:i + 1]) for i in range(self.m)])[0]))

    def _component_weights(self, u: np.ndarray) -> np.ndarray:
        """Node weights per direction; a zero row means an own-cell offset and gets the sphere average."""
        nodes, w = sphere_quadrature(self.n, self.order)
        out = np.zeros((len(u), len(nodes)))
        zero = np.all(u == 0, axis=1)
        if self.n == 1:
            out[:, 0] = u[:, 0] > 0
            out[:, 1] = u[:, 0] < 0
        else:
            idx = np.argmax(u @ nodes.T, axis=-1)
            out[np.arange(len(u)), idx] = 1.0
        out[zero] = w / w.sum()
        return out

    def _joint_contract(self, comps: list[np.ndarray]) -> np.ndarray:
        t = np.abs(self.table)
        letters = "abcdefgh"[: self.m]
        spec = ",".join(f"z{c}" for c in letters) + "," + letters + "->z"
        return np.einsum(spec, *comps, t)

    def factor_stencil(self, i: int, offsets: np.ndarray) -> np.ndarray:
        """``|Omega_i|`` at the directions of ``offsets`` ``(k, n)``; zero offsets get the sphere mean."""
        f = self.factors[i]
        offsets = np.asarray(offsets, dtype=np.float64)
        norms = np.linalg.norm(offsets, axis=1)
        out = np.empty(len(offsets))
        zero = norms == 0
        if np.any(~zero):
            out[~zero] = np.abs(f(offsets[~zero] / norms[~zero, None]))
        out[zero] = f.mean_abs()
        return out

    def joint_stencil(self, offsets: np.ndarray) -> np.ndarray:
        """``|Omega|`` for offset tuples ``(k, m, n)``; zero components are averaged over the sphere."""
        offsets = np.asarray(offsets, dtype=np.float64)
        if self.form == "constant":
            return np.full(len(offsets), abs(self.constant))
        comps = []
        for i in range(self.m):
            y = offsets[:, i, :]
            nrm = np.linalg.norm(y, axis=1)
            u = np.where(nrm[:, None] > 0, y / np.where(nrm > 0, nrm, 1)[:, None], 0.0)
            comps.append(self._component_weights(u))
        if self.form == "joint":
            return np.abs(self._joint_contract(comps))
        nodes, _ = sphere_quadrature(self.n, self.order)
        val = np.ones(len(offsets))
        for i, f in enumerate(self.factors):
            val = val * (comps[i] @ np.abs(f.table)) if f.func is None or self.n == 1 else val * self.factor_stencil(i, offsets[:, i, :])
        return val

    def ls_norm(self, s: float | None = None) -> float:
        """``||Omega||_{L^s((S^(n-1))^m)}``; counting measure on ``S^0``, quadrature for ``n >= 2``."""
        s = self.s if s is None else s
        if not s > 1:
            raise ParameterError("s must exceed 1")
        _, w = sphere_quadrature(self.n, self.order)
        if self.form == "constant":
            if isinf(s):
                return abs(self.constant)
            return abs(self.constant) * float(w.sum()) ** (self.m / s)
        if self.form == "product":
            return float(np.prod([f.ls_norm(s) for f in self.factors]))
        t = np.abs(self.table)
        if isinf(s):
            return float(t.max())
        wt = w
        for _ in range(self.m - 1):
            wt = np.multiply.outer(wt, w)
        return float(np.sum(wt * t**s) ** (1.0 / s))

    def describe(self) -> dict:
        d = {"form": self.form, "n": self.n, "m": self.m, "s": self.s}
        if self.form == "constant":
            d["value"] = self.constant
        elif self.form == "product" and self.n == 1:
            d["values"] = [{"+": float(f.table[0]), "-": float(f.table[1])} for f in self.factors]
        elif self.form == "joint" and self.n == 1:
            d["values"] = {"".join("+" if e == 0 else "-" for e in idx): float(self.table[idx])
                           for idx in itertools.product((0, 1), repeat=self.m)}
        return d


def kernel_from_json(spec: dict, n: int, m: int) -> RoughKernel:
    """Kernel from ``{"form": ..., "values": ..., "s": ...}``.

    n = 1 values are keyed by sign strings: per factor ``{"+": a, "-": b}`` for
    the product form, ``{"++": v, "+-": v, ...}`` for the joint form.  For
    ``n >= 2`` product factors are node tables of a given ``"order"``.
    """
    s = float(spec.get("s", inf))
    form = spec.get("form", "constant")
    if form == "constant":
        return RoughKernel.const(spec.get("value", 1.0), n, m, s)
    if form == "product":
        order = int(spec.get("order", 32))
        vals = spec["values"]
        if len(vals) != m:
            raise ParameterError(f"product kernel needs {m} factor tables")
        return RoughKernel.product([SphereFunction(n, v, order=order) for v in vals], s)
    if form == "joint":
        if n != 1:
            order = int(spec.get("order", 32))
            return RoughKernel("joint", n, m, s, table=np.asarray(spec["values"]), order=order)
        return RoughKernel.joint_1d(spec["values"], m, s)
    raise ParameterError(f"unknown kernel form {form!r}")
