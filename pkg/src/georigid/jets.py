"""Truncated Taylor jets (order <= 3) with numpy coefficient storage.

A jet holds a value of arbitrary shape ``S`` together with its partial
derivatives.  Coefficient ``k`` has shape ``(dim,)*k + S``: the leading
``k`` axes are derivative directions, the trailing axes are the value
axes.  Derivative axes are fully symmetric by construction because every
operation is written in terms of symmetric Leibniz / Faa di Bruno sums.

Scalar jets (``S == ()``) are what the metric DSL produces per component;
matrix- and tensor-valued jets are used by the curvature code so that
whole tensors can be pushed through products, inverses and determinants.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

MAX_ORDER = 3
DIV_THRESHOLD = 1e-13


class JetError(ValueError):
    """Base class for jet arithmetic errors."""


class JetDomainError(JetError):
    """Elementary function evaluated outside its domain."""

    def __init__(self, fn: str, value):
        self.fn = fn
        self.value = value
        super().__init__(f"{fn}: argument {value!r} outside domain")


class JetDimensionError(JetError):
    pass


class Jet:
    """Value plus partial derivatives up to ``order`` at one point."""

    __slots__ = ("coeffs", "dim")
    __array_priority__ = 100  # make ndarray * Jet defer to Jet

    def __init__(self, coeffs: Sequence[np.ndarray], dim: int):
        if not 1 <= len(coeffs) <= MAX_ORDER + 1:
            raise JetError(f"jet order must be 0..{MAX_ORDER}")
        self.coeffs = tuple(np.asarray(c, dtype=float) for c in coeffs)
        self.dim = int(dim)

    # -- accessors -------------------------------------------------------
    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def shape(self) -> tuple:
        return self.coeffs[0].shape

    @property
    def value(self):
        v = self.coeffs[0]
        return float(v) if v.ndim == 0 else v

    @property
    def grad(self) -> np.ndarray:
        return self._coeff(1)

    @property
    def hess(self) -> np.ndarray:
        return self._coeff(2)

    @property
    def third(self) -> np.ndarray:
        return self._coeff(3)

    def _coeff(self, k: int) -> np.ndarray:
        if k > self.order:
            raise JetError(f"derivative of order {k} not available (jet order {self.order})")
        return self.coeffs[k]

    def truncate(self, order: int) -> "Jet":
        if order >= self.order:
            return self
        return Jet(self.coeffs[: order + 1], self.dim)

    def __repr__(self):
        return f"Jet(dim={self.dim}, order={self.order}, shape={self.shape}, value={self.value!r})"

    # -- structural ops on value axes -----------------------------------
    def D(self) -> "Jet":
        """Partial derivative jet; the new derivative index becomes the first value axis."""
        if self.order == 0:
            raise JetError("cannot differentiate an order-0 jet")
        return Jet(self.coeffs[1:], self.dim)

    def map_values(self, fn: Callable[[np.ndarray, int], np.ndarray]) -> "Jet":
        """Apply a linear map acting on value axes; ``fn(coeff, k)`` gets the number of leading axes."""
        return Jet([fn(c, k) for k, c in enumerate(self.coeffs)], self.dim)

    def einsum(self, subscripts: str) -> "Jet":
        """Unary einsum (transpose / trace) on value axes, e.g. ``'ijk->kij'``."""
        spec = "..." + subscripts.replace("->", "->...")
        return Jet([np.einsum(spec, c) for c in self.coeffs], self.dim)

    def __getitem__(self, idx) -> "Jet":
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Jet([c[(Ellipsis,) + idx] if k else c[idx] for k, c in enumerate(self.coeffs)], self.dim)

    def sum(self) -> "Jet":
        nv = len(self.shape)
        return Jet([c.sum(axis=tuple(range(k, k + nv))) if nv else c for k, c in enumerate(self.coeffs)], self.dim)

    # -- arithmetic ------------------------------------------------------
    def __neg__(self):
        return Jet([-c for c in self.coeffs], self.dim)

    def __add__(self, other):
        if isinstance(other, Jet):
            _check_dim(self, other)
            m = min(self.order, other.order)
            return Jet([a + b for a, b in zip(self.coeffs[: m + 1], other.coeffs[: m + 1])], self.dim)
        other = np.asarray(other, dtype=float)
        if other.ndim > len(self.shape):
            return _lift(self, other.shape) + other
        return Jet((self.coeffs[0] + other,) + self.coeffs[1:], self.dim)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            return leibniz(np.multiply, *_broadcast_pair(self, other))
        other = np.asarray(other, dtype=float)
        a = _lift(self, other.shape)
        return Jet([c * other for c in a.coeffs], self.dim)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * reciprocal(other, numerator=self)
        other = np.asarray(other, dtype=float)
        if np.any(np.abs(other) == 0.0):
            raise JetDomainError("div", other)
        a = _lift(self, other.shape)
        return Jet([c / other for c in a.coeffs], self.dim)

    def __rtruediv__(self, other):
        return reciprocal(self, numerator=other) * other

    def __pow__(self, p):
        if isinstance(p, Jet):
            return exp(p * log(self))
        return pow_const(self, float(p))


def _check_dim(a: Jet, b: Jet):
    if a.dim != b.dim:
        raise JetDimensionError(f"jet dimension mismatch: {a.dim} vs {b.dim}")


def _broadcast_pair(a: Jet, b: Jet):
    _check_dim(a, b)
    if a.shape == b.shape:
        return a, b
    s = np.broadcast_shapes(a.shape, b.shape)
    return _broadcast_to(a, s), _broadcast_to(b, s)


def _lift(a: Jet, shape) -> Jet:
    """Insert unit value axes so that value shape aligns with a constant of ``shape`` on the right."""
    extra = len(shape) - len(a.shape)
    if extra <= 0:
        return a
    return Jet([c.reshape((a.dim,) * k + (1,) * extra + a.shape) for k, c in enumerate(a.coeffs)], a.dim)


def _broadcast_to(a: Jet, shape) -> Jet:
    a = _lift(a, shape)
    d = a.dim
    return Jet([np.broadcast_to(c, (d,) * k + tuple(shape)) for k, c in enumerate(a.coeffs)], d)


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def constant(value, dim: int, order: int = MAX_ORDER) -> Jet:
    v = np.asarray(value, dtype=float)
    return Jet([v] + [np.zeros((dim,) * k + v.shape) for k in range(1, order + 1)], dim)


def jet_coordinate(dim: int, k: int, x, order: int = MAX_ORDER) -> Jet:
    """Jet of the coordinate function ``x_k`` at the point ``x``."""
    if not 0 <= k < dim:
        raise IndexError(f"coordinate index {k} out of range for dim {dim}")
    x = np.asarray(x, dtype=float)
    if x.shape == ():
        x = np.full(dim, float(x))
    if x.shape != (dim,):
        raise JetDimensionError(f"point has shape {x.shape}, expected ({dim},)")
    coeffs = [np.array(x[k])]
    if order >= 1:
        coeffs.append(np.eye(dim)[k])
    for j in range(2, order + 1):
        coeffs.append(np.zeros((dim,) * j))
    return Jet(coeffs, dim)


def coordinates(x, order: int = MAX_ORDER) -> Jet:
    """Vector-valued jet of all coordinates (value shape ``(dim,)``)."""
    x = np.asarray(x, dtype=float)
    dim = x.shape[0]
    coeffs = [x.copy()]
    if order >= 1:
        coeffs.append(np.eye(dim))
    for j in range(2, order + 1):
        coeffs.append(np.zeros((dim,) * j + (dim,)))
    return Jet(coeffs, dim)


def from_gradient(value, grad: Jet) -> Jet:
    """Jet whose value is ``value`` and whose gradient jet is ``grad`` (value axis 0 = direction)."""
    return Jet((np.asarray(value, dtype=float),) + grad.coeffs, grad.dim)


def stack(jets: Sequence, axis: int = 0) -> Jet:
    """Stack jets (or floats) along a new value axis."""
    proto = next((j for j in jets if isinstance(j, Jet)), None)
    if proto is None:
        raise JetError("stack needs at least one Jet")
    dim = proto.dim
    order = min(j.order for j in jets if isinstance(j, Jet))
    full = [j if isinstance(j, Jet) else constant(j, dim, order) for j in jets]
    for j in full:
        _check_dim(proto, j)
    coeffs = []
    for k in range(order + 1):
        arrs = [j.coeffs[k] for j in full]
        ax = axis if axis < 0 else k + axis
        coeffs.append(np.stack(arrs, axis=ax))
    return Jet(coeffs, dim)


def matrix(rows: Sequence[Sequence]) -> Jet:
    """Matrix-valued jet from a nested list of scalar jets / floats."""
    return stack([stack(list(r), axis=0) for r in rows], axis=0)


# ---------------------------------------------------------------------------
# products
# ---------------------------------------------------------------------------

def leibniz(op: Callable, a: Jet, b: Jet) -> Jet:
    """Jet of ``op(a, b)`` for a bilinear ``op`` that broadcasts leading axes."""
    _check_dim(a, b)
    m = min(a.order, b.order)
    A, B = a.coeffs, b.coeffs
    out = [op(A[0], B[0])]
    if m >= 1:
        out.append(op(A[1], B[0]) + op(A[0], B[1]))
    if m >= 2:
        a1, b1 = A[1], B[1]
        out.append(
            op(A[2], B[0]) + op(a1[:, None], b1[None]) + op(a1[None], b1[:, None]) + op(A[0], B[2])
        )
    if m >= 3:
        a1, b1, a2, b2 = A[1], B[1], A[2], B[2]
        out.append(
            op(A[3], B[0])
            + op(a2[:, :, None], b1[None, None])
            + op(a2[:, None, :], b1[None, :, None])
            + op(a2[None], b1[:, None, None])
            + op(a1[:, None, None], b2[None])
            + op(a1[None, :, None], b2[:, None, :])
            + op(a1[None, None, :], b2[:, :, None])
            + op(A[0], B[3])
        )
    return Jet(out, a.dim)


def einsum(subscripts: str, a, b) -> Jet:
    """Bilinear einsum over value axes, e.g. ``einsum('ij,jk->ik', A, B)``.

    Either operand may be a plain array (treated as constant).
    """
    ins, out = subscripts.split("->")
    sa, sb = ins.split(",")
    spec = f"...{sa},...{sb}->...{out}"

    def op(x, y):
        return np.einsum(spec, x, y)

    if not isinstance(a, Jet):
        a = np.asarray(a, dtype=float)
        return Jet([np.einsum(spec, a, c) for c in b.coeffs], b.dim)
    if not isinstance(b, Jet):
        b = np.asarray(b, dtype=float)
        return Jet([np.einsum(spec, c, b) for c in a.coeffs], a.dim)
    return leibniz(op, a, b)


def matmul(a: Jet, b: Jet) -> Jet:
    return einsum("ij,jk->ik", a, b)


def inv(a: Jet) -> Jet:
    """Matrix inverse, solved order by order from ``a @ inv(a) = I``."""
    a0 = a.coeffs[0]
    b0 = np.linalg.inv(a0)
    coeffs = [b0]
    d = a.dim
    for k in range(1, a.order + 1):
        trial = Jet(coeffs + [np.zeros((d,) * k + a0.shape)], d)
        prod = matmul(a.truncate(k), trial)
        coeffs.append(-np.matmul(b0, prod.coeffs[k]))
    return Jet(coeffs, d)


def logabsdet(a: Jet) -> Jet:
    """``log|det a|`` for a square-matrix jet, via ``d log det = tr(a^-1 da)``."""
    sign, ld = np.linalg.slogdet(a.coeffs[0])
    if sign == 0:
        raise JetDomainError("logabsdet", 0.0)
    if a.order == 0:
        return Jet([np.array(ld)], a.dim)
    grad = einsum("ij,kji->k", inv(a.truncate(a.order - 1)), a.D())
    return from_gradient(ld, grad)


# ---------------------------------------------------------------------------
# elementary functions
# ---------------------------------------------------------------------------

def compose(a: Jet, f0, f1, f2=None, f3=None) -> Jet:
    """Elementwise composition given the outer function's derivatives at ``a.value``."""
    A = a.coeffs
    out = [np.asarray(f0, dtype=float)]
    if a.order >= 1:
        out.append(f1 * A[1])
    if a.order >= 2:
        a1 = A[1]
        out.append(f2 * (a1[:, None] * a1[None]) + f1 * A[2])
    if a.order >= 3:
        a1, a2 = A[1], A[2]
        out.append(
            f3 * (a1[:, None, None] * a1[None, :, None] * a1[None, None, :])
            + f2 * (a2[:, :, None] * a1[None, None, :] + a2[:, None, :] * a1[None, :, None] + a2[None] * a1[:, None, None])
            + f1 * A[3]
        )
    return Jet(out, a.dim)


def sin(a: Jet) -> Jet:
    v = a.coeffs[0]
    s, c = np.sin(v), np.cos(v)
    return compose(a, s, c, -s, -c)


def cos(a: Jet) -> Jet:
    v = a.coeffs[0]
    s, c = np.sin(v), np.cos(v)
    return compose(a, c, -s, -c, s)


def exp(a: Jet) -> Jet:
    e = np.exp(a.coeffs[0])
    return compose(a, e, e, e, e)


def log(a: Jet) -> Jet:
    v = a.coeffs[0]
    if np.any(v <= 0):
        raise JetDomainError("log", _offending(v, v <= 0))
    r = 1.0 / v
    return compose(a, np.log(v), r, -r * r, 2 * r ** 3)


def sqrt(a: Jet) -> Jet:
    v = a.coeffs[0]
    if np.any(v <= 0):
        raise JetDomainError("sqrt", _offending(v, v <= 0))
    s = np.sqrt(v)
    return compose(a, s, 0.5 / s, -0.25 / (s * v), 0.375 / (s * v * v))


def atan(a: Jet) -> Jet:
    v = a.coeffs[0]
    q = 1.0 / (1.0 + v * v)
    return compose(a, np.arctan(v), q, -2 * v * q * q, (6 * v * v - 2) * q ** 3)


def reciprocal(a: Jet, numerator=0.0) -> Jet:
    v = a.coeffs[0]
    num = numerator.coeffs[0] if isinstance(numerator, Jet) else np.asarray(numerator, dtype=float)
    bad = np.abs(v) <= DIV_THRESHOLD * (1.0 + np.abs(num))
    if np.any(bad):
        raise JetDomainError("div", _offending(v, bad))
    r = 1.0 / v
    return compose(a, r, -r * r, 2 * r ** 3, -6 * r ** 4)


def pow_const(a: Jet, p: float) -> Jet:
    """``a ** p`` for a constant exponent; non-integer ``p`` goes through exp(p log a)."""
    p = float(p)
    if p == 0.0:
        return constant(np.ones(a.shape), a.dim, a.order)
    if p.is_integer():
        n = int(p)
        v = a.coeffs[0]
        if n < 0 and np.any(v == 0):
            raise JetDomainError("pow", 0.0)
        if n == 1:
            return a
        if n == 2:
            return a * a

        def vp(e):
            return v ** e if e >= 0 or n < 0 else np.zeros_like(v)

        return compose(a, v ** n, n * vp(n - 1), n * (n - 1) * vp(n - 2), n * (n - 1) * (n - 2) * vp(n - 3))
    v = a.coeffs[0]
    if np.any(v <= 0):
        raise JetDomainError("pow", _offending(v, v <= 0))
    return exp(p * log(a))


def _offending(v, mask):
    v = np.asarray(v)
    return float(v) if v.ndim == 0 else float(v[mask].ravel()[0])


ELEMENTARY = {
    "sin": sin,
    "cos": cos,
    "exp": exp,
    "log": log,
    "sqrt": sqrt,
    "atan": atan,
}


# ---------------------------------------------------------------------------
# public entry points
# ---------------------------------------------------------------------------

def jet_combine(op: str, a: Jet, b: Jet) -> Jet:
    _check_dim(a, b)
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    raise ValueError(f"unknown jet operation {op!r}")


def jet_elementary(fn: str, a: Jet, exponent: float | None = None) -> Jet:
    if fn == "pow_const":
        if exponent is None:
            raise ValueError("pow_const needs an exponent")
        return pow_const(a, exponent)
    try:
        return ELEMENTARY[fn](a)
    except KeyError:
        raise ValueError(f"unknown elementary function {fn!r}") from None


def taylor_eval(j: Jet, h) -> float:
    """Evaluate the cubic Taylor polynomial of a scalar jet at displacement ``h``."""
    h = np.asarray(h, dtype=float)
    out = j.coeffs[0] * 1.0
    fact = [1.0, 1.0, 2.0, 6.0]
    for k in range(1, j.order + 1):
        t = j.coeffs[k]
        for _ in range(k):
            t = np.tensordot(h, t, axes=(0, 0))
        out = out + t / fact[k]
    return out


__all__ = [
    "Jet", "JetError", "JetDomainError", "JetDimensionError", "constant", "jet_coordinate",
    "coordinates", "from_gradient", "stack", "matrix", "leibniz", "einsum", "matmul", "inv",
    "logabsdet", "compose", "sin", "cos", "exp", "log", "sqrt", "atan", "reciprocal", "pow_const",
    "jet_combine", "jet_elementary", "taylor_eval",
]
