"""Built-in closed-form metrics.

Every metric except ``beltrami_pullback`` is generated as DSL text and parsed,
so it can be printed back with :func:`georigid.dsl.pretty_print`.  All entries
accept ``scale`` (a positive constant factor).

Curvature sign: in the convention used throughout the package the unit round
sphere has scalar curvature ``n(n-1)`` and ``K = -R/(n(n-1)) = -1``.
"""
from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from . import jets as J
from .dsl import Chart, MetricField, parse_metric

BELTRAMI_DET_FLOOR = 1e-10


class CatalogError(ValueError):
    pass


@dataclass(frozen=True)
class CatalogEntry:
    id: str
    chart: str
    params: Mapping[str, str]
    build: Callable[..., MetricField]


def _coords(n: int, names: tuple[str, ...] | None = None) -> tuple[str, ...]:
    return names if names is not None else tuple(f"x{i + 1}" for i in range(n))


def _diag_source(n, coords, box, diag, lets=(), label="", signature=None, singular=(), exclude=0.0):
    lines = [f"dim {n}", "coords " + " ".join(coords),
             "box " + " ".join(f"[{repr(float(a))},{repr(float(b))}]" for a, b in box)]
    if label:
        lines.append(f"label {label}")
    if signature is not None:
        lines.append(f"signature {signature[0]} {signature[1]}")
    lines += [f"let {name} = {expr}" for name, expr in lets]
    lines += [f"singular {s}" for s in singular]
    if exclude:
        lines.append(f"exclude {exclude!r}")
    for i in range(n):
        for j in range(i, n):
            lines.append(f"g{i + 1}{j + 1} = {diag[i] if i == j else '0'}")
    return "\n".join(lines) + "\n"


def _check_dim(n, lo=2, hi=8):
    if not lo <= n <= hi:
        raise CatalogError(f"dim={n} out of range [{lo}, {hi}]")


def _positive(name, v):
    if not v > 0:
        raise CatalogError(f"{name} must be positive, got {v}")


def euclidean(dim: int = 4, scale: float = 1.0) -> MetricField:
    _check_dim(dim)
    _positive("scale", scale)
    c = _coords(dim)
    src = _diag_source(dim, c, [(-1.0, 1.0)] * dim, [repr(float(scale))] * dim,
                       label=f"euclidean dim {dim}", signature=(dim, 0))
    return parse_metric(src)


def minkowski(dim: int = 4, scale: float = 1.0) -> MetricField:
    _check_dim(dim)
    _positive("scale", scale)
    c = ("t", "x", "y", "z") if dim == 4 else ("t",) + tuple(f"x{i}" for i in range(1, dim))
    s = repr(float(scale))
    src = _diag_source(dim, c, [(-1.0, 1.0)] * dim, [f"-{s}"] + [s] * (dim - 1),
                       label=f"minkowski dim {dim}", signature=(dim - 1, 1))
    return parse_metric(src)


def _conformal(dim, coords, box, factor, quad, label, signature, singular, exclude, eta=None):
    eta = eta or [1] * dim
    diag = [f"{'-' if e < 0 else ''}{factor}" for e in eta]
    return parse_metric(_diag_source(dim, coords, box, diag, lets=[("s", quad)], label=label,
                                     signature=signature, singular=singular, exclude=exclude))


def sphere_stereo(dim: int = 4, radius: float = 1.0, scale: float = 1.0) -> MetricField:
    """Round sphere of the given radius in stereographic coordinates: 4 r^2 delta/(1+|x|^2)^2."""
    _check_dim(dim)
    _positive("radius", radius)
    _positive("scale", scale)
    c = _coords(dim)
    quad = "1 + " + " + ".join(f"{x}^2" for x in c)
    k = repr(4.0 * scale * radius ** 2)
    return _conformal(dim, c, [(-1.5, 1.5)] * dim, f"{k}/s^2", quad, f"round sphere radius {radius}",
                      (dim, 0), (), 0.0)


def hyperbolic_ball(dim: int = 4, radius: float = 1.0, scale: float = 1.0) -> MetricField:
    """Poincare ball model: 4 r^2 delta/(1-|x|^2)^2, sectional curvature -1/r^2."""
    _check_dim(dim)
    _positive("radius", radius)
    _positive("scale", scale)
    c = _coords(dim)
    quad = "1 - " + " - ".join(f"{x}^2" for x in c)
    k = repr(4.0 * scale * radius ** 2)
    h = 0.9 / np.sqrt(dim)
    return _conformal(dim, c, [(-h, h)] * dim, f"{k}/s^2", quad, f"hyperbolic ball radius {radius}",
                      (dim, 0), ("s",), 0.05)


def lorentz_const_curv(dim: int = 4, curvature: float = 1.0, scale: float = 1.0) -> MetricField:
    """4 eta/(1 + kappa eta(x,x))^2 with eta = diag(-1,1,..,1): Lorentzian, sectional curvature kappa.

    In the package sign convention this gives K = -kappa.
    """
    _check_dim(dim)
    _positive("scale", scale)
    c = ("t",) + tuple(f"x{i}" for i in range(1, dim))
    kap = repr(float(curvature))
    quad = f"1 + {kap}*(-t^2 + " + " + ".join(f"{x}^2" for x in c[1:]) + ")"
    k = repr(4.0 * scale)
    return _conformal(dim, c, [(-0.4, 0.4)] * dim, f"{k}/s^2", quad, f"lorentz constant curvature {curvature}",
                      (dim - 1, 1), ("s",), 0.05, eta=[-1] + [1] * (dim - 1))


def schwarzschild(mass: float = 1.0, scale: float = 1.0) -> MetricField:
    """Exterior Schwarzschild in (t, r, th, ph); r in [2.5m, 10m], th away from the poles by 0.1."""
    _positive("mass", mass)
    _positive("scale", scale)
    m = float(mass)
    s = repr(float(scale))
    src = _diag_source(
        4, ("t", "r", "th", "ph"),
        [(-1.0, 1.0), (2.5 * m, 10.0 * m), (0.1, np.pi - 0.1), (0.0, 2 * np.pi)],
        [f"-{s}*f", f"{s}/f", f"{s}*r^2", f"{s}*r^2*sin(th)^2"],
        lets=[("f", f"1 - {repr(2 * m)}/r")], label=f"schwarzschild m={mass}", signature=(3, 1),
        singular=(f"r - {repr(2 * m)}", "sin(th)"),
    )
    return parse_metric(src)


def _stereo_inverse_jets(x, order):
    """Jets of P(x) = (2x, 1-|x|^2)/(1+|x|^2) and of its differential dP[i, a] = d_i P_a."""
    X = J.coordinates(x, order)
    n = len(x)
    r2 = J.einsum("a,a->", X, X)
    inv_s = 1.0 / (1.0 + r2)
    P = J.stack([2.0 * X[a] * inv_s for a in range(n)] + [(1.0 - r2) * inv_s])
    inv_s2 = inv_s * inv_s
    xx = J.einsum("a,b->ab", X, X)
    # d_i P_a = 2 delta_ia/s - 4 x_a x_i/s^2 ; d_i P_n = -4 x_i/s^2
    top = inv_s * (2.0 * np.eye(n)) - 4.0 * xx * inv_s2
    last = (-4.0 * X) * inv_s2
    dP = J.stack([top[:, a] for a in range(n)] + [last], axis=1)
    return P, dP


def parse_matrix(A, n1: int) -> np.ndarray:
    """Accept an array, ``diag(a,b,...)`` or a JSON nested list."""
    if isinstance(A, str):
        s = A.strip()
        m = re.fullmatch(r"diag\((.*)\)", s)
        try:
            if m:
                A = np.diag([float(v) for v in m.group(1).split(",")])
            elif s.upper() == "I":
                A = np.eye(n1)
            else:
                A = np.array(json.loads(s), dtype=float)
        except (ValueError, json.JSONDecodeError) as exc:
            raise CatalogError(f"cannot parse matrix {A!r}: {exc}") from None
    A = np.asarray(A, dtype=float)
    if A.shape != (n1, n1):
        raise CatalogError(f"matrix A must be {n1}x{n1}, got shape {A.shape}")
    if abs(np.linalg.det(A)) < BELTRAMI_DET_FLOOR:
        raise CatalogError("matrix A is singular (|det A| < 1e-10)")
    return A


def beltrami_pullback(dim: int = 4, A=None, scale: float = 1.0) -> MetricField:
    """Pullback of the unit round metric under v -> Av/|Av|, in the stereographic chart.

    With W = A P(x) and W_i = A d_i P the metric is
    ``(W_i.W_j)/|W|^2 - (W.W_i)(W.W_j)/|W|^4``; ``A = I`` gives 4 delta/(1+|x|^2)^2.
    """
    _check_dim(dim)
    _positive("scale", scale)
    A = np.eye(dim + 1) if A is None else parse_matrix(A, dim + 1)
    scale = float(scale)

    def jet_fn(x, order):
        P, dP = _stereo_inverse_jets(x, order)
        W = J.einsum("ab,b->a", A, P)
        Wd = J.einsum("ia,ba->ib", dP, A)
        q = J.einsum("a,a->", W, W)
        G = J.einsum("ia,ja->ij", Wd, Wd)
        b = J.einsum("ia,a->i", Wd, W)
        inv_q = 1.0 / q
        g = G * inv_q - J.einsum("i,j->ij", b, b) * (inv_q * inv_q)
        return g * scale if scale != 1.0 else g

    chart = Chart(dim, _coords(dim), ((-1.5, 1.5),) * dim)
    label = f"beltrami pullback dim {dim} A={np.array2string(A, separator=',').replace(chr(10), '')}"
    return MetricField(chart, jet_fn, label, (dim, 0), None)


CATALOG: dict[str, CatalogEntry] = {
    e.id: e for e in [
        CatalogEntry("euclidean", "x1..xn in [-1,1]^n", {"dim": "2..8 (4)", "scale": ">0 (1)"}, euclidean),
        CatalogEntry("minkowski", "t x y z (dim 4) or t x1.. in [-1,1]^n; eta=diag(-1,1,..)",
                     {"dim": "2..8 (4)", "scale": ">0 (1)"}, minkowski),
        CatalogEntry("sphere_stereo", "stereographic x1..xn in [-1.5,1.5]^n",
                     {"dim": "2..8 (4)", "radius": ">0 (1)", "scale": ">0 (1)"}, sphere_stereo),
        CatalogEntry("hyperbolic_ball", "Poincare ball, x1..xn in [-0.9/sqrt(n), 0.9/sqrt(n)]^n",
                     {"dim": "2..8 (4)", "radius": ">0 (1)", "scale": ">0 (1)"}, hyperbolic_ball),
        CatalogEntry("lorentz_const_curv", "t x1.. in [-0.4,0.4]^n; 4 eta/(1+kappa eta(x,x))^2",
                     {"dim": "2..8 (4)", "curvature": "real (1)", "scale": ">0 (1)"}, lorentz_const_curv),
        CatalogEntry("schwarzschild", "t r th ph; r in [2.5m,10m], th in [0.1, pi-0.1]",
                     {"mass": ">0 (1)", "scale": ">0 (1)"}, schwarzschild),
        CatalogEntry("beltrami_pullback", "stereographic x1..xn in [-1.5,1.5]^n",
                     {"dim": "2..8 (4)", "A": "(n+1)x(n+1): diag(..), JSON list or I", "scale": ">0 (1)"},
                     beltrami_pullback),
    ]
}


def _coerce(key: str, value):
    if key == "A":
        return value
    if key == "dim":
        try:
            return int(value)
        except (TypeError, ValueError):
            raise CatalogError(f"dim must be an integer, got {value!r}") from None
    try:
        return float(value)
    except (TypeError, ValueError):
        raise CatalogError(f"parameter {key} must be a real number, got {value!r}") from None


def catalog_metric(id: str, params: Mapping[str, object] | None = None) -> MetricField:
    params = dict(params or {})
    if id not in CATALOG:
        raise CatalogError(f"unknown catalog id {id!r}; known: {', '.join(CATALOG)}")
    entry = CATALOG[id]
    unknown = sorted(set(params) - set(entry.params))
    if unknown:
        raise CatalogError(f"unknown parameter(s) for {id}: {', '.join(unknown)}")
    return entry.build(**{k: _coerce(k, v) for k, v in params.items()})


def _split_top(text: str) -> list[str]:
    """Split on commas that are not nested inside brackets."""
    out, depth, cur = [], 0, []
    for ch in text:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if ch == "," and depth == 0:
            out.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if cur:
        out.append("".join(cur))
    return [p for p in (s.strip() for s in out) if p]


def parse_spec(spec: str) -> tuple[str, dict[str, str]]:
    """``'sphere_stereo:dim=4,radius=1'`` -> ``('sphere_stereo', {'dim': '4', 'radius': '1'})``."""
    name, _, rest = spec.partition(":")
    params = {}
    for item in _split_top(rest):
        k, eq, v = item.partition("=")
        if not eq:
            raise CatalogError(f"bad parameter {item!r} in {spec!r} (expected key=value)")
        params[k.strip()] = v.strip()
    return name.strip(), params


def resolve_metric(spec) -> MetricField:
    """A MetricField, a DSL file path, or a catalog spec string."""
    if isinstance(spec, MetricField):
        return spec
    if isinstance(spec, (str, os.PathLike)) and os.path.isfile(spec):
        from .dsl import load_metric
        return load_metric(spec)
    if isinstance(spec, tuple):
        return catalog_metric(spec[0], spec[1])
    name, params = parse_spec(str(spec))
    return catalog_metric(name, params)


__all__ = [
    "CATALOG", "CatalogEntry", "CatalogError", "catalog_metric", "parse_spec", "resolve_metric", "parse_matrix",
    "euclidean", "minkowski", "sphere_stereo", "hyperbolic_ball", "lorentz_const_curv", "schwarzschild",
    "beltrami_pullback",
]
