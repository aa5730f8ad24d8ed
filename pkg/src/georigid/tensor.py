"""Pointwise curvature from metric jets.

Conventions (pinned by the unit round sphere having ``R = n(n-1)``, ``K = -1``)::

    Gamma^i_jk = 1/2 g^il (d_j g_lk + d_k g_lj - d_l g_jk)
    R^i_jkl    = d_k Gamma^i_lj - d_l Gamma^i_kj + Gamma^i_km Gamma^m_lj - Gamma^i_lm Gamma^m_kj
    R_jl       = R^i_jil,   R = g^jl R_jl,   K = -R/(n(n-1))

Array layouts: ``dg[i,j,k] = d_k g_ij``, ``Gamma[i,j,k] = Gamma^i_jk``,
``dGamma[i,j,k,l] = d_l Gamma^i_jk``, ``Riemann[i,j,k,l] = R^i_jkl``.
Covariant derivative indices are appended in differentiation order, so
``T[..., j, k]`` of a twice differentiated field is ``nabla_k nabla_j T``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import jets as J
from .dsl import MetricField
from .jets import Jet

FD_STEP = 1e-4
_LETTERS = "abcdefghijklmnopqrstu"


class SingularMetricError(ValueError):
    pass


def rel_norm(res, *terms) -> float:
    """``|res| / max(sum |term|, 1)``: relative when the terms are large, absolute otherwise."""
    scale = sum(float(np.linalg.norm(t)) for t in terms)
    return float(np.linalg.norm(res)) / max(scale, 1.0)


@dataclass(frozen=True, eq=False)
class PointFrame:
    x: np.ndarray
    g: np.ndarray
    g_inv: np.ndarray
    dg: np.ndarray
    Gamma: np.ndarray
    dGamma: np.ndarray
    Riemann: np.ndarray
    Ricci: np.ndarray
    scalar_R: float
    K: float
    # jets kept for covariant differentiation downstream
    g_jet: Jet = field(repr=False)
    g_inv_jet: Jet = field(repr=False)
    Gamma_jet: Jet = field(repr=False)
    Riemann_jet: Jet = field(repr=False)
    Ricci_jet: Jet = field(repr=False)

    @property
    def dim(self) -> int:
        return self.g.shape[0]

    @property
    def riemann_lowered(self) -> np.ndarray:
        """``R_ijkl = g_ia R^a_jkl``."""
        return np.einsum("ia,ajkl->ijkl", self.g, self.Riemann)


def christoffel_jet(g: Jet, g_inv: Jet) -> Jet:
    """Jet of Gamma^i_jk, one order lower than ``g``."""
    D = g.D()  # D[m, i, j] = d_m g_ij
    low = 0.5 * (D.einsum("jlk->ljk") + D.einsum("klj->ljk") - D)  # Gamma_ljk
    return J.einsum("il,ljk->ijk", g_inv.truncate(low.order), low)


def riemann_jet(Gamma: Jet) -> Jet:
    dG = Gamma.D()  # dG[m, i, j, k] = d_m Gamma^i_jk
    G1 = Gamma.truncate(dG.order)
    Q = J.einsum("ikm,mlj->ijkl", G1, G1)
    return dG.einsum("kilj->ijkl") - dG.einsum("likj->ijkl") + Q - Q.einsum("ijlk->ijkl")


def frame_at(fld: MetricField, x) -> PointFrame:
    x = np.asarray(x, dtype=float)
    gj = fld.jet(x, 3)
    g = np.array(gj.coeffs[0])
    if not np.all(np.isfinite(g)) or abs(np.linalg.det(g)) <= 1e-14 * max(1.0, np.abs(g).max()) ** len(x):
        raise SingularMetricError(f"metric is singular at {x}")
    ginv = J.inv(gj)
    Gam = christoffel_jet(gj, ginv)
    Riem = riemann_jet(Gam)
    Ric = Riem.einsum("ijil->jl")
    n = len(x)
    R = float(np.einsum("jl,jl->", ginv.coeffs[0], Ric.coeffs[0]))
    return PointFrame(
        x=x, g=g, g_inv=np.array(ginv.coeffs[0]), dg=np.moveaxis(gj.coeffs[1], 0, -1),
        Gamma=np.array(Gam.coeffs[0]), dGamma=np.moveaxis(Gam.coeffs[1], 0, -1),
        Riemann=np.array(Riem.coeffs[0]), Ricci=np.array(Ric.coeffs[0]), scalar_R=R, K=-R / (n * (n - 1)),
        g_jet=gj, g_inv_jet=ginv, Gamma_jet=Gam, Riemann_jet=Riem, Ricci_jet=Ric,
    )


# ---------------------------------------------------------------------------
# covariant derivatives
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TensorPoint:
    """Components of a tensor at one point.  ``index_types`` lists 'u' (upper) / 'd' (lower) per slot."""

    index_types: str
    components: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        n = len(self.x)
        if self.components.shape != (n,) * len(self.index_types):
            raise ValueError(f"components shape {self.components.shape} does not match valence {self.valence}")

    @property
    def valence(self) -> tuple[int, int]:
        return self.index_types.count("u"), self.index_types.count("d")


@dataclass(frozen=True)
class TensorField:
    """A tensor field sampler.

    ``fn(x, order)`` returns a :class:`Jet` (jet-backed route) or, if
    ``jet_backed`` is false, ``fn(x)`` returns a plain array and derivatives
    are taken by central differences with step ``FD_STEP``.
    """

    index_types: str
    fn: Callable
    jet_backed: bool = True


def nabla_jet(T: Jet, types: str, Gamma: Jet) -> Jet:
    """Jet of the covariant derivative; the new lower index is appended last."""
    r = len(types)
    order = min(T.order - 1, Gamma.order)
    if order < 0:
        raise J.JetError("covariant derivative needs a jet of order >= 1")
    out = T.D().truncate(order).map_values(lambda c, k: np.moveaxis(c, k, -1))
    Tt = T.truncate(order)
    G = Gamma.truncate(order)
    idx = _LETTERS[:r]
    for p, t in enumerate(types):
        inner = idx[:p] + "z" + idx[p + 1:]
        if t == "u":
            out = out + J.einsum(f"{idx[p]}yz,{inner}->{idx}y", G, Tt)
        else:
            out = out - J.einsum(f"zy{idx[p]},{inner}->{idx}y", G, Tt)
    return out


def nabla_array(dT: np.ndarray, T: np.ndarray, types: str, Gamma: np.ndarray) -> np.ndarray:
    """Covariant derivative from plain partials ``dT[..., m] = d_m T``."""
    out = np.array(dT, dtype=float)
    r = len(types)
    idx = _LETTERS[:r]
    for p, t in enumerate(types):
        inner = idx[:p] + "z" + idx[p + 1:]
        if t == "u":
            out += np.einsum(f"{idx[p]}yz,{inner}->{idx}y", Gamma, T)
        else:
            out -= np.einsum(f"zy{idx[p]},{inner}->{idx}y", Gamma, T)
    return out


def nabla_jet_iterated(T: Jet, types: str, Gamma: Jet, times: int) -> list[Jet]:
    """``[T, nabla T, nabla^2 T, ...]`` up to ``times`` derivatives."""
    out = [T]
    for _ in range(times):
        out.append(nabla_jet(out[-1], types, Gamma))
        types += "d"
    return out


def covariant_derivative(frame_source: MetricField, T: TensorField, x, order: int = 1) -> TensorPoint:
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    x = np.asarray(x, dtype=float)
    if T.jet_backed:
        Tj = T.fn(x, order)
        if Tj.order < order:
            raise J.JetError(f"jet of order {Tj.order} cannot give {order} covariant derivatives")
        fr = frame_at(frame_source, x)
        chain = nabla_jet_iterated(Tj, T.index_types, fr.Gamma_jet, order)
        return TensorPoint(T.index_types + "d" * order, np.array(chain[-1].coeffs[0]), x)
    return TensorPoint(T.index_types + "d" * order, _nabla_fd(frame_source, T.fn, T.index_types, x, order), x)


def _nabla_fd(fld: MetricField, fn, types: str, x, order: int, h: float = FD_STEP) -> np.ndarray:
    if order == 0:
        return np.asarray(fn(x), dtype=float)
    n = len(x)
    vals = np.asarray(_nabla_fd(fld, fn, types, x, order - 1, h))
    partial = np.stack(
        [(_nabla_fd(fld, fn, types, x + h * e, order - 1, h) - _nabla_fd(fld, fn, types, x - h * e, order - 1, h))
         / (2 * h) for e in np.eye(n)], axis=-1)
    Gamma = christoffel_jet(fld.jet(x, 1), J.inv(fld.jet(x, 0))).coeffs[0]
    return nabla_array(partial, vals, types + "d" * (order - 1), Gamma)


# ---------------------------------------------------------------------------
# curvature residuals
# ---------------------------------------------------------------------------

def einstein_residual(frame: PointFrame) -> float:
    n = frame.dim
    res = frame.Ricci - frame.scalar_R / n * frame.g
    return float(np.linalg.norm(res) / np.linalg.norm(frame.g))


def harmonic_curvature_residual(fld: MetricField, x, frame: PointFrame | None = None) -> tuple[float, float]:
    """(|R^a_ijk,a|, |R_ik,j - R_ij,k|), each divided by max(|nabla Riemann|, 1)."""
    fr = frame or frame_at(fld, x)
    dR = nabla_jet(fr.Riemann_jet, "uddd", fr.Gamma_jet).coeffs[0]  # dR[a,i,j,k,m] = R^a_ijk,m
    div = np.einsum("aijka->ijk", dR)
    dRic = nabla_jet(fr.Ricci_jet, "dd", fr.Gamma_jet).coeffs[0]  # dRic[i,k,j] = R_ik,j
    cod = dRic - np.swapaxes(dRic, 1, 2)
    scale = max(float(np.linalg.norm(dR)), 1.0)
    return float(np.linalg.norm(div)) / scale, float(np.linalg.norm(cod)) / scale


def constant_curvature_part(frame: PointFrame, kappa: float) -> np.ndarray:
    """``kappa (delta^h_j g_ik - delta^h_k g_ij)`` laid out as ``[h, i, j, k]``."""
    d = np.eye(frame.dim)
    g = frame.g
    return kappa * (np.einsum("hj,ik->hijk", d, g) - np.einsum("hk,ij->hijk", d, g))


def yano_tensor(frame: PointFrame) -> TensorPoint:
    n = frame.dim
    Y = frame.Riemann - constant_curvature_part(frame, frame.scalar_R / (n * (n - 1)))
    return TensorPoint("uddd", Y, frame.x)


@dataclass(frozen=True, eq=False)
class ZTensor:
    """Fully covariant 4-tensor with the pair/skew symmetries of a curvature tensor."""

    dim: int
    components: np.ndarray

    def symmetry_defect(self) -> float:
        Z = self.components
        scale = max(float(np.linalg.norm(Z)), 1.0)
        d1 = np.linalg.norm(Z - np.transpose(Z, (2, 3, 0, 1)))
        d2 = np.linalg.norm(Z + np.transpose(Z, (1, 0, 2, 3)))
        d3 = np.linalg.norm(Z + np.transpose(Z, (0, 1, 3, 2)))
        return float(max(d1, d2, d3)) / scale

    def trace(self, g_inv: np.ndarray) -> np.ndarray:
        """``g^ik Z_ijkl``."""
        return np.einsum("ik,ijkl->jl", g_inv, self.components)


@dataclass(frozen=True, eq=False)
class ZFrame:
    Z: ZTensor
    trace_defect: float
    trace_ok: bool


def z_tensor(frame: PointFrame, tol: float = 1e-8) -> ZFrame:
    """``Z^i_jkl = R^i_jkl - K(delta^i_l g_jk - delta^i_k g_jl)`` lowered; trace condition flagged."""
    d = np.eye(frame.dim)
    g = frame.g
    Zup = frame.Riemann - frame.K * (np.einsum("il,jk->ijkl", d, g) - np.einsum("ik,jl->ijkl", d, g))
    Z = ZTensor(frame.dim, np.einsum("ia,ajkl->ijkl", g, Zup))
    tr = rel_norm(Z.trace(frame.g_inv), frame.Ricci)
    return ZFrame(Z, tr, tr <= tol)


def riemann_symmetry_defects(frame: PointFrame) -> dict[str, float]:
    """Relative defects of the algebraic Riemann symmetries and the first Bianchi identity."""
    Rl = frame.riemann_lowered
    s = max(float(np.linalg.norm(Rl)), 1.0)
    Ru = frame.Riemann
    return {
        "skew_first_pair": float(np.linalg.norm(Rl + np.transpose(Rl, (1, 0, 2, 3)))) / s,
        "skew_last_pair": float(np.linalg.norm(Rl + np.transpose(Rl, (0, 1, 3, 2)))) / s,
        "pair_exchange": float(np.linalg.norm(Rl - np.transpose(Rl, (2, 3, 0, 1)))) / s,
        "first_bianchi": float(np.linalg.norm(Ru + np.transpose(Ru, (0, 2, 3, 1)) + np.transpose(Ru, (0, 3, 1, 2))))
        / max(float(np.linalg.norm(Ru)), 1.0),
    }


__all__ = [
    "PointFrame", "TensorPoint", "TensorField", "ZTensor", "ZFrame", "SingularMetricError", "frame_at",
    "christoffel_jet", "riemann_jet", "nabla_jet", "nabla_array", "nabla_jet_iterated", "covariant_derivative",
    "einstein_residual", "harmonic_curvature_residual", "yano_tensor", "z_tensor", "riemann_symmetry_defects",
    "constant_curvature_part", "rel_norm", "FD_STEP",
]
