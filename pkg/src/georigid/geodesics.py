"""Geodesic traces and the one-dimensional consequences of geodesic equivalence.

Traces are fixed-step RK4 solutions of ``x'' = -Gamma(x)(x', x')``.  Along a
trace of ``g`` the function ``phi`` of an equivalent pair obeys a third-order
ODE, and ``p = exp(-2(phi - phi(t0)))`` is a quadratic (``KE = 0``) or a
combination of ``exp(+-2 sqrt(KE) t)`` (``KE > 0``), where ``E = g(x', x')``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import jets as J
from .dsl import MetricField
from .equivalence import EINSTEIN_GATE, EquivPair
from .jets import JetError
from .tensor import einstein_residual, frame_at

EXTRAPOLATION_FACTOR = 10.0
AFFINE_FIT_TOL = 1e-6
FIT_RESIDUAL_TOL = 1e-3
ZERO_KE_TOL = 1e-9


class HypothesisNotMet(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GeodesicTrace:
    label: str
    times: np.ndarray
    points: np.ndarray
    velocities: np.ndarray
    energy: np.ndarray
    truncated: bool = False
    steps_requested: int = 0

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def h(self) -> float:
        return float(self.times[1] - self.times[0])

    def energy_drift(self) -> float:
        return float(np.max(np.abs(self.energy - self.energy[0])))


def christoffel_at(fld: MetricField, x) -> np.ndarray:
    """``Gamma[i, j, k] = Gamma^i_jk`` from a first-order jet of the metric."""
    gj = fld.jet(x, 1)
    g, D = gj.coeffs[0], gj.coeffs[1]  # D[m, i, j] = d_m g_ij
    low = 0.5 * (np.transpose(D, (1, 0, 2)) + np.transpose(D, (1, 2, 0)) - D)  # low[l, j, k]
    return np.linalg.solve(g, low.reshape(len(x), -1)).reshape(low.shape)


def _accel(fld, x, v):
    G = christoffel_at(fld, x)
    return -np.einsum("ijk,j,k->i", G, v, v)


def _rk4_step(fld, x, v, h):
    a1 = _accel(fld, x, v)
    x2, v2 = x + 0.5 * h * v, v + 0.5 * h * a1
    a2 = _accel(fld, x2, v2)
    x3, v3 = x + 0.5 * h * v2, v + 0.5 * h * a2
    a3 = _accel(fld, x3, v3)
    x4, v4 = x + h * v3, v + h * a3
    a4 = _accel(fld, x4, v4)
    return (x + h / 6 * (v + 2 * v2 + 2 * v3 + v4),
            v + h / 6 * (a1 + 2 * a2 + 2 * a3 + a4))


def _inside(fld: MetricField, x) -> bool:
    return fld.chart.contains(x) and not fld.chart.near_singular(x)


def integrate_geodesic(fld: MetricField, x0, v0, T: float, steps: int) -> GeodesicTrace:
    """Classical RK4 with step ``T/steps``; stops (``truncated=True``) when leaving the chart box."""
    if steps < 100:
        raise ValueError("steps must be >= 100")
    x0, v0 = np.asarray(x0, dtype=float), np.asarray(v0, dtype=float)
    if not _inside(fld, x0):
        raise ValueError(f"start point {x0} outside the chart domain")
    h = T / steps
    xs, vs = [x0], [v0]
    truncated = False
    x, v = x0, v0
    for _ in range(steps):
        try:
            x, v = _rk4_step(fld, x, v, h)
        except (JetError, np.linalg.LinAlgError, ValueError):
            truncated = True
            break
        if not (np.all(np.isfinite(x)) and _inside(fld, x)):
            truncated = True
            break
        xs.append(x)
        vs.append(v)
    pts, vel = np.array(xs), np.array(vs)
    times = h * np.arange(len(pts))
    energy = np.array([v @ fld.matrix(x) @ v for x, v in zip(pts, vel)])
    return GeodesicTrace(fld.label, times, pts, vel, energy, truncated, steps)


def integrate_on_grid(fld: MetricField, x0, v0, times) -> tuple[np.ndarray, np.ndarray]:
    """RK4 over a given (possibly non-uniform) increasing time grid."""
    x, v = np.asarray(x0, dtype=float), np.asarray(v0, dtype=float)
    xs, vs = [x], [v]
    for h in np.diff(times):
        x, v = _rk4_step(fld, x, v, h)
        xs.append(x)
        vs.append(v)
    return np.array(xs), np.array(vs)


# ---------------------------------------------------------------------------
# initial data helpers
# ---------------------------------------------------------------------------

def random_unit_vector(g: np.ndarray, rng: np.random.Generator, sign: int = 1, tries: int = 1000) -> np.ndarray:
    """Random v with g(v, v) = sign (sign = +1 or -1).

    Gaussian in an orthonormal eigenframe of g, so both signs are likely however badly g is scaled.
    """
    w, U = np.linalg.eigh(g)
    frame = U / np.sqrt(np.abs(w))
    for _ in range(tries):
        y = rng.normal(size=g.shape[0])
        E = float(np.sum(np.sign(w) * y * y))
        if np.sign(E) == sign and abs(E) > 1e-3 * (y @ y):
            return frame @ y / np.sqrt(abs(E))
    raise ValueError(f"no vector with g(v,v) of sign {sign} found")


def null_vector(g: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
    """A vector with g(v, v) = 0 built from one positive and one negative eigendirection."""
    w, U = np.linalg.eigh(g)
    if w.min() > 0 or w.max() < 0:
        raise ValueError("definite metric has no null vectors")
    ip, iq = int(np.argmax(w)), int(np.argmin(w))
    if rng is not None:
        pos, neg = np.flatnonzero(w > 0), np.flatnonzero(w < 0)
        ip, iq = int(rng.choice(pos)), int(rng.choice(neg))
    return U[:, ip] / np.sqrt(w[ip]) + U[:, iq] / np.sqrt(-w[iq])


# ---------------------------------------------------------------------------
# checks along traces
# ---------------------------------------------------------------------------

def geodesic_image_residual(pair: EquivPair, trace: GeodesicTrace) -> float:
    """Max over a gbar-trace of the part of ``x'' + Gamma(x',x')`` transverse to ``x'``.

    ``x''`` is gbar's geodesic acceleration.  The transverse part is taken by
    Euclidean orthogonal projection so that null velocities are handled.
    """
    worst = 0.0
    for x, v in zip(trace.points, trace.velocities):
        vv = float(v @ v)
        if vv == 0.0:
            raise ValueError("zero velocity on trace")
        acc = _accel(pair.gbar, x, v)
        gam = -_accel(pair.g, x, v)
        w = acc + gam
        w_perp = w - (w @ v) / vv * v
        scale = max(float(np.linalg.norm(acc) + np.linalg.norm(gam)), vv, 1e-300)
        worst = max(worst, float(np.linalg.norm(w_perp)) / scale)
    return worst


def phi_jet_at(pair: EquivPair, x, order: int) -> J.Jet:
    n = pair.dim
    return (J.logabsdet(pair.gbar.jet(x, order)) - J.logabsdet(pair.g.jet(x, order))) * (1.0 / (2 * (n + 1)))


def phi_value(pair: EquivPair, x) -> float:
    n = pair.dim
    _, lb = np.linalg.slogdet(pair.gbar.matrix(x))
    _, lg = np.linalg.slogdet(pair.g.matrix(x))
    return float((lb - lg) / (2 * (n + 1)))


@dataclass(frozen=True)
class ReparamResult:
    defect: float
    t_of_tau: np.ndarray
    monotone: bool


def reparametrize(pair: EquivPair, trace: GeodesicTrace) -> ReparamResult:
    """Re-trace a gbar-geodesic as a g-geodesic.

    With ``f = exp(-2(phi - phi0))`` the g-parameter is ``t = int f dtau``
    (Hermite-corrected trapezoid rule, using ``f'`` from the phi jet).  The
    g-geodesic through the first point with velocity ``dx/dt`` is then
    integrated on that grid and compared with the trace positions.
    """
    taus, pts, vel = trace.times, trace.points, trace.velocities
    phi0 = phi_value(pair, pts[0])
    f, fp = [], []
    for x, v in zip(pts, vel):
        pj = phi_jet_at(pair, x, 1)
        fi = np.exp(-2 * (float(pj.coeffs[0]) - phi0))
        f.append(fi)
        fp.append(-2 * fi * float(pj.coeffs[1] @ v))
    f, fp = np.array(f), np.array(fp)
    h = np.diff(taus)
    dt = h / 2 * (f[:-1] + f[1:]) + h ** 2 / 12 * (fp[:-1] - fp[1:])
    t = np.concatenate([[0.0], np.cumsum(dt)])
    monotone = bool(np.all(dt > 0))
    if not monotone:
        return ReparamResult(float("inf"), t, False)
    xs, _ = integrate_on_grid(pair.g, pts[0], vel[0] / f[0], t)
    extent = max(float(np.max(np.linalg.norm(pts - pts[0], axis=1))), 1.0)
    defect = float(np.max(np.linalg.norm(xs - pts, axis=1))) / extent
    return ReparamResult(defect, t, True)


def reparam_ode_residual(pair: EquivPair, trace: GeodesicTrace) -> float:
    return reparametrize(pair, trace).defect


def _einstein_gate(pair: EquivPair, points, gate: float = EINSTEIN_GATE):
    idx = sorted({0, len(points) // 2, len(points) - 1})
    frames = [frame_at(pair.g, points[i]) for i in idx]
    worst = max(einstein_residual(fr) for fr in frames)
    if worst > gate:
        raise HypothesisNotMet(f"g is not Einstein along the trace (residual {worst:.3g})")
    return frames[0].K


@dataclass(frozen=True)
class PhiODEResult:
    residual: float
    K: float
    E: float
    times: np.ndarray
    pointwise: np.ndarray


def phi_ode_check(pair: EquivPair, trace: GeodesicTrace, n_eval: int = 64) -> PhiODEResult:
    """Third-order phi ODE along a g-trace.

    Derivatives of ``phi(t)`` follow from the chain rule with jets of phi and
    the trace velocity; the acceleration and its derivative come from central
    differences of the trace velocities, so the residual is O(h^4).
    """
    if len(trace.times) < 5:
        raise ValueError("trace too short")
    K = _einstein_gate(pair, trace.points)
    E = float(trace.energy[0])
    h = trace.h
    V = trace.velocities
    interior = np.arange(2, len(trace.times) - 2)
    pick = interior[np.unique(np.linspace(0, len(interior) - 1, min(n_eval, len(interior))).round().astype(int))]
    res = []
    for k in pick:
        v = V[k]
        a = (V[k - 2] - 8 * V[k - 1] + 8 * V[k + 1] - V[k + 2]) / (12 * h)
        adot = (-V[k - 2] + 16 * V[k - 1] - 30 * V[k] + 16 * V[k + 1] - V[k + 2]) / (12 * h ** 2)
        pj = phi_jet_at(pair, trace.points[k], 3)
        p1, p2, p3 = pj.coeffs[1], pj.coeffs[2], pj.coeffs[3]
        d1 = float(p1 @ v)
        d2 = float(v @ p2 @ v + p1 @ a)
        d3 = float(np.einsum("ijk,i,j,k->", p3, v, v, v) + 3 * (v @ p2 @ a) + p1 @ adot)
        terms = (d3, 4 * K * E * d1, 6 * d1 * d2, 4 * d1 ** 3)
        r = d3 - terms[1] - terms[2] + terms[3]
        res.append(abs(r) / max(sum(abs(t) for t in terms), 1.0))
    res = np.array(res)
    return PhiODEResult(float(res.max()), K, E, trace.times[pick], res)


def phi_ode_residual(pair: EquivPair, trace: GeodesicTrace, n_eval: int = 64) -> float:
    return phi_ode_check(pair, trace, n_eval).residual


# ---------------------------------------------------------------------------
# tau classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TauClassification:
    regime: str
    constants: tuple
    fit_residual: float
    verdict: str
    KE: float
    window: tuple[float, float]
    notes: str = ""


def p_along(pair: EquivPair, trace: GeodesicTrace, min_samples: int = 200) -> tuple[np.ndarray, np.ndarray]:
    m = len(trace.times)
    idx = np.arange(m) if m <= 2 * min_samples else np.unique(np.linspace(0, m - 1, 2 * min_samples).round().astype(int))
    phis = np.array([phi_value(pair, trace.points[i]) for i in idx])
    return trace.times[idx], np.exp(-2 * (phis - phis[0]))


def _fit(design: np.ndarray, p: np.ndarray):
    coef, *_ = np.linalg.lstsq(design, p, rcond=None)
    resid = float(np.max(np.abs(design @ coef - p)) / max(np.max(np.abs(p)), 1e-300))
    return coef, resid


def classify_tau(pair: EquivPair, trace: GeodesicTrace, K: float | None = None) -> TauClassification:
    if len(trace.times) < 200:
        raise ValueError("classification needs at least 200 samples along the trace")
    if K is None:
        K = _einstein_gate(pair, trace.points)
    E = float(trace.energy[0])
    KE = K * E
    t, p = p_along(pair, trace)
    t0, t1 = float(t[0]), float(t[-1])
    L = t1 - t0
    mid = 0.5 * (t0 + t1)
    lo, hi = mid - 0.5 * EXTRAPOLATION_FACTOR * L, mid + 0.5 * EXTRAPOLATION_FACTOR * L
    window = (lo, hi)
    if abs(KE) <= ZERO_KE_TOL:
        (C2, C1, C0), resid = _fit(np.stack([t ** 2, t, np.ones_like(t)], axis=1), p)
        consts = (float(C0), float(C1), float(C2))
        if resid > FIT_RESIDUAL_TOL:
            return TauClassification("zero_KE", consts, resid, "indeterminate", KE, window, "quadratic fit mismatch")
        if abs(C1) <= AFFINE_FIT_TOL * abs(C0) and abs(C2) <= AFFINE_FIT_TOL * abs(C0):
            return TauClassification("zero_KE", consts, resid, "affine_consistent", KE, window)
        roots = np.roots([C2, C1, C0]) if abs(C2) > AFFINE_FIT_TOL * abs(C0) else np.array([-C0 / C1])
        real = roots[np.abs(roots.imag) <= 1e-12 * np.maximum(1.0, np.abs(roots))].real
        if np.any((real >= lo) & (real <= hi)):
            return TauClassification("zero_KE", consts, resid, "finite_time_explosion", KE, window,
                                     f"p vanishes at t = {real[(real >= lo) & (real <= hi)].min():.6g}")
        if real.size == 0 and abs(C2) > AFFINE_FIT_TOL * abs(C0):
            return TauClassification("zero_KE", consts, resid, "bounded_tau", KE, window, "p has no real root")
        return TauClassification("zero_KE", consts, resid, "indeterminate", KE, window, "root outside window")
    if KE < 0:
        return TauClassification("negative_KE", (float("nan"),) * 3, float("nan"), "indeterminate", KE, window,
                                 "KE < 0 lies outside the dichotomy")
    w = 2 * np.sqrt(KE)
    s = t - mid
    (C, Cp, Cm), resid = _fit(np.stack([np.ones_like(s), np.exp(w * s), np.exp(-w * s)], axis=1), p)
    # report constants for the basis exp(+-w t) (shift back from the centred fit)
    consts = (float(C), float(Cp * np.exp(-w * mid)), float(Cm * np.exp(w * mid)))
    if resid > FIT_RESIDUAL_TOL:
        return TauClassification("positive_KE", consts, resid, "indeterminate", KE, window, "exponential fit mismatch")
    if abs(Cp) <= AFFINE_FIT_TOL * abs(C) and abs(Cm) <= AFFINE_FIT_TOL * abs(C):
        return TauClassification("positive_KE", consts, resid, "affine_consistent", KE, window)
    grid = np.linspace(lo - mid, hi - mid, 20001)
    vals = C + Cp * np.exp(w * grid) + Cm * np.exp(-w * grid)
    if np.any(vals <= 0):
        return TauClassification("positive_KE", consts, resid, "finite_time_explosion", KE, window,
                                 f"p vanishes near t = {grid[np.argmax(vals <= 0)] + mid:.6g}")
    if Cp > 0 and Cm > 0:
        return TauClassification("positive_KE", consts, resid, "bounded_tau", KE, window, "p grows in both directions")
    return TauClassification("positive_KE", consts, resid, "indeterminate", KE, window, "no root in window")


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def trace_rows(trace: GeodesicTrace, pair: EquivPair | None = None):
    n = trace.dim
    header = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"v{i + 1}" for i in range(n)] + ["E", "phi", "p"]
    phi0 = phi_value(pair, trace.points[0]) if pair is not None else None
    rows = []
    for t, x, v, e in zip(trace.times, trace.points, trace.velocities, trace.energy):
        if pair is not None:
            ph = phi_value(pair, x)
            pv = np.exp(-2 * (ph - phi0))
        else:
            ph = pv = float("nan")
        rows.append([t, *x, *v, e, ph, pv])
    return header, rows


def export_trace_csv(trace: GeodesicTrace, path, pair: EquivPair | None = None) -> None:
    header, rows = trace_rows(trace, pair)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(c)) for c in r])


__all__ = [
    "GeodesicTrace", "TauClassification", "ReparamResult", "PhiODEResult", "HypothesisNotMet",
    "integrate_geodesic", "integrate_on_grid", "christoffel_at", "random_unit_vector", "null_vector",
    "geodesic_image_residual", "reparametrize", "reparam_ode_residual", "phi_ode_check", "phi_ode_residual",
    "classify_tau", "p_along", "phi_value", "phi_jet_at", "export_trace_csv", "trace_rows",
]
