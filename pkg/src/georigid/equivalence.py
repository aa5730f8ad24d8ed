"""Projective data of a metric pair and the identities it must satisfy.

For metrics ``g`` and ``gbar`` on one chart::

    phi      = log|det gbar / det g| / (2(n+1))
    a_ij     = exp(2 phi) gbar^ab g_ai g_bj
    lambda_i = -exp(2 phi) phi_a gbar^ab g_bi
    lambda   = g^ab a_ab / 2

Every residual below is a pure function of ``(pair, x)``.  Residuals are
``|lhs - rhs| / max(sum of term norms, 1)`` unless stated otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import jets as J
from .dsl import MetricField
from .tensor import PointFrame, einstein_residual, frame_at, nabla_jet, rel_norm, yano_tensor

EINSTEIN_GATE = 1e-6
AFFINE_TOL = 1e-8
NON_AFFINE_TOL = 1e-4
NON_AFFINE_FRACTION = 0.01


def lambda_floor(lam: float) -> float:
    return 1e-6 * (1.0 + abs(lam))


class IdentitySkipped(Exception):
    """Identity not applicable at this point (degenerate branch)."""


class LambdaFloorError(IdentitySkipped):
    pass


class PreconditionError(ValueError):
    pass


class ChartMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class EquivPair:
    g: MetricField
    gbar: MetricField
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.g.dim

    def at(self, x) -> "PairPoint":
        x = np.asarray(x, dtype=float)
        key = x.tobytes()
        pt = self._cache.get(key)
        if pt is None:
            if len(self._cache) > 512:
                self._cache.clear()
            pt = self._cache[key] = PairPoint(self, x)
        return pt

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.g.sample(n, rng, others=(self.gbar,))

    # per-point accessors: phi, a, lambda and their derivatives
    def phi(self, x) -> float:
        return self.at(x).phi

    def phi_i(self, x) -> np.ndarray:
        return self.at(x).phi_i

    def a(self, x) -> np.ndarray:
        return self.at(x).a

    def lam(self, x) -> float:
        return self.at(x).lam

    def lambda_i(self, x) -> np.ndarray:
        return self.at(x).lambda_i


def build_pair(g: MetricField, gbar: MetricField) -> EquivPair:
    if g.dim != gbar.dim:
        raise ChartMismatchError(f"dimension mismatch: {g.dim} vs {gbar.dim}")
    return EquivPair(g, gbar)


class PairPoint:
    """Lazily computed projective data at one point."""

    def __init__(self, pair: EquivPair, x: np.ndarray):
        self.pair, self.x, self.n = pair, x, len(x)

    @cached_property
    def frame(self) -> PointFrame:
        return frame_at(self.pair.g, self.x)

    @cached_property
    def frame_bar(self) -> PointFrame:
        return frame_at(self.pair.gbar, self.x)

    @cached_property
    def phi_jet(self) -> J.Jet:
        return (J.logabsdet(self.frame_bar.g_jet) - J.logabsdet(self.frame.g_jet)) * (1.0 / (2 * (self.n + 1)))

    @property
    def phi(self) -> float:
        return float(self.phi_jet.coeffs[0])

    @property
    def phi_i(self) -> np.ndarray:
        """Gradient of phi."""
        return np.array(self.phi_jet.coeffs[1])

    @cached_property
    def phi_i_connection(self) -> np.ndarray:
        """``(Gammabar^a_ai - Gamma^a_ai)/(n+1)``: the covector read off the contracted connections."""
        tr = np.einsum("aai->i", self.frame_bar.Gamma) - np.einsum("aai->i", self.frame.Gamma)
        return tr / (self.n + 1)

    @cached_property
    def a_jet(self) -> J.Jet:
        e2 = J.exp(2.0 * self.phi_jet)
        gj, gbinv = self.frame.g_jet, self.frame_bar.g_inv_jet
        t = J.einsum("ab,ai->bi", gbinv, gj)
        return e2 * J.einsum("bi,bj->ij", t, gj)

    @property
    def a(self) -> np.ndarray:
        return np.array(self.a_jet.coeffs[0])

    @cached_property
    def a_mixed(self) -> np.ndarray:
        """``a^i_j = g^ik a_kj``."""
        return self.frame.g_inv @ self.a

    @cached_property
    def lam_jet(self) -> J.Jet:
        return 0.5 * J.einsum("ab,ab->", self.frame.g_inv_jet, self.a_jet)

    @property
    def lam(self) -> float:
        return float(self.lam_jet.coeffs[0])

    @cached_property
    def lambda_i_jet(self) -> J.Jet:
        """lambda_i from its defining formula in terms of phi and gbar."""
        e2 = J.exp(2.0 * self.phi_jet.truncate(2))
        dphi = self.phi_jet.D()
        t = J.einsum("a,ab->b", dphi, self.frame_bar.g_inv_jet.truncate(2))
        return -(e2 * J.einsum("b,bi->i", t, self.frame.g_jet.truncate(2)))

    @property
    def lambda_i(self) -> np.ndarray:
        return np.array(self.lambda_i_jet.coeffs[0])

    @cached_property
    def lam_chain(self) -> list[J.Jet]:
        """``[lambda, lambda_{,i}, lambda_{,ij}, lambda_{,ijk}]`` (covariant, jet-backed)."""
        lam = self.lam_jet
        first = lam.D()
        G = self.frame.Gamma_jet
        second = nabla_jet(first, "d", G)
        third = nabla_jet(second, "dd", G)
        return [lam, first, second, third]

    @property
    def dlam(self) -> np.ndarray:
        return np.array(self.lam_chain[1].coeffs[0])

    @property
    def ddlam(self) -> np.ndarray:
        return np.array(self.lam_chain[2].coeffs[0])

    @property
    def dddlam(self) -> np.ndarray:
        return np.array(self.lam_chain[3].coeffs[0])

    @cached_property
    def laplacian_lam_jet(self) -> J.Jet:
        return J.einsum("ab,ab->", self.frame.g_inv_jet.truncate(1), self.lam_chain[2])

    @cached_property
    def nabla_a(self) -> np.ndarray:
        return np.array(nabla_jet(self.a_jet, "dd", self.frame.Gamma_jet).coeffs[0])

    @cached_property
    def nabla_gbar(self) -> np.ndarray:
        return np.array(nabla_jet(self.frame_bar.g_jet, "dd", self.frame.Gamma_jet).coeffs[0])

    @cached_property
    def nabla_dphi(self) -> np.ndarray:
        """``phi_{i,j}``."""
        return np.array(nabla_jet(self.phi_jet.D(), "d", self.frame.Gamma_jet).coeffs[0])

    @cached_property
    def einstein(self) -> float:
        return einstein_residual(self.frame)

    @property
    def K(self) -> float:
        return self.frame.K

    @cached_property
    def mu_jet(self) -> J.Jet:
        return (self.laplacian_lam_jet - 2.0 * self.K * self.lam_jet.truncate(1)) * (1.0 / self.n)

    @property
    def mu(self) -> float:
        return float(self.mu_jet.coeffs[0])

    def lambda_nonzero(self) -> bool:
        return float(np.linalg.norm(self.dlam)) > lambda_floor(self.lam)

    def require_lambda(self):
        if not self.lambda_nonzero():
            raise LambdaFloorError(f"|lambda_i| = {np.linalg.norm(self.dlam):.3g} below floor at {self.x}")


# ---------------------------------------------------------------------------
# residuals
# ---------------------------------------------------------------------------

def _delta_phi(n, phi_i):
    d = np.eye(n)
    # delta^i_k phi_j + delta^i_j phi_k laid out [i, j, k]
    return np.einsum("ik,j->ijk", d, phi_i) + np.einsum("ij,k->ijk", d, phi_i)


def pure_trace_residual(pair: EquivPair, x) -> float:
    p = pair.at(x)
    diff = p.frame_bar.Gamma - p.frame.Gamma
    trace = _delta_phi(p.n, p.phi_i_connection)
    return rel_norm(diff - trace, p.frame_bar.Gamma, p.frame.Gamma)


def sinjukov_residual(pair: EquivPair, x) -> float:
    p = pair.at(x)
    g, li = p.frame.g, p.lambda_i
    rhs = np.einsum("i,jk->ijk", li, g) + np.einsum("j,ik->ijk", li, g)
    return rel_norm(p.nabla_a - rhs, p.nabla_a, rhs)


def levi_civita_residual(pair: EquivPair, x) -> float:
    p = pair.at(x)
    gb, ph = p.frame_bar.g, p.phi_i
    rhs = 2 * np.einsum("ij,k->ijk", gb, ph) + np.einsum("ik,j->ijk", gb, ph) + np.einsum("jk,i->ijk", gb, ph)
    return rel_norm(p.nabla_gbar - rhs, p.nabla_gbar, rhs)


def integrability_residual(pair: EquivPair, x) -> float:
    p = pair.at(x)
    a, R, g, L = p.a, p.frame.Riemann, p.frame.g, p.ddlam  # L[l, i] = lambda_{l,i}
    lhs = np.einsum("ia,ajkl->ijkl", a, R) + np.einsum("aj,aikl->ijkl", a, R)
    rhs = (np.einsum("li,jk->ijkl", L, g) + np.einsum("lj,ik->ijkl", L, g)
           - np.einsum("ki,jl->ijkl", L, g) - np.einsum("kj,il->ijkl", L, g))
    return rel_norm(lhs - rhs, lhs, rhs)


def ricci_commute_residual(pair: EquivPair, x) -> float:
    p = pair.at(x)
    A, Ric = p.a_mixed, p.frame.Ricci
    t = np.einsum("ai,aj->ij", A, Ric)
    return rel_norm(t - t.T, t)


def ricci_relation_residual(pair: EquivPair, x) -> float:
    p = pair.at(x)
    corr = (p.n - 1) * (p.nabla_dphi - np.outer(p.phi_i, p.phi_i))
    res = p.frame_bar.Ricci - p.frame.Ricci + corr
    return rel_norm(res, p.frame_bar.Ricci, p.frame.Ricci, corr)


def vb_residual(pair: EquivPair, x) -> float:
    """``|lambda_{i,j} - mu g_ij - K a_ij|``; skipped below the lambda floor."""
    p = pair.at(x)
    p.require_lambda()
    mu_g, Ka = p.mu * p.frame.g, p.K * p.a
    return rel_norm(p.ddlam - mu_g - Ka, p.ddlam, mu_g, Ka)


def mu_gradient_residual(pair: EquivPair, x) -> float:
    p = pair.at(x)
    p.require_lambda()
    dmu = np.array(p.mu_jet.coeffs[1])
    rhs = 2 * p.K * p.dlam
    return rel_norm(dmu - rhs, dmu, rhs)


def yano_contraction_residual(pair: EquivPair, x) -> float:
    p = pair.at(x)
    Y = yano_tensor(p.frame).components
    t = np.einsum("a,aijk->ijk", p.dlam, Y)
    return rel_norm(t, np.einsum("a,aijk->ijk", p.dlam, p.frame.Riemann))


def tanno_residual(pair: EquivPair, x) -> float:
    p = pair.at(x)
    g, d, K = p.frame.g, p.dlam, p.K
    rhs = K * (2 * np.einsum("k,ij->ijk", d, g) + np.einsum("j,ik->ijk", d, g) + np.einsum("i,jk->ijk", d, g))
    return rel_norm(p.dddlam - rhs, p.dddlam, rhs)


def einstein_transfer_residual(pair: EquivPair, x) -> tuple[float, float]:
    p = pair.at(x)
    p.require_lambda()
    n = p.n
    a_res = einstein_residual(p.frame_bar)
    lhs = p.nabla_dphi - np.outer(p.phi_i, p.phi_i)
    t1 = p.frame.scalar_R / (n * (n - 1)) * p.frame.g
    t2 = p.frame_bar.scalar_R / (n * (n - 1)) * p.frame_bar.g
    return a_res, rel_norm(lhs - t1 + t2, lhs, t1, t2)


def kbar_estimate(pair: EquivPair, x) -> tuple[float, float, float]:
    """Three values of Kbar at ``x``.

    * least-squares fit of ``phi_{i,j} - phi_i phi_j + K g_ij = Kbar gbar_ij``,
    * the coefficient ``phi_a phi_b gbar^ab - exp(-2 phi) mu`` of gbar in the
      same relation written through mu,
    * ``-Rbar/(n(n-1))`` from gbar's own curvature.
    """
    p = pair.at(x)
    n = p.n
    lhs = p.nabla_dphi - np.outer(p.phi_i, p.phi_i) + p.K * p.frame.g
    gb = p.frame_bar.g
    fit = float(np.sum(lhs * gb) / np.sum(gb * gb))
    via_mu = float(p.phi_i @ p.frame_bar.g_inv @ p.phi_i - np.exp(-2 * p.phi) * p.mu)
    return fit, via_mu, -p.frame_bar.scalar_R / (n * (n - 1))


def kbar_crosscheck_residual(pair: EquivPair, x) -> float:
    """Largest disagreement among the three Kbar values, relative to max(|Kbar|, 1)."""
    p = pair.at(x)
    p.require_lambda()
    vals = kbar_estimate(pair, x)
    return (max(vals) - min(vals)) / max(abs(vals[2]), 1.0)


# ---------------------------------------------------------------------------
# harmonic-curvature coefficients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HarmonicCoeffs:
    c1: float
    c2: float
    c3: float
    c4: float
    residual: float
    xi: np.ndarray


def default_xi(p: PairPoint) -> np.ndarray:
    lam_i = p.dlam
    up = p.frame.g_inv @ lam_i
    q = float(lam_i @ up)
    if abs(q) > 1e-8 * float(lam_i @ lam_i):
        return up / q
    return lam_i / float(lam_i @ lam_i)


def harmonic_coeffs(pair: EquivPair, x, xi=None, verbatim: bool = False) -> HarmonicCoeffs:
    """Coefficients expressing ``lambda_{k,j}`` through g, Ric, a and a.Ric.

    The default coefficients are the ones that make the decomposition hold;
    ``verbatim=True`` evaluates the alternative sign pattern (c1..c3 negated,
    ``c4 = -tr(a Ric)/4``), which does not decompose; kept for comparison.
    """
    p = pair.at(x)
    if not p.lambda_nonzero():
        raise PreconditionError("lambda_i vanishes: no vector xi with lambda_i xi^i = 1")
    lam_i = p.dlam
    xi = default_xi(p) if xi is None else np.asarray(xi, dtype=float)
    s = float(lam_i @ xi)
    if abs(s) < 1e-12 * float(np.linalg.norm(lam_i) * np.linalg.norm(xi)):
        raise PreconditionError("xi is orthogonal to lambda_i")
    xi = xi / s
    n = p.n
    g, ginv, Ric, R = p.frame.g, p.frame.g_inv, p.frame.Ricci, p.frame.scalar_R
    A = p.a_mixed  # A[a, b] = a^a_b
    lAx = float(lam_i @ A @ xi)
    lap_cov = np.einsum("abc,bc->a", p.dddlam, ginv)  # lambda_{a,b}^b
    Lx = float(lap_cov @ xi)
    trAR = float(np.trace(A @ (ginv @ Ric)))
    lap = float(np.einsum("ab,ab->", ginv, p.ddlam))
    lam = p.lam
    if verbatim:
        c1 = (-lAx * R + 2 * lam * Lx + trAR - 4 * lap) / (4 * n)
        c2, c3, c4 = 0.25 * lAx, -0.25 * Lx, -0.25 * trAR
    else:
        c1 = (lAx * R - 2 * lam * Lx - trAR + 4 * lap) / (4 * n)
        c2, c3, c4 = -0.25 * lAx, 0.25 * Lx, 0.25
    aR = np.einsum("aj,ak->kj", A, Ric)
    terms = [c1 * g, c2 * Ric, c3 * p.a, c4 * aR]
    res = rel_norm(p.ddlam - sum(terms), p.ddlam, *terms)
    return HarmonicCoeffs(c1, c2, c3, c4, res, xi)


def random_admissible_xi(pair: EquivPair, x, rng: np.random.Generator, count: int = 5) -> list[np.ndarray]:
    lam_i = pair.at(x).dlam
    out = []
    while len(out) < count:
        v = rng.normal(size=len(lam_i))
        s = float(lam_i @ v)
        if abs(s) > 0.1 * np.linalg.norm(lam_i) * np.linalg.norm(v):
            out.append(v / s)
    return out


# ---------------------------------------------------------------------------
# verdicts
# ---------------------------------------------------------------------------

def affine_equivalence_test(pair: EquivPair, samples) -> str:
    norms = np.array([np.linalg.norm(pair.at(x).phi_i) for x in samples])
    if norms.size == 0:
        return "inconclusive"
    if norms.max() <= AFFINE_TOL:
        return "affine"
    if np.mean(norms > NON_AFFINE_TOL) >= NON_AFFINE_FRACTION:
        return "non_affine"
    return "inconclusive"


@dataclass(frozen=True)
class IdentityResult:
    """``status``: ok, skipped (lambda floor), hypothesis_not_met (Einstein gate), out_of_hypothesis (dim < 3)."""

    value: float
    status: str
    note: str = ""


RESIDUALS = {
    "pure_trace": pure_trace_residual,
    "levi_civita": levi_civita_residual,
    "sinjukov": sinjukov_residual,
    "integrability": integrability_residual,
    "ricci_commute": ricci_commute_residual,
    "ricci_relation": ricci_relation_residual,
    "vb": vb_residual,
    "mu_gradient": mu_gradient_residual,
    "yano_contraction": yano_contraction_residual,
    "tanno": tanno_residual,
    "einstein_transfer": lambda pair, x: max(einstein_transfer_residual(pair, x)),
    "kbar_crosscheck": kbar_crosscheck_residual,
    "harmonic_coeffs": lambda pair, x: harmonic_coeffs(pair, x).residual,
}
EQUIVALENCE_SUITE = ("pure_trace", "levi_civita", "sinjukov")
GENERAL_IDENTITIES = ("integrability", "ricci_commute", "ricci_relation")
EINSTEIN_IDENTITIES = ("vb", "mu_gradient", "yano_contraction", "tanno", "einstein_transfer", "kbar_crosscheck",
                       "harmonic_coeffs")


def evaluate_identity(pair: EquivPair, name: str, x, einstein_gate: float = EINSTEIN_GATE) -> IdentityResult:
    """Evaluate one residual with the Einstein, dimension and lambda-floor gates applied."""
    fn = RESIDUALS[name]
    p = pair.at(x)
    if name in EINSTEIN_IDENTITIES:
        if p.einstein > einstein_gate:
            return IdentityResult(float("nan"), "hypothesis_not_met", f"einstein residual {p.einstein:.3g}")
    try:
        value = fn(pair, x)
    except (IdentitySkipped, PreconditionError) as exc:
        return IdentityResult(float("nan"), "skipped", str(exc))
    if name in EINSTEIN_IDENTITIES and p.n < 3:
        return IdentityResult(value, "out_of_hypothesis", "identity requires dimension >= 3")
    return IdentityResult(value, "ok")


__all__ = [
    "EquivPair", "PairPoint", "build_pair", "lambda_floor", "IdentitySkipped", "LambdaFloorError",
    "PreconditionError", "ChartMismatchError", "pure_trace_residual", "sinjukov_residual", "levi_civita_residual",
    "integrability_residual", "ricci_commute_residual", "ricci_relation_residual", "vb_residual",
    "mu_gradient_residual", "yano_contraction_residual", "tanno_residual", "einstein_transfer_residual",
    "kbar_estimate", "kbar_crosscheck_residual", "HarmonicCoeffs", "harmonic_coeffs", "default_xi",
    "random_admissible_xi", "affine_equivalence_test", "IdentityResult", "evaluate_identity", "RESIDUALS",
    "EQUIVALENCE_SUITE", "GENERAL_IDENTITIES", "EINSTEIN_IDENTITIES", "EINSTEIN_GATE",
]
