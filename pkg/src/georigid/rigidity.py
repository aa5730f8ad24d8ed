"""Finite-dimensional linear algebra behind the four-dimensional rigidity statement.

Matrix convention: a (1,1)-tensor ``a^i_j`` is stored as ``A[i, j]``, so
``A v`` contracts the lower index with a vector and ``A.T u`` contracts the
upper index with a covector.  ``a`` is g-self-adjoint when ``g A`` is symmetric.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import jets as J
from .equivalence import EquivPair
from .tensor import ZTensor

RANK_TOL = 1e-10
CLUSTER_TOL = 1e-8
MERGE_TOL = 1e-4


class RigidityPreconditionError(ValueError):
    pass


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def numerical_rank(M: np.ndarray, tol: float = RANK_TOL) -> int:
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


def nullspace(M: np.ndarray, tol: float = RANK_TOL, floor: float = 0.0) -> np.ndarray:
    """Orthonormal basis (columns) of the numerical kernel.

    Singular values below ``tol * max(sigma_max, floor)`` count as zero.
    """
    n = M.shape[1]
    if M.shape[0] == 0:
        return np.eye(n, dtype=M.dtype)
    _, s, Vh = np.linalg.svd(M)
    ref = max(s[0] if s.size else 0.0, floor)
    rank = int(np.sum(s > tol * ref)) if ref > 0 else 0
    return Vh[rank:].conj().T


def _pair_index(n):
    return list(combinations(range(n), 2))


def curvature_like_basis(n: int) -> np.ndarray:
    """Basis of 4-tensors with ``Z_ijkl = -Z_jikl = Z_klij``: shape ``(N(N+1)/2, n, n, n, n)``, N = n(n-1)/2."""
    pairs = _pair_index(n)
    out = []
    for a in range(len(pairs)):
        for b in range(a, len(pairs)):
            Z = np.zeros((n,) * 4)
            for (i, j), (k, l) in {(pairs[a], pairs[b]), (pairs[b], pairs[a])}:
                for s1, (p, q) in ((1, (i, j)), (-1, (j, i))):
                    for s2, (r, t) in ((1, (k, l)), (-1, (l, k))):
                        Z[p, q, r, t] = s1 * s2
            out.append(Z)
    return np.array(out)


def _check_metric(g):
    g = np.asarray(g, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise RigidityPreconditionError("g must be square")
    if np.linalg.norm(g - g.T) > 1e-12 * max(1.0, np.linalg.norm(g)):
        raise RigidityPreconditionError("g must be symmetric")
    if abs(np.linalg.det(g)) < 1e-12 * max(1.0, np.abs(g).max()) ** g.shape[0]:
        raise RigidityPreconditionError("g is singular")
    return g


# ---------------------------------------------------------------------------
# kernel forces zero
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelResult:
    nullspace_dim: int
    verdict: bool
    unknowns: int


def kernel_system(g: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Matrix of ``Z -> (g^ik Z_ijkl, v^i Z_ijkl)`` on the curvature-like basis, and the basis."""
    n = g.shape[0]
    B = curvature_like_basis(n)
    ginv = np.linalg.inv(g)
    tr = np.einsum("ik,bijkl->bjl", ginv, B).reshape(len(B), -1)
    ker = np.einsum("i,bijkl->bjkl", v, B).reshape(len(B), -1)
    return np.concatenate([tr, ker], axis=1).T, B


def kernel_forces_zero(g, v) -> KernelResult:
    """Rank test: does ``v`` in the kernel of a trace-free curvature-like ``Z`` force ``Z = 0``?"""
    g = _check_metric(g)
    v = np.asarray(v, dtype=float)
    # the nullspace dimension is basis independent; a g-orthonormal frame keeps the rank test well conditioned
    w, U = np.linalg.eigh(g)
    eta = np.diag(np.sign(w))
    vf = np.sqrt(np.abs(w)) * (U.T @ v)
    nv = float(np.linalg.norm(vf))
    M, B = kernel_system(eta, vf / nv if nv > 0 else vf)
    k = M.shape[1] - numerical_rank(M)
    return KernelResult(k, k == 0, M.shape[1])


# ---------------------------------------------------------------------------
# Jordan structure
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EigenInfo:
    value: complex
    algebraic: int
    geometric: int


@dataclass(frozen=True)
class JordanStructure:
    eigenvalues: list
    chains: list  # chains[k] = list of chains for eigenvalues[k]; a chain is [u, v, w, ...]

    @property
    def dim(self) -> int:
        return sum(e.algebraic for e in self.eigenvalues)

    def find(self, rho: complex, tol: float = 1e-6) -> int:
        for k, e in enumerate(self.eigenvalues):
            if abs(e.value - rho) <= tol * max(1.0, abs(rho)):
                return k
        raise KeyError(rho)


def self_adjoint_defect(A, g) -> float:
    gA = np.asarray(g) @ np.asarray(A)
    return float(np.linalg.norm(gA - gA.T)) / max(1.0, float(np.linalg.norm(gA)))


def _cluster(vals: np.ndarray, A: np.ndarray):
    n = len(vals)
    scale = max(1.0, float(np.linalg.norm(A, 2)))
    groups: list[list[complex]] = []
    for v in sorted(vals, key=lambda z: (round(z.real, 6), round(z.imag, 6))):
        for grp in groups:
            if abs(np.mean(grp) - v) <= CLUSTER_TOL * scale:
                grp.append(v)
                break
        else:
            groups.append([v])
    # defective eigenvalues split by ~eps^(1/k); merge nearby groups when the
    # generalized kernel confirms the combined multiplicity
    merged = True
    while merged:
        merged = False
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                if abs(np.mean(groups[i]) - np.mean(groups[j])) <= MERGE_TOL * scale:
                    cand = groups[i] + groups[j]
                    rho = complex(np.mean(cand))
                    N = np.linalg.matrix_power(A - rho * np.eye(n), len(cand))
                    if nullspace(N, floor=1.0).shape[1] >= len(cand):
                        groups[i] = cand
                        del groups[j]
                        merged = True
                        break
            if merged:
                break
    return [(complex(np.mean(grp)), len(grp)) for grp in groups]


def _snap(z: complex) -> complex:
    re = 0.0 if abs(z.real) < 1e-14 else z.real
    im = 0.0 if abs(z.imag) < 1e-12 * max(1.0, abs(z)) else z.imag
    return complex(re, im)


def jordan_chains(A: np.ndarray, rho: complex, mult: int) -> list[list[np.ndarray]]:
    """Chains ``[u, v, w, ...]`` with ``A u = rho u``, ``A v = rho v + u``, ... spanning the generalized eigenspace."""
    n = A.shape[0]
    N = A.astype(complex) - rho * np.eye(n)
    kers = [np.zeros((n, 0), dtype=complex)]
    P = np.eye(n, dtype=complex)
    while kers[-1].shape[1] < mult and len(kers) <= n:
        P = P @ N
        kers.append(nullspace(P, floor=1.0))
    chains: list[list[np.ndarray]] = []
    for k in range(len(kers) - 1, 0, -1):
        level_vecs = [np.linalg.matrix_power(N, len(c) - k) @ c[-1] for c in chains if len(c) >= k]
        B = np.column_stack([kers[k - 1]] + level_vecs) if level_vecs else kers[k - 1]
        r = numerical_rank(B) if B.shape[1] else 0
        for c in kers[k].T:
            trial = np.column_stack([B, c]) if B.shape[1] else c[:, None]
            rr = numerical_rank(trial)
            if rr > r:
                chain = [np.linalg.matrix_power(N, k - 1 - j) @ c for j in range(k)]
                chains.append(chain)
                B, r = trial, rr
    return chains


def jordan_structure(a, g, check: bool = True) -> JordanStructure:
    A = np.asarray(a, dtype=float)
    if check:
        g = _check_metric(g)
        d = self_adjoint_defect(A, g)
        if d > 1e-10:
            raise RigidityPreconditionError(f"a is not g-self-adjoint (defect {d:.3g})")
    n = A.shape[0]
    infos, chains = [], []
    for rho, alg in _cluster(np.linalg.eigvals(A), A):
        rho = _snap(rho)
        geo = nullspace(A - rho * np.eye(n), floor=1.0).shape[1]
        infos.append(EigenInfo(rho, alg, min(geo, alg)))
        chains.append(jordan_chains(A, rho, alg))
    return JordanStructure(infos, chains)


def generalized_eigenspace(A: np.ndarray, rho: complex) -> np.ndarray:
    n = A.shape[0]
    return nullspace(np.linalg.matrix_power(A.astype(complex) - rho * np.eye(n), n), floor=1.0)


# ---------------------------------------------------------------------------
# kernel containment for a skew matrix
# ---------------------------------------------------------------------------

def z_condition_defect(A, Z, form: str = "transpose") -> float:
    """``transpose``: the matrix form of the contraction identity, ``A^T Z = Z A`` (``A^T Z`` skew).

    ``literal``: ``A Z`` symmetric.
    """
    A, Z = np.asarray(A), np.asarray(Z)
    if form == "transpose":
        M = A.T @ Z - Z @ A
    elif form == "literal":
        M = A @ Z - (A @ Z).T
    else:
        raise ValueError(form)
    return float(np.linalg.norm(M)) / max(1.0, float(np.linalg.norm(A) * np.linalg.norm(Z)))


def generalized_eigenspace_in_kernel(a, Z, rho, form: str = "transpose", tol: float = 1e-10) -> float:
    """Max of ``|Z v| / |v|`` over a basis of the generalized eigenspace of ``rho``."""
    A = np.asarray(a, dtype=complex)
    Z = np.asarray(Z, dtype=complex)
    n = A.shape[0]
    if np.linalg.norm(Z + Z.T) > tol * max(1.0, np.linalg.norm(Z)):
        raise RigidityPreconditionError("Z is not skew-symmetric")
    d = z_condition_defect(A, Z, form)
    if d > tol:
        raise RigidityPreconditionError(f"commutation condition violated (defect {d:.3g})")
    geo = nullspace(A - rho * np.eye(n), floor=1.0).shape[1]
    if geo != 1:
        raise RigidityPreconditionError(f"geometric multiplicity of rho is {geo}, not 1")
    V = generalized_eigenspace(A, rho)
    if V.shape[1] == 0:
        raise RigidityPreconditionError(f"{rho} is not an eigenvalue")
    zn = max(1.0, float(np.linalg.norm(Z)))
    return max(float(np.linalg.norm(Z @ v)) / float(np.linalg.norm(v)) for v in V.T) / zn


def skew_solutions(A: np.ndarray) -> np.ndarray:
    """Basis (shape ``(k, n, n)``) of skew ``Z`` with ``A^T Z = Z A``."""
    n = A.shape[0]
    basis = []
    for i, j in _pair_index(n):
        E = np.zeros((n, n))
        E[i, j], E[j, i] = 1.0, -1.0
        basis.append(E)
    basis = np.array(basis)
    M = np.array([(A.T @ E - E @ A).ravel() for E in basis]).T
    K = nullspace(M)
    return np.einsum("bk,bij->kij", K.real, basis)


def jordan_block(rho: float, k: int) -> np.ndarray:
    return rho * np.eye(k) + np.eye(k, k=1)


@dataclass(frozen=True)
class LemmaInstance:
    A: np.ndarray
    Z: np.ndarray
    rho: float


def random_lemma_instance(rng: np.random.Generator, n: int | None = None, max_block: int = 3) -> LemmaInstance:
    """Random ``A`` with a geometric-multiplicity-one eigenvalue ``rho`` (block size <= 3) and a random
    nonzero-when-possible skew solution ``Z`` of ``A^T Z = Z A``.

    The remaining eigenvalues come in repeated pairs (geometric multiplicity >= 2), separated from
    each other and from ``rho`` by at least 0.5; an orthogonal similarity hides the block structure.
    """
    k = int(rng.integers(1, max_block + 1))
    n = n or int(k + 2 * rng.integers(1, 3))
    rest = n - k
    vals = []
    rho = float(rng.uniform(-3, 3))
    used = [rho]
    while sum(m for _, m in vals) < rest:
        m = min(int(rng.integers(2, 4)), rest - sum(m for _, m in vals))
        if m == 1:
            vals[-1] = (vals[-1][0], vals[-1][1] + 1)
            continue
        while True:
            mu = float(rng.uniform(-3, 3))
            if all(abs(mu - u) >= 0.5 for u in used):
                break
        used.append(mu)
        vals.append((mu, m))
    J = np.zeros((n, n))
    J[:k, :k] = jordan_block(rho, k)
    off = k
    for mu, m in vals:
        J[off:off + m, off:off + m] = mu * np.eye(m)
        off += m
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    A = Q @ J @ Q.T
    S = skew_solutions(A)
    Z = np.einsum("k,kij->ij", rng.normal(size=len(S)), S) if len(S) else np.zeros((n, n))
    return LemmaInstance(A, Z, rho)


# ---------------------------------------------------------------------------
# non-null kernel vector
# ---------------------------------------------------------------------------

def eq_z_defect(A: np.ndarray, Z4: np.ndarray) -> float:
    """``|a_i^a Z_ajkl + a_j^a Z_aikl|`` relative to ``|A||Z|``."""
    T = np.einsum("ai,ajkl->ijkl", A, Z4)
    return float(np.linalg.norm(T + np.transpose(T, (1, 0, 2, 3)))) / max(
        1.0, float(np.linalg.norm(A) * np.linalg.norm(Z4)))


def eq_z_solutions(A: np.ndarray) -> np.ndarray:
    """Basis of curvature-like Z (pair symmetries) solving the contraction identity for ``A``."""
    n = A.shape[0]
    B = curvature_like_basis(n)
    T = np.einsum("ai,bajkl->bijkl", A, B)
    M = (T + np.transpose(T, (0, 2, 1, 3, 4))).reshape(len(B), -1).T
    K = nullspace(M)
    return np.einsum("bm,bijkl->mijkl", K.real, B)


def _real_span(V: np.ndarray) -> np.ndarray:
    R = np.concatenate([V.real, V.imag], axis=1)
    U, s, _ = np.linalg.svd(R, full_matrices=False)
    return U[:, s > RANK_TOL * max(s[0], 1e-300)] if s.size else U[:, :0]


def nonnull_kernel_vector(a, g, Z4, tol: float = 1e-8):
    """A real non-null vector in the kernel of ``Z4``, from the generalized eigenspaces of a
    geometric-multiplicity-one eigenvalue and its conjugate; ``None`` if no such eigenvalue exists."""
    A = np.asarray(a, dtype=float)
    g = _check_metric(g)
    Z = Z4.components if isinstance(Z4, ZTensor) else np.asarray(Z4, dtype=float)
    d = self_adjoint_defect(A, g)
    if d > 1e-10:
        raise RigidityPreconditionError(f"a is not g-self-adjoint (defect {d:.3g})")
    dz = eq_z_defect(A, Z)
    if dz > tol:
        raise RigidityPreconditionError(f"contraction identity violated (defect {dz:.3g})")
    js = jordan_structure(A, g, check=False)
    zn = max(1.0, float(np.linalg.norm(Z)))
    for info in js.eigenvalues:
        if info.geometric != 1:
            continue
        V = generalized_eigenspace(A, info.value)
        if abs(info.value.imag) > 0:
            V = np.concatenate([V, generalized_eigenspace(A, np.conj(info.value))], axis=1)
        Bas = _real_span(V)
        if Bas.shape[1] == 0:
            continue
        w, Y = np.linalg.eigh(Bas.T @ g @ Bas)
        v = Bas @ Y[:, int(np.argmax(np.abs(w)))]
        v = v / np.linalg.norm(v)
        if abs(v @ g @ v) > tol and np.linalg.norm(np.einsum("i,ijkl->jkl", v, Z)) <= tol * zn:
            return v
    return None


# ---------------------------------------------------------------------------
# eigenvalue gradient alignment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AlignmentResult:
    defect: float
    rho: float
    grad_rho: np.ndarray
    u: np.ndarray
    eq3_residual: float


class AlignmentSkipped(Exception):
    pass


def _simple_eigen(A: np.ndarray, sep: float = 1e-6):
    vals, R = np.linalg.eig(A)
    scale = max(1.0, float(np.abs(vals).max()))
    out = []
    for k, v in enumerate(vals):
        others = np.delete(vals, k)
        if abs(v.imag) <= 1e-12 * scale and np.all(np.abs(others - v) > sep * scale):
            out.append((float(v.real), R[:, k].real))
    return out


def eigen_gradient_alignment(pair: EquivPair, x, step: float | None = None) -> AlignmentResult:
    """Component of d(rho) transverse to the eigen-covector ``u`` for a simple real eigenvalue of ``a^i_j``.

    ``d rho`` comes from first-order perturbation ``u^T dA r / (u^T r)`` with the jet of ``A``; with
    ``step`` set it is instead a central difference of eigenvalues of ``A0 +- step dA``.
    """
    p = pair.at(x)
    Aj = J.einsum("ab,bc->ac", p.frame.g_inv_jet.truncate(1), p.a_jet.truncate(1))
    A0, dA = np.array(Aj.coeffs[0]), np.array(Aj.coeffs[1])  # dA[k] = d_k A
    simple = _simple_eigen(A0)
    if not simple:
        raise AlignmentSkipped("no simple real eigenvalue")
    ginv = p.frame.g_inv
    for rho, r in simple:
        wv, L = np.linalg.eig(A0.T)
        u = L[:, int(np.argmin(np.abs(wv - rho)))].real
        uu = float(u @ ginv @ u)
        if abs(uu) <= 1e-8 * float(u @ u):
            continue
        if step is None:
            grad = np.array([u @ dA[k] @ r for k in range(len(x))]) / float(u @ r)
        else:
            grad = np.empty(len(x))
            for k in range(len(x)):
                ep = np.linalg.eigvals(A0 + step * dA[k])
                em = np.linalg.eigvals(A0 - step * dA[k])
                grad[k] = (ep[np.argmin(np.abs(ep - rho))].real - em[np.argmin(np.abs(em - rho))].real) / (2 * step)
        perp = grad - (grad @ u) / (u @ u) * u
        defect = float(np.linalg.norm(perp)) / max(float(np.linalg.norm(grad)), 1.0)
        lam_i = p.dlam
        lhs = 2 * float(lam_i @ ginv @ u) * u
        eq3 = float(np.linalg.norm(lhs - uu * grad)) / max(float(np.linalg.norm(lhs) + abs(uu) * np.linalg.norm(grad)), 1.0)
        return AlignmentResult(defect, rho, grad, u, eq3)
    raise AlignmentSkipped("every simple eigenvalue has a null eigen-covector")


__all__ = [
    "KernelResult", "kernel_forces_zero", "kernel_system", "curvature_like_basis", "EigenInfo", "JordanStructure",
    "jordan_structure", "jordan_chains", "jordan_block", "generalized_eigenspace", "generalized_eigenspace_in_kernel",
    "z_condition_defect", "skew_solutions", "LemmaInstance", "random_lemma_instance", "nonnull_kernel_vector",
    "eq_z_solutions", "eq_z_defect", "eigen_gradient_alignment", "AlignmentResult", "AlignmentSkipped",
    "RigidityPreconditionError", "numerical_rank", "nullspace", "self_adjoint_defect", "ZTensor",
]
