"""Dense matrix kernel: exponential, principal logarithm, Jordan splitting.

Matrices are plain ``numpy.ndarray`` values of shape ``(d, d)`` with real or
complex dtype.  The norm used throughout is the Frobenius norm
``sqrt(sum |x_ij|^2)``, which is submultiplicative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np

from liekit.config import (
    DomainError,
    IllConditionedError,
    InconsistencyError,
    InvalidInputError,
    Tolerances,
    resolve,
)

_EPS = np.finfo(float).eps
EXP_TAYLOR_DEGREE = 18
EXP_SCALE_TARGET = 0.5
LOG_SERIES_RADIUS = 0.5


def as_matrix(A, name: str = "matrix") -> np.ndarray:
    """Validate and return ``A`` as a square 2-D float or complex array."""
    M = np.asarray(A)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise InvalidInputError(f"{name} must be a non-empty square matrix, got shape {M.shape}")
    if not np.issubdtype(M.dtype, np.number):
        raise InvalidInputError(f"{name} has non-numeric dtype {M.dtype}")
    if not np.issubdtype(M.dtype, np.complexfloating):
        M = M.astype(float)
    if not np.all(np.isfinite(M)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return M


def norm(A) -> float:
    return float(np.linalg.norm(A))


def _identity_like(A: np.ndarray) -> np.ndarray:
    return np.eye(A.shape[0], dtype=A.dtype)


def require_invertible(A: np.ndarray, tol: Tolerances | None = None, name: str = "matrix") -> None:
    tol = resolve(tol)
    d = A.shape[0]
    scale = max(norm(A) / math.sqrt(d), 1e-300) ** d
    if abs(np.linalg.det(A)) <= tol.singularity * scale:
        raise DomainError(f"{name} is singular to tolerance {tol.singularity:g}")


def mat_exp(A) -> np.ndarray:
    """Matrix exponential by scaling and squaring.

    ``A`` is scaled by ``2**-k`` until its norm is at most 0.5, the degree-18
    Taylor polynomial is evaluated by Horner's rule, and the result is squared
    ``k`` times.  The truncation error before squaring is below ``0.5**19/19!``.
    """
    A = as_matrix(A)
    nrm = norm(A)
    k = 0 if nrm <= EXP_SCALE_TARGET else int(math.ceil(math.log2(nrm / EXP_SCALE_TARGET)))
    X = A / (2.0**k)
    I = _identity_like(X)
    E = I.copy()
    for j in range(EXP_TAYLOR_DEGREE, 0, -1):
        E = I + (X @ E) / j
    for _ in range(k):
        E = E @ E
    return E


def _sqrtm_denman_beavers(X: np.ndarray, max_iter: int = 100) -> np.ndarray:
    # Y -> X^{1/2}, Z -> X^{-1/2}; each step averages an iterate with the inverse of its partner
    Y = X
    Z = _identity_like(X)
    converged = False
    for _ in range(max_iter):
        Yi = np.linalg.inv(Y)
        Zi = np.linalg.inv(Z)
        Y_next = 0.5 * (Y + Zi)
        Z_next = 0.5 * (Z + Yi)
        change = norm(Y_next - Y)
        Y, Z = Y_next, Z_next
        if converged:
            return Y
        if change <= 1e-13 * norm(Y):
            converged = True  # one more quadratic step to reach full precision
    raise DomainError("square-root iteration did not converge")


def _is_nilpotent(N: np.ndarray) -> bool:
    d = N.shape[0]
    nN = norm(N)
    if nN == 0.0:
        return True
    Nd = np.linalg.matrix_power(N, d)
    return norm(Nd) <= 64 * d * _EPS * nN**d


def _mercator(N: np.ndarray, max_terms: int = 400) -> np.ndarray:
    """``log(I + N)`` by its power series; requires ``||N|| < 1``."""
    L = np.zeros_like(N)
    P = _identity_like(N)
    for k in range(1, max_terms + 1):
        P = P @ N
        term = P / k
        L = L + term if k % 2 == 1 else L - term
        if norm(term) <= 1e-18 * max(norm(L), 1e-300):
            return L
        if not np.any(P):
            return L
    raise DomainError("logarithm series did not converge")


def mat_log(G, tol: Tolerances | None = None) -> np.ndarray:
    """Principal matrix logarithm.

    Unipotent inputs use the terminating series of ``log(I + N)``.  Otherwise
    principal square roots are taken until ``||X - I|| < 0.5`` and the
    Mercator series is summed, then the result is rescaled by ``2**s``.

    Raises ``DomainError`` for singular inputs, spectrum on the closed negative
    real axis, or a square-root iteration that does not contract.
    """
    tol = resolve(tol)
    G = as_matrix(G)
    require_invertible(G, tol)
    I = _identity_like(G)
    N = G - I
    if norm(N) < LOG_SERIES_RADIUS:
        return _mercator(N)
    if _is_nilpotent(N):
        return _mercator(N)
    lam = np.linalg.eigvals(G)
    on_negative_axis = (np.abs(lam.imag) <= 1e-12 * np.abs(lam)) & (lam.real < 0)
    if np.any(on_negative_axis):
        raise DomainError("matrix has eigenvalues on the negative real axis; no principal logarithm")
    X = G
    s = 0
    while norm(X - I) >= LOG_SERIES_RADIUS:
        if s >= 64:
            raise DomainError("square-root preconditioning failed to contract towards the identity")
        X = _sqrtm_denman_beavers(X)
        s += 1
    L = (2.0**s) * _mercator(X - I)
    if not np.iscomplexobj(G):
        L = np.real(L)
    return L


# --- Jordan splitting -------------------------------------------------------


@dataclass(frozen=True)
class JordanSplit:
    """Multiplicative Jordan decomposition ``g = semisimple @ unipotent``."""

    semisimple: np.ndarray
    unipotent: np.ndarray
    eigenvalue_clusters: tuple[tuple[complex, int], ...]
    cluster_tolerance: float


def _cluster_eigenvalues(lam: np.ndarray, tau: float, scale: float | None = None) -> list[tuple[complex, int]]:
    # relative to max(|a|, |b|) unless an absolute scale is given
    n = len(lam)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            ref = max(abs(lam[i]), abs(lam[j])) if scale is None else scale
            if abs(lam[i] - lam[j]) <= tau * ref:
                parent[find(i)] = find(j)
    groups: dict[int, list[complex]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(complex(lam[i]))
    clusters = [(complex(np.mean(v)), len(v)) for v in groups.values()]
    clusters.sort(key=lambda c: (round(c[0].real, 12), round(c[0].imag, 12)))
    return clusters


def _semisimple_polynomial(g: np.ndarray, clusters: Sequence[tuple[complex, int]]) -> np.ndarray:
    # Hermite interpolant p with p(mu) = mu and p^(j)(mu) = 0 for 0 < j < multiplicity,
    # evaluated at g in Newton form; p(g) acts as mu on each generalized eigenspace.
    nodes: list[complex] = []
    for mu, m in clusters:
        nodes.extend([mu] * m)
    n = len(nodes)
    table = [[0j] * n for _ in range(n)]
    for i in range(n):
        table[i][0] = nodes[i]
    for j in range(1, n):
        for i in range(n - j):
            if nodes[i + j] == nodes[i]:
                table[i][j] = 0j
            else:
                table[i][j] = (table[i + 1][j - 1] - table[i][j - 1]) / (nodes[i + j] - nodes[i])
    coeffs = table[0]
    gc = g.astype(complex)
    I = np.eye(g.shape[0], dtype=complex)
    P = coeffs[n - 1] * I
    for j in range(n - 2, -1, -1):
        P = coeffs[j] * I + (gc - nodes[j] * I) @ P
    return P


def _null_basis(M: np.ndarray, dim: int) -> tuple[np.ndarray, float]:
    _, s, Vh = np.linalg.svd(M)
    basis = Vh[M.shape[0] - dim :].conj().T
    worst = float(s[M.shape[0] - dim]) if dim > 0 else 0.0
    return basis, worst


def _certify_split(
    g: np.ndarray, gs: np.ndarray, clusters: Sequence[tuple[complex, int]], tol: Tolerances
) -> tuple[bool, str, np.ndarray | None]:
    d = g.shape[0]
    scale = max(1.0, norm(gs))
    I = np.eye(d, dtype=complex)
    columns = []
    for mu, m in clusters:
        basis, worst = _null_basis(gs - mu * I, m)
        if worst > tol.unipotent * scale:
            return False, f"eigenspace for {mu:.6g} has dimension < {m}", None
        columns.append(basis)
    V = np.hstack(columns)
    cond = float(np.linalg.cond(V))
    if cond > tol.eigvec_cond:
        return False, f"eigenvector matrix condition number {cond:.3g}", None
    try:
        gu = np.linalg.solve(gs, g.astype(complex))
    except np.linalg.LinAlgError:
        return False, "semisimple part is singular", None
    N = gu - I
    nN = norm(N)
    if norm(np.linalg.matrix_power(N, d)) > tol.unipotent * max(1.0, nN) ** d:
        return False, "unipotent part is not unipotent", None
    return True, "", gu


def jordan_split(g, tol: Tolerances | None = None) -> JordanSplit:
    """Split invertible ``g`` into commuting semisimple and unipotent factors.

    Eigenvalues within relative distance ``tol.cluster`` are merged and the
    semisimple part is rebuilt from the cluster means.  When the resulting
    split is not certifiably diagonalizable (eigenspace dimensions or the
    eigenvector condition number) the clustering tolerance is raised by a
    decade, up to ``tol.cluster_max``.
    """
    tol = resolve(tol)
    g = as_matrix(g)
    require_invertible(g, tol)
    lam = np.linalg.eigvals(g)
    tau = tol.cluster
    reasons = []
    while tau <= tol.cluster_max * (1 + 1e-9):
        clusters = _cluster_eigenvalues(lam, tau)
        gs = _semisimple_polynomial(g, clusters)
        ok, why, gu = _certify_split(g, gs, clusters, tol)
        if ok:
            if not np.iscomplexobj(g):
                gs, gu = gs.real, gu.real
            return JordanSplit(gs, gu, tuple(clusters), tau)
        reasons.append(f"tau={tau:.0e}: {why}")
        tau *= 10.0
    gaps = [abs(a - b) / max(abs(a), abs(b)) for i, a in enumerate(lam) for b in lam[i + 1 :]]
    closest = min(gaps) if gaps else float("nan")
    raise IllConditionedError(
        "no clustering of the spectrum gives a certified Jordan split "
        f"(closest relative eigenvalue gap {closest:.3e}); " + "; ".join(reasons)
    )


ElementClass = Literal["semisimple", "unipotent", "mixed"]


def classify_element(g, tol: Tolerances | None = None) -> ElementClass:
    """Label ``g`` from its Jordan split.

    The identity is both semisimple and unipotent; it is reported as
    ``"unipotent"``.
    """
    tol = resolve(tol)
    split = jordan_split(g, tol)
    d = split.semisimple.shape[0]
    I = np.eye(d)
    if norm(split.semisimple - I) <= tol.identity * math.sqrt(d):
        return "unipotent"
    if norm(split.unipotent - I) <= tol.identity * math.sqrt(d):
        return "semisimple"
    return "mixed"


def is_unipotent(g, tol: Tolerances | None = None) -> bool:
    return classify_element(g, tol) == "unipotent"


# --- one-parameter groups ---------------------------------------------------


def one_param_recover(
    samples: Iterable[tuple[float, np.ndarray]],
    tol: Tolerances | None = None,
    residual_tol: float = 1e-8,
) -> np.ndarray:
    """Recover the generator ``A`` of a one-parameter group from samples ``(t, g)``.

    The sample with the smallest nonzero ``|t|`` whose logarithm exists is
    used: ``A = log(g) / t``.  Every sample is then checked against
    ``exp(t A)``; ``residual_tol`` is relative to ``max(1, ||g||)``.
    The caller must supply at least one sample inside the log domain.
    """
    tol = resolve(tol)
    pts = [(float(t), as_matrix(g)) for t, g in samples]
    if len(pts) < 2:
        raise InconsistencyError("at least two samples are required to recover a one-parameter group")
    nonzero = sorted((p for p in pts if p[0] != 0.0), key=lambda p: abs(p[0]))
    if not nonzero:
        raise InconsistencyError("all samples are at t = 0; the generator is undetermined")
    A = None
    for t, g in nonzero:
        try:
            A = mat_log(g, tol) / t
            break
        except DomainError:
            continue
    if A is None:
        raise InconsistencyError("no sample lies in the domain of the principal logarithm")
    worst = 0.0
    for t, g in pts:
        r = norm(mat_exp(t * A) - g) / max(1.0, norm(g))
        worst = max(worst, r)
    if worst > residual_tol:
        raise InconsistencyError(
            f"samples are inconsistent with a one-parameter group (max residual {worst:.3e})"
        )
    return A
