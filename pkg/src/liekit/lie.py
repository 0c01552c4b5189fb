"""Lie bracket calculus, BCH series, tangent algebras, Lie-Kolchin and Weyl averaging."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Literal, Sequence

import numpy as np

from liekit.config import (
    AccuracyError,
    IllConditionedError,
    InvalidInputError,
    SolvabilityError,
    Tolerances,
    resolve,
)
from liekit.linalg import _cluster_eigenvalues, as_matrix, mat_exp, norm
from liekit.serialize import matrix_from_json, matrix_to_json

BCH_SAFE_RADIUS = 0.5


class RankWarning(UserWarning):
    """A rank decision fell inside the ambiguous band of singular values."""


# --- bases -------------------------------------------------------------------


def _freeze(A: np.ndarray) -> np.ndarray:
    A = np.array(A, copy=True)
    A.setflags(write=False)
    return A


@dataclass(frozen=True, eq=False)
class LieBasis:
    """Ordered, linearly independent list of ``d x d`` matrices."""

    ambient_dim: int
    elements: tuple[np.ndarray, ...]
    field: Literal["real", "complex"] = "real"

    def __post_init__(self):
        d = self.ambient_dim
        els = tuple(_freeze(as_matrix(E, "basis element")) for E in self.elements)
        for E in els:
            if E.shape != (d, d):
                raise InvalidInputError(f"basis element has shape {E.shape}, expected {(d, d)}")
        if self.field not in ("real", "complex"):
            raise InvalidInputError(f"unknown field {self.field!r}")
        if self.field == "real" and any(np.iscomplexobj(E) and np.any(E.imag) for E in els):
            raise InvalidInputError("complex entries in a real-field basis")
        object.__setattr__(self, "elements", els)
        if els:
            V = _flatten(els)
            V = V / np.linalg.norm(V, axis=0, keepdims=True).clip(min=1e-300)
            s = np.linalg.svd(V, compute_uv=False)
            if s[-1] <= 1e-9 * s[0] or s[0] == 0.0:
                raise InvalidInputError("basis elements are linearly dependent")

    @classmethod
    def from_matrices(cls, mats: Iterable, field: str | None = None) -> LieBasis:
        mats = [np.asarray(M) for M in mats]
        if not mats:
            raise InvalidInputError("cannot infer the ambient dimension of an empty basis")
        if field is None:
            field = "complex" if any(np.iscomplexobj(M) for M in mats) else "real"
        return cls(mats[0].shape[0], tuple(mats), field)

    @property
    def dim(self) -> int:
        return len(self.elements)

    def to_json(self) -> dict:
        return {
            "ambientDim": self.ambient_dim,
            "field": self.field,
            "elements": [matrix_to_json(E) for E in self.elements],
        }

    @classmethod
    def from_json(cls, obj: dict) -> LieBasis:
        try:
            return cls(int(obj["ambientDim"]), tuple(matrix_from_json(E) for E in obj["elements"]), obj["field"])
        except KeyError as exc:
            raise InvalidInputError(f"LieBasis JSON missing key {exc}") from exc


def _flatten(mats: Sequence[np.ndarray]) -> np.ndarray:
    """Columns are the row-major flattenings of ``mats``."""
    return np.stack([np.asarray(M).reshape(-1) for M in mats], axis=1)


def _span_basis(mats: Sequence[np.ndarray], d: int, rel_tol: float, scale: float) -> list[np.ndarray]:
    """Orthonormal basis (Frobenius) of the span of ``mats``."""
    if not mats:
        return []
    V = _flatten(mats)
    U, s, _ = np.linalg.svd(V, full_matrices=False)
    r = int(np.sum(s > rel_tol * max(scale, 1e-300)))
    return [U[:, i].reshape(d, d) for i in range(r)]


# --- brackets and BCH ------------------------------------------------------


def bracket(X, Y) -> np.ndarray:
    X = np.asarray(X)
    Y = np.asarray(Y)
    if X.ndim != 2 or X.shape != Y.shape or X.shape[0] != X.shape[1]:
        raise InvalidInputError(f"bracket needs equal square shapes, got {X.shape} and {Y.shape}")
    return X @ Y - Y @ X


@dataclass(frozen=True)
class BCHResult:
    value: np.ndarray
    order: int
    input_scale: float


def bch_truncated(A, B, order: int) -> BCHResult:
    """Truncation of ``log(exp(A) exp(B))`` after the homogeneous terms of degree ``order``."""
    if order not in (1, 2, 3, 4):
        raise InvalidInputError(f"order must be 1..4, got {order}")
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    if A.shape != B.shape:
        raise InvalidInputError(f"shape mismatch {A.shape} vs {B.shape}")
    r = max(norm(A), norm(B))
    if r > BCH_SAFE_RADIUS:
        warnings.warn(f"BCH series used with input scale {r:.3g} > {BCH_SAFE_RADIUS}", RuntimeWarning, stacklevel=2)
    Z = A + B
    if order >= 2:
        AB = bracket(A, B)
        Z = Z + AB / 2
    if order >= 3:
        A_AB = bracket(A, AB)
        Z = Z + (A_AB - bracket(B, AB)) / 12
    if order >= 4:
        Z = Z - bracket(B, A_AB) / 24
    return BCHResult(Z, order, r)


def group_commutator_limit_check(A, B, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Return ``((e^{A/n} e^{B/n})^n, (e^{A/n} e^{B/n} e^{-A/n} e^{-B/n})^{n^2})``."""
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    if A.shape != B.shape:
        raise InvalidInputError(f"shape mismatch {A.shape} vs {B.shape}")
    eA, eB = mat_exp(A / n), mat_exp(B / n)
    product = np.linalg.matrix_power(eA @ eB, n)
    comm = eA @ eB @ mat_exp(-A / n) @ mat_exp(-B / n)
    return product, np.linalg.matrix_power(comm, n * n)


# --- tangent algebras ------------------------------------------------------


def sl_constraints(d: int) -> list[np.ndarray]:
    """Gradient of ``det`` at the identity: the trace functional."""
    return [np.eye(d)]


def orthogonal_constraints(d: int) -> list[np.ndarray]:
    """Gradients at the identity of the entries of ``g^T g - I`` (upper triangle)."""
    out = []
    for i in range(d):
        for j in range(i, d):
            F = np.zeros((d, d))
            F[i, j] += 1.0
            F[j, i] += 1.0
            out.append(F)
    return out


def tangent_algebra(constraints: Sequence, dim: int | None = None, tol: Tolerances | None = None) -> LieBasis:
    """Null space of the linear functionals ``X -> sum(F * X)``.

    ``dim`` is needed only for an empty constraint list.  Exactly dependent
    constraints are fine; a singular value inside the ambiguous band
    ``(span, 1e3 * span]`` relative to the largest raises a ``RankWarning``.
    """
    tol = resolve(tol)
    Fs = [np.asarray(F) for F in constraints]
    if not Fs:
        if dim is None or dim < 1:
            raise InvalidInputError("dim is required when no constraints are given")
        d = dim
        basis = []
        for i in range(d):
            for j in range(d):
                E = np.zeros((d, d))
                E[i, j] = 1.0
                basis.append(E)
        return LieBasis(d, tuple(basis), "real")
    d = Fs[0].shape[0]
    if dim is not None and dim != d:
        raise InvalidInputError(f"dim={dim} disagrees with constraint shape {Fs[0].shape}")
    for F in Fs:
        if F.shape != (d, d):
            raise InvalidInputError("all constraints must be d x d")
    C = np.stack([F.reshape(-1) for F in Fs])
    _, s, Vh = np.linalg.svd(C)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > tol.span * smax))
    band = (s > tol.span * smax) & (s <= 1e3 * tol.span * smax)
    if np.any(band):
        warnings.warn("constraint functionals are nearly dependent; rank decision is ambiguous", RankWarning, stacklevel=2)
    null = Vh[rank:].conj()
    field = "complex" if np.iscomplexobj(C) else "real"
    return LieBasis(d, tuple(row.reshape(d, d) for row in null), field)


# --- closure and derived series ----------------------------------------------


@dataclass(frozen=True)
class ClosureResult:
    closed: bool
    structure_constants: np.ndarray | None  # c[i, j, k]: [X_i, X_j] = sum_k c[i,j,k] X_k
    witness: tuple[int, int] | None
    residual: float


def closure_check(basis: LieBasis, tol: Tolerances | None = None) -> ClosureResult:
    tol = resolve(tol)
    n = basis.dim
    if n == 0:
        return ClosureResult(True, np.zeros((0, 0, 0)), None, 0.0)
    V = _flatten(basis.elements)
    dtype = complex if np.iscomplexobj(V) else float
    c = np.zeros((n, n, n), dtype=dtype)
    worst = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            Xi, Xj = basis.elements[i], basis.elements[j]
            br = bracket(Xi, Xj).reshape(-1)
            coef, *_ = np.linalg.lstsq(V, br, rcond=None)
            res = float(np.linalg.norm(V @ coef - br)) / max(1.0, norm(Xi) * norm(Xj))
            worst = max(worst, res)
            if res > tol.span:
                return ClosureResult(False, None, (i, j), res)
            c[i, j] = coef
            c[j, i] = -coef
    return ClosureResult(True, c, None, worst)


def derived_algebra(mats: Sequence[np.ndarray], tol: Tolerances | None = None) -> list[np.ndarray]:
    """Orthonormal basis of the span of all pairwise brackets."""
    tol = resolve(tol)
    mats = [np.asarray(M) for M in mats]
    if not mats:
        return []
    d = mats[0].shape[0]
    brs = [bracket(mats[i], mats[j]) for i in range(len(mats)) for j in range(i + 1, len(mats))]
    scale = max(norm(M) for M in mats) ** 2
    return _span_basis(brs, d, tol.span, scale)


def derived_series(basis: LieBasis, tol: Tolerances | None = None) -> list[int]:
    """Dimensions of the derived series, stopping at 0 or when the dimension stabilizes."""
    dims = [basis.dim]
    current = [np.asarray(E) for E in basis.elements]
    d = basis.ambient_dim
    if current:
        current = _span_basis(current, d, tol.span if tol else resolve(tol).span, max(norm(E) for E in current))
    while dims[-1] > 0:
        current = derived_algebra(current, tol)
        dims.append(len(current))
        if dims[-1] == dims[-2]:
            break
    return dims


def lie_closure(mats: Sequence[np.ndarray], tol: Tolerances | None = None, max_rounds: int = 64) -> list[np.ndarray]:
    """Orthonormal basis of the Lie subalgebra generated by ``mats``."""
    tol = resolve(tol)
    mats = [np.asarray(M) for M in mats]
    if not mats:
        return []
    d = mats[0].shape[0]
    scale = max(norm(M) for M in mats)
    if scale == 0.0:
        return []
    span = _span_basis(mats, d, tol.span, scale)
    for _ in range(max_rounds):
        brs = [bracket(span[i], span[j]) for i in range(len(span)) for j in range(i + 1, len(span))]
        grown = _span_basis(span + brs, d, tol.span, 1.0)
        if len(grown) == len(span):
            return span
        span = grown
    raise IllConditionedError("Lie closure did not stabilize")


# --- Lie-Kolchin -------------------------------------------------------------


def _orth_complement_pick(D: list[np.ndarray], G: list[np.ndarray]) -> list[np.ndarray]:
    """Extend orthonormal ``D`` by elements of ``G``, always taking the largest residual."""
    chosen = [M.reshape(-1) for M in D]
    picks = []
    remaining = [M.reshape(-1) for M in G]
    target = len(G)
    while len(chosen) < target:
        best, best_r, best_i = None, -1.0, -1
        for idx, v in enumerate(remaining):
            r = v.copy()
            for q in chosen:
                r = r - np.vdot(q, r) * q
            rn = float(np.linalg.norm(r))
            if rn > best_r:
                best, best_r, best_i = r, rn, idx
        if best_r <= 1e-12:
            break
        chosen.append(best / best_r)
        picks.append(remaining.pop(best_i))
    d = G[0].shape[0]
    return [p.reshape(d, d) for p in picks]


def _eigvec_residual(M: np.ndarray, v: np.ndarray) -> float:
    lam = np.vdot(v, M @ v)
    return float(np.linalg.norm(M @ v - lam * v)) / max(1.0, norm(M))


def _null_space(S: np.ndarray, thresh: float) -> np.ndarray:
    _, s, Vh = np.linalg.svd(S)
    m = Vh.shape[0]
    s_full = np.zeros(m)
    s_full[: s.size] = s
    return Vh[s_full <= thresh].conj().T


def _eigenspace_in(X: np.ndarray, Q: np.ndarray, null_tol: float) -> np.ndarray:
    """An eigenspace of ``X`` restricted to the invariant subspace spanned by ``Q``.

    Eigenvalues are tried as cluster means from coarse to fine clustering, so a
    defective block is handled through the accurate mean of its scattered
    eigenvalues while close but distinct eigenvalues are separated at a finer
    level.
    """
    XW = Q.conj().T @ X @ Q
    k = XW.shape[0]
    lam = np.linalg.eigvals(XW)
    scale = max(1.0, norm(XW))
    for tau in (1e-3, 1e-5, 1e-7, 1e-9, 0.0):
        for mu, _ in _cluster_eigenvalues(lam, tau, scale):
            N = _null_space(XW - mu * np.eye(k), null_tol * scale)
            if N.shape[1] > 0:
                return Q @ N
    raise IllConditionedError("no eigenvalue of the restricted element has a numerical eigenvector")


def _common_eigenvector(mats: list[np.ndarray], m: int, tol: Tolerances) -> np.ndarray:
    """Common eigenvector of a solvable algebra given by an orthonormal basis ``mats``.

    The chain of codimension-one ideals ``g1 = h_r < ... < h_1 < h_0 = g`` is built
    by extending a basis of the derived algebra ``g1`` one element at a time
    (largest Gram-Schmidt residual first).  Every weight vanishes on ``g1``, so
    the common kernel of ``g1`` is the starting weight space; it is invariant
    under ``g`` because ``g1`` is an ideal.  Each step up the chain restricts the
    newly added element to the current weight space and keeps one of its
    eigenspaces, which is again invariant under the elements still to come.
    """
    if m == 1 or not mats:
        v = np.zeros(m, dtype=complex)
        v[0] = 1.0
        return v
    null_tol = 1e-9
    D = derived_algebra(mats, tol)
    if D:
        W = _null_space(np.vstack(D), null_tol)
        if W.shape[1] == 0:
            raise IllConditionedError("derived algebra has no common null vector")
    else:
        W = np.eye(m, dtype=complex)
    for X in _orth_complement_pick(D, mats):
        W = _eigenspace_in(X, W, null_tol)
    v = W[:, 0]
    v = v / np.linalg.norm(v)
    worst = max(_eigvec_residual(M, v) for M in mats)
    if worst > tol.triangular:
        raise IllConditionedError(f"common eigenvector search degenerated (residual {worst:.3e})")
    return v


def _flag(mats: list[np.ndarray], m: int, tol: Tolerances) -> np.ndarray:
    if m == 1:
        return np.ones((1, 1), dtype=complex)
    v = _common_eigenvector(mats, m, tol)
    # orthonormal complement of v
    full = np.linalg.qr(np.column_stack([v, np.eye(m, dtype=complex)]))[0]
    Qc = full[:, 1:m]
    reduced = [Qc.conj().T @ M @ Qc for M in mats]
    nz = [M for M in reduced if norm(M) > 0]
    reduced = _span_basis(nz, m - 1, tol.span, 1.0) if nz else []
    U_sub = _flag(reduced, m - 1, tol)
    return np.column_stack([v, Qc @ U_sub])


def lie_kolchin_triangularize(basis: LieBasis | Sequence, tol: Tolerances | None = None) -> np.ndarray:
    """Unitary ``g`` with ``g X g^{-1}`` upper triangular for every ``X`` in the generated algebra.

    Raises ``SolvabilityError`` when the Lie algebra generated by ``basis`` is
    not solvable.
    """
    tol = resolve(tol)
    mats = list(basis.elements) if isinstance(basis, LieBasis) else [as_matrix(M) for M in basis]
    if not mats:
        raise InvalidInputError("empty basis")
    m = mats[0].shape[0]
    gen = [np.asarray(M, dtype=complex) for M in mats]
    closure = lie_closure(gen, tol)
    if closure:
        dims = derived_series(LieBasis(m, tuple(closure), "complex"), tol)
        if dims[-1] != 0:
            raise SolvabilityError(f"generated Lie algebra is not solvable (derived series {dims})")
    U = _flag(closure, m, tol)
    g = U.conj().T
    for M in gen:
        T = g @ M @ U
        lower = float(np.max(np.abs(np.tril(T, -1)))) if m > 1 else 0.0
        if lower > tol.triangular * max(1.0, norm(M)):
            raise IllConditionedError(f"triangularization residual {lower:.3e} exceeds tolerance")
    return g


def subdiagonal_residual(g: np.ndarray, X) -> float:
    T = g @ np.asarray(X) @ np.linalg.inv(g)
    return float(np.max(np.abs(np.tril(T, -1)))) if T.shape[0] > 1 else 0.0


# --- invariant forms ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HermitianForm:
    dim: int
    gram: np.ndarray

    def __post_init__(self):
        G = np.asarray(self.gram, dtype=complex)
        if G.shape != (self.dim, self.dim):
            raise InvalidInputError("gram shape does not match dim")
        if norm(G - G.conj().T) > 1e-10 * max(1.0, norm(G)):
            raise InvalidInputError("gram matrix is not Hermitian")
        G = (G + G.conj().T) / 2
        G.setflags(write=False)
        object.__setattr__(self, "gram", G)

    def inner(self, v1, v2) -> complex:
        return complex(np.vdot(np.asarray(v1), self.gram @ np.asarray(v2)))


def so2_quadrature(n: int) -> list[tuple[float, np.ndarray]]:
    """``n`` equally spaced rotations with weights ``1/n``; exact for trigonometric degree < n."""
    if n < 1:
        raise InvalidInputError("need at least one node")
    out = []
    for j in range(n):
        th = 2 * math.pi * j / n
        c, s = math.cos(th), math.sin(th)
        out.append((1.0 / n, np.array([[c, -s], [s, c]])))
    return out


def invariant_hermitian_form(
    quadrature: Sequence[tuple[float, np.ndarray]],
    rep: Callable[[np.ndarray], np.ndarray],
    tol: Tolerances | None = None,
) -> HermitianForm:
    """Average ``rho(g^{-1})^* rho(g^{-1})`` over the quadrature nodes."""
    tol = resolve(tol)
    if not quadrature:
        raise InvalidInputError("empty quadrature")
    weights = np.array([w for w, _ in quadrature], dtype=float)
    if np.any(weights <= 0):
        raise InvalidInputError("quadrature weights must be positive")
    if abs(weights.sum() - 1.0) > 1e-12:
        raise InvalidInputError(f"quadrature weights sum to {weights.sum():.15g}, not 1")
    gram = None
    for w, g in quadrature:
        R = np.asarray(rep(np.linalg.inv(as_matrix(g))), dtype=complex)
        term = w * (R.conj().T @ R)
        gram = term if gram is None else gram + term
    gram = (gram + gram.conj().T) / 2
    lo = float(np.linalg.eigvalsh(gram)[0])
    if lo <= 0:
        raise AccuracyError(f"averaged form is not positive definite (smallest eigenvalue {lo:.3e})")
    return HermitianForm(gram.shape[0], gram)


def invariant_complement(form: HermitianForm, subspace: Sequence, tol: Tolerances | None = None) -> list[np.ndarray]:
    """Basis of ``{v : <w, v> = 0 for all w in subspace}`` for the given form."""
    tol = resolve(tol)
    N = form.dim
    if len(subspace) == 0:
        return [np.eye(N, dtype=complex)[:, i] for i in range(N)]
    W = np.column_stack([np.asarray(w, dtype=complex) for w in subspace])
    if W.shape[0] != N:
        raise InvalidInputError("subspace vectors have the wrong length")
    s_w = np.linalg.svd(W, compute_uv=False)
    if s_w[-1] <= tol.span * s_w[0]:
        raise InvalidInputError("subspace vectors are dependent")
    C = W.conj().T @ form.gram
    _, s, Vh = np.linalg.svd(C)
    rank = int(np.sum(s > tol.span * s[0]))
    return [Vh[i].conj() for i in range(rank, N)]
