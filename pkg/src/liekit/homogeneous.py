"""Iwasawa decomposition, Haar measure in NAK coordinates, Siegel sets and reduced bases.

Lattices are given by a basis stored as the rows of a ``d x d`` matrix ``B``;
the lattice is ``Z^d B``.  Group elements act on row vectors from the right.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from liekit.config import (
    CalibrationError,
    DivergenceError,
    DomainError,
    InvalidInputError,
    ResourceError,
    Tolerances,
    UnsupportedError,
    resolve,
)

SIEGEL_S = 0.5
SIEGEL_T = 2 / math.sqrt(3)
MAX_ENUMERATION_POINTS = 5_000_000
MAX_REDUCE_DIM = 6


# --- Iwasawa -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NAKDecomposition:
    """``g = n @ diag(a) @ k`` with ``n`` unit upper triangular and ``k`` in SO(d)."""

    n: np.ndarray
    a: np.ndarray
    k: np.ndarray

    @property
    def b(self) -> np.ndarray:
        """Ratios ``a_i / a_{i-1}`` for ``i = 2..d``."""
        return self.a[..., 1:] / self.a[..., :-1]

    def matrix(self) -> np.ndarray:
        return (self.n * self.a[..., None, :]) @ self.k

    def to_json(self) -> dict:
        return {"n": self.n.tolist(), "a": self.a.tolist(), "k": self.k.tolist()}


def iwasawa(g, rescale: bool = False, tol: Tolerances | None = None) -> NAKDecomposition:
    """NAK decomposition of ``g`` (or a stack of matrices with shape ``(..., d, d)``).

    Gram-Schmidt runs from the last row upwards; this is the RQ factorization
    ``g = R k`` with ``R = n diag(a)``.  With ``rescale=True`` a matrix of
    positive determinant is first divided by ``det(g)**(1/d)``.
    """
    tol = resolve(tol)
    g = np.asarray(g, dtype=float)
    if g.ndim < 2 or g.shape[-1] != g.shape[-2]:
        raise InvalidInputError(f"expected square matrices, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise InvalidInputError("non-finite entries")
    d = g.shape[-1]
    det = np.linalg.det(g)
    if np.any(det <= 0) and not np.all(det > 0):
        raise DomainError("iwasawa needs positive determinant (singular or orientation-reversing input)")
    if rescale:
        g = g / (det ** (1.0 / d))[..., None, None]
    elif np.any(np.abs(det - 1.0) > tol.unimodular):
        raise InvalidInputError("det(g) must be 1 within 1e-9; pass rescale=True to normalize")
    rev = g[..., ::-1, :]
    q, r = np.linalg.qr(np.swapaxes(rev, -1, -2))
    # rev^T = q r  =>  g = (P r^T P) (P q^T)
    R = np.swapaxes(r, -1, -2)[..., ::-1, ::-1]
    K = np.swapaxes(q, -1, -2)[..., ::-1, :]
    signs = np.sign(np.diagonal(R, axis1=-2, axis2=-1))
    signs[signs == 0] = 1.0
    R = R * signs[..., None, :]
    K = K * signs[..., :, None]
    a = np.diagonal(R, axis1=-2, axis2=-1).copy()
    n = R / a[..., None, :]
    idx = np.arange(d)
    n[..., idx, idx] = 1.0
    n = np.triu(n)
    return NAKDecomposition(n, a, K)


def in_siegel_set(nak: NAKDecomposition, s: float = SIEGEL_S, t: float = SIEGEL_T, slack: float = 1e-9) -> bool:
    d = nak.n.shape[-1]
    off = np.abs(nak.n[np.triu_indices(d, 1)]) if nak.n.ndim == 2 else np.abs(nak.n[..., np.triu(np.ones((d, d), bool), 1)])
    return bool(np.all(off <= s + slack) and np.all(nak.b <= t + slack))


# --- Haar measure ------------------------------------------------------------


def _na_from_coords(coords: np.ndarray, d: int) -> np.ndarray:
    """NA element from ``(n_ij for i<j row-major, b_2..b_d)``."""
    iu = np.triu_indices(d, 1)
    m = len(iu[0])
    n = np.eye(d)
    n[iu] = coords[:m]
    b = coords[m:]
    loga = np.concatenate([[0.0], np.cumsum(np.log(b))])
    loga -= loga.mean()
    return n * np.exp(loga)[None, :]


def _coords_from_na(x: np.ndarray) -> np.ndarray:
    d = x.shape[0]
    a = np.diag(x).copy()
    n = x / a[None, :]
    iu = np.triu_indices(d, 1)
    return np.concatenate([n[iu], a[1:] / a[:-1]])


def _log_abs_det_translation(h: np.ndarray, x: np.ndarray, step: float) -> float:
    c0 = _coords_from_na(x)
    dim = c0.size
    d = x.shape[0]
    J = np.empty((dim, dim))
    for j in range(dim):
        e = np.zeros(dim)
        hj = step * max(1.0, abs(c0[j]))
        e[j] = hj
        plus = _coords_from_na(h @ _na_from_coords(c0 + e, d))
        minus = _coords_from_na(h @ _na_from_coords(c0 - e, d))
        J[:, j] = (plus - minus) / (2 * hj)
    return float(np.linalg.slogdet(J)[1])


class HaarFit(NamedTuple):
    exponents: tuple[int, ...]
    raw: tuple[float, ...]
    residual: float
    spread: float


def _random_na(rng: np.random.Generator, d: int) -> np.ndarray:
    m = d * (d - 1) // 2
    coords = np.concatenate([rng.uniform(-1.5, 1.5, m), np.exp(rng.uniform(-1.0, 1.0, d - 1))])
    return _na_from_coords(coords, d)


@functools.lru_cache(maxsize=None)
def fit_haar_exponents(d: int, points: int = 4, translations: int = 6, seed: int = 0, step: float = 1e-5) -> HaarFit:
    """Fit the exponents ``r_i`` of the left Haar density ``prod b_i^{r_i}`` on NA.

    Left translation by ``h`` multiplies every ``b_i`` by ``b_i(h)``, so
    invariance reads ``sum_i r_i log b_i(h) = -log|det J_h|``.  The Jacobian is
    measured by central differences at several base points; each point gives
    its own least-squares fit and ``spread`` is their largest disagreement.
    """
    if not 2 <= d <= 4:
        raise InvalidInputError("fit_haar_exponents supports 2 <= d <= 4")
    rng = np.random.default_rng(seed)
    fits = []
    for _ in range(points):
        x = _random_na(rng, d)
        rows, rhs = [], []
        for _ in range(translations):
            h = _random_na(rng, d)
            a = np.diag(h)
            rows.append(np.log(a[1:] / a[:-1]))
            rhs.append(-_log_abs_det_translation(h, x, step))
        sol, *_ = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)
        fits.append(sol)
    fits = np.array(fits)
    raw = fits.mean(axis=0)
    rounded = np.round(raw)
    residual = float(np.max(np.abs(raw - rounded)))
    spread = float(np.max(np.abs(fits - raw)))
    if residual > resolve(None).haar_fit or spread > resolve(None).haar_fit:
        raise CalibrationError(f"Haar exponents are not integral: raw {raw}, residual {residual:.3e}, spread {spread:.3e}")
    return HaarFit(tuple(int(r) for r in rounded), tuple(float(r) for r in raw), residual, spread)


# --- charts for SL2 quadrature -------------------------------------------------


@dataclass(frozen=True)
class Chart:
    """Coordinate patch on SL2: ``to_matrix(coords)`` and its inverse ``from_matrix``."""

    name: str
    to_matrix: Callable[[np.ndarray], np.ndarray]
    from_matrix: Callable[[np.ndarray], np.ndarray]
    periodic: tuple[bool, ...]


def _nak2_to(c: np.ndarray) -> np.ndarray:
    x, b, th = c[..., 0], c[..., 1], c[..., 2]
    a1, a2 = b ** -0.5, b**0.5
    cs, sn = np.cos(th), np.sin(th)
    out = np.empty(c.shape[:-1] + (2, 2))
    # u(x) diag(a1, a2) k(th) with k(th) = [[c, s], [-s, c]]
    out[..., 0, 0] = a1 * cs - x * a2 * sn
    out[..., 0, 1] = a1 * sn + x * a2 * cs
    out[..., 1, 0] = -a2 * sn
    out[..., 1, 1] = a2 * cs
    return out


def _nak2_from(g: np.ndarray) -> np.ndarray:
    p, q, r, s = g[..., 0, 0], g[..., 0, 1], g[..., 1, 0], g[..., 1, 1]
    a2sq = r * r + s * s
    x = (p * r + q * s) / a2sq
    th = np.mod(np.arctan2(-r, s), 2 * np.pi)
    return np.stack([x, a2sq, th], axis=-1)


def _abc_to(c: np.ndarray) -> np.ndarray:
    a, b, cc = c[..., 0], c[..., 1], c[..., 2]
    out = np.empty(c.shape[:-1] + (2, 2))
    out[..., 0, 0] = a
    out[..., 0, 1] = b
    out[..., 1, 0] = cc
    out[..., 1, 1] = (1 + b * cc) / a
    return out


def _abc_from(g: np.ndarray) -> np.ndarray:
    return np.stack([g[..., 0, 0], g[..., 0, 1], g[..., 1, 0]], axis=-1)


NAK2 = Chart("nak2", _nak2_to, _nak2_from, (False, False, True))
ABC = Chart("abc", _abc_to, _abc_from, (False, False, False))
CHARTS = {"nak2": NAK2, "abc": ABC}


def nak2_density(exponent: int | None = None) -> Callable[[np.ndarray], np.ndarray]:
    """``b^r dx db dtheta / (2 pi)``; K carries total mass 1."""
    r = fit_haar_exponents(2).exponents[0] if exponent is None else exponent
    return lambda c: c[..., 1] ** r / (2 * np.pi)


def abc_density(c: np.ndarray) -> np.ndarray:
    return 1.0 / c[..., 0]


def _bump(t: np.ndarray) -> np.ndarray:
    """``(1 - t^2)^4`` on ``|t| < 1``, zero outside."""
    t = np.asarray(t, dtype=float)
    return np.where(np.abs(t) < 1.0, (1.0 - t * t) ** 4, 0.0)


def nak2_test_function(g: np.ndarray) -> np.ndarray:
    """Smooth bump in the NAK coordinates ``(x, log b)`` times ``1.5 + cos(theta)``."""
    c = _nak2_from(g)
    return _bump(c[..., 0] / 1.2) * _bump(np.log(c[..., 1]) / 1.2) * (1.5 + np.cos(c[..., 2]))


def abc_test_function(g: np.ndarray) -> np.ndarray:
    """Bump around the identity in the ``(a, b, c)`` chart, zero where ``a <= 0``."""
    a = g[..., 0, 0]
    loga = np.log(np.where(a > 0, a, 1.0))
    return np.where(a > 0, _bump(loga / 0.8), 0.0) * _bump(g[..., 0, 1] / 1.2) * _bump(g[..., 1, 0] / 1.2)


DEFAULT_BOXES = {
    "nak2": ((-3.0, 3.0), (0.1, 10.0), (0.0, 2 * math.pi)),
    "abc": ((0.1, 10.0), (-3.0, 3.0), (-3.0, 3.0)),
}
TEST_FUNCTIONS = {"nak2": nak2_test_function, "abc": abc_test_function}


class InvarianceReport(NamedTuple):
    lhs: float
    rhs: float
    error_estimate: float


def _midpoint_grid(box: Sequence[tuple[float, float]], n: int) -> tuple[np.ndarray, float]:
    axes = []
    vol = 1.0
    for lo, hi in box:
        h = (hi - lo) / n
        axes.append(lo + h * (np.arange(n) + 0.5))
        vol *= h
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return mesh, vol


def _boundary_points(box: Sequence[tuple[float, float]], n: int, periodic: Sequence[bool]) -> np.ndarray:
    pts = []
    k = len(box)
    axes = [np.linspace(lo, hi, n) for lo, hi in box]
    for i in range(k):
        if periodic[i]:
            continue
        for end in box[i]:
            sub = axes.copy()
            sub[i] = np.array([end])
            pts.append(np.stack(np.meshgrid(*sub, indexing="ij"), axis=-1).reshape(-1, k))
    return np.concatenate(pts) if pts else np.empty((0, k))


def haar_invariance_check(
    chart: Chart | str,
    density: Callable[[np.ndarray], np.ndarray],
    f: Callable[[np.ndarray], np.ndarray],
    g0,
    box: Sequence[tuple[float, float]],
    resolution: int = 64,
) -> InvarianceReport:
    """Quadrature of ``int f(g0 g) dm(g)`` and ``int f(g) dm(g)`` over a coordinate box.

    ``f`` takes stacked matrices ``(..., 2, 2)``.  Both integrals use the tensor
    midpoint rule with ``resolution`` points per axis; the error estimate is the
    Richardson difference against half the resolution (midpoint rule is second
    order) plus a rounding floor.  Raises ``DomainError`` if either integrand is
    nonzero on a non-periodic face of the box.
    """
    if isinstance(chart, str):
        chart = CHARTS[chart]
    g0 = np.asarray(g0, dtype=float)
    if resolution < 4 or resolution % 2:
        raise InvalidInputError("resolution must be an even integer >= 4")
    bpts = _boundary_points(box, 33, chart.periodic)
    if bpts.size:
        G = chart.to_matrix(bpts)
        edge = max(np.max(np.abs(f(G))), np.max(np.abs(f(g0 @ G))))
        if edge > 0.0:
            raise DomainError("test function does not vanish on the boundary of the coordinate box")

    def integrate(n: int) -> tuple[float, float]:
        mesh, vol = _midpoint_grid(box, n)
        G = chart.to_matrix(mesh)
        w = density(mesh) * vol
        return float(np.sum(f(g0 @ G) * w)), float(np.sum(f(G) * w))

    lhs, rhs = integrate(resolution)
    lhs_h, rhs_h = integrate(resolution // 2)
    floor = 1e-12 * max(abs(lhs), abs(rhs), 1e-300)
    err = (abs(lhs - lhs_h) + abs(rhs - rhs_h)) / 3 + floor
    return InvarianceReport(lhs, rhs, err)


# --- Siegel volume -----------------------------------------------------------


@dataclass(frozen=True)
class SiegelParams:
    s: float = SIEGEL_S
    t: float = SIEGEL_T

    def __post_init__(self):
        if self.s < SIEGEL_S - 1e-15 or self.t < SIEGEL_T - 1e-15:
            raise InvalidInputError("Siegel parameters must satisfy s >= 1/2 and t >= 2/sqrt(3)")


class SiegelVolume(NamedTuple):
    value: float
    tail: float
    sequence: tuple[float, ...]
    exponents: tuple[int, ...]


def _b_integral(r: float, t: float, levels: int, nodes: int = 8) -> tuple[list[float], float]:
    x, w = np.polynomial.legendre.leggauss(nodes)
    partial = []
    total = 0.0
    for j in range(levels):
        hi = t / 2.0**j
        lo = hi / 2
        mid, half = (hi + lo) / 2, (hi - lo) / 2
        total += float(np.sum(w * (mid + half * x) ** r) * half)
        partial.append(total)
    cutoff = t / 2.0**levels
    tail = cutoff ** (r + 1) / (r + 1) if r > -1 else math.inf
    return partial, tail


def siegel_volume(params: SiegelParams, d: int, resolution: int = 14, exponents: Sequence[float] | None = None) -> SiegelVolume:
    """Haar volume of the Siegel set, K normalized to mass 1.

    The n-integral is the box volume ``(2s)^(d(d-1)/2)``.  Each ``b_i`` is
    integrated over the dyadic intervals ``(t 2^-(j+1), t 2^-j]``, ``j <
    resolution``, by Gauss-Legendre; the omitted piece ``(0, t 2^-resolution]``
    is reported as the tail from the power law ``b^r``.  Raises
    ``DivergenceError`` if the truncation sequence is not contracting.
    """
    if d not in (2, 3):
        raise InvalidInputError("siegel_volume supports d in {2, 3}")
    if resolution < 4:
        raise InvalidInputError("resolution must be >= 4")
    r = list(fit_haar_exponents(d).exponents if exponents is None else exponents)
    n_factor = (2 * params.s) ** (d * (d - 1) // 2)
    partials, tails = [], []
    for ri in r:
        p, tl = _b_integral(ri, params.t, resolution)
        partials.append(p)
        tails.append(tl)
    seq = [n_factor * math.prod(p[j] for p in partials) for j in range(resolution)]
    inc = np.abs(np.diff(seq))
    if len(inc) >= 3 and not (inc[-1] < 0.75 * inc[-3] or inc[-1] <= 1e-15 * abs(seq[-1])):
        raise DivergenceError(f"Siegel volume truncations are not converging: last increments {inc[-3:]}")
    value = seq[-1]
    full = [p[-1] for p in partials]
    with_tail = n_factor * math.prod(f + tl for f, tl in zip(full, tails))
    return SiegelVolume(value, with_tail - value, tuple(seq), tuple(int(x) if float(x).is_integer() else x for x in r))


# --- lattices ----------------------------------------------------------------


def as_basis(B) -> np.ndarray:
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] != B.shape[1] or B.shape[0] == 0:
        raise InvalidInputError(f"basis must be a square matrix of rows, got shape {B.shape}")
    if not np.all(np.isfinite(B)):
        raise InvalidInputError("basis has non-finite entries")
    if abs(np.linalg.det(B)) <= 1e-12 * max(1.0, np.linalg.norm(B)) ** B.shape[0]:
        raise InvalidInputError("basis rows are linearly dependent")
    return B


def covolume(B) -> float:
    return float(abs(np.linalg.det(np.asarray(B, dtype=float))))


def _lll(B: np.ndarray, delta: float = 0.75) -> np.ndarray:
    """Integer unimodular ``U`` with ``U @ B`` LLL-reduced (small dimensions only)."""
    d = B.shape[0]
    U = np.eye(d, dtype=np.int64)
    X = B.copy()

    def gso(X):
        Bs = np.zeros_like(X)
        mu = np.zeros((d, d))
        for i in range(d):
            v = X[i].copy()
            for j in range(i):
                mu[i, j] = X[i] @ Bs[j] / (Bs[j] @ Bs[j])
                v -= mu[i, j] * Bs[j]
            Bs[i] = v
        return Bs, mu

    k = 1
    Bs, mu = gso(X)
    guard = 0
    while k < d:
        guard += 1
        if guard > 10000:
            break
        for j in range(k - 1, -1, -1):
            q = int(round(mu[k, j]))
            if q:
                X[k] -= q * X[j]
                U[k] -= q * U[j]
                Bs, mu = gso(X)
        if Bs[k] @ Bs[k] >= (delta - mu[k, k - 1] ** 2) * (Bs[k - 1] @ Bs[k - 1]):
            k += 1
        else:
            X[[k, k - 1]] = X[[k - 1, k]]
            U[[k, k - 1]] = U[[k - 1, k]]
            Bs, mu = gso(X)
            k = max(k - 1, 1)
    return U


def _sign_normalize(c: Sequence[int]) -> tuple[int, ...]:
    for x in c:
        if x != 0:
            return tuple(c) if x > 0 else tuple(-y for y in c)
    return tuple(c)


def enumeration_bounds(B: np.ndarray, radius: float) -> np.ndarray:
    """``floor(radius * ||dual_i||)``: every lattice vector of norm <= radius has |c_i| within these."""
    dual = np.linalg.inv(B).T
    return np.floor(radius * np.linalg.norm(dual, axis=1) * (1 + 1e-12)).astype(np.int64)


def _enumerate(B: np.ndarray, bounds: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    sizes = 2 * bounds + 1
    total = int(np.prod(sizes))
    if total > MAX_ENUMERATION_POINTS:
        raise ResourceError(f"enumeration box has {total} points (limit {MAX_ENUMERATION_POINTS})")
    grids = np.meshgrid(*[np.arange(-b, b + 1) for b in bounds], indexing="ij")
    C = np.stack([g.reshape(-1) for g in grids], axis=1)
    V = C @ B
    return C, np.einsum("ij,ij->i", V, V)


class ShortestVector(NamedTuple):
    vector: np.ndarray
    coefficients: tuple[int, ...]
    norm: float


def shortest_vector(B, multiplier: float = 1.5, tie_tol: float = 1e-9) -> ShortestVector:
    """Nonzero lattice vector of minimal Euclidean norm, by exhaustive enumeration.

    The basis is first LLL-preconditioned (integer change of basis) so the
    coefficient box stays small; the box radius is ``multiplier`` times the
    shortest preconditioned row.  Coefficients are reported in the input basis.
    Among vectors whose norms agree within ``tie_tol`` (relative) the one with
    the lexicographically smallest sign-normalized coefficient vector wins.
    """
    B = as_basis(B)
    d = B.shape[0]
    if d > MAX_REDUCE_DIM:
        raise UnsupportedError(f"shortest_vector is exhaustive; dimension {d} > {MAX_REDUCE_DIM}")
    if multiplier < 1.0:
        raise InvalidInputError("radius multiplier must be >= 1")
    U = _lll(B)
    Bl = U.astype(float) @ B
    radius = multiplier * float(np.min(np.linalg.norm(Bl, axis=1)))
    C, sq = _enumerate(Bl, enumeration_bounds(Bl, radius))
    nz = np.any(C != 0, axis=1)
    if not np.any(nz):
        raise RuntimeError("empty enumeration box")
    best = float(np.min(sq[nz]))
    cand = np.nonzero(nz & (sq <= best * (1 + 2 * tie_tol)))[0]
    coeffs = sorted(_sign_normalize([int(x) for x in C[i] @ U]) for i in cand)
    c = coeffs[0]
    v = np.array(c, dtype=float) @ B
    return ShortestVector(v, c, float(np.linalg.norm(v)))


def _complete_unimodular(c: Sequence[int]) -> np.ndarray:
    """Integer ``W`` with ``det W = +-1`` and last row ``c`` (``c`` primitive)."""
    d = len(c)
    c = [int(x) for x in c]
    Cinv = [[int(i == j) for j in range(d)] for i in range(d)]
    # column operations on c are mirrored by inverse row operations on Cinv
    while sum(1 for x in c if x) > 1:
        p = min((i for i in range(d) if c[i]), key=lambda i: (abs(c[i]), i))
        for j in range(d):
            if j != p and c[j]:
                q = c[j] // c[p]
                c[j] -= q * c[p]
                Cinv[p] = [Cinv[p][k] + q * Cinv[j][k] for k in range(d)]
    p = next(i for i in range(d) if c[i])
    if abs(c[p]) != 1:
        raise InvalidInputError("coefficient vector is not primitive")
    last = d - 1
    if p != last:
        c[p], c[last] = c[last], c[p]
        Cinv[p], Cinv[last] = Cinv[last], Cinv[p]
    if c[last] == -1:
        Cinv[last] = [-x for x in Cinv[last]]
    return np.array(Cinv, dtype=np.int64)


def _reduce_rec(B: np.ndarray, tol: float) -> np.ndarray:
    d = B.shape[0]
    if d == 1:
        return np.ones((1, 1), dtype=np.int64)
    c = shortest_vector(B).coefficients
    W = _complete_unimodular(c)
    B1 = W.astype(float) @ B
    s = B1[-1]
    ss = float(s @ s)
    head = B1[:-1]
    proj = head - np.outer(head @ s / ss, s)
    # orthonormal coordinates on the complement of s
    Q = np.linalg.svd(s[None, :])[2][1:].T
    Usub = _reduce_rec(proj @ Q, tol)
    U = np.zeros((d, d), dtype=np.int64)
    U[:-1, :-1] = Usub
    U[-1, -1] = 1
    U = U @ W
    rows = U.astype(float) @ B
    for i in range(d - 1):
        m = float(rows[i] @ s) / ss
        if abs(m) > 0.5 + tol:
            q = int(round(m))
            U[i] -= q * U[-1]
            rows[i] -= q * rows[-1]
    return U


class ReducedBasis(NamedTuple):
    basis: np.ndarray
    U: np.ndarray


def reduce_basis(B, tol: Tolerances | None = None) -> ReducedBasis:
    """Reduced basis: shortest vector last, projected basis reduced, minimal lifts.

    Returns ``(U @ B, U)`` with ``U`` integral and ``det U = 1`` (the first row
    is negated when needed, which keeps all reduction conditions).
    """
    tol = resolve(tol)
    B = as_basis(B)
    d = B.shape[0]
    if d > MAX_REDUCE_DIM:
        raise UnsupportedError(f"reduce_basis supports dimension <= {MAX_REDUCE_DIM}")
    U = _reduce_rec(B, tol.siegel_slack)
    det = round(np.linalg.det(U.astype(float)))
    if det == -1 and d > 1:
        U[0] = -U[0]
    elif abs(det) != 1:
        raise RuntimeError(f"reduction produced a non-unimodular transform (det {det})")
    return ReducedBasis(U.astype(float) @ B, U)


def mahler_margin(family: Sequence, tol: Tolerances | None = None) -> float:
    """Smallest shortest-vector norm over a family of unimodular lattices."""
    tol = resolve(tol)
    if not family:
        raise InvalidInputError("empty family")
    margin = math.inf
    for B in family:
        B = as_basis(B)
        if abs(covolume(B) - 1.0) > tol.unimodular:
            raise InvalidInputError(f"family member has covolume {covolume(B):.12g}, not 1")
        margin = min(margin, shortest_vector(B).norm)
    return margin


def is_precompact(margin: float, delta: float) -> bool:
    return margin >= delta
