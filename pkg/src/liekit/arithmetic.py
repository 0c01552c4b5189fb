"""Rational quadratic forms, quaternion lattices in SL2(R) and congruence filters.

Everything that decides membership or equality is exact: ``fractions.Fraction``
for rationals, Python/NumPy integers for lattice points, and ``QSqrt`` pairs
``p + q sqrt(a)`` for the quadratic field.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

import numpy as np
import sympy
from scipy.spatial.distance import pdist

from liekit.config import InconsistencyError, InvalidInputError
from liekit.lie import LieBasis


class DegenerateFieldWarning(UserWarning):
    """``a`` is a perfect square, so ``Q(sqrt a) = Q`` and the algebra splits."""


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, sympy.Rational):
        return Fraction(int(x.p), int(x.q))
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float) and x.is_integer():
        return Fraction(int(x))
    raise InvalidInputError(f"expected an exact rational, got {x!r}")


# --- quadratic forms ---------------------------------------------------------


@dataclass(frozen=True)
class QuadraticForm:
    """``Q(x) = x M x^T`` with ``M`` symmetric and rational."""

    gram: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        M = tuple(tuple(_frac(v) for v in row) for row in self.gram)
        d = len(M)
        if d == 0 or any(len(row) != d for row in M):
            raise InvalidInputError("Gram matrix must be square and nonempty")
        if any(M[i][j] != M[j][i] for i in range(d) for j in range(d)):
            raise InvalidInputError("Gram matrix must be symmetric")
        object.__setattr__(self, "gram", M)
        if self.determinant() == 0:
            raise InvalidInputError("quadratic form is degenerate")

    @classmethod
    def diagonal(cls, coeffs: Sequence) -> QuadraticForm:
        d = len(coeffs)
        return cls(tuple(tuple(_frac(coeffs[i]) if i == j else Fraction(0) for j in range(d)) for i in range(d)))

    @classmethod
    def from_polynomial(cls, expr: str | sympy.Expr, variables: Sequence[str] | None = None) -> QuadraticForm:
        """Parse a homogeneous quadratic polynomial such as ``"x1**2 + x2**2 - 3*x3**2"``."""
        e = sympy.sympify(expr) if isinstance(expr, str) else expr
        syms = sorted(e.free_symbols, key=lambda s: sympy.default_sort_key(s)) if variables is None else [sympy.Symbol(v) for v in variables]
        poly = sympy.Poly(e, *syms)
        if not poly.is_homogeneous or poly.total_degree() != 2:
            raise InvalidInputError("expected a homogeneous quadratic polynomial")
        d = len(syms)
        M = [[Fraction(0)] * d for _ in range(d)]
        for monom, coeff in poly.terms():
            c = _frac(sympy.Rational(coeff))
            idx = [i for i, p in enumerate(monom) for _ in range(p)]
            i, j = idx
            if i == j:
                M[i][i] += c
            else:
                M[i][j] += c / 2
                M[j][i] += c / 2
        return cls(tuple(tuple(r) for r in M))

    @property
    def dim(self) -> int:
        return len(self.gram)

    def determinant(self) -> Fraction:
        return _frac(sympy.Matrix(self.gram).det())

    def value(self, v: Sequence) -> Fraction:
        v = [_frac(x) for x in v]
        return sum((self.gram[i][j] * v[i] * v[j] for i in range(self.dim) for j in range(self.dim)), Fraction(0))

    def integer_gram(self) -> np.ndarray:
        """Smallest positive integer multiple of the Gram matrix with integer entries."""
        den = math.lcm(*(x.denominator for row in self.gram for x in row))
        return np.array([[int(x * den) for x in row] for row in self.gram], dtype=object)

    def float_gram(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.gram])

    def to_json(self) -> dict:
        return {"gram": [[str(x) for x in row] for row in self.gram]}


def so_q_algebra(Q: QuadraticForm) -> LieBasis:
    """Basis of ``{X : X M + M X^T = 0}``, solved exactly over Q.

    Each basis matrix is scaled to coprime integer entries before conversion to
    floating point.
    """
    d = Q.dim
    M = sympy.Matrix(Q.gram)
    rows = []
    for p in range(d):
        for q in range(d):
            coeff = [sympy.Integer(0)] * (d * d)
            for r in range(d):
                coeff[p * d + r] += M[r, q]
                coeff[q * d + r] += M[p, r]
            rows.append(coeff)
    null = sympy.Matrix(rows).nullspace()
    mats = []
    for vec in null:
        den = sympy.ilcm(*[sympy.Rational(x).q for x in vec])
        ints = [int(x * den) for x in vec]
        g = math.gcd(*ints)
        mats.append(np.array(ints, dtype=float).reshape(d, d) / g)
    if len(mats) != d * (d - 1) // 2:
        raise InconsistencyError(f"so(Q) has dimension {len(mats)}, expected {d * (d - 1) // 2}")
    return LieBasis.from_matrices(mats, field="real")


class IsotropicResult(NamedTuple):
    vector: tuple[int, ...] | None
    height: int

    @property
    def found(self) -> bool:
        return self.vector is not None


def _canonical(v: Sequence[int]) -> tuple[int, ...]:
    for x in v:
        if x:
            return tuple(int(y) for y in v) if x > 0 else tuple(-int(y) for y in v)
    return tuple(int(y) for y in v)


def isotropic_search(Q: QuadraticForm | Sequence[Sequence], H: int) -> IsotropicResult:
    """Nonzero integer ``v`` with ``max|v_i| <= H`` and ``Q(v) = 0``, or ``None``.

    ``None`` means no solution of height at most ``H``; it is not a proof of
    anisotropy.  Among solutions the smallest height wins, then the
    lexicographically smallest sign-normalized vector.
    """
    if not isinstance(Q, QuadraticForm):
        Q = QuadraticForm(Q)
    if not isinstance(H, (int, np.integer)) or H < 1:
        raise InvalidInputError("search height must be an integer >= 1")
    if Q.dim > 4:
        raise InvalidInputError("isotropic_search supports at most 4 variables")
    N = Q.integer_gram()
    bound = max(abs(int(x)) for x in N.ravel()) * (Q.dim * H) ** 2
    if bound >= 2**62:
        raise InvalidInputError("coefficients too large for exact int64 search")
    N = N.astype(np.int64)
    d = Q.dim
    r = np.arange(-H, H + 1, dtype=np.int64)
    best = None
    if d == 1:
        return IsotropicResult(None, int(H))
    rest = np.stack([g.ravel() for g in np.meshgrid(*([r] * (d - 1)), indexing="ij")], axis=1)
    rest_q = np.einsum("ni,ij,nj->n", rest, N[1:, 1:], rest)
    cross = 2 * rest @ N[0, 1:]
    for x0 in range(0, H + 1):
        vals = N[0, 0] * x0 * x0 + x0 * cross + rest_q
        hits = np.nonzero(vals == 0)[0]
        for h in hits:
            v = (x0, *rest[h].tolist())
            if not any(v):
                continue
            cand = _canonical(v)
            key = (max(abs(c) for c in cand), cand)
            if best is None or key < best:
                best = key
    if best is None:
        return IsotropicResult(None, int(H))
    v = best[1]
    if Q.value(v) != 0:
        raise InconsistencyError("vectorized search disagrees with exact evaluation")
    return IsotropicResult(v, int(H))


# --- the quadratic field Q(sqrt a) ---------------------------------------------


@dataclass(frozen=True)
class QSqrt:
    """Exact ``p + q sqrt(a)`` with rational ``p``, ``q``."""

    p: Fraction
    q: Fraction
    a: int

    def __post_init__(self):
        object.__setattr__(self, "p", _frac(self.p))
        object.__setattr__(self, "q", _frac(self.q))

    def _lift(self, other) -> QSqrt:
        if isinstance(other, QSqrt):
            if other.a != self.a:
                raise InvalidInputError("mixing elements of different quadratic fields")
            return other
        return QSqrt(_frac(other), Fraction(0), self.a)

    def __add__(self, other):
        o = self._lift(other)
        return QSqrt(self.p + o.p, self.q + o.q, self.a)

    __radd__ = __add__

    def __neg__(self):
        return QSqrt(-self.p, -self.q, self.a)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        o = self._lift(other)
        return QSqrt(self.p * o.p + self.a * self.q * o.q, self.p * o.q + self.q * o.p, self.a)

    __rmul__ = __mul__

    def __eq__(self, other):
        try:
            o = self._lift(other)
        except InvalidInputError:
            return NotImplemented
        return self.p == o.p and self.q == o.q

    def __hash__(self):
        return hash((self.p, self.q, self.a))

    def is_rational(self) -> bool:
        return self.q == 0

    def __float__(self) -> float:
        return float(self.p) + float(self.q) * math.sqrt(self.a)

    def __repr__(self) -> str:
        return f"QSqrt({self.p} + {self.q}*sqrt({self.a}))"


@dataclass(frozen=True)
class QMatrix2:
    """2x2 matrix over ``Q(sqrt a)``; entries in row-major order."""

    entries: tuple[QSqrt, QSqrt, QSqrt, QSqrt]

    @property
    def a(self) -> int:
        return self.entries[0].a

    def __mul__(self, other: QMatrix2) -> QMatrix2:
        p, q, r, s = self.entries
        e, f, g, h = other.entries
        return QMatrix2((p * e + q * g, p * f + q * h, r * e + s * g, r * f + s * h))

    def __add__(self, other: QMatrix2) -> QMatrix2:
        return QMatrix2(tuple(x + y for x, y in zip(self.entries, other.entries)))

    def scale(self, c) -> QMatrix2:
        return QMatrix2(tuple(x * c for x in self.entries))

    def det(self) -> QSqrt:
        p, q, r, s = self.entries
        return p * s - q * r

    @classmethod
    def scalar(cls, c, a: int) -> QMatrix2:
        z = QSqrt(0, 0, a)
        c = QSqrt(_frac(c), 0, a)
        return cls((c, z, z, c))

    def is_scalar(self, c) -> bool:
        return self == QMatrix2.scalar(c, self.a)

    def to_float(self) -> np.ndarray:
        return np.array([float(x) for x in self.entries]).reshape(2, 2)


def _is_square(n: int) -> bool:
    return n >= 0 and math.isqrt(n) ** 2 == n


def quaternion_basis(a: int, b: int) -> tuple[QMatrix2, QMatrix2, QMatrix2]:
    """``i = diag(sqrt a, -sqrt a)``, ``j = [[0, 1], [b, 0]]``, ``k = i j``."""
    if not all(isinstance(v, (int, np.integer)) and v > 0 for v in (a, b)):
        raise InvalidInputError("a and b must be positive integers")
    a, b = int(a), int(b)
    if _is_square(a):
        warnings.warn(f"a = {a} is a perfect square; Q(sqrt a) = Q and the algebra splits", DegenerateFieldWarning, stacklevel=2)
    z, one, r = QSqrt(0, 0, a), QSqrt(1, 0, a), QSqrt(0, 1, a)
    i = QMatrix2((r, z, z, -r))
    j = QMatrix2((z, one, one * b, z))
    k = QMatrix2((z, r, r * (-b), z))
    return i, j, k


@dataclass(frozen=True)
class QuatElement:
    """``w I + x i + y j + z k`` with integer coordinates."""

    w: int
    x: int
    y: int
    z: int
    a: int
    b: int

    @property
    def coords(self) -> tuple[int, int, int, int]:
        return (self.w, self.x, self.y, self.z)

    def norm(self) -> int:
        a, b = self.a, self.b
        return self.w**2 - a * self.x**2 - b * self.y**2 + a * b * self.z**2

    @property
    def height(self) -> int:
        return max(abs(c) for c in self.coords)

    def matrix(self) -> QMatrix2:
        i, j, k = quaternion_basis(self.a, self.b)
        return QMatrix2.scalar(self.w, self.a) + i.scale(self.x) + j.scale(self.y) + k.scale(self.z)

    def real_matrix(self) -> np.ndarray:
        s = math.sqrt(self.a)
        w, x, y, z, b = self.w, self.x, self.y, self.z, self.b
        return np.array([[w + x * s, y + z * s], [b * y - b * z * s, w - x * s]])

    def __mul__(self, other: QuatElement) -> QuatElement:
        if (self.a, self.b) != (other.a, other.b):
            raise InvalidInputError("quaternions from different algebras")
        a, b = self.a, self.b
        w1, x1, y1, z1 = self.coords
        w2, x2, y2, z2 = other.coords
        return QuatElement(
            w1 * w2 + a * x1 * x2 + b * y1 * y2 - a * b * z1 * z2,
            w1 * x2 + x1 * w2 - b * y1 * z2 + b * z1 * y2,
            w1 * y2 + y1 * w2 + a * x1 * z2 - a * z1 * x2,
            w1 * z2 + z1 * w2 + x1 * y2 - y1 * x2,
            a,
            b,
        )

    def to_json(self) -> dict:
        return {"coords": list(self.coords), "matrix": self.real_matrix().tolist()}


def quaternion_lattice_elements(a: int, b: int, H: int) -> list[QuatElement]:
    """All ``(w,x,y,z)`` of height ``<= H`` with norm form equal to 1, sorted lexicographically."""
    quaternion_basis(a, b)
    if not isinstance(H, (int, np.integer)) or H < 0:
        raise InvalidInputError("height must be a non-negative integer")
    a, b, H = int(a), int(b), int(H)
    if a * b * 4 * (H + 1) ** 2 >= 2**62:
        raise InvalidInputError("parameters too large for exact int64 enumeration")
    r = np.arange(-H, H + 1, dtype=np.int64)
    W, X, Y, Z = np.meshgrid(r, r, r, r, indexing="ij")
    nf = W * W - a * X * X - b * Y * Y + a * b * Z * Z
    idx = np.argwhere(nf == 1)
    # argwhere walks the grid in C order, which is lexicographic in (w, x, y, z)
    return [QuatElement(*(int(v) - H for v in row), a, b) for row in idx]


def discreteness_margin(elements: Sequence) -> float:
    """Smallest Frobenius distance between distinct real embeddings."""
    mats = [e.real_matrix() if isinstance(e, QuatElement) else np.asarray(e, dtype=float) for e in elements]
    if len(mats) < 2:
        raise InvalidInputError("need at least two elements")
    if any(isinstance(e, QuatElement) for e in elements):
        coords = [e.coords for e in elements if isinstance(e, QuatElement)]
        if len(set(coords)) != len(coords):
            raise InconsistencyError("duplicate lattice elements")
    dist = pdist(np.stack([m.ravel() for m in mats]))
    margin = float(dist.min())
    if margin == 0.0:
        raise InconsistencyError("duplicate lattice elements")
    return margin


def _integral_matrix(g) -> np.ndarray:
    g = np.asarray(g)
    if g.dtype.kind in "iu":
        return g.astype(object)
    if g.dtype == object and all(isinstance(v, (int, np.integer)) for v in g.ravel()):
        return g
    if g.dtype.kind == "f" and np.all(g == np.round(g)):
        return np.round(g).astype(np.int64).astype(object)
    raise InvalidInputError("congruence_filter needs integral coordinates")


def congruence_filter(elements: Iterable, m: int) -> list:
    """Elements congruent to the identity mod ``m``.

    Quaternions are tested on their coordinates ``(w,x,y,z) = (1,0,0,0) mod m``;
    integer matrices entrywise against ``I``.
    """
    if not isinstance(m, (int, np.integer)) or m < 2:
        raise InvalidInputError("congruence level m must be an integer >= 2")
    out = []
    for e in elements:
        if isinstance(e, QuatElement):
            w, x, y, z = e.coords
            if (w - 1) % m == 0 and x % m == 0 and y % m == 0 and z % m == 0:
                out.append(e)
        else:
            g = _integral_matrix(e)
            diff = g - np.eye(g.shape[0], dtype=np.int64).astype(object)
            if all(int(v) % m == 0 for v in diff.ravel()):
                out.append(e)
    return out
