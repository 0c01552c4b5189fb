"""Upper half-plane geometry and triangle-group tilings.

Points are stored as ``HPoint`` but most internals work with Python complex
numbers.  A ``Motion`` is ``z -> T_m(s(z))`` where ``s`` is either the identity
or the reflection ``z -> -conj(z)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate, optimize

from liekit.config import InvalidInputError, ResourceError, Tolerances, resolve

_D = np.diag([1.0, -1.0])


@dataclass(frozen=True)
class HPoint:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)) or self.y <= 1e-14:
            raise InvalidInputError(f"point ({self.x}, {self.y}) is not in the upper half plane")

    @classmethod
    def of(cls, z: complex) -> HPoint:
        return cls(float(z.real), float(z.imag))

    @property
    def z(self) -> complex:
        return complex(self.x, self.y)


def _as_complex(z) -> complex:
    return z.z if isinstance(z, HPoint) else complex(z)


def _normalize(m: np.ndarray) -> np.ndarray:
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    return m / math.sqrt(det)


@dataclass(frozen=True, eq=False)
class Motion:
    """Isometry ``z -> T_m(z)`` (or ``T_m(-conj z)`` when ``reflect_first``)."""

    m: np.ndarray
    reflect_first: bool = False

    def __post_init__(self):
        m = np.array(self.m, dtype=float)
        if m.shape != (2, 2):
            raise InvalidInputError("motion matrix must be 2x2")
        if abs(np.linalg.det(m) - 1.0) > 1e-12:
            raise InvalidInputError(f"motion matrix has det {np.linalg.det(m)!r}, expected 1")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    @classmethod
    def identity(cls) -> Motion:
        return cls(np.eye(2))

    def __call__(self, z):
        w = _as_complex(z)
        if self.reflect_first:
            w = -w.conjugate()
        (a, b), (c, d) = self.m
        out = (a * w + b) / (c * w + d)
        return HPoint.of(out) if isinstance(z, HPoint) else out

    def compose(self, other: Motion) -> Motion:
        """``self o other``."""
        m2 = _D @ other.m @ _D if self.reflect_first else other.m
        return Motion(_normalize(self.m @ m2), self.reflect_first != other.reflect_first)

    __matmul__ = compose

    def inverse(self) -> Motion:
        (a, b), (c, d) = self.m
        inv = np.array([[d, -b], [-c, a]])
        if self.reflect_first:
            inv = _D @ inv @ _D
        return Motion(inv, self.reflect_first)

    def equals(self, other: Motion, tol: float = 1e-9) -> bool:
        if self.reflect_first != other.reflect_first:
            return False
        return bool(min(np.max(np.abs(self.m - other.m)), np.max(np.abs(self.m + other.m))) <= tol)


def moebius_apply(g, z):
    """Apply a ``Motion`` or an SL2 matrix to a point."""
    if not isinstance(g, Motion):
        g = Motion(g)
    return g(z)


def u(x: float) -> np.ndarray:
    return np.array([[1.0, x], [0.0, 1.0]])


def a(y: float) -> np.ndarray:
    return np.diag([math.sqrt(y), 1 / math.sqrt(y)])


# --- geodesics ---------------------------------------------------------------


@dataclass(frozen=True)
class Geodesic:
    kind: str
    c: float
    radius: float | None = None

    def __post_init__(self):
        if self.kind not in ("vertical", "semicircle"):
            raise InvalidInputError(f"unknown geodesic kind {self.kind!r}")
        if self.kind == "semicircle" and not (self.radius and self.radius > 0):
            raise InvalidInputError("semicircle radius must be positive")

    @classmethod
    def vertical(cls, c: float) -> Geodesic:
        return cls("vertical", float(c))

    @classmethod
    def semicircle(cls, center: float, radius: float) -> Geodesic:
        return cls("semicircle", float(center), float(radius))

    def residual(self, z) -> float:
        """How far ``z`` is from lying on the curve (0 on the curve)."""
        w = _as_complex(z)
        if self.kind == "vertical":
            return abs(w.real - self.c)
        return abs(abs(w - self.c) - self.radius)

    def to_json(self) -> dict:
        if self.kind == "vertical":
            return {"kind": "vertical", "c": self.c}
        return {"kind": "semicircle", "center": self.c, "radius": self.radius}


def geodesic_through(z1, z2) -> Geodesic:
    w1, w2 = _as_complex(z1), _as_complex(z2)
    if abs(w1 - w2) <= 1e-14 * max(1.0, abs(w1)):
        raise InvalidInputError("geodesic through coincident points is undefined")
    if abs(w1.real - w2.real) <= 1e-12:
        return Geodesic.vertical((w1.real + w2.real) / 2)
    center = (abs(w2) ** 2 - abs(w1) ** 2) / (2 * (w2.real - w1.real))
    return Geodesic.semicircle(center, abs(w1 - center))


def _to_standard(ell: Geodesic) -> np.ndarray:
    """SL2 matrix whose Moebius map sends ``ell`` to the imaginary axis."""
    if ell.kind == "vertical":
        return u(-ell.c)
    c, r = ell.c, ell.radius
    return np.array([[1.0, -(c - r)], [-1.0, c + r]]) / math.sqrt(2 * r)


def reflection(ell: Geodesic) -> Motion:
    """``T_g^-1 o (z -> -conj z) o T_g`` with ``T_g(ell)`` the imaginary axis."""
    g = _to_standard(ell)
    ginv = np.array([[g[1, 1], -g[0, 1]], [-g[1, 0], g[0, 0]]])
    return Motion(_normalize(ginv @ _D @ g @ _D), True)


def reflect(ell: Geodesic, z):
    return reflection(ell)(z)


def hyperbolic_distance(z1, z2) -> float:
    """Length of the geodesic arc, integrated numerically along the arc."""
    w1, w2 = _as_complex(z1), _as_complex(z2)
    if w1 == w2:
        return 0.0
    ell = geodesic_through(w1, w2)
    if ell.kind == "vertical":
        lo, hi = sorted((w1.imag, w2.imag))
        val, _ = integrate.quad(lambda y: 1.0 / y, lo, hi, epsabs=0.0, epsrel=1e-13, limit=200)
        return float(val)
    # z = c + r e^{i phi}: |z'| = r, Im z = r sin(phi)
    p1 = math.atan2(w1.imag, w1.real - ell.c)
    p2 = math.atan2(w2.imag, w2.real - ell.c)
    lo, hi = sorted((p1, p2))
    val, _ = integrate.quad(lambda p: 1.0 / math.sin(p), lo, hi, epsabs=0.0, epsrel=1e-13, limit=200)
    return float(val)


# --- triangle groups ---------------------------------------------------------


@dataclass(frozen=True)
class TriangleGroupSpec:
    n1: int
    n2: int
    n3: int

    def __post_init__(self):
        ns = (self.n1, self.n2, self.n3)
        if not all(isinstance(n, (int, np.integer)) and n >= 2 for n in ns):
            raise InvalidInputError(f"triangle signature needs integers >= 2, got {ns}")
        # exact rational test of 1/n1 + 1/n2 + 1/n3 < 1
        if self.n2 * self.n3 + self.n1 * self.n3 + self.n1 * self.n2 >= self.n1 * self.n2 * self.n3:
            raise InvalidInputError(f"signature {ns} is not hyperbolic (angle sum >= pi)")

    @property
    def ns(self) -> tuple[int, int, int]:
        return (self.n1, self.n2, self.n3)

    @property
    def angles(self) -> tuple[float, float, float]:
        return tuple(math.pi / n for n in self.ns)

    @classmethod
    def parse(cls, text: str) -> TriangleGroupSpec:
        try:
            parts = [int(p) for p in text.split(",")]
        except ValueError:
            raise InvalidInputError(f"signature must be n1,n2,n3, got {text!r}") from None
        if len(parts) != 3:
            raise InvalidInputError(f"signature must have three entries, got {text!r}")
        return cls(*parts)


def _geodesic_from(p: complex, direction: complex) -> Geodesic:
    """Geodesic through ``p`` with tangent ``direction``."""
    if abs(direction.real) <= 1e-15:
        return Geodesic.vertical(p.real)
    # the center is where the normal line p + s i u meets the real axis
    s = -p.imag / direction.real
    center = (p + s * 1j * direction).real
    return Geodesic.semicircle(center, abs(p - center))


def _intersect(g1: Geodesic, g2: Geodesic) -> complex | None:
    c1, r1, c2, r2 = g1.c, g1.radius, g2.c, g2.radius
    if abs(c2 - c1) < 1e-15:
        return None
    x = (r1 * r1 - r2 * r2 + c2 * c2 - c1 * c1) / (2 * (c2 - c1))
    y2 = r1 * r1 - (x - c1) ** 2
    if y2 <= 0:
        return None
    return complex(x, math.sqrt(y2))


def _tangent_toward(ell: Geodesic, z: complex, target: complex) -> complex:
    t = 1j if ell.kind == "vertical" else 1j * (z - ell.c)
    t /= abs(t)
    chord = target - z
    return t if (t.conjugate() * chord).real > 0 else -t


def interior_angle(vertex, p, q) -> float:
    """Angle at ``vertex`` between the geodesic arcs to ``p`` and ``q``."""
    v, p, q = _as_complex(vertex), _as_complex(p), _as_complex(q)
    t1 = _tangent_toward(geodesic_through(v, p), v, p)
    t2 = _tangent_toward(geodesic_through(v, q), v, q)
    return abs(math.atan2((t1.conjugate() * t2).imag, (t1.conjugate() * t2).real))


@dataclass(frozen=True)
class BaseTriangle:
    vertices: tuple[complex, complex, complex]
    sides: tuple[Geodesic, Geodesic, Geodesic]

    def hpoints(self) -> tuple[HPoint, HPoint, HPoint]:
        return tuple(HPoint.of(v) for v in self.vertices)


def _third_vertex(alpha: float, beta: float, yb: float) -> complex | None:
    A, B = 1j, 1j * yb
    ga = _geodesic_from(A, complex(math.cos(math.pi / 2 - alpha), math.sin(math.pi / 2 - alpha)))
    gb = _geodesic_from(B, complex(math.cos(beta - math.pi / 2), math.sin(beta - math.pi / 2)))
    return _intersect(ga, gb)


def build_base_triangle(spec: TriangleGroupSpec) -> BaseTriangle:
    """Vertices ``A = i``, ``B = i y_B`` on the imaginary axis and ``C`` to the right.

    The angles at A, B, C are pi/n1, pi/n2, pi/n3.  ``y_B`` is found by a 1-D
    root search on the angle at the third vertex.  Side ``k`` is opposite
    vertex ``k`` so the reflections in sides i and j fix the third vertex.
    """
    alpha, beta, gamma = spec.angles

    def angle_c(yb: float) -> float:
        C = _third_vertex(alpha, beta, yb)
        if C is None:
            return 0.0
        return interior_angle(C, 1j, 1j * yb)

    hi = 2.0
    while angle_c(hi) > gamma:
        hi *= 2
        if hi > 1e12:
            raise RuntimeError("failed to bracket the base triangle")
    yb = optimize.brentq(lambda y: angle_c(y) - gamma, 1.0 + 1e-12, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    A, B = 1j, 1j * yb
    C = _third_vertex(alpha, beta, yb)
    sides = (geodesic_through(B, C), geodesic_through(C, A), geodesic_through(A, B))
    return BaseTriangle((A, B, C), sides)


def side_reflections(spec: TriangleGroupSpec) -> tuple[Motion, Motion, Motion]:
    tri = build_base_triangle(spec)
    return tuple(reflection(s) for s in tri.sides)


# --- tiling ------------------------------------------------------------------


def _to_klein(z: np.ndarray | complex):
    w = (z - 1j) / (z + 1j)
    return 2 * w / (1 + np.abs(w) ** 2)


def _from_klein(k):
    w = k / (1 + np.sqrt(1 - np.abs(k) ** 2))
    return 1j * (1 + w) / (1 - w)


def to_disk(z):
    """Cayley map to the Poincare disk."""
    return (z - 1j) / (z + 1j)


_SAMPLE_WEIGHTS = np.array([[1 / 3, 1 / 3, 1 / 3], [0.6, 0.2, 0.2], [0.2, 0.6, 0.2], [0.2, 0.2, 0.6]])


@dataclass(frozen=True, eq=False)
class Tile:
    word: tuple[int, ...]
    motion: Motion
    vertices: tuple[complex, complex, complex] = field(repr=False)

    def sample_points(self) -> np.ndarray:
        """Klein-model centroid plus three interior points, as complex numbers in H."""
        k = _to_klein(np.array(self.vertices))
        return _from_klein(_SAMPLE_WEIGHTS @ k)

    def to_json(self) -> dict:
        return {
            "word": list(self.word),
            "motion": {"m": self.motion.m.tolist(), "reflect_first": self.motion.reflect_first},
            "vertices": [[v.real, v.imag] for v in self.vertices],
        }


def tile_budget(depth: int) -> int:
    """Upper bound on the number of words of length <= depth without immediate backtracking."""
    return 1 + 3 * (2**depth - 1)


def generate_tiling(spec: TriangleGroupSpec, depth: int, max_tiles: int = 50_000, tol: Tolerances | None = None) -> list[Tile]:
    """Breadth-first images of the base triangle under words of length <= depth.

    The neighbour of tile ``lam T`` across its side ``i`` is ``lam R_i T``.
    Motions are deduplicated up to ``m -> -m``.
    """
    tol = resolve(tol)
    if not isinstance(depth, (int, np.integer)) or depth < 0:
        raise InvalidInputError("depth must be a non-negative integer")
    if tile_budget(depth) > max_tiles:
        raise ResourceError(f"depth {depth} may produce {tile_budget(depth)} tiles (budget {max_tiles})")
    tri = build_base_triangle(spec)
    refl = tuple(reflection(s) for s in tri.sides)
    base = Motion.identity()
    tiles = [Tile((), base, tri.vertices)]
    mats = [base.m.ravel()]
    flags = [False]
    frontier = tiles
    for _ in range(depth):
        nxt = []
        for t in frontier:
            for i, r in enumerate(refl, start=1):
                if t.word and t.word[-1] == i:
                    continue
                mo = t.motion @ r
                M = np.array(mats)
                f = mo.m.ravel()
                dist = np.minimum(np.max(np.abs(M - f), axis=1), np.max(np.abs(M + f), axis=1))
                if np.any((dist <= tol.motion) & (np.array(flags) == mo.reflect_first)):
                    continue
                mats.append(f)
                flags.append(mo.reflect_first)
                nxt.append(Tile(t.word + (i,), mo, tuple(mo(v) for v in tri.vertices)))
        tiles.extend(nxt)
        frontier = nxt
    tiles.sort(key=lambda t: (len(t.word), t.word))
    return tiles


def _barycentric(k: np.ndarray, tri: np.ndarray) -> np.ndarray:
    """Barycentric coordinates of points ``k`` (complex, Klein model) in the triangle ``tri``."""
    p = np.stack([k.real, k.imag], axis=-1)
    v = np.stack([tri.real, tri.imag], axis=-1)
    T = np.array([v[0] - v[2], v[1] - v[2]]).T
    lam = np.linalg.solve(T, (p - v[2]).T).T
    return np.column_stack([lam, 1 - lam.sum(axis=1)])


def overlap_count(tiles: Sequence[Tile], margin: float = 1e-9) -> int:
    """Number of (tile, sample point, other tile) triples with the point inside the other tile."""
    if not tiles:
        return 0
    pts = np.concatenate([t.sample_points() for t in tiles])
    owner = np.repeat(np.arange(len(tiles)), len(_SAMPLE_WEIGHTS))
    kp = _to_klein(pts)
    hits = 0
    for j, t in enumerate(tiles):
        lam = _barycentric(kp, _to_klein(np.array(t.vertices)))
        inside = np.all(lam > margin, axis=1) & (owner != j)
        hits += int(np.count_nonzero(inside))
    return hits


def vertex_cycle_counts(tiles: Sequence[Tile], tol: float = 1e-9) -> tuple[int, int, int]:
    """Number of tiles whose closure contains each vertex of the base tile."""
    base = tiles[0].vertices
    counts = []
    for v in base:
        counts.append(sum(1 for t in tiles if min(abs(w - v) for w in t.vertices) <= tol * max(1.0, abs(v))))
    return tuple(counts)


def even_subgroup_generators(spec: TriangleGroupSpec) -> list[np.ndarray]:
    """``R1R2``, ``R2R3``, ``R3R1`` as SL2 matrices; ``R_i R_j`` rotates about the vertex off sides i, j."""
    r1, r2, r3 = side_reflections(spec)
    out = []
    for p, q in ((r1, r2), (r2, r3), (r3, r1)):
        mo = p @ q
        assert not mo.reflect_first
        out.append(np.array(mo.m))
    return out


def elliptic_order(m: np.ndarray, max_order: int = 1000, tol: float = 1e-9) -> int | None:
    """Smallest ``n`` with ``m^n = +-I`` within ``tol``, if any up to ``max_order``."""
    p = np.eye(2)
    for n in range(1, max_order + 1):
        p = p @ m
        if min(np.max(np.abs(p - np.eye(2))), np.max(np.abs(p + np.eye(2)))) <= tol:
            return n
    return None


def _word_levels(generators: Iterable[np.ndarray], length: int, inverses: bool, tol: float):
    gens = [np.asarray(g, dtype=float) for g in generators]
    if inverses:
        gens = gens + [np.linalg.inv(g) for g in gens]
    frontier = [np.eye(2)]
    keys = {_sign_key(frontier[0], tol)}
    yield frontier
    for _ in range(length):
        nxt = []
        for w in frontier:
            for g in gens:
                p = w @ g
                k = _sign_key(p, tol)
                if k in keys:
                    continue
                keys.add(k)
                nxt.append(p)
        frontier = nxt
        yield nxt


def enumerate_words(generators: Iterable[np.ndarray], length: int, inverses: bool = True, tol: float = 1e-9) -> list[np.ndarray]:
    """Distinct (up to sign) products of at most ``length`` generators."""
    return [w for level in _word_levels(generators, length, inverses, tol) for w in level]


def box_counts(generators: Iterable[np.ndarray], radius: float, max_length: int, inverses: bool = True) -> list[int]:
    """``discreteness_check`` of the words of length <= L, for L = 0..max_length."""
    out, total = [], 0
    for level in _word_levels(generators, max_length, inverses, 1e-9):
        total += discreteness_check(level, radius)
        out.append(total)
    return out


def _sign_key(m: np.ndarray, tol: float) -> tuple:
    flat = m.ravel()
    i = int(np.argmax(np.abs(flat) > 1e-6))
    s = 1.0 if flat[i] > 0 else -1.0
    q = max(tol * 1e3, 1e-7)
    return tuple(int(round(s * v / q)) for v in flat)


def discreteness_check(elements: Iterable[np.ndarray], radius: float) -> int:
    """Number of elements whose entries all lie in ``[-radius, radius]``."""
    return sum(1 for g in elements if np.max(np.abs(np.asarray(g))) <= radius)


# --- SVG ---------------------------------------------------------------------


def _edge_points(p: complex, q: complex, n: int = 24) -> np.ndarray:
    kp, kq = _to_klein(p), _to_klein(q)
    s = np.linspace(0.0, 1.0, n)
    return to_disk(_from_klein(kp + s * (kq - kp)))


def tiling_svg(tiles: Sequence[Tile], size: int = 600) -> str:
    """SVG 1.1 picture in the Poincare disk; one path per tile, fill by word-length parity."""
    half = size / 2
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<circle cx="{half:.1f}" cy="{half:.1f}" r="{half - 1:.1f}" fill="none" stroke="#444" stroke-width="1"/>',
    ]
    for t in tiles:
        pts = []
        v = t.vertices
        for i in range(3):
            pts.extend(_edge_points(v[i], v[(i + 1) % 3])[:-1])
        coords = " ".join(f"{half + (half - 1) * w.real:.3f},{half - (half - 1) * w.imag:.3f}" for w in pts)
        fill = "#3b6ea5" if len(t.word) % 2 == 0 else "#f2f2f2"
        word = "".join(str(i) for i in t.word) or "e"
        lines.append(f'<path class="tile" data-word="{word}" d="M {coords} Z" fill="{fill}" stroke="#222" stroke-width="0.4"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
