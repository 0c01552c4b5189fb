"""Projective recurrence experiments and the fixed-vector mechanism behind Borel density.

A matrix ``T`` acts on lines ``[v]`` by ``[v] -> [T v]`` (column vectors).
Distances between lines are principal angles, in ``[0, pi/2]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal, NamedTuple, Sequence

import numpy as np

from liekit.config import InvalidInputError, Tolerances, resolve
from liekit.linalg import as_matrix, classify_element, require_invertible

RigidityStatus = Literal["fixed", "escaped", "violation"]

DEFAULT_EPS = 1e-3
DEFAULT_NMAX = 100_000

NORMALITY_NOTE = (
    "per-element fixing only: the stabilizer of v is not shown to contain an "
    "infinite normal subgroup, so this report is evidence, not a certificate"
)


def canonicalize(v) -> np.ndarray:
    """Unit vector with first non-negligible coordinate real and positive."""
    v = np.asarray(v)
    if v.ndim != 1 or v.size == 0:
        raise InvalidInputError("projective points are nonzero 1-D vectors")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("non-finite coordinates")
    n = np.linalg.norm(v)
    if n == 0.0:
        raise InvalidInputError("the zero vector does not define a projective point")
    u = v / n
    lead = int(np.argmax(np.abs(u) > 1e-12))
    phase = u[lead] / abs(u[lead])
    u = u / phase
    if not np.iscomplexobj(v):
        u = u.real
    elif np.all(np.abs(u.imag) <= 1e-15):
        u = u.real
    return u


@dataclass(frozen=True, eq=False)
class ProjPoint:
    v: np.ndarray

    def __post_init__(self):
        u = canonicalize(self.v)
        u.setflags(write=False)
        object.__setattr__(self, "v", u)

    @property
    def dim(self) -> int:
        return self.v.size


def projective_distance(p, q) -> float:
    """Principal angle between the lines spanned by ``p`` and ``q``."""
    p = p.v if isinstance(p, ProjPoint) else canonicalize(p)
    q = q.v if isinstance(q, ProjPoint) else canonicalize(q)
    c = abs(np.vdot(p, q))
    s = np.linalg.norm(q - np.vdot(p, q) * p)
    return float(np.arctan2(s, c))


@dataclass(frozen=True, eq=False)
class Trajectory:
    points: np.ndarray  # (n+1, N) canonical representatives
    times: np.ndarray

    def __len__(self) -> int:
        return len(self.times)


def projective_orbit(T, p0, n_max: int) -> Trajectory:
    """``[T^n v0]`` for ``n = 0..n_max`` by repeated multiplication with renormalization."""
    T = as_matrix(T, "T")
    require_invertible(T)
    p0 = p0 if isinstance(p0, ProjPoint) else ProjPoint(p0)
    if T.shape[0] != p0.dim:
        raise InvalidInputError(f"matrix of size {T.shape[0]} cannot act on a point of dimension {p0.dim}")
    if n_max < 0:
        raise InvalidInputError("n_max must be non-negative")
    dtype = np.result_type(T, p0.v)
    pts = np.empty((n_max + 1, p0.dim), dtype=dtype)
    v = p0.v.astype(dtype)
    pts[0] = v
    for n in range(1, n_max + 1):
        v = T @ v
        v = v / np.linalg.norm(v)
        pts[n] = v
    lead = np.argmax(np.abs(pts) > 1e-12, axis=1)
    ph = pts[np.arange(len(pts)), lead]
    pts = pts / (ph / np.abs(ph))[:, None]
    if not np.iscomplexobj(dtype.type(0)):
        pts = pts.real
    return Trajectory(pts, np.arange(n_max + 1))


def _distances_to_start(traj: Trajectory) -> np.ndarray:
    p = traj.points[0]
    Q = traj.points[1:]
    inner = Q @ np.conj(p)
    s = np.linalg.norm(Q - inner[:, None] * p[None, :], axis=1)
    return np.arctan2(s, np.abs(inner))


def recurrence_detect(traj: Trajectory, eps: float) -> list[int]:
    """Times ``k >= 1`` at which the orbit is within angle ``eps`` of its start."""
    if not eps > 0:
        raise InvalidInputError("eps must be positive")
    d = _distances_to_start(traj)
    return [int(t) for t in traj.times[1:][d < eps]]


class RigidityReport(NamedTuple):
    status: RigidityStatus
    returns: int
    first_return: int | None
    min_distance: float


def unipotent_rigidity_check(T, p0, eps: float = DEFAULT_EPS, n_max: int = DEFAULT_NMAX, tol: Tolerances | None = None) -> RigidityReport:
    """``fixed`` / ``escaped`` / ``violation`` for the orbit of ``[p0]`` under unipotent ``T``.

    A violation (a non-fixed point with an eps-return) would contradict
    projective rigidity of unipotent maps, so it indicates a numerical problem.
    """
    tol = resolve(tol)
    T = as_matrix(T, "T")
    label = classify_element(T, tol)
    if label != "unipotent":
        raise InvalidInputError(f"unipotent_rigidity_check needs a unipotent matrix, got a {label} one")
    p0 = p0 if isinstance(p0, ProjPoint) else ProjPoint(p0)
    if projective_distance(p0, T @ p0.v) <= tol.fixed:
        return RigidityReport("fixed", 0, None, 0.0)
    traj = projective_orbit(T, p0, n_max)
    d = _distances_to_start(traj)
    hits = np.nonzero(d < eps)[0]
    status: RigidityStatus = "violation" if hits.size else "escaped"
    first = int(hits[0]) + 1 if hits.size else None
    return RigidityReport(status, int(hits.size), first, float(d.min()) if d.size else float("inf"))


def invariant_vectors(mats: Sequence, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (columns) of ``{v : M v = v for all M}``."""
    mats = [as_matrix(M) for M in mats]
    if not mats:
        raise InvalidInputError("need at least one matrix")
    N = mats[0].shape[0]
    S = np.vstack([M - np.eye(N) for M in mats])
    _, s, vh = np.linalg.svd(S)
    scale = max(1.0, max(np.linalg.norm(M) for M in mats))
    rank = int(np.sum(s > tol * scale))
    return np.conj(vh[rank:]).T


@dataclass
class BorelReport:
    entries: list[dict]
    all_fixed: bool
    note: str = NORMALITY_NOTE

    def to_json(self) -> dict:
        return {"entries": self.entries, "allFixed": self.all_fixed, "note": self.note}


def borel_density_experiment(
    rep: Callable[[np.ndarray], np.ndarray],
    rep_generators: Sequence[tuple[np.ndarray, np.ndarray]],
    unipotent_family: Sequence[np.ndarray],
    v,
    eps: float = DEFAULT_EPS,
    n_max: int = DEFAULT_NMAX,
    tol: Tolerances | None = None,
) -> BorelReport:
    """Check that each ``rep(U)`` fixes a ``Gamma``-fixed vector ``v``.

    ``rep_generators`` pairs each lattice generator with its image; ``v`` must
    be fixed by every image to 1e-10.  For every ``U`` in the family the image
    is classified (it must again be unipotent) and its projective orbit through
    ``[v]`` is tested with ``unipotent_rigidity_check``.
    """
    tol = resolve(tol)
    v = np.asarray(v)
    if v.ndim != 1 or not np.any(v):
        raise InvalidInputError("v must be a nonzero vector")
    for k, (_, rg) in enumerate(rep_generators):
        rg = as_matrix(rg)
        if np.linalg.norm(rg @ v - v) > 1e-10 * max(1.0, np.linalg.norm(v)):
            raise InvalidInputError(f"v is not fixed by generator {k}")
    entries = []
    for U in unipotent_family:
        RU = as_matrix(rep(np.asarray(U)))
        label = classify_element(RU, tol)
        if label != "unipotent":
            entries.append({"label": label, "status": "not-unipotent"})
            continue
        r = unipotent_rigidity_check(RU, v, eps, n_max, tol)
        entries.append({"label": label, "status": r.status, "returns": r.returns})
    return BorelReport(entries, all(e["status"] == "fixed" for e in entries))
