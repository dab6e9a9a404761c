"""Half-space polytopes, reflections, isometries, products and convex unions.

Everything here is immutable.  Membership of a point ``x`` in a facet's
half-space means ``normal @ x <= offset`` with a unit outward normal.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import nnls

EPS_GEOM = 1e-9
EPS_UNIT = 1e-12


class GeometryError(Exception):
    """Base class for geometric validation failures."""


class Unbounded(GeometryError):
    pass


class EmptyInterior(GeometryError):
    pass


class RedundantFacet(GeometryError):
    def __init__(self, facet_id: str):
        super().__init__(f"facet {facet_id!r} does not support a facet of the polytope")
        self.facet_id = facet_id


class DimensionMismatch(GeometryError):
    pass


class UnknownFacet(GeometryError):
    def __init__(self, facet_id: str):
        super().__init__(f"unknown facet {facet_id!r}")
        self.facet_id = facet_id


class Outside(GeometryError):
    pass


class NotConvexUnion(GeometryError):
    pass


class NotConvex(GeometryError):
    pass


def as_vec(x: Iterable[float]) -> np.ndarray:
    v = np.asarray(x, dtype=float).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite coordinates")
    return v


@dataclass(frozen=True, eq=False)
class HalfSpace:
    """``{x : normal @ x <= offset}`` with a unit normal."""

    normal: np.ndarray
    offset: float

    def __post_init__(self) -> None:
        n = as_vec(self.normal)
        if abs(np.linalg.norm(n) - 1.0) > EPS_UNIT * 10:
            raise ValueError("half-space normal must have unit length")
        n.setflags(write=False)
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def from_raw(cls, normal: Iterable[float], offset: float) -> "HalfSpace":
        """Normalize ``normal @ x <= offset`` to a unit normal."""
        n = as_vec(normal)
        s = np.linalg.norm(n)
        if s == 0.0:
            raise ValueError("zero normal")
        return cls(n / s, float(offset) / s)

    @property
    def dim(self) -> int:
        return self.normal.shape[0]

    def signed_distance(self, x: np.ndarray) -> float:
        return float(self.normal @ x - self.offset)


@dataclass(frozen=True, eq=False)
class Polytope:
    dim: int
    facets: tuple[tuple[str, HalfSpace], ...]
    tol: float = EPS_GEOM
    known_vertices: np.ndarray | None = field(default=None, repr=False)

    @cached_property
    def ids(self) -> tuple[str, ...]:
        return tuple(fid for fid, _ in self.facets)

    @cached_property
    def normals(self) -> np.ndarray:
        return np.array([h.normal for _, h in self.facets])

    @cached_property
    def offsets(self) -> np.ndarray:
        return np.array([h.offset for _, h in self.facets])

    @cached_property
    def _index(self) -> dict[str, int]:
        return {fid: i for i, fid in enumerate(self.ids)}

    def index(self, fid: str) -> int:
        try:
            return self._index[fid]
        except KeyError:
            raise UnknownFacet(fid) from None

    def halfspace(self, fid: str) -> HalfSpace:
        return self.facets[self.index(fid)][1]

    def slacks(self, x: np.ndarray) -> np.ndarray:
        """``offset - normal @ x`` per facet; nonnegative inside."""
        return self.offsets - self.normals @ x

    def contains(self, x: np.ndarray, tol: float | None = None) -> bool:
        t = self.tol if tol is None else tol
        return bool(np.all(self.slacks(as_vec(x)) >= -t))

    @cached_property
    def vertices(self) -> np.ndarray:
        if self.known_vertices is not None:
            return self.known_vertices
        return enumerate_vertices(self.normals, self.offsets, self.tol)

    @cached_property
    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def facet_vertices(self, fid: str) -> np.ndarray:
        i = self.index(fid)
        v = self.vertices
        s = self.offsets[i] - v @ self.normals[i]
        return v[np.abs(s) <= _vertex_tol(self.tol)]

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "tol": self.tol,
            "facets": [
                {"id": fid, "normal": [float(c) for c in h.normal], "offset": h.offset}
                for fid, h in self.facets
            ],
        }

    @staticmethod
    def from_json(data: Mapping) -> "Polytope":
        facets = [(f["id"], HalfSpace(np.array(f["normal"], dtype=float), f["offset"])) for f in data["facets"]]
        return Polytope(int(data["dim"]), tuple(facets), float(data["tol"]))


def _vertex_tol(tol: float) -> float:
    return max(tol, 1e-12) * 10


def enumerate_vertices(normals: np.ndarray, offsets: np.ndarray, tol: float) -> np.ndarray:
    """Brute force over all n-subsets of constraints; returns deduplicated vertices."""
    m, n = normals.shape
    combos = np.array(list(itertools.combinations(range(m), n)), dtype=int)
    if combos.size == 0:
        return np.zeros((0, n))
    mats = normals[combos]
    rhs = offsets[combos]
    dets = np.linalg.det(mats)
    ok = np.abs(dets) > 1e-10
    if not np.any(ok):
        return np.zeros((0, n))
    pts = np.linalg.solve(mats[ok], rhs[ok][..., None])[..., 0]
    slack = offsets[None, :] - pts @ normals.T
    pts = pts[np.all(slack >= -_vertex_tol(tol), axis=1)]
    return _dedupe(pts, _vertex_tol(tol) * 10)


def _dedupe(pts: np.ndarray, tol: float) -> np.ndarray:
    if len(pts) == 0:
        return pts
    order = np.lexsort(pts.T[::-1])
    pts = pts[order]
    keep: list[np.ndarray] = []
    for p in pts:
        if not any(np.max(np.abs(p - q)) <= tol for q in keep):
            keep.append(p)
    return np.array(keep)


def _affine_rank(pts: np.ndarray, tol: float) -> int:
    if len(pts) == 0:
        return -1
    d = pts - pts[0]
    if len(d) == 1:
        return 0
    s = np.linalg.svd(d, compute_uv=False)
    scale = max(1.0, float(np.max(np.abs(pts))))
    return int(np.sum(s > tol * 1e3 * scale))


def _positively_spanning(normals: np.ndarray) -> bool:
    n = normals.shape[1]
    for k in range(n):
        for sign in (1.0, -1.0):
            target = np.zeros(n)
            target[k] = sign
            _, resid = nnls(normals.T, target)
            if resid > 1e-9:
                return False
    return True


def make_polytope(
    halfspaces: Sequence[HalfSpace] | Sequence[tuple[str, HalfSpace]],
    tol: float = EPS_GEOM,
    ids: Sequence[str] | None = None,
) -> Polytope:
    """Validate half-spaces and build a polytope.

    Redundant half-spaces are rejected, never dropped, so that callers keep
    explicit control over which facet is which.
    """
    pairs: list[tuple[str, HalfSpace]] = []
    for i, item in enumerate(halfspaces):
        if isinstance(item, HalfSpace):
            fid = ids[i] if ids is not None else f"f{i}"
            pairs.append((fid, item))
        else:
            pairs.append((str(item[0]), item[1]))
    if not pairs:
        raise EmptyInterior("no half-spaces")
    n = pairs[0][1].dim
    if any(h.dim != n for _, h in pairs):
        raise DimensionMismatch("half-spaces of mixed dimension")
    if len({fid for fid, _ in pairs}) != len(pairs):
        raise ValueError("facet ids must be unique")
    if len(pairs) < n + 1:
        raise Unbounded(f"need at least {n + 1} half-spaces in dimension {n}")
    normals = np.array([h.normal for _, h in pairs])
    offsets = np.array([h.offset for _, h in pairs])
    for i, j in itertools.combinations(range(len(pairs)), 2):
        if np.max(np.abs(normals[i] - normals[j])) <= 1e-9 and abs(offsets[i] - offsets[j]) <= tol:
            raise RedundantFacet(pairs[j][0])
    if not _positively_spanning(normals):
        raise Unbounded("half-spaces do not bound a region")
    verts = enumerate_vertices(normals, offsets, tol)
    if _affine_rank(verts, tol) < n:
        raise EmptyInterior("intersection has empty interior")
    center = verts.mean(axis=0)
    if np.min(offsets - normals @ center) <= tol:
        raise EmptyInterior("intersection has empty interior")
    vt = _vertex_tol(tol)
    for i, (fid, _) in enumerate(pairs):
        on = verts[np.abs(offsets[i] - verts @ normals[i]) <= vt]
        if _affine_rank(on, tol) < n - 1:
            raise RedundantFacet(fid)
    return Polytope(n, tuple(pairs), tol, verts)


@dataclass(frozen=True)
class Location:
    kind: str  # "interior" | "boundary" | "outside"
    facets: frozenset[str] = frozenset()


def locate(P: Polytope, x: Iterable[float]) -> Location:
    x = as_vec(x)
    if x.shape[0] != P.dim:
        raise DimensionMismatch(f"point has dimension {x.shape[0]}, polytope {P.dim}")
    s = P.slacks(x)
    if np.any(s < -P.tol):
        return Location("outside")
    on = frozenset(fid for fid, si in zip(P.ids, s) if abs(si) <= P.tol)
    return Location("boundary", on) if on else Location("interior")


def hyperplane_distances(P: Polytope, x: Iterable[float]) -> list[tuple[str, float]]:
    """Unsigned distances to every supporting hyperplane, ascending."""
    loc = locate(P, x)
    if loc.kind == "outside":
        raise Outside("point lies outside the polytope")
    s = np.abs(P.slacks(as_vec(x)))
    return sorted(zip(P.ids, (float(v) for v in s)), key=lambda t: (t[1], t[0]))


@dataclass(frozen=True, eq=False)
class Isometry:
    """``x -> linear @ x + shift`` with an optional facet relabeling."""

    linear: np.ndarray
    shift: np.ndarray
    relabel: Mapping[str, str] | None = None

    def __post_init__(self) -> None:
        L = np.array(self.linear, dtype=float)
        s = as_vec(self.shift)
        n = L.shape[0]
        if L.shape != (n, n) or s.shape != (n,):
            raise DimensionMismatch("linear part and shift disagree in dimension")
        if np.max(np.abs(L @ L.T - np.eye(n))) > EPS_UNIT * 100:
            raise ValueError("linear part is not orthogonal")
        L.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "linear", L)
        object.__setattr__(self, "shift", s)

    @staticmethod
    def identity(n: int) -> "Isometry":
        return Isometry(np.eye(n), np.zeros(n))

    @staticmethod
    def linear_map(L: np.ndarray, relabel: Mapping[str, str] | None = None) -> "Isometry":
        return Isometry(np.asarray(L, dtype=float), np.zeros(len(L)), relabel)

    @property
    def dim(self) -> int:
        return self.linear.shape[0]

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.linear))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.linear @ as_vec(x) + self.shift

    def apply_many(self, pts: np.ndarray) -> np.ndarray:
        return pts @ self.linear.T + self.shift

    def __matmul__(self, other: "Isometry") -> "Isometry":
        """Composition: ``(self @ other)(x) = self(other(x))``."""
        return Isometry(self.linear @ other.linear, self.linear @ other.shift + self.shift)

    def inverse(self) -> "Isometry":
        Lt = self.linear.T
        return Isometry(Lt, -Lt @ self.shift)

    def apply_to_polytope(self, P: Polytope) -> Polytope:
        facets = []
        for fid, h in P.facets:
            nrm = self.linear @ h.normal
            new_id = self.relabel.get(fid, fid) if self.relabel else fid
            facets.append((new_id, HalfSpace(nrm / np.linalg.norm(nrm), h.offset + float(nrm @ self.shift))))
        verts = self.apply_many(P.vertices) if P.known_vertices is not None else None
        return Polytope(P.dim, tuple(facets), P.tol, verts)


def reflection(h: HalfSpace) -> Isometry:
    """Affine reflection fixing the boundary hyperplane of ``h``."""
    nu = h.normal
    return Isometry(np.eye(len(nu)) - 2.0 * np.outer(nu, nu), 2.0 * h.offset * nu)


def reflect_about_facet(P: Polytope, f: str, relabel: Mapping[str, str] | None = None) -> Isometry:
    r = reflection(P.halfspace(f))
    return Isometry(r.linear, r.shift, relabel)


def product(P: Polytope, Q: Polytope, labels: tuple[str, str] = ("A", "B")) -> Polytope:
    """Cartesian product; facet ids are prefixed with the factor label."""
    n, m = P.dim, Q.dim
    facets = []
    for fid, h in P.facets:
        facets.append((f"{labels[0]}:{fid}", HalfSpace(np.concatenate([h.normal, np.zeros(m)]), h.offset)))
    for fid, h in Q.facets:
        facets.append((f"{labels[1]}:{fid}", HalfSpace(np.concatenate([np.zeros(n), h.normal]), h.offset)))
    vp, vq = P.vertices, Q.vertices
    verts = np.array([np.concatenate([a, b]) for a in vp for b in vq])
    return Polytope(n + m, tuple(facets), max(P.tol, Q.tol), verts)


def _valid_for(h: HalfSpace, pts: np.ndarray, tol: float) -> bool:
    return bool(np.all(pts @ h.normal - h.offset <= _vertex_tol(tol)))


def convex_union(P: Polytope, Q: Polytope) -> Polytope:
    """Return ``P | Q`` as a polytope when the union is convex.

    The candidate hull keeps every facet of either piece that is valid for
    the other piece.  Convexity then holds iff each region of the hull lying
    beyond a facet of ``P`` is contained in ``Q``; those regions are
    polytopes, so checking their vertices suffices.
    """
    if P.dim != Q.dim:
        raise DimensionMismatch("pieces have different dimensions")
    tol = max(P.tol, Q.tol)
    cand: list[tuple[str, HalfSpace]] = []

    def seen(h: HalfSpace) -> bool:
        return any(
            np.max(np.abs(h.normal - g.normal)) <= 1e-9 and abs(h.offset - g.offset) <= _vertex_tol(tol)
            for _, g in cand
        )

    used = set()
    for fid, h in P.facets:
        if _valid_for(h, Q.vertices, tol) and not seen(h):
            cand.append((fid, h))
            used.add(fid)
    for fid, h in Q.facets:
        if _valid_for(h, P.vertices, tol) and not seen(h):
            new_id = fid
            while new_id in used:
                new_id += "'"
            cand.append((new_id, h))
            used.add(new_id)
    try:
        hull = make_polytope(cand, tol)
    except GeometryError as exc:
        raise NotConvexUnion(f"hull construction failed: {exc}") from exc
    vt = _vertex_tol(tol)
    for v in hull.vertices:
        if not (P.contains(v, vt) or Q.contains(v, vt)):
            raise NotConvexUnion(f"hull vertex {v.tolist()} lies in neither piece")
    for i, (_, h) in enumerate(P.facets):
        if _valid_for(h, Q.vertices, tol):
            continue  # nothing of the hull lies strictly beyond this facet
        normals = np.vstack([hull.normals, -P.normals[i]])
        offsets = np.append(hull.offsets, -P.offsets[i])
        for v in enumerate_vertices(normals, offsets, tol):
            if not Q.contains(v, vt):
                raise NotConvexUnion(f"point {v.tolist()} of the hull lies in neither piece")
    return hull


def polygon(vertices: Sequence[Sequence[float]], ids: Sequence[str] | None = None, tol: float = EPS_GEOM) -> Polytope:
    """Convex polygon from counterclockwise vertices; edge ``i`` joins vertex ``i`` to ``i+1``."""
    pts = np.asarray(vertices, dtype=float)
    k = len(pts)
    hs = []
    for i in range(k):
        a, b = pts[i], pts[(i + 1) % k]
        d = b - a
        nrm = np.array([d[1], -d[0]])
        hs.append(HalfSpace.from_raw(nrm, float(nrm @ a)))
    P = make_polytope(hs, tol, ids=list(ids) if ids is not None else [f"e{i}" for i in range(k)])
    vt = _vertex_tol(tol) * 10
    if len(P.vertices) != k or not all(np.min(np.max(np.abs(P.vertices - p), axis=1)) <= vt for p in pts):
        raise NotConvex("vertices do not form a convex polygon in counterclockwise order")
    return P


def box(lo: Sequence[float], hi: Sequence[float], ids: Sequence[str] | None = None, tol: float = EPS_GEOM) -> Polytope:
    """Axis-aligned box with facets ordered ``-x0, +x0, -x1, +x1, ...``."""
    n = len(lo)
    hs = []
    names = []
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        hs.append(HalfSpace(-e, -float(lo[k])))
        hs.append(HalfSpace(e, float(hi[k])))
        names += [f"x{k}-", f"x{k}+"]
    return make_polytope(hs, tol, ids=list(ids) if ids is not None else names)
