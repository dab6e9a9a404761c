"""Bevelings: lifting an n-polytope to an (n+1)-polytope with wedge facets.

A facet ``nu . x <= c`` in the folded set becomes the pair of half-spaces
``nu . x + (z - h) <= c`` and ``nu . x - (z - h) <= c``; every other facet
becomes the vertical prism ``nu . x <= c``.  The last coordinate is height.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

from .geom_core import (
    EPS_GEOM,
    EPS_UNIT,
    EmptyInterior,
    GeometryError,
    HalfSpace,
    Isometry,
    Polytope,
    RedundantFacet,
    Unbounded,
    _affine_rank,
    enumerate_vertices,
    make_polytope,
    reflection,
)

FLAT = "flat"
WEDGE_PLUS = "wedge_plus"
WEDGE_MINUS = "wedge_minus"

_SQRT2 = float(np.sqrt(2.0))


class BevelingError(Exception):
    pass


class InheritanceViolation(BevelingError):
    def __init__(self, facet_id: str):
        super().__init__(f"half-space {facet_id!r} supports no facet of the beveling")
        self.facet_id = facet_id


class DegenerateBeveling(BevelingError):
    pass


class EmptySection(BevelingError):
    pass


@dataclass(frozen=True, eq=False)
class WedgePair:
    facet: str
    height: float
    plus: HalfSpace
    minus: HalfSpace


def wedge(X: Polytope, f: str, height: float) -> WedgePair:
    h = X.halfspace(f)
    plus = HalfSpace(np.append(h.normal, 1.0) / _SQRT2, (h.offset + height) / _SQRT2)
    minus = HalfSpace(np.append(h.normal, -1.0) / _SQRT2, (h.offset - height) / _SQRT2)
    return WedgePair(f, float(height), plus, minus)


def vertical(X: Polytope, f: str) -> HalfSpace:
    h = X.halfspace(f)
    return HalfSpace(np.append(h.normal, 0.0), h.offset)


def plus_id(f: str) -> str:
    return f + "+"


def minus_id(f: str) -> str:
    return f + "-"


@dataclass(frozen=True, eq=False)
class Beveling:
    base: Polytope
    folded: frozenset[str]
    heights: Mapping[str, float]
    lifted: Polytope
    inheritance: Mapping[str, tuple[str, str]]

    @cached_property
    def sources(self) -> dict[str, tuple[str, ...]]:
        """Base facet id -> lifted facet ids inherited from it."""
        out: dict[str, list[str]] = {f: [] for f in self.base.ids}
        for lid, (f, _) in self.inheritance.items():
            out[f].append(lid)
        return {f: tuple(v) for f, v in out.items()}

    def wedge_pair(self, f: str) -> WedgePair:
        return wedge(self.base, f, self.heights[f])

    def partner(self, lifted_id: str) -> str | None:
        """The other wedge facet of the same base facet, if any."""
        f, tag = self.inheritance[lifted_id]
        if tag == FLAT:
            return None
        return minus_id(f) if tag == WEDGE_PLUS else plus_id(f)

    def to_json(self, base_ref: str = "base") -> dict:
        return {
            "base": base_ref,
            "folded": sorted(self.folded),
            "heights": {f: float(self.heights[f]) for f in sorted(self.heights)},
            "lifted": self.lifted.to_json(),
            "inheritance": {lid: list(self.inheritance[lid]) for lid in self.lifted.ids},
        }


def _match_inheritance(
    lifted: Polytope, sources: list[tuple[str, HalfSpace, str, str]]
) -> dict[str, tuple[str, str]]:
    out: dict[str, tuple[str, str]] = {}
    for lid, h in lifted.facets:
        hits = [
            (f, tag)
            for _, g, f, tag in sources
            if np.max(np.abs(g.normal - h.normal)) <= 1e3 * EPS_UNIT and abs(g.offset - h.offset) <= EPS_GEOM
        ]
        if len(hits) != 1:
            raise InheritanceViolation(lid)
        out[lid] = hits[0]
    return out


def bevel(X: Polytope, folded: Iterable[str], heights: Mapping[str, float], tol: float | None = None) -> Beveling:
    folded = frozenset(folded)
    if not folded:
        raise DegenerateBeveling("the folded facet set is empty")
    if set(heights) != set(folded):
        raise ValueError("heights must be given exactly on the folded facets")
    for f in folded:
        X.index(f)
    tol = X.tol if tol is None else tol
    sources: list[tuple[str, HalfSpace, str, str]] = []
    for f in X.ids:
        if f in folded:
            w = wedge(X, f, heights[f])
            sources.append((plus_id(f), w.plus, f, WEDGE_PLUS))
            sources.append((minus_id(f), w.minus, f, WEDGE_MINUS))
        else:
            sources.append((f, vertical(X, f), f, FLAT))
    try:
        lifted = make_polytope([(lid, h) for lid, h, _, _ in sources], tol)
    except RedundantFacet as exc:
        raise InheritanceViolation(exc.facet_id) from exc
    except (EmptyInterior, Unbounded) as exc:
        raise DegenerateBeveling(str(exc)) from exc
    inheritance = _match_inheritance(lifted, sources)
    return Beveling(X, folded, dict(heights), lifted, inheritance)


def cross_section(b: Beveling, r: float) -> Polytope:
    """Slice of the beveling at height ``r``, as an n-polytope.

    Folded facets are pulled inward by ``|r - h(F)|``.  Facets that become
    redundant in the slice are kept, since the slice is only used for
    membership and its ids must line up with the base.
    """
    facets = []
    for f, h in b.base.facets:
        off = h.offset - abs(r - b.heights[f]) if f in b.folded else h.offset
        facets.append((f, HalfSpace(h.normal, off)))
    normals = np.array([h.normal for _, h in facets])
    offsets = np.array([h.offset for _, h in facets])
    verts = enumerate_vertices(normals, offsets, b.base.tol)
    n = b.base.dim
    if _affine_rank(verts, b.base.tol) < n or np.min(offsets - normals @ verts.mean(axis=0)) <= b.base.tol:
        raise EmptySection(f"height {r} does not meet the interior of the beveling")
    lv = b.lifted.vertices
    if np.any(b.base.normals @ lv[:, :n].T - b.base.offsets[:, None] > 10 * b.base.tol):
        raise GeometryError("projection of the beveling leaves the base polytope")
    return Polytope(n, tuple(facets), b.base.tol, verts)


def rho(b: Beveling, f: str) -> Isometry:
    """Product of the reflections about the hyperplanes inherited from ``f``."""
    b.base.index(f)
    if f not in b.folded:
        return reflection(vertical(b.base, f))
    w = b.wedge_pair(f)
    a = reflection(w.plus) @ reflection(w.minus)
    c = reflection(w.minus) @ reflection(w.plus)
    if np.max(np.abs(a.linear - c.linear)) > 100 * EPS_UNIT or np.max(np.abs(a.shift - c.shift)) > EPS_GEOM:
        raise GeometryError("wedge reflections do not commute")
    return a


@dataclass(frozen=True)
class CompatibilityReport:
    pointwise: float
    block: float

    @property
    def residual(self) -> float:
        return max(self.pointwise, self.block)


def check_projection_compatibility(
    b: Beveling, f: str, samples: int = 1000, seed: int = 0
) -> CompatibilityReport:
    """Compare ``pr . rho_F`` with ``R_F . pr`` on random points of a bounding box."""
    n = b.base.dim
    r = rho(b, f)
    base_r = reflection(b.base.halfspace(f))
    rng = np.random.default_rng(seed)
    lv = b.lifted.vertices
    lo, hi = lv.min(axis=0) - 1.0, lv.max(axis=0) + 1.0
    pts = rng.uniform(lo, hi, size=(samples, n + 1))
    lhs = r.apply_many(pts)[:, :n]
    rhs = base_r.apply_many(pts[:, :n])
    pointwise = float(np.max(np.linalg.norm(lhs - rhs, axis=1)))
    expected = np.zeros((n + 1, n + 1))
    expected[:n, :n] = base_r.linear
    expected[n, n] = -np.sign(r.det)
    block = float(np.max(np.abs(r.linear - expected)))
    return CompatibilityReport(pointwise, block)
