"""Height bookkeeping, folded trajectories and origami models.

An origami model lifts a billiard trajectory in ``X`` to a trajectory in a
beveling of ``X``.  Horizontal segments of the lift project onto the base
trajectory; crease-like segments run between the two wedge facets of a
folded facet and stand in for the collision with it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, TypeVar

import numpy as np

from .beveling import FLAT, Beveling, BevelingError, bevel, cross_section
from .billiards import (
    BilliardError,
    BilliardTrajectory,
    Collision,
    is_simple,
    simulate,
)
from .geom_core import EPS_GEOM, Polytope

HORIZONTAL_RATIO = 1e-10


class OrigamiError(Exception):
    pass


class PreconditionFailed(OrigamiError):
    def __init__(self, which: str, detail: str = ""):
        super().__init__(f"precondition {which!r} failed" + (f": {detail}" if detail else ""))
        self.which = which
        self.detail = detail


class IncompleteModel(OrigamiError):
    pass


class NotFolded(OrigamiError):
    def __init__(self, index: int, detail: str = ""):
        super().__init__(f"collision {index} breaks the folded pattern" + (f": {detail}" if detail else ""))
        self.index = index


class FinalSegmentCreaseLike(OrigamiError):
    pass


class AssertionFailed(OrigamiError):
    def __init__(self, which: str, value: float | None = None):
        super().__init__(f"certificate {which!r} failed" + (f" (value {value!r})" if value is not None else ""))
        self.which = which
        self.value = value


class DeltaSearchFailed(OrigamiError):
    pass


@dataclass(frozen=True)
class HeightProfile:
    H: tuple[float, ...]
    delta: float
    hmax: float
    hmin: float
    general_position: bool
    closed: bool

    @property
    def threshold(self) -> float:
        """Isolation radius ``delta + hmax - hmin``."""
        return self.delta + self.hmax - self.hmin


def height_profile(h: Mapping[str, float], tr: BilliardTrajectory, tol: float = EPS_GEOM) -> HeightProfile:
    H = [0.0]
    delta = 0.0
    general = True
    for c in tr.collisions:
        prev = H[-1]
        if c.facet in h:
            if abs(h[c.facet] - prev) <= tol:
                general = False
            H.append(2.0 * h[c.facet] - prev)
            delta = max(delta, abs(h[c.facet] - H[-1]))
        else:
            H.append(prev)
    return HeightProfile(tuple(H), delta, max(H), min(H), general, abs(H[-1]) <= tol)


@dataclass(frozen=True)
class IsolationResult:
    ok: bool
    point: np.ndarray | None = None
    facets: tuple[str, str] | None = None

    def __bool__(self) -> bool:
        return self.ok


def _near_interval(d0: float, d1: float, r: float) -> tuple[float, float] | None:
    """Parameters ``s`` in [0,1] with ``(1-s) d0 + s d1 <= r``."""
    if d0 <= r and d1 <= r:
        return 0.0, 1.0
    if d0 > r and d1 > r:
        return None
    s = (r - d0) / (d1 - d0)
    return (0.0, s) if d0 <= r else (s, 1.0)


def check_isolated_collisions(tr: BilliardTrajectory, profile: HeightProfile) -> IsolationResult:
    """Every point must be within the isolation radius of at most one hyperplane.

    Slacks are affine along a segment, so the near set of each hyperplane is
    an interval and the check reduces to pairwise interval overlaps.
    """
    P = tr.polytope
    r = profile.threshold
    for p, q in tr.segments():
        d0, d1 = P.slacks(p), P.slacks(q)
        spans = [(_near_interval(a, b, r), fid) for a, b, fid in zip(d0, d1, P.ids)]
        spans = [(iv, fid) for iv, fid in spans if iv is not None]
        for i in range(len(spans)):
            for j in range(i + 1, len(spans)):
                (a0, a1), fa = spans[i]
                (b0, b1), fb = spans[j]
                lo, hi = max(a0, b0), min(a1, b1)
                if lo <= hi:
                    # the summed slack is affine, so its minimum sits at an end
                    ia, ib = P.index(fa), P.index(fb)
                    tot = [(1 - s) * (d0[ia] + d0[ib]) + s * (d1[ia] + d1[ib]) for s in (lo, hi)]
                    s = lo if tot[0] <= tot[1] else hi
                    return IsolationResult(False, p + (q - p) * s, (fa, fb))
    return IsolationResult(True)


@dataclass(frozen=True)
class SegmentClass:
    kinds: tuple[str, ...]  # "horizontal" or "crease"
    folds: tuple[str | None, ...]  # base facet folded around, for creases
    heights: tuple[float | None, ...]  # height of horizontal segments

    @property
    def final_crease(self) -> bool:
        return bool(self.kinds) and self.kinds[-1] == "crease"


def _is_horizontal(v: np.ndarray) -> bool:
    return abs(v[-1]) <= HORIZONTAL_RATIO * float(np.linalg.norm(v))


def classify_segments(b: Beveling, lifted: BilliardTrajectory) -> SegmentClass:
    vel = lifted.velocities
    knots = lifted.knots
    cols = lifted.collisions
    kinds: list[str] = []
    folds: list[str | None] = []
    heights: list[float | None] = []
    if not _is_horizontal(vel[0]):
        raise NotFolded(0, "first segment is not horizontal")
    i = 0
    seg = 0
    kinds.append("horizontal")
    folds.append(None)
    heights.append(float(knots[0][1][-1]))
    while i < len(cols):
        fid = cols[i].facet
        base_f, tag = b.inheritance[fid]
        if tag == FLAT:
            seg += 1
            if not _is_horizontal(vel[seg]):
                raise NotFolded(i, "vertical facet produced a non-horizontal segment")
            kinds.append("horizontal")
            folds.append(None)
            heights.append(float(knots[seg][1][-1]))
            i += 1
            continue
        seg += 1
        if _is_horizontal(vel[seg]):
            raise NotFolded(i, "wedge collision did not start a crease")
        kinds.append("crease")
        folds.append(base_f)
        heights.append(None)
        if i + 1 == len(cols):
            break
        if cols[i + 1].facet != b.partner(fid):
            raise NotFolded(i + 1, f"crease around {base_f!r} ended on {cols[i + 1].facet!r}")
        seg += 1
        if not _is_horizontal(vel[seg]):
            raise NotFolded(i + 1, "segment after a crease is not horizontal")
        kinds.append("horizontal")
        folds.append(None)
        heights.append(float(knots[seg][1][-1]))
        i += 2
    return SegmentClass(tuple(kinds), tuple(folds), tuple(heights))


def simulated_sequence(b: Beveling, classes: SegmentClass, lifted: BilliardTrajectory) -> tuple[str, ...]:
    """Base facets whose collisions the lifted trajectory simulates, in order."""
    out = []
    i = 0
    cols = lifted.collisions
    while i < len(cols):
        base_f, tag = b.inheritance[cols[i].facet]
        out.append(base_f)
        i += 1 if tag == FLAT else 2
    return tuple(out)


@dataclass(frozen=True, eq=False)
class OrigamiModel:
    base: Polytope
    trajectory: BilliardTrajectory
    beveling: Beveling
    lifted: BilliardTrajectory
    classes: SegmentClass
    profile: HeightProfile
    simulated: tuple[str, ...]
    complete: bool

    @property
    def heights(self) -> Mapping[str, float]:
        return self.beveling.heights


def precondition_failure(X: Polytope, tr: BilliardTrajectory, h: Mapping[str, float]) -> tuple[str, str] | None:
    """Name and detail of the first failing precondition, or None.

    Only base data is used, so this is cheap enough to drive a search over
    height scales.
    """
    seq = tr.facet_sequence
    if len(set(seq)) != len(seq):
        return "single_collision", "a facet is hit more than once"
    prof = height_profile(h, tr, X.tol)
    if not prof.general_position:
        return "general_position", f"H = {list(prof.H)}"
    if not prof.closed:
        return "closed", f"final height {prof.H[-1]}"
    iso = check_isolated_collisions(tr, prof)
    if not iso.ok:
        return "isolated_collisions", f"point {np.round(iso.point, 9).tolist()} near {iso.facets}"
    # a folded facet the path never hits must stay clear of its wedges
    pts = np.array([tr.start] + [c.point for c in tr.collisions] + [tr.end])
    for f in h:
        if f in seq:
            continue
        hs = X.halfspace(f)
        pull = max(abs(prof.hmax - h[f]), abs(prof.hmin - h[f]))
        if float(np.min(hs.offset - pts @ hs.normal)) <= pull + X.tol:
            return "unhit_clearance", f"path comes within {pull} of unhit folded facet {f!r}"
    end = tr.end
    for f in set(seq):
        if abs(X.halfspace(f).signed_distance(end)) <= 2.0 * prof.delta:
            return "endpoint_clearance", f"endpoint within 2*delta of {f!r}"
    for f in h:
        hs = X.halfspace(f)
        if hs.offset - hs.normal @ tr.start - abs(h[f]) <= X.tol:
            return "start_interior", f"start point not inside the section at height 0 near {f!r}"
    return None


def build_origami_model(
    X: Polytope,
    tr: BilliardTrajectory,
    folded: Iterable[str],
    h: Mapping[str, float],
    beveling: Beveling | None = None,
) -> OrigamiModel:
    """Lift ``tr`` into the beveling of ``X`` and check it folds as intended.

    A prebuilt ``beveling`` with the same folded set and heights may be
    passed to skip rebuilding it.
    """
    folded = frozenset(folded)
    if set(h) != folded:
        raise PreconditionFailed("heights_domain", "heights must be given exactly on the folded set")
    fail = precondition_failure(X, tr, h)
    if fail is not None:
        raise PreconditionFailed(*fail)
    if beveling is not None:
        if beveling.folded != folded or any(abs(beveling.heights[f] - h[f]) > X.tol for f in folded):
            raise PreconditionFailed("heights_domain", "prebuilt beveling does not match the heights")
        b = beveling
    else:
        b = bevel(X, folded, h)
    section = cross_section(b, 0.0)
    if not section.contains(tr.start):
        raise PreconditionFailed("start_interior", "start point outside the section at height 0")
    prof = height_profile(h, tr, X.tol)
    start = np.append(tr.start, 0.0)
    vel = np.append(tr.velocity0, 0.0)
    lifted = simulate(b.lifted, start, vel, tr.length, t0=tr.t0)
    classes = classify_segments(b, lifted)
    seq = simulated_sequence(b, classes, lifted)
    if seq != tr.facet_sequence[: len(seq)]:
        raise IncompleteModel(f"simulated collisions {seq} diverge from {tr.facet_sequence}")
    lseq = lifted.facet_sequence
    if len(set(lseq)) != len(lseq):
        raise IncompleteModel("the lifted trajectory hits a facet twice")
    complete = (
        seq == tr.facet_sequence
        and not classes.final_crease
        and np.linalg.norm(lifted.end - np.append(tr.end, 0.0)) <= 10 * X.tol
        and np.linalg.norm(lifted.end_velocity - np.append(tr.end_velocity, 0.0)) <= 1e-9 * tr.speed
    )
    if not complete:
        raise IncompleteModel("the lifted trajectory does not close up on the base trajectory")
    return OrigamiModel(X, tr, b, lifted, classes, prof, seq, True)


T = TypeVar("T")


def search_delta(
    attempt: Callable[[float], T],
    delta0: float,
    min_delta: float = 1e-6,
    precheck: Callable[[float], str | None] | None = None,
) -> tuple[float, T]:
    """Halve ``delta`` from ``delta0`` until ``attempt(delta)`` succeeds.

    ``precheck`` may reject a value cheaply before the full attempt runs.
    """
    delta = delta0
    last: Exception | str | None = None
    while delta >= min_delta:
        why = precheck(delta) if precheck is not None else None
        if why is None:
            try:
                return delta, attempt(delta)
            except (OrigamiError, BevelingError, BilliardError) as exc:
                last = exc
        else:
            last = why
        delta *= 0.5
    raise DeltaSearchFailed(f"no admissible height scale down to {min_delta}: {last}")


def flatten(m: OrigamiModel) -> BilliardTrajectory:
    """Project the lifted trajectory back to ``X``, extending creases to the facets."""
    if m.classes.final_crease:
        raise FinalSegmentCreaseLike("the last lifted segment is crease-like")
    n = m.base.dim
    lifted = m.lifted
    knots = lifted.knots
    vel = lifted.velocities
    start = knots[0][1][:n]
    v0 = vel[0][:n]
    speed = float(np.linalg.norm(v0))
    points: list[tuple[np.ndarray, str]] = []
    seg = 0
    i = 0
    cols = lifted.collisions
    while i < len(cols):
        base_f, tag = m.beveling.inheritance[cols[i].facet]
        if tag == FLAT:
            points.append((cols[i].point[:n], base_f))
            seg += 1
            i += 1
            continue
        hs = m.base.halfspace(base_f)
        p = knots[seg][1][:n]
        u = vel[seg][:n]
        s = (hs.offset - hs.normal @ p) / (hs.normal @ u)
        points.append((p + s * u, base_f))
        seg += 2
        i += 2
    collisions = []
    t = lifted.t0
    prev = start
    for x, f in points:
        t += float(np.linalg.norm(x - prev)) / speed
        collisions.append(Collision(t, x, f))
        prev = x
    end = knots[-1][1][:n]
    t_end = t + float(np.linalg.norm(end - prev)) / speed
    return BilliardTrajectory(m.base, lifted.t0, t_end, start, v0, tuple(collisions))


@dataclass(frozen=True)
class DeviationReport:
    crease_distances: tuple[float, ...]
    crease_variation: float
    horizontal_heights: tuple[float, ...]
    height_error: float
    max_deviation: float
    horizontal_deviation: float
    height_range: tuple[float, float]
    flatten_point_error: float
    flatten_length_error: float

    def to_json(self) -> dict:
        return {
            "crease_distances": list(self.crease_distances),
            "crease_variation": self.crease_variation,
            "horizontal_heights": list(self.horizontal_heights),
            "height_error": self.height_error,
            "max_deviation": self.max_deviation,
            "horizontal_deviation": self.horizontal_deviation,
            "height_range": list(self.height_range),
            "flatten_point_error": self.flatten_point_error,
            "flatten_length_error": self.flatten_length_error,
        }


def deviation_report(m: OrigamiModel, samples: int = 1000, tol: float = EPS_GEOM) -> DeviationReport:
    n = m.base.dim
    prof = m.profile
    lifted = m.lifted
    segs = lifted.segments()
    dists = []
    variation = 0.0
    hz = []
    for (p, q), kind, fold, height in zip(segs, m.classes.kinds, m.classes.folds, m.classes.heights):
        if kind == "crease":
            hs = m.base.halfspace(fold)
            d = [hs.offset - hs.normal @ p[:n], hs.offset - hs.normal @ q[:n]]
            variation = max(variation, abs(d[0] - d[1]))
            dists.append(float(d[0]))
        else:
            hz.append(float(height))
    if variation > tol:
        raise AssertionFailed("crease_constant_distance", variation)
    if dists and (min(dists) <= 0.0 or max(dists) > prof.delta + tol):
        raise AssertionFailed("crease_distance_bounds", min(dists) if min(dists) <= 0 else max(dists))
    if len(hz) != len(prof.H):
        raise AssertionFailed("horizontal_count", float(len(hz)))
    herr = float(np.max(np.abs(np.array(hz) - np.array(prof.H))))
    if herr > tol:
        raise AssertionFailed("horizontal_heights", herr)
    base = m.trajectory
    ts = np.linspace(lifted.t0, lifted.t1, samples)
    worst = 0.0
    worst_h = 0.0
    zs = []
    for t in ts:
        x = lifted.position(t)
        dev = float(np.linalg.norm(x[:n] - base.position(t)))
        worst = max(worst, dev)
        k = lifted.segment_index(t)
        if m.classes.kinds[k] == "horizontal":
            worst_h = max(worst_h, dev)
        zs.append(x[-1])
    lz = [p[-1] for _, p in lifted.knots]
    zlo, zhi = float(min(min(zs), min(lz))), float(max(max(zs), max(lz)))
    if worst > prof.delta + tol:
        raise AssertionFailed("deviation_bound", worst)
    if worst_h > 10 * tol:
        raise AssertionFailed("horizontal_deviation", worst_h)
    if zlo < prof.hmin - tol or zhi > prof.hmax + tol:
        raise AssertionFailed("height_range", zlo if zlo < prof.hmin - tol else zhi)
    flat = flatten(m)
    if flat.facet_sequence != base.facet_sequence:
        raise AssertionFailed("flatten_facets")
    perr = max((float(np.linalg.norm(a.point - b.point)) for a, b in zip(flat.collisions, base.collisions)), default=0.0)
    lerr = abs(flat.length - base.length)
    if perr > 10 * tol:
        raise AssertionFailed("flatten_points", perr)
    if lerr > tol:
        raise AssertionFailed("flatten_length", lerr)
    return DeviationReport(
        tuple(dists), float(variation), tuple(hz), herr, worst, worst_h, (zlo, zhi), perr, float(lerr)
    )


@dataclass(frozen=True)
class SimplicityResult:
    simple: bool
    path: str  # "neighbourhood" or "direct"

    def __bool__(self) -> bool:
        return self.simple


def neighbourhood_hypothesis(m: OrigamiModel) -> bool:
    """Near each collided facet, only the two adjacent segments may come within ``delta``."""
    base = m.trajectory
    if not is_simple(base):
        return False
    segs = base.segments()
    radius = m.profile.delta
    for i, c in enumerate(base.collisions):
        hs = m.base.halfspace(c.facet)
        for j, (p, q) in enumerate(segs):
            if j in (i, i + 1):
                continue
            if min(hs.offset - hs.normal @ p, hs.offset - hs.normal @ q) <= radius:
                return False
    return True


def check_simplicity_transfer(m: OrigamiModel) -> SimplicityResult:
    if neighbourhood_hypothesis(m):
        return SimplicityResult(is_simple(m.lifted), "neighbourhood")
    return SimplicityResult(is_simple(m.lifted), "direct")


def model_to_json(m: OrigamiModel) -> dict:
    return {
        "folded": sorted(m.beveling.folded),
        "heights": {f: float(v) for f, v in sorted(m.heights.items())},
        "profile": {
            "H": list(m.profile.H),
            "delta": m.profile.delta,
            "hmax": m.profile.hmax,
            "hmin": m.profile.hmin,
            "general_position": m.profile.general_position,
            "closed": m.profile.closed,
        },
        "classes": list(m.classes.kinds),
        "simulated": list(m.simulated),
        "complete": m.complete,
    }
