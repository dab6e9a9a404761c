"""Billiard trajectories in convex polytopes.

A trajectory is stored as a start point, an initial velocity and the list of
collisions; positions in between are recovered by straight-line motion.  The
parallel transport over a time window is the ordered product of the linear
parts of the facet reflections met in that window.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np

from .geom_core import (
    EPS_GEOM,
    DimensionMismatch,
    Isometry,
    Polytope,
    as_vec,
    reflect_about_facet,
)

EPS_TIME = 1e-7


class BilliardError(Exception):
    pass


class SkeletonHit(BilliardError):
    """The path reaches a point near two or more supporting hyperplanes."""

    def __init__(self, point: np.ndarray, facets: tuple[str, ...], partial: "BilliardTrajectory | None" = None):
        super().__init__(f"trajectory hits the skeleton at {np.round(point, 12).tolist()} (facets {facets})")
        self.point = point
        self.facets = facets
        self.partial = partial


class NoHit(BilliardError):
    pass


class SampleAtCollision(BilliardError):
    pass


@dataclass(frozen=True, eq=False)
class Collision:
    time: float
    point: np.ndarray
    facet: str


@dataclass(frozen=True, eq=False)
class BilliardTrajectory:
    polytope: Polytope
    t0: float
    t1: float
    start: np.ndarray
    velocity0: np.ndarray
    collisions: tuple[Collision, ...] = field(default=())

    @property
    def dim(self) -> int:
        return self.polytope.dim

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.velocity0))

    @property
    def length(self) -> float:
        return self.speed * (self.t1 - self.t0)

    @property
    def facet_sequence(self) -> tuple[str, ...]:
        return tuple(c.facet for c in self.collisions)

    @cached_property
    def velocities(self) -> list[np.ndarray]:
        """Velocity on each segment (one more entry than collisions)."""
        out = [np.asarray(self.velocity0, dtype=float)]
        for c in self.collisions:
            nu = self.polytope.halfspace(c.facet).normal
            v = out[-1]
            out.append(v - 2.0 * (v @ nu) * nu)
        return out

    @cached_property
    def knots(self) -> list[tuple[float, np.ndarray]]:
        """Segment endpoints as (time, point), start and end included."""
        pts = [(self.t0, np.asarray(self.start, dtype=float))]
        for c in self.collisions:
            pts.append((c.time, np.asarray(c.point, dtype=float)))
        last_t, last_p = pts[-1]
        pts.append((self.t1, last_p + self.velocities[-1] * (self.t1 - last_t)))
        return pts

    @property
    def end(self) -> np.ndarray:
        return self.knots[-1][1]

    @property
    def end_velocity(self) -> np.ndarray:
        return self.velocities[-1]

    def segments(self) -> list[tuple[np.ndarray, np.ndarray]]:
        k = self.knots
        return [(k[i][1], k[i + 1][1]) for i in range(len(k) - 1)]

    def segment_index(self, t: float) -> int:
        times = [c.time for c in self.collisions]
        return int(np.searchsorted(times, t, side="right"))

    def position(self, t: float) -> np.ndarray:
        i = self.segment_index(t)
        t_a, p_a = self.knots[i]
        return p_a + self.velocities[i] * (t - t_a)

    def velocity(self, t: float) -> np.ndarray:
        return self.velocities[self.segment_index(t)]

    def sample(self, count: int) -> tuple[np.ndarray, np.ndarray]:
        ts = np.linspace(self.t0, self.t1, count)
        return ts, np.array([self.position(t) for t in ts])

    def is_loop(self, tol: float = EPS_GEOM) -> bool:
        return bool(np.linalg.norm(self.end - self.start) <= tol * 10)

    def normalized_collision_times(self) -> np.ndarray:
        return np.array([(c.time - self.t0) / (self.t1 - self.t0) for c in self.collisions])

    def with_polytope(self, P: Polytope) -> "BilliardTrajectory":
        return BilliardTrajectory(P, self.t0, self.t1, self.start, self.velocity0, self.collisions)


def advance(P: Polytope, position: Iterable[float], velocity: Iterable[float]) -> Collision:
    """Earliest positive-time facet hit from ``position`` along ``velocity``.

    The returned collision time is measured from ``position``.
    """
    x = as_vec(position)
    v = as_vec(velocity)
    if x.shape[0] != P.dim or v.shape[0] != P.dim:
        raise DimensionMismatch("position/velocity dimension differs from polytope")
    speed = np.linalg.norm(v)
    if speed == 0.0:
        raise ValueError("zero velocity")
    rate = P.normals @ v
    slack = P.slacks(x)
    best_t = np.inf
    best = -1
    for i in range(len(rate)):
        if rate[i] <= 1e-15 * speed:
            continue
        t = slack[i] / rate[i]
        if t * speed <= P.tol:
            continue
        if t < best_t:
            best_t, best = t, i
    if best < 0 or not np.isfinite(best_t):
        raise NoHit("no facet ahead of the ray")
    hit = x + v * best_t
    near = np.abs(P.slacks(hit)) <= P.tol
    near[best] = True
    if np.count_nonzero(near) >= 2:
        raise SkeletonHit(hit, tuple(fid for fid, m in zip(P.ids, near) if m))
    return Collision(float(best_t), hit, P.ids[best])


def simulate(
    P: Polytope,
    start: Iterable[float],
    velocity: Iterable[float],
    length: float,
    t0: float = 0.0,
    max_collisions: int = 100000,
) -> BilliardTrajectory:
    """Billiard trajectory of exactly ``length`` arc length from ``start``.

    A hit landing exactly at the final time is treated as the endpoint, not
    as a collision.
    """
    x = as_vec(start)
    v = as_vec(velocity)
    speed = float(np.linalg.norm(v))
    if length <= 0:
        raise ValueError("length must be positive")
    t1 = t0 + length / speed
    t = t0
    pos = x.copy()
    vel = v.copy()
    cols: list[Collision] = []
    time_tol = P.tol / speed
    while True:
        try:
            c = advance(P, pos, vel)
        except SkeletonHit as exc:
            hit_t = t + float(np.linalg.norm(exc.point - pos)) / speed
            if hit_t >= t1 - time_tol:
                break
            partial = BilliardTrajectory(P, t0, hit_t, x, v, tuple(cols))
            raise SkeletonHit(exc.point, exc.facets, partial) from None
        if t + c.time >= t1 - time_tol:
            break
        t += c.time
        cols.append(Collision(t, c.point, c.facet))
        nu = P.halfspace(c.facet).normal
        vel = vel - 2.0 * (vel @ nu) * nu
        pos = c.point
        if len(cols) > max_collisions:
            raise NoHit("collision budget exhausted")
    return BilliardTrajectory(P, t0, t1, x, v, tuple(cols))


@dataclass(frozen=True, eq=False)
class TransportMap:
    linear: np.ndarray

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.linear))


def reflection_linear(P: Polytope, fid: str) -> np.ndarray:
    nu = P.halfspace(fid).normal
    return np.eye(P.dim) - 2.0 * np.outer(nu, nu)


def transport(tr: BilliardTrajectory, s: float | None = None, t: float | None = None) -> TransportMap:
    """Product of reflection linear parts for collisions strictly between ``s`` and ``t``."""
    s = tr.t0 if s is None else s
    t = tr.t1 if t is None else t
    if s > t:
        raise ValueError("need s <= t")
    tol = EPS_TIME * (tr.t1 - tr.t0)
    M = np.eye(tr.dim)
    for c in tr.collisions:
        if abs(c.time - s) <= tol or abs(c.time - t) <= tol:
            raise SampleAtCollision(f"sample time coincides with collision at {c.time}")
        if s < c.time < t:
            M = reflection_linear(tr.polytope, c.facet) @ M
    return TransportMap(M)


def classify_polygon_transport(tr: BilliardTrajectory) -> str:
    """``"reflection"`` for an odd number of collisions, else ``"rotation"``."""
    if tr.dim != 2:
        raise DimensionMismatch("classification applies to polygons only")
    kind = "reflection" if len(tr.collisions) % 2 else "rotation"
    det = transport(tr).det
    if (det < 0) != (kind == "reflection"):
        raise AssertionError("transport determinant disagrees with collision parity")
    return kind


def segment_distance(p0: np.ndarray, p1: np.ndarray, q0: np.ndarray, q1: np.ndarray) -> float:
    """Minimum distance between two closed segments in any dimension."""
    d1 = p1 - p0
    d2 = q1 - q0
    r = p0 - q0
    a = d1 @ d1
    e = d2 @ d2
    f = d2 @ r
    if a <= 1e-30 and e <= 1e-30:
        return float(np.linalg.norm(r))
    if a <= 1e-30:
        s, t = 0.0, np.clip(f / e, 0.0, 1.0)
    else:
        c = d1 @ r
        if e <= 1e-30:
            t, s = 0.0, np.clip(-c / a, 0.0, 1.0)
        else:
            b = d1 @ d2
            denom = a * e - b * b
            s = np.clip((b * f - c * e) / denom, 0.0, 1.0) if denom > 1e-30 * a * e else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t, s = 0.0, np.clip(-c / a, 0.0, 1.0)
            elif t > 1.0:
                t, s = 1.0, np.clip((b - c) / a, 0.0, 1.0)
    return float(np.linalg.norm(p0 + d1 * s - (q0 + d2 * t)))


def _retraces(v_in: np.ndarray, v_out: np.ndarray) -> bool:
    return bool(np.linalg.norm(v_in / np.linalg.norm(v_in) + v_out / np.linalg.norm(v_out)) <= 1e-9)


def is_simple(tr: BilliardTrajectory, tol: float = EPS_GEOM) -> bool:
    """Segment-pair intersection test.

    Consecutive segments may share their collision point; the first and last
    segments may share the basepoint of a loop.
    """
    segs = tr.segments()
    vel = tr.velocities
    k = len(segs)
    loop = tr.is_loop(tol)
    for i in range(k - 1):
        if _retraces(vel[i], vel[i + 1]):
            return False
    if loop and k >= 2 and _retraces(vel[-1], vel[0]):
        return False
    for i in range(k):
        for j in range(i + 2, k):
            if loop and i == 0 and j == k - 1:
                continue
            if segment_distance(*segs[i], *segs[j]) <= tol:
                return False
    return True


def unfold(tr: BilliardTrajectory) -> tuple[tuple[np.ndarray, np.ndarray], list[Isometry]]:
    """Straight segment plus the chain placing each reflected copy of the polytope.

    Entry ``i`` of the chain is ``R_1 R_2 ... R_{i+1}`` (affine reflections in
    the original coordinates); it maps the original polytope onto the copy
    that holds segment ``i+1`` of the unfolded line.
    """
    line = (np.asarray(tr.start, dtype=float), np.asarray(tr.start + tr.velocity0 * (tr.t1 - tr.t0), dtype=float))
    chain: list[Isometry] = []
    acc = Isometry.identity(tr.dim)
    for c in tr.collisions:
        acc = acc @ reflect_about_facet(tr.polytope, c.facet)
        chain.append(acc)
    return line, chain


def refold(tr: BilliardTrajectory, line: tuple[np.ndarray, np.ndarray], chain: list[Isometry], t: float) -> np.ndarray:
    """Map the unfolded line point at time ``t`` back into the polytope."""
    frac = (t - tr.t0) / (tr.t1 - tr.t0)
    p = line[0] + (line[1] - line[0]) * frac
    i = tr.segment_index(t)
    return chain[i - 1].inverse()(p) if i > 0 else p


def refold_deviation(tr: BilliardTrajectory, samples: int = 100) -> float:
    line, chain = unfold(tr)
    worst = 0.0
    for t in np.linspace(tr.t0, tr.t1, samples):
        worst = max(worst, float(np.linalg.norm(refold(tr, line, chain, t) - tr.position(t))))
    return worst


def trajectory_to_json(tr: BilliardTrajectory, polytope_ref: str = "polytope", samples: int = 0) -> dict:
    data = {
        "polytope": polytope_ref,
        "t0": tr.t0,
        "t1": tr.t1,
        "speed": tr.speed,
        "start": [float(c) for c in tr.start],
        "velocity0": [float(c) for c in tr.velocity0],
        "samples": [],
        "collisions": [
            {"time": c.time, "point": [float(v) for v in c.point], "facet": c.facet} for c in tr.collisions
        ],
    }
    if samples:
        _, pts = tr.sample(samples)
        data["samples"] = [[float(v) for v in p] for p in pts]
    return data


def trajectory_from_json(data: dict, P: Polytope) -> BilliardTrajectory:
    cols = tuple(
        Collision(float(c["time"]), np.array(c["point"], dtype=float), c["facet"]) for c in data["collisions"]
    )
    return BilliardTrajectory(
        P,
        float(data["t0"]),
        float(data["t1"]),
        np.array(data["start"], dtype=float),
        np.array(data["velocity0"], dtype=float),
        cols,
    )


def collisions_csv_rows(tr: BilliardTrajectory) -> list[list[str]]:
    rows = [["time", "facet"] + [f"x{i}" for i in range(tr.dim)]]
    for c in tr.collisions:
        rows.append([repr(c.time), c.facet] + [repr(float(v)) for v in c.point])
    return rows
