"""Parallel defect kernels, bouquet checks, index forms and direct sums.

Billiard loops stand in for geodesic loops in the double of the polytope.
All tangent data is read off in the ambient coordinates of the polytope.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .billiards import EPS_TIME, BilliardTrajectory, Collision, is_simple, segment_distance, transport
from .geom_core import EPS_GEOM, product

KERNEL_RTOL = 1e-8
INTERSECTION_TOL = 1e-8
STATIONARITY_TOL = 1e-9
ANGLE_TOL = 1e-6


class StabilityError(Exception):
    pass


class NotALoop(StabilityError):
    pass


class BasepointMismatch(StabilityError):
    pass


class Singular(StabilityError):
    def __init__(self, loop: int, time: float):
        super().__init__(f"loop {loop} has simultaneous collisions near normalized time {time:.9g}")
        self.loop = loop
        self.time = time


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


@dataclass(frozen=True, eq=False)
class LoopInDouble:
    trajectory: BilliardTrajectory
    start_sheet: int = 0

    def __post_init__(self) -> None:
        if not self.trajectory.is_loop():
            raise NotALoop("trajectory does not return to its start point")

    @property
    def collisions(self) -> int:
        return len(self.trajectory.collisions)

    @property
    def end_sheet(self) -> int:
        return (self.start_sheet + self.collisions) % 2

    @property
    def sheet_consistent(self) -> bool:
        return self.end_sheet == self.start_sheet

    @property
    def basepoint(self) -> np.ndarray:
        return self.trajectory.start

    @property
    def tangent_out(self) -> np.ndarray:
        return _unit(self.trajectory.velocity0)

    @property
    def tangent_in(self) -> np.ndarray:
        return _unit(self.trajectory.end_velocity)

    @property
    def transport(self) -> np.ndarray:
        return transport(self.trajectory).linear


@dataclass(frozen=True, eq=False)
class BouquetSpec:
    loops: tuple[LoopInDouble, ...]
    labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.loops:
            raise ValueError("a bouquet needs at least one loop")
        p = self.loops[0].basepoint
        for lp in self.loops[1:]:
            if np.linalg.norm(lp.basepoint - p) > 10 * EPS_GEOM:
                raise BasepointMismatch("loops do not share a basepoint")
        if not self.labels:
            object.__setattr__(self, "labels", tuple(f"loop{i}" for i in range(len(self.loops))))

    @property
    def dim(self) -> int:
        return self.loops[0].trajectory.dim

    @property
    def sheet_consistent(self) -> bool:
        return all(lp.sheet_consistent for lp in self.loops)


def defect_operator(loop: LoopInDouble) -> np.ndarray:
    """``P pi_0 - pi_1`` with ``pi_t`` projecting out the unit tangent at time ``t``."""
    n = loop.trajectory.dim
    u0, u1 = loop.tangent_out, loop.tangent_in
    return loop.transport @ (np.eye(n) - np.outer(u0, u0)) - (np.eye(n) - np.outer(u1, u1))


def kernel(D: np.ndarray, tol: float = KERNEL_RTOL) -> np.ndarray:
    """Orthonormal kernel basis as columns; singular values below ``tol * smax`` count as zero."""
    _, s, vt = np.linalg.svd(D)
    smax = s[0] if s.size and s[0] > 0 else 1.0
    if not s.size or s[0] == 0:
        return np.eye(D.shape[1])
    null = vt[np.concatenate([s, np.zeros(vt.shape[0] - s.size)]) <= tol * smax]
    return null.T.copy()


def predicted_kernel(
    c2_parity: int, fold_counts: Sequence[int], tangents: tuple[np.ndarray, np.ndarray], frame: np.ndarray | None = None
) -> np.ndarray:
    """Kernel predicted from the parity sequence of an origami tower.

    ``tangents`` are the initial and final unit velocities in the tower's own
    coordinates; ``frame`` is an optional orthogonal map placing the tower in
    ambient coordinates.
    """
    v0, v1 = (np.asarray(t, dtype=float) for t in tangents)
    n = v0.shape[0]
    cols = []
    v2 = v0 - (-1) ** (c2_parity % 2) * v1
    if np.linalg.norm(v2) > 1e-12:
        cols.append(_unit(v2))
    for m, c in enumerate(fold_counts, start=2):
        if c % 2 == 0:
            e = np.zeros(n)
            e[m] = 1.0
            cols.append(e)
    basis = np.array(cols).T if cols else np.zeros((n, 0))
    if frame is not None:
        basis = frame @ basis
    if basis.shape[1]:
        basis = np.linalg.qr(basis)[0]
    return basis


def principal_angle(A: np.ndarray, B: np.ndarray) -> float:
    """Largest principal angle between two column spaces; pi/2 if dimensions differ."""
    if A.shape[1] != B.shape[1]:
        return float(np.pi / 2)
    if A.shape[1] == 0:
        return 0.0
    return float(np.max(scipy.linalg.subspace_angles(A, B)))


def trivial_intersection(kernels: Sequence[np.ndarray], tol: float = INTERSECTION_TOL) -> bool:
    n = kernels[0].shape[0]
    stack = np.vstack([np.eye(n) - K @ K.T for K in kernels])
    return bool(np.linalg.svd(stack, compute_uv=False).min() > tol)


def stationarity_residual(b: BouquetSpec) -> float:
    """Norm of the summed unit tangents leaving the basepoint.

    Loops that change sheet pass straight through the basepoint in the
    double and contribute nothing.
    """
    total = np.zeros(b.dim)
    for lp in b.loops:
        if lp.sheet_consistent:
            total += lp.tangent_out - lp.tangent_in
    return float(np.linalg.norm(total))


def basepoint_directions(b: BouquetSpec) -> list[np.ndarray]:
    out = []
    for lp in b.loops:
        out += [lp.tangent_out, -lp.tangent_in]
    return out


def irreducibility_check(b: BouquetSpec, tol: float = ANGLE_TOL) -> bool:
    dirs = basepoint_directions(b)
    for u, v in itertools.combinations(dirs, 2):
        ang = float(np.arccos(np.clip(u @ v, -1.0, 1.0)))
        if ang <= tol or ang >= np.pi - tol:
            return False
    return True


def bouquet_simple(b: BouquetSpec, tol: float = EPS_GEOM) -> bool:
    """Each loop simple, and distinct loops meet only at the basepoint."""
    if not all(is_simple(lp.trajectory) for lp in b.loops):
        return False
    for la, lb in itertools.combinations(b.loops, 2):
        for sa, (a0, a1) in enumerate(sa_list := la.trajectory.segments()):
            for sb, (b0, b1) in enumerate(sb_list := lb.trajectory.segments()):
                at_a = sa in (0, len(sa_list) - 1)
                at_b = sb in (0, len(sb_list) - 1)
                if at_a and at_b:
                    da = (a1 - a0) if sa == 0 else (a0 - a1)
                    db = (b1 - b0) if sb == 0 else (b0 - b1)
                    c = float(_unit(da) @ _unit(db))
                    if c >= 1 - 1e-12:
                        return False
                    # rays from the shared basepoint meet only there unless parallel
                    continue
                if segment_distance(a0, a1, b0, b1) <= tol:
                    return False
    return True


def direct_sum(F: BouquetSpec, G: BouquetSpec, labels: tuple[str, str] = ("A", "B")) -> BouquetSpec:
    """Pair the loops of two bouquets into product loops on the normalized time [0, 1]."""
    if len(F.loops) != len(G.loops):
        raise ValueError("bouquets must have the same number of loops")
    P = F.loops[0].trajectory.polytope
    Q = G.loops[0].trajectory.polytope
    PQ = product(P, Q, labels)
    loops = []
    for i, (la, lb) in enumerate(zip(F.loops, G.loops)):
        ta, tb = la.trajectory, lb.trajectory
        na, nb = ta.normalized_collision_times(), tb.normalized_collision_times()
        for x in na:
            for y in nb:
                if abs(x - y) <= EPS_TIME:
                    raise Singular(i, float(x))
        va = ta.velocity0 * (ta.t1 - ta.t0)
        vb = tb.velocity0 * (tb.t1 - tb.t0)
        events = sorted([(float(x), 0, c) for x, c in zip(na, ta.collisions)] + [(float(y), 1, c) for y, c in zip(nb, tb.collisions)], key=lambda e: e[0])
        cols = []
        for s, side, c in events:
            pa = ta.position(ta.t0 + s * (ta.t1 - ta.t0))
            pb = tb.position(tb.t0 + s * (tb.t1 - tb.t0))
            if side == 0:
                pa = c.point
            else:
                pb = c.point
            cols.append(Collision(s, np.concatenate([pa, pb]), f"{labels[side]}:{c.facet}"))
        tr = BilliardTrajectory(PQ, 0.0, 1.0, np.concatenate([ta.start, tb.start]), np.concatenate([va, vb]), tuple(cols))
        loops.append(LoopInDouble(tr, (la.start_sheet + lb.start_sheet) % 2))
    names = tuple(f"{a}+{b}" for a, b in zip(F.labels, G.labels))
    return BouquetSpec(tuple(loops), names)


def min_collision_gap(a: BilliardTrajectory, b: BilliardTrajectory) -> float:
    na, nb = a.normalized_collision_times(), b.normalized_collision_times()
    if not len(na) or not len(nb):
        return float("inf")
    return float(np.min(np.abs(na[:, None] - nb[None, :])))


def twisted_tube_residual(loop: LoopInDouble) -> float:
    """Distance of the transport, in a tangent-first frame, from ``diag(1, -1, ..., -1)``."""
    u = loop.tangent_out
    n = u.shape[0]
    q, _ = np.linalg.qr(np.column_stack([u, np.eye(n)]))
    frame = q[:, :n]
    frame[:, 0] = u
    M = frame.T @ loop.transport @ frame
    target = -np.eye(n)
    target[0, 0] = 1.0
    return float(np.max(np.abs(M - target)))


def twisted_tube_certificate(loop: LoopInDouble, tol: float = 1e-9) -> bool:
    if not loop.sheet_consistent:
        return False
    if np.linalg.norm(loop.tangent_out - loop.tangent_in) > tol:
        return False
    return twisted_tube_residual(loop) <= tol


# ---------------------------------------------------------------------------
# discretized index forms


def _normal_basis(u: np.ndarray) -> np.ndarray:
    n = u.shape[0]
    q, _ = np.linalg.qr(np.column_stack([u, np.eye(n)]))
    return q[:, 1:n]


@dataclass(frozen=True, eq=False)
class IndexFormQuadrature:
    """Piecewise-linear normal fields along each unfolded loop.

    Parameters are the basepoint vector followed by the interior nodal
    normal values of each loop.  Parallel fields are constant in the
    unfolded frame, so the covariant derivative is a plain difference.
    """

    stiffness: np.ndarray
    mass: np.ndarray
    elements: tuple[int, ...]
    eigenvalues: np.ndarray
    kernel_dim: int
    constraint_nullity: int

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues[0]) if self.eigenvalues.size else float("inf")

    def energy(self, x: np.ndarray) -> float:
        return float(x @ self.stiffness @ x)


def _node_blocks(loop: LoopInDouble, elements: int, n: int, offset: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per node: (parameter columns, n x len(columns) map to the nodal value)."""
    u = loop.tangent_out
    proj = np.eye(n) - np.outer(u, u)
    E = _normal_basis(u)
    w_cols = np.arange(n)
    out = [(w_cols, proj)]
    for j in range(1, elements):
        c = offset + (j - 1) * (n - 1)
        out.append((np.arange(c, c + n - 1), E))
    out.append((w_cols, proj @ loop.transport.T))
    return out


def index_form(b: BouquetSpec, grid: int = 32, rtol: float = 1e-9) -> IndexFormQuadrature:
    """Assemble ``sum_i int_0^1 |(V_i^perp)'|^2`` on piecewise-linear normal fields.

    Each loop is unfolded into a straight line.  Fields agree with a common
    vector at the basepoint; at the end of a loop that vector is read
    through the inverse transport.  The spectrum is taken relative to the L2
    mass of the normal field, on the parameters that the field depends on.
    """
    if grid < 8:
        raise ValueError("grid must be at least 8 elements per segment")
    n = b.dim
    elems = tuple(grid * (lp.collisions + 1) for lp in b.loops)
    total = n + sum((e - 1) * (n - 1) for e in elems)
    K = np.zeros((total, total))
    M = np.zeros((total, total))
    offset = n
    ends = []
    for lp, e in zip(b.loops, elems):
        nodes = _node_blocks(lp, e, n, offset)
        ends += [nodes[0][1], nodes[-1][1]]
        offset += (e - 1) * (n - 1)
        h = 1.0 / e
        for (ca, A), (cb, B) in zip(nodes[:-1], nodes[1:]):
            cols = np.concatenate([ca, cb])
            D = np.hstack([-A, B])
            S = np.hstack([A, B])
            idx = np.ix_(cols, cols)
            np.add.at(K, idx, D.T @ D / h)
            # consistent P1 mass: h/6 (2|a|^2 + 2|b|^2 + 2 a.b)
            AB = np.hstack([A, np.zeros_like(B)]), np.hstack([np.zeros_like(A), B])
            Ml = (2 * AB[0].T @ AB[0] + 2 * AB[1].T @ AB[1] + AB[0].T @ AB[1] + AB[1].T @ AB[0]) * h / 6.0
            np.add.at(M, idx, Ml)
    # parameters the field ignores: basepoint vectors killed by every end map
    Wend = np.vstack(ends)
    _, s, vt = np.linalg.svd(Wend)
    rank_w = int(np.sum(s > 1e-10 * max(s[0], 1.0)))
    U = np.zeros((total, total - (n - rank_w)))
    U[:n, :rank_w] = vt[:rank_w].T
    U[n:, rank_w:] = np.eye(total - n)
    Kr = U.T @ K @ U
    Mr = U.T @ M @ U
    w = scipy.linalg.eigh(0.5 * (Kr + Kr.T), 0.5 * (Mr + Mr.T), eigvals_only=True)
    scale = max(1.0, float(np.max(np.abs(w))))
    kdim = int(np.sum(np.abs(w) <= rtol * scale))
    return IndexFormQuadrature(K, M, elems, w, kdim, n - rank_w)


def _normal_energy(vals: np.ndarray, u: np.ndarray, h: float) -> float:
    d = np.diff(vals, axis=0)
    d = d - np.outer(d @ u, u)
    return float(np.sum(d * d) / h)


def superadditivity_check(F: BouquetSpec, G: BouquetSpec, trials: int = 100, seed: int = 0, grid: int = 16) -> float:
    """Smallest ``Q_sum(W) - Q_F(U) - Q_G(V)`` over random fields; should be >= 0.

    Fields live in the unfolded product frame on a common normalized grid.
    """
    S = direct_sum(F, G)
    rng = np.random.default_rng(seed)
    nf = F.dim
    worst = float("inf")
    for _ in range(trials):
        w0 = rng.standard_normal(S.dim)
        total = 0.0
        for lp, la, lb in zip(S.loops, F.loops, G.loops):
            m = grid * (lp.collisions + 1)
            vals = rng.standard_normal((m + 1, S.dim))
            vals[0] = w0
            vals[-1] = lp.transport.T @ w0
            h = 1.0 / m
            q_sum = _normal_energy(vals, lp.tangent_out, h)
            q_f = _normal_energy(vals[:, :nf], la.tangent_out, h)
            q_g = _normal_energy(vals[:, nf:], lb.tangent_out, h)
            total += q_sum - q_f - q_g
        worst = min(worst, total)
    return worst


@dataclass(frozen=True)
class StabilityCertificate:
    kernels: tuple[np.ndarray, ...]
    predicted: tuple[np.ndarray | None, ...]
    prediction_angles: tuple[float | None, ...]
    trivial_intersection: bool
    stationarity_residual: float
    irreducible: bool
    simple: bool
    sheet_consistent: bool
    index_form_min_eigenvalue: float | None
    kernel_dim_of_form: int | None
    seed: int = 0
    notes: dict = field(default_factory=dict)

    @property
    def verdict(self) -> bool:
        return self.trivial_intersection and self.stationarity_residual <= STATIONARITY_TOL and self.sheet_consistent

    def to_json(self) -> dict:
        return {
            "kernels": [{"dim": int(K.shape[1]), "basis": K.T.tolist()} for K in self.kernels],
            "predicted": [None if K is None else {"dim": int(K.shape[1]), "basis": K.T.tolist()} for K in self.predicted],
            "prediction_angles": list(self.prediction_angles),
            "trivial_intersection": self.trivial_intersection,
            "stationarity_residual": self.stationarity_residual,
            "irreducible": self.irreducible,
            "simple": self.simple,
            "sheet_consistent": self.sheet_consistent,
            "index_form_min_eigenvalue": self.index_form_min_eigenvalue,
            "kernel_dim_of_form": self.kernel_dim_of_form,
            "seed": self.seed,
            "verdict": "pass" if self.verdict else "fail",
            "notes": self.notes,
        }


def certify_bouquet(
    b: BouquetSpec,
    predicted: Sequence[np.ndarray | None] | None = None,
    grid: int | None = None,
    seed: int = 0,
) -> StabilityCertificate:
    kernels = tuple(kernel(defect_operator(lp)) for lp in b.loops)
    preds = tuple(predicted) if predicted is not None else tuple(None for _ in b.loops)
    angles = tuple(None if p is None else principal_angle(k, p) for k, p in zip(kernels, preds))
    form = index_form(b, grid) if grid else None
    return StabilityCertificate(
        kernels=kernels,
        predicted=preds,
        prediction_angles=angles,
        trivial_intersection=trivial_intersection(kernels),
        stationarity_residual=stationarity_residual(b),
        irreducible=irreducibility_check(b),
        simple=bouquet_simple(b),
        sheet_consistent=b.sheet_consistent,
        index_form_min_eigenvalue=None if form is None else form.min_eigenvalue,
        kernel_dim_of_form=None if form is None else form.kernel_dim,
        seed=seed,
    )
