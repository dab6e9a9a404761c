"""Parameterized builders for twisted towers and stable figure-eight bouquets.

Every builder returns a ``ConstructionResult`` holding the polytopes and
trajectories it produced, the expectations they must meet and a stage log.
``certify`` re-derives every check from that data alone, so a result read
back from JSON is verified without rebuilding it.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .beveling import BevelingError
from .billiards import EPS_TIME, BilliardError, BilliardTrajectory, is_simple, simulate, transport
from .billiards import trajectory_from_json, trajectory_to_json
from .geom_core import (
    EPS_GEOM,
    GeometryError,
    Isometry,
    Polytope,
    box,
    convex_union,
    polygon,
    product,
)
from .origami import (
    AssertionFailed,
    DeltaSearchFailed,
    OrigamiError,
    build_origami_model,
    check_simplicity_transfer,
    deviation_report,
    model_to_json,
    precondition_failure,
    search_delta,
)
from .transport_stability import (
    ANGLE_TOL,
    STATIONARITY_TOL,
    BouquetSpec,
    LoopInDouble,
    Singular,
    StabilityCertificate,
    certify_bouquet,
    defect_operator,
    direct_sum,
    index_form,
    kernel,
    predicted_kernel,
    principal_angle,
    superadditivity_check,
    trivial_intersection,
    twisted_tube_certificate,
    twisted_tube_residual,
)

SQRT2 = float(np.sqrt(2.0))
SQRT3 = float(np.sqrt(3.0))

FOLD_PATTERN = (1.0, 0.0, -1.0)
TRANSPORT_TOL = 1e-9
REFLECTION_TOL = 10 * EPS_GEOM
HOMOTHETY_TOL = 1e-6
HOMOTHETY_DELTAS = (0.02, 0.04, 0.08)

# rotation by pi about the line spanned by (0, 1, 1)
HALF_TURN = np.array([[-1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
# exchange of the second and third coordinates
SWAP_YZ = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
# transport of the second figure-eight loop after one lift, in its own frame
STAGE1_BETA_TRANSPORT = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, -1.0]])

# faces of the 3D figure-eight loops folded in the second lift
ALPHA_STAGE2 = ("CE", "EF+", "EF-")
BETA_STAGE2 = ("HI+", "HI-", "IJ")


class ConstructionError(Exception):
    pass


class StageFailed(ConstructionError):
    def __init__(self, stage: str, certificate: str, witness: str = ""):
        super().__init__(f"stage {stage!r} failed certificate {certificate!r}" + (f": {witness}" if witness else ""))
        self.stage = stage
        self.certificate = certificate
        self.witness = witness


class ValidationFailed(ConstructionError):
    def __init__(self, predicate: str, detail: str = ""):
        super().__init__(f"polygon data fails {predicate!r}" + (f": {detail}" if detail else ""))
        self.predicate = predicate
        self.detail = detail


class SingularSchedule(Singular):
    """Simultaneous collisions between direct-sum factors, with a suggested fix."""

    def __init__(self, loop: int, time: float, suggestion: str):
        super().__init__(loop, time)
        self.args = (f"{self.args[0]}; {suggestion}",)
        self.suggestion = suggestion


# ---------------------------------------------------------------------------
# result containers


@dataclass
class StageRecord:
    name: str
    description: str
    params: dict = field(default_factory=dict)
    report: dict = field(default_factory=dict)


@dataclass
class BouquetRecord:
    """Loops sharing a basepoint, with their kernel data.

    ``role`` is "stable" for bouquets whose own verdict must pass, "factor"
    for direct-sum factors (kernels only), "product" for direct sums (verdict
    taken factorwise) and "loop" for single loops checked for other reasons.
    """

    name: str
    loops: tuple[str, ...]
    start_sheets: tuple[int, ...]
    role: str
    predictions: tuple[dict | None, ...] = ()
    expected_kernels: tuple[np.ndarray | None, ...] = ()
    factors: tuple[str, ...] = ()


@dataclass
class Expectation:
    kind: str
    target: tuple[str, ...]
    value: Any = None
    frame: np.ndarray | None = None
    tol: float = TRANSPORT_TOL


@dataclass
class ConstructionResult:
    name: str
    params: dict = field(default_factory=dict)
    polytopes: dict[str, Polytope] = field(default_factory=dict)
    products: dict[str, tuple[str, str, tuple[str, str]]] = field(default_factory=dict)
    trajectories: dict[str, BilliardTrajectory] = field(default_factory=dict)
    trajectory_polytope: dict[str, str] = field(default_factory=dict)
    bouquets: dict[str, BouquetRecord] = field(default_factory=dict)
    expectations: list[Expectation] = field(default_factory=list)
    stages: list[StageRecord] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)
    main: str = ""

    @property
    def ok(self) -> bool:
        return not self.failures

    def add_polytope(self, name: str, P: Polytope) -> None:
        self.polytopes[name] = P

    def add_product(self, name: str, P: Polytope, left: str, right: str, labels: tuple[str, str]) -> None:
        self.polytopes[name] = P
        self.products[name] = (left, right, labels)

    def add_trajectory(self, name: str, tr: BilliardTrajectory, polytope: str) -> None:
        if self.polytopes.get(polytope) is not tr.polytope:
            tr = tr.with_polytope(self.polytopes[polytope])
        self.trajectories[name] = tr
        self.trajectory_polytope[name] = polytope

    def add_bouquet(self, rec: BouquetRecord) -> None:
        self.bouquets[rec.name] = rec

    def expect(self, kind: str, target: Sequence[str], value: Any = None, frame: np.ndarray | None = None, tol: float = TRANSPORT_TOL) -> None:
        self.expectations.append(Expectation(kind, tuple(target), value, frame, tol))

    def log(self, name: str, description: str, params: dict | None = None, report: dict | None = None) -> None:
        self.stages.append(StageRecord(name, description, params or {}, report or {}))

    def bouquet_spec(self, name: str) -> BouquetSpec:
        rec = self.bouquets[name]
        loops = tuple(LoopInDouble(self.trajectories[t], s) for t, s in zip(rec.loops, rec.start_sheets))
        return BouquetSpec(loops, rec.loops)

    def absorb(self, other: "ConstructionResult", prefix: str) -> None:
        """Copy every object of ``other`` under names prefixed by ``prefix/``."""
        p = lambda s: f"{prefix}/{s}"  # noqa: E731
        for k, P in other.polytopes.items():
            self.polytopes[p(k)] = P
        for k, (a, b, labels) in other.products.items():
            self.products[p(k)] = (p(a), p(b), labels)
        for k, tr in other.trajectories.items():
            self.trajectories[p(k)] = tr
            self.trajectory_polytope[p(k)] = p(other.trajectory_polytope[k])
        for rec in other.bouquets.values():
            self.bouquets[p(rec.name)] = BouquetRecord(
                p(rec.name), tuple(map(p, rec.loops)), rec.start_sheets, rec.role,
                rec.predictions, rec.expected_kernels, tuple(map(p, rec.factors)),
            )
        for e in other.expectations:
            self.expectations.append(Expectation(e.kind, tuple(map(p, e.target)), e.value, e.frame, e.tol))
        for s in other.stages:
            self.stages.append(StageRecord(p(s.name), s.description, s.params, s.report))
        self.failures += [p(f) for f in other.failures]

    # -- JSON -------------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "params": _plain(self.params),
            "main": self.main,
            "polytopes": {k: P.to_json() for k, P in self.polytopes.items() if k not in self.products},
            "products": {k: {"left": a, "right": b, "labels": list(lb)} for k, (a, b, lb) in self.products.items()},
            "trajectories": {
                k: trajectory_to_json(tr, self.trajectory_polytope[k]) for k, tr in self.trajectories.items()
            },
            "bouquets": [
                {
                    "name": r.name,
                    "loops": list(r.loops),
                    "start_sheets": list(r.start_sheets),
                    "role": r.role,
                    "predictions": [_plain(pr) for pr in r.predictions],
                    "expected_kernels": [None if K is None else K.T.tolist() for K in r.expected_kernels],
                    "factors": list(r.factors),
                }
                for r in self.bouquets.values()
            ],
            "expectations": [
                {
                    "kind": e.kind,
                    "target": list(e.target),
                    "value": _plain(e.value),
                    "frame": None if e.frame is None else np.asarray(e.frame).tolist(),
                    "tol": e.tol,
                }
                for e in self.expectations
            ],
            "stages": [
                {"name": s.name, "description": s.description, "params": _plain(s.params), "report": _plain(s.report)}
                for s in self.stages
            ],
            "failures": list(self.failures),
        }

    @staticmethod
    def from_json(data: Mapping) -> "ConstructionResult":
        res = ConstructionResult(data["name"], dict(data["params"]), main=data.get("main", ""))
        for k, pj in data["polytopes"].items():
            res.polytopes[k] = Polytope.from_json(pj)
        pending = dict(data.get("products", {}))
        while pending:
            ready = [k for k, v in pending.items() if v["left"] in res.polytopes and v["right"] in res.polytopes]
            if not ready:
                raise ValueError("product polytopes refer to unknown factors")
            for k in ready:
                v = pending.pop(k)
                labels = tuple(v["labels"])
                res.add_product(k, product(res.polytopes[v["left"]], res.polytopes[v["right"]], labels), v["left"], v["right"], labels)
        for k, tj in data["trajectories"].items():
            res.add_trajectory(k, trajectory_from_json(tj, res.polytopes[tj["polytope"]]), tj["polytope"])
        for r in data["bouquets"]:
            res.add_bouquet(
                BouquetRecord(
                    r["name"],
                    tuple(r["loops"]),
                    tuple(int(s) for s in r["start_sheets"]),
                    r["role"],
                    tuple(r["predictions"]),
                    tuple(None if K is None else np.array(K, dtype=float).T for K in r["expected_kernels"]),
                    tuple(r["factors"]),
                )
            )
        for e in data["expectations"]:
            frame = None if e["frame"] is None else np.array(e["frame"], dtype=float)
            res.expectations.append(Expectation(e["kind"], tuple(e["target"]), e["value"], frame, float(e["tol"])))
        for s in data["stages"]:
            res.stages.append(StageRecord(s["name"], s["description"], s["params"], s["report"]))
        res.failures = list(data["failures"])
        return res


def _plain(x: Any) -> Any:
    """Convert numpy containers to JSON-ready Python values."""
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, Mapping):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


# ---------------------------------------------------------------------------
# shared helpers


def _pad(v: Sequence[float], n: int) -> np.ndarray:
    out = np.zeros(n)
    out[: len(v)] = v
    return out


def _unit(v: np.ndarray) -> np.ndarray:
    return np.asarray(v, dtype=float) / float(np.linalg.norm(v))


def _scaled(pattern: Mapping[str, float], s: float) -> dict[str, float]:
    return {f: c * s for f, c in pattern.items()}


def _block(*mats: np.ndarray) -> np.ndarray:
    n = sum(m.shape[0] for m in mats)
    out = np.zeros((n, n))
    i = 0
    for m in mats:
        k = m.shape[0]
        out[i : i + k, i : i + k] = m
        i += k
    return out


def _axes(n: int, *idx: int) -> np.ndarray:
    return np.eye(n)[:, list(idx)]


def _prediction(c2: int, folds: Sequence[int], tr2: BilliardTrajectory, n: int, frame: np.ndarray | None = None) -> dict:
    return {
        "c2": int(c2),
        "folds": [int(f) for f in folds],
        "tangents": [_pad(_unit(tr2.velocity0), n).tolist(), _pad(_unit(tr2.end_velocity), n).tolist()],
        "frame": None if frame is None else np.asarray(frame).tolist(),
    }


def _lift(X: Polytope, tr: BilliardTrajectory, heights: Mapping[str, float], beveling=None):
    m = build_origami_model(X, tr, heights.keys(), heights, beveling)
    rep = deviation_report(m)
    simp = check_simplicity_transfer(m)
    if not simp.simple:
        raise AssertionFailed("lifted_simple")
    return m, rep, simp


def _scale_limit(X: Polytope, tr: BilliardTrajectory, pattern: Mapping[str, float]) -> float:
    """Largest scale at which the start point stays inside the height-0 section."""
    lim = float("inf")
    for f, c in pattern.items():
        if c:
            hs = X.halfspace(f)
            lim = min(lim, (hs.offset - float(hs.normal @ tr.start)) / abs(c))
    return lim


Problem = tuple[Polytope, BilliardTrajectory, Mapping[str, float]]


def _search(stage: str, delta0: float, problems: Sequence[Problem], attempt: Callable[[float], Any]) -> tuple[float, Any]:
    """Run the halving search for one stage.

    A requested scale at which the start point already leaves the height-0
    section is outside the admissible range; it fails outright with the
    first failing precondition as witness instead of being shrunk.
    """
    if not delta0 > 0:
        raise ValueError("height scale must be positive")

    def precheck(d: float) -> str | None:
        for X, tr, pat in problems:
            fail = precondition_failure(X, tr, _scaled(pat, d))
            if fail is not None:
                return f"{fail[0]}: {fail[1]}"
        return None

    if any(delta0 >= _scale_limit(X, tr, pat) for X, tr, pat in problems):
        why = precheck(delta0) or "start_interior: start point outside the height-0 section"
        name, _, detail = why.partition(": ")
        raise StageFailed(stage, name, detail)
    try:
        return search_delta(attempt, delta0, precheck=precheck)
    except DeltaSearchFailed as exc:
        raise StageFailed(stage, "delta_search", str(exc)) from exc


def _same_points(a: BilliardTrajectory, b: BilliardTrajectory, L: np.ndarray | None = None) -> float:
    """Largest distance between matching collision points, ``inf`` on count mismatch."""
    if len(a.collisions) != len(b.collisions):
        return float("inf")
    L = np.eye(a.dim) if L is None else L
    return max((float(np.linalg.norm(L @ c.point - d.point)) for c, d in zip(a.collisions, b.collisions)), default=0.0)


# ---------------------------------------------------------------------------
# twisted towers


def fagnano_seed() -> tuple[Polytope, BilliardTrajectory]:
    """Equilateral triangle of side 2 and its period-3 orbit through the edge midpoints."""
    T = polygon([(0.0, 0.0), (2.0, 0.0), (1.0, SQRT3)], ids=["F1", "F2", "F3"])
    # start halfway between two collision points so the loop closes in the interior
    tr = simulate(T, [0.75, SQRT3 / 4], [0.5, -SQRT3 / 2], 3.0)
    return T, tr


def twisted_tower(n: int = 3, delta: float = 0.05) -> ConstructionResult:
    if n < 3:
        raise ValueError("tower dimension must be at least 3")
    res = ConstructionResult("twisted_tower", {"n": n, "delta": delta}, main="tower")
    X, tr = fagnano_seed()
    res.add_polytope("X2", X)
    res.add_trajectory("beta2", tr, "X2")
    res.log("seed", "equilateral triangle with its medial period-3 loop", {}, {"facets": list(tr.facet_sequence)})
    d = delta
    for k in range(3, n + 1):
        stage = f"lift{k}"
        seq = tr.facet_sequence
        ids = list(seq) if k == 3 else [seq[i] for i in (0, 2, 4)]
        pat = dict(zip(ids, FOLD_PATTERN))
        d, (m, rep, simp) = _search(stage, d, [(X, tr, pat)], lambda s, X=X, tr=tr, pat=pat: _lift(X, tr, _scaled(pat, s)))
        res.add_polytope(f"X{k}", m.beveling.lifted)
        res.add_trajectory(f"beta{k}", m.lifted, f"X{k}")
        res.expect("origami", (f"X{k - 1}", f"beta{k - 1}", f"beta{k}"), {"heights": _scaled(pat, d)})
        res.log(
            stage,
            "bevel along three collided faces and lift the loop",
            {"delta": d, "faces": ids},
            {"deviation": rep.to_json(), "simplicity": simp.path, "model": model_to_json(m)},
        )
        X, tr = m.beveling.lifted, m.lifted
    res.params["deltas_used"] = [s.params["delta"] for s in res.stages[1:]]
    v = _unit(res.trajectories["beta2"].velocity0)
    frame = np.eye(n)
    frame[:2, 0] = v
    frame[:2, 1] = [-v[1], v[0]]
    target = -np.eye(n)
    target[0, 0] = 1.0
    top = f"beta{n}"
    res.expect("transport", (top,), target, frame)
    res.expect("collision_count", (top,), 3 * (n - 1))
    res.expect("single_hits", (top,))
    res.expect("simple", (top,))
    res.expect("sheet_consistent", (top,), n % 2 == 1)
    res.expect("twisted_tube", (top,), n % 2 == 1)
    pred = _prediction(3, [3] * (n - 2), res.trajectories["beta2"], n)
    res.add_bouquet(BouquetRecord("tower", (top,), (0,), "loop", (pred,), (frame[:, :1],)))
    if n == 3:
        res.expect("index_form", ("tower",), {"min_eigenvalue_ge": -1e-8, "kernel_dim": 0})
    return res


# ---------------------------------------------------------------------------
# figure-eight in dimension 3


def figure_eight_3d(delta: float = 0.08) -> ConstructionResult:
    res = ConstructionResult("figure_eight_3d", {"delta": delta}, main="figure_eight")
    Y = box([-2.0, -1.0], [0.0, 1.0], ids=["F2", "F0", "F3", "F1"])
    a2 = simulate(Y, [0.0, 0.0], [-1 / SQRT2, 1 / SQRT2], 4 * SQRT2)
    res.add_polytope("Y2", Y)
    res.add_trajectory("alpha2", a2, "Y2")
    pat = {"F1": 1.0, "F2": 0.0, "F3": -1.0}
    d, (m, rep, simp) = _search("alpha-lift", delta, [(Y, a2, pat)], lambda s: _lift(Y, a2, _scaled(pat, s)))
    res.params["delta_used"] = d
    Y3 = m.beveling.lifted
    res.add_polytope("Y3", Y3)
    res.add_trajectory("alpha3_model", m.lifted, "Y3")
    res.expect("origami", ("Y2", "alpha2", "alpha3_model"), {"heights": _scaled(pat, d)})
    res.expect("transport", ("alpha3_model",), np.diag([-1.0, 1.0, -1.0]))
    res.log("alpha-lift", "bevel the rectangle and lift its figure-eight half", {"delta": d}, {"deviation": rep.to_json(), "simplicity": simp.path})
    rho = Isometry.linear_map(HALF_TURN, relabel={f: "r" + f for f in Y3.ids})
    rY3 = rho.apply_to_polytope(Y3)
    try:
        X3 = convex_union(Y3, rY3)
    except GeometryError as exc:
        raise StageFailed("union", "convex_union", str(exc)) from exc
    res.add_polytope("rY3", rY3)
    res.add_polytope("X3", X3)
    res.expect("convex_union", ("Y3", "rY3", "X3"))
    lifted = m.lifted
    a3 = simulate(X3, lifted.start, lifted.velocity0, lifted.length)
    b3 = simulate(X3, HALF_TURN @ lifted.start, HALF_TURN @ lifted.velocity0, lifted.length)
    if _same_points(lifted, a3) > REFLECTION_TOL or _same_points(a3, b3, HALF_TURN) > REFLECTION_TOL:
        raise StageFailed("union", "loops_survive_union", "the union changes a lifted loop")
    res.add_trajectory("alpha3", a3, "X3")
    res.add_trajectory("beta3", b3, "X3")
    res.log("union", "glue the lifted rectangle to its half-turn image", {}, {"facets": len(X3.ids)})
    res.expect("invariant_set", ("alpha3", "beta3"), HALF_TURN)
    for t in ("alpha3", "beta3"):
        res.expect("collision_count", (t,), 6)
        res.expect("single_hits", (t,))
    preds = (_prediction(3, [3], a2, 3), _prediction(3, [3], a2, 3, HALF_TURN))
    res.add_bouquet(BouquetRecord("figure_eight", ("alpha3", "beta3"), (0, 0), "stable", preds, (_axes(3, 1), _axes(3, 2))))
    return res


# ---------------------------------------------------------------------------
# figure-eight in dimension 4: polygon data


def _hexagon(t: float, psi: float) -> tuple[list[np.ndarray], float]:
    """Hexagon symmetric about the x-axis carrying the odd half of the figure-eight.

    The loop leaves the origin up-left, hits AB at (-1, 1), travels ``t * sqrt2``
    to the lower-left edge EF (normal at angle ``pi + psi``) and meets the
    vertical edge CE on the x-axis; symmetry closes it up.
    """
    p2 = np.array([-1.0 - t, 1.0 - t])
    nrm = np.array([np.cos(np.pi + psi), np.sin(np.pi + psi)])
    vin = np.array([-1.0, -1.0]) / SQRT2
    vout = vin - 2 * (vin @ nrm) * nrm
    p3 = p2 + (-p2[1] / vout[1]) * vout
    c = float(p3[0])
    off = float(nrm @ p2)
    ey = (off - nrm[0] * c) / nrm[1]
    fx = (off + nrm[1]) / nrm[0]
    verts = [np.array([0.0, 1.0]), np.array([fx, 1.0]), np.array([c, -ey]), np.array([c, ey]), np.array([fx, -1.0]), np.array([0.0, -1.0])]
    length = 2 * (SQRT2 + t * SQRT2 + float(np.linalg.norm(p3 - p2)))
    return verts, length


def _pentagon(t: float, x_tip: float) -> list[np.ndarray]:
    """Pentagon symmetric about the x-axis carrying the even half of the figure-eight.

    The loop leaves the origin up-right, hits JA at (1, 1), travels
    ``t * sqrt2`` to HI, bounces off IJ and returns through (1, -1) on GH.
    Both slanted edges pass through the tip ``(x_tip, 0)``.
    """
    p = np.array([1.0 + t, 1.0 - t])
    tip = np.array([x_tip, 0.0])
    d1 = tip - p
    n1 = _unit(np.array([d1[1], -d1[0]]))
    if n1 @ np.array([1.0, -1.0]) < 0:
        n1 = -n1
    vin = np.array([1.0, -1.0]) / SQRT2
    v1 = vin - 2 * (vin @ n1) * n1
    n2 = _unit(v1 - np.array([-1.0, -1.0]) / SQRT2)
    e1 = np.array([n1[1], -n1[0]])
    e2 = np.array([n2[1], -n2[0]])
    H = tip + e1 * ((-1.0 - tip[1]) / e1[1])
    J = tip + e2 * ((1.0 - tip[1]) / e2[1])
    return [np.array([0.0, -1.0]), H, tip, J, np.array([0.0, 1.0])]


def solve_figure_eight_polygons(t_alpha: float = 1.8, psi_deg: float = 77.0, t_beta: float = 1.82) -> dict:
    """Solve the reflection-law and angle constraints for the two polygons.

    The odd loop fixes the common length; the tip of the pentagon is then
    placed so the even loop has the same length.
    """
    hexv, length = _hexagon(t_alpha, np.radians(psi_deg))
    x_tip = (length - 2 * SQRT2) / SQRT2
    pentv = _pentagon(t_beta, x_tip)
    return {
        "solver": {"t_alpha": t_alpha, "psi_deg": psi_deg, "t_beta": t_beta},
        "Y": {"vertices": [v.tolist() for v in hexv], "ids": ["AB", "BC", "CE", "EF", "FG", "GA"]},
        "Z": {"vertices": [v.tolist() for v in pentv], "ids": ["GH", "HI", "IJ", "JA", "AG"]},
        "alpha": {"start": [0.0, 0.0], "velocity": [-1 / SQRT2, 1 / SQRT2], "length": length},
        "beta": {"start": [0.0, 0.0], "velocity": [1 / SQRT2, 1 / SQRT2], "length": length},
        "alpha_heights": {"AB": 1.0, "EF": 1.0, "BC": -1.0, "FG": -1.0},
        "beta_heights": {"GH": -1.0, "HI": 0.0, "JA": 1.0},
    }


def load_polygon_data(path: str | None = None) -> dict:
    if path is None:
        text = resources.files("origami_billiards").joinpath("data/fig8_4d_polygons.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    return json.loads(text)


@dataclass(frozen=True, eq=False)
class PolygonData:
    Y: Polytope
    Z: Polytope
    alpha: BilliardTrajectory
    beta: BilliardTrajectory
    alpha_heights: dict
    beta_heights: dict


def validate_polygon_data(data: Mapping) -> PolygonData:
    """Check every predicate the 4D pipeline relies on; raise ``ValidationFailed`` on the first miss."""
    try:
        Y = polygon(data["Y"]["vertices"], ids=data["Y"]["ids"])
        Z = polygon(data["Z"]["vertices"], ids=data["Z"]["ids"])
    except GeometryError as exc:
        raise ValidationFailed("convex", str(exc)) from exc
    trs = []
    for key, P in (("alpha", Y), ("beta", Z)):
        spec = data[key]
        try:
            tr = simulate(P, spec["start"], spec["velocity"], spec["length"])
        except BilliardError as exc:
            raise ValidationFailed(f"{key}_loop", str(exc)) from exc
        if not tr.is_loop():
            raise ValidationFailed(f"{key}_loop", f"ends at {tr.end.tolist()}")
        trs.append(tr)
    a, b = trs
    if len(a.collisions) % 2 != 1:
        raise ValidationFailed("alpha_odd", f"{len(a.collisions)} collisions")
    if len(b.collisions) % 2 != 0:
        raise ValidationFailed("beta_even", f"{len(b.collisions)} collisions")
    angles = [float(np.degrees(np.arccos(np.clip(_unit(t.velocity0) @ _unit(t.end_velocity), -1, 1)))) for t in trs]
    if abs(angles[0] - angles[1]) > 1e-6:
        raise ValidationFailed("basepoint_angle", f"angles {angles}")
    for key, tr in (("alpha", a), ("beta", b)):
        pat = data[f"{key}_heights"]
        seq = tr.facet_sequence
        if len(set(seq)) != len(seq) or not set(pat) <= set(seq):
            raise ValidationFailed("fold_pattern", f"{key} facets {seq}")
        fail = precondition_failure(tr.polytope, tr, _scaled(pat, 1e-4))
        if fail is not None and fail[0] in ("general_position", "closed"):
            raise ValidationFailed("fold_pattern", f"{key}: {fail[1]}")
    if abs(a.length - b.length) > EPS_GEOM:
        raise ValidationFailed("equal_length", f"{a.length} != {b.length}")
    return PolygonData(Y, Z, a, b, dict(data["alpha_heights"]), dict(data["beta_heights"]))


def _figure_eight_stage1(res: ConstructionResult, pd: PolygonData, delta: float) -> float:
    """First lift of both polygons and the glued 3D polytope; returns the scale used."""
    Y, Z, a2, b2 = pd.Y, pd.Z, pd.alpha, pd.beta
    for k, P in (("Y2", Y), ("Z2", Z)):
        res.add_polytope(k, P)
    res.add_trajectory("alpha2", a2, "Y2")
    res.add_trajectory("beta2", b2, "Z2")
    R = Isometry.linear_map(SWAP_YZ)

    def attempt(s: float):
        ma = _lift(Y, a2, _scaled(pd.alpha_heights, s))
        mb = _lift(Z, b2, _scaled(pd.beta_heights, s))
        RZ3 = R.apply_to_polytope(mb[0].beveling.lifted)
        try:
            X3 = convex_union(ma[0].beveling.lifted, RZ3)
        except GeometryError as exc:
            raise OrigamiError(f"convex union failed: {exc}") from exc
        return ma, mb, RZ3, X3

    problems = [(Y, a2, pd.alpha_heights), (Z, b2, pd.beta_heights)]
    d, ((ma, repa, _), (mb, repb, _), RZ3, X3) = _search("first-lift", delta, problems, attempt)
    res.add_polytope("Y3", ma.beveling.lifted)
    res.add_polytope("Z3", mb.beveling.lifted)
    res.add_polytope("RZ3", RZ3)
    res.add_polytope("X3", X3)
    res.add_trajectory("alpha3_model", ma.lifted, "Y3")
    res.add_trajectory("beta3_model", mb.lifted, "Z3")
    res.expect("origami", ("Y2", "alpha2", "alpha3_model"), {"heights": _scaled(pd.alpha_heights, d)})
    res.expect("origami", ("Z2", "beta2", "beta3_model"), {"heights": _scaled(pd.beta_heights, d)})
    res.expect("convex_union", ("Y3", "RZ3", "X3"))
    la, lb = ma.lifted, mb.lifted
    a3 = simulate(X3, la.start, la.velocity0, la.length)
    b3 = simulate(X3, SWAP_YZ @ lb.start, SWAP_YZ @ lb.velocity0, lb.length)
    if _same_points(la, a3) > REFLECTION_TOL or _same_points(lb, b3, SWAP_YZ) > REFLECTION_TOL:
        raise StageFailed("first-lift", "loops_survive_union", "the union changes a lifted loop")
    res.add_trajectory("alpha3", a3, "X3")
    res.add_trajectory("beta3", b3, "X3")
    res.expect("transport", ("alpha3",), np.diag([-1.0, 1.0, 1.0]))
    res.expect("transport", ("beta3",), STAGE1_BETA_TRANSPORT, SWAP_YZ)
    res.log(
        "first-lift",
        "bevel both polygons, swap y and z in the second and glue along the shared wedge faces",
        {"delta": d},
        {"alpha": repa.to_json(), "beta": repb.to_json(), "facets": list(X3.ids)},
    )
    return d


def figure_eight_4d(polygon_data: Mapping | None = None, delta: float = 0.05, epsilon: float | None = None) -> ConstructionResult:
    data = load_polygon_data() if polygon_data is None else polygon_data
    pd = validate_polygon_data(data)
    res = ConstructionResult("figure_eight_4d", {"delta": delta, "epsilon": epsilon}, main="figure_eight")
    d = _figure_eight_stage1(res, pd, delta)
    X3, a3, b3 = res.polytopes["X3"], res.trajectories["alpha3"], res.trajectories["beta3"]
    A = [f for f in a3.facet_sequence if f in ALPHA_STAGE2]
    B = [f for f in b3.facet_sequence if f in BETA_STAGE2]
    if len(A) != 3 or len(B) != 3:
        raise StageFailed("second-lift", "fold_faces", f"found {A} and {B}")
    pat = {**dict(zip(A, FOLD_PATTERN)), **dict(zip(B, FOLD_PATTERN))}

    def attempt(e: float):
        h = _scaled(pat, e)
        ma = _lift(X3, a3, h)
        mb = _lift(X3, b3, h, ma[0].beveling)
        return ma, mb

    e0 = d if epsilon is None else epsilon
    e, ((ma, repa, _), (mb, repb, _)) = _search("second-lift", e0, [(X3, a3, pat), (X3, b3, pat)], attempt)
    res.params.update({"delta_used": d, "epsilon_used": e})
    res.add_polytope("X4", ma.beveling.lifted)
    res.add_trajectory("alpha4", ma.lifted, "X4")
    res.add_trajectory("beta4", mb.lifted, "X4")
    res.expect("origami", ("X3", "alpha3", "alpha4"), {"heights": _scaled(pat, e)})
    res.expect("origami", ("X3", "beta3", "beta4"), {"heights": _scaled(pat, e)})
    res.log("second-lift", "bevel the glued polytope along three faces of each loop", {"epsilon": e, "faces": list(pat)}, {"alpha": repa.to_json(), "beta": repb.to_json()})
    for t, c in (("alpha4", 12), ("beta4", 10)):
        res.expect("collision_count", (t,), c)
        res.expect("single_hits", (t,))
    frame = _block(SWAP_YZ, np.eye(1))
    preds = (_prediction(5, [4, 3], pd.alpha, 4), _prediction(4, [3, 3], pd.beta, 4, frame))
    res.add_bouquet(BouquetRecord("figure_eight", ("alpha4", "beta4"), (0, 0), "stable", preds, (_axes(4, 1, 2), _axes(4, 0))))
    return res


# ---------------------------------------------------------------------------
# dimension 5: decagon factor


def decagon() -> Polytope:
    k = np.arange(10)
    verts = np.column_stack([np.cos(2 * np.pi * k / 10), np.sin(2 * np.pi * k / 10)])
    return polygon(verts, ids=[f"D{i}" for i in range(10)])


def pentagon_orbits() -> tuple[np.ndarray, np.ndarray]:
    """Counterclockwise midpoints of the even and of the odd decagon edges."""
    k = np.arange(10)
    v = np.column_stack([np.cos(2 * np.pi * k / 10), np.sin(2 * np.pi * k / 10)])
    mids = (v + np.roll(v, -1, axis=0)) / 2
    return mids[0::2], mids[1::2]


def _segment_crossing(p: np.ndarray, q: np.ndarray, r: np.ndarray, s: np.ndarray) -> np.ndarray | None:
    A = np.column_stack([q - p, r - s])
    if abs(np.linalg.det(A)) < 1e-14:
        return None
    a, b = np.linalg.solve(A, r - p)
    if 1e-12 < a < 1 - 1e-12 and 1e-12 < b < 1 - 1e-12:
        return p + a * (q - p)
    return None


def pentagon_crossings() -> np.ndarray:
    """Interior crossings of the two pentagon orbits in lexicographic order."""
    P1, P2 = pentagon_orbits()
    pts = []
    for i in range(5):
        for j in range(5):
            x = _segment_crossing(P1[i], P1[(i + 1) % 5], P2[j], P2[(j + 1) % 5])
            if x is not None:
                pts.append(x)
    pts = np.array(pts)
    return pts[np.lexsort((np.round(pts[:, 1], 12), np.round(pts[:, 0], 12)))]


def _rebase(D: Polytope, verts: np.ndarray, y: np.ndarray) -> BilliardTrajectory:
    """The closed orbit through ``verts``, started at ``y`` and run counterclockwise."""
    for i in range(len(verts)):
        p, q = verts[i], verts[(i + 1) % len(verts)]
        u = q - p
        s = float((y - p) @ u / (u @ u))
        if 0 < s < 1 and np.linalg.norm(p + s * u - y) <= 1e-12:
            perim = sum(float(np.linalg.norm(verts[(j + 1) % len(verts)] - verts[j])) for j in range(len(verts)))
            return simulate(D, y, _unit(u), perim)
    raise ValueError("basepoint does not lie on the orbit")


def figure_eight_5d(y_choice: int = 0, delta: float = 0.05, polygon_data: Mapping | None = None) -> ConstructionResult:
    data = load_polygon_data() if polygon_data is None else polygon_data
    pd = validate_polygon_data(data)
    res = ConstructionResult("figure_eight_5d", {"y_choice": y_choice, "delta": delta}, main="product")
    d = _figure_eight_stage1(res, pd, delta)
    res.params["delta_used"] = d
    D = decagon()
    crossings = pentagon_crossings()
    y = crossings[y_choice]
    P1, P2 = pentagon_orbits()
    p1, p2 = _rebase(D, P1, y), _rebase(D, P2, y)
    res.add_polytope("X2", D)
    res.add_trajectory("pentagon1", p1, "X2")
    res.add_trajectory("pentagon2", p2, "X2")
    res.log("decagon", "rebase both pentagon orbits of the regular decagon at a common crossing", {"basepoint": y.tolist()})
    a3, b3 = res.trajectories["alpha3"], res.trajectories["beta3"]
    F = BouquetSpec((LoopInDouble(a3), LoopInDouble(b3)))
    G = BouquetSpec((LoopInDouble(p1), LoopInDouble(p2)))
    S = direct_sum(F, G, ("X3", "X2"))
    res.add_product("X5", S.loops[0].trajectory.polytope, "X3", "X2", ("X3", "X2"))
    res.add_trajectory("loop_alpha", S.loops[0].trajectory, "X5")
    res.add_trajectory("loop_beta", S.loops[1].trajectory, "X5")
    res.log("product", "pair each 3D loop with one pentagon orbit on normalized time", {}, {"sheets": [lp.start_sheet for lp in S.loops]})
    frame = SWAP_YZ
    res.add_bouquet(
        BouquetRecord(
            "x3_factor", ("alpha3", "beta3"), (0, 0), "factor",
            (_prediction(5, [4], pd.alpha, 3), _prediction(4, [3], pd.beta, 3, frame)),
            (_axes(3, 1, 2), _axes(3, 0)),
        )
    )
    res.add_bouquet(
        BouquetRecord(
            "decagon_factor", ("pentagon1", "pentagon2"), (0, 0), "factor",
            (_prediction(5, [], p1, 2), _prediction(5, [], p2, 2)),
            (_unit(p1.velocity0)[:, None], _unit(p2.velocity0)[:, None]),
        )
    )
    res.add_bouquet(BouquetRecord("product", ("loop_alpha", "loop_beta"), (0, 0), "product", factors=("x3_factor", "decagon_factor")))
    return res


# ---------------------------------------------------------------------------
# dimension n >= 6


def collision_schedule(res: ConstructionResult) -> dict[str, list[float]]:
    rec = res.bouquets[res.main]
    return {t: res.trajectories[t].normalized_collision_times().tolist() for t in rec.loops}


def homothety_fit(deltas: Sequence[float], times: Sequence[Sequence[float]]) -> dict:
    """Fit each collision time linearly in the height scale.

    Returns intercepts ``mu``, slopes ``tau`` and the largest residual.
    """
    T = np.asarray(times, dtype=float)
    A = np.column_stack([np.ones(len(deltas)), np.asarray(deltas, dtype=float)])
    coef, *_ = np.linalg.lstsq(A, T, rcond=None)
    resid = float(np.max(np.abs(A @ coef - T))) if T.size else 0.0
    return {"mu": coef[0].tolist(), "tau": coef[1].tolist(), "residual": resid}


def figure_eight_n(n: int, deltas: Sequence[float] = (0.08, 0.04)) -> ConstructionResult:
    if n < 6:
        raise ValueError("direct sums start at dimension 6")
    r = 3 + n % 3
    m = (n - r) // 3
    deltas = [float(x) for x in deltas]
    if r == 3:
        if len(deltas) < m + 1:
            raise ValueError(f"need {m + 1} deltas")
        base = figure_eight_3d(deltas[0])
        copies = deltas[1 : m + 1]
    else:
        if len(deltas) < m:
            raise ValueError(f"need {m} deltas")
        base = figure_eight_4d() if r == 4 else figure_eight_5d()
        copies = deltas[:m]
    res = ConstructionResult("figure_eight_n", {"n": n, "deltas": deltas, "base_dim": r, "copy_deltas": copies}, main="product")
    res.absorb(base, "base")
    current = f"base/{base.main}"
    poly = f"base/{base.trajectory_polytope[base.bouquets[base.main].loops[0]]}"
    S = res.bouquet_spec(current)
    for i, dc in enumerate(copies, start=1):
        g = figure_eight_3d(dc)
        pre = f"copy{i}"
        res.absorb(g, pre)
        G = res.bouquet_spec(f"{pre}/{g.main}")
        labels = ("S", f"C{i}")
        try:
            S = direct_sum(S, G, labels)
        except Singular as exc:
            raise SingularSchedule(exc.loop, exc.time, f"move delta of copy {i} ({dc}) away from the other factors, e.g. to {dc * 0.9:.6g}") from exc
        pname = f"P{i}"
        res.add_product(pname, S.loops[0].trajectory.polytope, poly, f"{pre}/X3", labels)
        names = (f"{pname}/loop_alpha", f"{pname}/loop_beta")
        for nm, lp in zip(names, S.loops):
            res.add_trajectory(nm, lp.trajectory, pname)
        rec_name = "product" if i == len(copies) else f"partial{i}"
        res.add_bouquet(BouquetRecord(rec_name, names, tuple(lp.start_sheet for lp in S.loops), "product", factors=(current, f"{pre}/{g.main}")))
        current, poly = rec_name, pname
    res.log("direct-sum", "direct-sum the base bouquet with height-varied copies of the 3D figure-eight", {"copies": copies})
    sched = {"alpha3": [], "beta3": []}
    for dv in HOMOTHETY_DELTAS:
        g = figure_eight_3d(dv)
        for k in sched:
            sched[k].append(g.trajectories[k].normalized_collision_times().tolist())
    res.expect("homothety", (), {"deltas": list(HOMOTHETY_DELTAS), "times": sched}, tol=HOMOTHETY_TOL)
    fits = {k: homothety_fit(HOMOTHETY_DELTAS, v) for k, v in sched.items()}
    res.log("homothety", "fit collision times of the 3D figure-eight linearly in the height scale", {"deltas": list(HOMOTHETY_DELTAS)}, fits)
    return res


# ---------------------------------------------------------------------------
# certification


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float | None = None
    tol: float | None = None
    detail: str = ""

    def to_json(self) -> dict:
        return {"name": self.name, "passed": self.passed, "value": self.value, "tol": self.tol, "detail": self.detail}


@dataclass
class CertificateBundle:
    name: str
    checks: list[Check]
    certificates: dict[str, StabilityCertificate]
    seed: int = 0

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "ok": self.ok,
            "seed": self.seed,
            "checks": [c.to_json() for c in self.checks],
            "certificates": {k: v.to_json() for k, v in self.certificates.items()},
        }


def reflection_residual(tr: BilliardTrajectory) -> float:
    """How far stored collisions are from straight motion plus the reflection law.

    Velocities are re-derived by reflecting the initial velocity, so a moved
    collision point shows up both off its facet and off the straight path.
    """
    P = tr.polytope
    worst = max(0.0, -float(np.min(P.slacks(tr.start))))
    t, p = tr.t0, np.asarray(tr.start, dtype=float)
    for c, v in zip(tr.collisions, tr.velocities):
        pred = p + v * (c.time - t)
        worst = max(worst, float(np.linalg.norm(pred - c.point)), abs(P.halfspace(c.facet).signed_distance(c.point)))
        t, p = c.time, c.point
    return worst


def _segment_set_residual(trs: Sequence[BilliardTrajectory], L: np.ndarray) -> float:
    segs = [s for tr in trs for s in tr.segments()]
    worst = 0.0
    for a, b in segs:
        la, lb = L @ a, L @ b
        worst = max(
            worst,
            min(min(np.linalg.norm(la - c) + np.linalg.norm(lb - d), np.linalg.norm(la - d) + np.linalg.norm(lb - c)) for c, d in segs),
        )
    return float(worst)


def _facet_set_residual(P: Polytope, Q: Polytope) -> float:
    if len(P.facets) != len(Q.facets):
        return float("inf")
    worst = 0.0
    for _, h in P.facets:
        worst = max(worst, min(float(np.max(np.abs(h.normal - g.normal))) + abs(h.offset - g.offset) for _, g in Q.facets))
    return worst


def _predicted(pr: Mapping | None) -> np.ndarray | None:
    if pr is None:
        return None
    frame = None if pr["frame"] is None else np.array(pr["frame"], dtype=float)
    return predicted_kernel(pr["c2"], pr["folds"], tuple(np.array(t, dtype=float) for t in pr["tangents"]), frame)


def _expectation_check(res: ConstructionResult, e: Expectation, grid: int, tol_geom: float = EPS_GEOM) -> list[Check]:
    rtol = 10 * tol_geom
    tg = e.target
    label = f"{e.kind}:{','.join(tg)}" if tg else e.kind
    tr = res.trajectories.get(tg[0]) if tg else None
    if e.kind == "transport":
        P = transport(tr).linear
        F = np.eye(P.shape[0]) if e.frame is None else np.asarray(e.frame)
        r = float(np.max(np.abs(F.T @ P @ F - np.asarray(e.value))))
        return [Check(label, r <= e.tol, r, e.tol)]
    if e.kind == "collision_count":
        k = len(tr.collisions)
        return [Check(label, k == int(e.value), float(k), None, f"expected {e.value}")]
    if e.kind == "single_hits":
        seq = tr.facet_sequence
        return [Check(label, len(set(seq)) == len(seq))]
    if e.kind == "simple":
        return [Check(label, is_simple(tr))]
    if e.kind == "sheet_consistent":
        got = LoopInDouble(tr).sheet_consistent
        return [Check(label, got == bool(e.value), None, None, f"consistent={got}")]
    if e.kind == "twisted_tube":
        lp = LoopInDouble(tr)
        got = twisted_tube_certificate(lp)
        return [Check(label, got == bool(e.value), twisted_tube_residual(lp), 1e-9, f"certificate={got}")]
    if e.kind == "invariant_set":
        trs = [res.trajectories[t] for t in tg]
        r = _segment_set_residual(trs, np.asarray(e.value))
        return [Check(label, r <= rtol, r, rtol)]
    if e.kind == "convex_union":
        P, Q, U = (res.polytopes[t] for t in tg)
        try:
            r = _facet_set_residual(convex_union(P, Q), U)
        except GeometryError as exc:
            return [Check(label, False, None, None, str(exc))]
        return [Check(label, r <= tol_geom, r, tol_geom)]
    if e.kind == "origami":
        X = res.polytopes[tg[0]]
        base, stored = res.trajectories[tg[1]], res.trajectories[tg[2]]
        h = {k: float(v) for k, v in e.value["heights"].items()}
        try:
            m, rep, _ = _lift(X, base, h)
        except (OrigamiError, BevelingError, BilliardError) as exc:
            return [Check(label, False, None, None, str(exc))]
        r = _same_points(m.lifted, stored)
        ok = r <= rtol and m.lifted.facet_sequence == stored.facet_sequence
        dev = Check(f"origami_deviation:{tg[2]}", rep.max_deviation <= m.profile.delta + EPS_GEOM, rep.max_deviation, m.profile.delta)
        return [Check(label, ok, r, rtol), dev]
    if e.kind == "index_form":
        f = index_form(res.bouquet_spec(tg[0]), grid)
        ok = f.min_eigenvalue >= e.value["min_eigenvalue_ge"] and f.kernel_dim == e.value["kernel_dim"]
        return [Check(label, ok, f.min_eigenvalue, e.value["min_eigenvalue_ge"], f"kernel_dim={f.kernel_dim} grid={grid}")]
    if e.kind == "homothety":
        checks = []
        for k, times in e.value["times"].items():
            fit = homothety_fit(e.value["deltas"], times)
            checks.append(Check(f"homothety:{k}", fit["residual"] <= e.tol, fit["residual"], e.tol))
        return checks
    raise ValueError(f"unknown expectation kind {e.kind!r}")


def _factor_trivial(res: ConstructionResult, name: str, certs: Mapping[str, StabilityCertificate]) -> bool:
    rec = res.bouquets[name]
    if rec.role == "product":
        return all(_factor_trivial(res, f, certs) for f in rec.factors)
    return certs[name].trivial_intersection


def certify(res: ConstructionResult, grid: int = 32, seed: int = 0, tol_geom: float = EPS_GEOM) -> CertificateBundle:
    """Recompute every check of a construction from its stored geometry.

    ``tol_geom`` scales the geometric verification tolerances; ``seed``
    drives the random fields of the superadditivity check.
    """
    rtol = 10 * tol_geom
    checks: list[Check] = []
    for name in res.failures:
        checks.append(Check(f"stage:{name}", False))
    for name, tr in res.trajectories.items():
        r = reflection_residual(tr)
        checks.append(Check(f"reflection_law:{name}", r <= rtol, r, rtol))
    for e in res.expectations:
        checks += _expectation_check(res, e, grid, tol_geom)
    certs: dict[str, StabilityCertificate] = {}
    # factors first so products can read their verdicts
    order = sorted(res.bouquets.values(), key=lambda r: r.role == "product")
    for rec in order:
        spec = res.bouquet_spec(rec.name)
        preds = [_predicted(p) for p in rec.predictions] if rec.predictions else None
        cert = certify_bouquet(spec, preds, None, seed)
        certs[rec.name] = cert
        for loop, K, P, E in itertools.zip_longest(rec.loops, cert.kernels, cert.predicted, rec.expected_kernels):
            if E is not None:
                a = principal_angle(K, E)
                checks.append(Check(f"kernel:{rec.name}:{loop}", a <= ANGLE_TOL, a, ANGLE_TOL, f"dim={K.shape[1]}"))
            if P is not None:
                a = principal_angle(K, P)
                checks.append(Check(f"predicted_kernel:{rec.name}:{loop}", a <= ANGLE_TOL, a, ANGLE_TOL))
        if rec.role in ("stable", "factor"):
            checks.append(Check(f"trivial_intersection:{rec.name}", cert.trivial_intersection))
        if rec.role == "stable":
            checks.append(Check(f"stationarity:{rec.name}", cert.stationarity_residual <= STATIONARITY_TOL, cert.stationarity_residual, STATIONARITY_TOL))
            checks.append(Check(f"sheet_consistent:{rec.name}", cert.sheet_consistent))
            checks.append(Check(f"simple:{rec.name}", cert.simple))
            checks.append(Check(f"irreducible:{rec.name}", cert.irreducible))
        if rec.role == "product":
            gap = min(float(np.min(np.diff([c.time for c in res.trajectories[t].collisions]))) for t in rec.loops)
            checks.append(Check(f"collision_gap:{rec.name}", gap > EPS_TIME, gap, EPS_TIME))
            checks.append(Check(f"stationarity:{rec.name}", cert.stationarity_residual <= STATIONARITY_TOL, cert.stationarity_residual, STATIONARITY_TOL))
            checks.append(Check(f"sheet_consistent:{rec.name}", cert.sheet_consistent))
            checks.append(Check(f"factor_kernels_trivial:{rec.name}", _factor_trivial(res, rec.name, certs)))
            F, G = (res.bouquet_spec(f) for f in rec.factors)
            worst = superadditivity_check(F, G, trials=100, seed=seed)
            checks.append(Check(f"superadditivity:{rec.name}", worst >= -1e-8, worst, -1e-8))
    return CertificateBundle(res.name, checks, certs, seed)
