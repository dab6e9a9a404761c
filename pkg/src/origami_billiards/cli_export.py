"""Command-line front end: build constructions, verify bundles, export geometry.

Exit codes are 0 when every check passes, 1 on a failed certificate and 2
on a usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .billiards import BilliardError
from .constructions import (
    CertificateBundle,
    ConstructionResult,
    StageFailed,
    ValidationFailed,
    certify,
    figure_eight_3d,
    figure_eight_4d,
    figure_eight_5d,
    figure_eight_n,
    twisted_tower,
)
from .geom_core import EPS_GEOM, Polytope
from .transport_stability import Singular

BUNDLE_FORMAT = "origami-billiards-bundle"
OUT_ENV = "ORIGAMI_BILLIARDS_OUT"

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


class UnsupportedDim(UsageError):
    pass


@dataclass
class RunConfig:
    command: str
    construction: str | None = None
    n: int | None = None
    dim: int | None = None
    deltas: list[float] = field(default_factory=list)
    epsilon: float | None = None
    grid: int = 32
    seed: int = 0
    tol_geom: float = EPS_GEOM
    out: str = "."
    formats: list[str] = field(default_factory=list)
    project: bool = False
    bundle: str | None = None

    def validate(self) -> None:
        if self.tol_geom <= 0:
            raise UsageError("--tol-geom must be positive")
        if any(d <= 0 for d in self.deltas) or (self.epsilon is not None and self.epsilon <= 0):
            raise UsageError("height scales must be positive")
        if self.grid < 8:
            raise UsageError("--grid must be at least 8")
        if self.command == "build":
            if self.construction == "tower" and (self.n is None or self.n < 3):
                raise UsageError("tower needs --n >= 3")
            if self.construction == "fig8" and (self.dim is None or self.dim < 3):
                raise UsageError("fig8 needs --dim >= 3")
        for f in self.formats:
            if f not in ("obj", "csv", "json"):
                raise UsageError(f"unknown format {f!r}")

    def to_json(self) -> dict:
        return {
            "construction": self.construction,
            "n": self.n,
            "dim": self.dim,
            "deltas": self.deltas,
            "epsilon": self.epsilon,
            "grid": self.grid,
            "seed": self.seed,
            "tol_geom": self.tol_geom,
        }


# ---------------------------------------------------------------------------
# JSON with 17 significant digits


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    s = format(x, ".17g")
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def _encode(obj: Any, out: list[str], indent: int, level: int) -> None:
    pad = "\n" + " " * (indent * (level + 1))
    end = "\n" + " " * (indent * level)
    if obj is None:
        out.append("null")
    elif obj is True or obj is False or isinstance(obj, np.bool_):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_fmt_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, np.ndarray):
        _encode(obj.tolist(), out, indent, level)
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            out.append(("," if i else "") + pad)
            _encode(str(k), out, indent, level + 1)
            out.append(": ")
            _encode(v, out, indent, level + 1)
        out.append(end + "}")
    elif isinstance(obj, (list, tuple)):
        # numeric rows stay on one line
        if obj and all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for v in obj):
            out.append("[" + ", ".join(_fmt_float(float(v)) if isinstance(v, (float, np.floating)) else str(int(v)) for v in obj) + "]")
            return
        if not obj:
            out.append("[]")
            return
        out.append("[")
        for i, v in enumerate(obj):
            out.append(("," if i else "") + pad)
            _encode(v, out, indent, level + 1)
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any, indent: int = 1) -> str:
    """JSON text with every float written to 17 significant digits."""
    out: list[str] = []
    _encode(obj, out, indent, 0)
    return "".join(out) + "\n"


def _restore(obj: Any) -> Any:
    if isinstance(obj, str) and obj in ("nan", "inf", "-inf"):
        return float(obj)
    if isinstance(obj, dict):
        return {k: _restore(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_restore(v) for v in obj]
    return obj


def write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_bundle(path: str, result: ConstructionResult, cert: CertificateBundle, config: RunConfig) -> None:
    write_atomic(
        path,
        dumps({"format": BUNDLE_FORMAT, "config": config.to_json(), "construction": result.to_json(), "certificates": cert.to_json()}),
    )


def load_bundle(path: str) -> tuple[ConstructionResult, dict, dict]:
    with open(path) as fh:
        data = _restore(json.load(fh))
    if data.get("format") != BUNDLE_FORMAT:
        raise UsageError(f"{path} is not a construction bundle")
    return ConstructionResult.from_json(data["construction"]), data.get("certificates", {}), data.get("config", {})


# ---------------------------------------------------------------------------
# commands


def _build_result(cfg: RunConfig) -> ConstructionResult:
    d = cfg.deltas
    if cfg.construction == "tower":
        return twisted_tower(cfg.n, d[0] if d else 0.05)
    dim = cfg.dim
    if dim == 3:
        return figure_eight_3d(d[0] if d else 0.08)
    if dim == 4:
        return figure_eight_4d(delta=d[0] if d else 0.05, epsilon=cfg.epsilon)
    if dim == 5:
        return figure_eight_5d(delta=d[0] if d else 0.05)
    return figure_eight_n(dim, d if d else (0.08, 0.04))


def _bundle_name(cfg: RunConfig) -> str:
    return f"tower_n{cfg.n}" if cfg.construction == "tower" else f"fig8_dim{cfg.dim}"


def _out_dir(cfg: RunConfig) -> str:
    return os.environ.get(OUT_ENV) or cfg.out


def format_table(cert: CertificateBundle) -> str:
    lines = [f"{'check':<60} {'status':<6} {'value':>24}  tol"]
    for c in cert.checks:
        v = "" if c.value is None else format(c.value, ".17g")
        t = "" if c.tol is None else format(c.tol, ".3g")
        lines.append(f"{c.name:<60} {'pass' if c.passed else 'FAIL':<6} {v:>24}  {t}" + (f"  {c.detail}" if c.detail and not c.passed else ""))
    return "\n".join(lines)


def cmd_build(cfg: RunConfig, stream=None) -> int:
    stream = stream or sys.stdout
    name = _bundle_name(cfg)
    path = os.path.join(_out_dir(cfg), name + ".json")
    try:
        result = _build_result(cfg)
    except (StageFailed, ValidationFailed, Singular) as exc:
        result = ConstructionResult(name, cfg.to_json())
        kind = type(exc).__name__
        stage = getattr(exc, "stage", None) or getattr(exc, "predicate", None) or "direct-sum"
        result.failures.append(f"{stage}")
        result.log(stage, f"{kind}", {}, {"witness": str(exc)})
        cert = certify(result, cfg.grid, cfg.seed, cfg.tol_geom)
        save_bundle(path, result, cert, cfg)
        print(f"FAIL {kind}: {exc}", file=stream)
        print(f"bundle written to {path}", file=stream)
        return EXIT_FAIL
    cert = certify(result, cfg.grid, cfg.seed, cfg.tol_geom)
    save_bundle(path, result, cert, cfg)
    print(format_table(cert), file=stream)
    for fmt in cfg.formats:
        export(result, fmt, _out_dir(cfg), name, cfg.project, skip_unsupported=True)
    print(f"bundle written to {path}", file=stream)
    if not cert.ok:
        for c in cert.failed():
            print(f"FAIL {c.name}: value={c.value} {c.detail}", file=stream)
        return EXIT_FAIL
    return EXIT_OK


def _same_check(stored: dict | None, c) -> bool:
    if stored is None or stored["passed"] != c.passed:
        return False
    if stored["value"] is None or c.value is None:
        return stored["value"] is None and c.value is None
    return _fmt_float(float(stored["value"])) == _fmt_float(c.value)


def cmd_verify(cfg: RunConfig, stream=None) -> int:
    stream = stream or sys.stdout
    result, stored, conf = load_bundle(cfg.bundle)
    grid = conf.get("grid", cfg.grid) if cfg.grid == 32 else cfg.grid
    seed = conf.get("seed", cfg.seed) if cfg.seed == 0 else cfg.seed
    tol = conf.get("tol_geom", cfg.tol_geom) if cfg.tol_geom == EPS_GEOM else cfg.tol_geom
    cert = certify(result, grid, seed, tol)
    print(format_table(cert), file=stream)
    old = {c["name"]: c for c in stored.get("checks", [])}
    drift = [c.name for c in cert.checks if not _same_check(old.get(c.name), c)]
    if drift:
        print(f"residuals differ from the stored certificates for: {', '.join(drift)}", file=stream)
    if not cert.ok:
        for c in cert.failed():
            print(f"FAIL {c.name}: value={c.value} {c.detail}", file=stream)
        return EXIT_FAIL
    return EXIT_FAIL if drift else EXIT_OK


def cmd_export(cfg: RunConfig, stream=None) -> int:
    stream = stream or sys.stdout
    result, _, _ = load_bundle(cfg.bundle)
    stem = os.path.splitext(os.path.basename(cfg.bundle))[0]
    paths = []
    for fmt in cfg.formats or ["json"]:
        paths += export(result, fmt, _out_dir(cfg), stem, cfg.project)
    for p in paths:
        print(f"wrote {p}", file=stream)
    return EXIT_OK


# ---------------------------------------------------------------------------
# exports


def _facet_polygon(P: Polytope, fid: str) -> np.ndarray:
    """Vertices of a 3D facet in counterclockwise order seen from outside."""
    V = P.facet_vertices(fid)
    nrm = P.halfspace(fid).normal
    c = V.mean(axis=0)
    a = V[0] - c
    a = a / np.linalg.norm(a) if np.linalg.norm(a) > 0 else a
    b = np.cross(nrm, a)
    ang = np.arctan2((V - c) @ b, (V - c) @ a)
    ang = np.round(np.mod(ang, 2 * np.pi), 12)
    order = np.lexsort((V[:, 2], V[:, 1], V[:, 0], ang))
    return V[order]


def _edges(P: Polytope) -> list[tuple[int, int]]:
    V = P.vertices
    n = P.dim
    tol = 1e-7
    act = [set(np.nonzero(np.abs(P.offsets - P.normals @ v) <= tol)[0]) for v in V]
    out = []
    for i in range(len(V)):
        for j in range(i + 1, len(V)):
            common = sorted(act[i] & act[j])
            if len(common) >= n - 1 and np.linalg.matrix_rank(P.normals[common], tol=1e-9) == n - 1:
                out.append((i, j))
    return out


def _lift3(pts: np.ndarray) -> np.ndarray:
    if pts.shape[1] >= 3:
        return pts[:, :3]
    return np.hstack([pts, np.zeros((len(pts), 3 - pts.shape[1]))])


def to_obj(result: ConstructionResult, project: bool = False) -> str:
    """OBJ text: facet meshes for 3D polytopes, edge sets for projected ones, trajectory polylines."""
    dims = {P.dim for k, P in result.polytopes.items() if k not in result.products}
    dims |= {tr.dim for tr in result.trajectories.values()}
    if max(dims) > 3 and not project:
        raise UnsupportedDim("objects of dimension above 3 need --project")
    lines = [f"# {result.name}"]
    base = 1

    def emit(pts: np.ndarray) -> None:
        for p in _lift3(pts):
            lines.append("v " + " ".join(format(float(c), ".17g") for c in p))

    for name, P in result.polytopes.items():
        if name in result.products:
            continue
        lines.append(f"o {name}")
        if P.dim == 3:
            for fid in P.ids:
                poly = _facet_polygon(P, fid)
                if len(poly) < 3:
                    continue
                lines.append(f"g {fid}")
                emit(poly)
                for k in range(1, len(poly) - 1):
                    lines.append(f"f {base} {base + k} {base + k + 1}")
                base += len(poly)
        else:
            V = P.vertices
            emit(V)
            for i, j in _edges(P):
                lines.append(f"l {base + i} {base + j}")
            base += len(V)
    for name, tr in result.trajectories.items():
        pts = np.array([p for _, p in tr.knots])
        lines.append(f"o {name}")
        emit(pts)
        lines.append("l " + " ".join(str(base + i) for i in range(len(pts))))
        base += len(pts)
    return "\n".join(lines) + "\n"


def to_csv(result: ConstructionResult) -> str:
    width = max(tr.dim for tr in result.trajectories.values())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trajectory", "index", "time", "normalized_time", "facet"] + [f"x{i}" for i in range(width)])
    for name, tr in result.trajectories.items():
        nt = tr.normalized_collision_times()
        for i, c in enumerate(tr.collisions):
            coords = [repr(float(v)) for v in c.point] + [""] * (width - tr.dim)
            w.writerow([name, i, repr(float(c.time)), repr(float(nt[i])), c.facet] + coords)
    return buf.getvalue()


def to_geometry_json(result: ConstructionResult) -> dict:
    polys = {}
    for k, P in result.polytopes.items():
        entry = {"dim": P.dim, "facets": P.to_json()["facets"]}
        if k in result.products:
            a, b, labels = result.products[k]
            entry = {"dim": P.dim, "product_of": [a, b], "labels": list(labels)}
        else:
            entry["vertices"] = P.vertices.tolist()
        polys[k] = entry
    trajs = {}
    for k, tr in result.trajectories.items():
        trajs[k] = {
            "polytope": result.trajectory_polytope[k],
            "knots": [{"time": t, "point": p.tolist()} for t, p in tr.knots],
            "facets": list(tr.facet_sequence),
        }
    return {"name": result.name, "polytopes": polys, "trajectories": trajs}


def export(result: ConstructionResult, fmt: str, out_dir: str, stem: str, project: bool = False, skip_unsupported: bool = False) -> list[str]:
    if fmt == "obj":
        try:
            text = to_obj(result, project)
        except UnsupportedDim:
            if skip_unsupported:
                return []
            raise
        path = os.path.join(out_dir, stem + (".proj3.obj" if project else ".obj"))
    elif fmt == "csv":
        text, path = to_csv(result), os.path.join(out_dir, stem + "_collisions.csv")
    elif fmt == "json":
        text, path = dumps(to_geometry_json(result)), os.path.join(out_dir, stem + ".geometry.json")
    else:
        raise UsageError(f"unknown format {fmt!r}")
    write_atomic(path, text)
    return [path]


# ---------------------------------------------------------------------------
# argument parsing


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--grid", type=int, default=32, help="index-form elements per segment")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol-geom", type=float, default=EPS_GEOM)
    common.add_argument("--out", default=".", help=f"output directory ({OUT_ENV} overrides)")
    common.add_argument("--format", action="append", default=[], choices=["obj", "csv", "json"])
    common.add_argument("--project", action="store_true", help="export the first three coordinates of higher-dimensional objects")

    p = argparse.ArgumentParser(prog="origami-billiards", description="Build and verify billiard constructions.")
    sub = p.add_subparsers(dest="command", required=True)
    b = sub.add_parser("build", parents=[common], help="build a construction and write its bundle")
    b.add_argument("construction", choices=["tower", "fig8"])
    b.add_argument("--n", type=int)
    b.add_argument("--dim", type=int)
    b.add_argument("--delta", type=float, nargs="+", default=[])
    b.add_argument("--epsilon", type=float)
    v = sub.add_parser("verify", parents=[common], help="re-run every check of a bundle")
    v.add_argument("bundle")
    e = sub.add_parser("export", parents=[common], help="export bundle geometry")
    e.add_argument("bundle")
    return p


def parse_config(argv: Sequence[str] | None = None) -> RunConfig:
    a = _parser().parse_args(argv)
    cfg = RunConfig(
        command=a.command,
        construction=getattr(a, "construction", None),
        n=getattr(a, "n", None),
        dim=getattr(a, "dim", None),
        deltas=list(getattr(a, "delta", []) or []),
        epsilon=getattr(a, "epsilon", None),
        grid=a.grid,
        seed=a.seed,
        tol_geom=a.tol_geom,
        out=a.out,
        formats=list(a.format),
        project=a.project,
        bundle=getattr(a, "bundle", None),
    )
    cfg.validate()
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    try:
        cfg = parse_config(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        if cfg.command == "build":
            return cmd_build(cfg)
        if cfg.command == "verify":
            return cmd_verify(cfg)
        return cmd_export(cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, KeyError, BilliardError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
