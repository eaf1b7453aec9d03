"""Versioned on-disk formats: score binaries, model documents, seed files, truth CSVs."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import FormatError, NotFound, SeedError
from .etos import TrackPoint, VesselSegment
from .oscore import OrientationScore

SCORE_SCHEMA = "orientrace.score/1"
MODEL_SCHEMA = "orientrace.model/1"
SEEDS_SCHEMA = "orientrace.seeds/1"
FIELD_SCHEMA = "orientrace.field/1"
TRUTH_COLUMNS = ("image_id", "profile_id", "x1", "y1", "x2", "y2", "width")


def dumps(doc: dict) -> str:
    """Canonical JSON: sorted keys, two-space indent, trailing newline."""
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=True) + "\n"


def write_json(path, doc: dict) -> None:
    Path(path).write_text(dumps(doc), encoding="utf-8")


def read_json(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise NotFound(f"{p} does not exist")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{p}: {exc}") from exc


def _check_schema(doc, schema):
    if not isinstance(doc, dict) or doc.get("schema") != schema:
        raise FormatError(f"expected schema {schema!r}, got {doc.get('schema') if isinstance(doc, dict) else None!r}")


# --------------------------------------------------------------------------
# scores: a JSON header next to a raw little-endian complex128 array


def score_paths(prefix) -> tuple[Path, Path]:
    prefix = Path(prefix)
    return prefix.with_suffix(".json"), prefix.with_suffix(".bin")


def write_score(prefix, score: OrientationScore, meta: dict | None = None) -> tuple[Path, Path]:
    header_path, data_path = score_paths(prefix)
    data = np.ascontiguousarray(score.data, dtype="<c16")
    data.tofile(data_path)
    header = {
        "schema": SCORE_SCHEMA,
        "shape": list(data.shape),
        "dtype": "complex128-le",
        "thetas": [float(t) for t in score.thetas],
        "family": score.family,
        "sidedness": score.sidedness,
        "data_file": data_path.name,
        "meta": meta or {},
    }
    write_json(header_path, header)
    return header_path, data_path


def read_score(prefix) -> tuple[OrientationScore, dict]:
    header_path, _ = score_paths(prefix)
    header = read_json(header_path)
    _check_schema(header, SCORE_SCHEMA)
    data_path = header_path.parent / header["data_file"]
    if not data_path.exists():
        raise NotFound(f"{data_path} does not exist")
    data = np.fromfile(data_path, dtype="<c16")
    shape = tuple(header["shape"])
    if data.size != int(np.prod(shape)):
        raise FormatError("score data size does not match its header")
    score = OrientationScore(data.reshape(shape).astype(complex), np.asarray(header["thetas"]),
                             header["family"], header["sidedness"])
    return score, header


# --------------------------------------------------------------------------
# model documents


def _point_doc(p: TrackPoint) -> dict:
    return {"cx": float(p.c[0]), "cy": float(p.c[1]), "ux": float(p.u[0]), "uy": float(p.u[1]),
            "vx": float(p.v[0]), "vy": float(p.v[1]), "theta": float(p.theta), "width": float(p.w)}


def _centerline_point_doc(c, theta) -> dict:
    return {"cx": float(c[0]), "cy": float(c[1]), "ux": None, "uy": None, "vx": None, "vy": None,
            "theta": float(theta), "width": None}


def segment_doc(seg) -> dict:
    if isinstance(seg, VesselSegment):
        points = [_point_doc(p) for p in seg.points]
    else:  # centerline-only segment
        points = [_centerline_point_doc(c, t) for c, t in zip(seg.centers, seg.thetas)]
    return {"id": int(seg.id), "parent_id": None if seg.parent_id is None else int(seg.parent_id),
            "stop_reason": seg.stop_reason, "points": points}


def model_document(segments, junctions=(), optic_disk=None, params=None, extra=None) -> dict:
    doc = {
        "schema": MODEL_SCHEMA,
        "params": params or {},
        "optic_disk": optic_disk.to_json() if optic_disk is not None and hasattr(optic_disk, "to_json") else optic_disk,
        "segments": [segment_doc(s) for s in segments],
        "junctions": [j.to_json() if hasattr(j, "to_json") else dict(j) for j in junctions],
    }
    if extra:
        doc.update(extra)
    return doc


def vasculature_document(model) -> dict:
    return model_document(model.segments, model.junctions, model.optic_disk, model.params,
                          {"mean_width": float(model.mean_width), "threshold": float(model.threshold),
                           "log": list(model.log)})


def validate_model_document(doc: dict) -> None:
    _check_schema(doc, MODEL_SCHEMA)
    for key in ("params", "optic_disk", "segments", "junctions"):
        if key not in doc:
            raise FormatError(f"model document lacks {key!r}")
    ids = set()
    for seg in doc["segments"]:
        for key in ("id", "parent_id", "stop_reason", "points"):
            if key not in seg:
                raise FormatError(f"segment lacks {key!r}")
        ids.add(seg["id"])
    for seg in doc["segments"]:
        if seg["parent_id"] is not None and seg["parent_id"] not in ids:
            raise FormatError(f"segment {seg['id']} has a missing parent")
    for j in doc["junctions"]:
        if j.get("kind") not in ("bifurcation", "crossing"):
            raise FormatError("junction kind must be bifurcation or crossing")
        if any(i not in ids for i in j.get("segment_ids", [])):
            raise FormatError("junction references a missing segment")


def read_model(path) -> dict:
    doc = read_json(path)
    validate_model_document(doc)
    return doc


def segments_from_document(doc: dict) -> list[VesselSegment]:
    """Rebuild edge-tracked segments; centerline-only points have no edges and are skipped."""
    out = []
    for seg in doc["segments"]:
        pts = []
        for p in seg["points"]:
            if p.get("ux") is None:
                continue
            pts.append(TrackPoint(np.array([p["cx"], p["cy"]]), np.array([p["ux"], p["uy"]]),
                                  np.array([p["vx"], p["vy"]]), p["theta"], p["width"]))
        out.append(VesselSegment(seg["id"], pts, seg["stop_reason"], seg["parent_id"]))
    return out


# --------------------------------------------------------------------------
# seeds


def read_seeds(path) -> list[dict]:
    """Seeds as dicts with ``c``, ``theta`` and optionally ``u``/``v`` (each an (x, y) pair)."""
    doc = read_json(path)
    if isinstance(doc, list):
        items = doc
    else:
        _check_schema(doc, SEEDS_SCHEMA)
        items = doc.get("seeds")
    if not isinstance(items, list):
        raise SeedError("seed file must contain a list of seeds")
    out = []
    for k, item in enumerate(items):
        try:
            theta = float(item["theta"])
            u = np.asarray(item["u"], float) if item.get("u") is not None else None
            v = np.asarray(item["v"], float) if item.get("v") is not None else None
            if item.get("c") is not None:
                c = np.asarray(item["c"], float)
            elif u is not None and v is not None:
                c = (u + v) / 2
            else:
                raise KeyError("c")
        except (KeyError, TypeError, ValueError) as exc:
            raise SeedError(f"seed {k} is malformed: {exc}") from exc
        for arr in (c, u, v):
            if arr is not None and (arr.shape != (2,) or not np.all(np.isfinite(arr))):
                raise SeedError(f"seed {k} has a malformed point")
        out.append({"c": c, "u": u, "v": v, "theta": theta})
    return out


def seeds_to_track_points(seeds, default_width: float | None = None) -> list[TrackPoint]:
    out = []
    for s in seeds:
        if s["u"] is not None and s["v"] is not None:
            out.append(TrackPoint.from_edges(s["u"], s["v"], s["theta"]))
        elif default_width is not None:
            out.append(TrackPoint.from_center(s["c"], s["theta"], default_width))
        else:
            raise SeedError("seed lacks edge points and no default width is available")
    return out


def write_seeds(path, points) -> None:
    seeds = [{"c": [float(p.c[0]), float(p.c[1])], "u": [float(p.u[0]), float(p.u[1])],
              "v": [float(p.v[0]), float(p.v[1])], "theta": float(p.theta)} for p in points]
    write_json(path, {"schema": SEEDS_SCHEMA, "seeds": seeds})


# --------------------------------------------------------------------------
# delimited tables


def write_csv(path, rows: list[dict], columns=None) -> None:
    columns = list(columns or (rows[0].keys() if rows else []))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(row.get(k)) for k in columns})


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (list, tuple)):
        return " ".join(str(v) for v in value)
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


def read_truth_csv(path) -> list[dict]:
    """Width ground truth: one row per profile with two edge points and a width."""
    p = Path(path)
    if not p.exists():
        raise NotFound(f"{p} does not exist")
    with open(p, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in TRUTH_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise FormatError(f"truth CSV lacks columns {missing}")
        rows = []
        for k, row in enumerate(reader):
            try:
                rows.append({
                    "image_id": row["image_id"],
                    "profile_id": row["profile_id"],
                    "u": np.array([float(row["x1"]), float(row["y1"])]),
                    "v": np.array([float(row["x2"]), float(row["y2"])]),
                    "width": float(row["width"]),
                })
            except ValueError as exc:
                raise FormatError(f"truth row {k}: {exc}") from exc
    return rows


def write_truth_csv(path, rows) -> None:
    out = [{"image_id": r["image_id"], "profile_id": r["profile_id"], "x1": float(r["u"][0]), "y1": float(r["u"][1]),
            "x2": float(r["v"][0]), "y2": float(r["v"][1]), "width": float(r["width"])} for r in rows]
    write_csv(path, out, TRUTH_COLUMNS)
