"""CSV / JSON / GeoJSON readers and writers for every pipeline artifact.

Floats are written with ``repr`` so that re-reading an artifact recovers the
exact values and repeated runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .conformal import FULL, INTERMEDIATE, ZERO_WIDTH, PredictionInterval
from .errors import (DuplicateUnit, GeometryJoinError, InvalidClassLabel, MissingColumn,
                     ParseError)
from .indices import IndicatorSpec, IndicatorTable
from .network import ATTRIBUTE_COLUMNS, AttributeProfile, InteractionGraph

HUB_LABELS = {"1", "+1", "1.0", "+1.0"}
PERIPHERY_LABELS = {"-1", "0", "-1.0", "0.0"}


@dataclass(frozen=True)
class UnitRecord:
    unit_id: str
    indicators: dict
    profile: AttributeProfile
    observed_class: int


@dataclass
class Roster:
    unit_ids: tuple
    table: IndicatorTable
    profiles: list
    reference: np.ndarray  # observed classes as spins

    def __len__(self):
        return len(self.unit_ids)

    def record(self, i: int) -> UnitRecord:
        return UnitRecord(self.unit_ids[i], dict(zip(self.table.names, self.table.values[i])),
                          self.profiles[i], int(self.reference[i]))


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(1, None, "empty file") from None
        rows = [row for row in reader if row]
    return header, rows


def write_json(path: str | Path, data) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=False) + "\n")
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


# ---------------------------------------------------------------------------
# input roster

def parse_class(value: str, row: int, column: str) -> int:
    v = value.strip()
    if v in HUB_LABELS:
        return 1
    if v in PERIPHERY_LABELS:
        return -1
    raise InvalidClassLabel(f"row {row}, column {column!r}: class label {value!r} "
                            "is not one of +1/1 (hub) or -1/0 (periphery)")


def ingest(path: str | Path, specs: Sequence[IndicatorSpec], id_column: str = "unit_id",
           class_column: str = "CLASS") -> Roster:
    """Read and validate the unit CSV; unit order follows the file."""
    header, rows = read_csv(path)
    needed = [id_column, *(s.name for s in specs), *ATTRIBUTE_COLUMNS, class_column]
    missing = [c for c in needed if c not in header]
    if missing:
        raise MissingColumn(*missing)
    col = {name: header.index(name) for name in needed}

    ids, values, profiles, classes, seen = [], [], [], [], set()
    for r, row in enumerate(rows, start=2):
        if len(row) < len(header):
            raise ParseError(r, header[len(row)], "row has too few fields")
        uid = row[col[id_column]].strip()
        if uid == "":
            raise ParseError(r, id_column, "empty unit id")
        if uid in seen:
            raise DuplicateUnit(f"unit id {uid!r} repeated at row {r}")
        seen.add(uid)
        vals = []
        for s in specs:
            raw = row[col[s.name]]
            try:
                v = float(raw)
            except ValueError:
                raise ParseError(r, s.name, f"non-numeric value {raw!r}") from None
            if not math.isfinite(v):
                raise ParseError(r, s.name, f"missing or non-finite value {raw!r}")
            vals.append(v)
        attrs = []
        for name in ATTRIBUTE_COLUMNS:
            raw = row[col[name]].strip()
            try:
                attrs.append(int(float(raw)) if float(raw).is_integer() else float(raw))
            except ValueError:
                raise ParseError(r, name, f"non-numeric attribute {raw!r}") from None
        prof = AttributeProfile(*attrs).validate(uid)
        ids.append(uid)
        values.append(vals)
        profiles.append(prof)
        classes.append(parse_class(row[col[class_column]], r, class_column))

    table = IndicatorTable(tuple(ids), np.array(values, dtype=float), tuple(specs))
    return Roster(tuple(ids), table, profiles, np.array(classes, dtype=np.int8))


# ---------------------------------------------------------------------------
# per-stage artifacts

def write_vector(path, unit_ids, values, column: str = "value") -> Path:
    return write_csv(path, ["unit_id", column], zip(unit_ids, values))


def write_matrix(path, unit_ids, names, matrix) -> Path:
    return write_csv(path, ["unit_id", *names], ([u, *row] for u, row in zip(unit_ids, matrix)))


def read_vector(path, column: str = "value") -> tuple[list[str], np.ndarray]:
    header, rows = read_csv(path)
    if column not in header:
        raise MissingColumn(column)
    k = header.index(column)
    return [r[0] for r in rows], np.array([float(r[k]) for r in rows])


def write_edges(path, graph: InteractionGraph) -> Path:
    return write_csv(path, ["i", "j", "weight"], graph.edges())


def read_edges(path, n: int) -> InteractionGraph:
    header, rows = read_csv(path)
    if header[:3] != ["i", "j", "weight"]:
        raise MissingColumn("i", "j", "weight")
    if not rows:
        return InteractionGraph.empty(n)
    arr = np.array(rows, dtype=float)
    return InteractionGraph(n, arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64), arr[:, 2])


def write_marginals(path, unit_ids, p_hat, sigma) -> Path:
    return write_csv(path, ["unit_id", "p_hat", "sigma"], zip(unit_ids, p_hat, sigma))


def read_marginals(path) -> tuple[list[str], np.ndarray, np.ndarray]:
    header, rows = read_csv(path)
    for c in ("unit_id", "p_hat", "sigma"):
        if c not in header:
            raise MissingColumn(c)
    ip, isg = header.index("p_hat"), header.index("sigma")
    return ([r[0] for r in rows], np.array([float(r[ip]) for r in rows]),
            np.array([float(r[isg]) for r in rows]))


INTERVAL_HEADER = ["unit_id", "y_true", "y_hat", "sigma", "lower", "upper", "covered",
                   "adaptivity_class", "split"]


def write_intervals(path, intervals: Sequence[PredictionInterval], y_true, sigma, splits) -> Path:
    rows = ([iv.unit_id, float(y), iv.center, float(s), iv.lower, iv.upper, iv.covered,
             iv.adaptivity_class, sp] for iv, y, s, sp in zip(intervals, y_true, sigma, splits))
    return write_csv(path, INTERVAL_HEADER, rows)


def read_intervals(path) -> list[dict]:
    header, rows = read_csv(path)
    missing = [c for c in INTERVAL_HEADER[:8] if c not in header]
    if missing:
        raise MissingColumn(*missing)
    out = []
    for row in rows:
        rec = dict(zip(header, row))
        for k in ("y_true", "y_hat", "sigma", "lower", "upper"):
            rec[k] = float(rec[k])
        rec["covered"] = rec["covered"] == "true"
        out.append(rec)
    return out


# ---------------------------------------------------------------------------
# uncertainty map

def export_map_data(intervals: Sequence, path, geometry=None, id_property: str = "unit_id") -> Path:
    """Write map-ready uncertainty data.

    Without geometry: CSV (unit_id, adaptivity_class, width, covered).
    With a GeoJSON FeatureCollection (path or dict): a copy whose features
    gain ``width``, ``adaptivity_class``, ``covered`` and ``highlight``
    (``full`` / ``intermediate`` for non-zero widths, null for zero-width
    units, which stay out of the highlight layer).
    """
    recs = [_interval_record(iv) for iv in intervals]
    if geometry is None:
        return write_csv(path, ["unit_id", "adaptivity_class", "width", "covered"],
                         ([r["unit_id"], r["adaptivity_class"], r["width"], r["covered"]] for r in recs))

    gj = json.loads(Path(geometry).read_text()) if not isinstance(geometry, dict) else geometry
    features = gj.get("features", [])
    by_id = {}
    for feat in features:
        props = feat.get("properties") or {}
        key = props.get(id_property, feat.get("id"))
        if key is not None:
            by_id[str(key)] = feat
    unmatched = [r["unit_id"] for r in recs if str(r["unit_id"]) not in by_id]
    if unmatched:
        raise GeometryJoinError(unmatched)

    out_features = []
    for r in recs:
        feat = json.loads(json.dumps(by_id[str(r["unit_id"])]))
        props = feat.setdefault("properties", {})
        if props is None:
            props = feat["properties"] = {}
        props[id_property] = r["unit_id"]
        props["width"] = r["width"]
        props["adaptivity_class"] = r["adaptivity_class"]
        props["covered"] = r["covered"]
        props["highlight"] = None if r["adaptivity_class"] == ZERO_WIDTH else r["adaptivity_class"]
        out_features.append(feat)
    out = {"type": "FeatureCollection", "features": out_features,
           "highlight_layer": {c: [r["unit_id"] for r in recs if r["adaptivity_class"] == c]
                               for c in (FULL, INTERMEDIATE)}}
    return write_json(path, out)


def _interval_record(iv) -> dict:
    if isinstance(iv, PredictionInterval):
        return {"unit_id": iv.unit_id, "adaptivity_class": iv.adaptivity_class,
                "width": iv.width, "covered": iv.covered}
    return {"unit_id": iv["unit_id"], "adaptivity_class": iv["adaptivity_class"],
            "width": float(iv["upper"]) - float(iv["lower"]), "covered": iv["covered"]}
