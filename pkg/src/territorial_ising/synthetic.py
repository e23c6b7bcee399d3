"""Synthetic territorial dataset with a planted hub / periphery structure.

Hubs and peripheral units draw their territorial attributes from different
distributions (so profiles, and hence graph cliques, lean towards one class)
and their indicators load on a latent score whose separation between the two
classes is set by ``field_strength``.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import yaml

from .io import write_csv, write_json
from .network import ATTRIBUTE_COLUMNS

# (name, polarity, group) mirroring a six-theme socio-economic register
INDICATORS = [
    ("PERC_ANZIANI", -1, "MPI1"),
    ("PERC_GIOVANI", 1, "MPI1"),
    ("PERC_FAMIGLIE_MINORI", 1, "MPI1"),
    ("PERC_FAM_UNIPERSONALI_ANZIANI", -1, "MPI1"),
    ("PERC_NEET", -1, "MPI2"),
    ("PERC_LAUREATI", 1, "MPI2"),
    ("PERC_DIPLOMATI", 1, "MPI2"),
    ("REDDITO_MEDIANO_EQUIVALENTE", 1, "MPI3"),
    ("PERC_WORKINGPOOR", -1, "MPI3"),
    ("PERC_PRECARI", -1, "MPI4"),
    ("PERC_OCCUPATI", 1, "MPI4"),
    ("PERC_FAM_BASSA_INTLAV", -1, "MPI4"),
    ("I_ATTRAZIONE", 1, "MPI5"),
    ("I_AUTOCONTENIMENTO", 1, "MPI5"),
    ("I_COESISTENZA", 1, "MPI5"),
    ("STA", -1, "MPI6"),
    ("D_INT", -1, "MPI6"),
    ("D_EST_USCITA", 1, "MPI6"),
    ("D_EST_ENTRATA", 1, "MPI6"),
]

# attribute code probabilities for (periphery, hub)
ATTRIBUTE_PROBS = {
    "ALT": ([0.30, 0.35, 0.35], [0.60, 0.30, 0.10]),
    "POP": ([0.75, 0.23, 0.02], [0.15, 0.60, 0.25]),
    "SUP": ([0.35, 0.50, 0.15], [0.10, 0.50, 0.40]),
    "CLITO": ([0.92, 0.08], [0.80, 0.20]),
    "DEGURB": ([0.03, 0.37, 0.60], [0.30, 0.55, 0.15]),
}
ATTRIBUTE_CODES = {"ALT": (1, 2, 3), "POP": (1, 2, 3), "SUP": (1, 2, 3),
                   "CLITO": (0, 1), "DEGURB": (1, 2, 3)}


def generate(n_units: int = 966, seed: int = 0, field_strength: float = 1.0,
             hub_fraction: float = 0.41, noise: float = 0.6) -> dict:
    """Return a dict with ``header``, ``rows``, ``classes`` and the latent scores."""
    if n_units < 2:
        raise ValueError("need at least two units")
    rng = np.random.default_rng(seed)
    hub = rng.random(n_units) < hub_fraction
    spins = np.where(hub, 1, -1)

    attrs = {}
    for col in ATTRIBUTE_COLUMNS:
        p_periph, p_hub = ATTRIBUTE_PROBS[col]
        codes = np.array(ATTRIBUTE_CODES[col])
        draw_p = rng.choice(codes, size=n_units, p=p_periph)
        draw_h = rng.choice(codes, size=n_units, p=p_hub)
        attrs[col] = np.where(hub, draw_h, draw_p)

    latent = field_strength * spins + rng.standard_normal(n_units)
    groups = sorted({g for _, _, g in INDICATORS})
    group_load = dict(zip(groups, rng.uniform(0.5, 1.0, len(groups))))
    group_factor = {g: latent + 0.5 * rng.standard_normal(n_units) for g in groups}

    values = np.empty((n_units, len(INDICATORS)))
    for j, (_, pol, group) in enumerate(INDICATORS):
        loc = rng.uniform(20, 60)
        scale = rng.uniform(2, 8)
        signal = group_load[group] * group_factor[group]
        values[:, j] = loc + scale * (pol * signal + noise * rng.standard_normal(n_units))

    ids = [f"U{k + 1:04d}" for k in range(n_units)]
    header = ["unit_id", *(name for name, _, _ in INDICATORS), *ATTRIBUTE_COLUMNS, "CLASS"]
    rows = []
    for k in range(n_units):
        rows.append([ids[k], *np.round(values[k], 6).tolist(),
                     *(int(attrs[c][k]) for c in ATTRIBUTE_COLUMNS), int(spins[k])])
    return {"header": header, "rows": rows, "unit_ids": ids, "classes": spins, "latent": latent}


def demo_config(input_name: str, output_dir: str = "out", **overrides) -> dict:
    cfg = {
        "input": input_name,
        "output_dir": output_dir,
        "id_column": "unit_id",
        "class_column": "CLASS",
        "indicators": [{"name": n, "polarity": p, "group": g} for n, p, g in INDICATORS],
        "groups": {g: "positive" for g in sorted({g for _, _, g in INDICATORS})},
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(cfg.get(key), dict):
            cfg[key].update(value)
        else:
            cfg[key] = value
    return cfg


def grid_geometry(unit_ids) -> dict:
    """Unit squares on a near-square grid, one polygon feature per unit."""
    cols = max(1, math.ceil(math.sqrt(len(unit_ids))))
    feats = []
    for k, uid in enumerate(unit_ids):
        x, y = k % cols, k // cols
        ring = [[x, y], [x + 1, y], [x + 1, y + 1], [x, y + 1], [x, y]]
        feats.append({"type": "Feature", "properties": {"unit_id": uid},
                      "geometry": {"type": "Polygon", "coordinates": [ring]}})
    return {"type": "FeatureCollection", "features": feats}


def write_dataset(out_dir, n_units: int = 966, seed: int = 0, field_strength: float = 1.0,
                  with_geometry: bool = False, config_overrides: dict | None = None) -> dict:
    """Write ``units.csv``, ``config.yaml`` and optionally ``geometry.geojson`` to ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = generate(n_units, seed, field_strength)
    csv_path = write_csv(out / "units.csv", data["header"], data["rows"])
    overrides = dict(config_overrides or {})
    paths = {"csv": csv_path}
    if with_geometry:
        paths["geometry"] = write_json(out / "geometry.geojson", grid_geometry(data["unit_ids"]))
        overrides.setdefault("geometry", "geometry.geojson")
    cfg = demo_config("units.csv", "out", **overrides)
    cfg_path = out / "config.yaml"
    cfg_path.write_text(yaml.safe_dump(cfg, sort_keys=False))
    paths["config"] = cfg_path
    return paths
