"""Declarative run configuration (YAML or JSON)."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import yaml

from .conformal import ConformalConfig
from .errors import ConfigError
from .indices import NEGATIVE, POSITIVE, IndicatorSpec
from .sampler import SCHEDULE_KINDS, AnnealingSchedule, ChainSpec

DEFAULTS = {
    "input": None,
    "geometry": None,
    "output_dir": "out",
    "id_column": "unit_id",
    "class_column": "CLASS",
    "indicators": [],
    "groups": {},
    "field": {"n_components": None},
    "graph": {"min_match": 5, "spectrum_cap": 5000},
    "schedule": {"kind": "hyperbolic", "t0": 100.0},
    "chain": {
        "n_iter": 600_000,
        "burn_in_fraction": 0.10,
        "seed": 20240101,
        "workers": 1,
        "chains": 6,
        "trace_stride": None,
    },
    # mode "resample": k batches of n Bernoulli configurations from the pooled marginals
    # mode "chains": k independent chains of n_iter iterations each
    "replicates": {"mode": "resample", "k": 20_000, "n": 300, "n_iter": None,
                   "save_matrix": False},
    "diagnostics": {
        "n_configurations": 25_000,
        "temperature": 1.0,
        "bootstrap_r": 200,
        "bootstrap_m": 1000,
        "bootstrap_alpha": 0.05,
    },
    "conformal": {"alpha": 0.05, "calibration_fraction": 0.5, "seed": None},
}

# fields that never change results and are excluded from the config hash
NON_SEMANTIC = (("output_dir",), ("chain", "workers"))


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


@dataclass
class RunConfig:
    raw: dict
    base_dir: Path

    @classmethod
    def from_dict(cls, data: dict, base_dir: str | Path = ".") -> "RunConfig":
        unknown = set(data) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        cfg = cls(_merge(DEFAULTS, data), Path(base_dir))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        try:
            data = yaml.safe_load(path.read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a mapping")
        return cls.from_dict(data, path.parent)

    def override(self, seed: int | None = None, workers: int | None = None,
                 out_dir: str | None = None) -> "RunConfig":
        raw = copy.deepcopy(self.raw)
        if seed is not None:
            raw["chain"]["seed"] = int(seed)
        if workers is not None:
            raw["chain"]["workers"] = int(workers)
        if out_dir is not None:
            raw["output_dir"] = str(Path(out_dir).resolve())
        cfg = RunConfig(raw, self.base_dir)
        cfg.validate()
        return cfg

    def validate(self):
        r = self.raw
        try:
            self.indicator_specs()
            self.schedule()
            self.chain_spec()
            self.conformal_config()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        for group, direction in r["groups"].items():
            if direction not in (POSITIVE, NEGATIVE):
                raise ConfigError(f"group {group!r}: direction must be positive or negative")
        if r["schedule"]["kind"] not in SCHEDULE_KINDS:
            raise ConfigError(f"unknown schedule kind {r['schedule']['kind']!r}")
        if r["replicates"]["mode"] not in ("resample", "chains"):
            raise ConfigError("replicates.mode must be 'resample' or 'chains'")
        if int(r["replicates"]["k"]) < 1 or int(r["replicates"]["n"]) < 1:
            raise ConfigError("replicates.k and replicates.n must be positive")
        if int(r["chain"]["chains"]) < 1:
            raise ConfigError("chain.chains must be positive")
        if not 1 <= int(r["graph"]["min_match"]) <= 5:
            raise ConfigError("graph.min_match must be within 1..5")
        d = r["diagnostics"]
        if int(d["n_configurations"]) < 1 or float(d["temperature"]) <= 0:
            raise ConfigError("diagnostics.n_configurations and temperature must be positive")
        if not 0 < float(d["bootstrap_alpha"]) < 1:
            raise ConfigError("diagnostics.bootstrap_alpha must lie in (0, 1)")
        nc = r["field"]["n_components"]
        if nc is not None and int(nc) < 1:
            raise ConfigError("field.n_components must be positive")

    # typed views -----------------------------------------------------------
    def path(self, key: str) -> Path | None:
        value = self.raw[key]
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def output_dir(self) -> Path:
        return self.path("output_dir")

    def indicator_specs(self) -> list[IndicatorSpec]:
        specs = []
        for item in self.raw["indicators"]:
            if isinstance(item, str):
                item = {"name": item}
            specs.append(IndicatorSpec(str(item["name"]), int(item.get("polarity", 1)),
                                       str(item.get("group", "MPI1"))))
        if not specs:
            raise ConfigError("no indicators configured")
        names = [s.name for s in specs]
        if len(set(names)) != len(names):
            raise ConfigError("indicator names must be unique")
        return specs

    def directions(self) -> dict[str, str]:
        return dict(self.raw["groups"])

    def schedule(self) -> AnnealingSchedule:
        s = self.raw["schedule"]
        return AnnealingSchedule(s["kind"], float(s["t0"]))

    def chain_spec(self) -> ChainSpec:
        c = self.raw["chain"]
        return ChainSpec(int(c["n_iter"]), float(c["burn_in_fraction"]), int(c["seed"]),
                         int(c["workers"]), c["trace_stride"])

    @property
    def seed(self) -> int:
        return int(self.raw["chain"]["seed"])

    def conformal_config(self) -> ConformalConfig:
        c = self.raw["conformal"]
        seed = c["seed"] if c["seed"] is not None else self.seed
        return ConformalConfig(float(c["alpha"]), float(c["calibration_fraction"]), int(seed))

    def semantic_dict(self) -> dict:
        data = copy.deepcopy(self.raw)
        for path in NON_SEMANTIC:
            node = data
            for key in path[:-1]:
                node = node[key]
            node.pop(path[-1], None)
        for key in ("input", "geometry"):
            p = self.path(key)
            data[key] = str(p.resolve()) if p is not None else None
        # canonical numeric types so that 100 and 100.0 hash alike
        data["indicators"] = [vars(s) for s in self.indicator_specs()]
        sched = self.schedule()
        data["schedule"] = {"kind": sched.kind, "t0": sched.t0}
        spec = self.chain_spec()
        data["chain"].update(n_iter=spec.n_iter, burn_in_fraction=spec.burn_in_fraction,
                             seed=spec.seed, chains=int(data["chain"]["chains"]))
        conf = self.conformal_config()
        data["conformal"] = {"alpha": conf.alpha, "calibration_fraction": conf.calibration_fraction,
                             "seed": conf.seed}
        d = data["diagnostics"]
        for key in ("temperature", "bootstrap_alpha"):
            d[key] = float(d[key])
        for key in ("n_configurations", "bootstrap_r", "bootstrap_m"):
            d[key] = int(d[key])
        rep = data["replicates"]
        rep["k"], rep["n"] = int(rep["k"]), int(rep["n"])
        rep.pop("save_matrix", None)
        return data

    def hash(self) -> str:
        blob = json.dumps(self.semantic_dict(), sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(blob.encode()).hexdigest()
