import csv
import json
import shutil

import numpy as np
import pytest
import yaml

from territorial_ising import pipeline
from territorial_ising.cli import main
from territorial_ising.config import RunConfig
from territorial_ising.conformal import prediction_intervals
from territorial_ising.errors import (ConfigError, DuplicateUnit, GeometryJoinError,
                                      InvalidAttribute, InvalidClassLabel, MissingColumn,
                                      ParseError, StageError)
from territorial_ising.io import export_map_data, ingest, read_csv
from territorial_ising.synthetic import grid_geometry, write_dataset

SMALL = {
    "chain": {"n_iter": 20_000, "chains": 2, "seed": 7},
    "replicates": {"k": 200, "n": 50},
    "diagnostics": {"n_configurations": 500, "bootstrap_r": 40, "bootstrap_m": 100},
}


def small_dataset(root, n_units=120, geometry=False, **extra):
    overrides = {k: dict(v) for k, v in SMALL.items()}
    for key, value in extra.items():
        overrides.setdefault(key, {}).update(value)
    paths = write_dataset(root, n_units=n_units, seed=3, with_geometry=geometry,
                          config_overrides=overrides)
    return paths["config"]


@pytest.fixture(scope="module")
def finished_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("run")
    cfg = RunConfig.load(small_dataset(root))
    manifest = pipeline.run(cfg)
    return cfg, manifest


def edit_csv(src, dst, fn):
    header, rows = read_csv(src)
    header, rows = fn(header, rows)
    with open(dst, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return dst


class TestIngest:
    @pytest.fixture()
    def dataset(self, tmp_path):
        cfg = RunConfig.load(small_dataset(tmp_path, n_units=30))
        return cfg, cfg.path("input")

    def test_roundtrip(self, dataset):
        cfg, path = dataset
        roster = ingest(path, cfg.indicator_specs())
        assert len(roster) == 30 and roster.table.values.shape == (30, 19)
        assert set(np.unique(roster.reference)) <= {-1, 1}
        assert roster.record(0).unit_id == "U0001"

    def test_full_size_file(self, tmp_path):
        cfg = RunConfig.load(write_dataset(tmp_path, n_units=966, seed=1)["config"])
        assert len(ingest(cfg.path("input"), cfg.indicator_specs())) == 966

    def test_missing_value_names_row_and_column(self, dataset, tmp_path):
        cfg, path = dataset

        def blank(header, rows):
            rows[4][header.index("PERC_NEET")] = ""
            return header, rows
        bad = edit_csv(path, tmp_path / "bad.csv", blank)
        with pytest.raises(ParseError) as exc:
            ingest(bad, cfg.indicator_specs())
        assert exc.value.row == 6 and exc.value.column == "PERC_NEET"
        assert "row 6" in str(exc.value) and "PERC_NEET" in str(exc.value)

    def test_duplicate_unit(self, dataset, tmp_path):
        cfg, path = dataset
        bad = edit_csv(path, tmp_path / "dup.csv", lambda h, r: (h, r + [r[0]]))
        with pytest.raises(DuplicateUnit):
            ingest(bad, cfg.indicator_specs())

    def test_missing_column(self, dataset, tmp_path):
        cfg, path = dataset

        def drop(header, rows):
            k = header.index("DEGURB")
            return header[:k] + header[k + 1:], [r[:k] + r[k + 1:] for r in rows]
        with pytest.raises(MissingColumn):
            ingest(edit_csv(path, tmp_path / "m.csv", drop), cfg.indicator_specs())

    @pytest.mark.parametrize("column,value,error", [
        ("CLASS", "2", InvalidClassLabel),
        ("CLASS", "hub", InvalidClassLabel),
        ("ALT", "4", InvalidAttribute),
        ("CLITO", "2", InvalidAttribute),
    ])
    def test_bad_labels(self, dataset, tmp_path, column, value, error):
        cfg, path = dataset

        def poke(header, rows):
            rows[2][header.index(column)] = value
            return header, rows
        with pytest.raises(error):
            ingest(edit_csv(path, tmp_path / "b.csv", poke), cfg.indicator_specs())

    def test_zero_one_labels(self, dataset, tmp_path):
        cfg, path = dataset

        def recode(header, rows):
            k = header.index("CLASS")
            for r in rows:
                r[k] = "0" if r[k] == "-1" else "1"
            return header, rows
        a = ingest(path, cfg.indicator_specs()).reference
        b = ingest(edit_csv(path, tmp_path / "z.csv", recode), cfg.indicator_specs()).reference
        np.testing.assert_array_equal(a, b)


class TestConfig:
    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"input": "x.csv", "bogus": 1})

    def test_hash_ignores_workers_and_output(self, finished_run):
        cfg, _ = finished_run
        assert cfg.override(workers=5, out_dir="/tmp/elsewhere").hash() == cfg.hash()

    def test_hash_tracks_semantic_fields(self, finished_run):
        cfg, _ = finished_run
        assert cfg.override(seed=cfg.seed + 1).hash() != cfg.hash()
        raw = json.loads(json.dumps(cfg.raw))
        raw["schedule"]["t0"] = 100  # int versus float is not a semantic change
        assert RunConfig(raw, cfg.base_dir).hash() == cfg.hash()
        raw["conformal"]["alpha"] = 0.1
        assert RunConfig(raw, cfg.base_dir).hash() != cfg.hash()


class TestPipeline:
    def test_outputs(self, finished_run):
        cfg, manifest = finished_run
        out = cfg.output_dir
        assert manifest["status"] == "complete"
        assert list(manifest["stages"]) == list(pipeline.STAGES)
        for key in ("indices", "field", "pca", "edges", "graph_summary", "marginals", "trace",
                    "simulation", "diagnostics", "intervals", "conformal_summary", "map_csv",
                    "manifest"):
            assert (out / pipeline.FILES[key]).exists(), key
        stored = json.loads((out / "manifest.json").read_text())
        assert stored["config_hash"] == cfg.hash() and stored["seed"] == 7

    def test_marginals_valid(self, finished_run):
        cfg, _ = finished_run
        header, rows = read_csv(cfg.output_dir / "marginals.csv")
        p = np.array([float(r[1]) for r in rows])
        assert header == ["unit_id", "p_hat", "sigma"] and len(rows) == 120
        assert np.all((p >= 0) & (p <= 1))

    def test_stage_idempotent(self, finished_run):
        cfg, _ = finished_run
        names = ("marginals", "diagnostics", "intervals", "map_csv")
        before = {k: (cfg.output_dir / pipeline.FILES[k]).read_bytes() for k in names}
        pipeline.run(cfg, ("simulate", "diagnose", "conformal", "map"))
        for k in names:
            assert (cfg.output_dir / pipeline.FILES[k]).read_bytes() == before[k], k

    def test_workers_and_rerun_deterministic(self, finished_run, tmp_path):
        cfg, _ = finished_run
        other = cfg.override(workers=3, out_dir=str(tmp_path))
        pipeline.run(other)
        for key in ("marginals", "intervals", "diagnostics", "field", "edges"):
            assert (tmp_path / pipeline.FILES[key]).read_bytes() == \
                (cfg.output_dir / pipeline.FILES[key]).read_bytes(), key

    def test_stage_needs_upstream(self, tmp_path):
        cfg = RunConfig.load(small_dataset(tmp_path))
        with pytest.raises(StageError) as exc:
            pipeline.run(cfg, ("simulate",))
        assert exc.value.stage == "simulate"
        manifest = json.loads((cfg.output_dir / "manifest.json").read_text())
        assert manifest["status"] == "incomplete" and manifest["failed_stage"] == "simulate"

    def test_chains_mode(self, tmp_path):
        cfg = RunConfig.load(small_dataset(tmp_path, n_units=40,
                                           replicates={"mode": "chains", "k": 4, "n_iter": 4000}))
        pipeline.run(cfg)
        sim = json.loads((cfg.output_dir / "simulation.json").read_text())
        assert sim["replicate_mode"] == "chains"


class TestMap:
    def test_all_zero_width(self, tmp_path):
        ivs = prediction_intervals([0.2, 0.8], [0.0, 0.0], 2.0, ["a", "b"])
        gj = grid_geometry(["a", "b"])
        out = json.loads(export_map_data(ivs, tmp_path / "m.geojson", gj).read_text())
        assert out["highlight_layer"] == {"full": [], "intermediate": []}
        assert all(f["properties"]["highlight"] is None for f in out["features"])

    def test_full_and_intermediate(self, tmp_path):
        ivs = prediction_intervals([0.5, 0.5, 0.5], [1.0, 0.1, 0.0], 1.0, ["a", "b", "c"])
        out = json.loads(export_map_data(ivs, tmp_path / "m.geojson",
                                         grid_geometry(["a", "b", "c"])).read_text())
        assert out["highlight_layer"] == {"full": ["a"], "intermediate": ["b"]}
        props = {f["properties"]["unit_id"]: f["properties"] for f in out["features"]}
        assert props["a"]["width"] == 1.0 and props["c"]["width"] == 0.0
        assert out["features"][0]["geometry"]["type"] == "Polygon"

    def test_missing_geometry(self, tmp_path):
        ivs = prediction_intervals([0.5, 0.5], [0.1, 0.1], 1.0, ["a", "z"])
        with pytest.raises(GeometryJoinError) as exc:
            export_map_data(ivs, tmp_path / "m.geojson", grid_geometry(["a"]))
        assert exc.value.unmatched == ["z"]

    def test_csv_fallback(self, tmp_path):
        ivs = prediction_intervals([0.5], [0.1], 1.0, ["a"])
        header, rows = read_csv(export_map_data(ivs, tmp_path / "m.csv"))
        assert header == ["unit_id", "adaptivity_class", "width", "covered"]
        assert rows[0][:2] == ["a", "intermediate"]


class TestCli:
    def test_gen_and_pipeline(self, tmp_path, capsys):
        assert main(["gen-synthetic", "--out-dir", str(tmp_path), "--n-units", "60",
                     "--geometry"]) == 0
        cfg_path = tmp_path / "config.yaml"
        raw = yaml.safe_load(cfg_path.read_text())
        raw.update({k: dict(v) for k, v in SMALL.items()})
        cfg_path.write_text(yaml.safe_dump(raw))
        assert main(["pipeline", "--config", str(cfg_path), "--workers", "2"]) == 0
        assert (tmp_path / "out" / "uncertainty_map.geojson").exists()
        assert "outputs in" in capsys.readouterr().out

    def test_single_stage_command(self, tmp_path):
        cfg_path = small_dataset(tmp_path, n_units=40)
        assert main(["indices", "--config", str(cfg_path), "--out-dir", str(tmp_path / "o")]) == 0
        assert (tmp_path / "o" / "indices.csv").exists()

    def test_stage_failure_exit_code(self, tmp_path, capsys):
        cfg_path = small_dataset(tmp_path, n_units=40)
        assert main(["conformal", "--config", str(cfg_path)]) == 2
        assert "conformal" in capsys.readouterr().err

    def test_config_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("input: x.csv\nnonsense: 1\n")
        assert main(["pipeline", "--config", str(bad)]) == 1

    def test_missing_geometry_fails_map_stage(self, tmp_path):
        cfg_path = small_dataset(tmp_path, n_units=40, geometry=True)
        gj = json.loads((tmp_path / "geometry.geojson").read_text())
        gj["features"] = gj["features"][1:]
        (tmp_path / "geometry.geojson").write_text(json.dumps(gj))
        assert main(["pipeline", "--config", str(cfg_path)]) == 2
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["failed_stage"] == "map" and "U0001" in manifest["error"]
        shutil.rmtree(tmp_path / "out")
