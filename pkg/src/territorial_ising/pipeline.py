"""Stage runners. Every stage reads its inputs from files written by earlier
stages, so any stage can be re-run on its own from persisted artifacts."""

from __future__ import annotations

import logging
import platform
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .conformal import split_conformal
from .diagnostics import (bootstrap_ci, jensen_shannon, mismatch, predict_classes,
                          score_configurations, summary_stats)
from .errors import DimensionMismatch, IsingError, StageError
from .indices import composite_indices, correlation_matrix, external_field, pca
from .io import (export_map_data, ingest, read_csv, read_edges, read_intervals, read_marginals,
                 read_vector, write_edges, write_intervals, write_json, write_marginals,
                 write_matrix, write_vector, write_csv)
from .network import build_graph, spectrum_summary
from .sampler import (ChainSpec, replicate_seed, resample_replicates,
                      run_replicates, sample_configurations)

log = logging.getLogger(__name__)

STAGES = ("indices", "field", "graph", "simulate", "diagnose", "conformal", "map")

FILES = {
    "indices": "indices.csv",
    "field": "field.csv",
    "pca": "pca.json",
    "edges": "edges.csv",
    "graph_summary": "graph_summary.json",
    "marginals": "marginals.csv",
    "trace": "energy_trace.csv",
    "replicates": "replicates.npy",
    "simulation": "simulation.json",
    "diagnostics": "diagnostics.json",
    "intervals": "intervals.csv",
    "conformal_summary": "conformal_summary.json",
    "map_csv": "uncertainty_map.csv",
    "map_geojson": "uncertainty_map.geojson",
    "manifest": "manifest.json",
}

# independent random streams derived from the master seed
STREAM_RESAMPLE = 1
STREAM_DIAGNOSE = 2
STREAM_BOOTSTRAP = 3
DIAG_CHUNK = 2000


def stream_seed(seed: int, stream: int, index: int = 0) -> int:
    return replicate_seed(seed, (stream << 48) + index)


def _out(cfg: RunConfig, key: str) -> Path:
    return cfg.output_dir / FILES[key]


def _roster(cfg: RunConfig):
    return ingest(cfg.path("input"), cfg.indicator_specs(), cfg.raw["id_column"],
                  cfg.raw["class_column"])


def _check_order(expected, got, what: str):
    if list(expected) != list(got):
        raise DimensionMismatch(f"{what} unit order does not match the input roster")


def _load_field(cfg, roster):
    ids, h = read_vector(_out(cfg, "field"))
    _check_order(roster.unit_ids, ids, FILES["field"])
    return h


def _load_graph(cfg, roster):
    return read_edges(_out(cfg, "edges"), len(roster))


# ---------------------------------------------------------------------------

def stage_indices(cfg: RunConfig) -> dict:
    roster = _roster(cfg)
    names, mat = composite_indices(roster.table, cfg.directions())
    write_matrix(_out(cfg, "indices"), roster.unit_ids, names, mat)
    return {"units": len(roster), "groups": names}


def stage_field(cfg: RunConfig) -> dict:
    header, rows = read_csv(_out(cfg, "indices"))
    ids = [r[0] for r in rows]
    names = header[1:]
    mat = np.array([[float(v) for v in r[1:]] for r in rows])
    decomp = pca(mat, names)
    fld = external_field(decomp, ids, cfg.raw["field"]["n_components"])
    write_vector(_out(cfg, "field"), ids, fld.h)
    write_json(_out(cfg, "pca"), {
        "inputs": names,
        "correlation": correlation_matrix(mat),
        "sdevs": decomp.sdevs,
        "lambdas": decomp.lambdas,
        "cumulative": decomp.cumulative,
        "loadings": decomp.loadings,
        "n_components_used": cfg.raw["field"]["n_components"] or len(names),
    })
    return {"components": len(names), "lambdas": decomp.lambdas.tolist()}


def stage_graph(cfg: RunConfig) -> dict:
    roster = _roster(cfg)
    g = build_graph(roster.profiles, int(cfg.raw["graph"]["min_match"]), roster.unit_ids)
    write_edges(_out(cfg, "edges"), g)
    summary = g.summary()
    cap = int(cfg.raw["graph"]["spectrum_cap"])
    summary["spectrum"] = spectrum_summary(g, cap) if 1 <= g.n <= cap else None
    write_json(_out(cfg, "graph_summary"), summary)
    return {"edges": g.n_edges, "components": summary["component_count"]}


def simulate(cfg: RunConfig, roster, graph, h):
    """Chains plus replicate estimates. Returns (p_hat, estimate, chains)."""
    spec = cfg.chain_spec()
    schedule = cfg.schedule()
    rep = cfg.raw["replicates"]
    if rep["mode"] == "chains":
        n_iter = int(rep["n_iter"] or spec.n_iter)
        rspec = ChainSpec(n_iter, spec.burn_in_fraction, spec.seed, spec.workers, spec.trace_stride)
        est, chains = run_replicates(roster.reference, graph, h, schedule, rspec, int(rep["k"]),
                                     roster.unit_ids, return_chains=True)
        return est.p_hat, est, chains
    pooled, chains = run_replicates(roster.reference, graph, h, schedule, spec,
                                    int(cfg.raw["chain"]["chains"]), roster.unit_ids,
                                    return_chains=True)
    est = resample_replicates(pooled.p_hat, int(rep["k"]), int(rep["n"]),
                              stream_seed(spec.seed, STREAM_RESAMPLE), roster.unit_ids)
    return pooled.p_hat, est, chains


def stage_simulate(cfg: RunConfig) -> dict:
    roster = _roster(cfg)
    h = _load_field(cfg, roster)
    graph = _load_graph(cfg, roster)
    t = time.perf_counter()
    p_hat, est, chains = simulate(cfg, roster, graph, h)
    elapsed = time.perf_counter() - t
    write_marginals(_out(cfg, "marginals"), roster.unit_ids, p_hat, est.sigma)
    first = chains[0]
    write_csv(_out(cfg, "trace"), ["iteration", "energy"],
              zip(first.trace_iterations.tolist(), first.trace_energies.tolist()))
    if cfg.raw["replicates"]["save_matrix"]:
        np.save(_out(cfg, "replicates"), est.replicates)
    info = {
        "chains": len(chains),
        "n_iter_per_chain": first.n_iter,
        "burn_in_per_chain": first.n_iter - first.samples_used,
        "samples_used_per_chain": chains[0].samples_used,
        "accepted_moves": [c.accepted for c in chains],
        "initial_energy": chains[0].initial_energy,
        "final_energies": [c.final_energy for c in chains],
        "replicate_mode": cfg.raw["replicates"]["mode"],
        "replicates": est.k,
        "simulate_seconds": elapsed,
    }
    write_json(_out(cfg, "simulation"), info)
    return {"seconds": elapsed, "chains": len(chains), "replicates": est.k}


def stage_diagnose(cfg: RunConfig) -> dict:
    roster = _roster(cfg)
    h = _load_field(cfg, roster)
    graph = _load_graph(cfg, roster)
    ids, p_hat, _ = read_marginals(_out(cfg, "marginals"))
    _check_order(roster.unit_ids, ids, FILES["marginals"])
    d = cfg.raw["diagnostics"]
    seed = cfg.seed
    temperature = float(d["temperature"])

    n_total = int(d["n_configurations"])
    parts = []
    for c, start in enumerate(range(0, n_total, DIAG_CHUNK)):
        size = min(DIAG_CHUNK, n_total - start)
        configs = sample_configurations(p_hat, size, stream_seed(seed, STREAM_DIAGNOSE, c))
        parts.append(score_configurations(configs, roster.reference, graph, h, temperature,
                                          allow_zero_reference=True))
    energy = np.concatenate([p.energy for p in parts])
    ratio = np.concatenate([p.energy_ratio for p in parts])
    llr = np.concatenate([p.loglik_ratio for p in parts])
    drop_log = np.concatenate([p.energy_drop_log for p in parts])
    h_ref = parts[0].h_ref

    predicted, ties = predict_classes(p_hat)
    mm = mismatch(roster.reference, predicted)
    y_obs = (roster.reference == 1).astype(float)
    boot_seed = stream_seed(seed, STREAM_BOOTSTRAP)
    r, m, a = int(d["bootstrap_r"]), int(d["bootstrap_m"]), float(d["bootstrap_alpha"])
    workers = cfg.chain_spec().workers
    boots = {"loglik_ratio": bootstrap_ci(llr, r, m, a, boot_seed, workers),
             "energy": bootstrap_ci(energy, r, m, a, boot_seed + 1, workers)}
    if h_ref != 0:
        boots["energy_ratio"] = bootstrap_ci(ratio, r, m, a, boot_seed + 2, workers)

    out = {
        "h_ref": h_ref,
        "n_configurations": n_total,
        "temperature": temperature,
        "energy_summary": summary_stats(energy),
        "energy_ratio_summary": summary_stats(ratio) if h_ref != 0 else None,
        "loglik_ratio_summary": summary_stats(llr),
        "auxiliary_log_energy_drop_summary": {
            "definition": "ln(H_ref - H) over configurations with H < H_ref",
            "count": int(np.sum(~np.isnan(drop_log))),
            **summary_stats(drop_log),
        },
        "share_energy_ratio_below_1": float(np.mean(ratio < 1)) if h_ref > 0 else None,
        "jsd": jensen_shannon(y_obs, p_hat),
        "mismatch": mm.as_dict(),
        "accuracy": mm.accuracy,
        "threshold_ties": ties,
        "bootstrap": boots,
    }
    write_json(_out(cfg, "diagnostics"), out)
    return {"accuracy": mm.accuracy, "jsd": out["jsd"], "h_ref": h_ref}


def stage_conformal(cfg: RunConfig) -> dict:
    roster = _roster(cfg)
    ids, p_hat, sigma = read_marginals(_out(cfg, "marginals"))
    _check_order(roster.unit_ids, ids, FILES["marginals"])
    y = (roster.reference == 1).astype(float)
    intervals, splits, summary = split_conformal(y, p_hat, sigma, cfg.conformal_config(),
                                                 roster.unit_ids)
    write_intervals(_out(cfg, "intervals"), intervals, y, sigma, splits)
    write_json(_out(cfg, "conformal_summary"), summary)
    return {"coverage": summary["coverage"], "miw": summary["miw"], "q_hat": summary["q_hat"]}


def stage_map(cfg: RunConfig) -> dict:
    recs = read_intervals(_out(cfg, "intervals"))
    geometry = cfg.path("geometry")
    if geometry is None:
        path = export_map_data(recs, _out(cfg, "map_csv"))
    else:
        path = export_map_data(recs, _out(cfg, "map_geojson"), geometry)
    highlighted = sum(r["adaptivity_class"] != "zero_width" for r in recs)
    return {"path": path.name, "highlighted": highlighted}


RUNNERS = {
    "indices": stage_indices,
    "field": stage_field,
    "graph": stage_graph,
    "simulate": stage_simulate,
    "diagnose": stage_diagnose,
    "conformal": stage_conformal,
    "map": stage_map,
}


def _versions() -> dict:
    import numba
    import scipy
    return {"territorial_ising": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__, "numba": numba.__version__}


def run(cfg: RunConfig, stages=STAGES) -> dict:
    """Run ``stages`` in order and write the manifest. Raises StageError on failure."""
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "status": "running",
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "workers": cfg.chain_spec().workers,
        "versions": _versions(),
        "started": datetime.now(timezone.utc).isoformat(),
        "config": cfg.semantic_dict(),
        "stages": {},
    }
    for stage in stages:
        t = time.perf_counter()
        log.info("stage %s", stage)
        try:
            info = RUNNERS[stage](cfg)
        except (IsingError, OSError, ValueError, KeyError) as exc:
            manifest["status"] = "incomplete"
            manifest["failed_stage"] = stage
            manifest["error"] = f"{type(exc).__name__}: {exc}"
            write_json(_out(cfg, "manifest"), manifest)
            raise StageError(stage, exc) from exc
        manifest["stages"][stage] = {"seconds": time.perf_counter() - t, **info}
    manifest["status"] = "complete"
    write_json(_out(cfg, "manifest"), manifest)
    return manifest
