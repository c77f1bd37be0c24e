"""Command-line front end: reproducible pipelines from a single config document.

Every run validates its config (unknown keys are rejected), derives a content
digest, writes the command artifacts plus a manifest, and exits 0 on success,
2 on config violations, 3 on numeric degeneracy.  Reruns with the same config
produce byte-identical data files; only the manifest carries a timestamp.
"""

import argparse
import csv
import datetime
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import __version__
from .bfi import (Bfi, bfi_from_json, bfi_to_json, csi_to_bfi, dequantize,
                  givens_reconstruct, quantize, unpack_quantized)
from .channel import (ArrayGeometry, PathScenario, SubcarrierGrid, csi_record, derive_seed,
                      half_wavelength_geometry, matrix_to_pairs, parse_csi_record,
                      scatter_cluster, static_path_cluster)
from .crb import CrbConfig, PositionParams, crb_map_rows, position_analysis, wrap_angle_diffs
from .errors import DegenerateInputError, InvalidInputError
from .evaluation import (gen_dataset, ks_gaussian_pvalue, mc_estimator_variance,
                         split_dataset, train_eval_positioner, write_dataset_csv,
                         write_errors_csv)
from .mlp import MlpSpec
from .selection import (RoiGrid, SelectionResult, annulus_roi, best_element_map,
                        coverage_counts, greedy_select, parameter_roi, selection_to_json)
from .bfi import bfi_element_count, csi_to_bfi_batch

OUTPUT_DIR_ENV = "BFISENSE_OUTPUT_DIR"

COMMANDS = ("simulate-csi", "csi2bfi", "bfi2v", "quantize", "crb-map", "select",
            "ks-test", "music-mc", "evaluate")


class ConfigError(ValueError):
    """The config document violates the schema."""


# ---------------------------------------------------------------------------
# Config schema (allowed keys per section; unknown keys are rejected)

_SCHEMA = {
    "seed": None,
    "workers": None,
    "scenario": {
        "n_rx": None, "n_tx": None, "rx_spacing": None, "tx_spacing": None,
        "center_frequency": None, "spacing": None, "n_subcarriers": None,
        "snr_db": None, "los_gain": None, "aoa_mode": None,
        "default_aod": None, "default_distance": None,
        "cluster": {"seed": None, "n_paths": None, "radius_range": None,
                    "angle_range": None, "gain_range": None},
        "static_cluster": {"seed": None, "n_paths": None, "distance_range": None,
                           "angle_range": None, "gain_range": None},
    },
    "position": {"names": None, "values": None},
    "roi": {"target": None, "r": None, "seed": None, "d_range": None, "angle_range_deg": None,
            "value_range": None},
    "crb": {"n_mc": None, "fd_step_angle": None, "fd_step_distance": None,
            "ridge": None, "seed": None},
    "simulate": {"n_samples": None, "k": None, "noiseless": None},
    "quantize": {"b_psi": None},
    "select": {"n_sel": None, "mode": None},
    "ks": {"n_samples": None, "center": None},
    "music": {"snr_db": None, "trials": None, "grid_step_deg": None, "grid_range_deg": None,
              "n_sources": None},
    "evaluate": {"method": None, "n_sel": None, "samples_per_pos": None, "train_frac": None,
                 "epochs": None, "hidden": None, "learning_rate": None, "batch_size": None,
                 "mlp_seed": None, "encoding": None, "split_seed": None, "data_seed": None},
}

_DEFAULTS = {
    "seed": 0,
    "scenario": {
        "n_rx": 4, "n_tx": 4, "center_frequency": 5.825e9, "spacing": 312.5e3,
        "n_subcarriers": 1, "snr_db": 20.0, "los_gain": [1.0, 0.0], "aoa_mode": "tied",
        "default_aod": 0.0, "default_distance": 5.0,
        "cluster": {"seed": 11, "n_paths": 4},
    },
    "position": {"names": ["aod"], "values": [0.0]},
    "roi": {"target": "location", "r": 100, "seed": 0, "d_range": [5.0, 10.0],
            "angle_range_deg": [-90.0, 90.0]},
    "crb": {},
    "simulate": {"n_samples": 1, "noiseless": False},
    "quantize": {"b_psi": 7},
    "select": {"n_sel": 5, "mode": "information"},
    "ks": {"n_samples": 10000, "center": True},
    "music": {"snr_db": [10.0, 15.0, 20.0, 25.0, 30.0], "trials": 500,
              "grid_step_deg": 0.5, "grid_range_deg": [-90.0, 90.0], "n_sources": 1},
    "evaluate": {"method": "all", "n_sel": 5, "samples_per_pos": 2, "train_frac": 0.8,
                 "epochs": 200, "hidden": 128, "learning_rate": 1e-3, "batch_size": 64,
                 "mlp_seed": 0, "encoding": "raw", "split_seed": 0, "data_seed": 1000},
}


def _validate_keys(obj, schema, path="config"):
    if not isinstance(obj, dict):
        raise ConfigError(f"{path} must be an object")
    for key, value in obj.items():
        if key not in schema:
            raise ConfigError(f"unknown key {path}.{key}")
        sub = schema[key]
        if isinstance(sub, dict) and value is not None:
            _validate_keys(value, sub, f"{path}.{key}")


def _merge(base, override):
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def effective_config(raw: dict) -> dict:
    _validate_keys(raw, _SCHEMA)
    return _merge(_DEFAULTS, raw)


def config_digest(cfg: dict) -> str:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


# ---------------------------------------------------------------------------
# Builders

def build_scenario(cfg: dict) -> PathScenario:
    sc = cfg["scenario"]
    grid = SubcarrierGrid(center_frequency=float(sc["center_frequency"]),
                          spacing=float(sc["spacing"]),
                          n_subcarriers=int(sc["n_subcarriers"]))
    if sc.get("rx_spacing") is None or sc.get("tx_spacing") is None:
        geom = half_wavelength_geometry(int(sc["n_rx"]), int(sc["n_tx"]),
                                        float(sc["center_frequency"]))
    else:
        geom = ArrayGeometry(n_rx=int(sc["n_rx"]), n_tx=int(sc["n_tx"]),
                             rx_spacing=float(sc["rx_spacing"]),
                             tx_spacing=float(sc["tx_spacing"]))
    cluster = ()
    if sc.get("cluster") is not None:
        cl = dict(_DEFAULTS["scenario"]["cluster"])
        cl.update(sc["cluster"])
        kwargs = {}
        for key in ("radius_range", "gain_range"):
            if cl.get(key) is not None:
                kwargs[key] = tuple(cl[key])
        if cl.get("angle_range") is not None:
            kwargs["angle_range"] = float(cl["angle_range"])
        cluster = scatter_cluster(seed=int(cl["seed"]), n_paths=int(cl["n_paths"]), **kwargs)
    static_paths = ()
    if sc.get("static_cluster") is not None:
        cl = dict(sc["static_cluster"])
        kwargs = {}
        for key in ("distance_range", "gain_range"):
            if cl.get(key) is not None:
                kwargs[key] = tuple(cl[key])
        if cl.get("angle_range") is not None:
            kwargs["angle_range"] = float(cl["angle_range"])
        static_paths = static_path_cluster(seed=int(cl.get("seed", 0)),
                                           n_paths=int(cl.get("n_paths", 4)), **kwargs)
    gain = sc["los_gain"]
    los_gain = complex(gain[0], gain[1]) if isinstance(gain, (list, tuple)) else complex(gain)
    aoa_mode = sc["aoa_mode"]
    if not isinstance(aoa_mode, str):
        aoa_mode = float(aoa_mode)
    return PathScenario(geometry=geom, grid=grid, los_gain=los_gain, cluster=cluster,
                        static_paths=static_paths, snr_db=float(sc["snr_db"]),
                        aoa_mode=aoa_mode, default_aod=float(sc["default_aod"]),
                        default_distance=float(sc["default_distance"]))


def build_position(cfg: dict) -> PositionParams:
    pos = cfg["position"]
    return PositionParams(values=pos["values"], names=tuple(pos["names"]))


def build_roi(cfg: dict) -> RoiGrid:
    roi = cfg["roi"]
    target = roi["target"]
    if target == "location":
        lo, hi = (math.radians(a) for a in roi["angle_range_deg"])
        return annulus_roi(r=int(roi["r"]), d_range=tuple(roi["d_range"]),
                           angle_range=(lo, hi), seed=int(roi["seed"]))
    value_range = roi.get("value_range")
    return parameter_roi(target=target, r=int(roi["r"]),
                         value_range=tuple(value_range) if value_range else None,
                         seed=int(roi["seed"]), d_range=tuple(roi["d_range"]))


def build_crb_cfg(cfg: dict) -> CrbConfig:
    kwargs = dict(cfg["crb"])
    kwargs.setdefault("seed", cfg["seed"])
    return CrbConfig(**kwargs)


# ---------------------------------------------------------------------------
# Output helpers

def _write_json(path, payload):
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                             for v in row])


def _write_manifest(outdir, command, cfg, digest, extra=None):
    manifest = {
        "command": command,
        "config": cfg,
        "digest": digest,
        "versions": {
            "bfisense": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    if extra:
        manifest.update(extra)
    _write_json(os.path.join(outdir, "manifest.json"), manifest)


# ---------------------------------------------------------------------------
# Position fan-out (worker-count independent thanks to derived seeds)

def _score_chunk(args):
    task_indices, positions_raw, scenario, cfg, k = args
    out = []
    for task, (values, names) in zip(task_indices, positions_raw):
        local = replace(cfg, seed=derive_seed(cfg.seed, task))
        x = PositionParams(values, names)
        res = position_analysis(x, scenario, local, k)
        out.append((res["crb"], res["nl_crb"], res["scores"]))
    return out


def map_positions(positions, scenario, cfg, k=None, workers=1, task_offset=0):
    """Per-position analysis with optional process fan-out; order-stable output.

    Each position draws from seed XOR (task_offset + position index), so the
    result is identical for any worker count or chunking.
    """
    raw = [(p.values, p.names) for p in positions]
    indices = [task_offset + r for r in range(len(raw))]
    if workers <= 1 or len(raw) < 8:
        return _score_chunk((indices, raw, scenario, cfg, k))
    chunks = []
    step = max(1, math.ceil(len(raw) / workers))
    for start in range(0, len(raw), step):
        chunks.append((indices[start:start + step], raw[start:start + step], scenario, cfg, k))
    out = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for part in pool.map(_score_chunk, chunks):
            out.extend(part)
    return out


# ---------------------------------------------------------------------------
# Command implementations

def _cmd_simulate_csi(cfg, outdir, workers):
    scenario = build_scenario(cfg)
    x = build_position(cfg)
    sim = cfg["simulate"]
    k = sim.get("k") or scenario.grid.center_index
    n = int(sim["n_samples"])
    if sim["noiseless"]:
        draws = scenario.mean_csi(x, k)[np.newaxis, :, :]
        n = 1
    else:
        draws = scenario.sample_csi(x, k=k, n=n, seed=int(cfg["seed"]))
    records = [csi_record(draws[i], scenario.geometry, scenario.grid, k) for i in range(n)]
    _write_json(os.path.join(outdir, "csi.json"), {"config_digest": config_digest(cfg),
                                                   "records": records})
    return {"n_records": n}


def _cmd_csi2bfi(cfg, outdir, workers, input_path):
    with open(input_path) as f:
        payload = json.load(f)
    records = payload["records"] if isinstance(payload, dict) else payload
    out = []
    for rec in records:
        h, _, _, _ = parse_csi_record(rec)
        out.append(bfi_to_json(csi_to_bfi(h)))
    _write_json(os.path.join(outdir, "bfi.json"), {"config_digest": config_digest(cfg),
                                                   "records": out})
    return {"n_records": len(out)}


def _load_bfi_records(input_path):
    with open(input_path) as f:
        payload = json.load(f)
    records = payload["records"] if isinstance(payload, dict) else payload
    if isinstance(records, dict):
        records = [records]
    return [bfi_from_json(rec) for rec in records]


def _cmd_bfi2v(cfg, outdir, workers, input_path):
    thetas = _load_bfi_records(input_path)
    out = []
    for theta in thetas:
        vt = givens_reconstruct(theta)
        out.append({"m_tx": theta.m_tx, "n_rx": theta.n_rx, "matrix": matrix_to_pairs(vt)})
    _write_json(os.path.join(outdir, "v.json"), {"config_digest": config_digest(cfg),
                                                 "records": out})
    return {"n_records": len(out)}


def _cmd_quantize(cfg, outdir, workers, input_path):
    thetas = _load_bfi_records(input_path)
    b_psi = int(cfg["quantize"]["b_psi"])
    codes_out = []
    packed_all = bytearray()
    for theta in thetas:
        q = quantize(theta, b_psi)
        packed = q.packed
        packed_all.extend(packed)
        codes_out.append({
            "m_tx": q.m_tx, "n_rx": q.n_rx, "b_psi": q.b_psi, "b_phi": q.b_phi,
            "codes": [int(c) for c in q.codes],
            "packed_hex": packed.hex(),
            "dequantized": bfi_to_json(dequantize(q)),
        })
    with open(os.path.join(outdir, "packed.bin"), "wb") as f:
        f.write(bytes(packed_all))
    _write_json(os.path.join(outdir, "codes.json"), {"config_digest": config_digest(cfg),
                                                     "records": codes_out})
    return {"n_records": len(codes_out)}


def _cmd_crb_map(cfg, outdir, workers):
    scenario = build_scenario(cfg)
    roi = build_roi(cfg)
    crb_cfg = build_crb_cfg(cfg)
    results = map_positions(roi.positions, scenario, crb_cfg, workers=workers)
    names = roi.positions[0].names
    n_bfi = bfi_element_count(scenario.geometry.n_rx, scenario.geometry.n_tx)
    header = (list(names) + [f"crb_{n}" for n in names] + [f"nl_crb_{n}" for n in names]
              + [f"chi_{j}" for j in range(1, n_bfi + 1)])
    rows = []
    for x, (crb, nl, chi) in zip(roi.positions, results):
        rows.append(list(x.values) + list(crb) + list(nl) + list(chi))
    _write_csv(os.path.join(outdir, "crb_map.csv"), header, rows)
    return {"rows": len(rows)}


def _cmd_select(cfg, outdir, workers):
    scenario = build_scenario(cfg)
    roi = build_roi(cfg)
    crb_cfg = build_crb_cfg(cfg)
    n_sel = int(cfg["select"]["n_sel"])
    mode = cfg["select"]["mode"]
    n_bfi = bfi_element_count(scenario.geometry.n_rx, scenario.geometry.n_tx)
    n_sc = scenario.grid.n_subcarriers
    per_sc, etas, covs = [], [], []
    r_total = roi.size
    for k in range(1, n_sc + 1):
        chunk = map_positions(roi.positions, scenario, crb_cfg, k=k, workers=workers,
                              task_offset=(k - 1) * r_total)
        scores = np.empty((r_total, n_bfi))
        for r, (_, _, chi) in enumerate(chunk):
            scores[r] = chi
        eta = best_element_map(scores, mode)
        per_sc.append(greedy_select(eta, n_sel, n_bfi))
        etas.append(eta)
        covs.append(coverage_counts(eta, n_bfi))
    sel = SelectionResult(per_subcarrier=per_sc, eta=etas, coverage=covs,
                          mode=mode, n_sel=n_sel, n_bfi=n_bfi)
    payload = selection_to_json(sel)
    payload["config_digest"] = config_digest(cfg)
    _write_json(os.path.join(outdir, "selection.json"), payload)
    return {"selected": payload["per_subcarrier"]}


def _cmd_ks_test(cfg, outdir, workers):
    scenario = build_scenario(cfg)
    x = build_position(cfg)
    ks = cfg["ks"]
    n = int(ks["n_samples"])
    draws = scenario.sample_csi(x, n=n, seed=int(cfg["seed"]))
    values, _ = csi_to_bfi_batch(draws)
    theta_bar = csi_to_bfi(scenario.mean_csi(x))
    samples = values
    if ks["center"]:
        samples = wrap_angle_diffs(values - theta_bar.values[np.newaxis, :], theta_bar.phi_mask)
    labels = theta_bar.labels
    rows = []
    results = []
    for j, lab in enumerate(labels):
        stat, p = ks_gaussian_pvalue(samples[:, j])
        rows.append([f"{lab.kind}_{lab.row}_{lab.col}", stat, p])
        results.append({"element": f"{lab.kind}_{lab.row}_{lab.col}", "statistic": stat, "p": p})
    _write_csv(os.path.join(outdir, "ks.csv"), ["element", "statistic", "p"], rows)
    _write_json(os.path.join(outdir, "ks.json"), {
        "config_digest": config_digest(cfg),
        "n_samples": n,
        "centered": bool(ks["center"]),
        "results": results,
    })
    return {"min_p": min(r["p"] for r in results)}


def _cmd_music_mc(cfg, outdir, workers):
    scenario = build_scenario(cfg)
    x = build_position(cfg)
    mu = cfg["music"]
    lo, hi = mu["grid_range_deg"]
    grid = np.deg2rad(np.arange(lo, hi + 1e-9, mu["grid_step_deg"]))
    res = mc_estimator_variance(scenario, x, mu["snr_db"], trials=int(mu["trials"]),
                                seed=int(cfg["seed"]), grid=grid,
                                n_sources=int(mu["n_sources"]), cfg=build_crb_cfg(cfg))
    rows = list(zip(res["snr_db"], res["music_variance"], res["crb"]))
    _write_csv(os.path.join(outdir, "music_mc.csv"), ["snr_db", "music_variance", "crb"], rows)
    payload = dict(res)
    payload["config_digest"] = config_digest(cfg)
    _write_json(os.path.join(outdir, "music_mc.json"), payload)
    return {"snr_points": len(rows)}


def _cmd_evaluate(cfg, outdir, workers):
    scenario = build_scenario(cfg)
    roi = build_roi(cfg)
    ev = cfg["evaluate"]
    n_bfi = bfi_element_count(scenario.geometry.n_rx, scenario.geometry.n_tx)
    n_sc = scenario.grid.n_subcarriers
    method = ev["method"]
    if method == "all":
        selection = None
    elif method == "proposed":
        from .selection import select_features
        selection = select_features(roi, scenario, build_crb_cfg(cfg), int(ev["n_sel"]))
    elif method == "random":
        rng = np.random.default_rng(int(cfg["seed"]))
        per_sc = [np.sort(rng.choice(n_bfi, size=int(ev["n_sel"]), replace=False))
                  for _ in range(n_sc)]
        selection = SelectionResult(per_subcarrier=per_sc,
                                    eta=[np.zeros(roi.size, dtype=int)] * n_sc,
                                    coverage=[np.zeros(n_bfi, dtype=int)] * n_sc,
                                    mode="random", n_sel=int(ev["n_sel"]), n_bfi=n_bfi)
    else:
        raise ConfigError(f"evaluate.method must be all/proposed/random, got {method!r}")
    ds = gen_dataset(roi, scenario, selection, samples_per_pos=int(ev["samples_per_pos"]),
                     seed=int(ev["data_seed"]), encoding=ev["encoding"])
    train, test = split_dataset(ds, float(ev["train_frac"]), seed=int(ev["split_seed"]))
    spec = MlpSpec(layer_sizes=(ds.features.shape[1], int(ev["hidden"]), 2),
                   epochs=int(ev["epochs"]), learning_rate=float(ev["learning_rate"]),
                   batch_size=int(ev["batch_size"]), seed=int(ev["mlp_seed"]))
    result = train_eval_positioner(train, test, spec)
    write_dataset_csv(os.path.join(outdir, "dataset.csv"), ds)
    write_errors_csv(os.path.join(outdir, "errors.csv"), result.errors)
    _write_json(os.path.join(outdir, "results.json"), {
        "config_digest": config_digest(cfg),
        "method": method,
        "n_features": int(ds.features.shape[1]),
        "quantiles": result.quantiles,
    })
    return {"median_error_m": result.quantiles["p50"]}


_HANDLERS = {
    "simulate-csi": _cmd_simulate_csi,
    "crb-map": _cmd_crb_map,
    "select": _cmd_select,
    "ks-test": _cmd_ks_test,
    "music-mc": _cmd_music_mc,
    "evaluate": _cmd_evaluate,
}

_INPUT_HANDLERS = {
    "csi2bfi": _cmd_csi2bfi,
    "bfi2v": _cmd_bfi2v,
    "quantize": _cmd_quantize,
}


def run(command: str, config: dict, output_dir: str, workers: int = 1,
        input_path: str | None = None) -> int:
    """Programmatic entry point; returns the process exit status."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}; choose from {COMMANDS}")
    os.makedirs(output_dir, exist_ok=True)
    try:
        cfg = effective_config(config)
        digest = config_digest(cfg)
        if command in _INPUT_HANDLERS:
            if not input_path:
                raise ConfigError(f"{command} needs --input")
            summary = _INPUT_HANDLERS[command](cfg, output_dir, workers, input_path)
        else:
            summary = _HANDLERS[command](cfg, output_dir, workers)
    except (ConfigError,) as exc:
        _write_error(output_dir, command, exc)
        return 2
    except (DegenerateInputError,) as exc:
        _write_error(output_dir, command, exc)
        return 3
    except InvalidInputError as exc:
        _write_error(output_dir, command, exc)
        return 2
    _write_manifest(output_dir, command, cfg, digest, {"summary": summary})
    return 0


def _write_error(outdir, command, exc):
    payload = {"error": {"type": type(exc).__name__, "message": str(exc), "command": command}}
    try:
        _write_json(os.path.join(outdir, "error.json"), payload)
    except OSError:
        pass
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


def _parse_override(values):
    out = {}
    for item in values or []:
        if "=" not in item:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        key, _, raw = item.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bfisense",
        description="Beamforming-feedback sensing pipelines: simulation, codec, bounds, "
                    "selection and evaluation.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON config document")
    parser.add_argument("--output-dir",
                        default=os.environ.get(OUTPUT_DIR_ENV, "."),
                        help=f"output directory (default: ${OUTPUT_DIR_ENV} or cwd)")
    parser.add_argument("--input", help="input artifact for csi2bfi / bfi2v / quantize")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                        help="position/trial fan-out bound (results are worker-independent)")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one config entry, e.g. --set scenario.snr_db=25")
    args = parser.parse_args(argv)

    try:
        config = {}
        if args.config:
            with open(args.config) as f:
                config = json.load(f)
        overrides = _parse_override(args.set)
        config = _merge(config, overrides)
        if args.seed is not None:
            config["seed"] = args.seed
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}},
                         sort_keys=True), file=sys.stderr)
        return 2
    return run(args.command, config, args.output_dir, workers=args.workers,
               input_path=args.input)


if __name__ == "__main__":
    sys.exit(main())
