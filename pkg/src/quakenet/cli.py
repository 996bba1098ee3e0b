"""Command-line pipeline: synth -> ingest -> compare -> train-final -> report.

Every command reads the same YAML configuration file; ``--seed`` and ``--out``
override the file. Exit codes: 0 success, 2 configuration or parse error,
3 missing prerequisite artifact, 4 numerical divergence.
"""
import argparse
import datetime as dt
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field, fields

import numpy as np
import yaml

from ._seeding import derive_seed
from .catalog import (
    DEFAULT_REGION,
    CatalogError,
    filter_records,
    generate_learnable_catalog,
    generate_synthetic_catalog,
    read_catalog_file,
    write_catalog_file,
)
from .features import (
    DatasetSplit,
    EncoderConfig,
    FeatureError,
    Sample,
    ScalerParams,
    encode_records,
    fit_scaler,
    scale_split,
    split_dataset,
)
from .harness import (
    DEFAULT_PRELIMINARY_SAMPLES,
    emit_plot_data,
    run_comparison,
    run_final,
)
from .metrics import format_report
from .network import (
    FINAL_RADIAL_UNITS,
    FINAL_TANH_UNITS,
    PRELIMINARY_MODELS,
    NetworkError,
    save_network,
    stack_spec,
)
from .trainer import NonFiniteLoss, TrainingConfig, TrainingError

logger = logging.getLogger("quakenet")

EXIT_OK, EXIT_CONFIG, EXIT_MISSING, EXIT_DIVERGED = 0, 2, 3, 4

CATALOG_FILE = "catalog.csv"
SAMPLES_FILE = "samples.npz"
MANIFEST_FILE = "manifest.json"
SCALER_FILE = "scaler.json"
COMPARISON_FILE = "comparison.json"
MODEL_FILE = "model.npz"
REPORT_JSON = "report.json"
REPORT_CSV = "report.csv"
HISTORY_CSV = "history.csv"
HISTORY_JSON = "history.json"


class ConfigError(ValueError):
    pass


class MissingArtifact(FileNotFoundError):
    pass


def _date(value):
    if value is None or isinstance(value, dt.date):
        return value
    return dt.date.fromisoformat(str(value))


def _training_config(d, seed):
    d = dict(d or {})
    unknown = set(d) - {f.name for f in fields(TrainingConfig)}
    if unknown:
        raise ConfigError(f"unknown training keys: {sorted(unknown)}")
    d["seed"] = seed
    return TrainingConfig(**d)


@dataclass
class PipelineConfig:
    """Parsed pipeline configuration. See README for the file schema."""

    seed: int = 0
    out: str = "run"
    catalog_path: str = None
    synth: dict = None
    min_magnitude: float = 4.0
    date_range: tuple = None
    encoder: dict = field(default_factory=dict)
    split: dict = field(default_factory=lambda: {"counts": None, "proportions": [0.5176, 0.2675, 0.2149]})
    compare: dict = field(default_factory=dict)
    final: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw, seed=None, out=None, require_source=True):
        raw = dict(raw or {})
        allowed = {"seed", "out", "catalog", "synth", "filter", "encoder", "split", "compare", "final"}
        unknown = set(raw) - allowed
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        cfg = cls()
        cfg.seed = int(seed if seed is not None else raw.get("seed", 0))
        cfg.out = out or raw.get("out") or "run"
        cfg.catalog_path = (raw.get("catalog") or {}).get("path")
        cfg.synth = raw.get("synth")
        if require_source and (cfg.catalog_path is None) == (cfg.synth is None):
            raise ConfigError("exactly one of catalog.path or synth must be given")
        if cfg.synth is not None:
            cfg.synth = {"count": 5798, "kind": "random", "noise": 0.01, **cfg.synth}
            if cfg.synth["kind"] not in ("random", "learnable"):
                raise ConfigError("synth.kind must be 'random' or 'learnable'")
            if int(cfg.synth["count"]) < 0:
                raise ConfigError("synth.count must be >= 0")
        flt = raw.get("filter") or {}
        cfg.min_magnitude = float(flt.get("min_magnitude", 4.0))
        if flt.get("date_range"):
            start, end = flt["date_range"]
            cfg.date_range = (_date(start), _date(end))
        cfg.encoder = dict(raw.get("encoder") or {})
        split = raw.get("split")
        if split is not None:
            if ("counts" in split) == ("proportions" in split):
                raise ConfigError("split needs exactly one of counts or proportions")
            cfg.split = {"counts": split.get("counts"), "proportions": split.get("proportions")}
        cfg.compare = dict(raw.get("compare") or {})
        cfg.final = dict(raw.get("final") or {})
        # validate nested training blocks early
        cfg.compare_training()
        cfg.final_training()
        return cfg

    def encoder_config(self, zones=None):
        d = dict(self.encoder)
        if "epoch_origin" in d:
            d["epoch_origin"] = _date(d["epoch_origin"])
        if not d.get("zone_vocabulary"):
            d["zone_vocabulary"] = zones if zones is not None else DEFAULT_REGION.zone_names
        return EncoderConfig.from_dict(d)

    def compare_training(self):
        return _training_config(self.compare.get("training"), derive_seed(self.seed, "compare"))

    def final_training(self):
        return _training_config(self.final.get("training"), derive_seed(self.seed, "final"))

    def path(self, name):
        return os.path.join(self.out, name)


def load_config(path, seed=None, out=None, require_source=True):
    raw = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    return PipelineConfig.from_dict(raw, seed=seed, out=out, require_source=require_source)


def _require(*paths):
    for p in paths:
        if not os.path.exists(p):
            raise MissingArtifact(p)


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _dump_json(path, obj):
    _write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _sha256(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def cmd_synth(cfg):
    if cfg.synth is None:
        raise ConfigError("synth requires a synth section in the config")
    os.makedirs(cfg.out, exist_ok=True)
    seed = derive_seed(cfg.seed, "synth")
    count = int(cfg.synth["count"])
    if cfg.synth["kind"] == "learnable":
        records = generate_learnable_catalog(seed, count, noise=float(cfg.synth["noise"]))
    else:
        records = generate_synthetic_catalog(seed, count)
    write_catalog_file(records, cfg.path(CATALOG_FILE))
    print(f"wrote {len(records)} records to {cfg.path(CATALOG_FILE)}")
    return EXIT_OK


def _save_samples(path, split):
    arrays = {}
    for name in DatasetSplit.NAMES:
        samples = split[name]
        arrays[f"{name}_inputs"] = np.array([s.inputs for s in samples], dtype=float)
        arrays[f"{name}_targets"] = np.array([s.targets_normalized for s in samples], dtype=float)
        arrays[f"{name}_targets_raw"] = np.array([s.targets_raw for s in samples], dtype=float)
        arrays[f"{name}_index"] = np.array([s.source_index for s in samples], dtype=np.int64)
    np.savez(path, **arrays)


def _load_samples(path):
    parts = []
    with np.load(path, allow_pickle=False) as data:
        for name in DatasetSplit.NAMES:
            parts.append([
                Sample(inputs=x, targets_raw=r, source_index=int(i), targets_normalized=t)
                for x, t, r, i in zip(data[f"{name}_inputs"], data[f"{name}_targets"],
                                      data[f"{name}_targets_raw"], data[f"{name}_index"])
            ])
    return DatasetSplit(*parts)


def cmd_ingest(cfg):
    catalog = cfg.catalog_path or cfg.path(CATALOG_FILE)
    _require(catalog)
    parsed = read_catalog_file(catalog, strict=False)
    if parsed.skipped:
        logger.warning("skipped %d malformed catalog rows", len(parsed.skipped))
    records = filter_records(parsed, cfg.min_magnitude, cfg.date_range)
    if not records:
        raise FeatureError("empty dataset")
    zones = None if cfg.synth is not None else sorted({r.zone for r in records})
    enc = cfg.encoder_config(zones)
    raw = encode_records(records, enc)
    split = split_dataset(raw, counts=cfg.split["counts"], proportions=cfg.split["proportions"],
                          seed=derive_seed(cfg.seed, "split"))
    scaler = fit_scaler(split.training, enc)
    split = scale_split(split, scaler)

    os.makedirs(cfg.out, exist_ok=True)
    _save_samples(cfg.path(SAMPLES_FILE), split)
    _dump_json(cfg.path(SCALER_FILE), scaler.to_dict())
    manifest = {
        "catalog_sha256": _sha256(catalog),
        "records": len(records),
        "skipped_rows": len(parsed.skipped),
        "seed": cfg.seed,
        "encoder": enc.to_dict(),
        "input_names": enc.input_names,
        "counts": dict(zip(DatasetSplit.NAMES, split.sizes())),
        "indices": split.indices(),
    }
    _dump_json(cfg.path(MANIFEST_FILE), manifest)
    for name, n in manifest["counts"].items():
        print(f"{name:<12}{n:>8}")
    return EXIT_OK


def _load_ingest(cfg):
    _require(cfg.path(SAMPLES_FILE), cfg.path(SCALER_FILE), cfg.path(MANIFEST_FILE))
    with open(cfg.path(SCALER_FILE), encoding="utf-8") as fh:
        scaler = ScalerParams.from_dict(json.load(fh))
    return _load_samples(cfg.path(SAMPLES_FILE)), scaler


def cmd_compare(cfg):
    split, _ = _load_ingest(cfg)
    models = tuple(cfg.compare.get("models", PRELIMINARY_MODELS))
    count = int(cfg.compare.get("preliminary_sample_count", DEFAULT_PRELIMINARY_SAMPLES))
    report = run_comparison(split, models, cfg.compare_training(), count, rules=cfg.compare.get("rules"))
    _write_text(cfg.path(COMPARISON_FILE), report.to_json())
    emit_plot_data(report, cfg.out)
    for rank, name in enumerate(report.ranking, start=1):
        r = report.result(name)
        print(f"{rank}. {name:<16} val_mse={r.mse['validation']:.6g} cycles={r.cycles} ({r.stop_reason})")
    return EXIT_OK


def cmd_train_final(cfg):
    split, scaler = _load_ingest(cfg)
    in_width = len(split.training[0].inputs)
    out_width = len(split.training[0].targets_normalized)
    spec = stack_spec(in_width, out_width,
                      tuple(cfg.final.get("hidden", FINAL_TANH_UNITS)),
                      radial_units=int(cfg.final.get("radial_units", FINAL_RADIAL_UNITS)))
    try:
        net, report, history = run_final(split, cfg.final_training(), scaler, spec=spec)
    except NonFiniteLoss as exc:
        exc.history.write(cfg.path(HISTORY_CSV), cfg.path(HISTORY_JSON))
        raise
    save_network(net, cfg.path(MODEL_FILE))
    _write_text(cfg.path(REPORT_JSON), report.to_json())
    _write_text(cfg.path(REPORT_CSV), report.to_csv())
    history.write(cfg.path(HISTORY_CSV), cfg.path(HISTORY_JSON))
    emit_plot_data(report, cfg.out)
    print(format_report(report.to_dict()))
    return EXIT_OK


def cmd_report(paths):
    for p in paths:
        _require(p)
    for p in paths:
        with open(p, encoding="utf-8") as fh:
            print(format_report(json.load(fh)))
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML pipeline configuration")
    common.add_argument("--seed", type=int, help="top-level seed (overrides config)")
    common.add_argument("--out", help="output directory (overrides config)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="quakenet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="write a synthetic catalog")
    sub.add_parser("ingest", parents=[common], help="encode, split and scale a catalog")
    sub.add_parser("compare", parents=[common], help="train and rank the preliminary models")
    sub.add_parser("train-final", parents=[common], help="train the final network and report")
    rep = sub.add_parser("report", parents=[common], help="print report JSON files as tables")
    rep.add_argument("paths", nargs="*", help="report JSON files (default: <out>/report.json)")
    return parser


COMMANDS = {"synth": cmd_synth, "ingest": cmd_ingest, "compare": cmd_compare, "train-final": cmd_train_final}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, seed=args.seed, out=args.out,
                          require_source=args.command != "report")
        if args.command == "report":
            return cmd_report(args.paths or [cfg.path(REPORT_JSON)])
        return COMMANDS[args.command](cfg)
    except MissingArtifact as exc:
        print(f"error: missing artifact {exc}", file=sys.stderr)
        return EXIT_MISSING
    except NonFiniteLoss as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ConfigError, CatalogError, FeatureError, TrainingError, NetworkError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
