"""Command-line interface: ``pointkit <command> ...``.

Options may also come from a JSON file given with ``--config``; flags on the
command line win over the file, and the file wins over built-in defaults.
``POINTKIT_OUTPUT_DIR`` sets the directory used for outputs whose path is
not given explicitly.

Failures print a single JSON line on stderr and exit nonzero: 2 for usage
errors, 3 when a model and a data file do not fit together, 1 otherwise.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict, replace
from importlib import resources
from pathlib import Path

import numpy as np

from ..data import Database, EventSequence
from ..ingestion import (
    ColumnMapping,
    FeatureDomainSpec,
    load_event_features_csv,
    load_seq_features_csv,
    load_sequences_csv,
    write_sequences_csv,
)
from ..learning import FitConfig, evaluate, fit
from ..preprocess import EventSampler
from ..simulation import SimConfig, predict, simulate
from .export import export_causality, export_exogenous
from .manifest import ManifestError, model_from_manifest, model_save, read_manifest
from .presets import PRESET_NAMES, build_from_recipe, get_recipe

log = logging.getLogger("pointkit")

ENV_OUTPUT_DIR = "POINTKIT_OUTPUT_DIR"

DEFAULTS = {
    "id_column": None,  # None: the manifest's mapping, else ColumnMapping defaults
    "time_column": None,
    "event_column": None,
    "seq_feature": [],
    "event_feature": [],
    "feature_normalize": "none",
    "preset": None,
    "exogenous": None,
    "impact": None,
    "kernel": None,
    "outer": None,
    "inner": None,
    "loss": None,
    "num_basis": 4,
    "embed_dim": 4,
    "hidden": 8,
    "latent_dim": 2,
    "epochs": 10,
    "batch_size": 128,
    "learning_rate": 0.01,
    "lr_decay_gamma": 1.0,
    "optimizer": "adam",
    "l1_weight": 0.0,
    "l2_weight": 0.0,
    "memorysize": 10,
    "seed": 0,
    "validation_fraction": 0.0,
    "shuffle": True,
    "flipped_softplus": False,
    "num_seqs": 1,
    "t_begin": 0.0,
    "t_end": 100.0,
    "max_events": 1000,
    "replicates": 100,
}


class CLIError(Exception):
    def __init__(self, message, code=1):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _report_error("UsageError", f"{self.prog}: {message}", 2)
        sys.exit(2)


def _report_error(kind, message, code):
    print(json.dumps({"error": kind, "message": " ".join(str(message).split()), "exit_code": code}),
          file=sys.stderr)


def demo_data_path() -> Path:
    """Path of the bundled job-history demo CSV."""
    return Path(str(resources.files("pointkit") / "data" / "linkedin_demo.csv"))


def _output_path(value, default_name) -> Path:
    if value:
        return Path(value)
    return Path(os.environ.get(ENV_OUTPUT_DIR) or ".") / default_name


def _resolve(args) -> dict:
    """Merge defaults < JSON config file < explicit flags."""
    opts = dict(DEFAULTS)
    given = vars(args)
    if given.get("config"):
        try:
            file_opts = json.loads(Path(given["config"]).read_text())
        except OSError as exc:
            raise CLIError(f"cannot read config {given['config']!r}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise CLIError(f"cannot parse config {given['config']!r}: {exc.msg}") from None
        if not isinstance(file_opts, dict):
            raise CLIError("config file must hold a JSON object")
        opts.update({k.replace("-", "_"): v for k, v in file_opts.items()})
    for key, value in given.items():
        if value is not None or key not in opts:
            opts[key] = value
    return opts


# ----------------------------------------------------------------------
# data helpers
# ----------------------------------------------------------------------


def _feature_spec(items, normalize):
    columns = {}
    for item in items:
        name, _, kind = item.partition(":")
        columns[name] = kind or "categorical"
    return FeatureDomainSpec(columns, normalize) if columns else None


def _data_spec(opts) -> dict:
    return {
        "mapping": asdict(ColumnMapping(seq_id=opts["id_column"] or "id", time=opts["time_column"] or "time",
                                        event=opts["event_column"] or "event")),
        "seq_features": list(opts["seq_feature"]),
        "event_features": list(opts["event_feature"]),
        "feature_normalize": opts["feature_normalize"],
    }


def _load_data(path, spec: dict) -> Database:
    mapping = ColumnMapping(**spec["mapping"])
    db = load_sequences_csv(path, mapping)
    seq_spec = _feature_spec(spec["seq_features"], spec["feature_normalize"])
    if seq_spec is not None:
        db = load_seq_features_csv(path, mapping.seq_id, seq_spec, db)
    ev_spec = _feature_spec(spec["event_features"], spec["feature_normalize"])
    if ev_spec is not None:
        db = load_event_features_csv(path, mapping.event, ev_spec, db)
    return db


def align_types(db: Database, names) -> Database:
    """Re-index ``db``'s event types onto the model's type names (matched by name)."""
    names = list(names)
    index = {n: i for i, n in enumerate(names)}
    unknown = [n for n in db.type_names() if n not in index]
    if unknown:
        raise CLIError(
            f"data has {db.num_types} event types, model has {len(names)}; types unknown to the model: {unknown}",
            code=3,
        )
    remap = np.array([index[n] for n in db.type_names()], dtype=np.int64)
    seqs = [EventSequence(s.times, remap[s.events], s.t_start, s.t_stop, s.seq_feature, s.label)
            for s in db.sequences]
    return Database.from_sequences(seqs, len(names), type_names=names, seq_names=db.seq_names())


def _model_data(opts, manifest):
    spec = dict(manifest.get("data") or _data_spec(DEFAULTS))
    mapping = dict(spec["mapping"])
    for flag, key in (("id_column", "seq_id"), ("time_column", "time"), ("event_column", "event")):
        if opts.get(flag) is not None:
            mapping[key] = opts[flag]
    spec["mapping"] = mapping
    db = align_types(_load_data(opts["data"], spec), manifest["type_names"])
    d_s = (manifest.get("dims") or {}).get("D_s")
    if d_s is not None and db.seq_feature_dim != d_s:
        raise CLIError(f"data gives {db.seq_feature_dim} sequence features, model expects {d_s}", code=3)
    known = {n: i for i, n in enumerate(manifest.get("seq_names") or [])}
    seq_index = np.array([known.get(n, -1) for n in db.seq_names()], dtype=np.int64)
    return db, seq_index


def _load_model(path):
    manifest = read_manifest(path)
    return model_from_manifest(manifest), manifest


# ----------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------


def _with_flipped_softplus(recipe):
    """Swap every softplus in ``recipe`` for the decreasing printed variant."""
    def swap(kind):
        return {"kind": "softplus", "flipped": True} if kind == "softplus" else kind
    return replace(recipe, outer=swap(recipe.outer), inner=swap(recipe.inner), exo_inner=swap(recipe.exo_inner))


def cmd_fit(opts) -> dict:
    data = opts["data"] or str(demo_data_path())
    spec = _data_spec(opts)
    db = _load_data(data, spec)
    recipe = get_recipe(opts["preset"], exogenous=opts["exogenous"], impact=opts["impact"], kernel=opts["kernel"],
                        outer=opts["outer"], inner=opts["inner"], loss=opts["loss"])
    if opts["flipped_softplus"]:
        recipe = _with_flipped_softplus(recipe)
    seed = int(opts["seed"])
    model = build_from_recipe(recipe, db, num_basis=opts["num_basis"], memory_size=opts["memorysize"],
                              embed_dim=opts["embed_dim"], hidden=opts["hidden"], latent_dim=opts["latent_dim"],
                              rng=seed)
    cfg = FitConfig(
        epochs=opts["epochs"], batch_size=opts["batch_size"], learning_rate=opts["learning_rate"],
        lr_decay_gamma=opts["lr_decay_gamma"], optimizer=opts["optimizer"], l1_weight=opts["l1_weight"],
        l2_weight=opts["l2_weight"], nonnegative=recipe.nonnegative or None, memorysize=opts["memorysize"],
        rng_seed=seed, validation_fraction=opts["validation_fraction"], shuffle=opts["shuffle"],
    )
    report = fit(model, db, cfg, loss=recipe.loss)
    out = _output_path(opts["out"], "model.json")
    report_path = Path(opts["report"]) if opts["report"] else out.with_suffix(".report.jsonl")
    fit_config = {"recipe": asdict(recipe), "fit": asdict(cfg), "num_basis": opts["num_basis"]}
    model_save(model, out, type_names=db.type_names(), seq_names=db.seq_names(), seed=seed, fit_config=fit_config,
               extra={"preset": opts["preset"], "loss": recipe.loss, "data": spec})
    report_path.write_text(report.to_jsonl())
    last = report.epochs[-1]
    return {"model": str(out), "report": str(report_path), "epochs": len(report.epochs),
            "train_loss": last.train_loss_final, "val_loss": last.val_loss}


def cmd_validate(opts) -> dict:
    model, manifest = _load_model(opts["model"])
    db, seq_index = _model_data(opts, manifest)
    loss = opts["loss"] or manifest.get("loss") or "mle"
    sampler = EventSampler(db, model.memory_size, seq_offset=seq_index)
    return {"loss_kind": loss, "loss": evaluate(model, sampler, loss), "samples": len(sampler)}


def cmd_simulate(opts) -> dict:
    model, manifest = _load_model(opts["model"])
    seed = int(opts["seed"])
    seqs = []
    for i in range(int(opts["num_seqs"])):
        cfg = SimConfig(t_begin=float(opts["t_begin"]), t_end=float(opts["t_end"]),
                        max_events=int(opts["max_events"]),
                        rng_seed=np.random.SeedSequence(seed, spawn_key=(i,)))
        seqs.append(simulate(model, cfg))
    names = [f"sim{i:04d}" for i in range(len(seqs))]
    db = Database.from_sequences(seqs, model.num_types, type_names=manifest["type_names"], seq_names=names)
    out = _output_path(opts["out"], "simulated.csv")
    write_sequences_csv(out, db)
    return {"out": str(out), "sequences": len(seqs), "events": db.num_events}


def cmd_predict(opts) -> dict:
    model, manifest = _load_model(opts["model"])
    db, seq_index = _model_data(opts, manifest)
    t0, t1 = float(opts["t0"]), float(opts["t1"])
    for s, seq in enumerate(db.sequences):
        if t0 < seq.t_stop:
            raise CLIError(f"forecast start t0={t0!r} precedes t_stop={seq.t_stop!r} of sequence "
                           f"{db.idx2seq[s]!r}", code=3)
    mean = predict(model, db, t0, t1, replicates=int(opts["replicates"]), rng_seed=int(opts["seed"]),
                   seq_indices=seq_index)
    out = _output_path(opts["out"], "predictions.csv")
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seq_id", *manifest["type_names"]])
        for name, row in zip(db.seq_names(), mean):
            w.writerow([name, *(repr(float(v)) for v in row)])
    return {"out": str(out), "sequences": len(db), "t0": t0, "t1": t1}


def cmd_export_causality(opts) -> dict:
    model, manifest = _load_model(opts["model"])
    csv_path, svg_path = export_causality(model, manifest["type_names"], _output_path(opts["out"], "causality"))
    return {"csv": str(csv_path), "svg": str(svg_path)}


def cmd_export_exogenous(opts) -> dict:
    model, manifest = _load_model(opts["model"])
    seq_index = -1
    if opts.get("seq"):
        names = manifest.get("seq_names") or []
        if opts["seq"] not in names:
            raise CLIError(f"sequence {opts['seq']!r} is not known to the model")
        seq_index = names.index(opts["seq"])
    csv_path, svg_path = export_exogenous(model, manifest["type_names"], _output_path(opts["out"], "exogenous"),
                                          seq_index=seq_index)
    return {"csv": str(csv_path), "svg": str(svg_path)}


def inspect_text(model, manifest) -> str:
    comp = manifest["composition"]
    lines = [
        f"format_version: {manifest['format_version']}",
        f"preset: {manifest.get('preset')}",
        f"event types ({model.num_types}): {', '.join(map(str, manifest['type_names']))}",
        f"dims: {json.dumps(manifest.get('dims'))}",
        f"exogenous: {comp['exogenous']['kind']}  impact: {(comp['impact'] or {}).get('kind')}  "
        f"kernel: {(comp['kernel'] or {}).get('kind')}  outer: {comp['outer']['kind']}",
        f"loss: {manifest.get('loss')}  memory_size: {model.memory_size}",
        f"provenance: {json.dumps(manifest.get('provenance'))}",
        "parameters:",
    ]
    trainable = set(model.trainable_names)
    for name, value in sorted(model.params.items()):
        flag = "" if name in trainable else " (frozen)"
        lines.append(f"  {name:24s} shape={list(value.shape)} min={value.min():.4g} max={value.max():.4g}{flag}")
    return "\n".join(lines)


def cmd_inspect(opts):
    model, manifest = _load_model(opts["model"])
    return inspect_text(model, manifest)


COMMANDS = {
    "fit": cmd_fit,
    "validate": cmd_validate,
    "simulate": cmd_simulate,
    "predict": cmd_predict,
    "export-causality": cmd_export_causality,
    "export-exogenous": cmd_export_exogenous,
    "inspect": cmd_inspect,
}


# ----------------------------------------------------------------------
# argument parsing
# ----------------------------------------------------------------------


def _data_args(p, required=True):
    S = argparse.SUPPRESS
    p.add_argument("--data", required=required, default=None if not required else S, help="event CSV file")
    p.add_argument("--id-column", dest="id_column", default=S)
    p.add_argument("--time-column", dest="time_column", default=S)
    p.add_argument("--event-column", dest="event_column", default=S)


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = _Parser(prog="pointkit", description="Fit, simulate and inspect multivariate point process models.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit a model to an event CSV")
    p.add_argument("--data", default=None, help="event CSV (default: the bundled demo file)")
    p.add_argument("--id-column", dest="id_column", default=S)
    p.add_argument("--time-column", dest="time_column", default=S)
    p.add_argument("--event-column", dest="event_column", default=S)
    p.add_argument("--seq-feature", dest="seq_feature", action="append", default=S, metavar="COL[:KIND]",
                   help="sequence feature column; KIND is categorical (default) or numerical")
    p.add_argument("--event-feature", dest="event_feature", action="append", default=S, metavar="COL[:KIND]")
    p.add_argument("--feature-normalize", dest="feature_normalize", choices=["none", "minmax", "zscore"], default=S)
    p.add_argument("--preset", choices=PRESET_NAMES, default=S)
    p.add_argument("--exogenous", choices=["constant", "naive", "linear", "neural"], default=S)
    p.add_argument("--impact", choices=["none", "basic", "naive", "factorized", "linear", "bilinear"], default=S)
    p.add_argument("--kernel", choices=["exponential", "rayleigh", "gaussian", "powerlaw", "gate", "multigauss"],
                   default=S)
    p.add_argument("--outer", choices=["identity", "relu", "softplus"], default=S)
    p.add_argument("--inner", choices=["identity", "relu", "softplus"], default=S)
    p.add_argument("--loss", choices=["mle", "lse", "ce"], default=S)
    p.add_argument("--flipped-softplus", dest="flipped_softplus", action="store_true", default=S,
                   help="use the decreasing softplus variant log(1 + exp(-beta x)) / beta")
    p.add_argument("--num-basis", dest="num_basis", type=int, default=S)
    p.add_argument("--embed-dim", dest="embed_dim", type=int, default=S)
    p.add_argument("--hidden", type=int, default=S)
    p.add_argument("--latent-dim", dest="latent_dim", type=int, default=S)
    p.add_argument("--epochs", type=int, default=S)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=S)
    p.add_argument("--lr", dest="learning_rate", type=float, default=S)
    p.add_argument("--lr-decay", dest="lr_decay_gamma", type=float, default=S)
    p.add_argument("--optimizer", choices=["adam", "sgd"], default=S)
    p.add_argument("--l1", dest="l1_weight", type=float, default=S)
    p.add_argument("--l2", dest="l2_weight", type=float, default=S)
    p.add_argument("--memorysize", type=int, default=S)
    p.add_argument("--validation-fraction", dest="validation_fraction", type=float, default=S)
    p.add_argument("--no-shuffle", dest="shuffle", action="store_false", default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--config", help="JSON file of option values")
    p.add_argument("--out", help="model file (default: model.json in the output directory)")
    p.add_argument("--report", help="per-epoch JSON lines (default: next to the model file)")

    p = sub.add_parser("validate", help="average loss of a saved model on an event CSV")
    p.add_argument("--model", required=True)
    _data_args(p)
    p.add_argument("--loss", choices=["mle", "lse", "ce"], default=S)
    p.add_argument("--config")

    p = sub.add_parser("simulate", help="sample sequences from a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--num-seqs", dest="num_seqs", type=int, default=S)
    p.add_argument("--t-begin", dest="t_begin", type=float, default=S)
    p.add_argument("--t-end", dest="t_end", type=float, default=S)
    p.add_argument("--max-events", dest="max_events", type=int, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--config")
    p.add_argument("--out")

    p = sub.add_parser("predict", help="expected per-type counts on [t0, t1] for every sequence")
    p.add_argument("--model", required=True)
    _data_args(p)
    p.add_argument("--t0", type=float, required=True)
    p.add_argument("--t1", type=float, required=True)
    p.add_argument("--replicates", type=int, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--config")
    p.add_argument("--out")

    for name, what in (("export-causality", "infectivity matrix"), ("export-exogenous", "exogenous rates")):
        p = sub.add_parser(name, help=f"write the {what} as CSV and SVG")
        p.add_argument("--model", required=True)
        p.add_argument("--out", help="path prefix; .csv and .svg are appended")
        if name == "export-exogenous":
            p.add_argument("--seq", help="sequence name (default: the average sequence)")
        p.add_argument("--config")

    p = sub.add_parser("inspect", help="print a summary of a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--config")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        opts = _resolve(args)
        result = COMMANDS[args.command](opts)
    except CLIError as exc:
        _report_error("CLIError", exc, exc.code)
        return exc.code
    except ManifestError as exc:
        _report_error("ManifestError", exc, 1)
        return 1
    except (ValueError, OSError, RuntimeError) as exc:
        _report_error(type(exc).__name__, exc, 1)
        return 1
    print(result if isinstance(result, str) else json.dumps(result))
    return 0


__all__ = ["main", "build_parser", "demo_data_path", "align_types", "CLIError"]
