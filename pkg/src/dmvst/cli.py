"""``dmvst`` command line: ingest, synth, dtw-graph, embed, train, evaluate, predict.

Every command accepts ``--config file.json``; flags override file values.
Exit status is 0 on success, 2 on usage or configuration errors and 1 when
the pipeline itself fails (one ``error:`` line on stderr).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import LINEAR_KINDS, HistoricalAverage, fit_linear_baseline, fit_mlp_baseline
from .checkpoint import load_checkpoint, save_checkpoint
from .config import (ALL_VARIANTS, RunConfig, load_config, load_holidays, load_weather,
                     run_manifest, write_json)
from .data import GridSpec, aggregate_demand, dedup_filter, parse_requests, synth_generate
from .data.store import load_bundle, load_grid, save_bundle, save_grid
from .errors import ConfigError, DMVSTError
from .metrics import evaluate, format_days, format_table
from .model import DMVSTNet
from .pipeline import prepare
from .semantic import build_graph, line_embed, weekly_pattern
from .training import predict, settings_from, train

log = logging.getLogger("dmvst")

# flag name -> (type, help); each maps onto the RunConfig key of the same name
_FLAGS = {
    "seed": (int, "random seed"),
    "variant": (str, f"one of {', '.join(ALL_VARIANTS)}"),
    "train_days": (int, "days used for training/validation; the rest is test"),
    "threshold": (float, "minimum raw target demand for a sample"),
    "train_subsample": (float, "fraction of training samples kept"),
    "seq_len": (int, "LSTM sequence length h"),
    "patch_size": (int, "local CNN patch side S"),
    "conv_layers": (int, "convolution layers K"),
    "filters": (int, "filters per convolution"),
    "spatial_dim": (int, "spatial feature width d"),
    "hidden": (int, "LSTM hidden width"),
    "embed_dim": (int, "graph embedding width"),
    "alpha": (float, "graph weight decay in exp(-alpha * DTW)"),
    "dtw_window": (int, "Sakoe-Chiba band for DTW"),
    "line_samples": (int, "edge samples for graph embedding"),
    "gamma": (float, "weight of the relative-error loss term"),
    "lr": (float, "Adam learning rate"),
    "batch_size": (int, "mini-batch size"),
    "max_epoch": (int, "maximum epochs"),
    "early_stop": (int, "epochs without validation improvement before stopping"),
    "reg_weight": (float, "ridge/lasso penalty weight"),
    "holidays": (str, "CSV of date,flag rows"),
    "weather": (str, "CSV of interval_index,code rows"),
    "weather_width": (int, "weather one-hot width"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser, flags=()) -> None:
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("-v", "--verbose", action="store_true")
    for name in flags:
        typ, text = _FLAGS[name]
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None, help=text)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dmvst", description="Multi-view spatio-temporal demand forecasting")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="raw request CSV -> demand grid bundle")
    p.add_argument("--input", required=True, help="CSV with timestamp,lat,lng,user_id")
    p.add_argument("--output", required=True, help="grid bundle manifest (.json)")
    p.add_argument("--daily-cap", type=int, default=100)
    _add_common(p, ["seed"])

    p = sub.add_parser("synth", help="generate a synthetic demand grid")
    p.add_argument("--output", required=True)
    p.add_argument("--days", type=int, default=35)
    p.add_argument("--width", type=int, default=10)
    p.add_argument("--height", type=int, default=10)
    p.add_argument("--requests", help="also write the grid as a request CSV")
    _add_common(p, ["seed"])

    p = sub.add_parser("dtw-graph", help="weekly patterns -> DTW similarity graph")
    p.add_argument("--data", help="grid bundle")
    p.add_argument("--output", required=True)
    _add_common(p, ["train_days", "alpha", "dtw_window"])

    p = sub.add_parser("embed", help="DTW graph -> LINE embeddings")
    p.add_argument("--graph", required=True)
    p.add_argument("--output", required=True)
    _add_common(p, ["embed_dim", "line_samples", "seed"])

    p = sub.add_parser("train", help="train a model or baseline; writes a run directory")
    p.add_argument("--data", help="grid bundle")
    p.add_argument("--output", help="run directory")
    p.add_argument("--embeddings", help="precomputed embedding bundle")
    _add_common(p, list(_FLAGS))

    p = sub.add_parser("evaluate", help="test-split metrics of a trained run")
    p.add_argument("--run", required=True, help="run directory written by train")
    p.add_argument("--output", help="metrics JSON (default: <run>/metrics.json)")
    _add_common(p)

    p = sub.add_parser("predict", help="test-split predictions of a trained run as CSV")
    p.add_argument("--run", required=True)
    p.add_argument("--output", required=True)
    _add_common(p)
    return parser


def _config(args, keys=None) -> RunConfig:
    over = {k: getattr(args, k) for k in (keys or _FLAGS) if hasattr(args, k)}
    for k in ("data", "output"):
        if getattr(args, k, None) is not None and args.command in ("dtw-graph", "train"):
            over[k] = getattr(args, k)
    return load_config(args.config, over)


def _side_inputs(cfg: RunConfig, grid):
    holidays = load_holidays(cfg.holidays) if cfg.holidays else None
    weather = load_weather(cfg.weather, grid.n_intervals) if cfg.weather else None
    return holidays, weather


def _dataset(cfg: RunConfig, grid, embeddings=None):
    holidays, weather = _side_inputs(cfg, grid)
    return prepare(grid, cfg.train_days, seq_len=cfg.seq_len, patch_size=cfg.patch_size,
                   threshold=cfg.threshold, embed_dim=cfg.embed_dim, alpha=cfg.alpha, seed=cfg.seed,
                   line_samples=cfg.line_samples, dtw_window=cfg.dtw_window, embeddings=embeddings,
                   holidays=holidays, weather=weather, weather_width=cfg.weather_width)


def subsample(samples, fraction: float, seed: int):
    if fraction >= 1:
        return samples
    keep = max(1, int(round(fraction * len(samples))))
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(3)[2])
    return samples.subset(np.sort(rng.choice(len(samples), keep, replace=False)))


# -- commands -------------------------------------------------------------------

def cmd_ingest(args) -> int:
    cfg = _config(args, ["seed"])
    spec = GridSpec(**cfg.grid) if cfg.grid else None
    if spec is None:
        raise ConfigError("ingest needs a 'grid' object (bounding box and size) in --config")
    requests, report = parse_requests(args.input, spec)
    kept = dedup_filter(requests, spec, args.daily_cap)
    grid = aggregate_demand(kept, spec)
    extra = {"parse": {"rows": report.rows, "malformed": report.malformed,
                       "out_of_bounds": report.out_of_bounds, "deduplicated": len(requests) - len(kept)}}
    save_grid(args.output, grid, extra=extra)
    print(f"{len(kept)} requests -> {grid.n_intervals} intervals x {spec.n_regions} regions "
          f"({report.malformed} malformed, {report.out_of_bounds} out of bounds)")
    return 0


def cmd_synth(args) -> int:
    from .data.synth import default_spec, grid_to_requests
    cfg = _config(args, ["seed"])
    spec = GridSpec(**cfg.grid) if cfg.grid else default_spec(args.width, args.height)
    grid, truth = synth_generate(cfg.seed, spec, args.days)
    save_grid(args.output, grid, extra={"synth": truth.config, "clusters": truth.clusters.tolist()})
    if args.requests:
        with open(args.requests, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["timestamp", "lat", "lng", "user_id"])
            for r in grid_to_requests(grid, cfg.seed):
                w.writerow([r.timestamp, repr(r.lat), repr(r.lng), r.user_id])
    print(f"wrote {args.output}: {grid.n_intervals} intervals x {spec.n_regions} regions")
    return 0


def cmd_dtw_graph(args) -> int:
    from .data import fit_normalizer
    cfg = _config(args, ["train_days", "alpha", "dtw_window"])
    if not cfg.data:
        raise ConfigError("dtw-graph needs --data")
    grid, _ = load_grid(cfg.data)
    n_train = cfg.train_days * grid.spec.intervals_per_day
    normalizer = fit_normalizer(grid.counts[:n_train])
    patterns = normalizer.normalize(weekly_pattern(grid.slice(0, n_train)))
    graph = build_graph(patterns, alpha=cfg.alpha, window=cfg.dtw_window)
    save_bundle(args.output, "graph", {"weights": graph.weights, "distances": graph.distances,
                                       "patterns": patterns},
                {"alpha": cfg.alpha, "dtw_window": cfg.dtw_window, "train_days": cfg.train_days})
    print(f"graph over {graph.n_nodes} regions -> {args.output}")
    return 0


def cmd_embed(args) -> int:
    cfg = _config(args, ["embed_dim", "line_samples", "seed"])
    _, arrays = load_bundle(args.graph, "graph")
    emb = line_embed(arrays["weights"], dim=cfg.embed_dim, seed=cfg.seed, samples=cfg.line_samples)
    save_bundle(args.output, "embeddings", {"embeddings": emb},
                {"dim": cfg.embed_dim, "seed": cfg.seed, "line_samples": cfg.line_samples})
    print(f"{emb.shape[0]} x {emb.shape[1]} embeddings -> {args.output}")
    return 0


def cmd_train(args, argv) -> int:
    cfg = _config(args)
    if not cfg.data or not cfg.output:
        raise ConfigError("train needs --data and --output (flags or config)")
    cfg.data = str(Path(cfg.data).resolve())
    out = Path(cfg.output)
    grid, _ = load_grid(cfg.data)
    embeddings = None
    if args.embeddings:
        _, arrays = load_bundle(args.embeddings, "embeddings")
        embeddings = arrays["embeddings"]
    if cfg.variant == "ha":
        embeddings = np.zeros((grid.spec.n_regions, 1)) if embeddings is None else embeddings
    ds = _dataset(cfg, grid, embeddings)
    save_bundle(out / "embeddings.json", "embeddings", {"embeddings": ds.embeddings})
    manifest = run_manifest(cfg, "train", argv, samples={"train": len(ds.train), "val": len(ds.val),
                                                        "test": len(ds.test)})
    if cfg.variant != "ha":
        train_set = subsample(ds.train, cfg.train_subsample, cfg.seed)
        overrides = dict(gamma=cfg.gamma, lr=cfg.lr, batch_size=cfg.batch_size,
                         max_epoch=cfg.max_epoch, early_stop=cfg.early_stop, seed=cfg.seed)
        if cfg.is_network:
            model = DMVSTNet(cfg.model_config(ds.context.width), embeddings=ds.embeddings)
            report = train(model, train_set, ds.val, settings_from(model))
        elif cfg.variant in LINEAR_KINDS:
            reg = 0.0 if cfg.variant == "olsr" else cfg.reg_weight
            model, report = fit_linear_baseline(train_set, cfg.variant, reg, ds.val, **overrides)
        else:
            model, report = fit_mlp_baseline(train_set, cfg.mlp_layers, ds.val, **overrides)
        model.normalizer = ds.normalizer
        save_checkpoint(model, ds.normalizer, out / "model.ckpt", extra={"seed": cfg.seed})
        write_json(out / "train_report.json", report.to_dict())
        manifest["train"] = {"best_epoch": report.best_epoch, "best_val_loss": report.best_val_loss,
                             "epochs": len(report.train_loss), "stop_reason": report.stop_reason}
        print(f"{cfg.variant}: {len(report.train_loss)} epochs, best {report.best_epoch} "
              f"(val {report.best_val_loss:.6g}) -> {out}")
    else:
        print(f"ha: nothing to fit -> {out}")
    write_json(out / "manifest.json", manifest)
    return 0


def _load_run(run: Path):
    manifest = json.loads((run / "manifest.json").read_text())
    cfg = RunConfig.from_dict(manifest["config"])
    grid, _ = load_grid(cfg.data)
    _, arrays = load_bundle(run / "embeddings.json", "embeddings")
    ds = _dataset(cfg, grid, arrays["embeddings"])
    if cfg.variant == "ha":
        return cfg, ds, HistoricalAverage(grid, cfg.ha_by_day_of_week), ds.normalizer
    model, normalizer, _ = load_checkpoint(run / "model.ckpt")
    return cfg, ds, model, normalizer


def cmd_evaluate(args) -> int:
    run = Path(args.run)
    cfg, ds, model, normalizer = _load_run(run)
    report = evaluate(model, ds.test, normalizer)
    out = Path(args.output) if args.output else run / "metrics.json"
    write_json(out, {"variant": cfg.variant, "seed": cfg.seed, **report.to_dict()})
    print(format_table({cfg.variant: report}))
    print()
    print(format_days({cfg.variant: report}))
    return 0


def cmd_predict(args) -> int:
    cfg, ds, model, normalizer = _load_run(Path(args.run))
    test = ds.test
    pred = model.predict_samples(test, normalizer) if hasattr(model, "predict_samples") \
        else predict(test, model, normalizer)
    Path(args.output).parent.mkdir(parents=True, exist_ok=True)
    with open(args.output, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["region", "interval", "actual", "predicted"])
        for r, t, y, p in zip(test.region, test.t + 1, test.target_raw, pred):
            w.writerow([int(r), int(t), f"{y:.6g}", f"{p:.6f}"])
    print(f"{len(test)} predictions -> {args.output}")
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on usage errors
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    commands = {"ingest": cmd_ingest, "synth": cmd_synth, "dtw-graph": cmd_dtw_graph,
                "embed": cmd_embed, "evaluate": cmd_evaluate, "predict": cmd_predict}
    try:
        if args.command == "train":
            return cmd_train(args, argv)
        return commands[args.command](args)
    except ConfigError as exc:
        print(f"dmvst {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (DMVSTError, OSError, KeyError, ValueError) as exc:
        print(f"dmvst {args.command}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
