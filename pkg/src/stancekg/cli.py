"""Command-line pipeline: validate, train, calibrate, infer, eval, synth, report."""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import consistency, metrics, storage, synth, trainer
from .encoders import EmbeddingStore, hash_encode
from .errors import StanceKGError
from .graph import AC_STANCES, build_stance_graph
from .scoring import ScoringModel
from .storage import (load_checkpoint, read_dataset, read_embedding_store,
                      read_mists, read_predictions, save_checkpoint,
                      scan_dataset, write_thresholds)
from .trainer import TrainConfig

COVAXLIES_SPLITS = {"train": 5267, "dev": 527, "test": 1452}


def _read_config_file(path: str) -> dict:
    """Flat `key = value` lines; '#' starts a comment."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise StanceKGError(f"{path} line {lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key] = value
    return out


def _train_config(args) -> TrainConfig:
    cfg = TrainConfig()
    file_values = _read_config_file(args.config) if args.config else {}
    casts = {
        "model": lambda v: ScoringModel.parse(v), "epochs": int, "batch_size": int,
        "peak_lr": float, "warmup_fraction": float, "margin": float,
        "negatives_per_positive": int, "dim_k": int, "seed": int,
        "positive_cap_per_mist_per_epoch": int,
    }
    for key, raw in file_values.items():
        if key not in casts:
            raise StanceKGError(f"unknown config key {key!r}")
        setattr(cfg, key, casts[key](raw))
    # flags override file values
    if args.model is not None:
        cfg.model = ScoringModel.parse(args.model)
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "epochs", None) is not None:
        cfg.epochs = args.epochs
    cfg.validate()
    return cfg


def _load_store(args, dataset_records, mists) -> EmbeddingStore:
    if args.embeddings:
        return read_embedding_store(args.embeddings)
    if args.hash_dim:
        texts = {m.id: m.text for m in mists}
        for r in dataset_records:
            texts.setdefault(r.tweet_id, r.text or "")
        store = EmbeddingStore(dim=args.hash_dim)
        for key, text in texts.items():
            store.add(key, hash_encode(text or "", args.hash_dim))
        return store
    raise StanceKGError("provide --embeddings or --hash-dim")


def _graphs_from_records(records, split="train"):
    grouped = {}
    for r in records:
        if r.split == split:
            grouped.setdefault(r.mist_id, []).append((r.tweet_id, r.stance))
    return {mid: build_stance_graph(mid, labeled) for mid, labeled in sorted(grouped.items())}


def _split_pairs(records, split):
    return [(r.tweet_id, r.mist_id, r.stance) for r in records if r.split == split]


def cmd_validate(args) -> int:
    records, errors = scan_dataset(args.dataset)
    try:
        mists = read_mists(args.mists)
    except (StanceKGError, json.JSONDecodeError) as exc:
        print(f"error: target file: {exc}")
        return 1

    taxonomy = storage.load_taxonomy(args.taxonomy)
    mist_ids = {m.id for m in mists}
    for m in mists:
        if m.theme and m.theme not in taxonomy:
            errors.append(f"target {m.id}: theme {m.theme!r} not in taxonomy")
        elif m.theme and m.concern and m.concern not in taxonomy[m.theme]:
            errors.append(f"target {m.id}: concern {m.concern!r} not under theme {m.theme!r}")

    seen_pairs = set()
    for r in records:
        if r.mist_id not in mist_ids:
            errors.append(f"tweet {r.tweet_id}: dangling mist_id {r.mist_id!r}")
        key = (r.tweet_id, r.mist_id)
        if key in seen_pairs:
            errors.append(f"duplicate pair {key!r}")
        seen_pairs.add(key)

    store = None
    if args.embeddings:
        store = read_embedding_store(args.embeddings)
        for m in mists:
            if m.id not in store:
                errors.append(f"target {m.id}: no content embedding")
        for r in records:
            if r.tweet_id not in store:
                errors.append(f"tweet {r.tweet_id}: no content embedding")

    counts = {s: 0 for s in storage.SPLITS}
    for r in records:
        counts[r.split] += 1
    summary = ", ".join(f"{s}={counts[s]}" for s in storage.SPLITS)
    if counts == COVAXLIES_SPLITS:
        print(f"CoVaxLies-full detected: splits {summary}")
    else:
        print(f"dataset: {len(records)} records ({summary}), {len(mists)} targets"
              + (f", store dim {store.dim}" if store else ""))

    if errors:
        for e in errors:
            print(f"error: {e}")
        print(f"validation failed with {len(errors)} errors")
        return 1
    print("validation passed")
    return 0


def cmd_train(args) -> int:
    cfg = _train_config(args)
    records = read_dataset(args.dataset)
    mists = read_mists(args.mists)
    store = _load_store(args, records, mists)
    graphs = _graphs_from_records(records, split="train")
    used_mists = [m for m in mists if m.id in graphs]
    state = trainer.train(cfg, [graphs[m.id] for m in used_mists], store,
                          used_mists, log=print)
    save_checkpoint(args.checkpoint, state, config=cfg)
    print(f"checkpoint written to {args.checkpoint}")
    return 0


def _unknown_pool(records):
    """Chains run through every non-train pair, the shared unknown population."""
    return [(r.tweet_id, r.mist_id) for r in records if r.split != "train"]


def cmd_calibrate(args) -> int:
    state, cfg, _ = load_checkpoint(args.checkpoint)
    records = read_dataset(args.dataset)
    mists = read_mists(args.mists)
    store = _load_store(args, records, mists)
    graphs = _graphs_from_records(records, split="train")
    dev_pairs = _split_pairs(records, "dev")
    table = consistency.calibrate_thresholds(state, store, mists, graphs,
                                             dev_pairs, depth=args.acs_depth,
                                             pool_pairs=_unknown_pool(records))
    save_checkpoint(args.checkpoint, state, config=cfg, thresholds=table)
    out = args.thresholds or (os.path.splitext(args.checkpoint)[0] + ".thresholds.txt")
    write_thresholds(out, table)
    print(f"calibrated {len(table.values)} targets "
          f"(fallback {table.global_fallback:.4f}) -> {out}")
    return 0


def cmd_infer(args) -> int:
    state, _, table = load_checkpoint(args.checkpoint)
    records = read_dataset(args.dataset)
    mists = read_mists(args.mists)
    store = _load_store(args, records, mists)
    graphs = _graphs_from_records(records, split="train")

    if args.threshold is not None:
        table = consistency.ThresholdTable(values={}, global_fallback=args.threshold)
    elif args.thresholds:
        table = storage.read_thresholds(args.thresholds)
    elif table is None:
        print("error: checkpoint has no calibrated thresholds; "
              "run `stancekg calibrate` first or pass --threshold")
        return 1

    predict = [(r.tweet_id, r.mist_id) for r in records if r.split == args.split]
    jobs = 1 if args.deterministic else args.jobs
    result = consistency.infer(state, store, mists, graphs, _unknown_pool(records),
                               table, depth=args.acs_depth, jobs=jobs,
                               predict_pairs=predict)
    storage.write_predictions(args.out, result.predictions)
    finalized = sum(1 for p in result.predictions if p.stance in AC_STANCES)
    print(f"{len(result.predictions)} predictions ({finalized} with stance) -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    records = read_dataset(args.dataset)
    mists = read_mists(args.mists)
    gold = _split_pairs(records, args.split)
    pred = read_predictions(args.predictions)
    report = metrics.evaluate(gold, pred)
    theme_report = metrics.evaluate_by_theme(gold, pred, mists)
    storage.write_report_json(args.out, report, theme_report,
                              extra={"split": args.split, "records": len(gold)})
    if args.csv:
        storage.write_theme_csv(args.csv, theme_report)
    m = report
    print(f"macro P/R/F1: {m.macro_precision:.4f} {m.macro_recall:.4f} {m.macro_f1:.4f}")
    for name, cm in report.per_class.items():
        print(f"  {name}: P {cm.precision:.4f} R {cm.recall:.4f} F1 {cm.f1:.4f}")
    print(f"report -> {args.out}")
    return 0


def cmd_synth(args) -> int:
    cfg = synth.SynthConfig(sigma=args.sigma, n_tweets=args.tweets,
                            n_mists=args.num_mists, seed=args.seed, dim=args.dim)
    mists, records, store = synth.generate(cfg)
    os.makedirs(args.out_dir, exist_ok=True)
    dataset_path = os.path.join(args.out_dir, "dataset.jsonl")
    mists_path = os.path.join(args.out_dir, "mists.jsonl")
    store_path = os.path.join(args.out_dir, "embeddings.cvle")
    storage.write_dataset(dataset_path, records)
    storage.write_mists(mists_path, mists)
    storage.write_embedding_store(store_path, store)
    print(f"wrote {len(records)} records, {len(mists)} targets, "
          f"{len(store)} embeddings to {args.out_dir}")
    return 0


def cmd_report(args) -> int:
    with open(args.report, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    overall = doc["overall"]
    print("class      precision  recall     f1")
    for name, m in overall["per_class"].items():
        print(f"{name:<10} {m['precision']:<10.4f} {m['recall']:<10.4f} {m['f1']:.4f}")
    mac = overall["macro"]
    print(f"{'macro':<10} {mac['precision']:<10.4f} {mac['recall']:<10.4f} {mac['f1']:.4f}")
    if "by_theme" in doc:
        print("\ntheme                     accept_f1  reject_f1  support")
        for theme, m in doc["by_theme"].items():
            print(f"{theme:<25} {m['accept_f1']:<10.4f} {m['reject_f1']:<10.4f} {m['support']}")
    return 0


def _add_io_flags(p, embeddings=True):
    p.add_argument("--dataset", required=True)
    p.add_argument("--mists", required=True)
    if embeddings:
        p.add_argument("--embeddings")
        p.add_argument("--hash-dim", type=int,
                       help="encode texts with the built-in hash encoder at this dimension")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stancekg",
        description="Stance identification over misinformation knowledge graphs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check dataset integrity")
    _add_io_flags(p)
    p.add_argument("--taxonomy")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("train", help="train a scoring model")
    _add_io_flags(p)
    p.add_argument("--config")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--model", choices=[m.value for m in ScoringModel])
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("calibrate", help="select per-target no-stance thresholds on dev data")
    _add_io_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--acs-depth", type=int, default=32)
    p.add_argument("--thresholds", help="output path for the threshold table")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("infer", help="assign stances to unlabeled pairs")
    _add_io_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--acs-depth", type=int, default=32)
    p.add_argument("--threshold", type=float, help="global threshold override")
    p.add_argument("--thresholds", help="threshold table file")
    p.add_argument("--split", default="test", choices=list(storage.SPLITS))
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="score predictions against gold labels")
    _add_io_flags(p, embeddings=False)
    p.add_argument("--predictions", required=True)
    p.add_argument("--split", default="test", choices=list(storage.SPLITS))
    p.add_argument("--out", required=True)
    p.add_argument("--csv", help="plot-ready per-theme CSV path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--sigma", type=float, default=5.0)
    p.add_argument("--tweets", type=int, default=200)
    p.add_argument("--num-mists", type=int, default=4)
    p.add_argument("--seed", type=int, default=13)
    p.add_argument("--dim", type=int, default=48)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="pretty-print an eval report")
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StanceKGError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
