"""Command-line pipeline: preprocess | build-graph | train | evaluate |
ablate | gradcheck.

Stages communicate only through files under the work directory
(`corpus/`, `graphs/`, `checkpoints/`, `reports/`).  Every stage writes a
manifest with checksums of what it read and produced; downstream stages
refuse inputs whose checksums no longer match.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, dump_config, load_config
from .corpus import (CorpusError, build_examples, filter_corpus, parse_sessions,
                     read_events, read_examples, read_sessions, temporal_split,
                     write_examples, write_sessions, write_vocab)
from .evaluation import evaluate_model, render_table, rows_to_jsonl, run_ablations
from .graphs import build_global_graph, read_global_graph, write_global_graph
from .model import ModelConfig, load_checkpoint, model_gradcheck, save_checkpoint
from .train import TrainingError, train_model

STAGE_DIRS = {"preprocess": "corpus", "build-graph": "graphs", "train": "checkpoints",
              "evaluate": "reports", "ablate": "reports"}


class StageError(RuntimeError):
    pass


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(stage_dir: Path, stage: str, fingerprint: str, inputs, outputs):
    manifest = {
        "stage": stage,
        "tool_version": __version__,
        "config_fingerprint": fingerprint,
        "inputs": {str(p): file_sha256(p) for p in inputs},
        "outputs": {str(p): file_sha256(p) for p in outputs},
    }
    with open(stage_dir / "manifest.json", "w") as f:
        json.dump(manifest, f, sort_keys=True, indent=2)
        f.write("\n")


def verify_upstream(work_dir: Path, stage: str):
    """Check the upstream stage ran and its outputs still match its manifest."""
    stage_dir = work_dir / STAGE_DIRS[stage]
    manifest_path = stage_dir / "manifest.json"
    if not manifest_path.exists():
        raise StageError(f"missing artifacts for stage {stage!r}; run `sessrec {stage}` first")
    with open(manifest_path) as f:
        manifest = json.load(f)
    for path, digest in manifest["outputs"].items():
        if not Path(path).exists():
            raise StageError(f"{path} (declared by stage {stage!r}) is missing; rerun `sessrec {stage}`")
        if file_sha256(path) != digest:
            raise StageError(f"{path} does not match the checksum recorded by stage {stage!r}; "
                             f"rerun `sessrec {stage}`")
    return manifest


def _stage_dir(work_dir: Path, name: str) -> Path:
    d = work_dir / name
    d.mkdir(parents=True, exist_ok=True)
    return d


def _echo_config(stage_dir: Path, cfg: RunConfig):
    (stage_dir / "config_echo.yaml").write_text(dump_config(cfg))


# -- stages -------------------------------------------------------------------


def cmd_preprocess(cfg: RunConfig, work_dir: Path) -> int:
    if not cfg.paths.events:
        raise StageError("preprocess needs an events file (--events or paths.events)")
    out = _stage_dir(work_dir, "corpus")
    with open(cfg.paths.events) as f:
        events = read_events(f, delimiter=cfg.corpus.delimiter)
    corpus = parse_sessions(events)
    filtered = filter_corpus(corpus, cfg.corpus.min_item_freq, cfg.corpus.min_session_len)
    train, test = temporal_split(filtered, int(cfg.corpus.test_window_days * 86400))
    examples = build_examples(train, test, cfg.corpus.validation_fraction, cfg.seed)

    sessions_path = out / "sessions.tsv"
    sessions_path.write_text("")
    write_sessions(sessions_path, train, "train")
    write_sessions(sessions_path, test, "test")
    write_examples(out / "examples.tsv", examples)
    write_vocab(out / "vocab.tsv", train.vocab)

    all_sessions = train.sessions + test.sessions
    meta = {
        "num_items": train.num_items,
        "max_prefix_len": max(len(e.prefix) for e in examples),
        "num_clicks": sum(len(s.items) for s in all_sessions),
        "num_train_examples": sum(1 for e in examples if e.split in ("train", "validation")),
        "num_test_examples": sum(1 for e in examples if e.split == "test"),
        "num_train_sessions": len(train.sessions),
        "num_test_sessions": len(test.sessions),
        "avg_session_len": round(sum(len(s.items) for s in all_sessions) / len(all_sessions), 4),
    }
    (out / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    _echo_config(out, cfg)
    write_manifest(out, "preprocess", cfg.fingerprint(), [Path(cfg.paths.events)],
                   [sessions_path, out / "examples.tsv", out / "vocab.tsv", out / "meta.json"])
    print(f"preprocess: {meta['num_train_examples']} train + {meta['num_test_examples']} test examples, "
          f"{meta['num_items']} items -> {out}")
    return 0


def cmd_build_graph(cfg: RunConfig, work_dir: Path) -> int:
    verify_upstream(work_dir, "preprocess")
    out = _stage_dir(work_dir, "graphs")
    corpus_dir = work_dir / "corpus"
    meta = json.loads((corpus_dir / "meta.json").read_text())
    train_sessions = read_sessions(corpus_dir / "sessions.tsv", "train")
    graph = build_global_graph([s.items for s in train_sessions], cfg.graph.epsilon,
                               cfg.graph.top_n, num_items=meta["num_items"])
    graph_path = out / "global_graph.tsv"
    write_global_graph(graph_path, graph)
    _echo_config(out, cfg)
    write_manifest(out, "build-graph", cfg.fingerprint(),
                   [corpus_dir / "sessions.tsv", corpus_dir / "meta.json"], [graph_path])
    edges = sum(len(v) for v in graph.neighbors_map.values())
    print(f"build-graph: {edges} pruned neighbor entries (epsilon={cfg.graph.epsilon}, "
          f"top_n={cfg.graph.top_n}) -> {graph_path}")
    return 0


def cmd_train(cfg: RunConfig, work_dir: Path) -> int:
    verify_upstream(work_dir, "preprocess")
    verify_upstream(work_dir, "build-graph")
    out = _stage_dir(work_dir, "checkpoints")
    corpus_dir = work_dir / "corpus"
    meta = json.loads((corpus_dir / "meta.json").read_text())
    examples = read_examples(corpus_dir / "examples.tsv")
    graph = read_global_graph(work_dir / "graphs" / "global_graph.tsv")

    log_lines = ["epoch\tlr_effective\ttrain_loss\tval_P@20\tval_MRR@20\tseconds"]

    def log(line):
        log_lines.append(line)
        print(line)

    result = train_model(examples, meta["num_items"], meta["max_prefix_len"], graph,
                         cfg.model, cfg.train, log=log)
    ckpt_path = out / "model.ckpt"
    save_checkpoint(ckpt_path, result.model)
    (out / "train_log.txt").write_text("\n".join(log_lines) + "\n")
    _echo_config(out, cfg)
    write_manifest(out, "train", cfg.fingerprint(),
                   [corpus_dir / "examples.tsv", corpus_dir / "meta.json",
                    work_dir / "graphs" / "global_graph.tsv"],
                   [ckpt_path])
    print(f"train: best epoch {result.best_epoch} (val MRR@20 {result.best_val_mrr20:.4f}) -> {ckpt_path}")
    return 0


def cmd_evaluate(cfg: RunConfig, work_dir: Path, fmt: str) -> int:
    verify_upstream(work_dir, "preprocess")
    verify_upstream(work_dir, "build-graph")
    ckpt_path = Path(cfg.paths.checkpoint) if cfg.paths.checkpoint else work_dir / "checkpoints" / "model.ckpt"
    if not cfg.paths.checkpoint:
        verify_upstream(work_dir, "train")
    elif not ckpt_path.exists():
        raise StageError(f"checkpoint {ckpt_path} does not exist")
    out = _stage_dir(work_dir, "reports")
    corpus_dir = work_dir / "corpus"
    examples = [e for e in read_examples(corpus_dir / "examples.tsv") if e.split == "test"]
    graph = read_global_graph(work_dir / "graphs" / "global_graph.tsv")
    model = load_checkpoint(ckpt_path)
    report = evaluate_model(model, examples, graph, batch_size=cfg.train.batch_size,
                            label="test", fingerprint=cfg.fingerprint())
    rows = [{"label": "test", "report": report}]
    table = render_table(rows)
    (out / "eval.txt").write_text(table + "\n")
    (out / "eval.jsonl").write_text(rows_to_jsonl(rows))
    _echo_config(out, cfg)
    write_manifest(out, "evaluate", cfg.fingerprint(),
                   [corpus_dir / "examples.tsv", work_dir / "graphs" / "global_graph.tsv", ckpt_path],
                   [out / "eval.txt", out / "eval.jsonl"])
    print(rows_to_jsonl(rows) if fmt == "jsonl" else table)
    return 0


ABLATION_GRIDS = {
    "global": [("w/o global", {"k_hops": 0}, {}),
               ("w/o session", {"use_session_layer": False}, {}),
               ("1-hop", {"k_hops": 1}, {}),
               ("2-hop", {"k_hops": 2}, {})],
    "aggregation": [(name, {"aggregation": name, "k_hops": 1}, {}) for name in
                    ("sum", "gate", "max", "concat")],
    "position": [("reversed-position", {"position_mode": "reversed"}, {}),
                 ("forward-position", {"position_mode": "forward"}, {}),
                 ("self-attention", {"position_mode": "self_attention"}, {})],
    "dropout": [(f"dropout={r / 10:.1f}", {"dropout_global": r / 10}, {}) for r in range(1, 10)],
}


def cmd_ablate(cfg: RunConfig, work_dir: Path, grid_name: str, fmt: str) -> int:
    verify_upstream(work_dir, "preprocess")
    verify_upstream(work_dir, "build-graph")
    out = _stage_dir(work_dir, "reports")
    corpus_dir = work_dir / "corpus"
    meta = json.loads((corpus_dir / "meta.json").read_text())
    examples = read_examples(corpus_dir / "examples.tsv")
    graph = read_global_graph(work_dir / "graphs" / "global_graph.tsv")
    grid = ABLATION_GRIDS[grid_name]
    rows = run_ablations(examples, meta["num_items"], meta["max_prefix_len"], graph,
                         cfg.model, cfg.train, grid, fingerprint=cfg.fingerprint(), log=print)
    if grid_name == "dropout":
        scored = [r for r in rows if "report" in r]
        if scored:
            best = max(scored, key=lambda r: r["report"].extra.get("val_mrr20", float("-inf")))
            best["report"].extra["selected_on_validation"] = True
    table = render_table(rows)
    (out / f"ablation_{grid_name}.txt").write_text(table + "\n")
    (out / f"ablation_{grid_name}.jsonl").write_text(rows_to_jsonl(rows))
    _echo_config(out, cfg)
    write_manifest(out, "ablate", cfg.fingerprint(),
                   [corpus_dir / "examples.tsv", work_dir / "graphs" / "global_graph.tsv"],
                   [out / f"ablation_{grid_name}.txt", out / f"ablation_{grid_name}.jsonl"])
    print(rows_to_jsonl(rows) if fmt == "jsonl" else table)
    return 0


def cmd_gradcheck(cfg: RunConfig, full: bool, threshold: float) -> int:
    if full:
        combos = [dict(k_hops=k, aggregation=a, position_mode=p, loss_mode=lm)
                  for k in (1, 2) for a in ("sum", "gate", "max", "concat")
                  for p in ("reversed", "forward") for lm in ("binary", "categorical")]
    else:
        combos = [dict(k_hops=cfg.model.k_hops or 1, aggregation=cfg.model.aggregation,
                       position_mode=cfg.model.position_mode, loss_mode=cfg.model.loss_mode)]
    worst = 0.0
    for combo in combos:
        check_cfg = ModelConfig(embedding_dim=8, dropout_global=0.0, precision="double",
                                use_session_layer=True, **combo)
        err = model_gradcheck(check_cfg)
        worst = max(worst, err)
        desc = " ".join(f"{k}={v}" for k, v in combo.items())
        print(f"gradcheck [{desc}]: max relative error {err:.3e}")
    print(f"gradcheck: overall max relative error {worst:.3e} (threshold {threshold:g})")
    return 0 if worst <= threshold else 1


# -- entry point ----------------------------------------------------------------


def _build_parser():
    parser = argparse.ArgumentParser(prog="sessrec",
                                     description="Session-based recommender pipeline")
    parser.add_argument("--version", action="version", version=f"sessrec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--work-dir", help="artifact directory (default: ./run)")
        p.add_argument("--seed", type=int, help="override the run seed")

    p = sub.add_parser("preprocess", help="events file -> filtered, split, augmented examples")
    common(p)
    p.add_argument("--events", help="raw clickstream file: session_id,item_id,timestamp")
    p.add_argument("--delimiter", help="field delimiter (default: auto , or tab)")
    p.add_argument("--min-item-freq", type=int, dest="min_item_freq")
    p.add_argument("--test-window-days", type=float, dest="test_window_days")

    p = sub.add_parser("build-graph", help="train sessions -> pruned co-occurrence graph")
    common(p)
    p.add_argument("--epsilon", type=int, help="co-occurrence window size")
    p.add_argument("--top-n", type=int, dest="top_n", help="neighbors kept per item")

    p = sub.add_parser("train", help="fit the model on preprocessed artifacts")
    common(p)
    _model_flags(p)
    p.add_argument("--epochs", type=int, dest="max_epochs")
    p.add_argument("--batch-size", type=int, dest="batch_size")

    p = sub.add_parser("evaluate", help="rank the test examples with a trained checkpoint")
    common(p)
    p.add_argument("--checkpoint", help="checkpoint path (default: <work-dir>/checkpoints/model.ckpt)")
    p.add_argument("--format", choices=("text", "jsonl"), default="text")

    p = sub.add_parser("ablate", help="train/evaluate a named configuration grid")
    common(p)
    _model_flags(p)
    p.add_argument("--grid", choices=sorted(ABLATION_GRIDS), required=True)
    p.add_argument("--epochs", type=int, dest="max_epochs")
    p.add_argument("--format", choices=("text", "jsonl"), default="text")

    p = sub.add_parser("gradcheck", help="finite-difference check of the model gradients")
    common(p)
    _model_flags(p)
    p.add_argument("--full", action="store_true", help="sweep hops x aggregation x position x loss")
    p.add_argument("--threshold", type=float, default=1e-4)
    return parser


def _model_flags(p):
    p.add_argument("--hops", type=int, dest="k_hops")
    p.add_argument("--aggregation", choices=("sum", "gate", "max", "concat"))
    p.add_argument("--position-mode", dest="position_mode",
                   choices=("reversed", "forward", "self_attention", "none"))
    p.add_argument("--dropout", type=float, dest="dropout_global")
    p.add_argument("--loss-mode", dest="loss_mode", choices=("binary", "categorical"))


def _overrides_from_args(args) -> dict:
    get = lambda name: getattr(args, name, None)
    overrides = {
        "corpus": {k: get(k) for k in ("delimiter", "min_item_freq", "test_window_days")},
        "graph": {"epsilon": get("epsilon"), "top_n": get("top_n")},
        "model": {k: get(k) for k in ("k_hops", "aggregation", "position_mode",
                                      "dropout_global", "loss_mode")},
        "train": {k: get(k) for k in ("max_epochs", "batch_size")},
        "paths": {"events": get("events"), "checkpoint": get("checkpoint")},
    }
    if get("seed") is not None:
        overrides["seed"] = args.seed
    return overrides


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides_from_args(args))
        work_dir = Path(args.work_dir or (cfg.paths.work_dir or "run"))
        if args.command == "preprocess":
            return cmd_preprocess(cfg, work_dir)
        if args.command == "build-graph":
            return cmd_build_graph(cfg, work_dir)
        if args.command == "train":
            return cmd_train(cfg, work_dir)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, work_dir, args.format)
        if args.command == "ablate":
            return cmd_ablate(cfg, work_dir, args.grid, args.format)
        if args.command == "gradcheck":
            return cmd_gradcheck(cfg, args.full, args.threshold)
        raise AssertionError(args.command)
    except (ConfigError, CorpusError, StageError, TrainingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
