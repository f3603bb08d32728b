"""
SkIn - Command Line
Subcommands synth, train, eval, bench and inspect.

Usage:
    python run.py synth --out runs/corpus
    python run.py train --data runs/corpus --out runs/exp
    python run.py eval --data runs/corpus --out runs/exp --model skin
    python run.py bench --out runs/bench
    python run.py inspect --data runs/corpus --out runs/exp --doc 0
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from .baselines import BaselineKind, BaselineParams, load_baseline, predict_baseline
from .bench import (
    plot_cost_curves, run_cost_sweep, summarize_sweep, write_bench_csv, write_bench_dat,
    write_bench_summary,
)
from .config import ConfigManager, RunConfig, write_run_config
from .encoder import checkpoint_exists, load_checkpoint
from .errors import CheckpointError, ConfigurationError, SkinError
from .model import (
    SkinParams, load_skin, predict_prc, predict_skin, read_selection_dump, segment_scores,
    selection_records, write_selection_dump,
)
from .textio import (
    SegmentedDoc, Vocab, corpus_statistics, encode_records, load_jsonl, split_train_test,
    synth_records, synth_vocab, write_jsonl,
)
from .training import (
    EpochRecord, distilled_from_records, evaluate, selection_accuracy, train_baseline,
    train_stage1, train_stage3, write_training_log,
)
from .utils import RunLogger, setup_logging

logger = logging.getLogger(__name__)

BASELINES = [kind.value for kind in BaselineKind]
# Final checkpoint stems in the order their histories go into training_log.csv.
LOG_STEMS = ["stage1", "stage3"] + BASELINES


def banner(title: str) -> None:
    print("=" * 60)
    print(f"  SkIn - {title}")
    print("=" * 60)


def _csv_list(value: str, cast=str) -> List[Any]:
    try:
        return [cast(part.strip()) for part in value.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad list '{value}'")


def _int_list(value: str) -> List[int]:
    return _csv_list(value, int)


def _set(tree: Dict[str, Any], dotted: str, value: Any) -> None:
    if value is None:
        return
    node = tree
    *parents, leaf = dotted.split(".")
    for key in parents:
        node = node.setdefault(key, {})
    node[leaf] = value


# =============================================================================
# Shared plumbing
# =============================================================================

def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Nested config mapping from the flags that were given."""
    tree: Dict[str, Any] = {}
    for dest, dotted in FLAG_KEYS.items():
        _set(tree, dotted, getattr(args, dest, None))
    if getattr(args, "mask_padding", False):
        _set(tree, "model.mask_padding", True)
    if getattr(args, "ablate_local", False):
        _set(tree, "model.ablate_local", True)
    return tree


FLAG_KEYS = {
    "seed": "seed",
    "out": "out",
    "data": "data.dir",
    "docs": "synth.num_docs",
    "n": "data.n",
    "l": "data.l",
    "classes": "data.num_classes",
    "vocab_size": "synth.vocab_size",
    "signal_count": "synth.signal_count",
    "noise_rate": "synth.noise_rate",
    "epochs_stage1": "train.epochs_stage1",
    "epochs_stage3": "train.epochs_stage3",
    "epochs_baseline": "train.epochs_baseline",
    "train_batch_size": "train.batch_size",
    "methods": "bench.methods",
    "lengths": "bench.lengths",
    "trials": "bench.trials",
    "bench_batch_size": "bench.batch_size",
    "micro_batch": "bench.micro_batch",
    "segment_count": "bench.segment_count",
    "segment_length": "bench.segment_length",
    "element_budget": "bench.element_budget",
}


def _resolve(args: argparse.Namespace) -> RunConfig:
    manager = ConfigManager()
    return manager.load(preset=args.preset, user_file=args.config, overrides=_overrides(args))


def _progress(args: argparse.Namespace) -> bool:
    return not args.quiet and sys.stderr.isatty()


def _load_vocab(out_dir: Path, data_dir: Path) -> Vocab:
    for candidate in (out_dir / "vocab.txt", data_dir / "vocab.txt"):
        if candidate.exists():
            return Vocab.load(candidate)
    raise FileNotFoundError(f"Vocabulary file not found in {out_dir} or {data_dir}")


def _load_docs(config: RunConfig, vocab: Vocab, split: str) -> List[SegmentedDoc]:
    path = Path(config.data.dir) / f"{split}.jsonl"
    records = load_jsonl(path, config.data.num_classes)
    if not records:
        raise ConfigurationError(f"{path} holds no documents")
    return encode_records(records, vocab, config.data.n, config.data.l, prefix=split)


def _remove_stem(stem: Path) -> None:
    for name in (stem.name, stem.name + ".partial"):
        for suffix in (".npz", ".json"):
            path = stem.with_name(name + suffix)
            if path.exists():
                path.unlink()


def _history(stem: Path) -> List[EpochRecord]:
    if not checkpoint_exists(stem):
        return []
    manifest, _ = load_checkpoint(stem)
    rows = manifest.get("training", {}).get("history", [])
    return [EpochRecord(**row) for row in rows]


def _write_training_log(ckpt_dir: Path, out_dir: Path) -> None:
    rows: List[EpochRecord] = []
    for name in LOG_STEMS:
        rows.extend(_history(ckpt_dir / name))
    write_training_log(rows, out_dir / "training_log.csv")


def _epoch_hook(events: RunLogger):
    def on_epoch(record: EpochRecord) -> None:
        events.log(record.stage, "epoch", epoch=record.epoch, mean_loss=record.mean_loss, train_acc=record.train_acc)
        print(f"  [{record.stage}] epoch {record.epoch}: loss {record.mean_loss:.6f}  acc {record.train_acc:.4f}")
    return on_epoch


# =============================================================================
# synth
# =============================================================================

def cmd_synth(args: argparse.Namespace) -> int:
    config = _resolve(args)
    out_dir = Path(config.out)
    if out_dir.exists() and any(out_dir.iterdir()) and not args.force:
        raise ConfigurationError(f"output directory {out_dir} is not empty (use --force to overwrite)")
    spec = config.synth_spec()
    write_run_config(config, out_dir)
    events = RunLogger(out_dir, "synth")
    events.log("synth", "start", spec=spec.to_dict())

    banner("Synthetic Corpus")
    print(f"  Documents: {spec.num_docs}  (n={spec.n}, l={spec.l}, classes={spec.num_classes})")
    vocab = synth_vocab(spec)
    records = synth_records(spec, vocab)
    train, test = split_train_test(records, config.data.eval_fraction, config.seed)
    write_jsonl(train.docs, out_dir / "train.jsonl")
    write_jsonl(test.docs, out_dir / "test.jsonl")
    vocab.save(out_dir / "vocab.txt")

    rows = corpus_statistics([r.label for r in train], [r.label for r in test], spec.num_classes)
    print()
    print(f"  {'label':>8} {'train':>8} {'test':>8} {'total':>8}")
    for row in rows:
        name = "all" if row["label"] < 0 else str(row["label"])
        print(f"  {name:>8} {row['train']:>8} {row['test']:>8} {row['total']:>8}")
    print()
    print(f"  Wrote {out_dir / 'train.jsonl'}, {out_dir / 'test.jsonl'}, {out_dir / 'vocab.txt'}")
    events.log("synth", "done", train=len(train), test=len(test), vocab=len(vocab))
    return 0


# =============================================================================
# train
# =============================================================================

def _train_skin(args, config: RunConfig, docs, lite, strong, out_dir: Path, events: RunLogger) -> None:
    ckpt = out_dir / "checkpoints"
    stages = [1, 2, 3] if args.stage == "all" else [int(args.stage)]
    train_config = config.train_config()
    progress = _progress(args)
    selections = out_dir / "selections.jsonl"

    if args.force:
        for stage in stages:
            if stage == 2 and selections.exists():
                selections.unlink()
            elif stage != 2:
                _remove_stem(ckpt / f"stage{stage}")

    if 1 in stages:
        stem = ckpt / "stage1"
        if checkpoint_exists(stem):
            print("  Stage 1: checkpoint found, skipping")
        else:
            print("  Stage 1: PrC-SaA on o_pre")
            params = SkinParams.initialize(
                lite, strong, config.data.num_classes,
                np.random.default_rng([config.seed, 0]), config.model.mask_padding,
            )
            events.log("stage1", "start", docs=len(docs))
            result = train_stage1(docs, params, train_config, ckpt, _epoch_hook(events), progress)
            events.log("stage1", "done", epochs=len(result.history), stopped_early=result.stopped_early)

    if 2 in stages:
        if selections.exists():
            print("  Stage 2: selections found, skipping")
        else:
            if not checkpoint_exists(ckpt / "stage1"):
                raise CheckpointError(f"stage 1 checkpoint missing in {ckpt}; run --stage 1 first")
            print("  Stage 2: key segment selection")
            params, _, _ = load_skin(ckpt / "stage1", "prc")
            records = selection_records(docs, params, config.model.eval_batch_size)
            write_selection_dump(records, selections)
            accuracy = selection_accuracy([r.k for r in records], [r.planted_key for r in records])
            if accuracy is not None:
                print(f"  Stage 2: selection accuracy vs planted keys {accuracy:.4f}")
            events.log("stage2", "done", selected=len(records), selection_accuracy=accuracy)

    if 3 in stages:
        stem = ckpt / "stage3"
        if checkpoint_exists(stem):
            print("  Stage 3: checkpoint found, skipping")
        else:
            if not checkpoint_exists(ckpt / "stage1") or not selections.exists():
                raise CheckpointError("stage 3 needs the stage 1 checkpoint and selections.jsonl")
            print("  Stage 3: joint training on o with frozen selections")
            params, _, _ = load_skin(ckpt / "stage1", "prc")
            distilled = distilled_from_records(docs, read_selection_dump(selections))
            events.log("stage3", "start", docs=len(distilled))
            result = train_stage3(
                distilled, params, train_config, ckpt, _epoch_hook(events), progress,
                ablate_local=config.model.ablate_local,
            )
            events.log("stage3", "done", epochs=len(result.history), stopped_early=result.stopped_early)


def _train_baseline(args, config: RunConfig, docs, strong, out_dir: Path, events: RunLogger) -> None:
    kind = BaselineKind(args.model)
    ckpt = out_dir / "checkpoints"
    stem = ckpt / kind.value
    if args.force:
        _remove_stem(stem)
    if checkpoint_exists(stem):
        print(f"  {kind.value}: checkpoint found, skipping")
        return
    print(f"  Baseline {kind.value}")
    params = BaselineParams.initialize(
        kind, strong, config.data.num_classes,
        np.random.default_rng([config.seed, 1]),
        truncate_cap=config.truncate_cap(),
        head_tail_len=config.head_tail_len(),
        segment_len=config.data.l,
        mask_padding=config.model.mask_padding,
    )
    events.log(kind.value, "start", docs=len(docs))
    result = train_baseline(docs, params, config.train_config(), ckpt, _epoch_hook(events), _progress(args))
    events.log(kind.value, "done", epochs=len(result.history), stopped_early=result.stopped_early)


def cmd_train(args: argparse.Namespace) -> int:
    config = _resolve(args)
    out_dir = Path(config.out)
    data_dir = Path(config.data.dir)
    train_file = data_dir / "train.jsonl"
    if not train_file.exists():
        raise FileNotFoundError(f"Training corpus not found: {train_file}")
    write_run_config(config, out_dir)
    events = RunLogger(out_dir, "train")

    banner(f"Training ({args.model})")
    if (data_dir / "vocab.txt").exists():
        vocab = Vocab.load(data_dir / "vocab.txt")
    else:
        vocab = Vocab.build(
            (r.text for r in load_jsonl(train_file, config.data.num_classes)),
            config.data.min_count, config.data.max_size,
        )
    vocab.save(out_dir / "vocab.txt")
    docs = _load_docs(config, vocab, "train")
    lite, strong = config.encoder_configs(len(vocab))
    print(f"  Documents: {len(docs)}  vocab {len(vocab)}  n={config.data.n} l={config.data.l}")
    print(f"  Lite: {lite.layers}x{lite.dim}  Strong: {strong.layers}x{strong.dim}  (preset {config.encoder.preset})")
    print()

    if args.model == "skin":
        _train_skin(args, config, docs, lite, strong, out_dir, events)
    else:
        _train_baseline(args, config, docs, strong, out_dir, events)

    _write_training_log(out_dir / "checkpoints", out_dir)
    print()
    print(f"  Wrote {out_dir / 'training_log.csv'}")
    return 0


# =============================================================================
# eval
# =============================================================================

def cmd_eval(args: argparse.Namespace) -> int:
    config = _resolve(args)
    out_dir = Path(config.out)
    ckpt = out_dir / "checkpoints"
    write_run_config(config, out_dir, "run_config_eval.yaml")
    events = RunLogger(out_dir, "eval")

    vocab = _load_vocab(out_dir, Path(config.data.dir))
    docs = _load_docs(config, vocab, args.split)
    batch = config.model.eval_batch_size
    model = args.model
    banner(f"Evaluation ({model}, {args.split})")

    selected: Optional[List[int]] = None
    if model == "skin":
        stem = Path(args.checkpoint) if args.checkpoint else ckpt / "stage3"
        params, _, _ = load_skin(stem, "skin")
        holder: Dict[str, Any] = {}

        def predict(batch_docs):
            probs, keys = predict_skin(batch_docs, params, batch, config.model.ablate_local)
            holder["keys"] = keys
            return probs

        report = evaluate(predict, docs)
        selected = [key.k for key in holder["keys"]]
    elif model == "prc":
        stem = Path(args.checkpoint) if args.checkpoint else ckpt / "stage1"
        params, _, _ = load_skin(stem, "prc")
        report = evaluate(lambda batch_docs: predict_prc(batch_docs, params, batch), docs)
        selected = [r.k for r in selection_records(docs, params, batch)]
    else:
        kind = BaselineKind(model)
        stem = Path(args.checkpoint) if args.checkpoint else ckpt / kind.value
        params, _, _ = load_baseline(stem, kind)
        report = evaluate(lambda batch_docs: predict_baseline(batch_docs, params, batch), docs)

    if selected is not None:
        report.selection_accuracy = selection_accuracy(selected, [d.key_index for d in docs])
    report.extra = {"model": model, "split": args.split, "checkpoint": str(stem)}

    path = out_dir / f"eval_{model}.json"
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")

    print(f"  Accuracy:  {report.accuracy:.4f}")
    print(f"  Macro-F1:  {report.macro_f1:.4f}")
    if report.selection_accuracy is not None:
        print(f"  Selection: {report.selection_accuracy:.4f}")
    print("  Confusion (rows = true):")
    for row in report.confusion:
        print("    " + " ".join(f"{c:>6}" for c in row))
    print(f"  Wrote {path}")
    events.log("eval", "done", **report.to_dict())
    return 0


# =============================================================================
# bench
# =============================================================================

def cmd_bench(args: argparse.Namespace) -> int:
    config = _resolve(args)
    out_dir = Path(config.out)
    if (out_dir / "bench.csv").exists() and not args.force:
        raise ConfigurationError(f"{out_dir / 'bench.csv'} exists (use --force to overwrite)")
    bench = config.bench_config()
    lite, strong = config.bench_encoder_configs()
    write_run_config(config, out_dir)
    events = RunLogger(out_dir, "bench")

    banner("Cost Benchmark")
    print(f"  Methods: {', '.join(bench.methods)}")
    print(f"  Lengths: {bench.lengths}  trials {bench.trials}  batch {bench.batch_size}")
    print()

    samples = run_cost_sweep(
        bench.methods, bench.lengths, bench.trials, bench.seed, bench, lite, strong,
        progress=_progress(args),
        on_sample=lambda s: events.log("bench", "sample", **{k: v for k, v in s.to_dict().items() if k != "trial_times"}),
    )
    summary = summarize_sweep(samples)
    settings = {"bench": bench.to_dict(), "lite": lite.to_dict(), "strong": strong.to_dict()}

    rows = write_bench_csv(samples, out_dir / "bench.csv")
    write_bench_summary(samples, summary, out_dir / "bench_summary.json", settings)
    write_bench_dat(samples, out_dir / "bench.dat")
    if not args.no_plot:
        plot_cost_curves(samples, out_dir / "bench.png")

    print(f"  {'method':<16} {'L':>6} {'time_s':>10} {'modeled':>14} {'peak':>12}")
    for s in samples:
        flag = " *" if s.extrapolated else ""
        print(
            f"  {s.method:<16} {s.length:>6} {s.wall_time:>10.4f} "
            f"{s.modeled_quadratic_elems:>14} {s.measured_peak_elems:>12}{flag}"
        )
    print("  (* extrapolated)")
    print()
    for name, info in summary["methods"].items():
        exp = info["exponents"]
        parts = [f"{key} {value:.3f}" for key, value in exp.items() if value is not None]
        if parts:
            print(f"  {name} exponents: {', '.join(parts)}")
    for item in summary["savings"]:
        if item["length"] == max(bench.lengths):
            flag = " (extrapolated)" if item["extrapolated"] else ""
            print(f"  {item['method']} saves {item['percent']:.2f}% at L={item['length']}{flag}")
    print(f"  Wrote {rows} rows to {out_dir / 'bench.csv'}")
    events.log("bench", "done", rows=rows)
    return 0


# =============================================================================
# inspect
# =============================================================================

def cmd_inspect(args: argparse.Namespace) -> int:
    config = _resolve(args)
    out_dir = Path(config.out)
    vocab = _load_vocab(out_dir, Path(config.data.dir))
    docs = _load_docs(config, vocab, args.split)
    if not 0 <= args.doc < len(docs):
        raise ConfigurationError(f"--doc must be in [0, {len(docs)}), got {args.doc}")
    name, kind = ("stage3", "skin") if args.model == "skin" else ("stage1", "prc")
    stem = Path(args.checkpoint) if args.checkpoint else out_dir / "checkpoints" / name
    params, _, _ = load_skin(stem, kind)
    doc = docs[args.doc]

    banner(f"Segment Weights ({doc.doc_id}, label {doc.label})")
    for row in segment_scores(doc, params):
        marks = ("<- selected" if row["selected"] else "") + ("  [planted]" if row["planted"] else "")
        words = " ".join(vocab.token(t) for t in row["tokens"][:8])
        bar = "#" * int(round(row["weight"] * 40))
        print(f"  {row['segment']:>3} {row['weight']:.4f} {bar:<40} {words} ... {marks}")
    return 0


# =============================================================================
# Parser
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=Path, default=None, help='YAML config (e.g. an earlier run_config.yaml)')
    common.add_argument('--preset', type=str, default=None, help='Config preset (desk, full)')
    common.add_argument('--seed', type=int, default=None, help='Master random seed')
    common.add_argument('--out', type=str, default=None, help='Output directory')
    common.add_argument('--force', action='store_true', help='Overwrite existing outputs')
    common.add_argument('--verbose', '-v', action='store_true', help='Debug logging')
    common.add_argument('--quiet', '-q', action='store_true', help='Warnings only, no progress bars')

    parser = argparse.ArgumentParser(
        description='SkIn skimming-intensive long-text classification',
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('synth', parents=[common], help='Generate the planted-key corpus')
    p.add_argument('--docs', type=int, default=None, help='Number of documents')
    p.add_argument('--n', type=int, default=None, help='Segments per document')
    p.add_argument('--l', type=int, default=None, help='Tokens per segment (multiple of 4)')
    p.add_argument('--classes', type=int, default=None, help='Number of classes')
    p.add_argument('--vocab-size', type=int, default=None)
    p.add_argument('--signal-count', type=int, default=None)
    p.add_argument('--noise-rate', type=float, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser('train', parents=[common], help='Train SkIn stages or a baseline')
    p.add_argument('--data', type=str, default=None, help='Corpus directory')
    p.add_argument('--model', choices=['skin'] + BASELINES, default='skin')
    p.add_argument('--stage', choices=['1', '2', '3', 'all'], default='all')
    p.add_argument('--n', type=int, default=None)
    p.add_argument('--l', type=int, default=None)
    p.add_argument('--classes', type=int, default=None)
    p.add_argument('--epochs-stage1', type=int, default=None)
    p.add_argument('--epochs-stage3', type=int, default=None)
    p.add_argument('--epochs-baseline', type=int, default=None)
    p.add_argument('--batch-size', dest='train_batch_size', type=int, default=None)
    p.add_argument('--mask-padding', action='store_true')
    p.add_argument('--ablate-local', action='store_true', help='Classify from r_g alone')
    p.set_defaults(func=cmd_train)

    p = sub.add_parser('eval', parents=[common], help='Evaluate a trained model')
    p.add_argument('--data', type=str, default=None)
    p.add_argument('--model', choices=['skin', 'prc'] + BASELINES, default='skin')
    p.add_argument('--checkpoint', type=str, default=None, help='Checkpoint stem (without suffix)')
    p.add_argument('--split', choices=['test', 'train'], default='test')
    p.add_argument('--n', type=int, default=None)
    p.add_argument('--l', type=int, default=None)
    p.add_argument('--classes', type=int, default=None)
    p.add_argument('--ablate-local', action='store_true')
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser('bench', parents=[common], help='Cost versus input length')
    p.add_argument('--methods', type=_csv_list, default=None, help='Comma list of methods')
    p.add_argument('--lengths', type=_int_list, default=None, help='Comma list of ascending lengths')
    p.add_argument('--trials', type=int, default=None)
    p.add_argument('--batch-size', dest='bench_batch_size', type=int, default=None)
    p.add_argument('--micro-batch', type=int, default=None)
    p.add_argument('--segment-count', type=int, default=None)
    p.add_argument('--segment-length', type=int, default=None)
    p.add_argument('--element-budget', type=int, default=None)
    p.add_argument('--no-plot', action='store_true')
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser('inspect', parents=[common], help='Show segment weights of one document')
    p.add_argument('--data', type=str, default=None)
    p.add_argument('--model', choices=['skin', 'prc'], default='skin')
    p.add_argument('--checkpoint', type=str, default=None)
    p.add_argument('--split', choices=['test', 'train'], default='test')
    p.add_argument('--doc', type=int, default=0)
    p.add_argument('--n', type=int, default=None)
    p.add_argument('--l', type=int, default=None)
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose, args.quiet)
    try:
        return args.func(args)
    except (SkinError, FileNotFoundError) as e:
        print(f"Error: {e}")
        return 1
    except KeyboardInterrupt:
        print("\nInterrupted; partial checkpoints are kept for resume.")
        return 130


if __name__ == '__main__':
    sys.exit(main())
