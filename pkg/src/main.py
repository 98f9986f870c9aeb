#!/usr/bin/env python3
"""desk-trocr command-line entry point."""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from src.core.controllers.recognition_controller import RecognitionController
from src.core.tokenizer.bpe import BpeTokenizer
from src.core.training.trainer import run_training
from src.data.augment import AugmentStats
from src.data.textgen import build_corpus, load_wordlist
from src.evaluation.metrics import evaluate_corpus
from src.monitoring.performance_monitor import PerformanceMonitor
from src.storage.checkpoint_storage import load_checkpoint, save_checkpoint
from src.storage.config_manager import ConfigManager
from src.storage.dataset_storage import (
    load_samples,
    read_image,
    read_manifest,
    read_predictions,
    resolve_image_path,
    write_image,
    write_predictions,
)
from src.storage.file_io import dumps_json, write_json
from src.ui.gradio_interface import create_gradio_interface
from src.utils.errors import InputError, UsageError, error_handler
from src.utils.logging import logger
from src.utils.seeding import derive_seed

CHECKPOINT_NAME = "model.ckpt"
HISTORY_NAME = "history.json"


class CliParser(argparse.ArgumentParser):
    """argparse that raises instead of printing a multi-line usage error."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def _add_search_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--beam", type=int, help="beam width (search.beam)")
    parser.add_argument("--max-len", type=int, dest="max_len", help="maximum generated tokens (search.max_len)")
    parser.add_argument("--length-penalty", type=float, dest="length_penalty",
                        help="length normalisation exponent (search.length_penalty)")


def build_parser() -> argparse.ArgumentParser:
    parser = CliParser(prog="desk-trocr", description="Desk-scale Transformer OCR.")
    parser.add_argument("--config", type=Path, help="JSON run configuration")
    parser.add_argument("--seed", type=int, help="run seed (runtime.seed)")
    parser.add_argument("--threads", type=int, help="worker threads (runtime.threads)")
    commands = parser.add_subparsers(dest="command", parser_class=CliParser)
    commands.required = True

    gen = commands.add_parser("gen", help="render a synthetic textline corpus")
    gen.add_argument("--out", type=Path, required=True)
    gen.add_argument("--num-lines", type=int, dest="num_lines")
    gen.add_argument("--style", choices=["printed", "sheared"])
    gen.add_argument("--wordlist", type=Path, help="whitespace-separated words; built-in list when omitted")

    tok = commands.add_parser("tokenizer-train", help="train a BPE tokenizer on manifest transcripts")
    tok.add_argument("--manifest", type=Path, required=True)
    tok.add_argument("--out", type=Path, required=True)
    tok.add_argument("--vocab-size", type=int, dest="vocab_size")

    train = commands.add_parser("train", help="train a model")
    train.add_argument("--train", type=Path, required=True, dest="train_manifest")
    train.add_argument("--val", type=Path, dest="val_manifest")
    train.add_argument("--tokenizer", type=Path, required=True)
    train.add_argument("--out", type=Path, required=True)
    train.add_argument("--init", type=Path, dest="init_checkpoint", help="checkpoint to start from")
    train.add_argument("--preset", help="model preset (model.preset)")
    train.add_argument("--epochs", type=int)
    train.add_argument("--max-steps", type=int, dest="max_steps")
    train.add_argument("--batch-size", type=int, dest="batch_size")
    train.add_argument("--lr", type=float)
    train.add_argument("--no-augment", action="store_true", dest="no_augment")

    ev = commands.add_parser("eval", help="score predictions against a manifest")
    ev.add_argument("--manifest", type=Path, required=True)
    ev.add_argument("--predictions", type=Path, required=True)
    ev.add_argument("--out", type=Path, required=True)
    ev.add_argument("--scene", action="store_true", help="also report single-word accuracy")

    rec = commands.add_parser("recognize", help="transcribe images")
    rec.add_argument("--checkpoint", type=Path, required=True)
    rec.add_argument("--manifest", type=Path, help="recognize every image of a manifest")
    rec.add_argument("--out", type=Path, required=True)
    rec.add_argument("images", nargs="*", type=Path)
    _add_search_flags(rec)

    bench = commands.add_parser("bench", help="measure recognition throughput")
    bench.add_argument("--checkpoint", type=Path, required=True)
    bench.add_argument("--manifest", type=Path, required=True)
    bench.add_argument("--out", type=Path, required=True)
    _add_search_flags(bench)

    preview = commands.add_parser("augment-preview", help="write augmented copies of sample images")
    preview.add_argument("--manifest", type=Path, required=True)
    preview.add_argument("--out", type=Path, required=True)
    preview.add_argument("--count", type=int, default=8)

    inspect = commands.add_parser("checkpoint-inspect", help="print a checkpoint header as JSON")
    inspect.add_argument("--checkpoint", type=Path, required=True)

    serve = commands.add_parser("serve", help="launch the Gradio recognition demo")
    serve.add_argument("--checkpoint", type=Path, required=True)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=7860)
    _add_search_flags(serve)
    return parser


# Flag attribute -> dotted config key
OVERRIDE_KEYS = {
    "seed": "runtime.seed",
    "threads": "runtime.threads",
    "num_lines": "textgen.num_lines",
    "style": "textgen.style",
    "vocab_size": "tokenizer.vocab_size",
    "preset": "model.preset",
    "epochs": "training.epochs",
    "max_steps": "training.max_steps",
    "batch_size": "training.batch_size",
    "lr": "training.lr",
    "beam": "search.beam",
    "max_len": "search.max_len",
    "length_penalty": "search.length_penalty",
}


def collect_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides = {
        key: getattr(args, name)
        for name, key in OVERRIDE_KEYS.items()
        if getattr(args, name, None) is not None
    }
    init = getattr(args, "init_checkpoint", None)
    if init is not None:
        overrides["training.init_checkpoint"] = str(init)
    if getattr(args, "no_augment", False):
        overrides["training.augment"] = False
    return overrides


def cmd_gen(args: argparse.Namespace, manager: ConfigManager) -> int:
    cfg = manager.config
    build_corpus(load_wordlist(args.wordlist), cfg.textgen, manager.seed, args.out, manager.threads)
    manager.write_resolved(args.out)
    return 0


def cmd_tokenizer_train(args: argparse.Namespace, manager: ConfigManager) -> int:
    texts = [entry.text for entry in read_manifest(args.manifest)]
    tokenizer = BpeTokenizer.train(texts, manager.config.tokenizer.vocab_size)
    tokenizer.save(args.out)
    manager.write_resolved(args.out.parent)
    return 0


def _pairs(manifest: Optional[Path]) -> List:
    if manifest is None:
        return []
    return [(image, text) for image, text, _ in load_samples(manifest)]


def cmd_train(args: argparse.Namespace, manager: ConfigManager) -> int:
    cfg = manager.config
    tokenizer = BpeTokenizer.load(args.tokenizer)
    init = load_checkpoint(cfg.training.init_checkpoint) if cfg.training.init_checkpoint else None
    result = run_training(
        cfg.training,
        manager.model_config(),
        tokenizer,
        _pairs(args.train_manifest),
        _pairs(args.val_manifest),
        seed=manager.seed,
        init_checkpoint=init,
        augment=cfg.augment,
    )
    save_checkpoint(result.checkpoint, args.out / CHECKPOINT_NAME)
    write_json(args.out / HISTORY_NAME, result.history())
    manager.write_resolved(args.out)
    return 0


def cmd_eval(args: argparse.Namespace, manager: ConfigManager) -> int:
    report = evaluate_corpus(read_manifest(args.manifest), read_predictions(args.predictions), scene=args.scene)
    write_json(args.out, report.to_dict())
    manager.write_resolved(args.out.parent)
    return 0


def _controller(args: argparse.Namespace, manager: ConfigManager) -> RecognitionController:
    return RecognitionController.from_checkpoint(load_checkpoint(args.checkpoint), manager.config.search,
                                                 manager.threads)


def cmd_recognize(args: argparse.Namespace, manager: ConfigManager) -> int:
    paths: List[Path] = list(args.images)
    ids: List[str] = [str(p) for p in paths]
    if args.manifest is not None:
        entries = read_manifest(args.manifest)
        paths += [resolve_image_path(args.manifest, e) for e in entries]
        ids += [e.path for e in entries]
    if not paths:
        raise UsageError("recognize needs --manifest or at least one image path")
    results = _controller(args, manager).recognize_paths(paths, ids)
    write_predictions(args.out, [(r.id, r.text) for r in results if r.ok])
    manager.write_resolved(args.out.parent)
    failed = [r.id for r in results if not r.ok]
    if failed:
        raise InputError(f"{len(failed)} of {len(results)} images failed: {', '.join(failed[:5])}", ids=failed)
    return 0


def cmd_bench(args: argparse.Namespace, manager: ConfigManager) -> int:
    monitor = PerformanceMonitor(_controller(args, manager))
    report = monitor.measure_manifest(args.manifest)
    monitor.export_report(report, args.out)
    manager.write_resolved(args.out.parent)
    return 0


def cmd_augment_preview(args: argparse.Namespace, manager: ConfigManager) -> int:
    policy = manager.config.augment
    entries = read_manifest(args.manifest)[:max(0, args.count)]
    stats = AugmentStats()
    records = []
    for index, entry in enumerate(entries):
        image = read_image(resolve_image_path(args.manifest, entry))
        augmented, name, params = policy.apply_with_record(image, derive_seed(manager.seed, 0, index))
        stats.record(name)
        write_image(args.out / f"{index:03d}_original.pgm", image)
        write_image(args.out / f"{index:03d}_{name}.pgm", augmented)
        records.append({"index": index, "source": entry.path, "transform": name, "params": params})
    write_json(args.out / "preview.json", {"samples": records, "counts": stats.counts})
    manager.write_resolved(args.out)
    logger.info(f"Wrote {len(records)} augmentation previews to {args.out}")
    return 0


def cmd_checkpoint_inspect(args: argparse.Namespace, manager: ConfigManager) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    header = checkpoint.header()
    header["tokenizer"] = {"sha256": checkpoint.tokenizer_sha256}
    header["dtype"] = checkpoint.config.dtype
    header["parameter_count"] = checkpoint.parameter_count()
    sys.stdout.write(dumps_json(header))
    return 0


def cmd_serve(args: argparse.Namespace, manager: ConfigManager) -> int:
    interface = create_gradio_interface(_controller(args, manager))
    logger.info(f"Serving recognition demo on {args.host}:{args.port}")
    interface.launch(server_name=args.host, server_port=args.port, share=False, show_error=True)
    return 0


COMMANDS: Dict[str, Callable[[argparse.Namespace, ConfigManager], int]] = {
    "gen": cmd_gen,
    "tokenizer-train": cmd_tokenizer_train,
    "train": cmd_train,
    "eval": cmd_eval,
    "recognize": cmd_recognize,
    "bench": cmd_bench,
    "augment-preview": cmd_augment_preview,
    "checkpoint-inspect": cmd_checkpoint_inspect,
    "serve": cmd_serve,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one CLI command.

    Returns:
        0 on success, 2 on usage errors, 1 on any other failure; failures
        print a single `error type=... message="..."` line to stderr
    """
    try:
        args = build_parser().parse_args(argv)
        manager = ConfigManager.load(args.config, collect_overrides(args))
        logger.debug(f"Running {args.command} with {json.dumps(manager.resolved(), sort_keys=True)}")
        return COMMANDS[args.command](args, manager)
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return error_handler.EXIT_FAILURE
    except Exception as e:
        error_handler.handle_error(e, context="cli")
        sys.stderr.write(error_handler.format_cli_error(e) + "\n")
        return error_handler.EXIT_USAGE if isinstance(e, UsageError) else error_handler.EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
