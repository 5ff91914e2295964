"""Command line entry point: ``decompair <subcommand> [options]``.

Output is line-oriented ``key=value`` text.  Failures print a single
``error=<kind> detail=<message>`` line to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import sys

from . import pipeline
from .asm import ExtractionError
from .config import ConfigError, resolve_config
from .dataset import DegenerateSplit
from .metrics import format_table
from .tokenizer import EmptyCorpus, ModelFormatError

_EXPECTED_ERRORS = (
    pipeline.PipelineError,
    ConfigError,
    DegenerateSplit,
    EmptyCorpus,
    ModelFormatError,
    ExtractionError,
    OSError,
)


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML/JSON config file (flags override it)")
    parser.add_argument("--out", dest="out_dir", help="working/output directory (default: out)")
    parser.add_argument("--language", help="c, go, fortran, ocaml, a custom profile name, or auto")
    parser.add_argument("--preset", help="dataset preset supplying vocab sizes and length caps, e.g. C-S")
    parser.add_argument("--name", help="dataset name recorded in the manifest")
    parser.add_argument("--profiles-file", help="YAML file with extra language profiles")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="decompair", description="Function-pair corpus construction and evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="cut functions out of .s files and pair them with source")
    _common(p)
    p.add_argument("--asm-root", required=False, help="directory searched recursively for .s files")
    p.add_argument("--source-root", help="directory the .file paths are relative to (default: asm root)")
    p.add_argument("--workers", type=int, help="parallel extraction processes")
    p.add_argument("--keep-directives", action="store_true", default=None, help="keep directive lines in asm text")

    p = sub.add_parser("train-tokenizers", help="train the source and asm tokenizers")
    _common(p)
    p.add_argument("--source-vocab", type=int)
    p.add_argument("--asm-vocab", type=int)
    p.add_argument("--tokenizer-mode", choices=("bpe", "char"))
    p.add_argument("--flag-policy", help="comma-separated flags whose pairs are excluded")

    p = sub.add_parser("build", help="filter, split and write the dataset directory")
    _common(p)
    p.add_argument("--max-source-len", type=int)
    p.add_argument("--max-asm-len", type=int)
    p.add_argument("--test-fraction", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--flag-policy", help="comma-separated flags whose pairs are excluded")

    p = sub.add_parser("stats", help="dataset table, contraction histogram, batch counts")
    _common(p)
    p.add_argument("--max-tokens", type=int, help="token budget per batch")
    p.add_argument("--eta-bins", type=int)

    p = sub.add_parser("eval", help="score a backend on the test split")
    _common(p)
    p.add_argument("--backend", default="knn", help="knn | random[:SEED] | echo | empty | cmd:COMMAND")
    p.add_argument("--seed", type=int)

    p = sub.add_parser("serve", help="serve the retrieval baseline over stdin/stdout")
    _common(p)

    p = sub.add_parser("run", help="extract, train-tokenizers, build and stats in one go")
    _common(p)
    p.add_argument("--asm-root")
    p.add_argument("--source-root")
    p.add_argument("--workers", type=int)
    p.add_argument("--source-vocab", type=int)
    p.add_argument("--asm-vocab", type=int)
    p.add_argument("--tokenizer-mode", choices=("bpe", "char"))
    p.add_argument("--max-source-len", type=int)
    p.add_argument("--max-asm-len", type=int)
    p.add_argument("--test-fraction", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-tokens", type=int)
    p.add_argument("--flag-policy")
    return parser


def _config_from_args(args: argparse.Namespace):
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "backend")}
    if flags.get("flag_policy") is not None:
        flags["flag_policy"] = [f for f in flags["flag_policy"].split(",") if f]
    return resolve_config(flags, args.config)


def _emit(prefix: str, items: dict) -> None:
    for key, value in items.items():
        print(f"{prefix}.{key}={value}")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _config_from_args(args)
        if args.command == "extract":
            pairs, diagnostics = pipeline.cmd_extract(config)
            _emit("extract", dict(sorted(diagnostics.items())))
        elif args.command == "train-tokenizers":
            src, asm_model = pipeline.cmd_train_tokenizers(config)
            print(f"tokenizer.source.vocab={src.vocab_size}")
            print(f"tokenizer.asm.vocab={asm_model.vocab_size}")
        elif args.command == "build":
            train, test, manifest = pipeline.cmd_build(config)
            _emit("build", {"train": len(train), "test": len(test), "functions": manifest.function_count})
            _emit("build.dropped", manifest.dropped)
        elif args.command == "stats":
            result = pipeline.cmd_stats(config)
            sys.stdout.write(result["table"])
            _emit("stats", result["summary"])
        elif args.command == "eval":
            report = pipeline.cmd_eval(config, args.backend)
            sys.stdout.write(format_table([report]))
            _emit("eval", {"aed": report.aed, "samples": report.sample_count, "skipped": report.skipped})
        elif args.command == "serve":
            pipeline.cmd_baseline_serve(config, sys.stdin, sys.stdout)
        elif args.command == "run":
            result = pipeline.run_all(config)
            _emit("extract", dict(sorted(result["diagnostics"].items())))
            sys.stdout.write(result["table"])
            _emit("stats", result["summary"])
    except _EXPECTED_ERRORS as exc:
        detail = str(exc).replace("\n", " ")
        print(f"error={type(exc).__name__} detail={detail}", file=sys.stderr)
        return 2 if isinstance(exc, ConfigError) else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
