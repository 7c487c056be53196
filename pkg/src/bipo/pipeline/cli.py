"""``bipo`` command line interface.

Each subcommand prints a one-line JSON summary on success. Failures print a
one-line JSON error record on stderr and exit nonzero (2 for usage and
pipeline errors, 3 when an evaluation produces a non-finite metric).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from ..generation import EDIT_MODES
from ..evaluation import EVAL_MODES
from ..motion import describe_parts
from .config import PipelineConfig, PipelineError
from . import stages

EXIT_ERROR = 2
EXIT_NONFINITE = 3


class CliError(Exception):
    def __init__(self, kind: str, message: str, code: int = EXIT_ERROR):
        super().__init__(message)
        self.kind, self.code = kind, code


class JsonArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", f"{self.prog}: {message}")


def _global_options(parser: argparse.ArgumentParser, default) -> None:
    parser.add_argument("--config", default=default, help="pipeline config JSON (defaults reproduce the desk run)")
    parser.add_argument("--out", default=default, help="output directory (overrides the config)")
    parser.add_argument("--seed", type=int, default=default, help="global seed (overrides the config)")
    parser.add_argument("-v", "--verbose", action="store_true", default=default or False)


def build_parser() -> argparse.ArgumentParser:
    p = JsonArgumentParser(prog="bipo", description="Part-based text-to-motion pipeline at desk scale.")
    _global_options(p, None)
    common = argparse.ArgumentParser(add_help=False)
    _global_options(common, argparse.SUPPRESS)   # also accepted after the subcommand
    sub = p.add_subparsers(dest="command", required=True, parser_class=JsonArgumentParser)

    def cmd(name, **kw):
        return sub.add_parser(name, parents=[common], **kw)

    cmd("corpus", help="generate the synthetic corpus and its manifest")
    s = cmd("train-vq", help="train the six part tokenizers")
    s.add_argument("--steps", type=int)
    s = cmd("train-t2m", help="train the part transformers")
    s.add_argument("--steps", type=int)
    s.add_argument("--lam", type=float, help="weight of the causal term")
    s.add_argument("--po-prob", type=float, help="partial-occlusion probability")
    cmd("train-extractors", help="train the evaluation feature extractors")

    s = cmd("generate", help="generate motions from text")
    s.add_argument("--text", action="append", required=True, help="caption (repeatable)")
    s.add_argument("--sampler", choices=("greedy", "temperature"))
    s.add_argument("--temperature", type=float)
    s.add_argument("--sample-seed", type=int)
    s.add_argument("--no-refine", action="store_true", help="skip the even-position refinement pass")
    s.add_argument("--name", default="generated", help="output subdirectory")

    s = cmd("edit", help="edit a test motion",
                       description="Regions for L tokens use q = floor(L/4), h = floor(L/2): inpaint keeps "
                                   "1..q and L-q+1..L, outpaint keeps q+1..L-q, prefix keeps 1..h, "
                                   "suffix keeps h+1..L.")
    s.add_argument("--mode", choices=EDIT_MODES, required=True)
    s.add_argument("--source", type=int, default=0, help="index into the test split")
    s.add_argument("--text", help="caption (defaults to the source caption)")
    s.add_argument("--sample-seed", type=int)
    s.add_argument("--name", default="edited")

    s = cmd("eval", help="evaluate generation or reconstruction")
    s.add_argument("--mode", choices=EVAL_MODES, default="generation")
    s.add_argument("--repetitions", type=int)
    s.add_argument("--mm-repetitions", type=int)
    s.add_argument("--s-dis", type=int)
    s.add_argument("--no-refine", action="store_true")

    s = cmd("ablate", help="baseline / +BA / +PO / +BA+PO comparison table")
    s.add_argument("--po", type=float, action="append", help="occlusion probability (repeatable)")
    s.add_argument("--steps", type=int, help="transformer steps per variant")
    s.add_argument("--repetitions", type=int)

    s = cmd("vq", help="tokenize a motion file or decode a token file with the run's tokenizers")
    s.add_argument("action", choices=("encode", "decode"))
    s.add_argument("input", help="motion JSON (encode) or token JSON (decode)")
    s.add_argument("output")

    s = cmd("parts", help="part division tables")
    s.add_argument("action", choices=("describe",))

    s = cmd("config", help="print or write the effective config")
    s.add_argument("--write", help="write the config JSON to this path")
    return p


def load_config(args) -> PipelineConfig:
    """Explicit ``--config``, else the run directory's saved config, else the defaults; then flag overrides."""
    saved = Path(args.out or PipelineConfig().out_dir) / "config.json"
    if args.config:
        cfg = PipelineConfig.load(args.config)
    elif saved.exists():
        cfg = PipelineConfig.load(saved)
    else:
        cfg = PipelineConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out:
        cfg.out_dir = args.out
    if args.command == "train-t2m":
        over = {k: v for k, v in (("lam", args.lam), ("po_prob", args.po_prob)) if v is not None}
        if over:
            cfg.t2m = replace(cfg.t2m, **over)
        if args.steps is not None:
            cfg.t2m_train = replace(cfg.t2m_train, steps=args.steps)
    if args.command == "train-vq" and args.steps is not None:
        cfg.vq = replace(cfg.vq, steps=args.steps)
    if args.command == "ablate" and args.po:
        cfg.ablation = replace(cfg.ablation, po_values=tuple(args.po))
    return cfg


def dispatch(args) -> dict:
    if args.command == "parts":
        return describe_parts()
    cfg = load_config(args)
    if args.command == "config":
        if args.write:
            cfg.save(args.write)
        return {"config": cfg.to_dict(), "config_hash": cfg.config_hash()}
    ws = stages.Workspace(cfg)
    if args.command == "corpus":
        return stages.run_corpus(ws)
    if args.command == "train-vq":
        return stages.run_train_vq(ws)
    if args.command == "train-t2m":
        return stages.run_train_t2m(ws)
    if args.command == "train-extractors":
        return stages.run_train_extractors(ws)
    if args.command == "vq":
        run = stages.run_vq_encode if args.action == "encode" else stages.run_vq_decode
        return run(ws, args.input, args.output)
    if args.command == "generate":
        return stages.run_generate(ws, args.text, args.sample_seed, args.sampler, args.temperature,
                                   False if args.no_refine else None, args.name)
    if args.command == "edit":
        return stages.run_edit(ws, args.mode, args.source, args.text, args.sample_seed, args.name)
    if args.command == "eval":
        over = {k: v for k, v in (("repetitions", args.repetitions), ("mm_repetitions", args.mm_repetitions),
                                  ("s_dis", args.s_dis)) if v is not None}
        protocol = replace(cfg.eval, **over)
        report = stages.run_eval(ws, args.mode, protocol, refine=False if args.no_refine else None)
        bad = report.nonfinite()
        if bad:
            raise CliError("nonfinite_metric", f"non-finite metrics: {', '.join(bad)}", EXIT_NONFINITE)
        return {"mode": report.mode, "report": ws.manifest.reports[f"eval_{args.mode}"],
                "metrics": {k: v["mean"] for k, v in report.metrics.items()}}
    if args.command == "ablate":
        return stages.run_ablate(ws, args.steps, args.repetitions)
    raise CliError("usage", f"unknown command {args.command!r}")


def _error_record(command, kind, message) -> str:
    return json.dumps({"status": "error", "command": command, "error": kind, "message": message}, sort_keys=True)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    command = None
    try:
        args = build_parser().parse_args(argv)
        command = args.command
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        result = dispatch(args)
    except CliError as exc:
        print(_error_record(command, exc.kind, str(exc)), file=sys.stderr)
        return exc.code
    except PipelineError as exc:
        print(_error_record(command, exc.kind, str(exc)), file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, KeyError, OSError) as exc:
        print(_error_record(command, type(exc).__name__, str(exc)), file=sys.stderr)
        return EXIT_ERROR
    print(json.dumps({"status": "ok", "command": command, "result": result}, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
