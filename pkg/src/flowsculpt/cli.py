"""Command line entry points.

Subcommands cover library export, sequence simulation, training (single run
and staged curriculum), checkpoint evaluation, sequence suggestion, the HTTP
service, and report rendering.  Everything that writes a document writes the
same canonical JSON the service emits.  Exit status 1 means the invocation
was wrong (flags, parameter values), 2 means an input file was missing or
malformed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .artifacts import RunArtifacts
from .checkpoint import params_from_doc
from .core import make_inlet, surrogate_library
from .env import default_env
from .errors import (CheckpointError, DocumentError, EmptyTargetError, GridMismatchError,
                     ParameterError, UsageError)
from .formats import (canonical_json, library_to_doc, load_library, load_shape, parse_grid,
                      parse_sequence, read_json, simulate_doc)
from .plots import render_run_plots
from .suggest import suggest, suggestion_to_doc
from .trainer import evaluate, train, train_config_from_doc, transfer_spec_from_doc, transfer_train

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit(doc, out: str | None):
    text = canonical_json(doc)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _cmd_gen_library(args) -> int:
    library = surrogate_library(parse_grid(args.grid), args.actions)
    _emit(library_to_doc(library), args.out)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    if args.shape:
        shape = load_shape(args.shape)
        grid = shape.grid
    else:
        grid = parse_grid(args.grid)
        shape = make_inlet(grid)
    library = load_library(args.library) if args.library else surrogate_library(grid)
    sequence = parse_sequence(args.sequence, library.actions)
    target = load_shape(args.target) if args.target else None
    _emit(simulate_doc(shape, sequence, library, target=target), args.out)
    return EXIT_OK


def _cmd_train(args) -> int:
    config_path = Path(args.config)
    cfg, target, extra = train_config_from_doc(read_json(config_path), config_path.parent)
    if target is None:
        raise UsageError("training config must include a 'target' entry")
    artifacts = train(cfg, target, out_dir=args.out_dir, config_extra=extra)
    if args.report:
        render_run_plots(artifacts, args.out_dir)
    _emit(artifacts.summary_doc(), None)
    return EXIT_OK


def _cmd_transfer(args) -> int:
    config_path = Path(args.config)
    cfg, curriculum, options = transfer_spec_from_doc(read_json(config_path),
                                                      config_path.parent)
    results = transfer_train(curriculum, cfg, out_dir=args.out_dir, **options)
    if args.report:
        for i in range(len(results)):
            render_run_plots(results[i], Path(args.out_dir) / f"stage_{i:02d}")
    _emit({"stages": [r.summary_doc() for r in results]}, None)
    return EXIT_OK


def _cmd_eval(args) -> int:
    checkpoint = read_json(args.checkpoint)
    target = load_shape(args.target)
    env = default_env(surrogate_library(target.grid), pmr_threshold=args.threshold,
                      max_steps=args.max_steps)
    _emit(evaluate(checkpoint, env, target, args.episodes), args.out)
    return EXIT_OK


def _cmd_solve(args) -> int:
    params, _, meta = params_from_doc(read_json(args.checkpoint))
    target = load_shape(args.target)
    grid_doc = meta.get("grid")
    if grid_doc and (grid_doc.get("h"), grid_doc.get("w")) != (target.grid.h, target.grid.w):
        raise GridMismatchError(
            f"checkpoint grid {grid_doc.get('h')}x{grid_doc.get('w')} does not match "
            f"target grid {target.grid.h}x{target.grid.w}")
    env = default_env(surrogate_library(target.grid), pmr_threshold=args.threshold,
                      max_steps=args.max_steps)
    results = suggest(params, env, target, k=args.k, seed=args.seed)
    _emit({"suggestions": [suggestion_to_doc(s) for s in results]}, args.out)
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(args.checkpoint_dir), host=args.host, port=args.port,
                log_level="warning")
    return EXIT_OK


def _cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    artifacts = RunArtifacts.read(run_dir)
    for path in render_run_plots(artifacts, args.out_dir or run_dir):
        print(path)
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="flowsculpt",
                     description="Inverse design of flow shapes with pillar sequences.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-library", help="write the pillar deformation library")
    p.add_argument("--grid", default="12x32", help="grid as HxW (default 12x32)")
    p.add_argument("--actions", type=int, default=32)
    p.add_argument("--out", help="output path (stdout when omitted)")
    p.set_defaults(func=_cmd_gen_library)

    p = sub.add_parser("simulate", help="apply a pillar sequence to a shape")
    p.add_argument("--sequence", required=True, help="action ids, e.g. '4 9' or '4,9'")
    p.add_argument("--shape", help="input shape document (default: inlet stripe)")
    p.add_argument("--grid", default="12x32", help="grid for the default inlet")
    p.add_argument("--library", help="library document (default: built-in model)")
    p.add_argument("--target", help="score every step against this shape document")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("train", help="train a policy against a target shape")
    p.add_argument("--config", required=True, help="run configuration JSON")
    p.add_argument("--out-dir", required=True, help="directory for run artifacts")
    p.add_argument("--report", action="store_true", help="also render figures")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("transfer", help="train through a staged curriculum")
    p.add_argument("--config", required=True, help="curriculum configuration JSON")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--report", action="store_true")
    p.set_defaults(func=_cmd_transfer)

    p = sub.add_parser("eval", help="greedy evaluation of a checkpoint on a target")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--target", required=True, help="target shape document")
    p.add_argument("--episodes", type=int, default=1)
    p.add_argument("--threshold", type=float, default=0.90)
    p.add_argument("--max-steps", type=int, default=7)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("solve", help="suggest pillar sequences for a target")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--k", type=int, default=1, help="number of suggestions")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=float, default=0.90)
    p.add_argument("--max-steps", type=int, default=7)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--checkpoint-dir", help="directory served by /api/checkpoints")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("report", help="render figures for a finished run directory")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--out-dir", help="figure directory (default: the run directory)")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except (UsageError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DocumentError, CheckpointError, GridMismatchError, EmptyTargetError,
            FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
