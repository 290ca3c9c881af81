"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 validation or threshold failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from ..data.netpbm import NetpbmError
from ..data.synthetic import DatasetSpec, GenerationError, generate_synthetic, load_dataset, save_dataset
from ..dpconv import DPConvSpec
from ..tensor import ConfigError, ShapeError
from . import gradcheck_suite, paramcount, routing
from .checkpoint import CheckpointError, load_checkpoint
from .config import FIELD_TYPES, PRESETS, load_config
from .evaluate import evaluate, infer
from .train import DatasetError, TrainingDiverged, train

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class ValidationFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def split_overrides(extra: list[str]) -> dict:
    """Turn ``--key value`` / ``--key=value`` pairs into a dict of raw strings."""
    out = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--"):
            raise UsageError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise UsageError(f"missing value for {tok}")
            value = extra[i + 1]
            i += 2
        key = key.replace("-", "_")
        if key not in FIELD_TYPES:
            raise UsageError(f"unknown option --{key}")
        out[key] = value
    return out


def _emit(text: str, out) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _config(args, extra):
    return load_config(args.config, split_overrides(extra), args.preset)


def cmd_train(args, extra):
    config = _config(args, extra)
    result = train(config)
    text = (Path(result.out_dir) / "log.csv").read_text()
    _emit(text, args.out)


def cmd_infer(args, extra):
    if extra:
        raise UsageError(f"unexpected arguments {extra}")
    ckpt = load_checkpoint(args.checkpoint)
    infer(ckpt.model, ckpt.config.image_size, args.input, args.output)


def cmd_eval(args, extra):
    if extra:
        raise UsageError(f"unexpected arguments {extra}")
    if not (Path(args.data) / "manifest.csv").is_file():
        raise DatasetError(f"no manifest.csv under {args.data}")
    ckpt = load_checkpoint(args.checkpoint)
    result = evaluate(ckpt.model, ckpt.config.image_size, args.data)
    for line in result.missing:
        print(f"missing: {line}", file=sys.stderr)
    _emit(result.summary_csv(), args.out)
    if args.curves:
        _emit(result.curves_csv(), args.curves)
    failures = []
    if args.max_mae is not None and not result.overall.mae < args.max_mae:
        failures.append(f"mae {result.overall.mae:.4f} >= {args.max_mae}")
    if args.min_max_f is not None and not result.overall.max_f > args.min_max_f:
        failures.append(f"max_f {result.overall.max_f:.4f} <= {args.min_max_f}")
    if failures:
        raise ValidationFailure("; ".join(failures))


def cmd_paramcount(args, extra):
    config = _config(args, extra)
    if args.block:
        try:
            c_in, c_out = (int(v) for v in args.block.split(","))
        except ValueError:
            raise UsageError(f"--block expects C_IN,C_OUT, got {args.block!r}") from None
        spec = DPConvSpec(c_in, c_out, config.kernel_sizes, config.groups or None, config.reference_k,
                          config.mlp_hidden or None)
        rows = paramcount.block_report(spec)
    else:
        rows = paramcount.count_report(config.model_config())
    _emit(paramcount.rows_to_csv(rows), args.out)
    bad = [r.layer for r in rows if r.analytic != r.enumerated]
    if bad:
        raise ValidationFailure(f"analytic and enumerated counts differ for {bad}")


def cmd_gradcheck(args, extra):
    if extra:
        raise UsageError(f"unexpected arguments {extra}")
    scopes = gradcheck_suite.SCOPES if args.scope == "all" else (args.scope,)
    rows = [r for s in scopes for r in gradcheck_suite.run_scope(s, seed=args.seed)]
    _emit(gradcheck_suite.rows_to_csv(rows), args.out)
    failed = [f"{r.scope}/{r.name} ({r.max_rel_error:.3e} >= {r.threshold:g})" for r in rows if not r.passed]
    if failed:
        raise ValidationFailure("gradient check failed: " + ", ".join(failed))


def cmd_routing(args, extra):
    if extra:
        raise UsageError(f"unexpected arguments {extra}")
    try:
        scales = tuple(float(s) for s in args.scales.split(","))
    except ValueError:
        raise UsageError(f"--scales expects comma-separated numbers, got {args.scales!r}") from None
    ckpt = load_checkpoint(args.checkpoint)
    samples = load_dataset(args.data)
    if args.limit:
        samples = samples[:args.limit]
    images = np.concatenate([s.image for s in samples])
    rows = routing.routing_report(ckpt.model, images, scales)
    _emit(routing.rows_to_csv(rows), args.out)
    if args.warn_file and 1.0 in scales and 2.0 in scales:
        check = routing.direction_check(rows)
        path = Path(args.warn_file)
        if check.holds:
            path.unlink(missing_ok=True)
        else:
            path.write_text(
                "WARNING: scale-routing direction not observed\n"
                f"stages where the largest kernel gained weight from 1.0x to 2.0x: "
                f"{check.large_up_stages}/{check.stages}\n"
                f"stages where the smallest kernel did not gain weight: {check.small_down_stages}/{check.stages}\n")
            print(f"warning written to {path}", file=sys.stderr)


def cmd_gen_data(args, extra):
    if extra:
        raise UsageError(f"unexpected arguments {extra}")
    try:
        mix = tuple(float(v) for v in args.mix.split(","))
    except ValueError:
        raise UsageError(f"--mix expects three comma-separated fractions, got {args.mix!r}") from None
    spec = DatasetSpec(args.count, args.size, mix, args.seed)
    save_dataset(generate_synthetic(spec), args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dpnet", description="Dynamic pyramid convolution saliency network.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def with_config(p):
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--preset", default="desk", choices=sorted(PRESETS))
        p.add_argument("--out", help="write the CSV report here instead of stdout")
        p.epilog = "Any config key may be overridden with --key value."

    p = sub.add_parser("train", help="train a model and write checkpoints and logs")
    with_config(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="predict a saliency map for one PGM/PPM image")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset directory")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    p.add_argument("--curves", help="also write per-threshold precision/recall/F CSV here")
    p.add_argument("--max-mae", type=float, help="fail (exit 2) unless MAE is below this")
    p.add_argument("--min-max-f", type=float, help="fail (exit 2) unless max F is above this")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("paramcount", help="analytic vs enumerated parameter counts")
    with_config(p)
    p.add_argument("--block", help="report a single DPConv block C_IN,C_OUT instead of the model")
    p.set_defaults(func=cmd_paramcount)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--scope", default="ops", choices=gradcheck_suite.SCOPES + ("all",))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("routing-report", help="mean routing weight per kernel and stage across input scales")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--scales", default=",".join(str(s) for s in routing.DEFAULT_SCALES))
    p.add_argument("--limit", type=int, default=0, help="use only the first N images")
    p.add_argument("--warn-file", help="write a warning here if the scale direction is not observed")
    p.add_argument("--out")
    p.set_defaults(func=cmd_routing)

    p = sub.add_parser("gen-data", help="write a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=512)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mix", default="0.34,0.43,0.23", help="small,middle,large fractions")
    p.set_defaults(func=cmd_gen_data)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
        if not getattr(args, "func", None):
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        args.func(args, extra)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, ShapeError, ValidationFailure, TrainingDiverged, GenerationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, NetpbmError, CheckpointError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
