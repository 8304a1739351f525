"""Command-line entry point: ``kfeed run``, ``kfeed synth-weights``, ``kfeed check``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields

import numpy as np

from .errors import ConfigurationError, GridParseError
from .harness import ExperimentConfig, desk_config, emit_results, run_batch

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    """Bad flags are configuration errors, so exit 1 rather than argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def read_config_file(path):
    """``key = value`` lines; ``#`` starts a comment; keys may use dashes."""
    values = {}
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.lstrip("-").replace("-", "_")
            if key not in types:
                raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _coerce(key, value, types[key], f"{path}:{lineno}")
    return values


def _coerce(key, value, type_name, where):
    type_name = str(type_name)
    if value.lower() in ("none", "") and "None" in type_name:
        return None
    try:
        if type_name.startswith("int"):
            return int(value)
        if type_name.startswith("float"):
            return float(value)
    except ValueError:
        raise ConfigurationError(f"{where}: bad value {value!r} for {key}") from None
    return value


def _add_run_flags(p):
    p.add_argument("--config", help="key = value file; flags override its values")
    p.add_argument("--preset", choices=["paper", "desk"], default="paper",
                   help="starting defaults (paper: 8x8 map, 6000 episodes; desk: 5x5, 1500)")
    p.add_argument("--grid", help="map file or shipped map name")
    p.add_argument("--k", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--episodes", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--bonus-mode", choices=["practical", "theoretical"])
    p.add_argument("--conf-c", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--b", type=float, help="weight-norm bound B")
    p.add_argument("--weights", help="w* JSON file (synthesized when omitted)")
    p.add_argument("--mle-step", type=float)
    p.add_argument("--mle-iters", type=int)
    p.add_argument("--mle-tol", type=float)
    p.add_argument("--refit-every", type=int)
    p.add_argument("--pg-step", type=float)
    p.add_argument("--pg-samples", type=int)
    p.add_argument("--pg-eps", type=float)
    p.add_argument("--pg-iters", type=int)
    p.add_argument("--opt-iters", type=int)
    p.add_argument("--eval-rollouts", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--out", help="output directory")


def build_parser():
    parser = _Parser(prog="kfeed", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a K-UCBVI batch and write results")
    _add_run_flags(run)

    synth = sub.add_parser("synth-weights", help="fit ground-truth weights to the rule labels")
    synth.add_argument("--grid", default="paper_8x8")
    synth.add_argument("--k", type=int, default=4)
    synth.add_argument("--b", type=float, default=20.0)
    synth.add_argument("--horizon", type=int, default=50)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--trajectories", type=int, default=20000)
    synth.add_argument("--out", required=True)

    check = sub.add_parser("check", help="run the oracle and invariant self-checks")
    check.add_argument("--seed", type=int, default=0)
    return parser


def config_from_args(args) -> ExperimentConfig:
    values = {}
    if args.config:
        values.update(read_config_file(args.config))
    names = {f.name for f in fields(ExperimentConfig)}
    for name in names:
        flag_value = getattr(args, name, None)
        if flag_value is not None:
            values[name] = flag_value
    if args.preset == "desk":
        return desk_config(**values)
    return ExperimentConfig(**values)


def _cmd_run(args):
    config = config_from_args(args)
    if not config.out:
        raise ConfigurationError("--out is required")
    batch = run_batch(config)
    paths = emit_results(batch, config.out)
    first, last = batch.decile_means()
    print(f"V*~{batch.v_star:.4f}  first-decile value {first:.4f}  last-decile value {last:.4f}")
    for path in paths.values():
        print(f"wrote {path}")


def _cmd_synth(args):
    from .gridworld import load_grid, synthesize_true_weights

    spec = load_grid(args.grid, horizon=args.horizon)
    weights = synthesize_true_weights(spec, args.k, args.b, np.random.default_rng(args.seed),
                                      num_trajectories=args.trajectories)
    weights.save(args.out)
    print(f"wrote {args.out} (k={weights.k}, d={weights.d}, B={weights.bound:g})")


def _cmd_check(args):
    from .checks import run_checks

    return EXIT_OK if run_checks(args.seed) else EXIT_RUNTIME


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"run": _cmd_run, "synth-weights": _cmd_synth, "check": _cmd_check}
    try:
        code = handlers[args.command](args)
    except (ConfigurationError, GridParseError, FileNotFoundError) as exc:
        print(f"kfeed: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime failure
        print(f"kfeed: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
