"""Command-line front end.

Subcommands: ``run``, ``attack-sweep``, ``family-verify``, ``leakage-table``.
Options can also be supplied through ``--config FILE``, a flat JSON object
whose keys mirror the long option names (for example ``{"batch-size": 64}``);
explicit command-line flags override config values, and unknown config keys
are rejected. Exit status: 0 on completion (aborted sessions are a result,
not a failure), 1 on runtime failure, 2 on usage errors.
"""
from __future__ import annotations

import argparse
import json
import secrets
import sys

from .errors import QsdcError
from .experiments import (
    ATTACKS,
    ExperimentSpec,
    render_csv,
    render_json,
    run_experiment,
    write_atomic,
)

_SCHEMES = ("qubit3", "qubitp", "qutrit3")

# Option metadata: name -> (type, default, help). None defaults mean
# "generated or mode dependent". Used for both flag registration and config
# merging.
_OPTIONS: dict[str, tuple] = {
    "batch-size": (int, 256, "multiplets per batch"),
    "scheme": (str, "qubit3", "encoding scheme: qubit3, qubitp, qutrit3"),
    "particles": (int, 4, "particle count for the qubitp scheme"),
    "check-fraction": (float, 0.1, "fraction of positions consumed per security check"),
    "check-method": (int, 1, "first-check method, 1 or 2"),
    "abort-threshold": (float, 0.0, "maximum tolerated mismatch rate per check"),
    "num-messages": (int, 8, "payload length (messages drawn from the seed)"),
    "attack": (str, "none", f"channel model: {', '.join(ATTACKS)}"),
    "probe-beta": (float, 0.3, "flip amplitude of the probe attack"),
    "group": (str, "0,1", "intercepted particles for the grouped attack"),
    "betas": (str, "0,0.2,0.4,0.6,0.8,1.0", "probe sweep grid"),
    "trials": (int, 1000, "sessions (run) or checked positions (attack-sweep)"),
    "seed": (int, None, "64-bit master seed; generated and echoed when absent"),
    "output": (str, None, "report path; stdout when absent"),
    "format": (str, "json", "report format: json or csv"),
    "jobs": (int, 1, "concurrent trial workers; never changes results"),
}


class UsageError(Exception):
    pass


def _add_common_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file mirroring the flag names")
    for name, (typ, default, text) in _OPTIONS.items():
        if default is not None:
            text = f"{text} (default {default})"
        parser.add_argument(
            f"--{name}", type=typ, default=None, dest=name.replace("-", "_"), help=text
        )
    parser.add_argument(
        "--verbose-trials",
        action="store_true",
        default=None,
        help="include per-trial summaries in run reports",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qsdcsim",
        description="Monte Carlo harness for the multi-step GHZ dense-coding protocol",
    )
    sub = parser.add_subparsers(dest="mode", required=True)
    sub.add_parser("run", help="execute seeded protocol sessions").__dict__
    sub.add_parser("attack-sweep", help="sweep an attack parameter and tabulate detection rates")
    sub.add_parser("family-verify", help="verify an encoding family (orthonormality, bijection)")
    sub.add_parser("leakage-table", help="exact grouped-interception leakage for every subset")
    for name, p in sub.choices.items():
        _add_common_options(p)
    return parser


def _load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as handle:
            data = json.load(handle)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise UsageError(f"config file {path} must hold a flat JSON object")
    known = set(_OPTIONS) | {"verbose-trials"}
    for key in data:
        if key not in known:
            raise UsageError(f"unknown config key: {key}")
    return data


def _merge(args: argparse.Namespace) -> dict:
    config = _load_config(args.config) if args.config else {}
    merged: dict = {}
    for name, (typ, default, _text) in _OPTIONS.items():
        flag_value = getattr(args, name.replace("-", "_"))
        if flag_value is not None:
            merged[name] = flag_value
        elif name in config:
            try:
                merged[name] = typ(config[name])
            except (TypeError, ValueError):
                raise UsageError(f"invalid value for {name}: {config[name]!r}")
        else:
            merged[name] = default
    if args.verbose_trials is not None:
        merged["verbose-trials"] = bool(args.verbose_trials)
    else:
        merged["verbose-trials"] = bool(config.get("verbose-trials", False))
    return merged


def _parse_floats(text: str, key: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(",") if part.strip() != "")
    except ValueError:
        raise UsageError(f"invalid value for {key}: {text!r}")


def _parse_ints(text: str, key: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip() != "")
    except ValueError:
        raise UsageError(f"invalid value for {key}: {text!r}")


def parse_spec(argv: list[str]) -> ExperimentSpec:
    """Parse argv (and any config file) into a validated ExperimentSpec."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    merged = _merge(args)

    scheme = merged["scheme"]
    if scheme not in _SCHEMES:
        raise UsageError(f"invalid value for scheme: {scheme!r} (choose from {_SCHEMES})")
    if merged["attack"] not in ATTACKS:
        raise UsageError(f"invalid value for attack: {merged['attack']!r} (choose from {ATTACKS})")
    if merged["format"] not in ("json", "csv"):
        raise UsageError(f"invalid value for format: {merged['format']!r}")
    if not (0.0 < merged["check-fraction"] < 1.0):
        raise UsageError(f"invalid value for check-fraction: {merged['check-fraction']!r}")
    if merged["check-method"] not in (1, 2):
        raise UsageError(f"invalid value for check-method: {merged['check-method']!r}")
    if not (0.0 <= merged["abort-threshold"] <= 1.0):
        raise UsageError(f"invalid value for abort-threshold: {merged['abort-threshold']!r}")
    if merged["batch-size"] < 1:
        raise UsageError(f"invalid value for batch-size: {merged['batch-size']!r}")
    if merged["trials"] < 1:
        raise UsageError(f"invalid value for trials: {merged['trials']!r}")
    if merged["jobs"] < 1:
        raise UsageError(f"invalid value for jobs: {merged['jobs']!r}")
    if merged["num-messages"] < 0:
        raise UsageError(f"invalid value for num-messages: {merged['num-messages']!r}")
    if merged["particles"] < 2:
        raise UsageError(f"invalid value for particles: {merged['particles']!r}")
    if not (0.0 <= merged["probe-beta"] <= 1.0):
        raise UsageError(f"invalid value for probe-beta: {merged['probe-beta']!r}")

    betas = _parse_floats(merged["betas"], "betas")
    for beta in betas:
        if not (0.0 <= beta <= 1.0):
            raise UsageError(f"invalid value for betas: {beta!r} outside [0, 1]")
    group = _parse_ints(merged["group"], "group")

    if merged["attack"] == "probe" and scheme == "qutrit3":
        raise UsageError("attack probe is defined for qubit schemes, not qutrit3")
    if merged["attack"] == "grouped":
        particles = 3 if scheme in ("qubit3", "qutrit3") else merged["particles"]
        if not group:
            raise UsageError("invalid value for group: need at least one particle index")
        if any(not (0 <= j < particles - 1) for j in group):
            raise UsageError(
                f"invalid value for group: indices must be message particles "
                f"(0..{particles - 2})"
            )

    seed = merged["seed"]
    if seed is None:
        seed = secrets.randbits(64)
    if not (0 <= seed < 2**64):
        raise UsageError(f"invalid value for seed: {seed!r} (need a 64-bit non-negative integer)")

    return ExperimentSpec(
        mode=args.mode,
        scheme_name=scheme,
        particles=merged["particles"],
        batch_size=merged["batch-size"],
        check_fraction=merged["check-fraction"],
        check_method=merged["check-method"],
        abort_threshold=merged["abort-threshold"],
        num_messages=merged["num-messages"],
        attack=merged["attack"],
        probe_beta=merged["probe-beta"],
        group=group,
        betas=betas,
        trials=merged["trials"],
        seed=seed,
        output=merged["output"],
        fmt=merged["format"],
        jobs=merged["jobs"],
        verbose_trials=merged["verbose-trials"],
    )


def main(argv: list[str] | None = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    try:
        spec = parse_spec(argv)
    except UsageError as exc:
        print(f"qsdcsim: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse's own usage handling
        return int(exc.code or 0)
    try:
        report = run_experiment(spec)
        text = render_json(report) if spec.fmt == "json" else render_csv(report)
        if spec.output:
            write_atomic(spec.output, text)
        else:
            sys.stdout.write(text)
    except (QsdcError, ValueError, OSError) as exc:
        print(f"qsdcsim: failure: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
