"""Experiment runner: seeded Monte Carlo campaigns and report writing.

Reports are reproducible: given the same spec (including the seed) the
serialized report is byte identical except for the wall-clock duration
field. Trial seeds derive from the master seed with splitmix64, documented
below, so independent trials can run concurrently in any order.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np

from . import __version__, backend
from .adversary import (
    ChannelModel,
    GroupedInterception,
    Ideal,
    InterceptResend,
    Probe,
    ProbeParams,
    detection_probability,
    eve_information,
    grouped_leakage,
)
from .codec import Scheme, build_family, capacity_bits, scheme_by_name
from .protocol import ProtocolConfig, SessionReport, run_session
from .states import family_probabilities

SCHEMA_VERSION = 1

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One splitmix64 step; a 64-bit bijective mixer."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_trial_seed(master_seed: int, trial_index: int) -> int:
    """Per-trial seed: splitmix64((master + index) mod 2**64).

    splitmix64 is a bijection of the 64-bit integers and the addition is
    injective in the index, so trial seeds never collide for
    trial_index < 2**32 (in fact for any index below 2**64).
    """
    return splitmix64((master_seed + trial_index) & _MASK64)


MODES = ("run", "attack-sweep", "family-verify", "leakage-table")
ATTACKS = ("none", "intercept-z", "intercept-x", "intercept-zx", "probe", "grouped")


@dataclass(frozen=True)
class ExperimentSpec:
    """Fully resolved parameters of one experiment invocation."""

    mode: str
    scheme_name: str = "qubit3"
    particles: int = 4
    batch_size: int = 256
    check_fraction: float = 0.1
    check_method: int = 1
    abort_threshold: float = 0.0
    num_messages: int = 8
    attack: str = "none"
    probe_beta: float = 0.3
    group: tuple[int, ...] = (0, 1)
    betas: tuple[float, ...] = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
    trials: int = 1000
    seed: int = 0
    output: str | None = None
    fmt: str = "json"
    jobs: int = 1
    verbose_trials: bool = False

    def scheme(self) -> Scheme:
        return scheme_by_name(self.scheme_name, self.particles)

    def channel(self) -> ChannelModel:
        if self.attack == "none":
            return Ideal()
        if self.attack == "intercept-z":
            return InterceptResend("z")
        if self.attack == "intercept-x":
            return InterceptResend("x")
        if self.attack == "intercept-zx":
            return InterceptResend("zx")
        if self.attack == "probe":
            return Probe(ProbeParams.symmetric(self.probe_beta))
        if self.attack == "grouped":
            return GroupedInterception(frozenset(self.group))
        raise ValueError(f"unknown attack: {self.attack!r}")

    def payload(self) -> tuple[tuple[int, ...], ...]:
        """Deterministic random payload drawn from a stream separate from trials."""
        scheme = self.scheme()
        rng = np.random.default_rng(splitmix64(self.seed ^ 0xA11CE0B0B5))
        return tuple(
            scheme.message_of_index(int(rng.integers(scheme.family_size)))
            for _ in range(self.num_messages)
        )


def _trial_summary(report: SessionReport) -> dict[str, Any]:
    return {
        "aborted": report.aborted,
        "abort_stage": report.abort_stage,
        "delivered_bits": report.throughput_bits,
        "delivered_count": len(report.delivered),
        "padded": report.padded,
        "batches": report.batches,
        "checks": [
            {
                "stage": c.stage,
                "samples": c.samples,
                "mismatches": c.mismatches,
                "rate": c.rate,
                "skipped": c.skipped,
            }
            for c in report.checks
        ],
    }


def _run_one_trial(args: tuple[ProtocolConfig, ChannelModel, int, int]) -> tuple[int, dict]:
    config, channel, trial_index, trial_seed = args
    trial_config = ProtocolConfig(
        batch_size=config.batch_size,
        scheme=config.scheme,
        check_fraction=config.check_fraction,
        check_method=config.check_method,
        abort_threshold=config.abort_threshold,
        payload=config.payload,
        seed=trial_seed,
    )
    report = run_session(trial_config, channel)
    summary = _trial_summary(report)
    summary["seed"] = trial_seed
    return trial_index, summary


def _mean_stderr(values: list[float]) -> tuple[float, float]:
    if not values:
        return 0.0, 0.0
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    stderr = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return mean, stderr


def _run_mode(spec: ExperimentSpec) -> dict[str, Any]:
    scheme = spec.scheme()
    channel = spec.channel()
    config = ProtocolConfig(
        batch_size=spec.batch_size,
        scheme=scheme,
        check_fraction=spec.check_fraction,
        check_method=spec.check_method,
        abort_threshold=spec.abort_threshold,
        payload=spec.payload(),
        seed=spec.seed,
    )
    config.validate()
    jobs = [
        (config, channel, k, derive_trial_seed(spec.seed, k)) for k in range(spec.trials)
    ]
    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            results = list(pool.map(_run_one_trial, jobs, chunksize=max(1, spec.trials // (4 * spec.jobs))))
    else:
        results = [_run_one_trial(j) for j in jobs]
    results.sort(key=lambda item: item[0])
    summaries = [s for _, s in results]

    aborts = sum(1 for s in summaries if s["aborted"])
    abort_stages: dict[str, int] = {}
    for s in summaries:
        if s["aborted"]:
            abort_stages[s["abort_stage"]] = abort_stages.get(s["abort_stage"], 0) + 1
    check_rates = [c["rate"] for s in summaries for c in s["checks"] if not c["skipped"]]
    check_samples = sum(c["samples"] for s in summaries for c in s["checks"])
    mean_rate, rate_stderr = _mean_stderr(check_rates)
    delivered_bits = [s["delivered_bits"] for s in summaries]
    mean_bits, bits_stderr = _mean_stderr(delivered_bits)

    if isinstance(channel, Ideal):
        eve_bits = {"bits": 0.0, "stderr": 0.0, "trials": 0}
    else:
        eve_rng = np.random.default_rng(splitmix64(spec.seed ^ 0xE5E5E5E5))
        est = eve_information(channel, scheme, max(spec.trials, 1000), eve_rng)
        eve_bits = {"bits": est.bits, "stderr": est.stderr, "trials": est.trials}

    abort_rate = aborts / spec.trials
    results_block: dict[str, Any] = {
        "trials": spec.trials,
        "abort_rate": abort_rate,
        "abort_rate_stderr": math.sqrt(abort_rate * (1.0 - abort_rate) / spec.trials),
        "aborts": aborts,
        "aborts_by_stage": dict(sorted(abort_stages.items())),
        "mean_check_mismatch_rate": mean_rate,
        "mean_check_mismatch_stderr": rate_stderr,
        "checked_positions_total": check_samples,
        "mean_delivered_bits": mean_bits,
        "mean_delivered_bits_stderr": bits_stderr,
        "total_delivered_bits": float(np.sum(delivered_bits)),
        "capacity_bits_per_multiplet": capacity_bits(scheme),
        "payload_messages": spec.num_messages,
        "eve_information": eve_bits,
    }
    if spec.verbose_trials:
        results_block["per_trial"] = summaries
    return results_block


def _attack_sweep_mode(spec: ExperimentSpec) -> dict[str, Any]:
    rows = []
    if spec.attack.startswith("intercept"):
        policies = ("z", "x", "zx")
        for k, policy in enumerate(policies):
            rng = np.random.default_rng(derive_trial_seed(spec.seed, k))
            est = detection_probability(
                InterceptResend(policy), spec.check_method, spec.trials, rng
            )
            rows.append(
                {
                    "attack": f"intercept-{policy}",
                    "parameter": policy,
                    "detection_rate": est.rate,
                    "stderr": est.stderr,
                    "trials": est.trials,
                    "seed": spec.seed,
                }
            )
    else:
        # The probe sweep measures the z-branch mismatch rate, which is the
        # induced error rate and follows eps = beta^2.
        for k, beta in enumerate(spec.betas):
            rng = np.random.default_rng(derive_trial_seed(spec.seed, k))
            est = detection_probability(
                Probe(ProbeParams.symmetric(beta)),
                spec.check_method,
                spec.trials,
                rng,
                bases=("z",),
            )
            rows.append(
                {
                    "attack": "probe",
                    "parameter": beta,
                    "detection_rate": est.rate,
                    "stderr": est.stderr,
                    "trials": est.trials,
                    "seed": spec.seed,
                }
            )
    return {"rows": rows}


def _family_verify_mode(spec: ExperimentSpec) -> dict[str, Any]:
    scheme = spec.scheme()
    family = build_family(scheme)
    matrix = np.vstack([m.amps for m in family.members])
    gram = matrix.conj() @ matrix.T
    off = gram - np.diag(np.diag(gram))
    max_offdiag = float(np.abs(off).max())
    max_diag_dev = float(np.abs(np.diag(gram) - 1.0).max())
    bijection_ok = all(
        family.index_of_message(family.message_of_index(k)) == k for k in range(family.size)
    )
    # Noiseless decode: the encoded member must project onto its own index
    # with probability 1.
    roundtrip_ok = True
    for k, member in enumerate(family.members):
        probs = family_probabilities(member, family)
        if int(np.argmax(probs)) != k or abs(float(probs[k]) - 1.0) > 1e-10:
            roundtrip_ok = False
            break
    return {
        "scheme": scheme.name,
        "members": family.size,
        "max_offdiag": max_offdiag,
        "max_diag_deviation": max_diag_dev,
        "bijection_ok": bijection_ok,
        "roundtrip_ok": roundtrip_ok,
        "capacity_bits": capacity_bits(scheme),
    }


def _leakage_table_mode(spec: ExperimentSpec) -> dict[str, Any]:
    scheme = spec.scheme()
    message_particles = list(range(scheme.particles - 1))
    rows = []
    for mask in range(1 << len(message_particles)):
        subset = tuple(j for j in message_particles if mask & (1 << j))
        rows.append(
            {
                "scheme": scheme.name,
                "subset": ",".join(str(j) for j in subset) if subset else "",
                "particles": len(subset),
                "leakage_bits": grouped_leakage(scheme, subset),
            }
        )
    rows.sort(key=lambda r: (r["particles"], r["subset"]))
    return {"rows": rows}


def run_experiment(spec: ExperimentSpec) -> dict[str, Any]:
    """Execute a spec and return the report document (a JSON-ready dict)."""
    if spec.mode not in MODES:
        raise ValueError(f"unknown mode: {spec.mode!r}")
    if spec.trials < 1:
        raise ValueError(f"trials must be >= 1, got {spec.trials}")
    start = time.perf_counter()
    if spec.mode == "run":
        results = _run_mode(spec)
    elif spec.mode == "attack-sweep":
        results = _attack_sweep_mode(spec)
    elif spec.mode == "family-verify":
        results = _family_verify_mode(spec)
    else:
        results = _leakage_table_mode(spec)
    duration = time.perf_counter() - start
    spec_dict = asdict(spec)
    # Execution-only knobs are not part of the experiment definition:
    # scheduling never affects results, so reports stay byte-comparable.
    spec_dict.pop("output", None)
    spec_dict.pop("jobs", None)
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": "qsdcsim",
        "version": __version__,
        "backend": backend.name(),
        "mode": spec.mode,
        "seed": spec.seed,
        "spec": spec_dict,
        "results": results,
        "duration_seconds": duration,
    }


def render_json(report: dict[str, Any]) -> str:
    return json.dumps(report, sort_keys=True, indent=2, separators=(",", ": ")) + "\n"


_CSV_COLUMNS = {
    "attack-sweep": ("attack", "parameter", "detection_rate", "stderr", "trials", "seed"),
    "leakage-table": ("scheme", "subset", "particles", "leakage_bits"),
    "family-verify": (
        "scheme",
        "members",
        "max_offdiag",
        "max_diag_deviation",
        "bijection_ok",
        "roundtrip_ok",
        "capacity_bits",
    ),
    "run": (
        "trials",
        "abort_rate",
        "mean_check_mismatch_rate",
        "mean_check_mismatch_stderr",
        "mean_delivered_bits",
        "total_delivered_bits",
        "seed",
    ),
}


def _csv_value(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(report: dict[str, Any]) -> str:
    mode = report["mode"]
    columns = _CSV_COLUMNS[mode]
    results = report["results"]
    if mode in ("attack-sweep", "leakage-table"):
        rows = results["rows"]
    else:
        rows = [dict(results, seed=report["seed"])]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_value(row.get(col, "")) for col in columns])
    return buf.getvalue()


def write_atomic(path: str, text: str) -> None:
    """Write via a temp file plus rename so no partial output survives a crash."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp_path = tempfile.mkstemp(prefix=".qsdcsim-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        try:
            os.unlink(tmp_path)
        except OSError:
            pass
        raise
