"""Multi-step QSDC session engine.

A session runs batches of GHZ multiplets through the staged protocol:
prepare a batch, send the check-particle sequence, run the first security
check, encode payload plus random sampling decoys, then send each remaining
particle sequence followed by a sampling-position check, and finally decode
with a family measurement. Batches repeat until the payload is exhausted or
a check aborts.

Particle p-1 is the check particle (the C particle for triplets) and is
always transmitted first; the remaining sequences go out one at a time in
order p-2 down to 0, so an eavesdropper never holds two particles of the
same multiplet at once.

Checks:

* First check, method 1: Bob measures his particle in a random basis
  (z or x for qubits, z otherwise) and announces position, basis and
  outcome; Alice measures her particles in the same basis. In the z basis
  all digits must agree; in the x basis the product of Alice's signs must
  equal Bob's sign.
* First check, method 2: the z branch is identical; in the x branch Alice
  performs a Bell measurement on her pair instead, and Bob's +/- must pair
  with Phi+/Phi-. Requires triplets; for qutrits both methods reduce to the
  z branch because the x and Bell measurements are qubit constructions.
* Post-transmission checks: Alice reveals a subset of sampling positions and
  the operator she applied there; every particle of those multiplets is
  measured in a shared random basis and the joint outcome must fall inside
  the support of the declared encoded state in that basis.

Everything is deterministic given (config, channel): a single seeded
generator drives position choices, basis draws and Born sampling in a fixed
order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .codec import (
    GhzFamily,
    Message,
    Scheme,
    build_family,
    capacity_bits,
    decode_index,
    encode_ops_for_message,
    ops_for_index,
)
from .errors import ProtocolStateError, SpanError
from .states import (
    StateVector,
    make_ghz,
    measure_bell,
    measure_computational,
    measure_family,
    measure_x_basis,
    rotate_to_x_basis,
)

SUPPORT_TOL = 1e-12


@dataclass(frozen=True)
class ProtocolConfig:
    """Session parameters. ``payload`` is the message sequence to deliver."""

    batch_size: int
    scheme: Scheme
    check_fraction: float
    check_method: int
    abort_threshold: float
    payload: tuple[Message, ...]
    seed: int

    def validate(self) -> None:
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not (0.0 < self.check_fraction < 1.0):
            raise ValueError(f"check_fraction must be in (0, 1), got {self.check_fraction}")
        if self.check_fraction * self.batch_size < 1.0:
            raise ValueError(
                "check_fraction * batch_size must be >= 1 "
                f"(got {self.check_fraction} * {self.batch_size})"
            )
        if self.check_method not in (1, 2):
            raise ValueError(f"check_method must be 1 or 2, got {self.check_method}")
        if self.check_method == 2 and self.scheme.dim == 2 and self.scheme.particles != 3:
            raise ValueError(
                "check_method 2 uses a two-particle Bell measurement and is only "
                f"defined for triplets, got p={self.scheme.particles}"
            )
        if not (0.0 <= self.abort_threshold <= 1.0):
            raise ValueError(f"abort_threshold must be in [0, 1], got {self.abort_threshold}")
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must be a 64-bit non-negative integer")
        for msg in self.payload:
            self.scheme.index_of_message(msg)  # validates length and digits
        if self._payload_capacity() < 1:
            raise ValueError(
                "configuration leaves no payload positions per batch; "
                "lower check_fraction or raise batch_size"
            )

    def _payload_capacity(self) -> int:
        n1 = math.ceil(self.check_fraction * self.batch_size)
        remaining = self.batch_size - n1
        ns = math.ceil(self.check_fraction * remaining)
        return remaining - ns


def sequence_label(scheme: Scheme, particle: int) -> str:
    """Transmission-step name: CSeq/BSeq/ASeq for triplets, PjSeq otherwise."""
    if scheme.particles == 3:
        return {2: "CSeq", 1: "BSeq", 0: "ASeq"}[particle]
    return f"P{particle}Seq"


@dataclass(frozen=True)
class TranscriptEvent:
    """One authenticated classical-channel announcement."""

    actor: str  # "Alice" | "Bob"
    kind: str  # PositionsAnnounce | BasisAnnounce | OutcomeAnnounce | OpAnnounce | AbortAnnounce
    payload: tuple

    def as_dict(self) -> dict:
        return {"actor": self.actor, "kind": self.kind, "payload": self.payload}


@dataclass(frozen=True)
class CheckStat:
    """Counts for one security check."""

    stage: str
    samples: int
    mismatches: int
    skipped: bool = False

    @property
    def rate(self) -> float:
        return self.mismatches / self.samples if self.samples else 0.0


@dataclass(frozen=True)
class SessionReport:
    """Transcript, statistics and verdicts of one session.

    ``delivered`` is trimmed to the payload length; positions padded with the
    all-zero message when the payload underflows a batch are counted in
    ``padded`` instead. ``throughput_bits`` counts delivered payload bits
    (len(delivered) * capacity_bits).
    """

    delivered: tuple[Message, ...]
    aborted: bool
    abort_stage: str | None
    checks: tuple[CheckStat, ...]
    throughput_bits: float
    positions: dict[str, int]
    padded: int
    corrupted: tuple[int, ...]
    warnings: tuple[str, ...]
    transcript: tuple[TranscriptEvent, ...]
    batches: int


@dataclass
class _Slot:
    position: int
    state: StateVector
    consumed: bool = False
    sampling: bool = False
    op_index: int | None = None

    def consume(self) -> None:
        if self.consumed:
            raise ProtocolStateError(f"position {self.position} already consumed")
        self.consumed = True


def draw_check_basis(rng: np.random.Generator, dim: int) -> str:
    """Shared-basis draw for checks: z or x for qubits, z otherwise."""
    if dim != 2:
        return "z"
    return "z" if rng.random() < 0.5 else "x"


def check_first_position(
    state: StateVector,
    scheme: Scheme,
    method: int,
    basis: str,
    rng: np.random.Generator,
) -> tuple[bool, int, tuple[int, ...]]:
    """Run one first-check position; returns (mismatch, bob_label, alice_labels).

    The state is consumed (fully measured); callers discard it afterwards.
    """
    p = scheme.particles
    if basis == "z":
        bob = measure_computational(state, p - 1, rng)
        post = bob.post_state
        alice = []
        for j in range(p - 1):
            out = measure_computational(post, j, rng)
            alice.append(out.label)
            post = out.post_state
        mismatch = any(a != bob.label for a in alice)
        return mismatch, bob.label, tuple(alice)
    if basis != "x":
        raise ValueError(f"unknown check basis: {basis!r}")
    bob = measure_x_basis(state, p - 1, rng)
    post = bob.post_state
    if method == 1:
        alice = []
        sign_product = 1
        for j in range(p - 1):
            out = measure_x_basis(post, j, rng)
            alice.append(out.label)
            sign_product *= out.label
            post = out.post_state
        return sign_product != bob.label, bob.label, tuple(alice)
    bell = measure_bell(post, (0, 1), rng)
    matches = (bob.label == +1 and bell.label == 0) or (bob.label == -1 and bell.label == 1)
    return not matches, bob.label, (bell.label,)


def support_indices(expected: StateVector, basis: str) -> frozenset[int]:
    """Basis indices carrying weight of the expected encoded state."""
    amps = expected.amps if basis == "z" else rotate_to_x_basis(expected).amps
    mags = amps.real**2 + amps.imag**2
    return frozenset(int(i) for i in np.nonzero(mags > SUPPORT_TOL)[0])


def check_support_position(
    state: StateVector,
    expected: StateVector,
    basis: str,
    rng: np.random.Generator,
) -> tuple[bool, tuple[int, ...]]:
    """Measure every protocol particle in ``basis`` and test support membership.

    Returns (mismatch, joint outcome digits). For the x basis the digits
    record +x as 0 and -x as 1, matching the rotated index convention.
    """
    p = expected.particles
    digits = []
    post = state
    for j in range(p):
        if basis == "z":
            out = measure_computational(post, j, rng)
            digits.append(out.label)
        else:
            out = measure_x_basis(post, j, rng)
            digits.append(0 if out.label == +1 else 1)
        post = out.post_state
    index = 0
    for g in digits:
        index = index * expected.dim + g
    mismatch = index not in support_indices(expected, basis)
    return mismatch, tuple(digits)


def run_session(config: ProtocolConfig, channel) -> SessionReport:
    """Execute a full session against a channel model.

    ``channel`` must provide ``transmit_sequence(states, particle, rng)``
    returning (new states, eavesdropper record); the record is kept out of
    the report by design.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    scheme = config.scheme
    family = build_family(scheme)
    p = scheme.particles
    n_batch = config.batch_size

    payload_iter: Iterator[Message] = iter(config.payload)
    delivered: list[Message] = []
    checks: list[CheckStat] = []
    transcript: list[TranscriptEvent] = []
    warnings: list[str] = []
    corrupted: list[int] = []
    positions = {"total": 0, "first_check": 0, "sampling": 0, "payload": 0}
    padded = 0
    assigned_total = 0
    aborted = False
    abort_stage: str | None = None
    batches = 0

    while assigned_total < len(config.payload) and not aborted:
        batches += 1
        slots = [_Slot(pos, make_ghz(p, scheme.dim)) for pos in range(n_batch)]
        positions["total"] += n_batch

        _transmit(slots, p - 1, channel, rng)
        stage = f"first-check:{sequence_label(scheme, p - 1)}"
        stat = _first_check(slots, scheme, config, stage, rng, transcript)
        checks.append(stat)
        if stat.rate > config.abort_threshold:
            aborted, abort_stage = True, stage
            transcript.append(TranscriptEvent("Bob", "AbortAnnounce", (batches - 1, stage)))
            break
        positions["first_check"] += stat.samples

        n_sampling, n_payload, assigned, pad = _encode(
            slots, scheme, family, payload_iter, config.check_fraction, rng
        )
        positions["sampling"] += n_sampling
        positions["payload"] += n_payload
        assigned_total += assigned
        padded += pad

        for j in range(p - 2, -1, -1):
            _transmit(slots, j, channel, rng)
            stage = f"post-check:{sequence_label(scheme, j)}"
            stat = _post_check(slots, scheme, family, stage, batches - 1, rng, transcript, warnings)
            checks.append(stat)
            if stat.rate > config.abort_threshold:
                aborted, abort_stage = True, stage
                transcript.append(TranscriptEvent("Alice", "AbortAnnounce", (batches - 1, stage)))
                break
        if aborted:
            break

        for slot in slots:
            if slot.sampling or slot.consumed:
                continue
            try:
                outcome = measure_family(slot.state, family, rng)
            except SpanError:
                corrupted.append(slot.position)
                continue
            delivered.append(decode_index(scheme, outcome.label))

    delivered_final = tuple(delivered[: len(config.payload)])
    throughput = len(delivered_final) * capacity_bits(scheme)
    return SessionReport(
        delivered=delivered_final,
        aborted=aborted,
        abort_stage=abort_stage,
        checks=tuple(checks),
        throughput_bits=throughput,
        positions=positions,
        padded=padded,
        corrupted=tuple(corrupted),
        warnings=tuple(warnings),
        transcript=tuple(transcript),
        batches=batches,
    )


def _transmit(slots: list[_Slot], particle: int, channel, rng: np.random.Generator) -> None:
    states = [slot.state for slot in slots]
    new_states, _record = channel.transmit_sequence(states, particle, rng)
    for slot, state in zip(slots, new_states):
        slot.state = state


def _first_check(
    slots: list[_Slot],
    scheme: Scheme,
    config: ProtocolConfig,
    stage: str,
    rng: np.random.Generator,
    transcript: list[TranscriptEvent],
) -> CheckStat:
    n1 = math.ceil(config.check_fraction * len(slots))
    chosen = sorted(int(i) for i in rng.choice(len(slots), size=n1, replace=False))
    bases = tuple(draw_check_basis(rng, scheme.dim) for _ in chosen)
    transcript.append(TranscriptEvent("Bob", "PositionsAnnounce", (stage, tuple(chosen))))
    transcript.append(TranscriptEvent("Bob", "BasisAnnounce", (stage, bases)))
    mismatches = 0
    bob_outcomes = []
    alice_outcomes = []
    for pos, basis in zip(chosen, bases):
        slot = slots[pos]
        slot.consume()
        mismatch, bob_label, alice_labels = check_first_position(
            slot.state, scheme, config.check_method, basis, rng
        )
        bob_outcomes.append(bob_label)
        alice_outcomes.append(alice_labels)
        mismatches += mismatch
    transcript.append(TranscriptEvent("Bob", "OutcomeAnnounce", (stage, tuple(bob_outcomes))))
    transcript.append(TranscriptEvent("Alice", "OutcomeAnnounce", (stage, tuple(alice_outcomes))))
    return CheckStat(stage, n1, mismatches)


def _encode(
    slots: list[_Slot],
    scheme: Scheme,
    family: GhzFamily,
    payload_iter: Iterator[Message],
    check_fraction: float,
    rng: np.random.Generator,
) -> tuple[int, int, int, int]:
    """Apply sampling and payload operators; returns (sampling, payload, assigned, padded)."""
    remaining = [slot for slot in slots if not slot.consumed]
    ns = math.ceil(check_fraction * len(remaining))
    sampling_picks = set(int(i) for i in rng.choice(len(remaining), size=ns, replace=False))
    assigned = 0
    padded = 0
    zero_message = scheme.message_of_index(0)
    for k, slot in enumerate(remaining):
        if k in sampling_picks:
            slot.sampling = True
            slot.op_index = int(rng.integers(family.size))
            slot.state = ops_for_index(scheme, slot.op_index).apply(slot.state)
        else:
            msg = next(payload_iter, None)
            if msg is None:
                msg = zero_message
                padded += 1
            else:
                assigned += 1
            slot.state = encode_ops_for_message(scheme, msg).apply(slot.state)
    return ns, len(remaining) - ns, assigned, padded


def _post_check(
    slots: list[_Slot],
    scheme: Scheme,
    family: GhzFamily,
    stage: str,
    batch: int,
    rng: np.random.Generator,
    transcript: list[TranscriptEvent],
    warnings: list[str],
) -> CheckStat:
    available = [slot for slot in slots if slot.sampling and not slot.consumed]
    if not available:
        warnings.append(f"{stage}: no sampling positions left, check skipped")
        return CheckStat(stage, 0, 0, skipped=True)
    count = max(1, len(available) // 2)
    picks = sorted(int(i) for i in rng.choice(len(available), size=count, replace=False))
    chosen = [available[i] for i in picks]
    transcript.append(
        TranscriptEvent("Alice", "PositionsAnnounce", (stage, tuple(s.position for s in chosen)))
    )
    transcript.append(
        TranscriptEvent("Alice", "OpAnnounce", (stage, tuple(s.op_index for s in chosen)))
    )
    bases = tuple(draw_check_basis(rng, scheme.dim) for _ in chosen)
    transcript.append(TranscriptEvent("Alice", "BasisAnnounce", (stage, bases)))
    mismatches = 0
    outcomes = []
    for slot, basis in zip(chosen, bases):
        slot.consume()
        expected = family.members[slot.op_index]
        mismatch, digits = check_support_position(slot.state, expected, basis, rng)
        outcomes.append(digits)
        mismatches += mismatch
    transcript.append(TranscriptEvent("Bob", "OutcomeAnnounce", (stage, tuple(outcomes))))
    return CheckStat(stage, len(chosen), mismatches)
