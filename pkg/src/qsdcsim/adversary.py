"""Channel models and eavesdropping analysis.

Channels act on particle sequences in transit and are silent by design:
they never alter sequence lengths or position labels, so detection can only
come from measurement statistics in the security checks. Eve's classical
records accumulate in an ``EveRecord`` that stays out of the honest
parties' state and reports.

The probe channel couples a private four-level ancilla (stored as two
appended qubits) to the transiting qubit:

    |0>|e> -> alpha1 |0>|keep> + beta1 |1>|flip0>
    |1>|e> -> alpha2 |1>|keep> + beta2 |0>|flip1>

with |flip0> and |flip1> orthogonal to each other and to |keep|. The alpha
amplitudes preserve the digit and the beta amplitudes flip it, so the z-basis
error rate seen by the checks is |beta|^2 on each branch, and a probe with
beta1 = beta2 = 0 is exactly the identity (the honest state factorizes from
the untouched ancilla).
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .codec import Scheme, build_family
from .protocol import check_first_position
from .states import StateVector, make_ghz, measure_computational, measure_x_basis

PROBE_NORM_TOL = 1e-12

#: Ancilla tags (two appended qubits read as one 4-level system).
ANCILLA_KEEP = 0
ANCILLA_FLIP_FROM_0 = 1
ANCILLA_FLIP_FROM_1 = 2


@dataclass
class EveRecord:
    """Append-only log of what the adversary learned during one transmission."""

    entries: list[tuple] = field(default_factory=list)

    def log(self, *entry) -> None:
        self.entries.append(tuple(entry))


@dataclass(frozen=True)
class Ideal:
    """Lossless, noiseless, attack-free channel."""

    def transmit_sequence(
        self, states: Sequence[StateVector], particle: int, rng: np.random.Generator
    ) -> tuple[list[StateVector], EveRecord]:
        return list(states), EveRecord()


@dataclass(frozen=True)
class InterceptResend:
    """Eve measures each transiting particle and resends the outcome eigenstate.

    ``basis_policy``: "z", "x", or "zx" (uniformly random per particle).
    The resend is exact, so the post-measurement state already is what Bob
    receives.
    """

    basis_policy: str = "z"

    def __post_init__(self) -> None:
        if self.basis_policy not in ("z", "x", "zx"):
            raise ValueError(f"basis_policy must be z, x or zx, got {self.basis_policy!r}")

    def transmit_sequence(
        self, states: Sequence[StateVector], particle: int, rng: np.random.Generator
    ) -> tuple[list[StateVector], EveRecord]:
        record = EveRecord()
        out = []
        for position, state in enumerate(states):
            if self.basis_policy == "zx":
                basis = "z" if rng.random() < 0.5 else "x"
            else:
                basis = self.basis_policy
            if basis == "z":
                outcome = measure_computational(state, particle, rng)
            else:
                outcome = measure_x_basis(state, particle, rng)
            record.log(position, particle, "measure", basis, outcome.label)
            out.append(outcome.post_state)
        return out, record


@dataclass(frozen=True)
class ProbeParams:
    """Amplitudes of the ancilla probe; each branch must be normalized.

    ``epsilon1 = |beta1|^2`` and ``epsilon2 = |beta2|^2`` are the z-basis
    error rates induced on the |0> and |1> branches. Unequal magnitudes are
    accepted; the branch rates are then simply different.
    """

    alpha1: complex
    beta1: complex
    alpha2: complex
    beta2: complex

    def __post_init__(self) -> None:
        for name, a, b in (("1", self.alpha1, self.beta1), ("2", self.alpha2, self.beta2)):
            norm = abs(a) ** 2 + abs(b) ** 2
            if abs(norm - 1.0) > PROBE_NORM_TOL:
                raise ValueError(
                    f"probe branch {name} is not normalized: |alpha|^2 + |beta|^2 = {norm!r}"
                )

    @property
    def epsilon1(self) -> float:
        return abs(self.beta1) ** 2

    @property
    def epsilon2(self) -> float:
        return abs(self.beta2) ** 2

    @classmethod
    def symmetric(cls, beta: float) -> "ProbeParams":
        """Real symmetric probe with |beta1| = |beta2| = beta."""
        if not (0.0 <= beta <= 1.0):
            raise ValueError(f"beta must be in [0, 1], got {beta}")
        alpha = math.sqrt(max(0.0, 1.0 - beta * beta))
        return cls(alpha, beta, alpha, beta)


def probe_attach(state: StateVector, particle: int, params: ProbeParams) -> StateVector:
    """Append Eve's ancilla and apply the probe interaction to one qubit.

    The ancilla occupies two new qubits at the end of the register; honest
    parties never address them. Qubit registers only.
    """
    if state.dim != 2:
        raise ValueError(f"the probe interaction is defined for qubits, got d={state.dim}")
    stride = state.stride_of(particle)
    blocks = state.amps.reshape(-1, 2, stride)
    out = np.zeros(blocks.shape + (4,), dtype=np.complex128)
    out[:, 0, :, ANCILLA_KEEP] += params.alpha1 * blocks[:, 0, :]
    out[:, 1, :, ANCILLA_FLIP_FROM_0] += params.beta1 * blocks[:, 0, :]
    out[:, 1, :, ANCILLA_KEEP] += params.alpha2 * blocks[:, 1, :]
    out[:, 0, :, ANCILLA_FLIP_FROM_1] += params.beta2 * blocks[:, 1, :]
    return StateVector(2, state.particles + 2, out.reshape(-1))


@dataclass(frozen=True)
class Probe:
    """Ancilla-probe channel: every transiting particle is probed."""

    params: ProbeParams

    def transmit_sequence(
        self, states: Sequence[StateVector], particle: int, rng: np.random.Generator
    ) -> tuple[list[StateVector], EveRecord]:
        record = EveRecord()
        out = []
        for position, state in enumerate(states):
            out.append(probe_attach(state, particle, self.params))
            record.log(position, particle, "probe", state.particles, state.particles + 1)
        return out, record


@dataclass(frozen=True)
class GroupedInterception:
    """Eve z-measures the particles in ``group`` as their sequences transit.

    Models the grouped-send weakness: with several message particles in one
    block, the joint computational outcome carries message information.
    """

    group: frozenset[int]

    def transmit_sequence(
        self, states: Sequence[StateVector], particle: int, rng: np.random.Generator
    ) -> tuple[list[StateVector], EveRecord]:
        record = EveRecord()
        if particle not in self.group:
            return list(states), record
        out = []
        for position, state in enumerate(states):
            outcome = measure_computational(state, particle, rng)
            record.log(position, particle, "measure", "z", outcome.label)
            out.append(outcome.post_state)
        return out, record


ChannelModel = Ideal | InterceptResend | Probe | GroupedInterception


def transmit(
    states: Sequence[StateVector],
    particle: int,
    model: ChannelModel,
    rng: np.random.Generator,
) -> tuple[list[StateVector], EveRecord]:
    """Send one particle sequence through a channel model."""
    return model.transmit_sequence(states, particle, rng)


@dataclass(frozen=True)
class DetectionEstimate:
    """Monte Carlo estimate of the per-checked-position mismatch probability."""

    rate: float
    stderr: float
    trials: int
    z_rate: float
    z_samples: int
    x_rate: float
    x_samples: int


def detection_probability(
    model: ChannelModel,
    check_method: int,
    trials: int,
    rng: np.random.Generator,
    *,
    bases: tuple[str, ...] = ("z", "x"),
) -> DetectionEstimate:
    """Estimate the first-check mismatch probability under an attack.

    Each trial prepares a fresh GHZ triplet, transmits the check particle
    through the channel, and runs one first-check position. ``bases``
    restricts Bob's basis draw (useful for branch-specific rates).
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    scheme = Scheme("qubit3", 3, 2)
    mismatches = 0
    tallies = {"z": [0, 0], "x": [0, 0]}  # basis -> [samples, mismatches]
    for _ in range(trials):
        state = make_ghz(3, 2)
        sent, _record = model.transmit_sequence([state], 2, rng)
        if len(bases) == 1:
            basis = bases[0]
        else:
            basis = bases[int(rng.integers(len(bases)))]
        mismatch, _bob, _alice = check_first_position(sent[0], scheme, check_method, basis, rng)
        tallies[basis][0] += 1
        tallies[basis][1] += mismatch
        mismatches += mismatch
    rate = mismatches / trials
    stderr = math.sqrt(rate * (1.0 - rate) / trials)
    z_n, z_m = tallies["z"]
    x_n, x_m = tallies["x"]
    return DetectionEstimate(
        rate=rate,
        stderr=stderr,
        trials=trials,
        z_rate=z_m / z_n if z_n else 0.0,
        z_samples=z_n,
        x_rate=x_m / x_n if x_n else 0.0,
        x_samples=x_n,
    )


def _member_outcome_distribution(
    member: StateVector, intercepted: tuple[int, ...]
) -> dict[tuple[int, ...], Fraction]:
    """Exact distribution of computational outcomes on a particle subset.

    Family members are uniform over their support, which keeps the
    distribution rational: each support index contributes 1/|support|.
    """
    mags = member.amps.real**2 + member.amps.imag**2
    support = np.nonzero(mags > 1e-9)[0]
    peak = mags[support]
    if peak.max() - peak.min() > 1e-9:
        raise AssertionError("family member is not uniform over its support")
    weight = Fraction(1, len(support))
    dist: dict[tuple[int, ...], Fraction] = {}
    for index in support:
        digits = member.digits_of_index(int(index))
        outcome = tuple(digits[j] for j in intercepted)
        dist[outcome] = dist.get(outcome, Fraction(0)) + weight
    return dist


def grouped_leakage(scheme: Scheme, intercepted: Iterable[int]) -> float:
    """Exact mutual information (bits) between a joint z-measurement of the
    intercepted particles and a uniformly random message.

    This is the brute-force enumeration oracle for the grouped-send
    scenario: interception is modeled as a computational-basis measurement
    of the encoded state's reduced system. Probabilities are kept as exact
    rationals so that a zero is an exact 0.0.
    """
    subset = tuple(sorted(set(int(j) for j in intercepted)))
    if not subset:
        return 0.0
    message_particles = range(scheme.particles - 1)
    if any(j not in message_particles for j in subset):
        raise ValueError(
            f"intercepted particles {subset} must be message-carrying "
            f"(0..{scheme.particles - 2})"
        )
    family = build_family(scheme)
    k = family.size
    conditionals = [_member_outcome_distribution(m, subset) for m in family.members]
    mixture: dict[tuple[int, ...], Fraction] = {}
    for dist in conditionals:
        for outcome, prob in dist.items():
            mixture[outcome] = mixture.get(outcome, Fraction(0)) + prob / k
    info = 0.0
    for dist in conditionals:
        for outcome, prob in dist.items():
            ratio = prob / mixture[outcome]
            if ratio != 1:
                info += float(prob) * math.log2(float(ratio)) / k
    return info


@dataclass(frozen=True)
class InfoEstimate:
    """Plug-in mutual information estimate with a delta-method stderr."""

    bits: float
    stderr: float
    trials: int


def eve_information(
    model: ChannelModel,
    scheme: Scheme,
    trials: int,
    rng: np.random.Generator,
) -> InfoEstimate:
    """Empirical mutual information between Eve's records and the messages.

    Per trial a uniformly random message is drawn and the scenario implied
    by the channel model is simulated:

    * Ideal: no record, zero information.
    * InterceptResend / Probe: Eve acts on the check particle of the
      unencoded multiplet (the first transmission step), so her record is
      independent of the message. For the probe, Eve z-measures her ancilla.
    * GroupedInterception: the grouped-send variant, where the encoded
      message particles travel together and Eve z-measures her group.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    family = build_family(scheme)
    pairs: list[tuple[tuple, int]] = []
    for _ in range(trials):
        msg_index = int(rng.integers(family.size))
        if isinstance(model, Ideal):
            key: tuple = ()
        elif isinstance(model, GroupedInterception):
            state = family.members[msg_index]
            digits = []
            for j in sorted(model.group):
                out = measure_computational(state, j, rng)
                digits.append(out.label)
                state = out.post_state
            key = tuple(digits)
        elif isinstance(model, InterceptResend):
            state = make_ghz(scheme.particles, scheme.dim)
            _sent, record = model.transmit_sequence([state], scheme.particles - 1, rng)
            key = tuple(record.entries[0][3:5])  # (basis, outcome)
        elif isinstance(model, Probe):
            state = make_ghz(scheme.particles, scheme.dim)
            sent, _record = model.transmit_sequence([state], scheme.particles - 1, rng)
            probed = sent[0]
            digits = []
            for j in (probed.particles - 2, probed.particles - 1):
                out = measure_computational(probed, j, rng)
                digits.append(out.label)
                probed = out.post_state
            key = tuple(digits)
        else:
            raise TypeError(f"unsupported channel model: {model!r}")
        pairs.append((key, msg_index))

    joint = Counter(pairs)
    key_marginal = Counter(k for k, _ in pairs)
    msg_marginal = Counter(m for _, m in pairs)
    n = float(trials)
    pointwise = []
    for key, msg_index in pairs:
        p_xy = joint[(key, msg_index)] / n
        p_x = key_marginal[key] / n
        p_y = msg_marginal[msg_index] / n
        pointwise.append(math.log2(p_xy / (p_x * p_y)))
    values = np.asarray(pointwise)
    bits = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return InfoEstimate(bits=bits, stderr=stderr, trials=trials)
