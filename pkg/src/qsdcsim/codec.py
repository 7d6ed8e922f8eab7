"""Encoding families and message bijections for GHZ dense coding.

Three schemes are supported:

* ``qubit3``: the canonical qubit triplet. Messages are 3-bit strings and the
  eight encoding operators act on particles A=0 and B=1 as
  (Z,Z), (I,Z), (iY,Z), (X,Z), (I,X), (Z,X), (X,X), (iY,X) for messages
  000..111 in order.
* ``qubitp(p)``: p-particle qubit multiplets. Particle p-2 carries one of
  {I, Z, iY, X} and each of particles 0..p-3 carries one of {I, X}, giving
  4 * 2**(p-2) = 2**p operator tuples. The message bijection is the
  lexicographic one described below, except p=3 which is permuted to agree
  with the qubit3 table state-for-state.
* ``qutrit3``: three-level triplets. Particle A carries a pure shift U(0,c)
  and particle B a shift-phase U(m,n); the 27 tuples are bijective with the
  ternary messages (c, n, m).

Message convention: a message is a tuple of digits, most significant first.
For qubitp with p != 3, bits 0..1 select the particle p-2 gate in the order
(I, Z, iY, X) and bit 2+j selects I or X on particle j. Family members are
stored with the exact phase produced by literal operator application; the
family measurement is phase blind, so stored global phases are irrelevant
but reproducible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import FamilyConstructionError
from .states import (
    Gate,
    PauliGate,
    ShiftPhaseGate,
    StateVector,
    apply_single,
    make_ghz,
)

GRAM_TOL = 1e-12

Message = tuple[int, ...]


@dataclass(frozen=True)
class Scheme:
    """An encoding scheme: particle count, level count, and message shape."""

    kind: str  # "qubit3" | "qubitp" | "qutrit3"
    particles: int
    dim: int

    @property
    def family_size(self) -> int:
        # Every scheme's family is a complete basis of its register.
        return self.dim**self.particles

    @property
    def message_length(self) -> int:
        return self.particles

    @property
    def name(self) -> str:
        return f"qubitp({self.particles})" if self.kind == "qubitp" else self.kind

    def message_of_index(self, index: int) -> Message:
        if not (0 <= index < self.family_size):
            raise ValueError(f"index {index} out of range for family of {self.family_size}")
        base = self.dim
        digits = []
        for _ in range(self.message_length):
            index, r = divmod(index, base)
            digits.append(r)
        return tuple(reversed(digits))

    def index_of_message(self, msg: Message) -> int:
        if len(msg) != self.message_length:
            raise ValueError(f"message length {len(msg)} != {self.message_length}")
        index = 0
        for g in msg:
            if not (0 <= g < self.dim):
                raise ValueError(f"message digit {g} out of range for d={self.dim}")
            index = index * self.dim + g
        return index

    def messages(self) -> Iterator[Message]:
        for k in range(self.family_size):
            yield self.message_of_index(k)


QUBIT3 = Scheme("qubit3", 3, 2)
QUTRIT3 = Scheme("qutrit3", 3, 3)


def qubit_multiplet(particles: int) -> Scheme:
    if particles < 2:
        raise ValueError(f"qubit multiplets need at least 2 particles, got {particles}")
    return Scheme("qubitp", particles, 2)


def scheme_by_name(name: str, particles: int | None = None) -> Scheme:
    name = name.strip().lower()
    if name == "qubit3":
        return QUBIT3
    if name == "qutrit3":
        return QUTRIT3
    if name == "qubitp":
        if particles is None:
            raise ValueError("scheme qubitp requires a particle count")
        return qubit_multiplet(particles)
    raise ValueError(f"unknown scheme: {name!r}")


@dataclass(frozen=True)
class EncodingOp:
    """Gates applied to the message-carrying particles, in particle order.

    The check particle (index p-1) never appears; identity assignments are
    kept explicit so distinct messages always map to distinct tuples.
    """

    gates: tuple[tuple[int, Gate], ...]

    def apply(self, state: StateVector) -> StateVector:
        for particle, gate in self.gates:
            state = apply_single(state, particle, gate)
        return state


_QUBIT3_TABLE: tuple[tuple[PauliGate, PauliGate], ...] = (
    (PauliGate.Z, PauliGate.Z),
    (PauliGate.I, PauliGate.Z),
    (PauliGate.IY, PauliGate.Z),
    (PauliGate.X, PauliGate.Z),
    (PauliGate.I, PauliGate.X),
    (PauliGate.Z, PauliGate.X),
    (PauliGate.X, PauliGate.X),
    (PauliGate.IY, PauliGate.X),
)

_FOUR_GATE_ORDER = (PauliGate.I, PauliGate.Z, PauliGate.IY, PauliGate.X)


def _qubitp_ops(p: int, msg: Message) -> EncodingOp:
    gates: list[tuple[int, Gate]] = []
    if p == 3:
        # Permuted so the three-bit message table matches qubit3 member for
        # member: bit 0 toggles the flip on particle 1, bit 2 the sign, and
        # bit 1 selects I or X on particle 0.
        flip, lead, sign = msg
        gates.append((0, PauliGate.X if lead else PauliGate.I))
        pair = ((PauliGate.I, PauliGate.Z), (PauliGate.X, PauliGate.IY))[flip]
        gates.append((1, pair[sign]))
    else:
        for j in range(p - 2):
            gates.append((j, PauliGate.X if msg[2 + j] else PauliGate.I))
        gates.append((p - 2, _FOUR_GATE_ORDER[2 * msg[0] + msg[1]]))
    return EncodingOp(tuple(gates))


def encode_ops_for_message(scheme: Scheme, msg: Message) -> EncodingOp:
    """Operator tuple whose application to the base GHZ state encodes ``msg``."""
    scheme.index_of_message(msg)  # validates shape and digits
    if scheme.kind == "qubit3":
        gate_a, gate_b = _QUBIT3_TABLE[scheme.index_of_message(msg)]
        return EncodingOp(((0, gate_a), (1, gate_b)))
    if scheme.kind == "qubitp":
        return _qubitp_ops(scheme.particles, msg)
    if scheme.kind == "qutrit3":
        c, n, m = msg
        return EncodingOp(((0, ShiftPhaseGate(0, c)), (1, ShiftPhaseGate(m, n))))
    raise ValueError(f"unknown scheme kind: {scheme.kind!r}")


def ops_for_index(scheme: Scheme, index: int) -> EncodingOp:
    return encode_ops_for_message(scheme, scheme.message_of_index(index))


def decode_index(scheme: Scheme, family_index: int) -> Message:
    """Inverse of the message-to-member bijection."""
    return scheme.message_of_index(family_index)


def capacity_bits(scheme: Scheme) -> float:
    """Classical bits carried per multiplet: log2 of the family size."""
    return math.log2(scheme.family_size)


@dataclass(frozen=True)
class GhzFamily:
    """Ordered orthonormal encoding family, indexed by message integer."""

    scheme: Scheme
    members: tuple[StateVector, ...]

    @property
    def size(self) -> int:
        return len(self.members)

    def message_of_index(self, index: int) -> Message:
        return self.scheme.message_of_index(index)

    def index_of_message(self, msg: Message) -> int:
        return self.scheme.index_of_message(msg)


def build_family(scheme: Scheme) -> GhzFamily:
    """Apply every encoding operator to the base GHZ state and self-check.

    The Gram matrix of the members must equal the identity within 1e-12,
    otherwise the construction itself is broken and a
    FamilyConstructionError is raised.
    """
    base = make_ghz(scheme.particles, scheme.dim)
    members = tuple(
        ops_for_index(scheme, k).apply(base) for k in range(scheme.family_size)
    )
    matrix = np.vstack([m.amps for m in members])
    gram = matrix.conj() @ matrix.T
    dev = float(np.abs(gram - np.eye(scheme.family_size)).max())
    if dev > GRAM_TOL:
        raise FamilyConstructionError(
            f"family for {scheme.name} is not orthonormal: max Gram deviation {dev:.3e}"
        )
    return GhzFamily(scheme, members)
