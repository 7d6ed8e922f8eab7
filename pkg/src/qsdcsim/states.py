"""Dense state-vector simulation of small qudit registers.

Conventions used throughout the package:

* A register of ``p`` particles with ``d`` levels each is a length ``d**p``
  complex vector. Basis index ``i`` encodes the digit string base ``d`` with
  particle 0 as the most significant digit, so ``|abc>`` for d=2, p=3 sits at
  index ``4a + 2b + c``.
* States are immutable: every operation returns a new ``StateVector`` and the
  amplitude buffers are marked read-only, so values can be shared across
  concurrent trial workers.
* All randomness flows through an explicitly passed ``numpy.random.Generator``.

Tolerances: 1e-12 for algebraic identities (unitarity, orthonormality),
1e-10 for norms, 1e-8 for span membership in family measurements.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Union

import numpy as np

from . import backend
from .errors import RegisterLimitError, SpanError

NORM_TOL = 1e-10
UNITARY_TOL = 1e-12
SPAN_TOL = 1e-8

#: Default cap on dense register size (amplitude count).
MAX_AMPLITUDES = 2**20

_SQRT2_INV = 1.0 / np.sqrt(2.0)


class PauliGate(Enum):
    """Qubit gate alphabet for dense coding: I, sigma_x, i*sigma_y, sigma_z.

    ``IY`` is fixed as the real matrix with rows (0, 1) and (-1, 0).
    """

    I = "I"  # noqa: E741
    X = "X"
    IY = "iY"
    Z = "Z"


_PAULI_MATRICES = {
    PauliGate.I: np.eye(2, dtype=np.complex128),
    PauliGate.X: np.array([[0, 1], [1, 0]], dtype=np.complex128),
    PauliGate.IY: np.array([[0, 1], [-1, 0]], dtype=np.complex128),
    PauliGate.Z: np.array([[1, 0], [0, -1]], dtype=np.complex128),
}
for _m in _PAULI_MATRICES.values():
    _m.setflags(write=False)


@dataclass(frozen=True)
class ShiftPhaseGate:
    """Generalized shift-phase operator for a d-level particle.

    Maps ``|j>`` to ``exp(2*pi*i*j*m/d) |j+n mod d>``. For d=2 the (m, n)
    pairs reproduce the Pauli alphabet up to phase: (0,0)=I, (0,1)=X,
    (1,0)=Z, (1,1)=XZ.
    """

    m: int
    n: int

    def matrix(self, dim: int) -> np.ndarray:
        if not (0 <= self.m < dim and 0 <= self.n < dim):
            raise ValueError(f"shift-phase indices ({self.m}, {self.n}) out of range for d={dim}")
        mat = np.zeros((dim, dim), dtype=np.complex128)
        phases = np.exp(2j * np.pi * self.m * np.arange(dim) / dim)
        for j in range(dim):
            mat[(j + self.n) % dim, j] = phases[j]
        return mat


Gate = Union[PauliGate, ShiftPhaseGate]


def gate_matrix(gate: Gate, dim: int) -> np.ndarray:
    """Matrix of a single-particle gate for the given level count."""
    if isinstance(gate, PauliGate):
        if dim != 2:
            raise ValueError(f"Pauli gate {gate.value} is only defined for d=2, got d={dim}")
        return _PAULI_MATRICES[gate]
    if isinstance(gate, ShiftPhaseGate):
        return gate.matrix(dim)
    raise TypeError(f"not a single-particle gate: {gate!r}")


@dataclass(frozen=True)
class StateVector:
    """Immutable pure state of ``particles`` qudits with ``dim`` levels each."""

    dim: int
    particles: int
    amps: np.ndarray

    def __post_init__(self) -> None:
        if self.dim < 2:
            raise ValueError(f"dim must be >= 2, got {self.dim}")
        if self.particles < 1:
            raise ValueError(f"particles must be >= 1, got {self.particles}")
        amps = np.ascontiguousarray(self.amps, dtype=np.complex128)
        if amps.shape != (self.dim**self.particles,):
            raise ValueError(
                f"amplitude vector has shape {amps.shape}, expected ({self.dim ** self.particles},)"
            )
        norm_sq = float((amps.real**2 + amps.imag**2).sum())
        if abs(norm_sq - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized: |amps|^2 = {norm_sq!r}")
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @property
    def size(self) -> int:
        return self.amps.shape[0]

    def stride_of(self, particle: int) -> int:
        if not (0 <= particle < self.particles):
            raise ValueError(f"particle index {particle} out of range for p={self.particles}")
        return self.dim ** (self.particles - 1 - particle)

    def digits_of_index(self, index: int) -> tuple[int, ...]:
        out = []
        for j in range(self.particles):
            index, r = divmod(index, self.dim)
            out.append(r)
        return tuple(reversed(out))


@dataclass(frozen=True)
class MeasurementOutcome:
    """Result of a projective measurement: an outcome tag plus the collapsed state.

    ``label`` is basis dependent: computational digit, +1/-1 for the x basis,
    Bell index 0..3 (Phi+, Phi-, Psi+, Psi-), or a family index.
    """

    label: int
    post_state: StateVector


def basis_state(dim: int, particles: int, digits: Sequence[int]) -> StateVector:
    """Computational basis state |digits...> with particle 0 first."""
    if len(digits) != particles:
        raise ValueError(f"expected {particles} digits, got {len(digits)}")
    index = 0
    for g in digits:
        if not (0 <= g < dim):
            raise ValueError(f"digit {g} out of range for d={dim}")
        index = index * dim + g
    amps = np.zeros(dim**particles, dtype=np.complex128)
    amps[index] = 1.0
    return StateVector(dim, particles, amps)


def make_ghz(particles: int, dim: int, *, max_amplitudes: int = MAX_AMPLITUDES) -> StateVector:
    """Maximally entangled multiplet (1/sqrt(d)) * sum_n |n n ... n>."""
    if particles < 2:
        raise ValueError(f"a GHZ multiplet needs at least 2 particles, got {particles}")
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    size = dim**particles
    if size > max_amplitudes:
        raise RegisterLimitError(
            f"register of {size} amplitudes exceeds the limit of {max_amplitudes}"
        )
    amps = np.zeros(size, dtype=np.complex128)
    step = (size - 1) // (dim - 1)  # index of |n n ... n> is n * (d^p - 1)/(d - 1)
    amps[::step][:dim] = 1.0 / np.sqrt(dim)
    return StateVector(dim, particles, amps)


def apply_single(state: StateVector, particle: int, gate: Gate) -> StateVector:
    """Apply a single-particle gate: (I x ... x U x ... x I)|state>."""
    mat = gate_matrix(gate, state.dim)
    out = backend.impl.apply_single(state.amps, mat, state.stride_of(particle))
    return StateVector(state.dim, state.particles, out)


def inner_product(a: StateVector, b: StateVector) -> complex:
    """<a|b> with conjugation on ``a``."""
    if (a.dim, a.particles) != (b.dim, b.particles):
        raise ValueError(
            f"shape mismatch: (d={a.dim}, p={a.particles}) vs (d={b.dim}, p={b.particles})"
        )
    return complex(np.vdot(a.amps, b.amps))


def _sample(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Born-rule draw; tolerant of sub-1e-10 normalization drift."""
    total = float(probs.sum())
    target = rng.random() * total
    acc = 0.0
    for k, pk in enumerate(probs):
        acc += float(pk)
        if target < acc:
            return k
    return int(len(probs) - 1)


def measure_computational(
    state: StateVector, particle: int, rng: np.random.Generator
) -> MeasurementOutcome:
    """Projective measurement of one particle in the computational (z) basis."""
    stride = state.stride_of(particle)
    probs = backend.impl.particle_probs(state.amps, state.dim, stride)
    digit = _sample(probs, rng)
    post, _prob = backend.impl.project_digit(state.amps, state.dim, stride, digit)
    return MeasurementOutcome(digit, StateVector(state.dim, state.particles, post))


_HADAMARD = np.array([[1, 1], [1, -1]], dtype=np.complex128) * _SQRT2_INV
_HADAMARD.setflags(write=False)


def measure_x_basis(
    state: StateVector, particle: int, rng: np.random.Generator
) -> MeasurementOutcome:
    """Projective measurement in the |+x>, |-x> basis. Qubits only.

    Label +1 for |+x>, -1 for |-x>. Implemented by conjugating a
    computational measurement with the Hadamard rotation.
    """
    if state.dim != 2:
        raise ValueError(f"x-basis measurement is only defined for d=2, got d={state.dim}")
    stride = state.stride_of(particle)
    rotated = backend.impl.apply_single(state.amps, _HADAMARD, stride)
    probs = backend.impl.particle_probs(rotated, 2, stride)
    digit = _sample(probs, rng)
    post, _prob = backend.impl.project_digit(rotated, 2, stride, digit)
    post = backend.impl.apply_single(post, _HADAMARD, stride)
    return MeasurementOutcome(+1 if digit == 0 else -1, StateVector(2, state.particles, post))


def rotate_to_x_basis(state: StateVector) -> StateVector:
    """Hadamard on every particle, mapping x-basis kets onto computational ones."""
    if state.dim != 2:
        raise ValueError(f"x-basis rotation is only defined for d=2, got d={state.dim}")
    amps = state.amps
    for j in range(state.particles):
        amps = backend.impl.apply_single(amps, _HADAMARD, state.dim ** (state.particles - 1 - j))
    return StateVector(2, state.particles, amps)


#: Bell labels: 0 Phi+ = (|00>+|11>)/sqrt2, 1 Phi- , 2 Psi+ = (|01>+|10>)/sqrt2, 3 Psi-.
BELL_LABELS = ("phi+", "phi-", "psi+", "psi-")

_BELL = np.array(
    [
        [_SQRT2_INV, 0, 0, _SQRT2_INV],
        [_SQRT2_INV, 0, 0, -_SQRT2_INV],
        [0, _SQRT2_INV, _SQRT2_INV, 0],
        [0, _SQRT2_INV, -_SQRT2_INV, 0],
    ],
    dtype=np.complex128,
)
_BELL.setflags(write=False)


def measure_bell(
    state: StateVector, particles: tuple[int, int], rng: np.random.Generator
) -> MeasurementOutcome:
    """Joint Bell-basis measurement of an ordered qubit pair."""
    if state.dim != 2:
        raise ValueError(f"Bell measurement is only defined for d=2, got d={state.dim}")
    i, j = particles
    if i == j:
        raise ValueError(f"Bell measurement needs two distinct particles, got ({i}, {j})")
    p = state.particles
    tensor = state.amps.reshape([2] * p)
    rest_axes = [ax for ax in range(p) if ax not in (i, j)]
    moved = np.transpose(tensor, [i, j, *rest_axes]).reshape(4, -1)
    coeffs = _BELL.conj() @ moved  # (4, rest): amplitudes in the Bell basis
    probs = (coeffs.real**2 + coeffs.imag**2).sum(axis=1)
    k = _sample(probs, rng)
    post = np.einsum("b,r->br", _BELL[k], coeffs[k] / np.sqrt(probs[k]))
    post = post.reshape([2, 2] + [2] * (p - 2))
    inverse = np.argsort([i, j, *rest_axes])
    post = np.transpose(post, inverse).reshape(-1)
    return MeasurementOutcome(k, StateVector(2, p, post))


def measure_family(
    state: StateVector, family, rng: np.random.Generator
) -> MeasurementOutcome:
    """Projective measurement onto an orthonormal family of states.

    ``family`` is a sequence of StateVector members (or any object with a
    ``members`` attribute). Members must share the state's level count and
    cover its leading particles; trailing particles, if any, are treated as
    an unmeasured environment (projectors act as member x identity).

    Outcome ``k`` occurs with probability |<member_k|state>|^2 (summed over
    the environment). Raises SpanError when more than 1e-8 of the squared
    norm lies outside the family span.
    """
    members: Sequence[StateVector] = getattr(family, "members", family)
    if len(members) == 0:
        raise ValueError("family must be non-empty")
    first = members[0]
    if first.dim != state.dim:
        raise ValueError(f"family dim {first.dim} does not match state dim {state.dim}")
    pf = first.particles
    if pf > state.particles:
        raise ValueError(f"family members span {pf} particles, state has {state.particles}")
    nf = first.size
    env = state.size // nf
    fam_matrix = np.vstack([m.amps for m in members])
    overlaps = fam_matrix.conj() @ state.amps.reshape(nf, env)  # (K, env)
    probs = (overlaps.real**2 + overlaps.imag**2).sum(axis=1)
    if 1.0 - float(probs.sum()) > SPAN_TOL:
        raise SpanError(
            f"state has {1.0 - float(probs.sum()):.3e} squared norm outside the family span"
        )
    k = _sample(probs, rng)
    post = np.einsum("f,e->fe", members[k].amps, overlaps[k] / np.sqrt(probs[k])).reshape(-1)
    return MeasurementOutcome(k, StateVector(state.dim, state.particles, post))


def family_probabilities(state: StateVector, family) -> np.ndarray:
    """Outcome distribution of measure_family without sampling or collapse."""
    members: Sequence[StateVector] = getattr(family, "members", family)
    nf = members[0].size
    env = state.size // nf
    fam_matrix = np.vstack([m.amps for m in members])
    overlaps = fam_matrix.conj() @ state.amps.reshape(nf, env)
    return (overlaps.real**2 + overlaps.imag**2).sum(axis=1)
