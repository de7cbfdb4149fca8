"""Minimal pure-state simulator for products of single qubits.

States are dense complex vectors indexed so that qubit 0 is the most
significant bit of the computational index (a state over qubits 1..n written
left to right).  The joint measurement basis used by the relay pairs each
computational index ``i`` with its bitwise complement::

    phi(i, +/-) = (|i> +/- |2^n - 1 - i>) / sqrt(2),  0 <= i < 2^(n-1)

and outcomes are wire-encoded as ``code = 2 * index + sign_bit`` so that the
code order matches the natural listing order of the basis.

Everything here is deterministic given a seeded generator; sampling always
consumes exactly one uniform draw per measurement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import ContractError, ResourceLimitError

STATE_ATOL = 1e-12
UNITARY_ATOL = 1e-10
MAX_QUBITS = 16

INV_SQRT2 = 1.0 / math.sqrt(2.0)

BASIS_Z = "Z"
BASIS_X = "X"

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_IY = np.array([[0.0, 1.0], [-1.0, 0.0]], dtype=complex)  # i * sigma_y
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
HADAMARD = np.array(
    [[INV_SQRT2, INV_SQRT2], [INV_SQRT2, -INV_SQRT2]], dtype=complex
)


# ---------------------------------------------------------------------------
# Core value types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PureState:
    """Normalized amplitude vector over ``num_qubits`` qubits."""

    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.num_qubits < 1:
            raise ContractError("num_qubits must be >= 1")
        amps = np.array(self.amplitudes, dtype=complex, copy=True)
        if amps.shape != (2**self.num_qubits,):
            raise ContractError(
                f"amplitude vector must have length {2 ** self.num_qubits}, "
                f"got shape {amps.shape}"
            )
        norm = float(np.sum(np.abs(amps) ** 2))
        if abs(norm - 1.0) > STATE_ATOL:
            raise ContractError(f"state norm {norm} is not 1")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return 2**self.num_qubits


@dataclass(frozen=True)
class QubitSpec:
    """Symbolic single-qubit preparation: basis in {Z, X}, bit in {0, 1}."""

    basis: str
    bit: int

    def __post_init__(self):
        if self.basis not in (BASIS_Z, BASIS_X):
            raise ContractError(f"basis must be Z or X, got {self.basis!r}")
        if self.bit not in (0, 1):
            raise ContractError(f"bit must be 0 or 1, got {self.bit!r}")

    @property
    def label(self) -> str:
        return f"{self.basis}{self.bit}"

    @classmethod
    def from_label(cls, label: str) -> "QubitSpec":
        if len(label) != 2:
            raise ContractError(f"bad qubit label {label!r}")
        return cls(label[0], int(label[1]))


@dataclass(frozen=True)
class Outcome:
    """Joint measurement result: basis index plus sign (0 for +, 1 for -)."""

    index: int
    sign: int

    def __post_init__(self):
        if self.index < 0:
            raise ContractError("outcome index must be >= 0")
        if self.sign not in (0, 1):
            raise ContractError("outcome sign must be 0 (+) or 1 (-)")

    @property
    def code(self) -> int:
        return 2 * self.index + self.sign

    @classmethod
    def from_code(cls, code: int) -> "Outcome":
        return cls(code >> 1, code & 1)

    @property
    def label(self) -> str:
        return f"Phi{self.index}{'+' if self.sign == 0 else '-'}"


@dataclass(frozen=True)
class JointBasis:
    """The full 2^n-vector joint basis, ordered by outcome code."""

    num_qubits: int
    vectors: tuple
    matrix: np.ndarray  # row `code` holds the amplitudes of that basis vector

    @property
    def dim(self) -> int:
        return 2**self.num_qubits


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


@lru_cache(maxsize=8)
def _materialize_cached(basis: str, bit: int) -> PureState:
    if basis == BASIS_Z:
        amps = [1.0, 0.0] if bit == 0 else [0.0, 1.0]
    else:
        amps = [INV_SQRT2, INV_SQRT2] if bit == 0 else [INV_SQRT2, -INV_SQRT2]
    return PureState(1, np.array(amps, dtype=complex))


def materialize(spec: QubitSpec) -> PureState:
    """Amplitude vector for a symbolic single-qubit preparation."""
    return _materialize_cached(spec.basis, spec.bit)


def tensor(states: Sequence[PureState]) -> PureState:
    """Kronecker product; the first state supplies the most significant bits."""
    if not states:
        raise ContractError("tensor of an empty sequence")
    amps = states[0].amplitudes
    for state in states[1:]:
        amps = np.multiply.outer(amps, state.amplitudes).reshape(-1)
    n = sum(s.num_qubits for s in states)
    return PureState(n, amps)


@lru_cache(maxsize=MAX_QUBITS)
def build_joint_basis(num_qubits: int) -> JointBasis:
    """All 2^n vectors pairing each index with its bitwise complement."""
    if not 2 <= num_qubits <= MAX_QUBITS:
        raise ResourceLimitError(
            f"joint basis supports 2..{MAX_QUBITS} qubits, got {num_qubits}"
        )
    dim = 2**num_qubits
    matrix = np.zeros((dim, dim), dtype=complex)
    for index in range(dim // 2):
        for sign in (0, 1):
            code = 2 * index + sign
            matrix[code, index] = INV_SQRT2
            matrix[code, dim - 1 - index] = INV_SQRT2 if sign == 0 else -INV_SQRT2
    matrix.setflags(write=False)
    vectors = tuple(PureState(num_qubits, matrix[code]) for code in range(dim))
    return JointBasis(num_qubits, vectors, matrix)


# ---------------------------------------------------------------------------
# Born rule and sampling
# ---------------------------------------------------------------------------


def outcome_distribution(state: PureState, basis: JointBasis) -> np.ndarray:
    """Probability of each outcome code for a full-size joint measurement."""
    if state.num_qubits != basis.num_qubits:
        raise ContractError(
            f"state has {state.num_qubits} qubits, basis {basis.num_qubits}"
        )
    overlaps = basis.matrix.conj() @ state.amplitudes
    return np.abs(overlaps) ** 2


def sample_index(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Draw an index from a probability vector using one uniform draw."""
    cumulative = np.cumsum(probs)
    r = rng.random() * cumulative[-1]
    return min(int(np.searchsorted(cumulative, r, side="right")), len(probs) - 1)


def measure_joint(
    state: PureState, basis: JointBasis, rng: np.random.Generator
) -> Outcome:
    """Sample a joint-basis outcome for an exactly matching state."""
    probs = outcome_distribution(state, basis)
    return Outcome.from_code(sample_index(probs, rng))


def measure_embedded(
    state: PureState,
    targets: Sequence[int],
    basis: JointBasis,
    rng: np.random.Generator,
) -> Outcome:
    """Joint-basis measurement of a subset of qubits of a larger state.

    Used when transmitted qubits carry entangled ancillas: the outcome
    probability marginalizes over every non-target qubit.
    """
    k = basis.num_qubits
    n = state.num_qubits
    targets = list(targets)
    if len(targets) != k:
        raise ContractError("number of targets must match the basis size")
    if len(set(targets)) != len(targets) or any(not 0 <= t < n for t in targets):
        raise ContractError(f"bad target qubits {targets} for {n}-qubit state")
    if n == k:
        # targets must then be a permutation of all qubits; the common case
        # is identity order, for which the plain path is faster.
        if targets == list(range(n)):
            return measure_joint(state, basis, rng)
    rest = [q for q in range(n) if q not in set(targets)]
    psi = state.amplitudes.reshape((2,) * n)
    psi = np.transpose(psi, axes=targets + rest).reshape(2**k, -1)
    coeffs = basis.matrix.conj() @ psi
    probs = np.sum(np.abs(coeffs) ** 2, axis=1)
    return Outcome.from_code(sample_index(probs, rng))


def measure_single(
    state: PureState, basis: str, rng: np.random.Generator
) -> tuple[int, PureState]:
    """Born-rule bit for a single qubit; collapses onto the basis vector."""
    if state.num_qubits != 1:
        raise ContractError("measure_single expects a single-qubit state")
    a0, a1 = state.amplitudes
    if basis == BASIS_Z:
        p0 = abs(a0) ** 2
    elif basis == BASIS_X:
        p0 = abs(a0 + a1) ** 2 / 2.0
    else:
        raise ContractError(f"basis must be Z or X, got {basis!r}")
    bit = 0 if rng.random() < p0 else 1
    return bit, materialize(QubitSpec(basis, bit))


def measure_qubit(
    state: PureState, target: int, basis: str, rng: np.random.Generator
) -> tuple[int, PureState]:
    """Measure one qubit of a multi-qubit state in Z or X; collapses in place."""
    n = state.num_qubits
    if not 0 <= target < n:
        raise ContractError(f"target {target} out of range for {n} qubits")
    if basis == BASIS_X:
        state = apply_1q_unitary(state, HADAMARD, target)
    elif basis != BASIS_Z:
        raise ContractError(f"basis must be Z or X, got {basis!r}")
    shift = n - 1 - target
    amps = state.amplitudes
    ones = ((np.arange(state.dim) >> shift) & 1).astype(bool)
    p0 = float(np.sum(np.abs(amps[~ones]) ** 2))
    bit = 0 if rng.random() < p0 else 1
    keep = ones if bit == 1 else ~ones
    collapsed = np.where(keep, amps, 0.0)
    prob = p0 if bit == 0 else 1.0 - p0
    collapsed = collapsed / math.sqrt(prob)
    post = PureState(n, collapsed)
    if basis == BASIS_X:
        post = apply_1q_unitary(post, HADAMARD, target)
    return bit, post


# ---------------------------------------------------------------------------
# Unitaries
# ---------------------------------------------------------------------------


def apply_1q_unitary(state: PureState, u: np.ndarray, target: int) -> PureState:
    """Apply a 2x2 unitary to one qubit; output renormalized to unit norm."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2):
        raise ContractError("single-qubit unitary must be 2x2")
    defect = np.max(np.abs(u.conj().T @ u - np.eye(2)))
    if defect > UNITARY_ATOL:
        raise ContractError(f"matrix is not unitary (defect {defect:.2e})")
    n = state.num_qubits
    if not 0 <= target < n:
        raise ContractError(f"target {target} out of range for {n} qubits")
    psi = state.amplitudes.reshape((2,) * n)
    psi = np.moveaxis(psi, target, 0)
    out = np.tensordot(u, psi, axes=(1, 0))
    out = np.moveaxis(out, 0, target).reshape(-1)
    out = out / math.sqrt(float(np.sum(np.abs(out) ** 2)))
    return PureState(n, out)


def apply_cnot(state: PureState, control: int, target: int) -> PureState:
    """CNOT in the product-order convention (qubit 0 most significant)."""
    n = state.num_qubits
    if control == target:
        raise ContractError("control and target must differ")
    for q in (control, target):
        if not 0 <= q < n:
            raise ContractError(f"qubit index {q} out of range for {n} qubits")
    idx = np.arange(state.dim)
    control_bit = (idx >> (n - 1 - control)) & 1
    source = idx ^ (control_bit << (n - 1 - target))
    return PureState(n, state.amplitudes[source])


# ---------------------------------------------------------------------------
# Index helpers shared by the codec and table checks
# ---------------------------------------------------------------------------


def index_to_bits(index: int, n: int) -> tuple[int, ...]:
    """Big-endian bit tuple of an index (bit of qubit 0 first)."""
    return tuple((index >> (n - 1 - k)) & 1 for k in range(n))


def bits_to_index(bits: Sequence[int]) -> int:
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    return value
