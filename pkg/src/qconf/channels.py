"""Quantum/classical channel machinery: permutations, decoys, estimations.

A transmitted qubit is carried by a :class:`FlyingQubit`.  Normally its state
is a single qubit, but an entangling adversary may extend it with ancilla
qubits; ``channel_qubit`` marks which qubit of the state is actually on the
wire, and every later measurement of that wire qubit goes through the full
joint state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ContractError
from .qsim import (
    BASIS_X,
    BASIS_Z,
    JointBasis,
    Outcome,
    PureState,
    QubitSpec,
    materialize,
    measure_embedded,
    measure_joint,
    measure_qubit,
    measure_single,
    tensor,
)

PHASE_FIRST = "first_estimation"
PHASE_SECOND = "second_estimation"
PHASE_DECOY = "decoy_verification"
PHASE_GUESS = "guess_comparison"


@dataclass(frozen=True)
class FlyingQubit:
    """One in-flight qubit, possibly entangled with adversary ancillas."""

    state: PureState
    channel_qubit: int = 0


def flying(spec: QubitSpec) -> FlyingQubit:
    return FlyingQubit(materialize(spec))


def measure_flying(
    qubit: FlyingQubit, basis: str, rng: np.random.Generator
) -> tuple[int, FlyingQubit]:
    """Measure the wire qubit in Z or X; returns (bit, collapsed carrier)."""
    if qubit.state.num_qubits == 1:
        bit, post = measure_single(qubit.state, basis, rng)
        return bit, FlyingQubit(post, 0)
    bit, post = measure_qubit(qubit.state, qubit.channel_qubit, basis, rng)
    return bit, FlyingQubit(post, qubit.channel_qubit)


def measure_channel_tuple(
    qubits: Sequence[FlyingQubit], basis: JointBasis, rng: np.random.Generator
) -> Outcome:
    """Joint-basis measurement of one wire qubit per party, in party order."""
    joint = tensor([q.state for q in qubits])
    if joint.num_qubits == basis.num_qubits:
        return measure_joint(joint, basis, rng)
    targets = []
    offset = 0
    for q in qubits:
        targets.append(offset + q.channel_qubit)
        offset += q.state.num_qubits
    return measure_embedded(joint, targets, basis, rng)


# ---------------------------------------------------------------------------
# Permutations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Permutation:
    """Bijection on positions; ``mapping[i]`` is where source slot i lands."""

    mapping: np.ndarray

    def __post_init__(self):
        mapping = np.array(self.mapping, dtype=np.int64, copy=True)
        if sorted(mapping.tolist()) != list(range(len(mapping))):
            raise ContractError("mapping is not a bijection on 0..L-1")
        mapping.setflags(write=False)
        object.__setattr__(self, "mapping", mapping)

    def __len__(self) -> int:
        return len(self.mapping)


def random_permutation(length: int, rng: np.random.Generator) -> Permutation:
    return Permutation(rng.permutation(length))


def permute(seq: Sequence, p: Permutation) -> list:
    if len(seq) != len(p):
        raise ContractError("sequence and permutation lengths differ")
    out = [None] * len(seq)
    for i, item in enumerate(seq):
        out[p.mapping[i]] = item
    return out


def unpermute(seq: Sequence, p: Permutation) -> list:
    if len(seq) != len(p):
        raise ContractError("sequence and permutation lengths differ")
    return [seq[p.mapping[i]] for i in range(len(seq))]


# ---------------------------------------------------------------------------
# Decoy photons
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecoySet:
    """Decoy preparations plus their positions in the augmented sequence."""

    positions: tuple[int, ...]
    specs: tuple[QubitSpec, ...]

    def __post_init__(self):
        if len(self.positions) != len(self.specs):
            raise ContractError("positions and specs must pair up")
        if list(self.positions) != sorted(set(self.positions)):
            raise ContractError("decoy positions must be strictly increasing")

    @property
    def count(self) -> int:
        return len(self.positions)


_DECOY_CHOICES = (
    QubitSpec(BASIS_Z, 0),
    QubitSpec(BASIS_Z, 1),
    QubitSpec(BASIS_X, 0),
    QubitSpec(BASIS_X, 1),
)


def make_decoy_set(
    payload_len: int, count: int, rng: np.random.Generator
) -> DecoySet:
    """Fresh decoys at random slots of the augmented sequence."""
    if count < 0:
        raise ContractError("decoy count must be >= 0")
    positions = np.sort(rng.choice(payload_len + count, size=count, replace=False))
    picks = rng.integers(0, 4, size=count)
    specs = tuple(_DECOY_CHOICES[int(p)] for p in picks)
    return DecoySet(tuple(int(p) for p in positions), specs)


def insert_decoys(payload: Sequence[FlyingQubit], decoys: DecoySet) -> list[FlyingQubit]:
    """Interleave decoys into the payload; removing them restores the order."""
    total = len(payload) + decoys.count
    if any(not 0 <= p < total for p in decoys.positions):
        raise ContractError("decoy positions out of range")
    out: list[FlyingQubit] = []
    decoy_at = dict(zip(decoys.positions, decoys.specs))
    payload_iter = iter(payload)
    for slot in range(total):
        spec = decoy_at.get(slot)
        out.append(flying(spec) if spec is not None else next(payload_iter))
    return out


def extract_payload(seq: Sequence[FlyingQubit], decoys: DecoySet) -> list[FlyingQubit]:
    """Drop the decoy positions, recovering the payload in order."""
    positions = set(decoys.positions)
    if len(seq) < len(positions):
        raise ContractError("sequence shorter than the decoy set")
    return [q for slot, q in enumerate(seq) if slot not in positions]


# ---------------------------------------------------------------------------
# Error estimation ceremonies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ErrorEstimate:
    """Outcome of one estimation ceremony.

    ``detail`` keeps one (label, position, ok) record per individual check so
    the Monte Carlo layer can aggregate pass rates at any granularity.
    """

    phase: str
    positions_checked: int
    mismatches: int
    threshold: float
    detail: tuple = field(default=())

    @property
    def rate(self) -> float:
        if self.positions_checked == 0:
            return 0.0
        return self.mismatches / self.positions_checked

    @property
    def verdict(self) -> str:
        return "abort" if self.rate > self.threshold else "continue"

    def to_dict(self) -> dict:
        return {
            "phase": self.phase,
            "positions_checked": self.positions_checked,
            "mismatches": self.mismatches,
            "rate": self.rate,
            "threshold": self.threshold,
            "verdict": self.verdict,
            "detail": [list(entry) for entry in self.detail],
        }


def verify_decoys(
    received: list[FlyingQubit],
    decoys: DecoySet,
    threshold: float,
    rng: np.random.Generator,
    phase: str = PHASE_DECOY,
) -> ErrorEstimate:
    """Measure each decoy in its preparation basis and count mismatches.

    Collapses the decoy slots of ``received`` in place; payload slots are
    untouched.
    """
    detail = []
    mismatches = 0
    for pos, spec in zip(decoys.positions, decoys.specs):
        bit, collapsed = measure_flying(received[pos], spec.basis, rng)
        received[pos] = collapsed
        ok = bit == spec.bit
        mismatches += not ok
        detail.append(("decoy", pos, ok))
    return ErrorEstimate(phase, decoys.count, mismatches, threshold, tuple(detail))


def first_error_estimation(
    prepared: Mapping[str, Sequence[QubitSpec]],
    held: Mapping[str, list[FlyingQubit]],
    perms: Mapping[str, Permutation],
    sample_positions: Sequence[int],
    threshold: float,
    rng: np.random.Generator,
) -> ErrorEstimate:
    """Single-qubit spot checks before the joint measurement.

    For each sampled original position every sender tells the middle party
    the physical slot and preparation basis; the middle party measures and
    announces, and the sender compares against the prepared bit.  Collapses
    the checked slots of ``held`` in place.
    """
    detail = []
    mismatches = 0
    for position in sample_positions:
        for party, specs in prepared.items():
            slot = int(perms[party].mapping[position])
            spec = specs[position]
            bit, collapsed = measure_flying(held[party][slot], spec.basis, rng)
            held[party][slot] = collapsed
            ok = bit == spec.bit
            mismatches += not ok
            detail.append((party, int(position), ok))
    return ErrorEstimate(
        PHASE_FIRST, len(detail), mismatches, threshold, tuple(detail)
    )


def second_error_estimation(
    outcomes: Sequence[Outcome],
    x_round_flags: Sequence[int],
    revealed_bits: Mapping[str, Sequence[int]],
    sample_rounds: Sequence[int],
    n_parties: int,
    threshold: float,
    consistent_codes: Callable[[Sequence[int], bool, int], tuple[int, ...]],
) -> ErrorEstimate:
    """Consistency check of announced joint outcomes against revealed bits.

    A sampled round fails when the announced outcome lies outside the set of
    outcomes an honest joint measurement could have produced for the revealed
    bits and that round's basis.
    """
    parties = list(revealed_bits)
    detail = []
    mismatches = 0
    for round_idx in sample_rounds:
        bits = [int(revealed_bits[p][round_idx]) for p in parties]
        allowed = consistent_codes(bits, bool(x_round_flags[round_idx]), n_parties)
        ok = outcomes[round_idx].code in allowed
        mismatches += not ok
        detail.append(("round", int(round_idx), ok))
    return ErrorEstimate(
        PHASE_SECOND, len(detail), mismatches, threshold, tuple(detail)
    )


# ---------------------------------------------------------------------------
# Channels
# ---------------------------------------------------------------------------


@dataclass
class QuantumChannel:
    """Ordered qubit transport with an optional adversary tap."""

    sender: str
    receiver: str
    tap: object | None = None

    @property
    def channel_id(self) -> str:
        return f"{self.sender}->{self.receiver}"

    def transmit(
        self,
        qubits: list[FlyingQubit],
        rng: np.random.Generator,
        events: list,
        **event_fields,
    ) -> list[FlyingQubit]:
        events.append(
            {
                "type": "transmit",
                "channel": self.channel_id,
                "count": len(qubits),
                **event_fields,
            }
        )
        if self.tap is not None:
            qubits = self.tap.apply(qubits, rng, self.channel_id)
            events.append(
                {
                    "type": "attack",
                    "channel": self.channel_id,
                    "kind": self.tap.kind,
                    **event_fields,
                }
            )
        return list(qubits)
