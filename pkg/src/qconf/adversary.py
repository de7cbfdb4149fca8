"""Adversary strategies: channel taps, a dishonest middle party, a cheating P1.

Channel taps operate on in-flight qubits only; they never see keys,
permutations, or decoy layouts, which is exactly the information boundary the
protocols rely on.  Everything an attack learns or fabricates is kept in an
:class:`AdversaryRecord` so experiments can score recovery rates afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import FlyingQubit, measure_flying
from .codec import consistent_outcome_codes
from .errors import ContractError
from .qsim import (
    BASIS_X,
    BASIS_Z,
    Outcome,
    PAULI_I,
    PAULI_IY,
    PAULI_X,
    PAULI_Z,
    QubitSpec,
    apply_1q_unitary,
    apply_cnot,
    materialize,
    tensor,
)
from .rng import random_bits

ATTACK_KINDS = (
    "none",
    "intercept_resend",
    "entangle_measure",
    "dos",
    "mitm",
    "dishonest_middle",
    "dishonest_p1",
)

CHANNEL_TAP_KINDS = ("intercept_resend", "entangle_measure", "dos", "mitm")

PAULIS = (PAULI_I, PAULI_X, PAULI_IY, PAULI_Z)

# Per-Pauli probability of surviving a preparation-basis check when the
# preparation basis is a fair Z/X coin: identity always passes, the bit-flip
# and phase-flip each disturb one basis, i*sigma_y disturbs both.
DOS_PASS_WEIGHTS = (1.0, 0.5, 0.0, 0.5)


@dataclass(frozen=True)
class AttackConfig:
    """Which strategy is active, its parameters, and where it attaches.

    ``target_links`` of None means every quantum channel of the run; naming
    links (e.g. ``{"P1->P2"}``) restricts the tap to those hops.
    """

    kind: str = "none"
    dos_weights: tuple[float, ...] | None = None
    target_links: frozenset[str] | None = None

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ContractError(f"unknown attack kind {self.kind!r}")
        if self.kind == "dos":
            if self.dos_weights is None or len(self.dos_weights) != 4:
                raise ContractError("dos needs four mixing weights")
            norm = sum(w * w for w in self.dos_weights)
            if abs(norm - 1.0) > 1e-10:
                raise ContractError(f"dos weights not unit-norm (sum w^2 = {norm})")
        elif self.dos_weights is not None:
            raise ContractError("dos_weights only apply to kind='dos'")
        if self.target_links is not None:
            object.__setattr__(self, "target_links", frozenset(self.target_links))

    def applies_to(self, channel_id: str) -> bool:
        if self.kind not in CHANNEL_TAP_KINDS:
            return False
        return self.target_links is None or channel_id in self.target_links

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "dos_weights": list(self.dos_weights) if self.dos_weights else None,
            "target_links": sorted(self.target_links) if self.target_links else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AttackConfig":
        weights = data.get("dos_weights")
        links = data.get("target_links")
        return cls(
            kind=data.get("kind", "none"),
            dos_weights=tuple(weights) if weights else None,
            target_links=frozenset(links) if links else None,
        )


@dataclass
class AdversaryRecord:
    """Everything the adversary saw or fabricated during one run."""

    kind: str = "none"
    guesses: dict = field(default_factory=dict)       # channel -> [(basis, bit)]
    ancillas: dict = field(default_factory=dict)      # channel -> [joint PureState]
    substituted: dict = field(default_factory=dict)   # channel -> [spec label]
    kept: dict = field(default_factory=dict)          # channel -> [FlyingQubit]
    announced: list = field(default_factory=list)     # outcome codes (middle)
    pauli_counts: list = field(default_factory=lambda: [0, 0, 0, 0])

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "guesses": {
                ch: [[basis, int(bit)] for basis, bit in entries]
                for ch, entries in self.guesses.items()
            },
            "substituted": dict(self.substituted),
            "ancilla_counts": {ch: len(v) for ch, v in self.ancillas.items()},
            "announced": list(self.announced),
            "pauli_counts": list(self.pauli_counts),
        }


# ---------------------------------------------------------------------------
# Per-qubit attack primitives
# ---------------------------------------------------------------------------


def intercept_resend(
    qubit: FlyingQubit, rng: np.random.Generator, basis: str | None = None
) -> tuple[FlyingQubit, tuple[str, int]]:
    """Measure in a guessed basis and forward the collapsed qubit."""
    if basis is None:
        basis = BASIS_Z if rng.random() < 0.5 else BASIS_X
    bit, forwarded = measure_flying(qubit, basis, rng)
    return forwarded, (basis, bit)

def entangle_measure(
    qubit: FlyingQubit, rng: np.random.Generator
) -> tuple[FlyingQubit, object]:
    """Entangle a fresh |0> ancilla via CNOT and forward the wire qubit.

    The forwarded carrier keeps the whole joint state so later measurements
    of the wire qubit stay physically correct; the pre-forwarding joint state
    is what the adversary retains.
    """
    joint = tensor([qubit.state, materialize(QubitSpec(BASIS_Z, 0))])
    ancilla_index = qubit.state.num_qubits
    joint = apply_cnot(joint, qubit.channel_qubit, ancilla_index)
    return FlyingQubit(joint, qubit.channel_qubit), joint


def dos_attack(
    qubit: FlyingQubit, weights: tuple[float, ...], rng: np.random.Generator
) -> tuple[FlyingQubit, int]:
    """Apply one Pauli drawn with probability weight^2 (stochastic mixture)."""
    norm = sum(w * w for w in weights)
    if abs(norm - 1.0) > 1e-10:
        raise ContractError("dos weights not unit-norm")
    probs = np.array([w * w for w in weights])
    choice = min(int(np.searchsorted(np.cumsum(probs), rng.random())), 3)
    if choice == 0:
        return qubit, choice
    state = apply_1q_unitary(qubit.state, PAULIS[choice], qubit.channel_qubit)
    return FlyingQubit(state, qubit.channel_qubit), choice


def mitm_attack(
    sequence: list[FlyingQubit], rng: np.random.Generator
) -> tuple[list[FlyingQubit], list[FlyingQubit], list[QubitSpec]]:
    """Keep the genuine sequence; substitute fresh uniformly random qubits."""
    picks = rng.integers(0, 4, size=len(sequence))
    choices = (
        QubitSpec(BASIS_Z, 0),
        QubitSpec(BASIS_Z, 1),
        QubitSpec(BASIS_X, 0),
        QubitSpec(BASIS_X, 1),
    )
    specs = [choices[int(p)] for p in picks]
    substituted = [FlyingQubit(materialize(s)) for s in specs]
    return list(sequence), substituted, specs


def dishonest_middle_announce(
    bits: list[int], x_basis: bool, n_parties: int, rng: np.random.Generator
) -> Outcome:
    """Announce a uniformly drawn outcome consistent with per-qubit results."""
    codes = consistent_outcome_codes(bits, x_basis, n_parties)
    return Outcome.from_code(codes[int(rng.integers(0, len(codes)))])


def draw_substitute_blind(
    true_blind: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Random mask different from the distributed one (the cheating P1's R)."""
    while True:
        candidate = random_bits(rng, len(true_blind))
        if not np.array_equal(candidate, true_blind):
            return candidate


# ---------------------------------------------------------------------------
# Channel taps
# ---------------------------------------------------------------------------


class InterceptResendTap:
    """Per-qubit intercept-and-resend.

    ``forced_bases`` coordinates the basis guess across channels by slot,
    which models a key-guessing eavesdropper on the unpermuted protocol;
    without it each qubit gets an independent coin.
    """

    kind = "intercept_resend"

    def __init__(self, record: AdversaryRecord, forced_bases: list[str] | None = None):
        self.record = record
        self.forced_bases = forced_bases

    def apply(self, qubits, rng, channel_id):
        guesses = self.record.guesses.setdefault(channel_id, [])
        out = []
        for slot, qubit in enumerate(qubits):
            basis = self.forced_bases[slot] if self.forced_bases else None
            forwarded, guess = intercept_resend(qubit, rng, basis)
            guesses.append(guess)
            out.append(forwarded)
        return out


class EntangleMeasureTap:
    """Per-qubit CNOT onto a retained |0> ancilla."""

    kind = "entangle_measure"

    def __init__(self, record: AdversaryRecord):
        self.record = record

    def apply(self, qubits, rng, channel_id):
        retained = self.record.ancillas.setdefault(channel_id, [])
        out = []
        for qubit in qubits:
            forwarded, joint = entangle_measure(qubit, rng)
            retained.append(joint)
            out.append(forwarded)
        return out


class DosTap:
    """Stochastic Pauli channel with the configured mixing weights."""

    kind = "dos"

    def __init__(self, record: AdversaryRecord, weights: tuple[float, ...]):
        self.record = record
        self.weights = weights

    def apply(self, qubits, rng, channel_id):
        out = []
        for qubit in qubits:
            forwarded, choice = dos_attack(qubit, self.weights, rng)
            self.record.pauli_counts[choice] += 1
            out.append(forwarded)
        return out


class MitmTap:
    """Swap the whole sequence for fresh random qubits; keep the originals."""

    kind = "mitm"

    def __init__(self, record: AdversaryRecord):
        self.record = record

    def apply(self, qubits, rng, channel_id):
        kept, substituted, specs = mitm_attack(qubits, rng)
        self.record.kept[channel_id] = kept
        self.record.substituted[channel_id] = [s.label for s in specs]
        return substituted


def make_tap(
    config: AttackConfig,
    record: AdversaryRecord,
    channel_id: str,
    forced_bases: list[str] | None = None,
):
    """Tap instance for one channel, or None when the attack skips it."""
    if not config.applies_to(channel_id):
        return None
    if config.kind == "intercept_resend":
        return InterceptResendTap(record, forced_bases)
    if config.kind == "entangle_measure":
        return EntangleMeasureTap(record)
    if config.kind == "dos":
        return DosTap(record, config.dos_weights)
    if config.kind == "mitm":
        return MitmTap(record)
    return None
