"""Bit <-> qubit encoding rules and outcome decoding, as pure functions.

Encoding conventions shared by every protocol:

* message phase: the shared key bit selects the basis (0 -> Z, 1 -> X) and
  the message bit selects the vector within it;
* exchange phase: the 1-based position of the round selects the basis
  (even -> Z, odd -> X);
* XOR phase: positions whose key bit equals the select bit are X-encoded,
  the rest Z-encoded.

Decoding uses only two facts about the joint basis: a Z-product collapses
onto the index of its bit string (or the complement), and an X-product
collapses onto a sign equal to the XOR of the encoded bits.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ContractError, ProtocolCorruptionError
from .qsim import BASIS_X, BASIS_Z, Outcome, QubitSpec, bits_to_index, index_to_bits
from .rng import random_bits

# Two-party sifting keeps exactly the outcomes that leak nothing about the
# XOR of the two message bits: codes 1 (Phi0-) and 2 (Phi1+).
SIFT_KEEP_CODES = frozenset({1, 2})


def encode_message_qubit(msg_bit: int, key_bit: int) -> QubitSpec:
    """Message-phase preparation: key bit picks the basis, message the vector."""
    return QubitSpec(BASIS_X if key_bit else BASIS_Z, int(msg_bit))


def decode_partner_bit(own_bit: int, key_bit: int, outcome: Outcome) -> int:
    """Partner's bit in the two-party dialogue.

    On Z rounds the outcome index says whether the two bits agree; on X
    rounds the sign does.
    """
    if outcome.index > 1:
        raise ContractError("two-party decode needs a 2-qubit outcome")
    marker = outcome.index if key_bit == 0 else outcome.sign
    return int(own_bit) ^ marker


def sift_outcome(outcome: Outcome) -> bool:
    """Keep a two-party round iff its outcome is in the non-leaking pair."""
    return outcome.code in SIFT_KEEP_CODES


def decode_z_round(
    own_bit: int, own_position: int, outcome: Outcome, n_parties: int
) -> tuple[int, ...]:
    """All parties' bits for a round where everyone used the Z basis.

    The candidates are the outcome index read as a bit string and its
    complement; the caller's own bit picks the right one.
    """
    bits = index_to_bits(outcome.index, n_parties)
    if bits[own_position] == own_bit:
        return bits
    complement = tuple(1 - b for b in bits)
    if complement[own_position] == own_bit:
        return complement
    raise ProtocolCorruptionError(
        f"outcome {outcome.label} is inconsistent with own bit {own_bit} "
        f"at position {own_position}"
    )


def decode_x_round(outcome: Outcome) -> int:
    """XOR of all encoded bits for a round where everyone used the X basis."""
    return outcome.sign


def encode_exchange_qubit(msg_bit: int, position: int) -> QubitSpec:
    """Exchange-phase preparation; `position` is the 1-based round index."""
    return QubitSpec(BASIS_Z if position % 2 == 0 else BASIS_X, int(msg_bit))


def exchange_basis(position: int) -> str:
    """Basis used by encode_exchange_qubit for a 1-based round index."""
    return BASIS_Z if position % 2 == 0 else BASIS_X


def derive_select_bit(key: np.ndarray) -> int:
    """Basis-select bit for the XOR protocol.

    Balanced keys resolve by parity; otherwise the majority value wins, which
    guarantees at least half of the positions carry the payload basis.
    """
    key = np.asarray(key)
    if len(key) % 2 != 0:
        raise ContractError("select bit needs an even-length key")
    half = len(key) // 2
    weight = int(key.sum())
    if weight == half:
        return weight % 2
    return 1 if weight > half else 0


def payload_positions(key: np.ndarray, select: int) -> list[int]:
    """First half-length positions whose key bit equals the select bit."""
    key = np.asarray(key)
    m = len(key) // 2
    positions = np.flatnonzero(key == select)
    if len(positions) < m:
        raise ContractError("select bit does not cover enough positions")
    return [int(p) for p in positions[:m]]


def embed_payload(
    payload: Sequence[int], key: np.ndarray, select: int, rng: np.random.Generator
) -> np.ndarray:
    """Scatter an m-bit payload over a 2m-bit carrier.

    The first m positions (in index order) where the key bit equals the
    select bit receive the payload in order; every other position gets a
    random filler bit.  One filler draw is consumed per carrier position so
    the stream layout does not depend on the key.
    """
    payload = np.asarray(payload, dtype=np.uint8)
    key = np.asarray(key)
    if len(key) != 2 * len(payload):
        raise ContractError("carrier must be twice the payload length")
    carrier = random_bits(rng, len(key))
    carrier[payload_positions(key, select)] = payload
    return carrier


def encode_xor_qubit(carrier_bit: int, key_bit: int, select: int) -> QubitSpec:
    """XOR-phase preparation: payload-basis (X) where the key matches select."""
    return QubitSpec(BASIS_X if key_bit == select else BASIS_Z, int(carrier_bit))


def consistent_outcome_codes(
    bits: Sequence[int], x_round: bool, n_parties: int
) -> tuple[int, ...]:
    """Outcome codes an honest joint measurement can produce for these bits.

    Z rounds allow both signs of the single reachable index; X rounds allow
    every index at the parity-determined sign.
    """
    if x_round:
        sign = int(np.bitwise_xor.reduce(np.asarray(bits, dtype=np.uint8)))
        return tuple(2 * i + sign for i in range(2 ** (n_parties - 1)))
    j = bits_to_index(bits)
    j_hat = min(j, 2**n_parties - 1 - j)
    return (2 * j_hat, 2 * j_hat + 1)
