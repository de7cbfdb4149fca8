"""Shared protocol machinery: parties, parameters, transcripts."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..channels import ErrorEstimate
from ..errors import ContractError

MIDDLE = "middle"


@dataclass(frozen=True)
class PartyId:
    """A protocol role: numbered participant or the untrusted middle party."""

    role: str  # "party" | "middle"
    index: int  # 1-based among participants; 0 for the middle

    @property
    def name(self) -> str:
        return MIDDLE if self.role == "middle" else f"P{self.index}"


def party_names(n: int) -> tuple[str, ...]:
    return tuple(PartyId("party", i + 1).name for i in range(n))


@dataclass(frozen=True)
class ProtocolParams:
    """Tunable fractions shared by every protocol.

    ``delta`` sizes the pre-measurement single-qubit check, ``gamma`` the
    post-measurement consistency check, ``decoy_count`` the per-hop decoys of
    the exchange phases.  Threshold 0 means any mismatch aborts, which is the
    right default for a noiseless channel.
    """

    delta: float = 0.1
    gamma: float = 0.1
    decoy_count: int = 16
    threshold: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ContractError(f"delta must be in (0, 1), got {self.delta}")
        if not 0.0 < self.gamma < 1.0:
            raise ContractError(f"gamma must be in (0, 1), got {self.gamma}")
        if self.decoy_count < 0:
            raise ContractError("decoy_count must be >= 0")
        if not 0.0 <= self.threshold < 1.0:
            raise ContractError("threshold must be in [0, 1)")


def sample_size(fraction: float, total: int) -> int:
    """Number of positions checked: floored, at least 1, at most total."""
    return max(1, min(math.floor(fraction * total), total))


def sorted_sample(rng: np.random.Generator, total: int, count: int) -> list[int]:
    """Sorted sample of distinct positions drawn from the shared coin."""
    return sorted(int(i) for i in rng.choice(total, size=count, replace=False))


def bits_to_str(bits) -> str:
    return "".join(str(int(b)) for b in bits)


def str_to_bits(text: str) -> np.ndarray:
    return np.array([int(c) for c in text], dtype=np.uint8)


def _plain(value):
    """Make a value JSON-safe (numpy scalars/arrays to native types)."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value


@dataclass
class Transcript:
    """Complete record of one protocol run.

    ``events`` is everything observable on the wire (channel traffic and
    public announcements); ``secrets`` is the simulator's omniscient side
    record (true messages, keys, masks) used only for scoring and replay
    checks and never shown to adversary taps.
    """

    config: dict
    key_stages: list = field(default_factory=list)
    events: list = field(default_factory=list)
    estimates: list = field(default_factory=list)
    outputs: dict | None = None
    abort: dict = field(default_factory=lambda: {"aborted": False, "stage": None})
    adversary: dict | None = None
    secrets: dict = field(default_factory=dict)

    def add_event(self, type_: str, **fields) -> None:
        self.events.append(_plain({"type": type_, **fields}))

    def add_key_stage(self, stage: str, length: int) -> None:
        self.key_stages.append({"stage": stage, "length": int(length)})

    def add_estimate(self, estimate: ErrorEstimate) -> None:
        self.estimates.append(_plain(estimate.to_dict()))
        self.add_event(
            "estimation_verdict",
            phase=estimate.phase,
            rate=estimate.rate,
            verdict=estimate.verdict,
        )

    def record_abort(self, stage: str) -> None:
        self.abort = {"aborted": True, "stage": stage}
        self.add_event("abort", stage=stage)

    @property
    def aborted(self) -> bool:
        return bool(self.abort["aborted"])

    def to_dict(self) -> dict:
        return _plain(
            {
                "config": self.config,
                "key_stages": self.key_stages,
                "events": self.events,
                "estimates": self.estimates,
                "outputs": self.outputs,
                "abort": self.abort,
                "adversary": self.adversary,
                "secrets": self.secrets,
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)
