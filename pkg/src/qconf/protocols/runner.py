"""Run configuration, validation, and trial execution.

A :class:`RunConfig` is the single source of truth for one batch of runs:
protocol, sizes, check fractions, attack, trials, and master seed.  Trial t
derives its message stream from (seed, t, 0) and its protocol stream from
(seed, t, 1), so any trial can be reproduced in isolation and parallel
workers cannot perturb each other.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..adversary import AttackConfig
from ..errors import ContractError
from ..rng import derive_rng, random_bits
from .common import ProtocolParams, Transcript
from .conference import run_conference
from .mdi_qd import run_mdi_qd_modified, run_mdi_qd_original
from .xor_compute import run_xor

PROTOCOLS = ("mdi_qd_original", "mdi_qd_modified", "conference3", "conferenceN", "xor")

# A protocol alias only pins the party count; the canonical name is what the
# transcript records, so a three-party conference run is byte-identical no
# matter which alias requested it.
_CANONICAL = {"conference3": "conferenceN"}

MIN_SAMPLED_POSITIONS = 10


@dataclass(frozen=True)
class RunConfig:
    """Validated description of a batch of protocol runs."""

    protocol: str
    message_length: int
    n_parties: int = 2
    delta: float = 0.1
    gamma: float = 0.1
    decoy_count: int = 16
    threshold: float = 0.0
    attack: AttackConfig = AttackConfig()
    message_source: str = "random"
    messages_hex: tuple[str, ...] | None = None
    trials: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "protocol", _CANONICAL.get(self.protocol, self.protocol))

    @property
    def params(self) -> ProtocolParams:
        return ProtocolParams(self.delta, self.gamma, self.decoy_count, self.threshold)

    @property
    def transmitted_length(self) -> int:
        """Physical sequence length sent to the middle party."""
        return 2 * self.message_length if self.protocol == "xor" else self.message_length

    def validate(self) -> None:
        if self.protocol not in set(PROTOCOLS) | set(_CANONICAL.values()):
            raise ContractError(f"protocol: unknown value {self.protocol!r}")
        if self.protocol.startswith("mdi_qd"):
            if self.n_parties != 2:
                raise ContractError("n_parties: dialogue protocols take exactly 2")
        elif self.n_parties < 3:
            raise ContractError("n_parties: conference/xor need at least 3")
        if self.message_length < 1:
            raise ContractError("message_length: must be >= 1")
        if self.trials < 1:
            raise ContractError("trials: must be >= 1")
        self.params  # range checks
        # Sampled check counts below ~10 make the estimation ceremonies
        # statistically meaningless; reject such configurations up front.
        if math.floor(self.delta * self.transmitted_length) < MIN_SAMPLED_POSITIONS:
            raise ContractError(
                "message_length: too small for delta "
                f"(need delta * transmitted length >= {MIN_SAMPLED_POSITIONS}, got "
                f"{self.delta * self.transmitted_length:.1f})"
            )
        if self.message_source not in ("random", "hex"):
            raise ContractError(f"message_source: unknown value {self.message_source!r}")
        if self.message_source == "hex":
            if not self.messages_hex or len(self.messages_hex) != self.n_parties:
                raise ContractError("messages_hex: need one hex string per party")
            for text in self.messages_hex:
                _hex_to_bits(text, self.message_length)  # raises on bad input
        elif self.messages_hex is not None:
            raise ContractError("messages_hex: only valid with message_source='hex'")

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "message_length": self.message_length,
            "n_parties": self.n_parties,
            "delta": self.delta,
            "gamma": self.gamma,
            "decoy_count": self.decoy_count,
            "threshold": self.threshold,
            "attack": self.attack.to_dict(),
            "message_source": self.message_source,
            "messages_hex": list(self.messages_hex) if self.messages_hex else None,
            "trials": self.trials,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {
            "protocol",
            "message_length",
            "n_parties",
            "delta",
            "gamma",
            "decoy_count",
            "threshold",
            "attack",
            "message_source",
            "messages_hex",
            "trials",
            "seed",
        }
        extra = set(data) - known - {"trial_index"}
        if extra:
            raise ContractError(f"config: unknown fields {sorted(extra)}")
        kwargs = {k: v for k, v in data.items() if k in known}
        if "attack" in kwargs and kwargs["attack"] is not None:
            kwargs["attack"] = AttackConfig.from_dict(kwargs["attack"])
        elif "attack" in kwargs:
            kwargs["attack"] = AttackConfig()
        if kwargs.get("messages_hex"):
            kwargs["messages_hex"] = tuple(kwargs["messages_hex"])
        try:
            config = cls(**kwargs)
        except TypeError as exc:
            raise ContractError(f"config: {exc}") from exc
        config.validate()
        return config


def _hex_to_bits(text: str, length: int) -> np.ndarray:
    """Hex literal -> bit vector, most significant bit first."""
    expected = (length + 3) // 4
    if len(text) != expected:
        raise ContractError(
            f"messages_hex: need exactly {expected} hex digits for {length} bits"
        )
    try:
        value = int(text, 16)
    except ValueError as exc:
        raise ContractError(f"messages_hex: invalid hex literal {text!r}") from exc
    if value >> length:
        raise ContractError("messages_hex: pad bits beyond message_length must be 0")
    return np.array([(value >> (length - 1 - i)) & 1 for i in range(length)], dtype=np.uint8)


def trial_messages(config: RunConfig, trial: int) -> list[np.ndarray]:
    """The true per-party messages for one trial."""
    n = config.n_parties
    if config.message_source == "hex":
        return [_hex_to_bits(t, config.message_length) for t in config.messages_hex]
    rng = derive_rng(config.seed, trial, 0)
    return [random_bits(rng, config.message_length) for _ in range(n)]


def execute_trial(config: RunConfig, trial: int = 0) -> Transcript:
    """Run one trial; the embedded config makes the transcript replayable."""
    messages = trial_messages(config, trial)
    rng = derive_rng(config.seed, trial, 1)
    snapshot = config.to_dict()
    snapshot["trial_index"] = trial
    params = config.params
    if config.protocol == "mdi_qd_original":
        return run_mdi_qd_original(*messages, config.attack, rng, params, snapshot)
    if config.protocol == "mdi_qd_modified":
        return run_mdi_qd_modified(*messages, config.attack, rng, params, snapshot)
    if config.protocol == "conferenceN":
        return run_conference(messages, config.attack, rng, params, snapshot)
    if config.protocol == "xor":
        return run_xor(messages, config.attack, rng, params, snapshot)
    raise ContractError(f"protocol: unknown value {config.protocol!r}")


def _trial_worker(args: tuple) -> dict:
    config_dict, trial = args
    config = RunConfig.from_dict(config_dict)
    return execute_trial(config, trial).to_dict()


def run_trials(
    config: RunConfig, workers: int = 1, trial_indices: list[int] | None = None
) -> list[dict]:
    """Execute the configured trials; results are identical for any workers."""
    config.validate()
    indices = trial_indices if trial_indices is not None else list(range(config.trials))
    if workers <= 1:
        return [execute_trial(config, t).to_dict() for t in indices]
    jobs = [(config.to_dict(), t) for t in indices]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_trial_worker, jobs))
