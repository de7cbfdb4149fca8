"""Reference outcome tables and their Born-rule verification.

For product preparations over the shared key's two basis classes the joint
measurement distribution follows two laws:

* Z row with bits j: probability 1/2 on both signs of index
  min(j, 2^n - 1 - j), nothing anywhere else;
* X row with bits v: probability 1 / 2^(n-1) on every index at the sign
  equal to XOR(v), nothing at the opposite sign.

``verify_outcome_tables`` recomputes every row of the two-, three-, and
four-party tables from first principles (state construction + Born rule) and
diffs the result against these laws entry by entry.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .qsim import (
    BASIS_X,
    BASIS_Z,
    Outcome,
    QubitSpec,
    bits_to_index,
    build_joint_basis,
    materialize,
    outcome_distribution,
    tensor,
)

TABLE_ATOL = 1e-12
TABLE_SIZES = (2, 3, 4)


def expected_row(bits: tuple[int, ...], basis: str) -> np.ndarray:
    """Law-predicted outcome distribution for one product preparation."""
    n = len(bits)
    probs = np.zeros(2**n)
    if basis == BASIS_Z:
        j = bits_to_index(bits)
        j_hat = min(j, 2**n - 1 - j)
        probs[2 * j_hat] = 0.5
        probs[2 * j_hat + 1] = 0.5
    else:
        sign = int(np.bitwise_xor.reduce(np.asarray(bits, dtype=np.uint8)))
        for index in range(2 ** (n - 1)):
            probs[2 * index + sign] = 1.0 / 2 ** (n - 1)
    return probs


def computed_row(bits: tuple[int, ...], basis: str) -> np.ndarray:
    """Born-rule distribution of the actual product state."""
    state = tensor([materialize(QubitSpec(basis, b)) for b in bits])
    return outcome_distribution(state, build_joint_basis(len(bits)))


@dataclass(frozen=True)
class TableDiff:
    """One table entry where computation and reference disagree."""

    n_parties: int
    basis: str
    bits: tuple[int, ...]
    code: int
    expected: float
    computed: float

    @property
    def label(self) -> str:
        states = "".join(QubitSpec(self.basis, b).label for b in self.bits)
        return f"N={self.n_parties} {states} {Outcome.from_code(self.code).label}"


def verify_outcome_tables(
    sizes: tuple[int, ...] = TABLE_SIZES, atol: float = TABLE_ATOL
) -> tuple[list[dict], list[TableDiff]]:
    """Recompute every table row; returns (all entry records, diffs)."""
    entries: list[dict] = []
    diffs: list[TableDiff] = []
    for n in sizes:
        for basis in (BASIS_Z, BASIS_X):
            for bits in product((0, 1), repeat=n):
                expected = expected_row(bits, basis)
                computed = computed_row(bits, basis)
                for code in range(2**n):
                    ok = abs(computed[code] - expected[code]) <= atol
                    entries.append(
                        {
                            "n_parties": n,
                            "basis": basis,
                            "bits": "".join(str(b) for b in bits),
                            "outcome": Outcome.from_code(code).label,
                            "expected": float(expected[code]),
                            "computed": float(computed[code]),
                            "ok": ok,
                        }
                    )
                    if not ok:
                        diffs.append(
                            TableDiff(
                                n, basis, bits, code, float(expected[code]), float(computed[code])
                            )
                        )
    return entries, diffs


def tables_to_csv(entries: list[dict]) -> str:
    lines = ["n_parties,basis,bits,outcome,expected,computed,ok"]
    for e in entries:
        lines.append(
            f"{e['n_parties']},{e['basis']},{e['bits']},{e['outcome']},"
            f"{e['expected']:.12g},{e['computed']:.12g},{e['ok']}"
        )
    return "\n".join(lines) + "\n"


def tables_summary(entries: list[dict], diffs: list[TableDiff]) -> dict:
    return {
        "entries": len(entries),
        "diffs": [
            {
                "entry": d.label,
                "expected": d.expected,
                "computed": d.computed,
            }
            for d in diffs
        ],
        "all_pass": not diffs,
    }
