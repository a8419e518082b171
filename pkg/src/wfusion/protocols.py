"""Two- and three-input W fusion: branch enumeration and classification."""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from functools import lru_cache

from .cavity import effective_propagator, magic_time
from .registers import (
    CompactFusionState,
    align_phases,
    apply_extracted_propagator,
    correction_phases,
    fidelity,
    initial_three_fusion_state,
    initial_two_fusion_state,
    partition,
    product_w_like,
    standard_w_like,
)

TWO = "two-fusion"
THREE = "three-fusion"


class OutcomeClass(str, enum.Enum):
    SUCCESS = "Success"
    BYPRODUCT = "ByproductSuccess"
    RECYCLABLE = "Recyclable"
    HARD_FAILURE = "HardFailure"


def normalize_protocol(protocol: str) -> str:
    p = str(protocol).strip().lower()
    if p in ("two", "2", "two-fusion", "fuse2"):
        return TWO
    if p in ("three", "3", "three-fusion", "fuse3"):
        return THREE
    raise ValueError(f"unknown protocol {protocol!r}")


def normalize_outcome(protocol: str, bitstring: str) -> str:
    """Canonical g/e label; the two-fusion atom-3 readout may be written ``gg->e``."""
    protocol = normalize_protocol(protocol)
    s = str(bitstring).strip().lower()
    for arrow in ("->", "→", ">", ",", " "):
        s = s.replace(arrow, "")
    if not s or set(s) - {"g", "e"}:
        raise ValueError(f"malformed outcome {bitstring!r}")
    if protocol == TWO:
        if not (len(s) == 2 and s != "gg") and not (len(s) == 3 and s.startswith("gg")):
            raise ValueError(f"two-fusion outcome must be ge, eg, ee, gge or ggg; got {bitstring!r}")
    elif len(s) != 3:
        raise ValueError(f"three-fusion outcome needs three atoms; got {bitstring!r}")
    return s


def classify_outcome(protocol: str, bitstring: str) -> OutcomeClass:
    protocol = normalize_protocol(protocol)
    s = normalize_outcome(protocol, bitstring)
    if protocol == TWO:
        return {
            "ge": OutcomeClass.SUCCESS,
            "eg": OutcomeClass.SUCCESS,
            "ee": OutcomeClass.HARD_FAILURE,
            "gge": OutcomeClass.BYPRODUCT,
            "ggg": OutcomeClass.RECYCLABLE,
        }[s]
    n_exc = s.count("e")
    if n_exc == 2:
        return OutcomeClass.SUCCESS
    if n_exc == 0:
        return OutcomeClass.RECYCLABLE
    return OutcomeClass.HARD_FAILURE


def phase_correction(state: CompactFusionState, protocol: str, outcome: str) -> CompactFusionState:
    """Remove the relative phases of a success residual.

    Every atom of an off-phase component gets the same diagonal pulse, and
    the global phase is dropped.
    """
    cls = classify_outcome(protocol, outcome)
    if cls not in (OutcomeClass.SUCCESS, OutcomeClass.BYPRODUCT):
        raise ValueError(f"outcome {outcome!r} is {cls.value}; only success residuals are corrected")
    return align_phases(state)


def _check_sizes(*sizes):
    if any(int(s) != s or s < 2 for s in sizes):
        raise ValueError(f"fusion inputs must have size >= 2, got {sizes}")


def success_probability_two(N: int, M: int) -> float:
    _check_sizes(N, M)
    return 2.0 * (N + M - 1) / (3.0 * N * M)


def success_probability_three(N: int, M: int, T: int) -> float:
    _check_sizes(N, M, T)
    return (N + M + T - 3) / (N * M * T)


@dataclass
class Branch:
    outcome: str
    probability: float
    classification: OutcomeClass
    residual_sizes: list
    post_correction_fidelity: float | None
    residual: CompactFusionState | None = field(default=None, repr=False)
    pulsed_atoms: int = 0

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "probability": self.probability,
            "class": self.classification.value,
            "residual_sizes": list(self.residual_sizes),
            "fidelity": self.post_correction_fidelity,
            "pulsed_atoms": self.pulsed_atoms,
            "residual": None if self.residual is None else self.residual.to_dict(),
        }


@dataclass
class BranchReport:
    protocol: str
    inputs: tuple
    lambda_t: float
    branches: list

    def mass(self, cls: OutcomeClass) -> float:
        return sum(b.probability for b in self.branches if b.classification == cls)

    @property
    def success_probability(self) -> float:
        return self.mass(OutcomeClass.SUCCESS)

    @property
    def total_probability(self) -> float:
        return sum(b.probability for b in self.branches)

    def branch(self, outcome: str) -> Branch:
        key = normalize_outcome(self.protocol, outcome)
        for b in self.branches:
            if b.outcome == key:
                return b
        raise KeyError(outcome)

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "inputs": list(self.inputs),
            "lambda_t": self.lambda_t,
            "success_probability": self.success_probability,
            "class_probabilities": {c.value: self.mass(c) for c in OutcomeClass},
            "branches": [b.to_dict() for b in self.branches],
        }

    CSV_COLUMNS = ("protocol", "sizes", "outcome", "probability", "class", "residual_sizes", "fidelity")

    def csv_rows(self) -> list:
        return [
            {
                "protocol": self.protocol,
                "sizes": "x".join(map(str, self.inputs)),
                "outcome": b.outcome,
                "probability": b.probability,
                "class": b.classification.value,
                "residual_sizes": "x".join(map(str, b.residual_sizes)),
                "fidelity": b.post_correction_fidelity,
            }
            for b in self.branches
        ]

    def to_csv(self, fmt=repr) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=self.CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in self.csv_rows():
            writer.writerow({k: ("" if v is None else fmt(v) if isinstance(v, float) else v)
                             for k, v in row.items()})
        return buf.getvalue()


def _label(bits):
    return "".join("ge"[b] for b in bits)


def _branch(protocol, parts, bits, cls, sizes):
    residual = parts.get(bits)
    p = residual.norm() ** 2 if residual is not None else 0.0
    if p <= 1e-30:
        return Branch(_label(bits), 0.0, cls, sizes, None)
    residual = residual.normalized()
    fid, pulsed = None, 0
    if cls in (OutcomeClass.SUCCESS, OutcomeClass.BYPRODUCT):
        pulses = correction_phases(residual)
        pulsed = sum(residual.groups[k[1]] if k[0] == "group" else 1 for k in pulses)
        corrected = phase_correction(residual, protocol, _label(bits))
        fid = fidelity(corrected, standard_w_like(corrected.spec))
    elif cls is OutcomeClass.RECYCLABLE:
        fid = fidelity(residual, product_w_like(residual.spec))
    return Branch(_label(bits), p, cls, sizes, fid, residual, pulsed)


@lru_cache(maxsize=64)
def _propagator(lambda_t):
    return effective_propagator(lambda_t)


def fuse_two(N: int, M: int, lambda_t: float | None = None) -> BranchReport:
    """Enumerate the five measurement leaves of the ancilla-assisted fusion.

    Atoms 1 and 2 are read first; atom 3 is read only after ``gg``.
    """
    lt = magic_time() if lambda_t is None else float(lambda_t)
    evolved = apply_extracted_propagator(initial_two_fusion_state(N, M), _propagator(lt))
    leaves = [
        ((0, 1), OutcomeClass.SUCCESS, [N + M - 1]),
        ((1, 0), OutcomeClass.SUCCESS, [N + M - 1]),
        ((1, 1), OutcomeClass.HARD_FAILURE, []),
        ((0, 0, 1), OutcomeClass.BYPRODUCT, [N + M - 2]),
        ((0, 0, 0), OutcomeClass.RECYCLABLE, [N - 1, M - 1]),
    ]
    first = partition(evolved, ("1", "2"))
    parts = {bits: first[bits] for bits in first if bits != (0, 0)}
    if (0, 0) in first:
        parts.update({(0, 0) + b: r for b, r in partition(first[(0, 0)], ("3",)).items()})
    branches = [_branch(TWO, parts, bits, cls, sizes) for bits, cls, sizes in leaves]
    return BranchReport(TWO, (N, M), lt, branches)


def fuse_three(N: int, M: int, T: int, lambda_t: float | None = None) -> BranchReport:
    """Enumerate all eight readouts of the three extracted atoms."""
    lt = magic_time() if lambda_t is None else float(lambda_t)
    evolved = apply_extracted_propagator(initial_three_fusion_state(N, M, T), _propagator(lt))
    parts = partition(evolved, ("1", "2", "3"))
    branches = []
    for idx in range(8):
        bits = ((idx >> 2) & 1, (idx >> 1) & 1, idx & 1)
        cls = classify_outcome(THREE, _label(bits))
        if cls is OutcomeClass.SUCCESS:
            sizes = [N + M + T - 3]
        elif cls is OutcomeClass.RECYCLABLE:
            sizes = [N - 1, M - 1, T - 1]
        else:
            sizes = []
        branches.append(_branch(THREE, parts, bits, cls, sizes))
    return BranchReport(THREE, (N, M, T), lt, branches)


def fuse(protocol: str, sizes, lambda_t: float | None = None) -> BranchReport:
    protocol = normalize_protocol(protocol)
    sizes = tuple(int(s) for s in sizes)
    if protocol == TWO:
        if len(sizes) != 2:
            raise ValueError("two-fusion takes two input sizes")
        return fuse_two(*sizes, lambda_t=lambda_t)
    if len(sizes) != 3:
        raise ValueError("three-fusion takes three input sizes")
    return fuse_three(*sizes, lambda_t=lambda_t)
