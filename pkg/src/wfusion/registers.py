"""Compact and full-vector models of fused W registers.

A :class:`CompactFusionState` splits the register into spectator groups and
a few explicitly tracked extracted atoms ("slots"). A group of ``k`` atoms
that all started in the same W state only ever holds zero or one
excitation, and in the one-excitation case it is always the symmetric
combination. Each group is therefore a single 0/1 flag.

Amplitudes are stored against *normalised* group states, i.e. the
``sqrt(k)`` multiplicity of the unnormalised ket ``|(k-1)_g, e>`` is folded
into the amplitude. With that convention the squared norm is simply the sum
of ``|amp|**2``.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

Pattern = tuple  # tuple[int, ...] of 0/1 per spectator group
Bits = tuple  # tuple[int, ...] of 0/1 per extracted slot

MAX_FULL_QUBITS = 14
_ZERO = 1e-15


@dataclass(frozen=True)
class GroupSpec:
    """Spectator group sizes and the labels of the extracted slots still present."""

    sizes: tuple
    slots: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        object.__setattr__(self, "slots", tuple(str(s) for s in self.slots))
        if any(s < 0 for s in self.sizes):
            raise ValueError(f"group sizes must be >= 0, got {self.sizes}")
        if len(set(self.slots)) != len(self.slots):
            raise ValueError(f"duplicate slot labels {self.slots}")

    @property
    def n_atoms(self) -> int:
        return sum(self.sizes) + len(self.slots)

    @property
    def extracted_count(self) -> int:
        return len(self.slots)


@dataclass(frozen=True)
class CompactFusionState:
    spec: GroupSpec
    terms: Mapping = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        ng, ns = len(self.spec.sizes), len(self.spec.slots)
        for (pattern, bits), amp in self.terms.items():
            pattern, bits = tuple(int(p) for p in pattern), tuple(int(b) for b in bits)
            if len(pattern) != ng or len(bits) != ns:
                raise ValueError(f"term {(pattern, bits)} does not match {self.spec}")
            if any(p not in (0, 1) for p in pattern) or any(b not in (0, 1) for b in bits):
                raise ValueError(f"term {(pattern, bits)} is not a 0/1 assignment")
            if any(p and size == 0 for p, size in zip(pattern, self.spec.sizes)):
                raise ValueError(f"pattern {pattern} excites an empty group")
            amp = complex(amp)
            if not (math.isfinite(amp.real) and math.isfinite(amp.imag)):
                raise ValueError("non-finite amplitude")
            clean[(pattern, bits)] = clean.get((pattern, bits), 0j) + amp
        object.__setattr__(self, "terms", clean)

    @property
    def groups(self) -> tuple:
        return self.spec.sizes

    @property
    def slots(self) -> tuple:
        return self.spec.slots

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.terms.values()))

    def amplitude(self, pattern: Sequence[int], bits: Sequence[int] = ()) -> complex:
        return self.terms.get((tuple(pattern), tuple(bits)), 0j)

    def scaled(self, factor: complex) -> CompactFusionState:
        return _trusted(self.spec, {k: factor * v for k, v in self.terms.items()})

    def normalized(self) -> CompactFusionState:
        n = self.norm()
        if n == 0:
            raise ValueError("cannot normalise the zero state")
        return self.scaled(1.0 / n)

    def pruned(self, tol: float = _ZERO) -> CompactFusionState:
        return _trusted(self.spec, {k: v for k, v in self.terms.items() if abs(v) > tol})

    def to_dict(self) -> dict:
        """JSON-friendly form: sizes, slot labels and a sorted term list."""
        return {
            "groups": list(self.spec.sizes),
            "slots": list(self.spec.slots),
            "terms": [
                {"pattern": "".join(map(str, p)) + ("|" + "".join("ge"[b] for b in bits) if bits else ""),
                 "re": amp.real, "im": amp.imag}
                for (p, bits), amp in sorted(self.terms.items())
            ],
        }


def _trusted(spec, terms):
    """Build a state from terms already known to satisfy the invariants."""
    st = object.__new__(CompactFusionState)
    object.__setattr__(st, "spec", spec)
    object.__setattr__(st, "terms", terms)
    return st


def tensor(*states: CompactFusionState) -> CompactFusionState:
    """Concatenate groups and slots of independent registers."""
    sizes, slots = (), ()
    terms = {((), ()): 1.0 + 0j}
    for st in states:
        sizes += st.spec.sizes
        slots += st.spec.slots
        terms = {
            (p1 + p2, b1 + b2): a1 * a2
            for (p1, b1), a1 in terms.items()
            for (p2, b2), a2 in st.terms.items()
        }
    return CompactFusionState(GroupSpec(sizes, slots), terms)


def standard_w(n: int) -> CompactFusionState:
    """|W_n> as a single spectator group of ``n`` atoms."""
    if int(n) != n or n < 1:
        raise ValueError(f"W state needs n >= 1, got {n}")
    return CompactFusionState(GroupSpec((n,)), {((1,), ()): 1.0})


def split_w(n: int, slot: str) -> CompactFusionState:
    """|W_n> with one atom pulled out into ``slot``: (|(n-1)_g>|e> + |(n-2)_g,e>|g>)/sqrt(n)."""
    if int(n) != n or n < 1:
        raise ValueError(f"W state needs n >= 1, got {n}")
    terms = {((0,), (1,)): 1.0 / math.sqrt(n)}
    if n > 1:
        terms[((1,), (0,))] = math.sqrt((n - 1) / n)
    return CompactFusionState(GroupSpec((n - 1,), (slot,)), terms)


def ground_slot(slot: str) -> CompactFusionState:
    return CompactFusionState(GroupSpec((), (slot,)), {((), (0,)): 1.0})


def _check_protocol_size(*sizes):
    for s in sizes:
        if int(s) != s or s < 2:
            raise ValueError(f"fusion inputs must have size >= 2, got {sizes}")


def initial_two_fusion_state(N: int, M: int) -> CompactFusionState:
    """W_N (x) W_M (x) |g> with atoms 1, 2 and the ancilla 3 as slots."""
    _check_protocol_size(N, M)
    return tensor(split_w(N, "1"), split_w(M, "2"), ground_slot("3"))


def initial_three_fusion_state(N: int, M: int, T: int) -> CompactFusionState:
    _check_protocol_size(N, M, T)
    return tensor(split_w(N, "1"), split_w(M, "2"), split_w(T, "3"))


def _bits_index(bits):
    idx = 0
    for b in bits:
        idx = 2 * idx + b
    return idx


def _index_bits(idx, k):
    return tuple((idx >> (k - 1 - j)) & 1 for j in range(k))


def apply_extracted_propagator(state: CompactFusionState, U) -> CompactFusionState:
    """Apply ``U`` to the slot factor of every term; spectators are untouched."""
    U = np.asarray(U, dtype=np.complex128)
    k = len(state.slots)
    if U.shape != (2 ** k, 2 ** k):
        raise ValueError(f"propagator shape {U.shape} does not match {k} extracted slots")
    blocks: dict = {}
    for (pattern, bits), amp in state.terms.items():
        vec = blocks.setdefault(pattern, np.zeros(2 ** k, dtype=np.complex128))
        vec[_bits_index(bits)] += amp
    terms = {}
    for pattern, vec in blocks.items():
        out = U @ vec
        for idx, amp in enumerate(out):
            if amp != 0:
                terms[(pattern, _index_bits(idx, k))] = complex(amp)
    return _trusted(state.spec, terms)


@dataclass(frozen=True)
class MeasurementOutcome:
    measured: tuple
    bits: tuple
    probability: float
    residual: CompactFusionState | None

    @property
    def label(self) -> str:
        return "".join("ge"[b] for b in self.bits)


def _measured_layout(state, slots):
    slots = tuple(str(s) for s in slots)
    if not slots:
        raise ValueError("nothing to measure")
    unknown = [s for s in slots if s not in state.slots]
    if unknown:
        raise ValueError(f"can only measure extracted slots {state.slots}; got {unknown}")
    if len(set(slots)) != len(slots):
        raise ValueError(f"duplicate slots {slots}")
    where = [state.slots.index(s) for s in slots]
    keep = [j for j in range(len(state.slots)) if j not in where]
    spec = GroupSpec(state.spec.sizes, tuple(state.slots[j] for j in keep))
    return where, keep, spec


def partition(state: CompactFusionState, slots: Sequence[str]) -> dict:
    """Split ``state`` by the readout of ``slots`` in one pass.

    Returns ``{bits: unnormalised residual}`` for every bitstring that has
    at least one term.
    """
    where, keep, spec = _measured_layout(state, slots)
    parts: dict = {}
    for (pattern, tbits), amp in state.terms.items():
        key = tuple(tbits[j] for j in where)
        parts.setdefault(key, {})[(pattern, tuple(tbits[j] for j in keep))] = amp
    return {k: _trusted(spec, v) for k, v in parts.items()}


def project(state: CompactFusionState, slots: Sequence[str], bits: Sequence[int]):
    """Unnormalised residual and probability for reading ``bits`` on ``slots``."""
    where, keep, spec = _measured_layout(state, slots)
    want = tuple(int(b) for b in bits)
    terms = {}
    for (pattern, tbits), amp in state.terms.items():
        if tuple(tbits[j] for j in where) == want:
            terms[(pattern, tuple(tbits[j] for j in keep))] = amp
    residual = _trusted(spec, terms)
    return residual, residual.norm() ** 2


def measure(state: CompactFusionState, slots: Sequence[str], keep_zero: bool = False) -> list:
    """Projective measurement of extracted ``slots`` in the g/e basis.

    Returns one :class:`MeasurementOutcome` per bitstring (in binary order,
    g before e), each with a normalised residual. Zero-probability outcomes
    are dropped unless ``keep_zero``.
    """
    slots = tuple(str(s) for s in slots)
    total = state.norm() ** 2
    outcomes = []
    for bits in itertools.product((0, 1), repeat=len(slots)):
        residual, p = project(state, slots, bits)
        p /= total
        if p <= _ZERO ** 2 * 10:
            if keep_zero:
                outcomes.append(MeasurementOutcome(slots, bits, 0.0, None))
            continue
        outcomes.append(MeasurementOutcome(slots, bits, p, residual.normalized()))
    return outcomes


# ---------------------------------------------------------------------------
# reference states, fidelity and phase correction
# ---------------------------------------------------------------------------

def standard_w_like(spec: GroupSpec) -> CompactFusionState:
    """The standard W over every atom in ``spec`` (groups and slots)."""
    n = spec.n_atoms
    if n == 0:
        raise ValueError("empty register")
    ng, ns = len(spec.sizes), len(spec.slots)
    terms = {}
    for g, size in enumerate(spec.sizes):
        if size:
            p = tuple(int(j == g) for j in range(ng))
            terms[(p, (0,) * ns)] = math.sqrt(size / n)
    for s in range(ns):
        terms[((0,) * ng, tuple(int(j == s) for j in range(ns)))] = 1.0 / math.sqrt(n)
    return CompactFusionState(spec, terms)


def product_w_like(spec: GroupSpec) -> CompactFusionState:
    """One independent W per spectator group; slots in |g>."""
    if not spec.sizes or any(s == 0 for s in spec.sizes):
        raise ValueError("every group needs at least one atom")
    return CompactFusionState(spec, {((1,) * len(spec.sizes), (0,) * len(spec.slots)): 1.0})


def overlap(state: CompactFusionState, reference: CompactFusionState) -> complex:
    if state.spec != reference.spec:
        raise ValueError(f"register layouts differ: {state.spec} vs {reference.spec}")
    return sum(reference.terms[k].conjugate() * v for k, v in state.terms.items() if k in reference.terms)


def fidelity(state: CompactFusionState, reference: CompactFusionState) -> float:
    """``|<reference|state>|**2`` for normalised inputs."""
    return abs(overlap(state, reference)) ** 2 / (state.norm() ** 2 * reference.norm() ** 2)


def _components(state: CompactFusionState):
    """(kind, index, term key, amplitude) for each single-excitation component."""
    ng, ns = len(state.groups), len(state.slots)
    out = []
    for (pattern, bits), amp in state.terms.items():
        if abs(amp) <= _ZERO:
            continue
        exc = sum(pattern) + sum(bits)
        if exc != 1:
            raise ValueError("phase correction needs a single-excitation state")
        if sum(pattern):
            out.append(("group", pattern.index(1), amp, state.groups[pattern.index(1)]))
        else:
            out.append(("slot", bits.index(1), amp, 1))
    return out


def correction_phases(state: CompactFusionState, tol: float = 1e-9) -> dict:
    """Per-component phase pulses that align a single-excitation state.

    Components whose phases agree within ``tol`` are clustered; the cluster
    covering the most atoms is left alone, so the fewest atoms are pulsed.
    Keys are ``("group", i)`` or ``("slot", label)``; values are the phase
    applied to ``|e>`` of every atom in that component.
    """
    comps = _components(state)
    if not comps:
        raise ValueError("state has no single-excitation component")
    clusters: list = []
    for comp in comps:
        phi = cmath.phase(comp[2])
        for cl in clusters:
            if abs(math.remainder(phi - cl[0], 2 * math.pi)) <= tol:
                cl[1] += comp[3]
                break
        else:
            clusters.append([phi, comp[3]])
    ref_phase = max(clusters, key=lambda cl: cl[1])[0]
    pulses = {}
    for kind, idx, amp, _ in comps:
        dphi = math.remainder(ref_phase - cmath.phase(amp), 2 * math.pi)
        if abs(dphi) > tol:
            key = (kind, idx if kind == "group" else state.slots[idx])
            pulses[key] = dphi
    return pulses


def apply_phase_pulses(state: CompactFusionState, pulses: Mapping) -> CompactFusionState:
    """Apply ``diag(1, exp(i phi))`` to every atom of the listed components."""
    terms = {}
    for (pattern, bits), amp in state.terms.items():
        phi = 0.0
        for g, p in enumerate(pattern):
            if p:
                phi += pulses.get(("group", g), 0.0)
        for s, b in enumerate(bits):
            if b:
                phi += pulses.get(("slot", state.slots[s]), 0.0)
        terms[(pattern, bits)] = amp * cmath.exp(1j * phi)
    return _trusted(state.spec, terms)


def remove_global_phase(state: CompactFusionState) -> CompactFusionState:
    """Rotate so the largest amplitude (earliest key on ties) is real positive."""
    if not state.terms:
        return state
    key = max(sorted(state.terms), key=lambda k: abs(state.terms[k]))
    amp = state.terms[key]
    if abs(amp) == 0:
        return state
    return state.scaled(abs(amp) / amp)


def align_phases(state: CompactFusionState) -> CompactFusionState:
    """Local phase pulses followed by global-phase removal."""
    return remove_global_phase(apply_phase_pulses(state, correction_phases(state)))


# ---------------------------------------------------------------------------
# full state-vector oracle representation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FullRegisterState:
    qubit_count: int
    state: np.ndarray
    layout: Mapping

    def norm(self) -> float:
        return float(np.linalg.norm(self.state))


def w_vector(n: int) -> np.ndarray:
    """Dense |W_n> on ``n`` qubits (qubit 0 most significant, |e> = 1)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    v = np.zeros(2 ** n, dtype=np.complex128)
    for q in range(n):
        v[1 << (n - 1 - q)] = 1.0 / math.sqrt(n)
    return v


def _group_vector(size, excited):
    if size == 0:
        return np.ones(1, dtype=np.complex128)
    if excited:
        return w_vector(size)
    v = np.zeros(2 ** size, dtype=np.complex128)
    v[0] = 1.0
    return v


def expand_to_full(state: CompactFusionState, max_qubits: int = MAX_FULL_QUBITS) -> FullRegisterState:
    """Write out the explicit 2**n vector: groups in order, then slots."""
    n = state.spec.n_atoms
    if n > max_qubits:
        raise ValueError(f"{n} qubits exceeds the full-vector guard of {max_qubits}")
    vec = np.zeros(2 ** n, dtype=np.complex128)
    for (pattern, bits), amp in state.terms.items():
        term = np.ones(1, dtype=np.complex128)
        for size, p in zip(state.groups, pattern):
            term = np.kron(term, _group_vector(size, p))
        for b in bits:
            term = np.kron(term, np.array([1 - b, b], dtype=np.complex128))
        vec += amp * term
    layout, pos = {}, 0
    for g, size in enumerate(state.groups):
        layout[f"group{g}"] = tuple(range(pos, pos + size))
        pos += size
    for s in state.slots:
        layout[f"slot{s}"] = (pos,)
        pos += 1
    return FullRegisterState(n, vec, layout)


def measure_qubits(psi, positions: Iterable[int], bits: Iterable[int], total_qubits: int):
    """Project qubits onto ``bits``; return (probability, unnormalised residual).

    The residual keeps the unmeasured qubits in their original order.
    """
    positions = list(positions)
    t = np.asarray(psi, dtype=np.complex128).reshape((2,) * total_qubits)
    index = [slice(None)] * total_qubits
    for q, b in zip(positions, bits):
        index[q] = int(b)
    residual = t[tuple(index)].reshape(-1)
    return float(np.vdot(residual, residual).real), residual


def state_fidelity(a, b) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    return float(abs(np.vdot(a, b)) ** 2 / (np.vdot(a, a).real * np.vdot(b, b).real))
