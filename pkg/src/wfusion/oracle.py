"""Brute-force state-vector version of both protocols for small registers.

Built independently of the compact model: dense W vectors, the numerically
exponentiated effective Hamiltonian lifted onto the register, and projective
measurement of physical qubits. Remaining qubits come out in the compact
model's order (spectator groups, then unmeasured slots).
"""

import numpy as np

from .cavity import effective_propagator_numeric, magic_time
from .linalg import apply_on_qubits, embed_operator
from .registers import MAX_FULL_QUBITS, measure_qubits, w_vector
from .protocols import normalize_protocol, TWO


def _register(sizes, ancilla):
    psi = np.ones(1, dtype=np.complex128)
    extracted, offset = [], 0
    for n in sizes:
        psi = np.kron(psi, w_vector(n))
        extracted.append(offset + n - 1)
        offset += n
    if ancilla:
        psi = np.kron(psi, np.array([1.0, 0.0], dtype=np.complex128))
        extracted.append(offset)
        offset += 1
    return psi, extracted, offset


def full_branches(protocol: str, sizes, lambda_t=None, dense_embed: bool | None = None) -> dict:
    """``{outcome label: (probability, normalised residual vector or None)}``.

    ``dense_embed`` forces building the full propagator matrix; by default it
    is used up to 10 qubits and a tensor contraction beyond that.
    """
    protocol = normalize_protocol(protocol)
    lt = magic_time() if lambda_t is None else lambda_t
    psi, extracted, n = _register(sizes, ancilla=protocol == TWO)
    if n > MAX_FULL_QUBITS:
        raise ValueError(f"{n} qubits exceeds the oracle guard")
    U = effective_propagator_numeric(lt)
    if dense_embed is None:
        dense_embed = n <= 10
    if dense_embed:
        psi = embed_operator(U, extracted, n) @ psi
    else:
        psi = apply_on_qubits(U, psi, extracted, n)
    if protocol == TWO:
        readouts = [(extracted[:2], (0, 1)), (extracted[:2], (1, 0)), (extracted[:2], (1, 1)),
                    (extracted, (0, 0, 1)), (extracted, (0, 0, 0))]
    else:
        readouts = [(extracted, ((i >> 2) & 1, (i >> 1) & 1, i & 1)) for i in range(8)]
    out = {}
    for qubits, bits in readouts:
        p, res = measure_qubits(psi, qubits, bits, n)
        label = "".join("ge"[b] for b in bits)
        out[label] = (p, res / np.sqrt(p) if p > 1e-30 else None)
    return out
