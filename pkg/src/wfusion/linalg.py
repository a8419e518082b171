"""Small dense complex linear algebra for state vectors and propagators."""

import math
from typing import Callable, Sequence

import numpy as np

from . import kernels

HERMITIAN_TOL = 1e-12
NORM_FAIL_TOL = 1e-6
MAX_EMBED_QUBITS = 12


class NumericalError(RuntimeError):
    """Raised when an integration loses norm beyond tolerance (step too large)."""


def is_hermitian(H, tol: float = HERMITIAN_TOL) -> bool:
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        return False
    scale = max(1.0, float(np.max(np.abs(H))) if H.size else 1.0)
    return bool(np.max(np.abs(H - H.conj().T), initial=0.0) <= tol * scale)


def _require_hermitian(H, tol=HERMITIAN_TOL):
    H = np.asarray(H, dtype=np.complex128)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {H.shape}")
    if not is_hermitian(H, tol):
        dev = float(np.max(np.abs(H - H.conj().T)))
        raise ValueError(f"operator is not Hermitian: max |H - H^dagger| = {dev:.3e}")
    return H


def matrix_exponential(H, t: float) -> np.ndarray:
    """Return ``exp(-i H t)`` for Hermitian ``H`` via eigendecomposition."""
    H = _require_hermitian(H)
    w, V = np.linalg.eigh(H)
    return (V * np.exp(-1j * w * t)) @ V.conj().T


def _step_count(t_final, dt):
    if not dt > 0:
        raise ValueError("dt must be positive")
    if t_final < 0:
        raise ValueError("t_final must be non-negative")
    return max(1, math.ceil(t_final / dt - 1e-9)) if t_final > 0 else 0


def _check_norm(psi0, psi):
    n0 = np.linalg.norm(psi0, axis=0)
    n1 = np.linalg.norm(psi, axis=0)
    drift = float(np.max(np.abs(n1 - n0)))
    if drift > NORM_FAIL_TOL:
        raise NumericalError(f"norm drift {drift:.3e} exceeds {NORM_FAIL_TOL:g}; reduce dt")
    return drift


def integrate_schrodinger(H_of_t: Callable[[float], np.ndarray], psi0, t_final: float,
                          dt: float, check_hermitian: bool = True) -> np.ndarray:
    """Classical RK4 for ``i d(psi)/dt = H(t) psi``.

    The step is shrunk so that an integer number of steps lands on
    ``t_final`` exactly. ``psi0`` may be a vector or a matrix of column states.
    Raises :class:`NumericalError` when the norm drifts by more than 1e-6.
    """
    psi0 = np.asarray(psi0, dtype=np.complex128)
    n = _step_count(t_final, dt)
    if n == 0:
        return psi0.copy()
    h = t_final / n

    def rhs(t, y):
        H = np.asarray(H_of_t(t), dtype=np.complex128)
        if check_hermitian:
            _require_hermitian(H, 1e-10)
        return -1j * (H @ y)

    psi = psi0.copy()
    for step in range(n):
        t = step * h
        k1 = rhs(t, psi)
        k2 = rhs(t + 0.5 * h, psi + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, psi + 0.5 * h * k2)
        k4 = rhs(t + h, psi + h * k3)
        psi = psi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    _check_norm(psi0, psi)
    return psi


def integrate_two_tone(X, coupling: float, omega: float, psi0, t_final: float,
                       dt: float, jit=None) -> np.ndarray:
    """RK4 specialised to ``H(t) = coupling * (exp(-i omega t) X + h.c.)``.

    Same scheme and step selection as :func:`integrate_schrodinger`, routed
    through the accelerated kernel.
    """
    psi0 = np.asarray(psi0, dtype=np.complex128)
    n = _step_count(t_final, dt)
    if n == 0:
        return psi0.copy()
    psi = kernels.rk4_two_tone(X, coupling, omega, psi0, 0.0, t_final / n, n, jit=jit)
    _check_norm(psi0, psi)
    return psi


def _check_positions(positions, total_qubits, k):
    positions = [int(p) for p in positions]
    if len(positions) != k:
        raise ValueError(f"operator acts on {k} qubits but {len(positions)} positions given")
    if len(set(positions)) != len(positions):
        raise ValueError(f"duplicate qubit positions: {positions}")
    if any(p < 0 or p >= total_qubits for p in positions):
        raise ValueError(f"positions {positions} out of range for {total_qubits} qubits")
    return positions


def _qubits_of(U):
    U = np.asarray(U, dtype=np.complex128)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {U.shape}")
    k = int(round(math.log2(U.shape[0]))) if U.shape[0] > 0 else -1
    if k < 0 or 2 ** k != U.shape[0]:
        raise ValueError(f"operator dimension {U.shape[0]} is not a power of two")
    return U, k


def embed_operator(U, positions: Sequence[int], total_qubits: int) -> np.ndarray:
    """Lift a k-qubit operator onto ``total_qubits`` qubits, acting on ``positions``.

    Qubit 0 is the most significant tensor factor. ``positions[i]`` receives
    the i-th tensor factor of ``U``.
    """
    U, k = _qubits_of(U)
    positions = _check_positions(positions, total_qubits, k)
    if total_qubits > MAX_EMBED_QUBITS:
        raise ValueError(f"dense embedding limited to {MAX_EMBED_QUBITS} qubits; use apply_on_qubits")
    n = total_qubits
    rest = [q for q in range(n) if q not in positions]
    full = np.kron(U, np.eye(2 ** (n - k), dtype=np.complex128)).reshape((2,) * (2 * n))
    # current axis order is (positions..., rest...) for both row and column indices
    order = positions + rest
    perm = [order.index(q) for q in range(n)]
    full = full.transpose(perm + [n + p for p in perm])
    return full.reshape(2 ** n, 2 ** n)


def apply_on_qubits(U, psi, positions: Sequence[int], total_qubits: int) -> np.ndarray:
    """Apply a k-qubit operator to a state vector without forming the full matrix."""
    U, k = _qubits_of(U)
    positions = _check_positions(positions, total_qubits, k)
    psi = np.asarray(psi, dtype=np.complex128).reshape((2,) * total_qubits)
    out = np.tensordot(U.reshape((2,) * (2 * k)), psi, axes=(list(range(k, 2 * k)), positions))
    # tensordot puts the k output axes first
    rest = [q for q in range(total_qubits) if q not in positions]
    order = positions + rest
    out = out.transpose([order.index(q) for q in range(total_qubits)])
    return out.reshape(-1)


def is_unitary(U, tol: float = 1e-12) -> bool:
    U = np.asarray(U)
    return bool(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))) <= tol)
