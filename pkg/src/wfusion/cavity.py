"""Three atoms in a detuned cavity: full and effective Hamiltonians.

Atomic basis convention: qubit value 1 is the excited state |e>, atom 1 is
the most significant bit, so index ``b1*4 + b2*2 + b3``. The full
atom-cavity space is ``atoms (x) Fock(n_max)`` with the Fock index fastest.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .linalg import integrate_two_tone, matrix_exponential

N_ATOMS = 3
DISPERSIVE_RATIO = 10.0
DEFAULT_STEPS_PER_PERIOD = 64


def magic_time() -> float:
    """Dimensionless interaction ``lambda*t = 2*pi/9`` at which |A| = |B|."""
    return 2.0 * math.pi / 9.0


@dataclass(frozen=True)
class CavityParams:
    """Coupling ``g`` and detuning ``delta`` in rad/s, Fock cutoff ``n_max``."""

    g: float
    delta: float
    n_max: int = 3
    n_atoms: int = N_ATOMS

    def __post_init__(self):
        if not (self.g > 0 and math.isfinite(self.g)):
            raise ValueError(f"coupling g must be positive, got {self.g}")
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise ValueError(f"detuning delta must be positive, got {self.delta}")
        if int(self.n_max) != self.n_max or self.n_max < 3:
            raise ValueError(f"n_max must be an integer >= 3, got {self.n_max}")
        if self.n_atoms != N_ATOMS:
            raise ValueError("only three atoms are supported")

    @property
    def dispersive(self) -> bool:
        return self.delta / self.g >= DISPERSIVE_RATIO

    @property
    def dim(self) -> int:
        return 2 ** N_ATOMS * (self.n_max + 1)


@dataclass(frozen=True)
class EffectiveParams:
    lam: float
    lambda_t: float

    @property
    def interaction_time(self) -> float:
        """Physical time in seconds needed to accumulate ``lambda_t``."""
        return self.lambda_t / self.lam


def lambda_from(params: CavityParams, lambda_t: float | None = None) -> EffectiveParams:
    lam = params.g ** 2 / params.delta
    return EffectiveParams(lam=lam, lambda_t=magic_time() if lambda_t is None else float(lambda_t))


class SectorCoefficients(NamedTuple):
    A: complex
    B: complex
    phase_one_excitation: complex
    phase_three: complex


def coeff_AB(lambda_t: float) -> SectorCoefficients:
    """Closed-form amplitudes of the three-atom exchange after time ``lambda_t``.

    ``B`` is the amplitude to stay and ``A`` to hop in the one-excitation
    sector; the two-excitation sector carries an extra ``exp(-i lambda t)``.
    """
    p3 = complex(np.exp(-3j * lambda_t))
    return SectorCoefficients(
        A=(p3 - 1.0) / 3.0,
        B=(p3 + 2.0) / 3.0,
        phase_one_excitation=complex(np.exp(-1j * lambda_t)),
        phase_three=p3,
    )


def _lowering(k, n=N_ATOMS):
    """sigma^- on atom ``k`` of ``n`` in the |g>=0, |e>=1 convention."""
    sm = np.array([[0, 1], [0, 0]], dtype=np.complex128)
    out = np.ones((1, 1), dtype=np.complex128)
    for j in range(n):
        out = np.kron(out, sm if j == k else np.eye(2))
    return out


def excitation_number(index: int) -> int:
    return bin(index).count("1")


def build_effective_hamiltonian() -> np.ndarray:
    """8x8 exchange Hamiltonian in units of lambda, cavity in vacuum.

    ``sum_j |e><e|_j + sum_{i != j} S+_j S-_i``.
    """
    H = np.zeros((8, 8), dtype=np.complex128)
    for j in range(N_ATOMS):
        sj = _lowering(j)
        H += sj.conj().T @ sj
        for i in range(N_ATOMS):
            if i != j:
                H += sj.conj().T @ _lowering(i)
    return H


def effective_propagator(lambda_t: float) -> np.ndarray:
    """Sector-by-sector closed form of ``exp(-i H_eff lambda_t)``."""
    c = coeff_AB(lambda_t)
    U = np.zeros((8, 8), dtype=np.complex128)
    for col in range(8):
        n_exc = excitation_number(col)
        if n_exc == 0:
            U[col, col] = 1.0
        elif n_exc == 3:
            U[col, col] = c.phase_three
        else:
            pref = 1.0 if n_exc == 1 else c.phase_one_excitation
            for row in range(8):
                if excitation_number(row) == n_exc:
                    U[row, col] = pref * (c.B if row == col else c.A)
    return U


def effective_propagator_numeric(lambda_t: float) -> np.ndarray:
    return matrix_exponential(build_effective_hamiltonian(), lambda_t)


def coupling_operator(n_max: int = 3) -> np.ndarray:
    """``X = sum_j S-_j (x) a^dagger`` on atoms (x) Fock(n_max)."""
    adag = np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), -1).astype(np.complex128)
    S = sum(_lowering(j) for j in range(N_ATOMS))
    return np.kron(S, adag)


def build_full_hamiltonian(params: CavityParams, t: float) -> np.ndarray:
    """Interaction-picture atom-cavity Hamiltonian at time ``t``."""
    X = coupling_operator(params.n_max)
    ph = np.exp(-1j * params.delta * t)
    return params.g * (ph * X + np.conj(ph) * X.conj().T)


def total_excitation_operator(n_max: int = 3) -> np.ndarray:
    atoms = np.diag([excitation_number(i) for i in range(8)]).astype(float)
    photons = np.diag(np.arange(n_max + 1, dtype=float))
    return np.kron(atoms, np.eye(n_max + 1)) + np.kron(np.eye(8), photons)


class DispersiveError(NamedTuple):
    atomic_fidelity: float
    photon_leakage: float
    mean_atomic_fidelity: float
    mean_photon_leakage: float
    interaction_time: float
    steps: int
    max_excitation_drift: float
    max_norm_drift: float


def dispersive_error(params: CavityParams, lambda_t_target: float | None = None,
                     steps_per_period: int = DEFAULT_STEPS_PER_PERIOD, jit=None) -> DispersiveError:
    """Compare exact cavity dynamics against the effective propagator.

    Every atomic basis state is started with the cavity in vacuum and evolved
    for ``T = lambda_t * delta / g**2``. ``atomic_fidelity`` is the worst-case
    overlap of the vacuum-projected atomic state with the effective
    prediction; ``photon_leakage`` the worst-case probability of finding any
    photon at ``T``. Means over the eight inputs are reported alongside.
    """
    lt = magic_time() if lambda_t_target is None else float(lambda_t_target)
    if steps_per_period < 4:
        raise ValueError("steps_per_period must be at least 4")
    eff = lambda_from(params, lt)
    T = eff.interaction_time
    dt = (2.0 * math.pi / params.delta) / steps_per_period
    nf = params.n_max + 1
    psi0 = np.zeros((params.dim, 8), dtype=np.complex128)
    for k in range(8):
        psi0[k * nf, k] = 1.0
    X = coupling_operator(params.n_max)
    psi = integrate_two_tone(X, params.g, params.delta, psi0, T, dt, jit=jit)

    Ntot = np.diag(total_excitation_operator(params.n_max))
    exc0 = Ntot @ np.abs(psi0) ** 2
    # normalised so that RK4 norm error is not counted as excitation loss
    exc1 = (Ntot @ np.abs(psi) ** 2) / np.sum(np.abs(psi) ** 2, axis=0)
    vac = psi[0::nf, :]
    U = effective_propagator(lt)
    fid = np.abs(np.einsum("ik,ik->k", U.conj(), vac)) ** 2
    norms = np.sum(np.abs(psi) ** 2, axis=0)
    leak = np.clip(1.0 - np.sum(np.abs(vac) ** 2, axis=0) / norms, 0.0, None)
    return DispersiveError(
        atomic_fidelity=float(fid.min()),
        photon_leakage=float(leak.max()),
        mean_atomic_fidelity=float(fid.mean()),
        mean_photon_leakage=float(leak.mean()),
        interaction_time=T,
        steps=max(1, math.ceil(T / dt - 1e-9)),
        max_excitation_drift=float(np.max(np.abs(exc1 - exc0))),
        max_norm_drift=float(np.max(np.abs(np.linalg.norm(psi, axis=0) - 1.0))),
    )
