"""Hot loops: fixed-step RK4 for a two-tone drive and Markov-chain walking.

Each kernel has a numba version (explicit loops) and a pure-numpy version
(vectorised). Both consume their inputs identically, so results agree to
rounding for the integrator and bit-for-bit for the chain walker.
"""

import numpy as np

from ._accel import USE_JIT, njit


# --------------------------------------------------------------------------
# RK4 for H(t) = c * (exp(-i w t) X + exp(+i w t) X^dagger)
# --------------------------------------------------------------------------

def _two_tone_rhs(rows, cols, vals, coupling, omega, t, psi, out):
    """``out = -i H(t) psi`` from the nonzeros of X; X^dagger is the transpose walk."""
    ph = np.exp(-1j * omega * t)
    phc = np.conj(ph)
    out[:] = 0
    k = psi.shape[1]
    for e in range(rows.size):
        r, q = rows[e], cols[e]
        a = ph * vals[e]
        b = phc * np.conj(vals[e])
        for c in range(k):
            out[r, c] += a * psi[q, c]
            out[q, c] += b * psi[r, c]
    for r in range(out.shape[0]):
        for c in range(k):
            out[r, c] *= -1j * coupling


_two_tone_rhs_jit = njit(_two_tone_rhs)


def _rk4_two_tone_loop(rows, cols, vals, coupling, omega, psi0, t0, h, n_steps):
    psi = psi0.copy()
    tmp = np.empty_like(psi)
    k1 = np.empty_like(psi)
    k2 = np.empty_like(psi)
    k3 = np.empty_like(psi)
    k4 = np.empty_like(psi)
    for step in range(n_steps):
        t = t0 + step * h
        _two_tone_rhs_jit(rows, cols, vals, coupling, omega, t, psi, k1)
        tmp[:] = psi + 0.5 * h * k1
        _two_tone_rhs_jit(rows, cols, vals, coupling, omega, t + 0.5 * h, tmp, k2)
        tmp[:] = psi + 0.5 * h * k2
        _two_tone_rhs_jit(rows, cols, vals, coupling, omega, t + 0.5 * h, tmp, k3)
        tmp[:] = psi + h * k3
        _two_tone_rhs_jit(rows, cols, vals, coupling, omega, t + h, tmp, k4)
        psi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return psi


_rk4_two_tone_jit = njit(_rk4_two_tone_loop)


def _rk4_two_tone_numpy(X, Xh, coupling, omega, psi0, t0, h, n_steps):
    def rhs(t, y):
        ph = np.exp(-1j * omega * t)
        return -1j * coupling * (ph * (X @ y) + np.conj(ph) * (Xh @ y))

    psi = psi0.copy()
    for step in range(n_steps):
        t = t0 + step * h
        k1 = rhs(t, psi)
        k2 = rhs(t + 0.5 * h, psi + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, psi + 0.5 * h * k2)
        k4 = rhs(t + h, psi + h * k3)
        psi = psi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return psi


def rk4_two_tone(X, coupling, omega, psi0, t0, h, n_steps, jit=None):
    """Propagate the columns of ``psi0`` through ``n_steps`` RK4 steps of size ``h``.

    The Hamiltonian is ``coupling * (exp(-i omega t) X + h.c.)``.
    ``jit=None`` follows the module-wide switch.
    """
    X = np.ascontiguousarray(X, dtype=np.complex128)
    Xh = np.ascontiguousarray(X.conj().T)
    psi0 = np.asarray(psi0, dtype=np.complex128)
    vector = psi0.ndim == 1
    psi = np.ascontiguousarray(psi0.reshape(psi0.shape[0], -1))
    use_jit = USE_JIT if jit is None else (jit and USE_JIT)
    scalars = (float(coupling), float(omega), psi, float(t0), float(h), int(n_steps))
    if use_jit:
        rows, cols = np.nonzero(X)
        out = _rk4_two_tone_jit(rows.astype(np.int64), cols.astype(np.int64), X[rows, cols].copy(), *scalars)
    else:
        out = _rk4_two_tone_numpy(X, Xh, *scalars)
    return out[:, 0] if vector else out


# --------------------------------------------------------------------------
# Absorbing Markov chain walk (Monte Carlo pipeline)
# --------------------------------------------------------------------------

def _walk_chunk_loop(u, cum_prob, next_state, cost, ancilla, start, max_rounds,
                     state, rounds, total_cost, total_anc, first, done, counts):
    n, m = u.shape
    K = cum_prob.shape[1]
    for i in range(n):
        if done[i]:
            continue
        for j in range(m):
            s = state[i]
            x = u[i, j]
            o = 0
            while o < K - 1 and x >= cum_prob[s, o]:
                o += 1
            total_cost[i] += cost[s]
            total_anc[i] += ancilla[s]
            counts[s, o] += 1
            if first[i] < 0:
                first[i] = o
            rounds[i] += 1
            nxt = next_state[s, o]
            if nxt < 0:
                done[i] = True
                break
            if max_rounds > 0 and rounds[i] >= max_rounds:
                state[i] = start
                rounds[i] = 0
            else:
                state[i] = nxt


_walk_chunk_jit = njit(_walk_chunk_loop)


def _walk_chunk_numpy(u, cum_prob, next_state, cost, ancilla, start, max_rounds,
                      state, rounds, total_cost, total_anc, first, done, counts):
    K = cum_prob.shape[1]
    for j in range(u.shape[1]):
        idx = np.flatnonzero(~done)
        if idx.size == 0:
            break
        s = state[idx]
        o = np.minimum((u[idx, j][:, None] >= cum_prob[s, : K - 1]).sum(axis=1), K - 1)
        total_cost[idx] += cost[s]
        total_anc[idx] += ancilla[s]
        np.add.at(counts, (s, o), 1)
        fresh = first[idx] < 0
        first[idx[fresh]] = o[fresh]
        rounds[idx] += 1
        nxt = next_state[s, o]
        finished = nxt < 0
        done[idx[finished]] = True
        cont = ~finished
        reset = cont & (max_rounds > 0) & (rounds[idx] >= max_rounds)
        keep = cont & ~reset
        state[idx[keep]] = nxt[keep]
        state[idx[reset]] = start
        rounds[idx[reset]] = 0


def walk_chunk(u, cum_prob, next_state, cost, ancilla, start, max_rounds,
               state, rounds, total_cost, total_anc, first, done, counts, jit=None):
    """Advance every unfinished walker by up to ``u.shape[1]`` transitions, in place.

    Walker ``i`` consumes ``u[i, 0], u[i, 1], ...`` in order, one uniform per
    transition, and stops at the first transition into a negative state.
    """
    use_jit = USE_JIT if jit is None else (jit and USE_JIT)
    impl = _walk_chunk_jit if use_jit else _walk_chunk_numpy
    impl(u, cum_prob, next_state, cost, ancilla, int(start), int(max_rounds),
         state, rounds, total_cost, total_anc, first, done, counts)
