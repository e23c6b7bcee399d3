"""Compiled single-site Metropolis loop.

Per-unit +1 tallies are accumulated lazily: a unit's counter is only touched
when that unit flips (and once at the end), so a step costs O(degree) instead
of O(N) while still counting every post-burn-in configuration.
"""

import numpy as np
from numba import njit

HYPERBOLIC = 0
LOGARITHMIC = 1
FIXED = 2

# indices into the int64 ``status`` array carried between blocks
ST_TRACE_POS = 0
ST_ACCEPTED = 1
ST_CODE = 2


@njit(cache=True, nogil=True)
def temperature(kind, t0, t):
    if kind == HYPERBOLIC:
        return t0 / t
    if kind == LOGARITHMIC:
        return t0 / np.log(t + 1.0)
    return t0


@njit(cache=True, nogil=True)
def metropolis_block(indptr, indices, weights, h, spins, nodes, uniforms, t_first,
                     kind, t0, burn, last, counts, energy, status,
                     trace_stride, trace_iter, trace_energy, track_states, state_hist):
    """Run ``nodes.size`` steps starting at iteration ``t_first`` (1-based).

    ``energy`` is a length-1 float array updated in place with every accepted
    change; ``status`` holds the trace cursor, the accepted-move count and the
    packed configuration code used by the optional state histogram.
    """
    first_post = burn + 1
    for k in range(nodes.size):
        t = t_first + k
        i = nodes[k]
        local = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            local += weights[p] * spins[indices[p]]
        s_i = spins[i]
        dh = 2.0 * s_i * (local + h[i])
        accept = dh <= 0.0
        if not accept:
            accept = uniforms[k] < np.exp(-dh / temperature(kind, t0, t))
        if accept:
            if s_i == 1:
                lo = last[i] if last[i] > first_post else first_post
                if t - 1 >= lo:
                    counts[i] += t - lo
            last[i] = t
            spins[i] = -s_i
            energy[0] += dh
            status[ST_ACCEPTED] += 1
            if track_states:
                status[ST_CODE] ^= 1 << i
        if track_states and t >= first_post:
            state_hist[status[ST_CODE]] += 1
        if trace_stride > 0 and t % trace_stride == 0:
            pos = status[ST_TRACE_POS]
            if pos < trace_iter.size:
                trace_iter[pos] = t
                trace_energy[pos] = energy[0]
                status[ST_TRACE_POS] = pos + 1


@njit(cache=True, nogil=True)
def finalize_counts(spins, last, counts, burn, n_iter):
    first_post = burn + 1
    for i in range(spins.size):
        if spins[i] == 1:
            lo = last[i] if last[i] > first_post else first_post
            if n_iter >= lo:
                counts[i] += n_iter - lo + 1
