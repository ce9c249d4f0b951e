# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled replication kernel for the flow-level balance simulator.

Twin of allpath._balance_py: identical splitmix64 stream and draw order so
both kernels produce matching statistics for a given seed.  Departures are
kept in flat arrays with a linear min scan; the active-flow count is
bounded by the total capacity, so the scan is cheap and branch-friendly.
"""

from libc.math cimport log, INFINITY
from libc.stdlib cimport free, malloc

cdef extern from *:
    ctypedef unsigned long long u64 "unsigned long long"

DEF HOLD_EXP = 0
DEF HOLD_DCMIX = 1
DEF HOLD_DET = 2


cdef inline u64 _next_u64(u64 *state) nogil:
    state[0] += <u64>0x9E3779B97F4A7C15
    cdef u64 z = state[0]
    z = (z ^ (z >> 30)) * <u64>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <u64>0x94D049BB133111EB
    z ^= z >> 31
    return z


cdef inline double _uniform(u64 *state) nogil:
    return ((_next_u64(state) >> 11) + 1) * (2.0 ** -53)


def run_replication(capacities, double lam, double duration, double warmup,
                    object seed, int hold_kind, double p0, double p1,
                    double p2, double p3):
    """Simulate one replication; returns (busy_integrals, span, arrivals, losses)."""
    cdef int n = len(capacities)
    cdef int total_cap = 0
    cdef int i, k, seen, choice, n_best, path, n_active, best_idx
    cdef u64 state = <u64>(int(seed) & ((1 << 64) - 1))
    cdef double t = 0.0, t_next, next_arr, next_dep, seg, hold
    cdef long long arrivals = 0, losses = 0
    cdef int best, avail

    cdef int *caps = <int *>malloc(n * sizeof(int))
    cdef int *occ = <int *>malloc(n * sizeof(int))
    cdef double *busy = <double *>malloc(n * sizeof(double))
    for i in range(n):
        caps[i] = capacities[i]
        occ[i] = 0
        busy[i] = 0.0
        total_cap += caps[i]

    cdef double *dep_time = <double *>malloc(total_cap * sizeof(double))
    cdef int *dep_path = <int *>malloc(total_cap * sizeof(int))
    n_active = 0

    next_arr = -log(_uniform(&state)) / lam

    try:
        while True:
            if n_active > 0:
                best_idx = 0
                next_dep = dep_time[0]
                for i in range(1, n_active):
                    if dep_time[i] < next_dep:
                        next_dep = dep_time[i]
                        best_idx = i
            else:
                next_dep = INFINITY
                best_idx = -1

            t_next = next_arr if next_arr < next_dep else next_dep
            if t_next >= duration:
                t_next = duration
            if t_next > warmup:
                seg = t_next - (t if t > warmup else warmup)
                for i in range(n):
                    busy[i] += occ[i] * seg
            t = t_next
            if t >= duration:
                break

            if next_arr <= next_dep:
                if t > warmup:
                    arrivals += 1
                best = caps[0] - occ[0]
                n_best = 1
                choice = 0
                for i in range(1, n):
                    avail = caps[i] - occ[i]
                    if avail > best:
                        best = avail
                        n_best = 1
                        choice = i
                    elif avail == best:
                        n_best += 1
                if best <= 0:
                    if t > warmup:
                        losses += 1
                else:
                    if n_best > 1:
                        k = <int>(_uniform(&state) * n_best)
                        if k >= n_best:
                            k = n_best - 1
                        seen = -1
                        for i in range(n):
                            if caps[i] - occ[i] == best:
                                seen += 1
                                if seen == k:
                                    choice = i
                                    break
                    occ[choice] += 1
                    if hold_kind == HOLD_EXP:
                        hold = -log(_uniform(&state)) * p0
                    elif hold_kind == HOLD_DCMIX:
                        if _uniform(&state) < p0:
                            hold = p1
                        else:
                            hold = p2 + (p3 - p2) * _uniform(&state)
                    else:
                        hold = p0
                    dep_time[n_active] = t + hold
                    dep_path[n_active] = choice
                    n_active += 1
                next_arr = t - log(_uniform(&state)) / lam
            else:
                path = dep_path[best_idx]
                occ[path] -= 1
                n_active -= 1
                dep_time[best_idx] = dep_time[n_active]
                dep_path[best_idx] = dep_path[n_active]

        busy_out = [busy[i] for i in range(n)]
    finally:
        free(caps)
        free(occ)
        free(busy)
        free(dep_time)
        free(dep_path)

    return busy_out, duration - warmup, arrivals, losses
