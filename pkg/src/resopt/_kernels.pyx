# cython: language_level=3
"""Compiled hot loops.  Must stay numerically identical to _kernels_py."""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t, uint8_t

cnp.import_array()

BACKEND = "cython"

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double TWO_M53 = 1.0 / 9007199254740992.0


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t rep_key(uint64_t seed, uint64_t rep) noexcept nogil:
    return mix64(mix64(seed) + (rep + 1) * GOLDEN)


cdef inline double draw(uint64_t rkey, uint64_t user, uint64_t slot) noexcept nogil:
    cdef uint64_t x = mix64(rkey + (user + 1) * GOLDEN)
    x = mix64(x + (slot + 1) * GOLDEN)
    return <double>(x >> 11) * TWO_M53


def uniforms(uint64_t seed, uint64_t rep, Py_ssize_t n, uint64_t slot):
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef uint64_t rkey = rep_key(seed, rep)
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            o[i] = draw(rkey, <uint64_t>i, slot)
    return out


def grid_argmin(const double[::1] p, double k, const double[::1] grid):
    cdef Py_ssize_t n = p.shape[0], m = grid.shape[0], i, j, best
    cdef double pi, q, cost, best_cost
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            pi = p[i]
            best = 0
            best_cost = 0.0
            for j in range(m):
                q = grid[j]
                cost = pi * (1.0 + k / 2.0 * (1.0 - q) * (1.0 - q)) + (1.0 - pi) * (k * q * q / 2.0)
                if j == 0 or cost < best_cost:
                    best_cost = cost
                    best = j
            o[i] = grid[best]
    return out


def two_period_rep(uint64_t seed, uint64_t rep, const double[::1] p, const double[::1] q,
                   const uint8_t[::1] active, double k, uint64_t slot_use):
    cdef Py_ssize_t n = p.shape[0], i
    cdef uint64_t rkey = rep_key(seed, rep)
    cdef int64_t usage = 0
    cdef double pay = 0.0, reserved = 0.0, qi
    with nogil:
        for i in range(n):
            if not active[i]:
                continue
            qi = q[i]
            reserved += qi
            if draw(rkey, <uint64_t>i, slot_use) < p[i]:
                usage += 1
                pay += 1.0 + k / 2.0 * (1.0 - qi) * (1.0 - qi)
            else:
                pay += k * qi * qi / 2.0
    return usage, pay, reserved


def three_period_rep(uint64_t seed, uint64_t rep, const double[::1] p1, const double[::1] p21,
                     const double[::1] p22, const double[::1] q1, const double[::1] q2a,
                     const double[::1] q2b, const uint8_t[::1] active, double k, double C,
                     double alpha, uint64_t slot_state, uint64_t slot_use):
    cdef Py_ssize_t n = p1.shape[0], i
    cdef uint64_t rkey = rep_key(seed, rep)
    cdef int64_t usage = 0
    cdef double pay = 0.0, res1 = 0.0, res2 = 0.0
    cdef double a, b, p2, k2 = C * k
    with nogil:
        for i in range(n):
            if not active[i]:
                continue
            a = q1[i]
            if draw(rkey, <uint64_t>i, slot_state) < p1[i]:
                p2 = p21[i]
                b = q2a[i]
            else:
                p2 = p22[i]
                b = q2b[i]
            res1 += a
            res2 += b
            if draw(rkey, <uint64_t>i, slot_use) < p2:
                usage += 1
                pay += ((1.0 + k / 2.0 * (1.0 - a) * (1.0 - a))
                        - alpha * (C + k2 / 2.0 * (1.0 - a) * (1.0 - a))
                        + alpha * (C + k2 / 2.0 * (1.0 - b) * (1.0 - b)))
            else:
                pay += ((k * a * a / 2.0)
                        - alpha * (k2 * a * a / 2.0)
                        + alpha * (k2 * b * b / 2.0))
    return usage, pay, res1, res2
