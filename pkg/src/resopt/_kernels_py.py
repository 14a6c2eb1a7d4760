"""Numpy implementation of the hot loops.

Mirrors ``_kernels.pyx`` operation for operation: the same splitmix64-style
counter hash for random draws, the same expression order for payments and
strictly sequential sums (``cumsum``), so both backends agree bit for bit.
"""
import numpy as np

BACKEND = "numpy"

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix64_int(z):
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _rep_key(seed, rep):
    return _mix64_int(_mix64_int(seed) + ((rep + 1) * _GOLDEN & _MASK))


def _draws(rkey, n, slot):
    users = np.arange(1, n + 1, dtype=np.uint64)
    x = _mix64(np.uint64(rkey) + users * np.uint64(_GOLDEN))
    x = _mix64(x + np.uint64(((slot + 1) * _GOLDEN) & _MASK))
    return (x >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def _seqsum(x):
    return float(np.cumsum(x)[-1]) if len(x) else 0.0


def uniforms(seed, rep, n, slot):
    return _draws(_rep_key(int(seed), int(rep)), int(n), int(slot))


def grid_argmin(p, k, grid, chunk=512):
    p = np.ascontiguousarray(p, dtype=np.float64)
    grid = np.ascontiguousarray(grid, dtype=np.float64)
    out = np.empty(len(p))
    fq = 1.0 + k / 2.0 * (1.0 - grid) * (1.0 - grid)
    gq = k * grid * grid / 2.0
    for s in range(0, len(p), chunk):
        pc = p[s:s + chunk, None]
        cost = pc * fq + (1.0 - pc) * gq
        out[s:s + chunk] = grid[np.argmin(cost, axis=1)]
    return out


def two_period_rep(seed, rep, p, q, active, k, slot_use):
    n = len(p)
    act = np.asarray(active).astype(bool)
    u = _draws(_rep_key(int(seed), int(rep)), n, int(slot_use))
    uses = (u < p) & act
    qa = np.where(act, q, 0.0)
    f = 1.0 + k / 2.0 * (1.0 - qa) * (1.0 - qa)
    g = k * qa * qa / 2.0
    pay = np.where(uses, f, g)[act]
    return int(uses.sum()), _seqsum(pay), _seqsum(q[act])


def three_period_rep(seed, rep, p1, p21, p22, q1, q2a, q2b, active, k, C, alpha,
                     slot_state, slot_use):
    n = len(p1)
    act = np.asarray(active).astype(bool)
    rkey = _rep_key(int(seed), int(rep))
    in_a = _draws(rkey, n, int(slot_state)) < p1
    p2 = np.where(in_a, p21, p22)
    b = np.where(in_a, q2a, q2b)
    a = q1
    uses = (_draws(rkey, n, int(slot_use)) < p2) & act
    k2 = C * k
    f = ((1.0 + k / 2.0 * (1.0 - a) * (1.0 - a))
         - alpha * (C + k2 / 2.0 * (1.0 - a) * (1.0 - a))
         + alpha * (C + k2 / 2.0 * (1.0 - b) * (1.0 - b)))
    g = ((k * a * a / 2.0)
         - alpha * (k2 * a * a / 2.0)
         + alpha * (k2 * b * b / 2.0))
    pay = np.where(uses, f, g)[act]
    return int(uses.sum()), _seqsum(pay), _seqsum(a[act]), _seqsum(b[act])
