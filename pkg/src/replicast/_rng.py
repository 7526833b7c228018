"""Deterministic random streams shared by both simulator backends.

numpy's Generator is not usable from inside nopython kernels without
boxing tricks, so the simulator carries its own xoshiro256++ streams,
seeded through splitmix64.  The same code runs jitted and interpreted,
which keeps simulation output bit-identical across backends for a given
seed.  Each simulation owns three independent substreams (arrivals,
service, provisioning) so that changing e.g. the workload model does not
perturb the arrival process.
"""

from __future__ import annotations

import math

import numpy as np

from ._jit import maybe_jit

N_STREAMS = 3
STREAM_ARRIVAL = 0
STREAM_SERVICE = 1
STREAM_PROVISION = 2

_U64 = np.uint64


def _splitmix64(state):
    # Seeding-only helper; runs once per simulation, so it stays
    # un-jitted (numba cannot unbox Python-boxed uint64 above 2^63).
    state = state + _U64(0x9E3779B97F4A7C15)
    z = state
    z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
    z = z ^ (z >> _U64(31))
    return state, z


@maybe_jit
def _rotl(x, k):
    return (x << k) | (x >> (_U64(64) - k))


@maybe_jit
def _next_u64(s):
    result = _rotl(s[0] + s[3], _U64(23)) + s[0]
    t = s[1] << _U64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], _U64(45))
    return result


@maybe_jit
def uniform01(s):
    """Uniform in [0, 1) with 53 random bits, mutating stream state s."""
    return float(_next_u64(s) >> _U64(11)) * (1.0 / 9007199254740992.0)


@maybe_jit
def draw_exponential(s, rate):
    # log1p(-u) instead of log(1-u): u can be 0 but never 1.
    return -math.log1p(-uniform01(s)) / rate


def make_streams(seed: int) -> np.ndarray:
    """Build the (N_STREAMS, 4) uint64 state matrix for one simulation."""
    out = np.empty((N_STREAMS, 4), dtype=np.uint64)
    with np.errstate(over="ignore"):
        state = _U64(seed & 0xFFFFFFFFFFFFFFFF)
        for row in range(N_STREAMS):
            # Decorrelate substreams by folding the stream index into the
            # splitmix chain rather than just continuing it.
            state = state ^ (_U64(row + 1) * _U64(0xA3EC647659359ACD))
            for col in range(4):
                state, z = _splitmix64(state)
                out[row, col] = z
            if not out[row].any():
                out[row, 0] = _U64(1)
    return out
