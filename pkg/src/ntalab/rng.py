"""Counter-based random numbers.

Every draw is a pure function of ``(seed, stream, counter)`` so walks can be
evaluated in any order, on any worker, and still reproduce bit for bit.  The
mixer is splitmix64's finalizer.
"""
import numpy as np

from ._accel import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
GOLDEN2 = np.uint64(0xD1B54A32D192ED03)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


@njit
def mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit
def stream_key(seed, stream):
    return mix64(np.uint64(seed) + GOLDEN * (np.uint64(stream) + np.uint64(1)))


@njit
def uniform_open(key, counter):
    """Uniform draw in (0, 1] for counter ``counter`` of a keyed stream."""
    z = mix64(key + GOLDEN2 * (np.uint64(counter) + np.uint64(1)))
    return (float(z >> np.uint64(11)) + 1.0) * _INV53


def stream_keys(seed, streams):
    """Vectorized :func:`stream_key` over an array of stream ids."""
    streams = np.asarray(streams, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix64_array(np.uint64(seed) + GOLDEN * (streams + np.uint64(1)))


def uniforms(keys, counter):
    """Vectorized :func:`uniform_open`; ``counter`` may be a scalar or an array."""
    counter = np.asarray(counter, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = _mix64_array(keys + GOLDEN2 * (counter + np.uint64(1)))
    return ((z >> np.uint64(11)).astype(np.float64) + 1.0) * _INV53


def _mix64_array(z):
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def generator(seed, stream=0):
    """A numpy Generator for non-hot-path sampling, derived from (seed, stream)."""
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, int(stream)])
