"""Counter-based random numbers (SplitMix64) usable from numba kernels.

Every random quantity is a pure function of ``(key, counter)``, so
streams are independent of generation order and any stream can be
regenerated in isolation.  Per-trial seeds follow the same rule::

    key        = mix64(master_seed)
    seed(i)    = mix64(key + (i + 1) * GOLDEN)      (mod 2**64)

which is the ``i``-th SplitMix64 output started from ``key``.
"""
import numba
import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TWO53 = 1.0 / 9007199254740992.0

SEED_RULE = "seed(i) = mix64(mix64(master) + (i+1)*0x9E3779B97F4A7C15), mix64 = SplitMix64 finalizer"


@numba.njit(inline="always")
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@numba.njit(inline="always")
def stream_key(seed, stream):
    return mix64(mix64(np.uint64(seed)) + np.uint64(stream + 1) * GOLDEN)


@numba.njit(inline="always")
def uniform(key, counter):
    """Uniform on the open interval (0, 1)."""
    z = mix64(key + np.uint64(counter + 1) * GOLDEN)
    return (np.float64(z >> _S11) + 0.5) * _TWO53


@numba.njit(cache=True)
def _trial_seeds(master, count):
    out = np.empty(count, dtype=np.uint64)
    key = mix64(np.uint64(master))
    for i in range(count):
        out[i] = mix64(key + np.uint64(i + 1) * GOLDEN)
    return out


def trial_seeds(master_seed: int, count: int, start: int = 0) -> np.ndarray:
    """Seeds of trials ``start .. start+count-1`` under master ``master_seed``."""
    master = np.uint64(int(master_seed) % 2**64)
    return _trial_seeds(master, start + count)[start:]
