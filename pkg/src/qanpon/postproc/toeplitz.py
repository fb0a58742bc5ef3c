"""Privacy amplification by Toeplitz hashing over GF(2)."""

import numpy as np
from scipy.signal import fftconvolve

# above this many multiply-adds the product goes through an FFT
_DIRECT_LIMIT = 1 << 22


def toeplitz_pa(key, out_len, seed):
    """Compress ``key`` to ``out_len`` bits with the Toeplitz matrix given by ``seed``.

    The ``out_len x n`` matrix is ``T[i, j] = seed[i - j + n - 1]``: the
    first ``n`` seed bits are its first row read right to left, the rest
    continue its first column downwards. An all-zero seed except
    ``seed[n - 1] = 1`` is the identity when ``out_len == n``.

    Parameters
    ----------
    key : array_like of {0, 1}
        Input bits, length ``n``.
    out_len : int
        Output length, at most ``n``.
    seed : array_like of {0, 1}
        ``out_len + n - 1`` bits.

    Returns
    -------
    ndarray of uint8
        ``T @ key mod 2``.
    """
    key = np.asarray(key, dtype=np.int64)
    seed = np.asarray(seed, dtype=np.int64)
    n = key.size
    if out_len < 0 or out_len > n:
        raise ValueError(f"output length {out_len} must lie in [0, {n}]")
    if seed.size != out_len + n - 1 and not (out_len == 0 and seed.size == 0):
        raise ValueError(f"seed must hold {out_len + n - 1} bits, got {seed.size}")
    if out_len == 0:
        return np.zeros(0, dtype=np.uint8)
    if n * out_len <= _DIRECT_LIMIT:
        full = np.convolve(seed, key)
    else:
        full = np.rint(fftconvolve(seed.astype(float), key.astype(float))).astype(np.int64)
    return (full[n - 1:n - 1 + out_len] & 1).astype(np.uint8)


def random_seed(n, out_len, rng):
    return rng.integers(0, 2, out_len + n - 1, dtype=np.uint8)
