import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qanpon.postproc import random_seed, toeplitz_pa
from qanpon.postproc import toeplitz as tz


def dense(key, out_len, seed):
    n = len(key)
    t = np.array([[seed[i - j + n - 1] for j in range(n)] for i in range(out_len)], dtype=np.int64)
    return (t @ np.asarray(key, dtype=np.int64)) % 2


def test_identity():
    key = np.random.default_rng(0).integers(0, 2, 50, dtype=np.uint8)
    seed = np.zeros(99, dtype=np.uint8)
    seed[49] = 1
    assert np.array_equal(toeplitz_pa(key, 50, seed), key)


def test_zero_key():
    rng = np.random.default_rng(1)
    assert not toeplitz_pa(np.zeros(64, np.uint8), 16, random_seed(64, 16, rng)).any()


def test_matches_dense_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        key = rng.integers(0, 2, 64, dtype=np.uint8)
        seed = random_seed(64, 16, rng)
        assert np.array_equal(toeplitz_pa(key, 16, seed), dense(key, 16, seed))


def test_fft_path_matches_direct(monkeypatch):
    rng = np.random.default_rng(5)
    key = rng.integers(0, 2, 3000, dtype=np.uint8)
    seed = random_seed(3000, 1000, rng)
    direct = toeplitz_pa(key, 1000, seed)
    monkeypatch.setattr(tz, "_DIRECT_LIMIT", 0)
    assert np.array_equal(toeplitz_pa(key, 1000, seed), direct)


@settings(max_examples=50)
@given(st.integers(1, 200), st.data())
def test_linearity(n, data):
    m = data.draw(st.integers(0, n))
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32)))
    a, b = rng.integers(0, 2, (2, n), dtype=np.uint8)
    seed = random_seed(n, m, rng)
    assert np.array_equal(toeplitz_pa(a ^ b, m, seed), toeplitz_pa(a, m, seed) ^ toeplitz_pa(b, m, seed))


def collision_rate(trials, n=32, m=8, seed=7):
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(trials):
        a = rng.integers(0, 2, n, dtype=np.uint8)
        b = rng.integers(0, 2, n, dtype=np.uint8)
        while np.array_equal(a, b):
            b = rng.integers(0, 2, n, dtype=np.uint8)
        s = random_seed(n, m, rng)
        hits += np.array_equal(toeplitz_pa(a, m, s), toeplitz_pa(b, m, s))
    return hits / trials


def test_two_universal_small():
    p = 2.0 ** -8
    trials = 20_000
    assert collision_rate(trials) <= p + 3 * np.sqrt(p * (1 - p) / trials)


@pytest.mark.parametrize("out_len, seed_len", [(65, 128), (16, 70)])
def test_rejects_bad_lengths(out_len, seed_len):
    with pytest.raises(ValueError):
        toeplitz_pa(np.zeros(64, np.uint8), out_len, np.zeros(seed_len, np.uint8))
