"""Winnow error reconciliation with privacy maintenance.

Every iteration both parties apply the same seeded permutation, cut the
key into blocks of ``2**m`` bits and compare block parities. The first bit
of every block is then dropped, which leaves a ``2**m - 1`` bit Hamming
word. For blocks whose parities disagree the parties also compare the
``m``-bit Hamming syndromes; the receiver flips the bit the syndrome
difference points at, and both drop the ``m`` check positions
(``1, 2, 4, ...``). Bits disclosed as parities and syndromes are therefore
always paid for with discarded bits.

After each iteration a seeded 64-bit polynomial hash of the remaining keys
is compared; a match ends the protocol.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HASH_BITS = 64
_HASH_PRIME = (1 << 64) - 59
DEFAULT_SCHEDULE = (8, 8, 16, 32, 64, 128)


@dataclass(frozen=True)
class WinnowConfig:
    block_sizes: tuple = DEFAULT_SCHEDULE
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "block_sizes", tuple(int(b) for b in self.block_sizes))
        if not self.block_sizes:
            raise ValueError("need at least one iteration")
        for b in self.block_sizes:
            if b < 4 or b & (b - 1):
                raise ValueError(f"block sizes must be powers of two >= 4, got {b}")


@dataclass(frozen=True)
class SiftedKeyPair:
    sender: np.ndarray
    receiver: np.ndarray
    qber: float = 0.0

    def __post_init__(self):
        s = np.asarray(self.sender, dtype=np.uint8)
        r = np.asarray(self.receiver, dtype=np.uint8)
        if s.shape != r.shape or s.ndim != 1:
            raise ValueError("sender and receiver keys must be 1-D and of equal length")
        if not 0 <= self.qber <= 0.5:
            raise ValueError("qber estimate must lie in [0, 0.5]")
        object.__setattr__(self, "sender", s)
        object.__setattr__(self, "receiver", r)

    def __len__(self):
        return self.sender.size


@dataclass(frozen=True)
class IterationStats:
    block_size: int
    length_in: int
    length_out: int
    parity_bits: int
    syndrome_bits: int
    mismatched_blocks: int
    corrections: int
    discarded: int


@dataclass(frozen=True)
class ReconciliationResult:
    sender: np.ndarray
    receiver: np.ndarray
    leaked_bits: int
    discarded_bits: int
    passed: bool
    iterations: tuple = field(default_factory=tuple)

    @property
    def leakage(self):
        return self.leaked_bits

    def accounting(self):
        return {
            "passed": self.passed,
            "leaked_bits": self.leaked_bits,
            "discarded_bits": self.discarded_bits,
            "final_length": int(self.sender.size),
            "iterations": [vars(it).copy() for it in self.iterations],
        }


def poly_hash(bits, key):
    """64-bit polynomial hash of a bit string, evaluated at ``key`` modulo 2**64 - 59."""
    bits = np.asarray(bits, dtype=np.uint8)
    words = np.packbits(bits).tobytes()
    h = 0
    for i in range(0, len(words), 4):
        h = (h * key + int.from_bytes(words[i:i + 4], "big")) % _HASH_PRIME
    # length enters last so that trailing zero bits change the hash
    return (h * key + bits.size) % _HASH_PRIME


def _hamming_matrix(m):
    pos = np.arange(1 << m)
    return ((pos[:, None] >> np.arange(m)) & 1).astype(np.int64)


def winnow_pass(a, b, block_size, rng):
    """One Winnow iteration; returns the shortened keys and its statistics."""
    m = block_size.bit_length() - 1
    perm = rng.permutation(a.size)
    a, b = a[perm], b[perm]
    n_blocks = a.size // block_size
    cut = n_blocks * block_size
    A = a[:cut].reshape(n_blocks, block_size)
    B = b[:cut].reshape(n_blocks, block_size).copy()

    mismatch = (A.sum(axis=1) & 1) != (B.sum(axis=1) & 1)
    rows = np.flatnonzero(mismatch)
    H = _hamming_matrix(m)
    # column 0 is the bit dropped for the parity, so it never enters the syndrome
    sa = (A[rows, 1:] @ H[1:]) & 1
    sb = (B[rows, 1:] @ H[1:]) & 1
    diff = ((sa ^ sb) << np.arange(m)).sum(axis=1)
    fix = diff != 0
    B[rows[fix], diff[fix]] ^= 1

    keep = np.ones((n_blocks, block_size), dtype=bool)
    keep[:, 0] = False
    keep[np.ix_(rows, 1 << np.arange(m))] = False
    a_out = np.concatenate([A[keep], a[cut:]])
    b_out = np.concatenate([B[keep], b[cut:]])
    stats = IterationStats(
        block_size=block_size,
        length_in=a.size,
        length_out=a_out.size,
        parity_bits=n_blocks,
        syndrome_bits=m * rows.size,
        mismatched_blocks=int(rows.size),
        corrections=int(fix.sum()),
        discarded=a.size - a_out.size,
    )
    return a_out, b_out, stats


def winnow_reconcile(pair: SiftedKeyPair, config: WinnowConfig = WinnowConfig(),
                     observer=None) -> ReconciliationResult:
    """Reconcile ``pair.receiver`` towards ``pair.sender``.

    ``observer``, if given, is called as ``observer(stats, sender, receiver)``
    after each iteration; tests use it to watch the residual errors.
    """
    if len(pair) < 8:
        raise ValueError("keys must hold at least one 8-bit block")
    rng = np.random.default_rng(config.seed)
    a, b = pair.sender, pair.receiver
    leaked = 0
    history = []
    passed = False
    for size in config.block_sizes:
        if a.size < size:
            break
        a, b, stats = winnow_pass(a, b, size, rng)
        history.append(stats)
        leaked += stats.parity_bits + stats.syndrome_bits
        if observer is not None:
            observer(stats, a, b)
        key = int(rng.integers(1, _HASH_PRIME, dtype=np.uint64))
        leaked += HASH_BITS
        if poly_hash(a, key) == poly_hash(b, key):
            passed = True
            break
    discarded = len(pair) - a.size
    return ReconciliationResult(
        sender=a,
        receiver=b,
        leaked_bits=leaked,
        discarded_bits=discarded,
        passed=passed,
        iterations=tuple(history),
    )
