"""Classical post-processing: reconciliation, privacy amplification and the
secret-length accounting that ties them to the decoy-state bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..keyrate import ChannelObservables, binary_entropy, decoy_bounds
from ..params import ProtocolParams
from .toeplitz import random_seed, toeplitz_pa
from .winnow import (
    ReconciliationResult,
    SiftedKeyPair,
    WinnowConfig,
    poly_hash,
    winnow_reconcile,
)


def final_key_length(sifted_len, qber, leakage, p: ProtocolParams = ProtocolParams(),
                     single_photon_fraction=1.0, e1=None, vacuum_fraction=0.0):
    """Secret bits extractable from ``sifted_len`` reconciled signal-state bits.

    ``floor(n * (f1 * (1 - H(e1)) + f0) - leakage)`` clipped at zero, where
    ``f1`` and ``f0`` are the single-photon and vacuum shares of the signal
    gain and ``e1`` the single-photon error bound (``qber`` if not given).
    ``leakage`` is the reconciliation traffic actually disclosed. A QBER at
    or above the abort threshold yields nothing.
    """
    if not 0 <= qber <= 0.5:
        raise ValueError(f"qber must lie in [0, 0.5], got {qber}")
    if sifted_len < 0 or leakage < 0:
        raise ValueError("lengths must be non-negative")
    if qber >= p.qber_abort:
        return 0
    e1 = qber if e1 is None else e1
    secret = sifted_len * (single_photon_fraction * (1 - binary_entropy(e1)) + vacuum_fraction)
    return max(0, math.floor(secret - leakage))


def single_photon_terms(obs: ChannelObservables, p: ProtocolParams = ProtocolParams()):
    """(Q1/Q_mu, e1 bound, Q0/Q_mu) from measured observables."""
    if obs.q_mu <= 0:
        return 0.0, 0.5, 0.0
    b = decoy_bounds(obs, p)
    q1 = b.y_1_lower * p.mu * math.exp(-p.mu)
    q0 = obs.y_0 * math.exp(-p.mu)
    return min(q1 / obs.q_mu, 1.0), b.e_1_upper, q0 / obs.q_mu


@dataclass(frozen=True)
class PipelineResult:
    reconciliation: ReconciliationResult
    final_length: int
    sender_key: np.ndarray
    receiver_key: np.ndarray

    @property
    def keys_match(self):
        return bool(np.array_equal(self.sender_key, self.receiver_key))

    def accounting(self, sifted_length=None):
        rec = self.reconciliation.accounting()
        return {
            "sifted_length": sifted_length,
            "reconciliation": rec,
            "final_length": self.final_length,
            "keys_match": self.keys_match,
        }


def distill(pair: SiftedKeyPair, observables: ChannelObservables,
            p: ProtocolParams = ProtocolParams(),
            winnow: WinnowConfig = WinnowConfig(), seed=0) -> PipelineResult:
    """Winnow, then Toeplitz-compress to the length the decoy bounds allow."""
    rec = winnow_reconcile(pair, winnow)
    if not rec.passed:
        empty = np.zeros(0, dtype=np.uint8)
        return PipelineResult(rec, 0, empty, empty)
    f1, e1, f0 = single_photon_terms(observables, p)
    length = final_key_length(len(pair), min(observables.e_mu, 0.5), rec.leaked_bits, p,
                              single_photon_fraction=f1, e1=e1, vacuum_fraction=f0)
    length = min(length, rec.sender.size)
    rng = np.random.default_rng(seed)
    t_seed = random_seed(rec.sender.size, length, rng) if length else np.zeros(0, np.uint8)
    return PipelineResult(
        reconciliation=rec,
        final_length=length,
        sender_key=toeplitz_pa(rec.sender, length, t_seed),
        receiver_key=toeplitz_pa(rec.receiver, length, t_seed),
    )


__all__ = [
    "PipelineResult", "ReconciliationResult", "SiftedKeyPair", "WinnowConfig",
    "distill", "final_key_length", "poly_hash", "random_seed", "single_photon_terms",
    "toeplitz_pa", "winnow_reconcile",
]
