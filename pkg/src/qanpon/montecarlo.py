"""Pulse-by-pulse simulation of one transmitter/receiver pair.

Each pulse gets an intensity class, a Poisson photon number, binomial
channel survival, passive basis choice at the receiver, misalignment
flips and per-detector background clicks. Multi-click events are squashed
to a random outcome. The analytic model in :mod:`qanpon.keyrate` is the
expectation of these statistics, so the simulation serves as its oracle.

Random streams use the counter-based Philox generator. ``seed`` is
expanded with ``numpy.random.SeedSequence(seed).spawn(n_blocks)``, one
child per block of :data:`BLOCK` pulses, so results are bit-identical for
a given seed regardless of how many workers process the blocks.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .keyrate import ChannelObservables, transmittance
from .params import DetectorParams, ProtocolParams

BLOCK = 1 << 20
CLASSES = ("signal", "decoy", "vacuum")


@dataclass(frozen=True)
class SimConfig:
    pulses: int
    seed: int = 0
    protocol: ProtocolParams = field(default_factory=ProtocolParams)
    detector: DetectorParams = field(default_factory=DetectorParams)
    link_loss: float = 0.0
    raman_per_gate: float = 0.0

    def __post_init__(self):
        if self.pulses < 1:
            raise ValueError("pulses must be >= 1")
        if self.link_loss < 0:
            raise ValueError("link_loss must be >= 0")
        if not 0 <= self.raman_per_gate < 1:
            raise ValueError("raman_per_gate must lie in [0, 1)")
        if self.detector.detectors_per_receiver != 4:
            raise ValueError("the simulation models a four-detector passive BB84 receiver")


@dataclass
class ClassTally:
    sent: int = 0
    clicks: int = 0
    sifted: int = 0
    errors: int = 0

    def __iadd__(self, other):
        self.sent += other.sent
        self.clicks += other.clicks
        self.sifted += other.sifted
        self.errors += other.errors
        return self

    @property
    def gain(self):
        return self.clicks / self.sent if self.sent else 0.0

    @property
    def qber(self):
        return self.errors / self.sifted if self.sifted else 0.5

    @property
    def gain_sigma(self):
        return _binomial_sigma(self.clicks, self.sent)

    @property
    def qber_sigma(self):
        return _binomial_sigma(self.errors, self.sifted)


def _binomial_sigma(k, n):
    """Standard error of k/n, Agresti-Coull adjusted so that k = 0 or k = n
    still gives a realistic spread."""
    if not n:
        return math.inf
    p = (k + 2) / (n + 4)
    return math.sqrt(p * (1 - p) / (n + 4))


@dataclass(frozen=True)
class SimOutcome:
    observables: ChannelObservables
    sigma: ChannelObservables
    tallies: dict
    sender_bits: np.ndarray
    receiver_bits: np.ndarray
    positions: np.ndarray

    @property
    def sifted_qber(self):
        if len(self.sender_bits) == 0:
            return 0.0
        return float(np.mean(self.sender_bits != self.receiver_bits))

    def to_dict(self):
        return {
            "observables": self.observables.to_dict(),
            "sigma": self.sigma.to_dict(),
            "tallies": {k: vars(t).copy() for k, t in self.tallies.items()},
            "sifted_length": int(len(self.sender_bits)),
            "sifted_qber": self.sifted_qber,
        }


def _simulate_block(rng, n, offset, cfg: SimConfig, eta, p_bg):
    p = cfg.protocol
    cls = np.searchsorted(np.cumsum(p.class_probabilities), rng.random(n), side="right")
    cls = np.minimum(cls, 2)
    intensity = np.array([p.mu, p.nu, p.vacuum])[cls]
    photons = rng.binomial(rng.poisson(intensity), eta)
    a_basis = rng.integers(0, 2, n, dtype=np.int8)
    a_bit = rng.integers(0, 2, n, dtype=np.int8)

    # detector index = 2 * basis + bit
    clicks = rng.random((n, 4)) < p_bg
    hit = np.flatnonzero(photons)
    if hit.size:
        owner = np.repeat(hit, photons[hit])
        arm = rng.integers(0, 2, owner.size, dtype=np.int8)
        flip = rng.random(owner.size) < p.e_detector
        matched = arm == a_basis[owner]
        bit = np.where(matched, a_bit[owner] ^ flip, rng.integers(0, 2, owner.size, dtype=np.int8))
        clicks[owner, 2 * arm + bit] = True

    any_click = clicks.any(axis=1)
    z = clicks[:, 0] | clicks[:, 1]
    x = clicks[:, 2] | clicks[:, 3]
    b_basis = np.where(z & x, rng.integers(0, 2, n, dtype=np.int8), np.where(x, 1, 0)).astype(np.int8)
    d0 = np.where(b_basis == 0, clicks[:, 0], clicks[:, 2])
    d1 = np.where(b_basis == 0, clicks[:, 1], clicks[:, 3])
    b_bit = np.where(d0 & d1, rng.integers(0, 2, n, dtype=np.int8), d1).astype(np.int8)

    sifted = any_click & (b_basis == a_basis)
    wrong = sifted & (b_bit != a_bit)
    tallies = {}
    for k, name in enumerate(CLASSES):
        sel = cls == k
        tallies[name] = ClassTally(
            sent=int(sel.sum()),
            clicks=int((any_click & sel).sum()),
            sifted=int((sifted & sel).sum()),
            errors=int((wrong & sel).sum()),
        )
    keep = np.flatnonzero(sifted & (cls == 0))
    return tallies, a_bit[keep].astype(np.uint8), b_bit[keep].astype(np.uint8), keep + offset


def simulate(cfg: SimConfig, workers: int = 1) -> SimOutcome:
    eta = 0.0 if math.isinf(cfg.link_loss) else transmittance(cfg.link_loss, cfg.detector)
    p_bg = min(cfg.detector.dark_per_gate + cfg.raman_per_gate, 1.0)
    n_blocks = -(-cfg.pulses // BLOCK)
    seeds = np.random.SeedSequence(cfg.seed).spawn(n_blocks)
    jobs = []
    for i, ss in enumerate(seeds):
        size = min(BLOCK, cfg.pulses - i * BLOCK)
        jobs.append((ss, size, i * BLOCK))

    def run(job):
        ss, size, offset = job
        rng = np.random.Generator(np.random.Philox(ss))
        return _simulate_block(rng, size, offset, cfg, eta, p_bg)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]

    tallies = {name: ClassTally() for name in CLASSES}
    for t, *_ in parts:
        for name in CLASSES:
            tallies[name] += t[name]
    s, d, v = (tallies[name] for name in CLASSES)
    obs = ChannelObservables(q_mu=s.gain, q_nu=d.gain, e_mu=s.qber, e_nu=d.qber, y_0=v.gain)
    sigma = ChannelObservables(q_mu=s.gain_sigma, q_nu=d.gain_sigma, e_mu=s.qber_sigma,
                               e_nu=d.qber_sigma, y_0=v.gain_sigma)
    return SimOutcome(
        observables=obs,
        sigma=sigma,
        tallies=tallies,
        sender_bits=np.concatenate([p[1] for p in parts]),
        receiver_bits=np.concatenate([p[2] for p in parts]),
        positions=np.concatenate([p[3] for p in parts]),
    )
