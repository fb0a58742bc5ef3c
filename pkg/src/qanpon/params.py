"""Protocol and detector parameter sets."""

from dataclasses import dataclass, asdict


@dataclass(frozen=True)
class ProtocolParams:
    """Decoy-state BB84 source and post-processing settings.

    Intensities are mean photon numbers per pulse. ``emission_ratio`` gives
    the relative frequencies of (signal, decoy, vacuum) pulses.
    """

    mu: float = 0.4
    nu: float = 0.1
    vacuum: float = 0.0
    emission_ratio: tuple = (6, 1, 1)
    q_sift: float = 0.5
    f_ec: float = 1.35
    e_detector: float = 0.0314
    pulse_rate: float = 625e6
    qber_abort: float = 0.04

    def __post_init__(self):
        object.__setattr__(self, "emission_ratio", tuple(float(r) for r in self.emission_ratio))
        if not 0 < self.nu < self.mu:
            raise ValueError(f"intensities must satisfy 0 < nu < mu, got mu={self.mu}, nu={self.nu}")
        if self.vacuum != 0:
            raise ValueError("vacuum intensity must be 0")
        if len(self.emission_ratio) != 3 or min(self.emission_ratio) <= 0:
            raise ValueError(f"emission_ratio needs three positive weights, got {self.emission_ratio}")
        if not 0 < self.q_sift <= 1:
            raise ValueError(f"q_sift must lie in (0, 1], got {self.q_sift}")
        if self.f_ec < 1:
            raise ValueError(f"f_ec must be >= 1, got {self.f_ec}")
        if not 0 <= self.e_detector <= 0.5:
            raise ValueError(f"e_detector must lie in [0, 0.5], got {self.e_detector}")
        if self.pulse_rate <= 0:
            raise ValueError("pulse_rate must be positive")
        if not 0 < self.qber_abort <= 0.5:
            raise ValueError(f"qber_abort must lie in (0, 0.5], got {self.qber_abort}")

    @property
    def class_probabilities(self):
        """Emission probabilities of (signal, decoy, vacuum)."""
        total = sum(self.emission_ratio)
        return tuple(r / total for r in self.emission_ratio)

    @property
    def signal_fraction(self):
        return self.class_probabilities[0]

    def to_dict(self):
        d = asdict(self)
        d["emission_ratio"] = list(self.emission_ratio)
        return d


@dataclass(frozen=True)
class DetectorParams:
    """InGaAs/InP gated single-photon detectors of one receiver.

    ``gate_width`` (seconds) times the pulse rate gives the fraction of a
    continuous noise flux that falls inside the pulse-associated gates.
    """

    efficiency: float = 0.15
    dark_per_gate: float = 2e-7
    gate_rate: float = 1.25e9
    detectors_per_receiver: int = 4
    gate_width: float = 400e-12

    def __post_init__(self):
        if not 0 < self.efficiency <= 1:
            raise ValueError(f"efficiency must lie in (0, 1], got {self.efficiency}")
        if not 0 <= self.dark_per_gate < 1:
            raise ValueError(f"dark_per_gate must lie in [0, 1), got {self.dark_per_gate}")
        if self.gate_rate <= 0:
            raise ValueError("gate_rate must be positive")
        if self.detectors_per_receiver < 1:
            raise ValueError("detectors_per_receiver must be >= 1")
        if self.gate_width < 0:
            raise ValueError("gate_width must be >= 0")

    def temporal_acceptance(self, pulse_rate):
        return min(1.0, self.gate_width * pulse_rate)

    @property
    def dark_rate(self):
        """Dark counts per second of one detector."""
        return self.dark_per_gate * self.gate_rate

    def to_dict(self):
        return asdict(self)
