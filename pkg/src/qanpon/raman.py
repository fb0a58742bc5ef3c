"""Spontaneous Raman scattering from the OLT pump into the quantum channel.

Two contributions reach a QKD receiver: light scattered in the shared
feeder, which then crosses the splitter and drop fiber as a quantum-band
signal, and light scattered in the drop fiber by the already split pump.
Partial-coexistence schemes filter the feeder contribution out before the
splitter, so only the drop term survives.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .odn import (
    NetworkScheme,
    Point,
    SchemeKind,
    StageKind,
    olt_power_mw,
    power_to_count_rate,
)
from .params import DetectorParams, ProtocolParams
from .units import att_to_natural

# below this |alpha_q - alpha_c| the closed form is replaced by its limit
SINGULAR_GAP = 1e-9


@dataclass(frozen=True)
class RamanParams:
    """Effective SRS coefficients and pump/quantum attenuation (natural units, 1/km).

    ``beta`` scales the feeder-generated term and ``beta_drop`` the
    drop-generated one; ``beta_drop=None`` uses ``beta`` for both. Both are
    conversion ratios per km into the receiver's filter passband.
    """

    beta: float
    alpha_c: float = att_to_natural(0.31)
    alpha_q: float = att_to_natural(0.35)
    beta_drop: float | None = None

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.beta_drop is not None and self.beta_drop <= 0:
            raise ValueError("beta_drop must be positive")
        if self.alpha_c <= 0 or self.alpha_q <= 0:
            raise ValueError("attenuation coefficients must be positive")

    @property
    def beta_d(self):
        return self.beta if self.beta_drop is None else self.beta_drop

    def to_dict(self):
        return {"beta": self.beta, "beta_drop": self.beta_d,
                "alpha_c": self.alpha_c, "alpha_q": self.alpha_q}

    @classmethod
    def from_dict(cls, d):
        return cls(beta=d["beta"], beta_drop=d.get("beta_drop"),
                   alpha_c=d.get("alpha_c", att_to_natural(0.31)),
                   alpha_q=d.get("alpha_q", att_to_natural(0.35)))


@dataclass(frozen=True)
class RamanBudget:
    """SRS reaching one receiver.

    ``s_f`` and ``s_d`` are powers (mW) at the receiver input, before the
    DEMUX. ``receiver_rate`` is the click rate summed over the receiver's
    detectors, ``count_rate`` the share of one detector.
    """

    s_f: float
    s_d: float
    receiver_rate: float
    count_rate: float
    per_gate_probability: float

    @property
    def total_power(self):
        return self.s_f + self.s_d


def _transfer(a1, a2, length):
    """(exp(-a1 L) - exp(-a2 L)) / (a2 - a1), with the a1 == a2 limit L exp(-a L)."""
    if abs(a2 - a1) < SINGULAR_GAP:
        a = 0.5 * (a1 + a2)
        return length * math.exp(-a * length)
    # expm1 keeps precision when a1 and a2 are close
    return math.exp(-a1 * length) * -math.expm1(-(a2 - a1) * length) / (a2 - a1)


def _check(p, l_f, l_d, n):
    if p < 0 or l_f < 0 or l_d < 0:
        raise ValueError("power and lengths must be non-negative")
    if n < 1:
        raise ValueError(f"splitting ratio must be >= 1, got {n}")


def srs_feeder(p, l_f, l_d, n, params: RamanParams):
    """Feeder-generated SRS power (mW) arriving at a user.

    ``p * beta / (aq - ac) * (exp(-ac Lf) - exp(-aq Lf)) / n * exp(-aq Ld)``
    """
    _check(p, l_f, l_d, n)
    ac, aq = params.alpha_c, params.alpha_q
    return p * params.beta * _transfer(ac, aq, l_f) / n * math.exp(-aq * l_d)


def srs_drop(p, l_f, l_d, n, params: RamanParams):
    """Drop-generated SRS power (mW) arriving at a user.

    ``p / n * exp(-ac Lf) * beta / (aq - ac) * (exp(-ac Ld) - exp(-aq Ld))``
    """
    _check(p, l_f, l_d, n)
    ac, aq = params.alpha_c, params.alpha_q
    return p / n * math.exp(-ac * l_f) * params.beta_d * _transfer(ac, aq, l_d)


def _srs_powers(scheme: NetworkScheme, params: RamanParams):
    if scheme.kind is SchemeKind.FULL:
        p = olt_power_mw(scheme, Point.FEEDER_ENTRY)
        # measured splitter transmittance replaces the ideal 1/N on both paths
        n_q = 1.0 / scheme.quantum_splitter.transmittance
        n_c = 1.0 / scheme.classical_splitter.transmittance
        s_f = srs_feeder(p, scheme.feeder_length, scheme.drop_length, n_q, params)
        s_d = srs_drop(p, scheme.feeder_length, scheme.drop_length, n_c, params)
        return s_f, s_d
    p = olt_power_mw(scheme, Point.DROP_ENTRY)
    return 0.0, srs_drop(p, 0.0, scheme.drop_length, 1.0, params)


def _receiver_transmittance(scheme: NetworkScheme):
    demux = scheme.stage(StageKind.DEMUX)
    if demux is None:
        return 1.0
    loss = demux.loss_for(scheme.catalog.quantum)
    return 1.0 if loss is None else 10 ** (-loss / 10)


def _receiver_rate(scheme, p_mw, detector, pulse_rate):
    """Clicks/s summed over one receiver's detectors for ``p_mw`` at its input."""
    return power_to_count_rate(
        p_mw * _receiver_transmittance(scheme),
        scheme.catalog.quantum.wavelength_center,
        detector.efficiency,
        detector.temporal_acceptance(pulse_rate),
    )


def total_srs(scheme: NetworkScheme, params: RamanParams,
              detector: DetectorParams = DetectorParams(),
              pulse_rate: float = ProtocolParams().pulse_rate) -> RamanBudget:
    """Raman noise budget of one receiver in ``scheme``."""
    s_f, s_d = _srs_powers(scheme, params)
    rate = _receiver_rate(scheme, s_f + s_d, detector, pulse_rate)
    per_detector = rate / detector.detectors_per_receiver
    return RamanBudget(
        s_f=s_f,
        s_d=s_d,
        receiver_rate=rate,
        count_rate=per_detector,
        per_gate_probability=per_detector / detector.gate_rate,
    )


@dataclass(frozen=True)
class Measurement:
    scheme: NetworkScheme
    observed: float  # receiver counts/s


@dataclass(frozen=True)
class Calibration:
    params: RamanParams
    predicted: tuple
    residuals: tuple  # relative: predicted / observed - 1

    def fragment(self):
        """Config fragment holding the fitted coefficients."""
        return {"raman": self.params.to_dict(),
                "calibration_residuals": list(self.residuals)}

    def to_json(self):
        return json.dumps(self.fragment(), indent=2)


def _unit_rates(scheme, base, detector, pulse_rate):
    """Receiver rates of the feeder and drop terms at unit coefficients."""
    s_f, s_d = _srs_powers(scheme, replace(base, beta=1.0, beta_drop=1.0))
    return (_receiver_rate(scheme, s_f, detector, pulse_rate),
            _receiver_rate(scheme, s_d, detector, pulse_rate))


def calibrate(measurements, base: RamanParams | None = None,
              detector: DetectorParams = DetectorParams(),
              pulse_rate: float = ProtocolParams().pulse_rate,
              split: bool = False) -> Calibration:
    """Fit SRS coefficients to observed receiver count rates.

    The model is linear in the coefficients, so the fit is a weighted
    linear least-squares problem on the relative error. With ``split`` the
    feeder and drop coefficients are fitted independently.
    """
    measurements = list(measurements)
    if not measurements:
        raise ValueError("need at least one measurement")
    obs = np.array([m.observed for m in measurements], dtype=float)
    if np.any(obs < 0):
        raise ValueError("observed count rates must be non-negative")
    if not np.any(obs > 0):
        raise ValueError("all observations are zero; nothing to fit")
    if np.any(obs == 0):
        raise ValueError("zero observations cannot be weighted by relative error")
    base = RamanParams(beta=1.0) if base is None else base
    cols = np.array([_unit_rates(m.scheme, base, detector, pulse_rate) for m in measurements])
    if split:
        design = cols / obs[:, None]
        if np.linalg.matrix_rank(design) < 2:
            raise ValueError("measurements do not separate feeder and drop contributions")
        coef, *_ = np.linalg.lstsq(design, np.ones(len(obs)), rcond=None)
        beta_f, beta_d = coef
    else:
        design = (cols.sum(axis=1) / obs)[:, None]
        coef, *_ = np.linalg.lstsq(design, np.ones(len(obs)), rcond=None)
        beta_f = beta_d = coef[0]
    if beta_d <= 0 or (beta_f <= 0 and np.any(cols[:, 0] > 0)):
        raise ValueError(f"fit produced non-physical coefficients ({beta_f}, {beta_d})")
    if beta_f <= 0:
        beta_f = beta_d
    params = replace(base, beta=float(beta_f), beta_drop=float(beta_d))
    predicted = cols @ np.array([beta_f, beta_d])
    return Calibration(params, tuple(predicted.tolist()), tuple((predicted / obs - 1).tolist()))
