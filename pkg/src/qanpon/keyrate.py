"""Asymptotic decoy-state BB84 key rate with vacuum + weak decoy bounds.

Channel model: a pulse of mean photon number ``m`` is detected with
probability ``Y0 + 1 - exp(-eta m)``; background clicks carry a random bit
and signal clicks a misalignment error ``e_detector``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .odn import NetworkScheme, make_splitter, quantum_link_loss
from .params import DetectorParams, ProtocolParams
from .raman import RamanBudget, RamanParams, total_srs
from .units import db_to_linear

E0 = 0.5
CAPACITIES = (4, 8, 16, 32, 64)


@dataclass(frozen=True)
class ChannelObservables:
    q_mu: float
    q_nu: float
    e_mu: float
    e_nu: float
    y_0: float

    def to_dict(self):
        return {"q_mu": self.q_mu, "q_nu": self.q_nu, "e_mu": self.e_mu,
                "e_nu": self.e_nu, "y_0": self.y_0}


@dataclass(frozen=True)
class DecoyBounds:
    y_1_lower: float
    e_1_upper: float


@dataclass(frozen=True)
class KeyRateResult:
    y_1_lower: float
    e_1_upper: float
    q_1: float
    q_0: float
    r_per_pulse: float
    r_bps: float
    feasible: bool

    def to_dict(self):
        return {"y_1_lower": self.y_1_lower, "e_1_upper": self.e_1_upper, "q_1": self.q_1,
                "q_0": self.q_0, "r_per_pulse": self.r_per_pulse, "r_bps": self.r_bps,
                "feasible": self.feasible}


def binary_entropy(x):
    if not 0 <= x <= 1:
        raise ValueError(f"binary entropy needs x in [0, 1], got {x}")
    if x == 0 or x == 1:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def transmittance(loss, det: DetectorParams = DetectorParams()):
    """Overall single-photon detection probability for a link of ``loss`` dB."""
    if loss < 0:
        raise ValueError("loss must be >= 0")
    return db_to_linear(loss) * det.efficiency


def background_yield(raman_per_gate, det: DetectorParams = DetectorParams()):
    """Per-pulse click probability without signal: dark + Raman on every detector."""
    y0 = det.detectors_per_receiver * (det.dark_per_gate + raman_per_gate)
    return min(max(y0, 0.0), 1.0)


def _gain_and_qber(eta, intensity, y_0, e_d):
    signal = -math.expm1(-eta * intensity)
    q = min(y_0 + signal, 1.0)
    if q == 0:
        return 0.0, E0
    return q, (E0 * y_0 + e_d * signal) / (y_0 + signal)


def gains(eta, y_0, p: ProtocolParams = ProtocolParams()) -> ChannelObservables:
    if not 0 <= eta <= 1:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    if not 0 <= y_0 < 1:
        raise ValueError(f"y_0 must lie in [0, 1), got {y_0}")
    q_mu, e_mu = _gain_and_qber(eta, p.mu, y_0, p.e_detector)
    q_nu, e_nu = _gain_and_qber(eta, p.nu, y_0, p.e_detector)
    return ChannelObservables(q_mu=q_mu, q_nu=q_nu, e_mu=e_mu, e_nu=e_nu, y_0=y_0)


def decoy_bounds(obs: ChannelObservables, p: ProtocolParams = ProtocolParams()) -> DecoyBounds:
    """Lower bound on the single-photon yield and upper bound on its error rate.

    A non-positive yield bound is returned as 0 with ``e_1_upper = 0.5``;
    the key rate then comes out infeasible.
    """
    mu, nu = p.mu, p.nu
    y1 = (mu / (mu * nu - nu ** 2)) * (
        obs.q_nu * math.exp(nu)
        - obs.q_mu * math.exp(mu) * nu ** 2 / mu ** 2
        - (mu ** 2 - nu ** 2) / mu ** 2 * obs.y_0
    )
    if y1 <= 0:
        return DecoyBounds(0.0, E0)
    y1 = min(y1, 1.0)
    e1 = (obs.e_nu * obs.q_nu * math.exp(nu) - E0 * obs.y_0) / (y1 * nu)
    return DecoyBounds(y1, min(max(e1, 0.0), E0))


def secure_key_rate(obs: ChannelObservables, bounds: DecoyBounds,
                    p: ProtocolParams = ProtocolParams()) -> KeyRateResult:
    q_1 = bounds.y_1_lower * p.mu * math.exp(-p.mu)
    q_0 = obs.y_0 * math.exp(-p.mu)
    raw = p.q_sift * (
        q_1 * (1 - binary_entropy(bounds.e_1_upper))
        - p.f_ec * obs.q_mu * binary_entropy(min(obs.e_mu, 0.5))
        + q_0
    )
    r = max(raw, 0.0)
    feasible = r > 0 and obs.e_mu <= p.qber_abort
    r_bps = r * p.pulse_rate * p.signal_fraction if feasible else 0.0
    return KeyRateResult(
        y_1_lower=bounds.y_1_lower,
        e_1_upper=bounds.e_1_upper,
        q_1=q_1,
        q_0=q_0,
        r_per_pulse=r,
        r_bps=r_bps,
        feasible=feasible,
    )


def key_rate(loss, raman_per_gate, p: ProtocolParams = ProtocolParams(),
             det: DetectorParams = DetectorParams()):
    """Observables and key rate for a link of ``loss`` dB with the given Raman noise."""
    obs = gains(transmittance(loss, det), background_yield(raman_per_gate, det), p)
    return obs, secure_key_rate(obs, decoy_bounds(obs, p), p)


@dataclass(frozen=True)
class Evaluation:
    """Everything computed for one network geometry."""

    scheme: NetworkScheme
    loss_db: float
    raman: RamanBudget
    observables: ChannelObservables
    key: KeyRateResult


def evaluate(scheme: NetworkScheme, raman: RamanParams, p: ProtocolParams = ProtocolParams(),
             det: DetectorParams = DetectorParams()) -> Evaluation:
    loss = quantum_link_loss(scheme)
    budget = total_srs(scheme, raman, det, p.pulse_rate)
    obs, result = key_rate(loss, budget.per_gate_probability, p, det)
    return Evaluation(scheme, loss, budget, obs, result)


def max_feeder_distance(template: NetworkScheme, raman: RamanParams,
                        p: ProtocolParams = ProtocolParams(),
                        det: DetectorParams = DetectorParams(),
                        upper=200.0, tol=0.01):
    """Longest feeder (km) for which ``template`` still yields a key.

    Assumes feasibility is monotone in feeder length; bisects to ``tol``.
    """
    def ok(length):
        return evaluate(template.with_(feeder_length=length), raman, p, det).key.feasible

    if not ok(0.0):
        return 0.0
    if ok(upper):
        return upper
    lo, hi = 0.0, upper
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def capacity_table(template: NetworkScheme, raman: RamanParams,
                   p: ProtocolParams = ProtocolParams(),
                   det: DetectorParams = DetectorParams(), capacities=CAPACITIES):
    """Key rate of ``template`` re-split for each capacity (both splitters)."""
    table = {}
    for n in capacities:
        splitter = make_splitter(n, template.catalog.splitters)
        scheme = replace(template, classical_splitter=splitter, quantum_splitter=splitter)
        table[n] = evaluate(scheme, raman, p, det)
    return table
