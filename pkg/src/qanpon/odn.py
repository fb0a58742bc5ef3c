"""Optical distribution network: signals, splitters, WDM stages and the
three ways the quantum channel can share a 10G-EPON tree.

Losses are handled in dB at the interface and converted to linear
transmittance wherever powers are combined.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from pathlib import Path

import numpy as np

from .params import DetectorParams, ProtocolParams
from .units import db_to_linear, dbm_to_mw, mw_to_dbm, photon_flux


class Direction(str, Enum):
    DOWNSTREAM = "downstream"
    UPSTREAM = "upstream"


class StageKind(str, Enum):
    MUX = "MUX"
    DEMUX = "DEMUX"
    FILTER = "FILTER"


class SchemeKind(str, Enum):
    FULL = "full"
    DUAL_FEEDER = "dual_feeder"
    DUAL_SPLITTER = "dual_splitter"

    @property
    def partial(self):
        return self is not SchemeKind.FULL


class Point(str, Enum):
    FEEDER_ENTRY = "feeder-entry"
    SPLITTER_EXIT = "splitter-exit"
    DROP_ENTRY = "drop-entry"


@dataclass(frozen=True)
class SignalSpec:
    """One wavelength channel of the shared fiber plant.

    ``family`` is the key used for stage insertion losses and isolations
    when the exact ``name`` is not listed (both OLT lasers share one
    transceiver and are quoted as a single "OLT" loss).
    """

    name: str
    wavelength_center: float
    wavelength_range: tuple
    direction: Direction
    data_rate: float
    attenuation: float
    launch_power: float | None = None
    family: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction(self.direction))
        object.__setattr__(self, "wavelength_range", tuple(float(w) for w in self.wavelength_range))
        if self.family is None:
            object.__setattr__(self, "family", self.name)
        lo, hi = self.wavelength_range
        if not lo <= self.wavelength_center <= hi:
            raise ValueError(
                f"{self.name}: center {self.wavelength_center} nm outside range {self.wavelength_range}"
            )
        if self.attenuation <= 0:
            raise ValueError(f"{self.name}: attenuation must be positive")

    @property
    def classical(self):
        return self.launch_power is not None

    def to_dict(self):
        return {
            "name": self.name,
            "family": self.family,
            "wavelength_center": self.wavelength_center,
            "wavelength_range": list(self.wavelength_range),
            "direction": self.direction.value,
            "data_rate": self.data_rate,
            "attenuation": self.attenuation,
            "launch_power": self.launch_power,
        }


@dataclass(frozen=True)
class PowerSplitter:
    ratio: int
    insertion_loss: float

    def __post_init__(self):
        if self.ratio < 1:
            raise ValueError(f"splitter ratio must be >= 1, got {self.ratio}")
        # allow for rounding in the quoted catalog values
        if self.insertion_loss < 10 * math.log10(self.ratio) - 1e-9:
            raise ValueError(
                f"1:{self.ratio} splitter loss {self.insertion_loss} dB is below the ideal split"
            )

    @property
    def excess_loss(self):
        return self.insertion_loss - 10 * math.log10(self.ratio)

    @property
    def transmittance(self):
        return db_to_linear(self.insertion_loss)


@dataclass(frozen=True)
class WdmStage:
    kind: StageKind
    insertion_loss: dict
    isolation: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "kind", StageKind(self.kind))
        object.__setattr__(self, "insertion_loss", dict(self.insertion_loss))
        object.__setattr__(self, "isolation", {tuple(k): float(v) for k, v in dict(self.isolation).items()})
        for label, loss in self.insertion_loss.items():
            if loss < 0:
                raise ValueError(f"{self.kind.value}: negative insertion loss for {label}")
        for pair, iso in self.isolation.items():
            if iso < 0:
                raise ValueError(f"{self.kind.value}: negative isolation for {pair}")

    def loss_for(self, signal: SignalSpec):
        """Insertion loss for ``signal`` or ``None`` if the stage does not list it."""
        for key in (signal.name, signal.family):
            if key in self.insertion_loss:
                return self.insertion_loss[key]
        return None

    def isolation_for(self, interferer: SignalSpec, victim: SignalSpec):
        for a in (interferer.name, interferer.family):
            for b in (victim.name, victim.family):
                if (a, b) in self.isolation:
                    return self.isolation[(a, b)]
        return 0.0

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "insertion_loss": dict(self.insertion_loss),
            "isolation": [
                {"interferer": a, "victim": b, "db": v} for (a, b), v in self.isolation.items()
            ],
        }


@dataclass(frozen=True)
class Catalog:
    """Signal plan, splitter table and WDM modules of one deployment."""

    signals: tuple
    splitters: dict
    stages: tuple
    olt_launch_dbm: float = 7.2
    olt_family: str = "OLT"
    quantum_signal: str = "QKD-Sig"

    def signal(self, name):
        for s in self.signals:
            if s.name == name:
                return s
        raise KeyError(f"unknown signal {name!r}")

    @property
    def quantum(self) -> SignalSpec:
        return self.signal(self.quantum_signal)

    @property
    def olt(self) -> SignalSpec:
        """The aggregate OLT pump: catalog launch power, OLT-family attenuation."""
        members = [s for s in self.signals if s.family == self.olt_family]
        if not members:
            raise KeyError(f"no signal in family {self.olt_family!r}")
        lo = min(s.wavelength_range[0] for s in members)
        hi = max(s.wavelength_range[1] for s in members)
        return SignalSpec(
            name=self.olt_family,
            family=self.olt_family,
            wavelength_center=members[-1].wavelength_center,
            wavelength_range=(lo, hi),
            direction=Direction.DOWNSTREAM,
            data_rate=sum(s.data_rate for s in members),
            attenuation=members[0].attenuation,
            launch_power=self.olt_launch_dbm,
        )

    def stage(self, kind):
        kind = StageKind(kind)
        for st in self.stages:
            if st.kind is kind:
                return st
        return None

    @classmethod
    def from_dict(cls, data):
        signals = tuple(
            SignalSpec(
                name=s["name"],
                family=s.get("family"),
                wavelength_center=s["wavelength_center"],
                wavelength_range=s["wavelength_range"],
                direction=s["direction"],
                data_rate=s["data_rate"],
                attenuation=s["attenuation"],
                launch_power=s.get("launch_power"),
            )
            for s in data["signals"]
        )
        stages = tuple(
            WdmStage(
                kind=st["kind"],
                insertion_loss=st["insertion_loss"],
                isolation={(i["interferer"], i["victim"]): i["db"] for i in st.get("isolation", [])},
            )
            for st in data["stages"]
        )
        splitters = {int(k): float(v) for k, v in data["splitters"].items()}
        return cls(
            signals=signals,
            splitters=splitters,
            stages=stages,
            olt_launch_dbm=data.get("olt_launch_dbm", 7.2),
            olt_family=data.get("olt_family", "OLT"),
            quantum_signal=data.get("quantum_signal", "QKD-Sig"),
        )

    def to_dict(self):
        return {
            "version": 1,
            "olt_launch_dbm": self.olt_launch_dbm,
            "olt_family": self.olt_family,
            "quantum_signal": self.quantum_signal,
            "signals": [s.to_dict() for s in self.signals],
            "splitters": {str(k): v for k, v in sorted(self.splitters.items())},
            "stages": [st.to_dict() for st in self.stages],
        }

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))

    def dump(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def _load_default_catalog():
    text = resources.files("qanpon").joinpath("data/catalog.json").read_text()
    return Catalog.from_dict(json.loads(text))


DEFAULT_CATALOG = _load_default_catalog()


def splitter_loss(n, table=None):
    """Average insertion loss (dB) of a 1:n power splitter.

    Catalog ratios return the measured value. Other powers of two get the
    ideal ``10 log10(n)`` plus an excess loss interpolated linearly in
    ``log2(n)`` between catalog points (extrapolated from the outermost
    segment past the largest one, and anchored at zero excess for n = 1).
    """
    table = DEFAULT_CATALOG.splitters if table is None else table
    n = int(n)
    if n in table:
        return table[n]
    if n < 1 or n & (n - 1):
        raise ValueError(f"splitter ratio must be a power of two, got {n}")
    if n == 1:
        return 0.0
    xs = [0.0] + [math.log2(k) for k in sorted(table)]
    ex = [0.0] + [table[k] - 10 * math.log10(k) for k in sorted(table)]
    x = math.log2(n)
    if x > xs[-1]:
        slope = (ex[-1] - ex[-2]) / (xs[-1] - xs[-2])
        excess = ex[-1] + slope * (x - xs[-1])
    else:
        excess = float(np.interp(x, xs, ex))
    return 10 * math.log10(n) + max(excess, 0.0)


def make_splitter(n, table=None):
    return PowerSplitter(int(n), splitter_loss(n, table))


@dataclass(frozen=True)
class Segment:
    """One element along a signal path."""

    name: str
    loss_db: float

    @property
    def transmittance(self):
        return db_to_linear(self.loss_db)


@dataclass(frozen=True)
class NetworkScheme:
    """A coexistence topology with its geometry.

    In the partial schemes the quantum signal rides a second feeder of the
    same length and joins the classical tree at (``DUAL_FEEDER``) or after
    (``DUAL_SPLITTER``) the power splitter; the OLT signal is cleaned by the
    FILTER stage before that point.
    """

    kind: SchemeKind
    feeder_length: float
    classical_splitter: PowerSplitter
    drop_length: float = 1.0
    quantum_splitter: PowerSplitter | None = None
    olt_attenuation: float = 0.0
    stages: tuple | None = None
    catalog: Catalog = DEFAULT_CATALOG

    def __post_init__(self):
        object.__setattr__(self, "kind", SchemeKind(self.kind))
        if self.feeder_length < 0 or self.drop_length < 0:
            raise ValueError("fiber lengths must be >= 0")
        if self.olt_attenuation < 0:
            raise ValueError("olt_attenuation must be >= 0")
        if self.quantum_splitter is None:
            object.__setattr__(self, "quantum_splitter", self.classical_splitter)
        elif self.kind is not SchemeKind.DUAL_SPLITTER and self.quantum_splitter != self.classical_splitter:
            raise ValueError("only the dual-splitter scheme may use a separate quantum splitter")
        if self.stages is None:
            kinds = (StageKind.MUX, StageKind.DEMUX)
            if self.kind.partial:
                kinds = (StageKind.MUX, StageKind.FILTER, StageKind.DEMUX)
            stages = tuple(st for k in kinds if (st := self.catalog.stage(k)) is not None)
            object.__setattr__(self, "stages", stages)
        else:
            object.__setattr__(self, "stages", tuple(self.stages))

    @classmethod
    def build(cls, kind, feeder_length, n, drop_length=1.0, olt_attenuation=0.0,
              quantum_n=None, catalog=None, stages=None):
        """Convenience constructor taking splitter ratios instead of splitters."""
        catalog = DEFAULT_CATALOG if catalog is None else catalog
        classical = make_splitter(n, catalog.splitters)
        quantum = make_splitter(quantum_n, catalog.splitters) if quantum_n is not None else None
        return cls(
            kind=kind,
            feeder_length=feeder_length,
            drop_length=drop_length,
            classical_splitter=classical,
            quantum_splitter=quantum,
            olt_attenuation=olt_attenuation,
            stages=stages,
            catalog=catalog,
        )

    def with_(self, **changes):
        return replace(self, **changes)

    def stage(self, kind):
        kind = StageKind(kind)
        for st in self.stages:
            if st.kind is kind:
                return st
        return None

    def _stage_segment(self, kind, signal, required):
        st = self.stage(kind)
        if st is None:
            return []
        loss = st.loss_for(signal)
        if loss is None:
            if required:
                raise KeyError(f"{kind.value} stage has no insertion loss for {signal.name}")
            return []
        return [Segment(kind.value, loss)]

    def quantum_path(self):
        """Segments from the QKD transmitter to one QKD receiver."""
        q = self.catalog.quantum
        segs = []
        if self.kind is SchemeKind.FULL:
            segs += self._stage_segment(StageKind.MUX, q, required=True)
        segs.append(Segment("feeder", q.attenuation * self.feeder_length))
        if self.kind is SchemeKind.DUAL_FEEDER:
            segs += self._stage_segment(StageKind.FILTER, q, required=True)
        segs.append(Segment("splitter", self.quantum_splitter.insertion_loss))
        if self.kind is SchemeKind.DUAL_SPLITTER:
            segs += self._stage_segment(StageKind.FILTER, q, required=True)
        segs.append(Segment("drop", q.attenuation * self.drop_length))
        segs += self._stage_segment(StageKind.DEMUX, q, required=True)
        return tuple(segs)

    def olt_path(self, signal=None, through=Point.DROP_ENTRY):
        """Segments of the downstream classical path up to ``through``.

        The OLT attenuator comes first, ahead of any stage.
        """
        signal = self.catalog.olt if signal is None else signal
        through = Point(through)
        segs = [Segment("olt-attenuator", self.olt_attenuation)]
        segs += self._stage_segment(StageKind.MUX, signal, required=False)
        if through is Point.FEEDER_ENTRY:
            return tuple(segs)
        segs.append(Segment("feeder", signal.attenuation * self.feeder_length))
        if self.kind.partial:
            segs += self._stage_segment(StageKind.FILTER, signal, required=False)
        segs.append(Segment("splitter", self.classical_splitter.insertion_loss))
        return tuple(segs)


def path_loss(segments):
    """Total loss in dB of a sequence of segments."""
    return float(sum(s.loss_db for s in segments))


def path_transmittance(segments):
    """Total linear transmittance of a sequence of segments."""
    t = 1.0
    for s in segments:
        t *= s.transmittance
    return t


def quantum_link_loss(scheme: NetworkScheme) -> float:
    """Transmitter-to-receiver loss of the quantum signal in dB (per user)."""
    return path_loss(scheme.quantum_path())


def olt_power_at(scheme: NetworkScheme, point=Point.FEEDER_ENTRY) -> float:
    """OLT power in dBm at ``point`` of the classical tree."""
    return scheme.catalog.olt_launch_dbm - path_loss(scheme.olt_path(through=point))


def olt_power_mw(scheme: NetworkScheme, point=Point.FEEDER_ENTRY) -> float:
    return dbm_to_mw(scheme.catalog.olt_launch_dbm) * path_transmittance(scheme.olt_path(through=point))


@dataclass(frozen=True)
class CrosstalkEntry:
    signal: str
    residual_dbm: float
    count_rate: float
    dark_rate: float
    ratio_to_dark: float
    ok: bool


def validate_channel_plan(scheme: NetworkScheme, detector: DetectorParams = DetectorParams(),
                          protocol: ProtocolParams = ProtocolParams(), max_fraction=0.1,
                          signals=None):
    """Residual linear crosstalk of every classical channel at one QKD receiver.

    Downstream signals traverse the classical tree (same attenuator, MUX,
    feeder, FILTER and splitter as the OLT pump) and the drop fiber before
    the receiver DEMUX; upstream ONU lasers sit at the user node and meet the
    DEMUX directly. The leaked power is reduced by the isolation of every
    stage it crosses and converted to a receiver click rate, which is
    compared with ``max_fraction`` of the receiver's summed dark-count rate.
    """
    signals = scheme.catalog.signals if signals is None else signals
    victim = scheme.catalog.quantum
    dark = detector.dark_rate * detector.detectors_per_receiver
    acceptance = detector.temporal_acceptance(protocol.pulse_rate)
    report = []
    for sig in signals:
        if not sig.classical or sig.name == victim.name:
            continue
        if sig.direction is Direction.DOWNSTREAM:
            segs = list(scheme.olt_path(sig, through=Point.DROP_ENTRY))
            segs.append(Segment("drop", sig.attenuation * scheme.drop_length))
            crossed = [st for st in scheme.stages if st.kind is not StageKind.DEMUX
                       and (st.kind is StageKind.MUX or scheme.kind.partial)]
        else:
            segs = []
            crossed = []
        demux = scheme.stage(StageKind.DEMUX)
        if demux is not None:
            crossed.append(demux)
        isolation = sum(st.isolation_for(sig, victim) for st in crossed)
        residual = sig.launch_power - path_loss(segs) - isolation
        rate = power_to_count_rate(dbm_to_mw(residual), sig.wavelength_center,
                                   detector.efficiency, acceptance)
        ratio = rate / dark if dark > 0 else math.inf
        report.append(CrosstalkEntry(sig.name, residual, rate, dark, ratio, ratio <= max_fraction))
    return report


def power_to_count_rate(p_mw, wavelength_nm, det_efficiency, temporal_acceptance):
    """Detected counts per second from an optical power ``p_mw`` at ``wavelength_nm``."""
    if p_mw < 0 or det_efficiency < 0 or temporal_acceptance < 0:
        raise ValueError("power, efficiency and acceptance must be non-negative")
    if det_efficiency > 1 or temporal_acceptance > 1:
        raise ValueError("efficiency and acceptance are fractions in [0, 1]")
    return photon_flux(p_mw, wavelength_nm) * det_efficiency * temporal_acceptance


__all__ = [
    "Catalog", "CrosstalkEntry", "DEFAULT_CATALOG", "Direction", "NetworkScheme", "Point",
    "PowerSplitter", "SchemeKind", "Segment", "SignalSpec", "StageKind", "WdmStage",
    "make_splitter", "mw_to_dbm", "olt_power_at", "olt_power_mw", "path_loss",
    "path_transmittance", "power_to_count_rate", "quantum_link_loss", "splitter_loss",
    "validate_channel_plan",
]
