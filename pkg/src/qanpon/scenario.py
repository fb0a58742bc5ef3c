"""Scenario files: loading, validation, single-point evaluation and sweeps.

A scenario is a JSON object::

    {
      "catalog":  "default" | "<path to catalog json>" | {inline catalog},
      "scheme":   {"kind": "full" | "dual_feeder" | "dual_splitter",
                   "feeder_km": 5, "drop_km": 1, "n": 64,
                   "quantum_n": null, "olt_attenuation_db": 0,
                   "stages": ["MUX", "DEMUX"]},
      "raman":    {"beta": ..., "beta_drop": ..., "alpha_c": ..., "alpha_q": ...},
      "protocol": {"mu": 0.4, "nu": 0.1, "e_detector": ..., "f_ec": ..., ...},
      "detector": {"efficiency": 0.15, "dark_per_gate": 2e-7, ...},
      "sweep":    [{"path": "scheme.feeder_km", "start": 1, "stop": 25, "step": 1},
                   {"path": "scheme.olt_attenuation_db", "values": [3, 6, 9]},
                   {"paths": ["scheme.n", "scheme.quantum_n"], "values": [[32, 16], [16, 16]]}]
    }

Only ``scheme`` is required; every other section falls back to the
shipped defaults. ``scheme.stages`` defaults to MUX and DEMUX, plus FILTER
for the partial schemes; an empty list removes every WDM stage. Sweep axes are expanded as a Cartesian product with the
first axis varying slowest.
"""

from __future__ import annotations

import copy
import csv
import io
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import jsonschema

from .keyrate import Evaluation, evaluate
from .odn import DEFAULT_CATALOG, Catalog, NetworkScheme, quantum_link_loss
from .params import DetectorParams, ProtocolParams
from .raman import RamanParams

CSV_VERSION = "qanpon-sweep v1"
CSV_COLUMNS = (
    "kind", "feeder_km", "drop_km", "n_classical", "n_quantum", "olt_attenuation_db",
    "mu", "nu", "e_detector", "f_ec", "efficiency", "dark_per_gate",
    "loss_db", "srs_feeder_mw", "srs_drop_mw", "raman_cps", "raman_per_gate",
    "y_0", "q_mu", "e_mu", "q_nu", "e_nu",
    "y_1_lower", "e_1_upper", "q_1", "q_0", "r_per_pulse", "r_bps", "feasible", "error",
)

_NUM = {"type": "number"}
SCHEMA = {
    "type": "object",
    "required": ["scheme"],
    "additionalProperties": False,
    "properties": {
        "catalog": {"type": ["string", "object"]},
        "scheme": {
            "type": "object",
            "required": ["kind", "feeder_km", "n"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["full", "dual_feeder", "dual_splitter"]},
                "feeder_km": {"type": "number", "minimum": 0},
                "drop_km": {"type": "number", "minimum": 0},
                "n": {"type": "integer", "minimum": 1},
                "quantum_n": {"type": ["integer", "null"], "minimum": 1},
                "olt_attenuation_db": {"type": "number", "minimum": 0},
                "stages": {"type": "array", "items": {"enum": ["MUX", "DEMUX", "FILTER"]},
                           "uniqueItems": True},
            },
        },
        "raman": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"beta": _NUM, "beta_drop": {"type": ["number", "null"]},
                           "alpha_c": _NUM, "alpha_q": _NUM},
        },
        "protocol": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mu": _NUM, "nu": _NUM, "vacuum": _NUM, "q_sift": _NUM, "f_ec": _NUM,
                "e_detector": _NUM, "pulse_rate": _NUM, "qber_abort": _NUM,
                "emission_ratio": {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3},
            },
        },
        "detector": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"efficiency": _NUM, "dark_per_gate": _NUM, "gate_rate": _NUM,
                           "detectors_per_receiver": {"type": "integer"}, "gate_width": _NUM},
        },
        "sweep": {
            "type": "array",
            "items": {
                "type": "object",
                "oneOf": [
                    {"required": ["path", "values"]},
                    {"required": ["path", "start", "stop", "step"]},
                    {"required": ["paths", "values"]},
                ],
                "properties": {
                    "path": {"type": "string"},
                    "paths": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                    "values": {"type": "array", "minItems": 1},
                    "start": _NUM, "stop": _NUM,
                    "step": {"type": "number", "exclusiveMinimum": 0},
                },
            },
        },
    },
}


class ConfigError(ValueError):
    """Invalid scenario; the message starts with the offending config path."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path or '<root>'}: {message}")


def scheme_from_dict(d, catalog=DEFAULT_CATALOG):
    stages = None
    if d.get("stages") is not None:
        stages = tuple(catalog.stage(k) for k in d["stages"])
        if None in stages:
            raise ValueError(f"catalog lacks one of the stages {d['stages']}")
    return NetworkScheme.build(
        kind=d["kind"],
        feeder_length=float(d["feeder_km"]),
        n=int(d["n"]),
        drop_length=float(d.get("drop_km", 1.0)),
        olt_attenuation=float(d.get("olt_attenuation_db", 0.0)),
        quantum_n=d.get("quantum_n"),
        catalog=catalog,
        stages=stages,
    )


def scheme_to_dict(s: NetworkScheme):
    d = {"kind": s.kind.value, "feeder_km": s.feeder_length, "drop_km": s.drop_length,
         "n": s.classical_splitter.ratio, "olt_attenuation_db": s.olt_attenuation}
    if s.quantum_splitter is not s.classical_splitter:
        d["quantum_n"] = s.quantum_splitter.ratio
    d["stages"] = [st.kind.value for st in s.stages]
    return d


@dataclass(frozen=True)
class SweepAxis:
    paths: tuple
    values: tuple


@dataclass(frozen=True)
class Scenario:
    scheme: NetworkScheme
    raman: RamanParams
    protocol: ProtocolParams
    detector: DetectorParams
    sweep: tuple = ()
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def evaluate(self) -> Evaluation:
        return evaluate(self.scheme, self.raman, self.protocol, self.detector)

    def points(self):
        """Scenario dicts of every sweep grid point, in output order."""
        if not self.sweep:
            return [self.raw]
        out = []
        for combo in itertools.product(*(axis.values for axis in self.sweep)):
            d = copy.deepcopy(self.raw)
            d.pop("sweep", None)
            for axis, value in zip(self.sweep, combo):
                vals = value if len(axis.paths) > 1 else (value,)
                for p, v in zip(axis.paths, vals):
                    _set_path(d, p, v)
            out.append(d)
        return out


def _set_path(d, path, value):
    keys = path.split(".")
    node = d
    for k in keys[:-1]:
        node = node.setdefault(k, {})
    node[keys[-1]] = value


def _load_catalog(spec, base_dir):
    if spec is None or spec == "default":
        return DEFAULT_CATALOG
    try:
        if isinstance(spec, dict):
            return Catalog.from_dict(spec)
        path = Path(spec)
        if not path.is_absolute() and base_dir is not None:
            path = Path(base_dir) / path
        return Catalog.load(path)
    except (KeyError, TypeError, ValueError, OSError) as exc:
        raise ConfigError("catalog", str(exc)) from exc


def _expand_axis(i, axis):
    where = f"sweep[{i}]"
    if "paths" in axis:
        paths = tuple(axis["paths"])
        values = tuple(tuple(v) if isinstance(v, list) else v for v in axis["values"])
        for v in values:
            if not isinstance(v, tuple) or len(v) != len(paths):
                raise ConfigError(f"{where}.values", f"each value needs {len(paths)} entries")
    else:
        paths = (axis["path"],)
        if "values" in axis:
            values = tuple(axis["values"])
        else:
            start, stop, step = axis["start"], axis["stop"], axis["step"]
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            if count < 1:
                raise ConfigError(where, "empty range")
            values = tuple(round(start + k * step, 12) for k in range(count))
    for p in paths:
        section, _, key = p.partition(".")
        props = SCHEMA["properties"].get(section, {}).get("properties", {})
        if section not in ("scheme", "raman", "protocol", "detector") or key not in props:
            raise ConfigError(f"{where}.path", f"unknown parameter path {p!r}")
    return SweepAxis(paths, values)


def parse_scenario(data, base_dir=None, _sweep=True) -> Scenario:
    """Validate a scenario dict and build its model objects."""
    from .defaults import DEFAULT_RAMAN, SHIPPED

    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = ".".join(str(p) for p in err.absolute_path)
        raise ConfigError(path, err.message)

    catalog = _load_catalog(data.get("catalog"), base_dir)
    try:
        scheme = scheme_from_dict(data["scheme"], catalog)
        quantum_link_loss(scheme)
    except (KeyError, ValueError) as exc:
        raise ConfigError("scheme", str(exc)) from exc
    try:
        raman = RamanParams.from_dict({**DEFAULT_RAMAN.to_dict(), **data.get("raman", {})})
    except ValueError as exc:
        raise ConfigError("raman", str(exc)) from exc
    try:
        protocol = ProtocolParams(**{**SHIPPED["protocol"], **data.get("protocol", {})})
    except ValueError as exc:
        raise ConfigError("protocol", str(exc)) from exc
    try:
        detector = DetectorParams(**data.get("detector", {}))
    except ValueError as exc:
        raise ConfigError("detector", str(exc)) from exc
    sweep = ()
    if _sweep:
        sweep = tuple(_expand_axis(i, a) for i, a in enumerate(data.get("sweep", [])))
    return Scenario(scheme, raman, protocol, detector, sweep, raw=copy.deepcopy(data))


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path}: invalid JSON ({exc})") from exc
    return parse_scenario(data, base_dir=path.parent)


def evaluation_row(ev: Evaluation, scenario: Scenario):
    s, p, d = ev.scheme, scenario.protocol, scenario.detector
    return {
        "kind": s.kind.value,
        "feeder_km": s.feeder_length,
        "drop_km": s.drop_length,
        "n_classical": s.classical_splitter.ratio,
        "n_quantum": s.quantum_splitter.ratio,
        "olt_attenuation_db": s.olt_attenuation,
        "mu": p.mu, "nu": p.nu, "e_detector": p.e_detector, "f_ec": p.f_ec,
        "efficiency": d.efficiency, "dark_per_gate": d.dark_per_gate,
        "loss_db": ev.loss_db,
        "srs_feeder_mw": ev.raman.s_f,
        "srs_drop_mw": ev.raman.s_d,
        "raman_cps": ev.raman.receiver_rate,
        "raman_per_gate": ev.raman.per_gate_probability,
        "y_0": ev.observables.y_0,
        "q_mu": ev.observables.q_mu, "e_mu": ev.observables.e_mu,
        "q_nu": ev.observables.q_nu, "e_nu": ev.observables.e_nu,
        "y_1_lower": ev.key.y_1_lower, "e_1_upper": ev.key.e_1_upper,
        "q_1": ev.key.q_1, "q_0": ev.key.q_0,
        "r_per_pulse": ev.key.r_per_pulse, "r_bps": ev.key.r_bps,
        "feasible": ev.key.feasible,
        "error": "",
    }


def _error_row(point, message):
    row = {c: "" for c in CSV_COLUMNS}
    sch = point.get("scheme", {})
    row.update(kind=sch.get("kind", ""), feeder_km=sch.get("feeder_km", ""),
               drop_km=sch.get("drop_km", 1.0), n_classical=sch.get("n", ""),
               n_quantum=sch.get("quantum_n") or sch.get("n", ""),
               olt_attenuation_db=sch.get("olt_attenuation_db", 0.0),
               feasible=False, error=message)
    return row


def _evaluate_point(point, base_dir):
    try:
        sc = parse_scenario(point, base_dir, _sweep=False)
        return evaluation_row(sc.evaluate(), sc)
    except ValueError as exc:
        return _error_row(point, str(exc))


def run_sweep(scenario: Scenario, base_dir=None, workers=1):
    """Rows for every grid point; bad points become infeasible rows with an error."""
    points = scenario.points()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(lambda pt: _evaluate_point(pt, base_dir), points))
    return [_evaluate_point(pt, base_dir) for pt in points]


def _fmt(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return format(v, ".10g")
    return str(v)


def rows_to_csv(rows):
    buf = io.StringIO()
    buf.write(f"# {CSV_VERSION}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def plan_report(ev: Evaluation, scenario: Scenario):
    """JSON-serializable single-point report."""
    return {
        "scheme": scheme_to_dict(ev.scheme),
        "link_budget": {
            "quantum_loss_db": ev.loss_db,
            "segments": [{"name": s.name, "loss_db": s.loss_db} for s in ev.scheme.quantum_path()],
        },
        "raman": {
            "s_f_mw": ev.raman.s_f,
            "s_d_mw": ev.raman.s_d,
            "receiver_cps": ev.raman.receiver_rate,
            "per_detector_cps": ev.raman.count_rate,
            "per_gate_probability": ev.raman.per_gate_probability,
        },
        "observables": ev.observables.to_dict(),
        "key": ev.key.to_dict(),
        "parameters": {
            "raman": scenario.raman.to_dict(),
            "protocol": scenario.protocol.to_dict(),
            "detector": scenario.detector.to_dict(),
        },
    }


OBSERVABLES = ("q_mu", "e_mu", "q_nu", "e_nu", "y_0")


@dataclass(frozen=True)
class OracleComparison:
    analytic: dict
    simulated: dict
    sigma: dict
    z: dict
    loss_db: float
    raman_per_gate: float
    pulses: int
    seed: int
    threshold: float = 3.0

    @property
    def passed(self):
        return all(abs(v) <= self.threshold for v in self.z.values())

    def to_dict(self):
        return {
            "loss_db": self.loss_db, "raman_per_gate": self.raman_per_gate,
            "pulses": self.pulses, "seed": self.seed, "threshold_sigma": self.threshold,
            "analytic": self.analytic, "simulated": self.simulated,
            "sigma": self.sigma, "z": self.z, "passed": self.passed,
        }


def compare_with_oracle(scenario: Scenario, pulses, seed=0, loss_db=None,
                        simulated_e_detector=None, workers=1, threshold=3.0):
    """Simulate the scenario's link and score the analytic observables against it.

    ``loss_db`` overrides the scheme's link loss (``math.inf`` blocks the
    channel). ``simulated_e_detector`` runs the simulation with a different
    misalignment than the analytic model, as a negative control.
    """
    from .keyrate import background_yield, gains, transmittance
    from .montecarlo import SimConfig, simulate
    from .raman import total_srs

    p, det = scenario.protocol, scenario.detector
    loss = quantum_link_loss(scenario.scheme) if loss_db is None else float(loss_db)
    per_gate = total_srs(scenario.scheme, scenario.raman, det, p.pulse_rate).per_gate_probability
    eta = 0.0 if math.isinf(loss) else transmittance(loss, det)
    analytic = gains(eta, background_yield(per_gate, det), p).to_dict()

    sim_p = p if simulated_e_detector is None else replace(p, e_detector=simulated_e_detector)
    out = simulate(SimConfig(pulses=pulses, seed=seed, protocol=sim_p, detector=det,
                             link_loss=loss, raman_per_gate=per_gate), workers=workers)
    simulated, sigma = out.observables.to_dict(), out.sigma.to_dict()
    z = {}
    for k in OBSERVABLES:
        if k.startswith("e_") and analytic[k.replace("e_", "q_")] == 0:
            # with no clicks the error rate is undefined; both sides report 0.5
            z[k] = 0.0
            continue
        z[k] = (simulated[k] - analytic[k]) / sigma[k]
    return OracleComparison(analytic, simulated, sigma, z, loss, per_gate, pulses, seed, threshold)
