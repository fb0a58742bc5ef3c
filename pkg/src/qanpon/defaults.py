"""Shipped model defaults and the procedures that produced them.

Two quantities are not published and are derived here:

* Raman coefficients: the feeder and drop coefficients are solved from the
  5 km rows of the measured noise table (full and dual-feeder coexistence,
  16 users, full-power OLT). The 20 km rows are held out.
* Misalignment error: the only reported constraint on it is that 9 dB of
  OLT attenuation is what a 20 km feeder in the 16-user full scheme
  requires. The admissible range is therefore the set of values for which
  9 dB still reaches 20 km while 6 dB does not; the default is its midpoint,
  rounded to 1e-4.

``python -m qanpon.defaults`` re-runs both derivations and prints the
result next to the shipped values.
"""

from __future__ import annotations

import json
from dataclasses import replace
from importlib import resources

from scipy.optimize import brentq

from .params import DetectorParams, ProtocolParams
from .raman import Measurement, RamanParams, calibrate


def _data(name):
    return json.loads(resources.files("qanpon").joinpath(f"data/{name}").read_text())


def measured_noise():
    """Measured Raman rows as ``(scheme dict, counts/s)`` pairs."""
    return [(m["scheme"], m["observed_cps"]) for m in _data("noise_measurements.json")["measurements"]]


def noise_measurements(feeder_km=None):
    from .scenario import scheme_from_dict

    rows = []
    for spec, observed in measured_noise():
        if feeder_km is None or spec["feeder_km"] == feeder_km:
            rows.append(Measurement(scheme_from_dict(spec), float(observed)))
    return rows


SHIPPED = _data("defaults.json")
DEFAULT_RAMAN = RamanParams.from_dict(SHIPPED["raman"])


def derive_raman(detector=DetectorParams(), protocol=ProtocolParams()):
    return calibrate(noise_measurements(feeder_km=5), detector=detector,
                     pulse_rate=protocol.pulse_rate, split=True)


def _frontier(e_d, attenuation, raman, protocol, detector):
    from .keyrate import max_feeder_distance
    from .odn import NetworkScheme

    template = NetworkScheme.build("full", 0.0, 16, olt_attenuation=attenuation)
    return max_feeder_distance(template, raman, replace(protocol, e_detector=e_d), detector)


def misalignment_window(raman=None, protocol=ProtocolParams(), detector=DetectorParams(),
                        target_km=20.0, needed_db=9.0, insufficient_db=6.0):
    """Range of misalignment for which ``needed_db`` reaches ``target_km`` and
    ``insufficient_db`` does not."""
    raman = DEFAULT_RAMAN if raman is None else raman
    lo = brentq(lambda e: _frontier(e, insufficient_db, raman, protocol, detector) - target_km,
                0.0, 0.1, xtol=1e-6)
    hi = brentq(lambda e: _frontier(e, needed_db, raman, protocol, detector) - target_km,
                0.0, 0.1, xtol=1e-6)
    return lo, hi


def derive_misalignment(**kw):
    lo, hi = misalignment_window(**kw)
    return round(0.5 * (lo + hi), 4)


def main():
    cal = derive_raman()
    print("raman (derived):", json.dumps(cal.params.to_dict()))
    print("raman (shipped):", json.dumps(DEFAULT_RAMAN.to_dict()))
    print("5 km fit residuals:", cal.residuals)
    lo, hi = misalignment_window(raman=cal.params)
    print(f"misalignment window: [{lo:.5f}, {hi:.5f}] -> {round(0.5 * (lo + hi), 4)}")
    print("misalignment (shipped):", SHIPPED["protocol"]["e_detector"])


if __name__ == "__main__":
    main()
