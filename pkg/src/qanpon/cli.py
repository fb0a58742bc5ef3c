"""Command-line front end.

Exit codes: 0 success, 1 invalid input, 2 Monte Carlo and analytic model disagree.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .defaults import measured_noise
from .raman import Measurement, calibrate
from .scenario import (
    ConfigError,
    compare_with_oracle,
    load_scenario,
    plan_report,
    rows_to_csv,
    run_sweep,
    scheme_from_dict,
)

EXIT_OK, EXIT_INVALID, EXIT_MISMATCH = 0, 1, 2


def _emit(text, out_dir, filename):
    """Write ``text`` to ``out_dir/filename``, or stdout when no directory is given."""
    if out_dir is None:
        sys.stdout.write(text)
        return
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / filename).write_text(text)
    print(f"wrote {out / filename}", file=sys.stderr)


def _json(obj):
    return json.dumps(obj, indent=2, sort_keys=False, default=_default) + "\n"


def _default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def _plan_table(report):
    key = report["key"]
    lines = [
        f"scheme            {report['scheme']}",
        f"quantum loss      {report['link_budget']['quantum_loss_db']:.2f} dB",
    ]
    for seg in report["link_budget"]["segments"]:
        lines.append(f"  {seg['name']:<16}{seg['loss_db']:.2f} dB")
    lines += [
        f"Raman at receiver {report['raman']['receiver_cps']:.1f} counts/s",
        f"Q_mu / E_mu       {report['observables']['q_mu']:.4e} / {report['observables']['e_mu']:.4f}",
        f"key rate          {key['r_bps']:.1f} bit/s ({'feasible' if key['feasible'] else 'infeasible'})",
    ]
    return "\n".join(lines) + "\n"


def cmd_plan(args):
    sc = load_scenario(args.scenario)
    if args.check:
        print(f"{args.scenario}: ok")
        return EXIT_OK
    report = plan_report(sc.evaluate(), sc)
    if args.format == "csv":
        # a plan is the one-point sweep of its own scenario
        _emit(rows_to_csv(run_sweep(replace(sc, sweep=()))), args.out, "plan.csv")
        return EXIT_OK
    if args.out is None:
        sys.stdout.write(_plan_table(report))
    _emit(_json(report), args.out, "plan.json")
    return EXIT_OK


def cmd_sweep(args):
    sc = load_scenario(args.scenario)
    if not sc.sweep:
        raise ConfigError("sweep", "the sweep command needs at least one sweep axis")
    if args.check:
        print(f"{args.scenario}: ok ({len(sc.points())} points)")
        return EXIT_OK
    rows = run_sweep(sc, base_dir=Path(args.scenario).parent, workers=args.workers)
    if args.format == "json":
        _emit(_json(rows), args.out, "sweep.json")
    else:
        _emit(rows_to_csv(rows), args.out, "sweep.csv")
    return EXIT_OK


def _load_measurements(path, feeder_km):
    if path is None:
        rows = measured_noise()
    else:
        try:
            data = json.loads(Path(path).read_text())
            rows = [(m["scheme"], m["observed_cps"]) for m in data["measurements"]]
        except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ConfigError("measurements", str(exc)) from exc
    out = []
    for i, (spec, observed) in enumerate(rows):
        if feeder_km is not None and spec.get("feeder_km") != feeder_km:
            continue
        try:
            out.append(Measurement(scheme_from_dict(spec), float(observed)))
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"measurements[{i}]", str(exc)) from exc
    return out


def cmd_calibrate(args):
    measurements = _load_measurements(args.measurements, args.feeder_km)
    try:
        cal = calibrate(measurements, split=not args.single)
    except ValueError as exc:
        raise ConfigError("measurements", str(exc)) from exc
    report = {
        "raman": cal.params.to_dict(),
        "fit": [
            {"scheme": m.scheme.kind.value, "feeder_km": m.scheme.feeder_length,
             "observed_cps": m.observed, "predicted_cps": pred, "relative_residual": res}
            for m, pred, res in zip(measurements, cal.predicted, cal.residuals)
        ],
    }
    if args.predict:
        from .raman import total_srs
        preds = []
        for m in _load_measurements(args.measurements, None):
            rate = total_srs(m.scheme, cal.params).receiver_rate
            preds.append({"scheme": m.scheme.kind.value, "feeder_km": m.scheme.feeder_length,
                          "observed_cps": m.observed, "predicted_cps": rate,
                          "relative_error": rate / m.observed - 1})
        report["predictions"] = preds
    _emit(_json(report), args.out, "calibration.json")
    return EXIT_OK


def cmd_validate(args):
    sc = load_scenario(args.scenario)
    loss = None if args.loss is None else float(args.loss)
    cmp = compare_with_oracle(sc, args.pulses, args.seed, loss_db=loss,
                              simulated_e_detector=args.inject_e_detector,
                              workers=args.workers)
    lines = [f"{'observable':<8}{'analytic':>14}{'simulated':>14}{'sigma':>12}{'z':>8}"]
    for k, z in cmp.z.items():
        lines.append(f"{k:<8}{cmp.analytic[k]:>14.6e}{cmp.simulated[k]:>14.6e}"
                     f"{cmp.sigma[k]:>12.3e}{z:>8.2f}{'' if abs(z) <= cmp.threshold else '  <-- mismatch'}")
    print("\n".join(lines), file=sys.stderr)
    _emit(_json(cmp.to_dict()), args.out, "validate.json")
    return EXIT_OK if cmp.passed else EXIT_MISMATCH


def cmd_postproc(args):
    from .keyio import write_bits
    from .montecarlo import SimConfig, simulate
    from .postproc import SiftedKeyPair, WinnowConfig, distill
    from .raman import total_srs
    from .odn import quantum_link_loss

    sc = load_scenario(args.scenario)
    p, det = sc.protocol, sc.detector
    per_gate = total_srs(sc.scheme, sc.raman, det, p.pulse_rate).per_gate_probability
    sim = simulate(SimConfig(pulses=args.pulses, seed=args.seed, protocol=p, detector=det,
                             link_loss=quantum_link_loss(sc.scheme), raman_per_gate=per_gate),
                   workers=args.workers)
    n = len(sim.sender_bits)
    if n < 8:
        raise ConfigError("pulses", f"only {n} sifted signal bits; increase --pulses")
    pair = SiftedKeyPair(sim.sender_bits, sim.receiver_bits, qber=min(sim.sifted_qber, 0.5))
    result = distill(pair, sim.observables, p, WinnowConfig(seed=args.seed), seed=args.seed)
    report = {
        "simulation": sim.to_dict(),
        "postprocessing": result.accounting(sifted_length=n),
    }
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_bits(out / "sender.key", result.sender_key)
        write_bits(out / "receiver.key", result.receiver_key)
    _emit(_json(report), args.out, "postproc.json")
    return EXIT_OK


def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_int(text):
    v = int(float(text))
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qanpon",
        description="Plan and check quantum key distribution links sharing a passive optical network.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario=True, fmt=None):
        if scenario:
            p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--out", default=None, help="output directory (default: stdout)")
        if fmt:
            p.add_argument("--format", choices=("csv", "json"), default=fmt)

    p = sub.add_parser("plan", help="evaluate one network point")
    common(p, fmt="json")
    p.add_argument("--check", action="store_true", help="only validate the scenario")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("sweep", help="evaluate a Cartesian parameter grid")
    common(p, fmt="csv")
    p.add_argument("--check", action="store_true", help="only validate the scenario")
    p.add_argument("--workers", type=_positive_int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("calibrate", help="fit Raman coefficients to measured noise counts")
    common(p, scenario=False)
    p.add_argument("--measurements", default=None,
                   help="measurement JSON (default: the shipped noise table)")
    p.add_argument("--feeder-km", type=float, default=None,
                   help="fit only rows with this feeder length")
    p.add_argument("--single", action="store_true",
                   help="fit one coefficient shared by feeder and drop fibre")
    p.add_argument("--predict", action="store_true",
                   help="also predict every row of the measurement file")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("validate", help="compare the analytic model with a Monte Carlo run")
    common(p)
    p.add_argument("--pulses", type=_positive_int, default=10_000_000)
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--loss", default=None, help="override link loss in dB ('inf' blocks the link)")
    p.add_argument("--inject-e-detector", type=float, default=None,
                   help="simulate with this misalignment instead (negative control)")
    p.add_argument("--workers", type=_positive_int, default=1)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("postproc", help="simulate, reconcile and privacy-amplify a key")
    common(p)
    p.add_argument("--pulses", type=_positive_int, default=10_000_000)
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.set_defaults(func=cmd_postproc)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
