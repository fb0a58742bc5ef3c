import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qanpon.defaults import DEFAULT_RAMAN
from qanpon.odn import NetworkScheme, Point, olt_power_mw, power_to_count_rate
from qanpon.params import DetectorParams
from qanpon.raman import (
    Measurement,
    RamanParams,
    calibrate,
    srs_drop,
    srs_feeder,
    total_srs,
)

AC = 0.07138
AQ = 0.08059
PARAMS = RamanParams(beta=1e-6, alpha_c=AC, alpha_q=AQ)


def feeder_oracle(p, lf, ld, n, beta, ac, aq):
    mpmath.mp.dps = 50
    p, lf, ld, n, beta, ac, aq = map(mpmath.mpf, (p, lf, ld, n, beta, ac, aq))
    return p * beta / (aq - ac) * (mpmath.e ** (-ac * lf) - mpmath.e ** (-aq * lf)) / n * mpmath.e ** (-aq * ld)


def drop_oracle(p, lf, ld, n, beta, ac, aq):
    mpmath.mp.dps = 50
    p, lf, ld, n, beta, ac, aq = map(mpmath.mpf, (p, lf, ld, n, beta, ac, aq))
    return p / n * mpmath.e ** (-ac * lf) * beta / (aq - ac) * (mpmath.e ** (-ac * ld) - mpmath.e ** (-aq * ld))


def test_feeder_reference_point():
    got = srs_feeder(1.0, 5.0, 1.0, 16, PARAMS)
    want = float(feeder_oracle(1.0, 5.0, 1.0, 16, 1e-6, AC, AQ))
    assert got == pytest.approx(want, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 10), st.floats(0.1, 50), st.floats(0, 10), st.sampled_from([1, 4, 16, 64]))
def test_equations_match_high_precision(p, lf, ld, n):
    f = srs_feeder(p, lf, ld, n, PARAMS)
    d = srs_drop(p, lf, ld, n, PARAMS)
    assert f == pytest.approx(float(feeder_oracle(p, lf, ld, n, 1e-6, AC, AQ)), rel=1e-12)
    if ld > 0:
        assert d == pytest.approx(float(drop_oracle(p, lf, ld, n, 1e-6, AC, AQ)), rel=1e-12)


@pytest.mark.parametrize("fn", [srs_feeder, srs_drop])
def test_no_pump_no_noise(fn):
    assert fn(0.0, 5.0, 1.0, 16, PARAMS) == 0.0


def test_zero_lengths():
    assert srs_feeder(1.0, 0.0, 1.0, 16, PARAMS) == 0.0
    assert srs_drop(1.0, 5.0, 0.0, 16, PARAMS) == 0.0


def test_drop_halves_with_double_split():
    assert srs_drop(1.0, 5.0, 1.0, 32, PARAMS) == pytest.approx(srs_drop(1.0, 5.0, 1.0, 16, PARAMS) / 2)


def test_drop_feeder_distance_ratio():
    params = RamanParams(beta=1e-6)
    ratio = srs_drop(1.0, 20.0, 1.0, 16, params) / srs_drop(1.0, 5.0, 1.0, 16, params)
    assert ratio == pytest.approx(10 ** (-0.31 * 15 / 10), rel=1e-12)
    assert ratio == pytest.approx(0.342, abs=1e-3)


@pytest.mark.parametrize("fn", [srs_feeder, srs_drop])
@pytest.mark.parametrize("bad", [(-1, 5, 1, 16), (1, -5, 1, 16), (1, 5, -1, 16), (1, 5, 1, 0.5)])
def test_preconditions(fn, bad):
    with pytest.raises(ValueError):
        fn(*bad, PARAMS)


@given(st.floats(1e-3, 100), st.floats(1e-3, 100), st.floats(1e-9, 1e-3))
def test_linear_in_power_and_beta(k_p, k_b, beta):
    params = RamanParams(beta=beta)
    scaled = RamanParams(beta=beta * k_b)
    for fn in (srs_feeder, srs_drop):
        base = fn(1.0, 7.0, 1.5, 8, params)
        assert fn(k_p, 7.0, 1.5, 8, params) == pytest.approx(k_p * base, rel=1e-12)
        assert fn(1.0, 7.0, 1.5, 8, scaled) == pytest.approx(k_b * base, rel=1e-12)


@pytest.mark.parametrize("alpha", [0.05, 0.0714, 0.2])
@pytest.mark.parametrize("length", [0.5, 5.0, 40.0])
def test_singularity_continuity(alpha, length):
    at = RamanParams(beta=1e-6, alpha_c=alpha, alpha_q=alpha)
    assert srs_feeder(1.0, length, 0.0, 1, at) == pytest.approx(1e-6 * length * math.exp(-alpha * length), rel=1e-15)
    # general formula a step of 1e-6 away from the singular point versus the
    # limit form at the same pair of coefficients
    near = RamanParams(beta=1e-6, alpha_c=alpha, alpha_q=alpha + 1e-6)
    limit = 1e-6 * length * math.exp(-(alpha + 5e-7) * length)
    assert srs_feeder(1.0, length, 0.0, 1, near) == pytest.approx(limit, rel=1e-6)
    assert srs_drop(1.0, 0.0, length, 1, near) == pytest.approx(limit, rel=1e-6)
    # no jump where the implementation switches to the limit form
    inside = RamanParams(beta=1e-6, alpha_c=alpha, alpha_q=alpha + 5e-10)
    outside = RamanParams(beta=1e-6, alpha_c=alpha, alpha_q=alpha + 2e-9)
    assert srs_feeder(1.0, length, 0.0, 1, inside) == pytest.approx(
        srs_feeder(1.0, length, 0.0, 1, outside), rel=1e-6)


def test_feeder_rises_and_saturates_drop_falls():
    grid = np.linspace(0, 200, 401)
    f = np.array([srs_feeder(1.0, lf, 1.0, 16, PARAMS) for lf in grid])
    d = np.array([srs_drop(1.0, lf, 1.0, 16, PARAMS) for lf in grid])
    peak = int(np.argmax(f))
    assert np.all(np.diff(d) < 0)
    # the feeder term first grows, then decays once pump depletion wins
    assert np.all(np.diff(f[:peak + 1]) > 0)
    assert f.max() <= 1e-6 / (16 * AC)


def test_power_to_count_rate():
    assert power_to_count_rate(0.0, 1550, 0.5, 0.5) == 0.0
    assert power_to_count_rate(1e-9, 1550, 1, 1) == pytest.approx(7.80e6, rel=1e-3)
    assert power_to_count_rate(1e-9, 1550, 0.5, 1) == pytest.approx(power_to_count_rate(1e-9, 1550, 1, 1) / 2)
    with pytest.raises(ValueError):
        power_to_count_rate(1e-9, 1550, 1.5, 1)


def test_budget_fields(raman, detector):
    b = total_srs(NetworkScheme.build("full", 5.0, 16), raman)
    assert b.s_f > 0 and b.s_d > 0
    assert b.per_gate_probability == pytest.approx(b.count_rate / detector.gate_rate)
    assert b.receiver_rate == pytest.approx(4 * b.count_rate)


def test_partial_schemes_only_drop(raman):
    b = total_srs(NetworkScheme.build("dual_feeder", 5.0, 16), raman)
    assert b.s_f == 0.0 and b.s_d > 0


def test_dual_feeder_without_pump(raman):
    # an OLT attenuated by 400 dB is as good as switched off
    b = total_srs(NetworkScheme.build("dual_feeder", 5.0, 16, olt_attenuation=400.0), raman)
    assert b.receiver_rate == pytest.approx(0.0, abs=1e-20)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 40), st.sampled_from([4, 8, 16, 32, 64]), st.floats(0, 12))
def test_dual_feeder_below_full(feeder, n, att):
    raman = DEFAULT_RAMAN
    full = NetworkScheme.build("full", feeder, n, olt_attenuation=att)
    dual = NetworkScheme.build("dual_feeder", feeder, n, olt_attenuation=att)
    assert total_srs(dual, raman).receiver_rate <= total_srs(full, raman).receiver_rate


def test_full_scheme_pump_is_feeder_entry_power(raman):
    scheme = NetworkScheme.build("full", 5.0, 16)
    p = olt_power_mw(scheme, Point.FEEDER_ENTRY)
    n = 1 / scheme.classical_splitter.transmittance
    b = total_srs(scheme, raman)
    assert b.s_f == pytest.approx(srs_feeder(p, 5.0, 1.0, n, raman))
    assert b.s_d == pytest.approx(srs_drop(p, 5.0, 1.0, n, RamanParams(raman.beta_d)))


def test_calibrate_single_measurement_exact():
    scheme = NetworkScheme.build("full", 5.0, 16)
    cal = calibrate([Measurement(scheme, 16300.0)])
    assert cal.residuals[0] == pytest.approx(0.0, abs=1e-12)
    assert total_srs(scheme, cal.params).receiver_rate == pytest.approx(16300.0, rel=1e-12)


@pytest.mark.parametrize("beta, beta_drop", [(3e-10, 3e-10), (1.6e-10, 2.3e-10), (5e-9, 1e-10)])
def test_calibrate_round_trip(beta, beta_drop):
    truth = RamanParams(beta=beta, beta_drop=beta_drop)
    schemes = [NetworkScheme.build(k, lf, n) for k in ("full", "dual_feeder") for lf in (2, 5, 20) for n in (16, 32)]
    data = [Measurement(s, total_srs(s, truth).receiver_rate) for s in schemes]
    cal = calibrate(data, split=True)
    assert cal.params.beta == pytest.approx(beta, rel=1e-9)
    assert cal.params.beta_d == pytest.approx(beta_drop, rel=1e-9)


def test_calibrate_rejects_degenerate():
    scheme = NetworkScheme.build("full", 5.0, 16)
    with pytest.raises(ValueError):
        calibrate([])
    with pytest.raises(ValueError):
        calibrate([Measurement(scheme, 0.0), Measurement(scheme.with_(feeder_length=20.0), 0.0)])
    # partial rows alone carry no information about the feeder term
    dual = NetworkScheme.build("dual_feeder", 5.0, 16)
    with pytest.raises(ValueError):
        calibrate([Measurement(dual, 2900.0), Measurement(dual.with_(feeder_length=20.0), 1000.0)], split=True)


def test_calibration_fragment(raman):
    cal = calibrate([Measurement(NetworkScheme.build("full", 5.0, 16), 16300.0)])
    frag = cal.fragment()
    assert set(frag) == {"raman", "calibration_residuals"}
    assert RamanParams.from_dict(frag["raman"]) == cal.params
