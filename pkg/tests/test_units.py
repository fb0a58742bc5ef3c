import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qanpon.units import (
    att_to_natural,
    db_to_linear,
    dbm_to_mw,
    linear_to_db,
    mw_to_dbm,
    photon_energy,
    photon_flux,
)


@pytest.mark.parametrize("db, lin", [(0, 1.0), (3, 0.501187), (10, 0.1), (20, 0.01)])
def test_db_to_linear(db, lin):
    assert db_to_linear(db) == pytest.approx(lin, rel=1e-6)


@given(st.floats(min_value=-50, max_value=80))
def test_db_round_trip(x):
    assert linear_to_db(db_to_linear(x)) == pytest.approx(x, abs=1e-9)


@given(st.floats(min_value=-40, max_value=30))
def test_dbm_round_trip(x):
    assert mw_to_dbm(dbm_to_mw(x)) == pytest.approx(x, abs=1e-9)


def test_att_to_natural():
    # 0.31 dB/km is 0.0714 per km in nepers of power
    assert att_to_natural(0.31) == pytest.approx(0.31 * math.log(10) / 10)
    with pytest.raises(ValueError):
        att_to_natural(0.0)


def test_photon_flux():
    # 1 pW at 1550 nm is about 7.8 million photons per second
    assert photon_flux(1e-9, 1550) == pytest.approx(7.80e6, rel=2e-3)
    assert photon_energy(1550) == pytest.approx(1.2816e-19, rel=1e-3)
