import pytest

from qanpon.defaults import (
    DEFAULT_RAMAN,
    SHIPPED,
    derive_misalignment,
    derive_raman,
    misalignment_window,
)
from qanpon.params import ProtocolParams


def test_shipped_raman_is_reproducible():
    cal = derive_raman()
    for key, value in DEFAULT_RAMAN.to_dict().items():
        assert cal.params.to_dict()[key] == pytest.approx(value, rel=1e-12)
    assert max(abs(r) for r in cal.residuals) < 1e-12


def test_shipped_misalignment_is_reproducible():
    assert derive_misalignment() == SHIPPED["protocol"]["e_detector"] == ProtocolParams().e_detector


def test_misalignment_window_brackets_default():
    lo, hi = misalignment_window()
    assert 0 < lo < ProtocolParams().e_detector < hi < ProtocolParams().qber_abort
