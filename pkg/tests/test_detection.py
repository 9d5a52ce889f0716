import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quadsense import detection
from quadsense.detection import (
    DetectorConfig,
    attenuation_db,
    covariance_from_noise,
    difference_noise,
    min_difference_noise,
    optimal_gain,
    snl_noise,
    squeezing_report,
)
from quadsense.errors import UndefinedSNLError, ValidationError
from quadsense.optics import LossChannel
from quadsense.source import TwinBeamMoments

G2_IDEAL = TwinBeamMoments(2.0, 1.0, 6.0, 3.0, 4.0)
UNIT = LossChannel(1.0, 1.0)


def moments_and_channel():
    return st.tuples(
        st.builds(
            lambda mp, mc, vp, vc, t: TwinBeamMoments(
                mp, mc, vp, vc, t * math.sqrt(vp * vc)
            ),
            st.floats(0.0, 10.0),
            st.floats(0.1, 10.0),
            st.floats(1e-3, 10.0),
            st.floats(1e-3, 10.0),
            st.floats(-0.999, 0.999),
        ),
        st.builds(LossChannel, st.floats(0.05, 1.0), st.floats(0.05, 1.0)),
    )


def test_difference_noise_coherent_pair_is_snl():
    coherent = TwinBeamMoments(2.0, 1.0, 2.0, 1.0, 0.0)
    assert difference_noise(coherent, UNIT, 1.0) == pytest.approx(3.0)


def test_difference_noise_gain_zero_is_probe_only():
    ch = LossChannel(0.7, 0.9)
    expected = 0.49 * (6.0 - 2.0) + 0.7 * 2.0
    assert difference_noise(G2_IDEAL, ch, 0.0) == pytest.approx(expected)


def test_difference_noise_gain_two_balanced():
    assert difference_noise(G2_IDEAL, UNIT, 1.0) == pytest.approx(1.0)


def test_difference_noise_rejects_negative_gain():
    with pytest.raises(ValidationError):
        difference_noise(G2_IDEAL, UNIT, -0.5)


def test_optimal_gain_uncorrelated_is_zero():
    m = TwinBeamMoments(2.0, 1.0, 6.0, 3.0, 0.0)
    assert optimal_gain(m, UNIT) == 0.0


def test_optimal_gain_gain_two_is_four_thirds():
    g = optimal_gain(G2_IDEAL, UNIT)
    assert g == pytest.approx(4.0 / 3.0, rel=1e-12)
    # Confirm by scanning the parabola.
    gs = np.arange(0.0, 3.0, 1e-4)
    noises = [difference_noise(G2_IDEAL, UNIT, x) for x in gs]
    assert gs[int(np.argmin(noises))] == pytest.approx(g, abs=1e-4)


def test_optimal_gain_noiseless_conjugate_raises():
    m = TwinBeamMoments(2.0, 0.0, 6.0, 0.0, 0.0)
    with pytest.raises(ZeroDivisionError):
        optimal_gain(m, UNIT)
    with pytest.raises(ZeroDivisionError):
        min_difference_noise(m, UNIT)


def test_min_difference_noise_examples():
    m = TwinBeamMoments(2.0, 1.0, 6.0, 3.0, 0.0)
    assert min_difference_noise(m, UNIT) == pytest.approx(6.0)
    assert min_difference_noise(G2_IDEAL, UNIT) == pytest.approx(6.0 - 16.0 / 3.0)


def test_covariance_round_trip():
    assert covariance_from_noise(6.0, 3.0, 9.0) == 0.0
    var_diff = difference_noise(G2_IDEAL, UNIT, 1.0)
    assert covariance_from_noise(6.0, 3.0, var_diff) == pytest.approx(4.0)


def test_snl_noise_basics():
    assert snl_noise(2.0, 1.0, UNIT, 1.0) == pytest.approx(3.0)
    assert snl_noise(4.0, 2.0, UNIT, 1.0) == pytest.approx(6.0)  # linear in power
    with pytest.raises(UndefinedSNLError):
        snl_noise(0.0, 0.0, UNIT, 1.0)


def test_squeezing_report_coherent_is_unity():
    coherent = TwinBeamMoments(2.0, 1.0, 2.0, 1.0, 1e-12)
    rep = squeezing_report(coherent, UNIT, 1.0)
    assert rep.ratio_linear == pytest.approx(1.0, rel=1e-9)
    assert rep.ratio_db == pytest.approx(0.0, abs=1e-8)


def test_squeezing_report_gain_two_optimal():
    rep = squeezing_report(G2_IDEAL, UNIT, "optimal")
    assert rep.gain == pytest.approx(4.0 / 3.0)
    assert rep.diff_variance == pytest.approx(2.0 / 3.0)
    # SNL at g = 4/3: 2 + (16/9) * 1.
    assert rep.snl == pytest.approx(2.0 + 16.0 / 9.0)
    assert rep.ratio_linear == pytest.approx((2.0 / 3.0) / (34.0 / 9.0))


def test_attenuation_conventions():
    assert attenuation_db(0.5, "amplitude") == pytest.approx(20.0 * math.log10(2.0))
    assert attenuation_db(0.5, "power") == pytest.approx(10.0 * math.log10(2.0))
    assert attenuation_db(0.0) == math.inf
    with pytest.raises(ValidationError):
        attenuation_db(0.5, "nepers")


def test_detector_config():
    cfg = DetectorConfig(quantum_efficiency=0.95, gain=0.55)
    assert cfg.gain_db == pytest.approx(attenuation_db(0.55))
    ch = cfg.loss_channel()
    assert ch.eta_p == ch.eta_c == 0.95
    with pytest.raises(ValidationError):
        DetectorConfig(quantum_efficiency=1.2, gain=1.0)


# -- properties -------------------------------------------------------------


@given(mc=moments_and_channel())
@settings(max_examples=300)
def test_min_noise_identity(mc):
    m, ch = mc
    g = optimal_gain(m, ch)
    direct = difference_noise(m, ch, g)
    closed = min_difference_noise(m, ch)
    assert closed == pytest.approx(direct, rel=1e-12, abs=1e-12)


@given(mc=moments_and_channel(), g=st.floats(0.0, 5.0))
@settings(max_examples=300)
def test_parabola_is_convex_with_vertex_at_optimum(mc, g):
    m, ch = mc
    h = 1e-3
    f = lambda x: difference_noise(m, ch, x)
    second = f(g + h) - 2.0 * f(g) + f(g - h) if g >= h else None
    if second is not None:
        assert second >= -1e-9
    g_opt = optimal_gain(m, ch)
    assert f(g_opt) <= f(g) + 1e-12


@given(mc=moments_and_channel(), g=st.floats(0.0, 5.0))
@settings(max_examples=300)
def test_uncorrelated_noise_is_quadrature_sum(mc, g):
    m, ch = mc
    m0 = TwinBeamMoments(m.mean_p, m.mean_c, m.var_p, m.var_c, 0.0)
    probe = ch.eta_p**2 * (m.var_p - m.mean_p) + ch.eta_p * m.mean_p
    conj = ch.eta_c**2 * (m.var_c - m.mean_c) + ch.eta_c * m.mean_c
    assert difference_noise(m0, ch, g) == pytest.approx(
        probe + g * g * conj, rel=1e-12, abs=1e-12
    )


@given(
    gain=st.floats(1.05, 10.0),
    eta1=st.floats(0.3, 1.0),
    eta2=st.floats(0.05, 1.0),
)
@settings(max_examples=200)
def test_squeezing_ratio_monotone_in_loss(gain, eta1, eta2):
    from quadsense.source import FwmSourceParams, fwm_moments

    if eta2 > eta1:
        eta1, eta2 = eta2, eta1
    m = fwm_moments(FwmSourceParams(gain=gain, seed_flux=1.0))
    better = squeezing_report(m, LossChannel(eta1, eta1), "optimal")
    worse = squeezing_report(m, LossChannel(eta2, eta2), "optimal")
    assert worse.ratio_linear >= better.ratio_linear - 1e-12
