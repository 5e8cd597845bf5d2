import io
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plcsim import channel
from plcsim.channel import (
    CalibrationAnchor,
    ChannelParams,
    bit_error_rate,
    calibrate_gamma,
    erfc,
    interference_distance,
    packet_success_rate,
    snr_db_at_distance,
    tabulate_curves,
)

# 50-digit Gaussian-tail quadrature (mpmath), x = 6 i / 19
ERFC_GRID = [
    (0.0, 1.0),
    (0.3157894736842105, 0.6551684043554030548540541),
    (0.631578947368421, 0.3717567639510644738864207),
    (0.9473684210526315, 0.1803164668097954733251563),
    (1.263157894736842, 0.07403855644782286344466248),
    (1.5789473684210527, 0.02555100306308438956447796),
    (1.894736842105263, 0.007371843116980716048395854),
    (2.210526315789474, 0.00177107396375756072759831),
    (2.526315789473684, 0.0003532519008583227635071516),
    (2.8421052631578947, 0.00005836045582831397794328298),
    (3.1578947368421053, 0.000007971885770947005878676528),
    (3.473684210526316, 0.0000008990801462470828353968989),
    (3.789473684210526, 8.362594548095986293348383e-8),
    (4.105263157894737, 6.409043501496870566070031e-9),
    (4.421052631578948, 4.044189017346554685513237e-10),
    (4.7368421052631575, 2.099851063971482928862135e-11),
    (5.052631578947368, 8.966882309654084401446915e-13),
    (5.368421052631579, 3.147768601562351478233981e-14),
    (5.684210526315789, 9.080574363741364951412267e-16),
    (6.0, 2.151973671249891311659335e-17),
]
ERFC_2_30 = 0.0011431765973566514653

# same oracle pushed through the calibration chain with mpmath findroot
GAMMA_REF = 0.0010131094275795118945
SNR_2KM_DB = 13.273781144840976
BER_15_3 = 1.926758324949594855e-05
PSUC_0_50B = 0.99232251605173376
D_5PCT = 4503.3622807083872


@pytest.fixture(scope="module")
def params():
    return ChannelParams.calibrated()


@pytest.mark.parametrize("x,ref", ERFC_GRID)
def test_erfc_against_quadrature(x, ref):
    assert abs(erfc(x) - ref) <= 1e-10 * ref


def test_erfc_examples():
    assert erfc(0.0) == 1.0
    assert erfc(38.0) < 1e-300
    assert erfc(2.30) == pytest.approx(ERFC_2_30, rel=1e-12)


def test_snr_line(params):
    assert snr_db_at_distance(params, 0) == 15.3
    assert snr_db_at_distance(params, 2000) == pytest.approx(SNR_2KM_DB, abs=1e-9)
    p = ChannelParams(15.3, 0.001)
    assert snr_db_at_distance(p, 1000) == pytest.approx(14.3, abs=1e-12)
    with pytest.raises(ValueError):
        snr_db_at_distance(params, -1)


def test_calibrated_gamma(params):
    assert params.gamma_db_per_m == pytest.approx(GAMMA_REF, rel=1e-9)
    assert params.gamma_db_per_m == pytest.approx(1.02e-3, rel=0.02)


def test_ber_values(params):
    assert bit_error_rate(snr_db_at_distance(params, 2000)) == pytest.approx(5.6e-4, rel=0.02)
    assert bit_error_rate(15.3) == pytest.approx(BER_15_3, rel=1e-9)
    low = [bit_error_rate(s) for s in (-100.0, -60.0, -30.0, -10.0, 0.0)]
    assert all(0 < b <= 0.5 for b in low)
    assert low == sorted(low, reverse=True)
    assert low[0] == pytest.approx(0.5, abs=1e-4)


def test_packet_success_examples(params):
    assert packet_success_rate(params, 2000, 50) == pytest.approx(0.80, abs=0.005)
    p0 = packet_success_rate(params, 0, 50)
    assert p0 == pytest.approx(PSUC_0_50B, rel=1e-9)
    assert p0 <= params.max_success
    with pytest.raises(ValueError):
        packet_success_rate(params, 10, 0)


def test_clamp_binds_when_raw_success_exceeds_ceiling():
    strong = ChannelParams(40.0, 0.001, max_success=1 - 1e-6)
    assert packet_success_rate(strong, 0, 1) == 1 - 1e-6
    loose = ChannelParams(40.0, 0.001, max_success=1.0)
    assert packet_success_rate(loose, 0, 1) > 1 - 1e-6


def test_calibration_round_trip():
    p = ChannelParams(15.3, 8e-4)
    target = packet_success_rate(p, 1500, 40)
    gamma = calibrate_gamma(15.3, CalibrationAnchor(1500, 40, target))
    assert gamma == pytest.approx(8e-4, rel=1e-9)


def test_calibration_rejects_bad_anchor():
    with pytest.raises(ValueError):
        CalibrationAnchor(0, 50, 0.8)
    with pytest.raises(ValueError):
        CalibrationAnchor(100, 50, 1.0)
    # anchor demands more SNR than available at distance zero
    with pytest.raises(ValueError):
        calibrate_gamma(5.0, CalibrationAnchor(2000, 50, 0.8))


def test_interference_distance(params):
    d = interference_distance(params, 0.05, 50)
    assert d == pytest.approx(D_5PCT, abs=0.1)
    assert abs(packet_success_rate(params, d, 50) - 0.05) <= 1e-6
    # independent route: scan a 1 m grid for the crossing
    crossing = next(x for x in range(0, 20000) if packet_success_rate(params, x, 50) < 0.05)
    assert crossing - 1 <= d <= crossing


def test_interference_distance_inverse_and_boundary(params):
    for d0 in (123.0, 2000.0, 3777.7):
        thr = packet_success_rate(params, d0, 50)
        assert interference_distance(params, thr, 50) == pytest.approx(d0, abs=0.1)
    assert interference_distance(params, 0.999, 50) == 0.0


def test_tabulate_curves(params):
    rows = tabulate_curves(params, 5000, 100, 50)
    assert rows[0].distance_m == 0 and rows[0].snr_db == params.snr0_db
    assert rows[-1].distance_m == 5000
    at2k = next(r for r in rows if r.distance_m == 2000)
    assert at2k.p_suc == pytest.approx(0.80, abs=0.005)
    ps = [r.p_suc for r in rows]
    assert all(a >= b for a, b in zip(ps, ps[1:]))


def test_curves_csv_format(params):
    buf = io.StringIO()
    channel.write_curves_csv(tabulate_curves(params, 200, 100, 50), buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "distance_m,snr_db,ber,p_suc"
    assert lines[1].startswith("0,15.3,")
    assert len(lines) == 4


def test_params_validation():
    with pytest.raises(ValueError):
        ChannelParams(15.3, 0.0)
    with pytest.raises(ValueError):
        ChannelParams(math.inf, 0.001)
    with pytest.raises(ValueError):
        ChannelParams(15.3, 0.001, max_success=0)


@settings(max_examples=200, deadline=None)
@given(
    d1=st.floats(0, 8000),
    d2=st.floats(0, 8000),
    n1=st.integers(1, 300),
    n2=st.integers(1, 300),
)
def test_monotone_and_bounded(d1, d2, n1, n2):
    p = ChannelParams.calibrated()
    lo_d, hi_d = sorted((d1, d2))
    lo_n, hi_n = sorted((n1, n2))
    assert packet_success_rate(p, lo_d, n1) >= packet_success_rate(p, hi_d, n1)
    assert packet_success_rate(p, d1, lo_n) >= packet_success_rate(p, d1, hi_n)
    assert 0 <= packet_success_rate(p, d1, n1) <= p.max_success
    ber = bit_error_rate(snr_db_at_distance(p, d1))
    assert 0 < ber <= 0.5


@settings(max_examples=50, deadline=None)
@given(
    dist=st.floats(100, 5000),
    n=st.integers(1, 200),
    succ=st.floats(0.05, 0.95),
)
def test_calibration_anchor_reproduced(dist, n, succ):
    anchor = CalibrationAnchor(dist, n, succ)
    try:
        p = ChannelParams.calibrated(40.0, anchor)
    except ValueError:
        return  # anchor needs more than 40 dB at zero distance
    assert abs(packet_success_rate(p, dist, n) - succ) <= 1e-9
