import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mmwave_assoc.channel import (NO_RAIN, UNBOUNDED, BeamIndexing, LinkGeometry, RadioConfig, RainModel,
                                  antenna_gain_db, assign_beams, build_link_table, capacity_from_shares,
                                  db_to_linear, link_snr, linear_to_db, parse_shares, path_loss_db,
                                  rain_attenuation_db, satisfaction, snr_db, user_capacity)
from mmwave_assoc.geometry import NetworkLayout, Torus

mp.mp.dps = 40
REL = 1e-6


def mp_gain(alpha, theta):
    alpha, theta = mp.mpf(alpha), mp.mpf(theta)
    t3 = theta / mp.mpf("2.58")
    if abs(alpha) > theta / 2:
        return mp.mpf("-0.4111") * mp.log(t3) - mp.mpf("10.579")
    return 20 * mp.log10(mp.mpf("1.6162") / mp.sin(mp.radians(t3 / 2))) - mp.mpf("3.01") * (2 * alpha / t3) ** 2


def mp_los(r, fc):
    return mp.mpf("32.4") + 21 * mp.log10(r) + 20 * mp.log10(fc)


def mp_nlos(r, fc):
    return max(mp_los(r, fc), mp.mpf("35.3") * mp.log10(r) + mp.mpf("22.4") + mp.mpf("21.3") * mp.log10(fc))


def mp_rain(rate, r_m):
    return mp.mpf("0.124") * mp.power(rate, mp.mpf("1.061")) * mp.mpf(r_m) / 1000


# -- antenna gain ------------------------------------------------------------------

@pytest.mark.parametrize("alpha,theta,approx", [
    (0.0, 10.0, 33.59), (6.0, 10.0, -11.136), (2.0, 10.0, None), (0.0, 5.0, None), (0.0, 15.0, None),
    (-2.0, 10.0, None), (4.9, 10.0, None), (5.0, 10.0, None), (5.01, 10.0, None),
])
def test_gain_matches_oracle(alpha, theta, approx):
    value = antenna_gain_db(alpha, theta)
    assert value == pytest.approx(float(mp_gain(alpha, theta)), rel=REL)
    if approx is not None:
        assert value == pytest.approx(approx, abs=5e-3)


def test_gain_is_even():
    assert antenna_gain_db(-2.0, 10.0) == antenna_gain_db(2.0, 10.0)


def test_user_boresight_gain_at_five_degrees():
    assert antenna_gain_db(0.0, 5.0) == pytest.approx(39.606362701898521, rel=1e-12)


@given(st.floats(0, 5.0), st.floats(0, 5.0))
def test_mainlobe_decreasing(a, b):
    if a < b:
        assert antenna_gain_db(a, 10.0) > antenna_gain_db(b, 10.0)


def test_branch_values_finite_at_boundary():
    inner = antenna_gain_db(np.nextafter(5.0, 0.0), 10.0)
    outer = antenna_gain_db(np.nextafter(5.0, 10.0), 10.0)
    assert math.isfinite(inner) and math.isfinite(outer) and inner > outer


def test_gain_rejects_bad_beamwidth():
    with pytest.raises(ValueError):
        antenna_gain_db(0.0, 0.0)


# -- path loss / rain -------------------------------------------------------------------

@pytest.mark.parametrize("r,los,approx", [(100.0, True, 103.34), (100.0, False, 123.83), (1.0, True, 61.34),
                                          (37.2, False, None), (250.0, False, None)])
def test_path_loss_matches_oracle(r, los, approx):
    value = path_loss_db(r, 28.0, los)
    ref = mp_los(r, 28) if los else mp_nlos(r, 28)
    assert value == pytest.approx(float(ref), rel=REL)
    if approx is not None:
        assert value == pytest.approx(approx, abs=0.01)


def test_path_loss_adds_shadowing():
    assert path_loss_db(100.0, 28.0, True, sf_los=3.0) == pytest.approx(float(mp_los(100, 28)) + 3.0, rel=1e-12)
    # NLOS shadowing applies inside the max
    assert path_loss_db(100.0, 28.0, False, sf_los=0.0, sf_nlos=-30.0) == pytest.approx(float(mp_los(100, 28)))


@given(st.floats(0.5, 2000.0))
def test_nlos_never_below_los(r):
    assert path_loss_db(r, 28.0, False) >= path_loss_db(r, 28.0, True)


def test_path_loss_rejects_nonpositive_distance():
    with pytest.raises(ValueError):
        path_loss_db(0.0, 28.0, True)


@pytest.mark.parametrize("rate,r,approx", [(0.0, 500.0, 0.0), (25.0, 1000.0, 3.77), (150.0, 200.0, 5.05),
                                           (2.5, 120.0, None)])
def test_rain_matches_oracle(rate, r, approx):
    value = rain_attenuation_db(RainModel(rate), r)
    assert value == pytest.approx(float(mp_rain(rate, r)), rel=REL, abs=1e-15)
    if approx is not None:
        assert value == pytest.approx(approx, abs=5e-3)


def test_rain_rejects_negative_rate():
    with pytest.raises(ValueError):
        RainModel(-1.0)


# -- beams -------------------------------------------------------------------------------

@pytest.mark.parametrize("geo,theta,beam,mis", [
    (4.0, 10.0, 0, 4.0), (355.0, 10.0, 0, -5.0), (5.0, 10.0, 1, -5.0), (0.0, 10.0, 0, 0.0),
    (359.9, 10.0, 0, -0.1), (182.5, 5.0, 37, -2.5), (14.0, 15.0, 1, -1.0),
])
def test_assign_beams_examples(geo, theta, beam, mis):
    b, m = assign_beams(geo, BeamIndexing(theta))
    assert b == beam
    assert m == pytest.approx(mis, abs=1e-9)


@given(st.floats(0, 359.999999), st.sampled_from([5.0, 10.0, 15.0, 20.0, 30.0]))
def test_assign_beams_nearest(geo, theta):
    idx = BeamIndexing(theta)
    b, m = assign_beams(geo, idx)
    assert -theta / 2 <= m < theta / 2
    circ = lambda a: abs((a + 180.0) % 360.0 - 180.0)  # noqa: E731
    assert circ(geo - idx.boresights[b]) <= min(circ(geo - bs) for bs in idx.boresights) + 1e-9


def test_beam_indexing_rejects_non_divisor():
    with pytest.raises(ValueError):
        BeamIndexing(7.0)
    assert BeamIndexing(10.0).beam_count == 36
    np.testing.assert_array_equal(BeamIndexing(90.0).boresights, [0, 90, 180, 270])


# -- SNR / capacity / satisfaction ------------------------------------------------------------

def test_snr_cancellation():
    radio = RadioConfig(theta_b_deg=360.0)
    loss = radio.p_tx_dbm - radio.noise_dbm
    assert snr_db(radio, 0.0, 0.0, loss) == pytest.approx(0.0, abs=1e-12)


def test_composed_snr():
    radio = RadioConfig()
    gb, gu = mp_gain(0, 10), mp_gain(0, 5)
    ref = 20 - 10 * mp.log10(36) + gb + gu - mp_los(100, 28) - (-84 + mp.mpf("7.8"))
    value = snr_db(radio, antenna_gain_db(0.0, 10.0), antenna_gain_db(0.0, 5.0), path_loss_db(100.0, 28.0, True))
    assert value == pytest.approx(float(ref), rel=REL)
    assert value == pytest.approx(50.487182081259026, rel=1e-12)


def test_link_snr_budget():
    radio = RadioConfig()
    geom = LinkGeometry(math.sqrt(100**2 - 22.5**2), 100.0, 0.0, 180.0, 0, 36, 0.0, 0.0, True)
    budget = link_snr(radio, geom)
    assert budget.snr_db == pytest.approx(50.487182081259026, rel=1e-9)
    assert budget.spectral_efficiency == pytest.approx(math.log2(1 + budget.snr), rel=1e-15)
    wet = link_snr(radio, geom, rain=RainModel(150.0))
    assert wet.snr_db == pytest.approx(budget.snr_db - float(mp_rain(150, 100)), rel=1e-9)


def test_single_link_capacity():
    radio = RadioConfig()
    gamma = 31.623
    ref = mp.mpf("0.75") * mp.mpf(10) ** 8 * mp.log(1 + mp.mpf("31.623"), 2)
    c = user_capacity([radio.s], [gamma], radio)
    assert c == pytest.approx(float(ref), rel=REL)
    assert c == pytest.approx(3.771e8, rel=1e-3)


def test_capacity_properties():
    radio = RadioConfig()
    assert user_capacity([0, 0], [10.0, 10.0], radio) == 0.0
    one = user_capacity([2, 0], [10.0, 10.0], radio)
    assert user_capacity([2, 2], [10.0, 10.0], radio) == pytest.approx(2 * one, rel=1e-15)
    assert user_capacity([1, 0], [10.0, 10.0], radio) == pytest.approx(one / 2, rel=1e-15)
    no_overhead = RadioConfig(xi=0.0)
    assert one == pytest.approx(0.75 * user_capacity([2, 0], [10.0, 10.0], no_overhead), rel=1e-15)


def test_unbounded_capacity_uses_occupancy():
    radio = RadioConfig(s="inf")
    assert radio.s == UNBOUNDED and radio.unbounded
    c = user_capacity([1, 1], [10.0, 10.0], radio, occupancy_row=[1, 4])
    full = float(capacity_from_shares(1.0, 10.0, radio))
    assert c == pytest.approx(full * 1.25)
    with pytest.raises(ValueError):
        user_capacity([1], [10.0], radio)


@pytest.mark.parametrize("c,expected", [(5e8, 1.0), (0.0, 0.0), (2.5e8, 0.5), (9e9, 1.0)])
def test_satisfaction(c, expected):
    assert satisfaction(c, 5e8) == expected


@given(st.floats(0, 1e10), st.floats(0, 1e10))
def test_satisfaction_bounded_monotone(a, b):
    pa, pb = satisfaction(a, 5e8), satisfaction(b, 5e8)
    assert 0 <= pa <= 1
    if a <= b:
        assert pa <= pb


@given(st.floats(-150, 150))
def test_db_round_trip(x):
    assert linear_to_db(db_to_linear(x)) == pytest.approx(x, rel=1e-12, abs=1e-12)


# -- configuration ----------------------------------------------------------------------------

def test_radio_defaults():
    r = RadioConfig()
    assert (r.f_c_ghz, r.w_hz, r.p_tx_dbm, r.n0_dbm, r.nf_db) == (28.0, 1e8, 20.0, -84.0, 7.8)
    assert (r.gamma_min_db, r.r_min_bps, r.xi, r.theta_b_deg, r.theta_u_deg, r.s) == (5.0, 5e8, 0.25, 10.0, 5.0, 2)
    assert r.m_bs == 36 and r.m_user == 72
    assert r.noise_dbm == pytest.approx(-76.2)


@pytest.mark.parametrize("kwargs", [{"theta_b_deg": 7.0}, {"w_hz": 0.0}, {"xi": 1.0}, {"s": 0}, {"s": 1.5},
                                    {"r_min_bps": 0.0}])
def test_radio_rejects(kwargs):
    with pytest.raises(ValueError):
        RadioConfig(**kwargs)


def test_parse_shares():
    assert parse_shares("inf") == UNBOUNDED
    assert parse_shares(math.inf) == UNBOUNDED
    assert parse_shares("5") == 5
    with pytest.raises(ValueError):
        parse_shares("-1")


# -- link table ------------------------------------------------------------------------------

def test_link_table_matches_scalar_path():
    torus = Torus(400.0, 346.41016151377545)
    layout = NetworkLayout(torus, [(50.0, 86.6), (250.0, 86.6), (150.0, 259.8)], 200.0)
    rng = np.random.default_rng(0)
    users = rng.uniform(size=(7, 2)) * (400, 346.4)
    sf_l = rng.normal(0, 4, (7, 3))
    sf_n = rng.normal(0, 7.82, (7, 3))
    los = rng.uniform(size=(7, 3)) < 0.5
    radio = RadioConfig()
    rain = RainModel(25.0)
    table = build_link_table(users, layout, radio, sf_l, sf_n, los, rain)
    for i in range(7):
        for j in range(3):
            g = table.geometry(i, j)
            assert g.distance_3d == pytest.approx(math.hypot(g.distance_2d, 22.5))
            assert abs(g.misalign_bs) <= 5.0 and abs(g.misalign_user) <= 2.5
            assert (g.geo_angle_bs_to_user - g.geo_angle_user_to_bs) % 360 == pytest.approx(180.0)
            b = link_snr(radio, g, sf_l[i, j], sf_n[i, j], rain)
            assert table.snr_db[i, j] == pytest.approx(b.snr_db, rel=1e-12)
            assert table.budget(i, j).snr == pytest.approx(b.snr, rel=1e-12)


def test_degraded_table_keeps_geometry():
    torus = Torus(400.0, 346.41016151377545)
    layout = NetworkLayout(torus, [(50.0, 86.6), (250.0, 86.6)], 200.0)
    users = np.array([[10.0, 10.0], [300.0, 200.0]])
    radio = RadioConfig()
    base = build_link_table(users, layout, radio)
    wet = base.degraded(radio, rain=RainModel(150.0))
    assert np.all(wet.snr_db < base.snr_db)
    np.testing.assert_array_equal(wet.bs_beam, base.bs_beam)
    same = base.degraded(radio, rain=NO_RAIN)
    np.testing.assert_array_equal(same.snr_db, base.snr_db)


@given(st.floats(1.0, 150.0), st.floats(151.0, 400.0))
def test_snr_decreases_with_distance(r1, r2):
    radio = RadioConfig()
    s1 = snr_db(radio, 30.0, 30.0, path_loss_db(r1, 28.0, True))
    s2 = snr_db(radio, 30.0, 30.0, path_loss_db(r2, 28.0, True))
    assert s1 > s2
