import numpy as np
import pytest
from scipy import stats as sstats

from ringrng import spdcsim
from ringrng.coincidence import (CoincidenceWindow, PairKind,
                                 find_coincidences, heralded_g2)
from ringrng.errors import ValidationError
from ringrng.spdcsim import (HomScanConfig, SimConfig, analytic_g2,
                             effective_visibility, expected_coincidence_rates,
                             hom_scan, observed_rate, pair_capture_fraction,
                             preset, simulate, singles_saturation_curve)
from ringrng.timetag import ChannelId


def config(power=1.0, duration=0.01, seed=0, **kw):
    base = dict(pair_rate_coeff=1e6, pair_bias=0.5, detection_efficiency=1.0,
                jitter_sigma_ps=0.0, dead_time_ps=0.0, dark_rate_hz=0.0)
    base.update(kw)
    return SimConfig(pump_power_mw=power, duration_s=duration, rng_seed=seed,
                     **base)


# ---------------------------------------------------------------------------
# config validation

@pytest.mark.parametrize("kw", [dict(pair_bias=1.5), dict(pair_bias=-0.1),
                                dict(detection_efficiency=2.0),
                                dict(detection_efficiency=(0.5, 0.5)),
                                dict(dead_time_ps=-1), dict(dark_rate_hz=-5),
                                dict(jitter_sigma_ps=-1)])
def test_bad_config_rejected(kw):
    with pytest.raises(ValidationError):
        config(**kw)


def test_bad_duration_and_power_rejected():
    with pytest.raises(ValidationError):
        config(duration=0.0)
    with pytest.raises(ValidationError):
        config(power=-1.0)


def test_per_channel_efficiency_tuple():
    c = config(detection_efficiency=(0.1, 0.2, 0.3, 0.4))
    assert c.efficiency(ChannelId.U1) == 0.1
    assert c.efficiency(ChannelId.D2) == 0.4
    assert config(detection_efficiency=0.5).efficiency(ChannelId.D1) == 0.5


# ---------------------------------------------------------------------------
# simulate: degenerate limits and determinism

def test_ideal_biased_source_pairs_exactly():
    c = config(pair_bias=1.0, duration=0.001)
    stream = simulate(c)
    u1 = stream.channel(ChannelId.U1)
    d2 = stream.channel(ChannelId.D2)
    assert u1.size > 0
    assert np.array_equal(u1, d2)  # same emission times, no jitter or loss
    assert stream.channel(ChannelId.U2).size == 0
    assert stream.channel(ChannelId.D1).size == 0


def test_same_seed_same_stream():
    c = preset(5.0, 0.01, rng_seed=42)
    assert simulate(c) == simulate(c)


def test_different_seed_different_stream():
    a = simulate(preset(5.0, 0.01, rng_seed=1))
    b = simulate(preset(5.0, 0.01, rng_seed=2))
    assert a != b


def test_tags_clipped_to_duration():
    stream = simulate(preset(17.0, 0.001, rng_seed=3))
    for cid in ChannelId:
        t = stream.channel(cid)
        if t.size:
            assert t[0] >= 0 and t[-1] <= stream.acquisition_duration


def test_split_mode_routes_u1_arm():
    c = config(pair_bias=0.5, duration=0.005)
    stream = simulate(c, split_u1=True)
    n1 = stream.channel(ChannelId.U1).size
    n2 = stream.channel(ChannelId.U2).size
    assert stream.channel(ChannelId.D1).size == 0
    assert stream.channel(ChannelId.D2).size == n1 + n2  # lossless herald arm
    # 50:50 splitter within 5 sigma
    n = n1 + n2
    assert abs(n1 - n / 2) < 5 * np.sqrt(n * 0.25)


# ---------------------------------------------------------------------------
# statistical properties

def test_singles_counts_are_poisson():
    # dead_time=0, dark=0: counts ~ Poisson(rate*T); chi-squared over 100 runs
    rate, duration = 1e6, 0.002
    mean = 0.5 * rate * duration  # unbiased pair split halves each channel
    counts = np.array([simulate(config(seed=s, duration=duration))
                       .channel(ChannelId.U1).size for s in range(100)])
    chisq = np.sum((counts - mean) ** 2 / mean)
    lo, hi = sstats.chi2.ppf([0.005, 0.995], df=100)
    assert lo < chisq < hi


def test_pair_kind_balance_within_5_sigma():
    stream = simulate(config(duration=0.02))
    events = find_coincidences(stream, CoincidenceWindow(width_ps=10, bin_ps=5))
    n = len(events)
    zeros = int(np.sum(events.kind == 0))
    assert abs(zeros - n / 2) < 5 * np.sqrt(n * 0.25)


def test_dead_time_formula():
    # true 45 MHz through 22 ns dead time -> observed ~ 22.6 MHz
    c = config(pair_rate_coeff=45e6, pair_bias=1.0, duration=0.002,
               dead_time_ps=22_000)
    measured = simulate(c).channel(ChannelId.U1).size / c.duration_s
    assert observed_rate(45e6, 22_000) == pytest.approx(22.61e6, rel=0.01)
    assert measured == pytest.approx(observed_rate(45e6, 22_000), rel=0.01)


def test_dead_time_zero_is_linear():
    c = config(duration=0.005)
    curve = singles_saturation_curve(c, [1.0, 2.0, 4.0, 8.0])
    rates = [r[ChannelId.U1] for _, r in curve]
    for i, scale in enumerate([1, 2, 4, 8]):
        assert rates[i] == pytest.approx(rates[0] * scale, rel=0.05)


def test_saturation_knee_near_dead_time_prediction():
    # incremental slope of observed vs true rate halves at rt = sqrt(2)-1;
    # with 22 ns dead time that is ~13.3 MHz observed, inside 12-14 MHz
    c = preset(1.0, 0.02, rng_seed=9)
    u_per_mw = spdcsim.true_singles_rates(c)[ChannelId.U1]
    knee_true = (np.sqrt(2) - 1) / (c.dead_time_ps * 1e-12)
    knee_power = knee_true / u_per_mw
    curve = singles_saturation_curve(preset(1.0, 0.02, 9),
                                     [knee_power])
    observed = curve[0][1][ChannelId.U1]
    assert 12e6 < observed < 14e6


def test_observed_singles_match_dead_time_model():
    c = preset(17.0, 0.02, rng_seed=4)
    stream = simulate(c)
    predicted = spdcsim.observed_singles_rates(c)
    for cid in ChannelId:
        measured = stream.channel(cid).size / c.duration_s
        assert measured == pytest.approx(predicted[cid], rel=0.01)


def test_expected_coincidence_rates_track_simulation():
    c = preset(17.0, 0.05, rng_seed=8)
    events = find_coincidences(simulate(c), CoincidenceWindow())
    measured = len(events) / c.duration_s
    predicted = sum(expected_coincidence_rates(c).values())
    assert measured == pytest.approx(predicted, rel=0.10)


def test_heralded_g2_monotone_in_power():
    values = []
    for p in [1.0, 5.0, 9.0, 13.0, 17.0]:
        stream = simulate(preset(p, 0.05, rng_seed=6), split_u1=True)
        values.append(heralded_g2(stream, CoincidenceWindow()))
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_calibrated_g2_at_1mw():
    stream = simulate(preset(1.0, 0.3, rng_seed=2), split_u1=True)
    g2 = heralded_g2(stream, CoincidenceWindow())
    assert g2 == pytest.approx(0.032, abs=0.01)


# ---------------------------------------------------------------------------
# analytic helpers

def test_pair_capture_fraction_limits():
    assert pair_capture_fraction(1000, 0.0) == 1.0
    assert pair_capture_fraction(1000, 300) == pytest.approx(0.7614, abs=1e-3)
    assert pair_capture_fraction(100, 300) < pair_capture_fraction(1000, 300)


def test_analytic_g2_linear_in_window():
    c = preset(1.0, 0.1, rng_seed=0)
    widths = np.array([200.0, 400.0, 800.0, 1600.0, 3200.0])
    g2 = np.array([analytic_g2(c, w) for w in widths])
    assert np.all(np.diff(g2) > 0)
    slope, intercept = np.polyfit(widths, g2, 1)
    resid = g2 - (slope * widths + intercept)
    r2 = 1 - resid @ resid / np.sum((g2 - g2.mean()) ** 2)
    assert slope > 0 and r2 > 0.9


def test_analytic_g2_linear_in_power():
    c1, c2 = preset(1.0, 0.1, 0), preset(4.0, 0.1, 0)
    assert analytic_g2(c2) == pytest.approx(4 * analytic_g2(c1), rel=1e-9)


# ---------------------------------------------------------------------------
# HOM scan

def test_effective_visibility_follows_line():
    c = preset(1.0, 0.1, 0)
    assert effective_visibility(c) == pytest.approx(
        0.94 - 1.55 * analytic_g2(c), abs=1e-12)


def test_effective_visibility_clamped():
    hot = preset(60.0, 0.1, 0)  # g2 > 0.6 -> line goes negative
    assert effective_visibility(hot) == 0.0


def test_hom_scan_baseline_far_from_dip():
    c = preset(1.0, 0.05, rng_seed=5)
    scan = hom_scan(c, HomScanConfig())
    counts = dict(scan)
    c0 = expected_coincidence_rates(c)[PairKind.ZERO_PAIR] * c.duration_s
    far = np.mean([counts[d] for d in (-250, -240, 240, 250)])
    assert far == pytest.approx(c0, rel=0.1)
    v_eff = effective_visibility(c)
    assert counts[0] == pytest.approx(c0 * (1 - v_eff), rel=0.15)


def test_hom_scan_deterministic():
    c = preset(3.0, 0.02, rng_seed=17)
    assert hom_scan(c, HomScanConfig()) == hom_scan(c, HomScanConfig())


def test_hom_scan_config_validation():
    with pytest.raises(ValidationError):
        HomScanConfig(base_visibility=1.2)
    with pytest.raises(ValidationError):
        HomScanConfig(dip_width_sigma_ps=0.0)
