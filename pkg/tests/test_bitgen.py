import numpy as np
import pytest

from ringrng.bitgen import RawBitRecord, bits_from_stream, generate_raw_bits
from ringrng.coincidence import CoincidenceWindow, EventList, find_coincidences
from ringrng.errors import ValidationError
from ringrng.spdcsim import SimConfig, preset, simulate
from ringrng.timetag import BitBuffer


def test_worked_example():
    events = EventList([10, 20, 30], [0, 1, 0])
    record = generate_raw_bits(events)
    assert record.bits.to_array().tolist() == [0, 1, 0]
    assert record.zeros == 2 and record.ones == 1


def test_all_zero_pair_gives_zero_bits():
    record = generate_raw_bits(EventList([1, 2, 3], [0, 0, 0]))
    assert record.bits.to_array().tolist() == [0, 0, 0]
    assert record.bias == 0.0


def test_all_ones_bias():
    record = generate_raw_bits(EventList([1, 2], [1, 1]))
    assert record.bias == 1.0


def test_alternating_bias():
    record = generate_raw_bits(EventList([1, 2, 3, 4], [0, 1, 0, 1]))
    assert record.bias == 0.5


def test_empty_events_empty_buffer():
    record = generate_raw_bits(EventList([], []))
    assert record.bit_count == 0
    with pytest.raises(ValidationError):
        record.bias


def test_bit_count_equals_event_count():
    kinds = np.random.default_rng(1).integers(0, 2, 503)
    events = EventList(np.arange(503), kinds)
    assert generate_raw_bits(events).bit_count == 503


def test_reversal_reverses_bits():
    kinds = [0, 1, 1, 0, 1]
    fwd = generate_raw_bits(EventList([1, 2, 3, 4, 5], kinds))
    rev = generate_raw_bits(EventList([1, 2, 3, 4, 5], kinds[::-1]))
    assert fwd.bits.to_array().tolist() == rev.bits.to_array().tolist()[::-1]


def test_bit_rate_needs_duration():
    record = generate_raw_bits(EventList([1, 2], [0, 1]))
    assert record.bit_rate_hz is None
    record = generate_raw_bits(EventList([1, 2], [0, 1]), duration_s=0.5)
    assert record.bit_rate_hz == 4.0


def test_inconsistent_counts_rejected():
    with pytest.raises(ValidationError):
        RawBitRecord(bits=BitBuffer.from_array([0, 1]), zeros=2, ones=1)
    with pytest.raises(ValidationError):
        RawBitRecord(bits=BitBuffer.from_array([0]), zeros=0, ones=1,
                     duration_s=-1.0)


def test_bits_from_stream_matches_manual_path():
    stream = simulate(preset(5.0, 0.01, rng_seed=7))
    window = CoincidenceWindow()
    record = bits_from_stream(stream, window)
    manual = generate_raw_bits(find_coincidences(stream, window),
                               stream.duration_s)
    assert record.bits == manual.bits
    assert record.bit_rate_hz == manual.bit_rate_hz


def test_unbiased_simulation_bias_bound():
    record = bits_from_stream(simulate(preset(9.0, 0.05, rng_seed=3)))
    n = record.bit_count
    assert abs(record.bias - 0.5) < 5 / np.sqrt(n)


def test_pair_bias_maps_to_ones_fraction():
    # ZeroPair probability 0.6 -> ones fraction ~ 0.4
    c = SimConfig(pump_power_mw=1.0, duration_s=0.02, rng_seed=11,
                  pair_rate_coeff=1e6, pair_bias=0.6,
                  detection_efficiency=1.0, jitter_sigma_ps=0.0,
                  dead_time_ps=0.0, dark_rate_hz=0.0)
    record = bits_from_stream(simulate(c), CoincidenceWindow(width_ps=10))
    n = record.bit_count
    assert abs(record.bias - 0.4) < 5 * np.sqrt(0.24 / n)
