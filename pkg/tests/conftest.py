import numpy as np
import pytest

from ringrng.timetag import ChannelId, TagStream


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def poisson_channel(rng, rate_hz: float, duration_ps: int) -> np.ndarray:
    """Sorted int64 tag times of a homogeneous Poisson process."""
    n = rng.poisson(rate_hz * duration_ps * 1e-12)
    return np.sort(rng.integers(0, duration_ps, n, dtype=np.int64))


def poisson_stream(rng, rates_hz: dict, duration_ps: int) -> TagStream:
    channels = {cid: poisson_channel(rng, rates_hz.get(cid, 0.0), duration_ps)
                for cid in ChannelId}
    return TagStream(channels, duration_ps)
