"""Coincidence detection between opposite-section channels.

The matcher pairs each tag of the second stream, scanned in time order, with
the nearest not-yet-used tag of the first stream, accepting the pair when
|t_a - t_b| <= width/2 (inclusive).  Equidistant candidates resolve to the
earlier a-tag.  This greedy one-to-one rule is what the hardware coincidence
logic applies, and it is deterministic, so the raw bit stream derived from it
is reproducible.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from numba import njit

from .errors import InsufficientStatisticsError, ValidationError
from .timetag import OPPOSITE_PAIRS, ChannelId, TagStream


@dataclass(frozen=True)
class CoincidenceWindow:
    """Coincidence window geometry.

    width_ps is the full window: a pair is accepted when |dt| <= width/2.
    bin_ps is the histogram resolution; width must be an even multiple of it.
    """

    width_ps: int = 1000
    bin_ps: int = 5

    def __post_init__(self):
        if self.width_ps <= 0 or self.bin_ps <= 0:
            raise ValidationError("window width and bin size must be positive")
        if self.width_ps % 2:
            raise ValidationError("window width must be even (integer half-width)")
        if self.width_ps % self.bin_ps:
            raise ValidationError("window width must be a multiple of the bin size")

    @property
    def half_width_ps(self) -> int:
        return self.width_ps // 2

    @property
    def n_bins(self) -> int:
        return self.width_ps // self.bin_ps


class PairKind(enum.IntEnum):
    """Which opposite-section pairing fired; doubles as the raw bit value."""

    ZERO_PAIR = 0  # (U1, D2)
    ONE_PAIR = 1   # (U2, D1)


class CoincidenceEvent(NamedTuple):
    t: int
    kind: PairKind


class EventList:
    """Coincidence events as parallel arrays, sorted by event time."""

    __slots__ = ("t", "kind")

    def __init__(self, t, kind):
        t = np.ascontiguousarray(np.asarray(t, dtype=np.int64))
        kind = np.ascontiguousarray(np.asarray(kind, dtype=np.uint8))
        if t.shape != kind.shape or t.ndim != 1:
            raise ValidationError("event times and kinds must be 1-d and equal length")
        if t.size and np.any(np.diff(t) < 0):
            raise ValidationError("event times must be sorted")
        if kind.size and kind.max() > 1:
            raise ValidationError("event kind must be 0 or 1")
        t.flags.writeable = False
        kind.flags.writeable = False
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "kind", kind)

    def __setattr__(self, name, value):
        raise AttributeError("EventList is immutable")

    def __len__(self):
        return self.t.size

    def __getitem__(self, i):
        return CoincidenceEvent(int(self.t[i]), PairKind(int(self.kind[i])))

    def __iter__(self):
        for i in range(self.t.size):
            yield self[i]

    def __eq__(self, other):
        if not isinstance(other, EventList):
            return NotImplemented
        return (np.array_equal(self.t, other.t)
                and np.array_equal(self.kind, other.kind))

    def __repr__(self):
        return f"EventList({len(self)} events)"


@dataclass(frozen=True)
class CorrelationHistogram:
    """Cross-correlation counts over [-width/2, +width/2) in fixed bins."""

    bin_edges_ps: np.ndarray  # n_bins + 1 edges
    counts: np.ndarray        # n_bins
    accidental_estimate: float  # expected total accidental pairs in the window

    @property
    def bin_centers_ps(self) -> np.ndarray:
        return 0.5 * (self.bin_edges_ps[:-1] + self.bin_edges_ps[1:])

    def to_csv(self, path) -> None:
        """Write the histogram as offset_ps,count rows."""
        lines = ["offset_ps,count"]
        lines += [f"{c:g},{n}" for c, n in
                  zip(self.bin_centers_ps.tolist(), self.counts.tolist())]
        Path(path).write_text("\n".join(lines) + "\n")


@njit(cache=True)
def _match_kernel(a, b, half_width):
    # Greedy nearest-unused matcher.  left/right are jump links over used
    # a-indices with path compression, so the scan stays near-linear even
    # when bursts force long lookbacks.
    na = a.size
    nb = b.size
    left = np.empty(na + 1, np.int64)
    right = np.empty(na + 1, np.int64)
    for i in range(na + 1):
        left[i] = i - 1
        right[i] = i
    cap = na if na < nb else nb
    out_a = np.empty(cap, np.int64)
    out_b = np.empty(cap, np.int64)
    k = 0
    j = 0
    for ib in range(nb):
        tb = b[ib]
        while j < na and a[j] < tb:
            j += 1
        # nearest unused at or right of the insertion point
        r = j
        while r < na and right[r] != r:
            r = right[r]
        rr = j
        while rr < na and right[rr] != rr:
            nxt = right[rr]
            right[rr] = r
            rr = nxt
        # nearest unused strictly left of the insertion point
        l = j - 1
        while l >= 0 and left[l + 1] != l:
            l = left[l + 1]
        ll = j - 1
        while ll >= 0 and left[ll + 1] != ll:
            nxt = left[ll + 1]
            left[ll + 1] = l
            ll = nxt
        best = -1
        if l >= 0 and r < na:
            dl = tb - a[l]
            dr = a[r] - tb
            best = l if dl <= dr else r  # tie goes to the earlier a-tag
        elif l >= 0:
            best = l
        elif r < na:
            best = r
        if best >= 0:
            d = tb - a[best]
            if d < 0:
                d = -d
            if d <= half_width:
                out_a[k] = best
                out_b[k] = ib
                k += 1
                left[best + 1] = left[best]
                right[best] = best + 1
    return out_a[:k], out_b[:k]


@njit(cache=True)
def _hist_kernel(a, b, half_width, bin_ps, counts):
    # all-pairs correlation: every (a, b) pair with t_b - t_a in [-hw, hw)
    lo = 0
    n_bins = counts.size
    for i in range(a.size):
        ta = a[i]
        while lo < b.size and b[lo] < ta - half_width:
            lo += 1
        jj = lo
        while jj < b.size and b[jj] - ta < half_width:
            idx = (b[jj] - ta + half_width) // bin_ps
            if 0 <= idx < n_bins:
                counts[idx] += 1
            jj += 1


def _require_sorted_int64(values, name) -> np.ndarray:
    arr = np.ascontiguousarray(np.asarray(values, dtype=np.int64))
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional")
    if arr.size and np.any(np.diff(arr) < 0):
        raise ValidationError(f"{name} must be sorted")
    return arr


def match(a, b, window: CoincidenceWindow):
    """Greedy one-to-one matching of two sorted tag arrays.

    Returns (t_a, t_b) arrays of the matched pairs, sorted by
    min(t_a, t_b).  Each tag is used at most once.
    """
    a = _require_sorted_int64(a, "a")
    b = _require_sorted_int64(b, "b")
    ia, ib = _match_kernel(a, b, int(window.half_width_ps))
    ta = a[ia]
    tb = b[ib]
    key = np.minimum(ta, tb)
    order = np.lexsort((tb, ta, key))
    return ta[order], tb[order]


def find_coincidences(stream: TagStream, window: CoincidenceWindow) -> EventList:
    """Match both opposite-section pairings and merge into one event list.

    Event time is min(t_a, t_b).  If a ZERO_PAIR and a ONE_PAIR event land on
    the identical time, both are discarded: a real simultaneous four-fold
    detection has no defined bit value, and dropping both keeps the output
    independent of processing order.
    """
    times = []
    kinds = []
    for bit_value, (ca, cb) in enumerate(OPPOSITE_PAIRS):
        ta, tb = match(stream.channel(ca), stream.channel(cb), window)
        t_event = np.minimum(ta, tb)
        times.append(t_event)
        kinds.append(np.full(t_event.size, bit_value, dtype=np.uint8))
    t = np.concatenate(times)
    kind = np.concatenate(kinds)
    order = np.lexsort((kind, t))
    t = t[order]
    kind = kind[order]
    clash = np.intersect1d(times[0], times[1])
    if clash.size:
        keep = ~np.isin(t, clash)
        t = t[keep]
        kind = kind[keep]
    return EventList(t, kind)


def correlation_histogram(a, b, window: CoincidenceWindow,
                          duration_ps: int | None = None) -> CorrelationHistogram:
    """Histogram of all pairwise delays t_b - t_a inside the window.

    Unlike match(), every pair is counted (no one-to-one constraint), which
    is what a start-stop correlator records.  The accidental estimate is the
    expected in-window pair count for two independent Poisson streams of the
    observed rates: len(a) * len(b) * width / duration.
    """
    a = _require_sorted_int64(a, "a")
    b = _require_sorted_int64(b, "b")
    counts = np.zeros(window.n_bins, dtype=np.int64)
    _hist_kernel(a, b, int(window.half_width_ps), int(window.bin_ps), counts)
    if duration_ps is None:
        hi = max(int(a[-1]) if a.size else 0, int(b[-1]) if b.size else 0)
        lo = min(int(a[0]) if a.size else 0, int(b[0]) if b.size else 0)
        duration_ps = max(hi - lo, 1)
    if duration_ps <= 0:
        raise ValidationError("duration_ps must be positive")
    accidental = a.size * b.size * window.width_ps / duration_ps
    edges = (np.arange(window.n_bins + 1, dtype=np.int64) * window.bin_ps
             - window.half_width_ps)
    counts.flags.writeable = False
    edges.flags.writeable = False
    return CorrelationHistogram(edges, counts, float(accidental))


def _exists_within(reference: np.ndarray, candidates: np.ndarray,
                   half_width: int) -> np.ndarray:
    lo = np.searchsorted(candidates, reference - half_width, side="left")
    hi = np.searchsorted(candidates, reference + half_width, side="right")
    return hi > lo


def heralded_g2(stream: TagStream, window: CoincidenceWindow,
                herald: ChannelId = ChannelId.D2,
                signal_a: ChannelId = ChannelId.U1,
                signal_b: ChannelId = ChannelId.U2) -> float:
    """Conditional second-order correlation from three-fold counting.

    g2(0) = N_h * N_hab / (N_ha * N_hb) where N_h counts heralds, N_ha and
    N_hb count heralds with at least one tag of the respective signal
    sub-channel inside the window, and N_hab counts heralds with both.  The
    channel-role defaults follow the simulator's split measurement layout
    (split_u1=True): D2 heralds, U1/U2 carry the two halves of the split
    signal arm.  An ideal single-photon stream gives 0, uncorrelated streams
    give 1, multi-pair emission pushes the value up from 0.
    """
    h = stream.channel(herald)
    if h.size == 0:
        raise InsufficientStatisticsError("no herald tags")
    hw = int(window.half_width_ps)
    in_a = _exists_within(h, stream.channel(signal_a), hw)
    in_b = _exists_within(h, stream.channel(signal_b), hw)
    n_h = h.size
    n_ha = int(np.count_nonzero(in_a))
    n_hb = int(np.count_nonzero(in_b))
    n_hab = int(np.count_nonzero(in_a & in_b))
    if n_ha == 0 or n_hb == 0:
        raise InsufficientStatisticsError(
            f"no herald-signal coincidences (N_ha={n_ha}, N_hb={n_hb})")
    return n_h * n_hab / (n_ha * n_hb)


def heralding_efficiency(stream: TagStream,
                         window: CoincidenceWindow) -> dict:
    """Matched coincidences divided by herald singles, per pair kind.

    The D-side channel of each pairing heralds the U-side one, so the ratio
    estimates the collection*detection efficiency of the U arm (plus an
    accidental floor of about singles_rate * width at high rates).
    """
    out = {}
    for kind, (cu, cd) in zip(PairKind, OPPOSITE_PAIRS):
        heralds = stream.channel(cd)
        if heralds.size == 0:
            raise InsufficientStatisticsError(f"no herald tags on {cd.name}")
        ta, tb = match(stream.channel(cu), heralds, window)
        out[kind] = ta.size / heralds.size
    return out


@dataclass(frozen=True)
class WindowSweep:
    """g2 estimates across coincidence window widths."""

    points: tuple  # of (width_ps, g2)
    slope_per_ns: float | None  # least-squares slope, None if undefined
    r_squared: float | None

    def __iter__(self):
        return iter(self.points)


def g2_vs_window(stream: TagStream, widths_ps: Sequence[int],
                 herald: ChannelId = ChannelId.D2,
                 signal_a: ChannelId = ChannelId.U1,
                 signal_b: ChannelId = ChannelId.U2) -> WindowSweep:
    """Heralded g2 at each window width plus a linear trend.

    Widths must be strictly ascending.  With fewer than two points the slope
    is undefined and returned as None.
    """
    widths = [int(w) for w in widths_ps]
    if len(widths) == 0:
        raise ValidationError("need at least one window width")
    if any(w2 <= w1 for w1, w2 in zip(widths, widths[1:])):
        raise ValidationError("window widths must be strictly ascending")
    points = []
    for w in widths:
        window = CoincidenceWindow(width_ps=w, bin_ps=w // 2)
        points.append((w, heralded_g2(stream, window, herald, signal_a, signal_b)))
    if len(points) < 2:
        return WindowSweep(tuple(points), None, None)
    x = np.array([p[0] for p in points], dtype=np.float64) * 1e-3  # ps -> ns
    y = np.array([p[1] for p in points], dtype=np.float64)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return WindowSweep(tuple(points), float(slope), r2)
