"""Statistical validation: randomness test battery and signal fits.

The battery is the classic suite of frequency, block frequency, runs,
longest run of ones, cumulative sums (both directions), spectral, serial
and approximate entropy tests, each reducing a bit sequence to a P-value
that is uniform on [0, 1] under the null hypothesis of ideal randomness.
A sequence passes an entry when P >= alpha.  Over many sequences the
battery additionally checks the pass proportion against its three-sigma
band and the P-value histogram against uniformity.

Also here: normalized autocorrelation of a bit sequence (FFT based), a
straight-line fit helper, and the interference-dip visibility fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import fft as sfft
from scipy import special
from scipy import stats as sstats

from .errors import (InsufficientStatisticsError, SequenceTooShortError,
                     ValidationError)
from .timetag import BitBuffer

DEFAULT_ALPHA = 0.01

#: a battery's P-value histogram must reach this chi-square P to count uniform
UNIFORMITY_THRESHOLD = 1e-4

BATTERY_ENTRIES = (
    "frequency",
    "block_frequency",
    "runs",
    "longest_run",
    "cumulative_sums_forward",
    "cumulative_sums_reverse",
    "dft",
    "serial_1",
    "serial_2",
    "approximate_entropy",
)


def _bits_array(bits) -> np.ndarray:
    if isinstance(bits, BitBuffer):
        return bits.to_array()
    arr = np.ascontiguousarray(bits, dtype=np.uint8)
    if arr.ndim != 1:
        raise ValidationError("bit sequence must be one-dimensional")
    if arr.size and arr.max() > 1:
        raise ValidationError("bit values must be 0 or 1")
    return arr


@dataclass(frozen=True)
class TestResult:
    name: str
    p_value: float
    statistic: float
    passed: bool


def _result(name, p, stat, alpha):
    p = float(min(max(p, 0.0), 1.0))
    return TestResult(name=name, p_value=p, statistic=float(stat),
                      passed=bool(p >= alpha))


# ---------------------------------------------------------------------------
# individual tests

def frequency_test(bits, alpha: float = DEFAULT_ALPHA) -> TestResult:
    """Monobit balance: P = erfc(|sum(2x-1)| / sqrt(2n))."""
    x = _bits_array(bits)
    n = x.size
    if n < 1:
        raise SequenceTooShortError("frequency test needs at least one bit")
    s_obs = abs(2.0 * int(x.sum()) - n) / math.sqrt(n)
    return _result("frequency", math.erfc(s_obs / math.sqrt(2.0)), s_obs, alpha)


def block_frequency_test(bits, block_size: int = 128,
                         alpha: float = DEFAULT_ALPHA) -> TestResult:
    """Per-block ones proportion; chi-square with one dof per block."""
    x = _bits_array(bits)
    if block_size < 1:
        raise ValidationError("block_size must be positive")
    n_blocks = x.size // block_size
    if n_blocks < 1:
        raise SequenceTooShortError(
            f"block frequency test needs at least {block_size} bits")
    pi = (x[:n_blocks * block_size].reshape(n_blocks, block_size)
          .mean(axis=1, dtype=np.float64))
    chi2 = 4.0 * block_size * float(np.sum((pi - 0.5) ** 2))
    p = special.gammaincc(n_blocks / 2.0, chi2 / 2.0)
    return _result("block_frequency", p, chi2, alpha)


def runs_test(bits, alpha: float = DEFAULT_ALPHA) -> TestResult:
    """Total number of runs against its expectation for the observed bias.

    If the ones fraction is already outside 1/2 +- 2/sqrt(n) the run count
    is meaningless and the result is a hard fail (P = 0).
    """
    x = _bits_array(bits)
    n = x.size
    if n < 2:
        raise SequenceTooShortError("runs test needs at least two bits")
    pi = x.mean(dtype=np.float64)
    if abs(pi - 0.5) >= 2.0 / math.sqrt(n):
        return _result("runs", 0.0, float("nan"), alpha)
    v_obs = 1 + int(np.count_nonzero(np.diff(x)))
    num = abs(v_obs - 2.0 * n * pi * (1.0 - pi))
    den = 2.0 * math.sqrt(2.0 * n) * pi * (1.0 - pi)
    return _result("runs", math.erfc(num / den), float(v_obs), alpha)


# (block_size, class boundaries, class probabilities) by minimum n
_LONGEST_RUN_TABLES = (
    (750000, 10000, (10, 11, 12, 13, 14, 15),
     (0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727)),
    (6272, 128, (4, 5, 6, 7, 8),
     (0.1174, 0.2430, 0.2493, 0.1752, 0.1027, 0.1124)),
    (128, 8, (1, 2, 3),
     (0.2148, 0.3672, 0.2305, 0.1875)),
)


@njit(cache=True)
def _longest_one_runs(blocks):
    out = np.zeros(blocks.shape[0], np.int64)
    for i in range(blocks.shape[0]):
        best = 0
        cur = 0
        for j in range(blocks.shape[1]):
            if blocks[i, j]:
                cur += 1
                if cur > best:
                    best = cur
            else:
                cur = 0
        out[i] = best
    return out


def longest_run_test(bits, alpha: float = DEFAULT_ALPHA) -> TestResult:
    """Distribution of the longest run of ones per block."""
    x = _bits_array(bits)
    n = x.size
    for n_min, block_size, edges, probs in _LONGEST_RUN_TABLES:
        if n >= n_min:
            break
    else:
        raise SequenceTooShortError("longest run test needs at least 128 bits")
    n_blocks = n // block_size
    blocks = x[:n_blocks * block_size].reshape(n_blocks, block_size)
    longest = _longest_one_runs(blocks)
    # classes: <= edges[0], each middle value, >= edges[-1] + 1
    cls = np.searchsorted(np.asarray(edges), longest, side="left")
    counts = np.bincount(cls, minlength=len(probs))
    expected = n_blocks * np.asarray(probs)
    chi2 = float(np.sum((counts - expected) ** 2 / expected))
    p = special.gammaincc((len(probs) - 1) / 2.0, chi2 / 2.0)
    return _result("longest_run", p, chi2, alpha)


def _cusum_p(z: int, n: int) -> float:
    root = math.sqrt(n)
    k1 = np.arange(math.floor((-n / z + 1) / 4), math.floor((n / z - 1) / 4) + 1)
    k2 = np.arange(math.floor((-n / z - 3) / 4), math.floor((n / z - 1) / 4) + 1)
    term1 = np.sum(sstats.norm.cdf((4 * k1 + 1) * z / root)
                   - sstats.norm.cdf((4 * k1 - 1) * z / root))
    term2 = np.sum(sstats.norm.cdf((4 * k2 + 3) * z / root)
                   - sstats.norm.cdf((4 * k2 + 1) * z / root))
    return 1.0 - term1 + term2


def cumulative_sums_test(bits, alpha: float = DEFAULT_ALPHA) -> tuple:
    """Maximum random-walk excursion, scanning forward and in reverse."""
    x = _bits_array(bits)
    if x.size < 2:
        raise SequenceTooShortError("cumulative sums test needs at least two bits")
    steps = 2.0 * x.astype(np.int64) - 1
    out = []
    for name, seq in (("cumulative_sums_forward", steps),
                      ("cumulative_sums_reverse", steps[::-1])):
        z = int(np.max(np.abs(np.cumsum(seq))))
        p = _cusum_p(z, x.size) if z > 0 else 0.0
        out.append(_result(name, p, float(z), alpha))
    return tuple(out)


def dft_test(bits, alpha: float = DEFAULT_ALPHA) -> TestResult:
    """Spectral peak count below the 95% threshold T = sqrt(2.995732*n)."""
    x = _bits_array(bits)
    n = x.size
    if n < 2:
        raise SequenceTooShortError("spectral test needs at least two bits")
    signal = 2.0 * x.astype(np.float64) - 1.0
    mags = np.abs(sfft.rfft(signal))[:n // 2]
    threshold = math.sqrt(math.log(1.0 / 0.05) * n)
    n0 = 0.95 * n / 2.0
    n1 = int(np.count_nonzero(mags < threshold))
    d = (n1 - n0) / math.sqrt(n * 0.95 * 0.05 / 4.0)
    return _result("dft", math.erfc(abs(d) / math.sqrt(2.0)), d, alpha)


def _pattern_chisq(x: np.ndarray, m: int) -> float:
    """psi-square statistic over all overlapping m-bit patterns."""
    if m == 0:
        return 0.0
    n = x.size
    aug = np.concatenate([x, x[:m - 1]]) if m > 1 else x
    codes = np.zeros(n, dtype=np.int64)
    for j in range(m):
        codes = (codes << 1) | aug[j:j + n]
    counts = np.bincount(codes, minlength=1 << m)
    return float((1 << m) / n * np.dot(counts, counts) - n)


def serial_test(bits, pattern_bits: int | None = None,
                alpha: float = DEFAULT_ALPHA) -> tuple:
    """Overlapping m-bit pattern frequencies, first and second differences.

    pattern_bits defaults to min(16, floor(log2 n) - 3) so the pattern
    space stays well populated at any sequence length.
    """
    x = _bits_array(bits)
    n = x.size
    if n < 32:
        raise SequenceTooShortError("serial test needs at least 32 bits")
    m = pattern_bits if pattern_bits is not None else min(16, int(math.log2(n)) - 3)
    if m < 2:
        raise ValidationError("pattern_bits must be at least 2")
    if m > int(math.log2(n)) - 2:
        raise ValidationError("pattern_bits too large for this sequence")
    psi = [_pattern_chisq(x, k) for k in (m, m - 1, m - 2)]
    d1 = psi[0] - psi[1]
    d2 = psi[0] - 2.0 * psi[1] + psi[2]
    p1 = special.gammaincc(2 ** (m - 2), d1 / 2.0)
    p2 = special.gammaincc(2 ** (m - 3), d2 / 2.0)
    return (_result("serial_1", p1, d1, alpha),
            _result("serial_2", p2, d2, alpha))


def _phi(x: np.ndarray, m: int) -> float:
    n = x.size
    aug = np.concatenate([x, x[:m - 1]]) if m > 1 else x
    codes = np.zeros(n, dtype=np.int64)
    for j in range(m):
        codes = (codes << 1) | aug[j:j + n]
    counts = np.bincount(codes, minlength=1 << m)
    nz = counts[counts > 0].astype(np.float64) / n
    return float(np.sum(nz * np.log(nz)))


def approximate_entropy_test(bits, pattern_bits: int = 10,
                             alpha: float = DEFAULT_ALPHA) -> TestResult:
    """Excess regularity of m-bit versus (m+1)-bit patterns.

    pattern_bits is clamped down to floor(log2 n) - 5 when the sequence is
    too short for the default of 10.
    """
    x = _bits_array(bits)
    n = x.size
    if n < 128:
        raise SequenceTooShortError(
            "approximate entropy test needs at least 128 bits")
    m = min(pattern_bits, int(math.log2(n)) - 5)
    if m < 1:
        raise ValidationError("pattern_bits must be at least 1")
    ap_en = _phi(x, m) - _phi(x, m + 1)
    chi2 = 2.0 * n * (math.log(2.0) - ap_en)
    p = special.gammaincc(2 ** (m - 1), chi2 / 2.0)
    return _result("approximate_entropy", p, chi2, alpha)


# ---------------------------------------------------------------------------
# battery over a set of sequences

def test_sequence(bits, alpha: float = DEFAULT_ALPHA) -> tuple:
    """All battery entries for one sequence, in BATTERY_ENTRIES order."""
    x = _bits_array(bits)
    results = (frequency_test(x, alpha),
               block_frequency_test(x, alpha=alpha),
               runs_test(x, alpha),
               longest_run_test(x, alpha),
               *cumulative_sums_test(x, alpha),
               dft_test(x, alpha),
               *serial_test(x, alpha=alpha),
               approximate_entropy_test(x, alpha=alpha))
    assert tuple(r.name for r in results) == BATTERY_ENTRIES
    return results


def proportion_range(alpha: float, n_sequences: int) -> tuple:
    """Three-sigma acceptance band for the pass proportion."""
    if n_sequences < 1:
        raise ValidationError("n_sequences must be positive")
    if not 0.0 <= alpha < 1.0:
        raise ValidationError("alpha must lie in [0, 1)")
    p_hat = 1.0 - alpha
    half = 3.0 * math.sqrt(p_hat * alpha / n_sequences)
    return (p_hat - half, p_hat + half)


def uniformity_p(p_values) -> float:
    """Chi-square P for the ten-bin histogram of a test's P-values."""
    p = np.asarray(p_values, dtype=np.float64)
    if p.size < 1:
        raise ValidationError("uniformity needs at least one P-value")
    counts = np.histogram(p, bins=10, range=(0.0, 1.0))[0]
    expected = p.size / 10.0
    chi2 = float(np.sum((counts - expected) ** 2 / expected))
    return float(special.gammaincc(9.0 / 2.0, chi2 / 2.0))


@dataclass(frozen=True)
class TestReport:
    """Battery outcome over a set of equal-length sequences.

    entries lists the battery entries that actually ran; tests that the
    sequence length cannot support appear in skipped with a reason.
    """

    alpha: float
    sequence_bits: int
    entries: tuple
    p_values: np.ndarray  # (n_sequences, len(entries))
    skipped: dict

    def __post_init__(self):
        if len(self.entries) == 0:
            raise ValidationError("battery report needs at least one entry")
        pv = np.asarray(self.p_values, dtype=np.float64)
        if pv.ndim != 2 or pv.shape[1] != len(self.entries):
            raise ValidationError("p_values must be (n_sequences, n_entries)")
        if pv.size and (pv.min() < 0.0 or pv.max() > 1.0):
            raise ValidationError("P-values must lie in [0, 1]")
        object.__setattr__(self, "p_values", pv)
        object.__setattr__(self, "entries", tuple(self.entries))
        pv.setflags(write=False)

    @property
    def n_sequences(self) -> int:
        return self.p_values.shape[0]

    @property
    def proportions(self) -> dict:
        passed = (self.p_values >= self.alpha).mean(axis=0)
        return dict(zip(self.entries, passed.tolist()))

    @property
    def proportion_band(self) -> tuple:
        return proportion_range(self.alpha, self.n_sequences)

    @property
    def uniformity(self) -> dict:
        return {name: uniformity_p(self.p_values[:, i])
                for i, name in enumerate(self.entries)}

    @property
    def ks_statistic(self) -> dict:
        """Kolmogorov-Smirnov distance of each entry's P-values from uniform."""
        return {name: float(sstats.kstest(self.p_values[:, i], "uniform").statistic)
                for i, name in enumerate(self.entries)}

    def passed(self, uniformity_threshold: float = UNIFORMITY_THRESHOLD) -> bool:
        lo, hi = self.proportion_band
        props = self.proportions
        unif = self.uniformity
        return all(lo <= props[name] <= hi and unif[name] >= uniformity_threshold
                   for name in self.entries)


def nist_subset(sequences, alpha: float = DEFAULT_ALPHA) -> TestReport:
    """Run the battery on every sequence and collate the P-values.

    The standard recommends sequences of 10^6 bits and at least 55 of them
    for the proportion band to be meaningful; shorter or fewer are accepted.
    Tests the sequence length cannot support are skipped with a reason.
    """
    seqs = [_bits_array(s) for s in sequences]
    if not seqs:
        raise ValidationError("battery needs at least one sequence")
    n = seqs[0].size
    if any(s.size != n for s in seqs):
        raise ValidationError("battery sequences must share one length")
    groups = (
        ("frequency", ("frequency",),
         lambda x: (frequency_test(x, alpha),)),
        ("block_frequency", ("block_frequency",),
         lambda x: (block_frequency_test(x, alpha=alpha),)),
        ("runs", ("runs",),
         lambda x: (runs_test(x, alpha),)),
        ("longest_run", ("longest_run",),
         lambda x: (longest_run_test(x, alpha),)),
        ("cumulative_sums", ("cumulative_sums_forward", "cumulative_sums_reverse"),
         lambda x: cumulative_sums_test(x, alpha)),
        ("dft", ("dft",),
         lambda x: (dft_test(x, alpha),)),
        ("serial", ("serial_1", "serial_2"),
         lambda x: serial_test(x, alpha=alpha)),
        ("approximate_entropy", ("approximate_entropy",),
         lambda x: (approximate_entropy_test(x, alpha=alpha),)),
    )
    entries, skipped, columns = [], {}, []
    for group, names, fn in groups:
        try:
            rows = [fn(s) for s in seqs]
        except SequenceTooShortError as exc:
            skipped[group] = str(exc)
            continue
        entries.extend(names)
        columns.extend([[row[i].p_value for row in rows]
                        for i in range(len(names))])
    if not entries:
        raise SequenceTooShortError(
            f"{n}-bit sequences are too short for every battery test")
    return TestReport(alpha=alpha, sequence_bits=n, entries=tuple(entries),
                      p_values=np.array(columns).T, skipped=skipped)


# ---------------------------------------------------------------------------
# correlation and curve fits

@dataclass(frozen=True)
class AutocorrReport:
    """Pearson autocorrelation coefficients at lags 1..max_lag."""

    lags: np.ndarray
    coefficients: np.ndarray

    def __post_init__(self):
        lags = np.asarray(self.lags, dtype=np.int64)
        r = np.asarray(self.coefficients, dtype=np.float64)
        if lags.shape != r.shape or lags.ndim != 1 or lags.size == 0:
            raise ValidationError("lags and coefficients must match and be non-empty")
        if np.abs(r).max() > 1.0 + 1e-9:
            raise ValidationError("autocorrelation coefficients must lie in [-1, 1]")
        object.__setattr__(self, "lags", lags)
        object.__setattr__(self, "coefficients", r)
        lags.setflags(write=False)
        r.setflags(write=False)

    @property
    def max_lag(self) -> int:
        return int(self.lags[-1])

    @property
    def mean(self) -> float:
        return float(self.coefficients.mean())

    @property
    def std(self) -> float:
        return float(self.coefficients.std())

    @property
    def max_abs(self) -> float:
        return float(np.abs(self.coefficients).max())


def autocorrelation(bits, max_lag: int) -> AutocorrReport:
    """Normalized autocorrelation of a bit sequence at lags 1..max_lag.

    r(k) = sum((x_i - mean)(x_{i+k} - mean)) / sum((x_i - mean)^2).
    Computed by FFT with zero padding, so long sequences and many lags are
    cheap.
    """
    x = _bits_array(bits).astype(np.float64)
    n = x.size
    if not 1 <= max_lag < n:
        raise ValidationError("max_lag must lie in [1, n)")
    x -= x.mean()
    denom = float(np.dot(x, x))
    if denom == 0.0:
        raise ValidationError("autocorrelation of a constant sequence")
    length = sfft.next_fast_len(n + max_lag + 1)
    spectrum = sfft.rfft(x, length)
    acov = sfft.irfft(spectrum * np.conj(spectrum), length)[1:max_lag + 1]
    r = np.clip(acov / denom, -1.0, 1.0)
    return AutocorrReport(lags=np.arange(1, max_lag + 1), coefficients=r)


def autocorrelation_bound(n_bits: int) -> float:
    """Magnitude below which sample autocorrelations are noise (5/sqrt(n))."""
    if n_bits < 1:
        raise ValidationError("n_bits must be positive")
    return 5.0 / math.sqrt(n_bits)


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float


def fit_linear(x, y) -> LinearFit:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise ValidationError("linear fit needs two equal-length 1-d arrays")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    total = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / total if total > 0 else 1.0
    return LinearFit(slope=float(slope), intercept=float(intercept), r_squared=r2)


def dip_visibility(scan) -> float:
    """Visibility of an interference dip from a (delay, count) scan.

    V = (C_baseline - C_min) / C_baseline, where the baseline is the mean
    count over the outer 20% of delays (the wings, assumed far from the dip).
    """
    pairs = np.asarray(scan, dtype=np.float64)
    if pairs.ndim != 2 or pairs.shape[1] != 2 or pairs.shape[0] < 5:
        raise ValidationError("scan must be at least five (delay, count) pairs")
    delays, counts = pairs[:, 0], pairs[:, 1]
    n_wing = max(int(round(0.2 * delays.size)), 1)
    wings = np.argsort(np.abs(delays - delays.mean()))[-n_wing:]
    baseline = float(counts[wings].mean())
    if baseline <= 0:
        raise InsufficientStatisticsError("dip baseline must be positive")
    return (baseline - float(counts.min())) / baseline
