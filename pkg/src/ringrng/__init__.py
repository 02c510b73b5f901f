"""Desk-scale quantum random number pipeline on photon-pair statistics.

Simulated four-channel photon time tags from a sectioned-ring pair source
feed a coincidence matcher whose which-pairing outcomes become raw bits;
plug-in min-entropy estimation sets the rate of a seeded Toeplitz extractor,
and the output is validated with a randomness test battery plus
autocorrelation.  Every stage is usable on its own and every run is
reproducible from its config and seed.
"""

from .bitgen import RawBitRecord, bits_from_stream, generate_raw_bits
from .coincidence import (CoincidenceWindow, CorrelationHistogram, EventList,
                          PairKind, WindowSweep, correlation_histogram,
                          find_coincidences, g2_vs_window, heralded_g2,
                          heralding_efficiency, match)
from .entropy import EntropyReport, extraction_ratio, min_entropy_8bit
from .errors import (FileFormatError, InsufficientEntropyError,
                     InsufficientStatisticsError, RingRngError,
                     SequenceTooShortError, ValidationError)
from .spdcsim import (HomScanConfig, SimConfig, analytic_g2, hom_scan, preset,
                      simulate, singles_saturation_curve)
from .stats import (AutocorrReport, TestReport, autocorrelation,
                    autocorrelation_bound, dip_visibility, fit_linear,
                    nist_subset, proportion_range, test_sequence)
from .timetag import (BitBuffer, ChannelId, TagStream, TimeTag, read_bits,
                      read_tags, write_bits, write_tags)
from .toeplitz import ExtractorConfig, ExtractionResult, expand_seed, extract

__version__ = "0.1.0"

__all__ = [
    "AutocorrReport", "BitBuffer", "ChannelId", "CoincidenceWindow",
    "CorrelationHistogram", "EntropyReport", "EventList", "ExtractionResult", "ExtractorConfig",
    "FileFormatError", "HomScanConfig", "InsufficientEntropyError",
    "InsufficientStatisticsError", "PairKind", "RawBitRecord", "RingRngError",
    "SequenceTooShortError", "SimConfig", "TagStream", "TestReport",
    "TimeTag", "ValidationError", "WindowSweep", "analytic_g2", "autocorrelation",
    "autocorrelation_bound", "bits_from_stream", "correlation_histogram",
    "dip_visibility", "expand_seed", "extract", "extraction_ratio",
    "find_coincidences", "fit_linear", "g2_vs_window", "generate_raw_bits",
    "heralded_g2", "heralding_efficiency", "hom_scan", "match",
    "min_entropy_8bit", "nist_subset", "preset", "proportion_range",
    "read_bits", "read_tags", "simulate", "singles_saturation_curve",
    "test_sequence", "write_bits", "write_tags",
]
