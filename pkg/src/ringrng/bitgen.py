"""Raw bit production from matched coincidence events.

Each coincidence carries the pairing that produced it: (U1, D2) emits a 0,
(U2, D1) emits a 1.  Which pairing fires is the quantum coin flip; this
module only transcribes it and keeps the bookkeeping (counts, rate, bias).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coincidence import CoincidenceWindow, EventList, find_coincidences
from .errors import ValidationError
from .timetag import BitBuffer, TagStream


@dataclass(frozen=True)
class RawBitRecord:
    """Raw bit block plus the acquisition bookkeeping it came from."""

    bits: BitBuffer
    zeros: int
    ones: int
    duration_s: float | None = None

    def __post_init__(self):
        if self.zeros < 0 or self.ones < 0:
            raise ValidationError("counts must be non-negative")
        if self.zeros + self.ones != self.bits.bit_len:
            raise ValidationError("counts do not add up to the bit length")
        if self.duration_s is not None and self.duration_s <= 0:
            raise ValidationError("duration_s must be positive")

    @property
    def bit_count(self) -> int:
        return self.bits.bit_len

    @property
    def bias(self) -> float:
        """Fraction of ones; 1/2 for an ideally balanced record."""
        if self.bit_count == 0:
            raise ValidationError("bias of an empty bit record")
        return self.ones / self.bit_count

    @property
    def bit_rate_hz(self) -> float | None:
        if self.duration_s is None:
            return None
        return self.bit_count / self.duration_s


def generate_raw_bits(events: EventList,
                      duration_s: float | None = None) -> RawBitRecord:
    """Transcribe matched events into bits, in time order."""
    kinds = events.kind
    ones = int(np.count_nonzero(kinds))
    bits = BitBuffer.from_array(kinds)
    return RawBitRecord(bits=bits, zeros=len(events) - ones, ones=ones,
                        duration_s=duration_s)


def bits_from_stream(stream: TagStream,
                     window: CoincidenceWindow = CoincidenceWindow()) -> RawBitRecord:
    """Full front end: match coincidences in a tag stream, then transcribe."""
    events = find_coincidences(stream, window)
    return generate_raw_bits(events, duration_s=stream.duration_s)
