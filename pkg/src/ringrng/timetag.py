"""Four-channel photon time-tag containers, bit buffers, and their file I/O.

Time is integer picoseconds throughout the package.  The four channels are
the sections of the ring-shaped pair source; emission puts the two photons of
a pair on opposite sections, so the meaningful pairings are (U1, D2) and
(U2, D1).

File formats:

* Tag file: magic ``b"QTT1"``, then version u8 (=1), channel_count u8 (=4),
  reserved u16 (=0), acquisition_duration u64 LE, record_count u64 LE,
  followed by ``record_count`` records of (channel u8, t u64 LE), sorted
  globally by t with ties broken by channel code.
* Packed bit file: magic ``b"QBB1"``, bit_len u64 LE, then ceil(bit_len/8)
  payload bytes, MSB-first within each byte, unused trailing bits zero.
* ASCII bit file: one ``0`` or ``1`` character per bit, no separators.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import FileFormatError, ValidationError

TAG_MAGIC = b"QTT1"
BIT_MAGIC = b"QBB1"
TAG_FILE_VERSION = 1
CHANNEL_COUNT = 4
TAG_HEADER_BYTES = 24
TAG_RECORD_BYTES = 9
BIT_HEADER_BYTES = 12

# 64-bit tag times cover acquisitions beyond 1e5 s at 1 ps resolution.
MAX_TAG_TIME = 2**63 - 1

_RECORD_DTYPE = np.dtype([("channel", "u1"), ("t", "<u8")])


class ChannelId(enum.IntEnum):
    """Detector channels; the values are the on-disk channel codes."""

    U1 = 0
    U2 = 1
    D1 = 2
    D2 = 3


#: Opposite-section pairings a photon pair can land on, in bit-value order:
#: a (U1, D2) coincidence encodes bit 0, a (U2, D1) coincidence bit 1.
OPPOSITE_PAIRS = ((ChannelId.U1, ChannelId.D2), (ChannelId.U2, ChannelId.D1))


@dataclass(frozen=True)
class TimeTag:
    """A single detection event."""

    channel: ChannelId
    t: int


def _as_tag_array(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.int64)
    if arr.ndim != 1:
        raise ValidationError("tag times must form a one-dimensional array")
    out = np.ascontiguousarray(arr)
    out.flags.writeable = False
    return out


class TagStream:
    """Immutable per-channel sorted tag times plus the acquisition duration.

    Parameters
    ----------
    channels : mapping of ChannelId to array-like of int
        Tag times in ps for each channel.  Missing channels are empty.
    acquisition_duration : int
        Acquisition length in ps.  Every tag must satisfy
        ``0 <= t <= acquisition_duration``.
    origin : str
        Free-form provenance marker ("simulated", "imported", ...).  Not part
        of equality and not persisted in tag files.
    """

    __slots__ = ("_channels", "acquisition_duration", "origin")

    def __init__(self, channels: Mapping[ChannelId, Iterable[int]],
                 acquisition_duration: int, origin: str = "simulated"):
        duration = int(acquisition_duration)
        if duration < 0:
            raise ValidationError("acquisition_duration must be non-negative")
        if duration > MAX_TAG_TIME:
            raise ValidationError("acquisition_duration exceeds 63-bit time range")
        per_channel = []
        for cid in ChannelId:
            arr = _as_tag_array(channels.get(cid, ()))
            if arr.size:
                if np.any(np.diff(arr) < 0):
                    raise ValidationError(f"channel {cid.name}: tag times not sorted")
                if arr[0] < 0:
                    raise ValidationError(f"channel {cid.name}: negative tag time")
                if arr[-1] > duration:
                    raise ValidationError(
                        f"channel {cid.name}: tag time {int(arr[-1])} exceeds "
                        f"acquisition_duration {duration}")
            per_channel.append(arr)
        object.__setattr__(self, "_channels", tuple(per_channel))
        object.__setattr__(self, "acquisition_duration", duration)
        object.__setattr__(self, "origin", str(origin))

    def __setattr__(self, name, value):
        raise AttributeError("TagStream is immutable")

    @classmethod
    def empty(cls, acquisition_duration: int = 0, origin: str = "simulated"):
        return cls({}, acquisition_duration, origin)

    def channel(self, cid: ChannelId) -> np.ndarray:
        """Sorted int64 tag times for one channel (read-only view)."""
        return self._channels[ChannelId(cid)]

    @property
    def channels(self) -> dict:
        return {cid: self._channels[cid] for cid in ChannelId}

    @property
    def tag_count(self) -> int:
        return sum(arr.size for arr in self._channels)

    @property
    def duration_s(self) -> float:
        return self.acquisition_duration * 1e-12

    def __eq__(self, other):
        if not isinstance(other, TagStream):
            return NotImplemented
        if self.acquisition_duration != other.acquisition_duration:
            return False
        return all(np.array_equal(self._channels[c], other._channels[c])
                   for c in ChannelId)

    def __repr__(self):
        counts = ", ".join(f"{c.name}={self._channels[c].size}" for c in ChannelId)
        return (f"TagStream({counts}, duration={self.acquisition_duration} ps, "
                f"origin={self.origin!r})")


@dataclass(frozen=True)
class BitBuffer:
    """An immutable bit string packed MSB-first into bytes.

    ``payload`` holds ceil(bit_len/8) bytes; bit i of the buffer is bit
    (7 - i % 8) of payload byte i // 8.  Trailing bits of the last byte are
    zero, which makes equal bit strings equal buffers.
    """

    payload: bytes
    bit_len: int

    def __post_init__(self):
        if self.bit_len < 0:
            raise ValidationError("bit_len must be non-negative")
        need = (self.bit_len + 7) // 8
        if len(self.payload) != need:
            raise ValidationError(
                f"payload holds {len(self.payload)} bytes, expected {need} "
                f"for {self.bit_len} bits")
        tail = self.bit_len % 8
        if tail and self.payload and (self.payload[-1] & ((1 << (8 - tail)) - 1)):
            raise ValidationError("unused trailing bits must be zero")

    @classmethod
    def from_array(cls, bits) -> "BitBuffer":
        """Build from an iterable/array of 0/1 values."""
        arr = np.asarray(bits, dtype=np.uint8)
        if arr.ndim != 1:
            raise ValidationError("bits must be one-dimensional")
        if arr.size and arr.max() > 1:
            raise ValidationError("bits must be 0 or 1")
        return cls(np.packbits(arr).tobytes(), int(arr.size))

    @classmethod
    def from_bytes(cls, payload: bytes, bit_len: int | None = None) -> "BitBuffer":
        if bit_len is None:
            bit_len = 8 * len(payload)
        return cls(bytes(payload), int(bit_len))

    @classmethod
    def concat(cls, parts: Iterable["BitBuffer"]) -> "BitBuffer":
        parts = list(parts)
        if not parts:
            return cls(b"", 0)
        if all(p.bit_len % 8 == 0 for p in parts[:-1]):
            # byte-aligned fast path
            payload = b"".join(p.payload for p in parts)
            return cls(payload, sum(p.bit_len for p in parts))
        return cls.from_array(np.concatenate([p.to_array() for p in parts]))

    def to_array(self) -> np.ndarray:
        """The bits as a uint8 array of 0/1 values."""
        full = np.unpackbits(np.frombuffer(self.payload, dtype=np.uint8))
        return full[:self.bit_len]

    def xor(self, other: "BitBuffer") -> "BitBuffer":
        if self.bit_len != other.bit_len:
            raise ValidationError("xor needs equal-length buffers")
        a = np.frombuffer(self.payload, dtype=np.uint8)
        b = np.frombuffer(other.payload, dtype=np.uint8)
        return BitBuffer((a ^ b).tobytes(), self.bit_len)

    def __len__(self):
        return self.bit_len

    def __repr__(self):
        head = "".join(str(b) for b in self.to_array()[:16])
        more = "..." if self.bit_len > 16 else ""
        return f"BitBuffer({self.bit_len} bits: {head}{more})"


# ---------------------------------------------------------------------------
# tag file I/O

def write_tags(stream: TagStream, path) -> None:
    """Write a TagStream to a tag file (see module docstring for the layout)."""
    if not isinstance(stream, TagStream):
        raise ValidationError("write_tags expects a TagStream")
    # Re-check invariants in case backing arrays were replaced under __slots__.
    for cid in ChannelId:
        arr = stream.channel(cid)
        if arr.size and (np.any(np.diff(arr) < 0) or arr[0] < 0
                         or arr[-1] > stream.acquisition_duration):
            raise ValidationError(f"channel {cid.name}: invariant violated")
    total = stream.tag_count
    rec = np.empty(total, dtype=_RECORD_DTYPE)
    pos = 0
    for cid in ChannelId:
        arr = stream.channel(cid)
        rec["channel"][pos:pos + arr.size] = int(cid)
        rec["t"][pos:pos + arr.size] = arr.astype(np.uint64)
        pos += arr.size
    order = np.lexsort((rec["channel"], rec["t"]))
    rec = rec[order]
    header = (TAG_MAGIC
              + bytes([TAG_FILE_VERSION, CHANNEL_COUNT])
              + (0).to_bytes(2, "little")
              + int(stream.acquisition_duration).to_bytes(8, "little")
              + int(total).to_bytes(8, "little"))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(rec.tobytes())


def read_tags(path) -> TagStream:
    """Read a tag file back into a TagStream (origin = "imported").

    Raises FileFormatError naming the byte offset for bad magic, unsupported
    version, truncated records, unknown channel codes, or ordering violations.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < TAG_HEADER_BYTES:
        raise FileFormatError("tag file shorter than header", offset=len(blob))
    if blob[:4] != TAG_MAGIC:
        raise FileFormatError(f"bad magic {blob[:4]!r}, expected {TAG_MAGIC!r}",
                              offset=0)
    version = blob[4]
    if version != TAG_FILE_VERSION:
        raise FileFormatError(f"unsupported version {version}", offset=4)
    n_channels = blob[5]
    if n_channels != CHANNEL_COUNT:
        raise FileFormatError(f"channel_count {n_channels}, expected 4", offset=5)
    reserved = int.from_bytes(blob[6:8], "little")
    if reserved != 0:
        raise FileFormatError("reserved field must be zero", offset=6)
    duration = int.from_bytes(blob[8:16], "little")
    count = int.from_bytes(blob[16:24], "little")
    body = blob[TAG_HEADER_BYTES:]
    if len(body) != count * TAG_RECORD_BYTES:
        got = len(body) // TAG_RECORD_BYTES
        raise FileFormatError(
            f"record_count says {count} records but body holds {got} full "
            f"records plus {len(body) % TAG_RECORD_BYTES} bytes",
            offset=TAG_HEADER_BYTES + got * TAG_RECORD_BYTES)
    rec = np.frombuffer(body, dtype=_RECORD_DTYPE)
    ch = rec["channel"]
    t = rec["t"]
    if count:
        bad = np.nonzero(ch >= CHANNEL_COUNT)[0]
        if bad.size:
            i = int(bad[0])
            raise FileFormatError(f"unknown channel code {int(ch[i])}",
                                  offset=TAG_HEADER_BYTES + i * TAG_RECORD_BYTES)
        if int(t.max()) > MAX_TAG_TIME:
            i = int(np.argmax(t))
            raise FileFormatError("tag time exceeds 63-bit range",
                                  offset=TAG_HEADER_BYTES + i * TAG_RECORD_BYTES + 1)
        # global (t, channel) order is part of the format
        dt = np.diff(t.astype(np.int64))
        violated = (dt < 0) | ((dt == 0) & (np.diff(ch.astype(np.int16)) < 0))
        bad = np.nonzero(violated)[0]
        if bad.size:
            i = int(bad[0]) + 1
            raise FileFormatError(
                "records out of order (t must be non-decreasing, ties in "
                "channel order)",
                offset=TAG_HEADER_BYTES + i * TAG_RECORD_BYTES)
    channels = {}
    for cid in ChannelId:
        channels[cid] = np.sort(t[ch == int(cid)].astype(np.int64), kind="stable")
    try:
        return TagStream(channels, duration, origin="imported")
    except ValidationError as exc:
        raise FileFormatError(f"tag data invalid: {exc}") from exc


# ---------------------------------------------------------------------------
# bit file I/O

def write_bits(bits: BitBuffer, path, fmt: str = "packed") -> None:
    """Write a BitBuffer as a packed bit file or as ASCII characters."""
    if not isinstance(bits, BitBuffer):
        raise ValidationError("write_bits expects a BitBuffer")
    if fmt == "packed":
        header = BIT_MAGIC + int(bits.bit_len).to_bytes(8, "little")
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(bits.payload)
    elif fmt == "ascii":
        arr = bits.to_array() + ord("0")
        with open(path, "wb") as fh:
            fh.write(arr.astype(np.uint8).tobytes())
    else:
        raise ValidationError(f"unknown bit file format {fmt!r}")


def read_bits(path, fmt: str = "packed") -> BitBuffer:
    """Read a bit file written by write_bits."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if fmt == "packed":
        if len(blob) < BIT_HEADER_BYTES:
            raise FileFormatError("bit file shorter than header", offset=len(blob))
        if blob[:4] != BIT_MAGIC:
            raise FileFormatError(
                f"bad magic {blob[:4]!r}, expected {BIT_MAGIC!r}", offset=0)
        bit_len = int.from_bytes(blob[4:12], "little")
        payload = blob[BIT_HEADER_BYTES:]
        need = (bit_len + 7) // 8
        if len(payload) != need:
            raise FileFormatError(
                f"payload holds {len(payload)} bytes, expected {need} for "
                f"{bit_len} bits", offset=BIT_HEADER_BYTES + min(len(payload), need))
        try:
            return BitBuffer(payload, bit_len)
        except ValidationError as exc:
            raise FileFormatError(f"bit data invalid: {exc}",
                                  offset=BIT_HEADER_BYTES + need - 1) from exc
    elif fmt == "ascii":
        arr = np.frombuffer(blob, dtype=np.uint8)
        bad = np.nonzero((arr != ord("0")) & (arr != ord("1")))[0]
        if bad.size:
            i = int(bad[0])
            raise FileFormatError(
                f"invalid character {chr(arr[i])!r} in ASCII bit file", offset=i)
        return BitBuffer.from_array(arr - ord("0"))
    raise ValidationError(f"unknown bit file format {fmt!r}")
