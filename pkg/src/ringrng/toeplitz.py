"""Toeplitz-hashing randomness extractor over GF(2).

A block of n raw bits x is compressed to m < n output bits via out = T.x
where T is an m x n binary Toeplitz matrix, T[i][j] = s[i - j + n - 1],
defined by a seed s of n + m - 1 bits.  Because T.x is a slice of the full
convolution s * x, the product is computed with one FFT-sized convolution
and reduced mod 2; convolution counts stay far below 2**52 so the rounded
float result is exact.  A direct integer convolution is kept as an
independent route for cross-checks and small blocks.

Seeds are not stored: block b's seed is the keystream of ChaCha20 under a
key derived from (domain tag, seed_key) with b as the nonce, so any block
can be re-derived for audit from (seed_key, block index) alone.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms
from numba import njit
from scipy import fft as sfft

from .errors import SequenceTooShortError, ValidationError
from .timetag import BitBuffer

_SEED_DOMAIN = b"ringrng-toeplitz-seed-v1"

#: block sizes at or above this use the FFT route by default
_FFT_CUTOVER_BITS = 1 << 15


@dataclass(frozen=True)
class ExtractorConfig:
    """Block geometry and seed key for the extractor.

    output bits per block = floor(block_bits * output_ratio); a trailing
    partial input block is dropped, never padded.
    """

    block_bits: int = 1_000_000
    output_ratio: float = 0.95
    seed_key: int = 0

    def __post_init__(self):
        if self.block_bits < 2:
            raise ValidationError("block_bits must be at least 2")
        if not 0.0 < self.output_ratio < 1.0:
            raise ValidationError("output_ratio must lie in (0, 1)")
        if not 0 <= self.seed_key < 2**64:
            raise ValidationError("seed_key must fit in 64 bits")
        if self.output_bits < 1:
            raise ValidationError("output_ratio leaves no output bits")

    @property
    def output_bits(self) -> int:
        return int(self.block_bits * self.output_ratio)

    @property
    def seed_bits(self) -> int:
        return self.block_bits + self.output_bits - 1


def expand_seed(seed_key: int, block_index: int, n_bits: int) -> np.ndarray:
    """Derive a block's Toeplitz seed bits from the key and block index."""
    if n_bits < 1:
        raise ValidationError("seed expansion needs at least one bit")
    if not 0 <= block_index < 2**64:
        raise ValidationError("block_index must fit in 64 bits")
    key = hashlib.sha256(_SEED_DOMAIN + int(seed_key).to_bytes(8, "little")).digest()
    nonce = int(block_index).to_bytes(16, "little")
    enc = Cipher(algorithms.ChaCha20(key, nonce), mode=None).encryptor()
    stream = enc.update(bytes((n_bits + 7) // 8))
    return np.unpackbits(np.frombuffer(stream, dtype=np.uint8))[:n_bits]


def toeplitz_matrix(seed_bits: np.ndarray, output_bits: int) -> np.ndarray:
    """Materialize the matrix (small blocks only; rows x cols = m x n)."""
    seed_bits = np.asarray(seed_bits, dtype=np.uint8)
    n = seed_bits.size - output_bits + 1
    if n < 1:
        raise ValidationError("seed shorter than the requested output")
    idx = (n - 1) + np.arange(output_bits)[:, None] - np.arange(n)[None, :]
    return seed_bits[idx]


def _apply_fft(seed_bits, x_bits, output_bits):
    n = x_bits.size
    length = sfft.next_fast_len(seed_bits.size + n - 1)
    conv = sfft.irfft(sfft.rfft(seed_bits.astype(np.float64), length)
                      * sfft.rfft(x_bits.astype(np.float64), length), length)
    window = np.rint(conv[n - 1:n - 1 + output_bits])
    return (window.astype(np.int64) & 1).astype(np.uint8)


def _pack_words(bits, extra_words):
    packed = np.packbits(bits, bitorder="little")
    words = np.zeros((packed.size + 7) // 8 + extra_words, dtype=np.uint64)
    words.view(np.uint8)[:packed.size] = packed
    return words


@njit(cache=True)
def _packed_kernel(rev_words, x_words, output_bits):
    # row i of T is the n-bit window of the reversed seed at offset m-1-i;
    # its dot product with x mod 2 is the xor-fold parity of window & x
    out = np.empty(output_bits, np.uint8)
    nw = x_words.size
    for i in range(output_bits):
        offset = output_bits - 1 - i
        q = offset >> 6
        sh = np.uint64(offset & 63)
        inv = np.uint64(64) - sh
        acc = np.uint64(0)
        if sh == np.uint64(0):
            for w in range(nw):
                acc ^= rev_words[q + w] & x_words[w]
        else:
            for w in range(nw):
                window = (rev_words[q + w] >> sh) | (rev_words[q + w + 1] << inv)
                acc ^= window & x_words[w]
        acc ^= acc >> np.uint64(32)
        acc ^= acc >> np.uint64(16)
        acc ^= acc >> np.uint64(8)
        acc ^= acc >> np.uint64(4)
        acc ^= acc >> np.uint64(2)
        acc ^= acc >> np.uint64(1)
        out[i] = np.uint8(acc & np.uint64(1))
    return out


def _apply_packed(seed_bits, x_bits, output_bits):
    rev_words = _pack_words(seed_bits[::-1], extra_words=1)
    x_words = _pack_words(x_bits, extra_words=0)
    return _packed_kernel(rev_words, x_words, output_bits)


def toeplitz_apply(seed_bits: np.ndarray, x_bits: np.ndarray,
                   output_bits: int, method: str = "auto") -> np.ndarray:
    """Multiply one input block by the seed's Toeplitz matrix over GF(2).

    The packed route works on 64-bit words with parity folds and is fastest
    for small blocks; the FFT route costs O(L log L) and takes over for
    large ones.  Both are exact and must always agree.
    """
    seed_bits = np.ascontiguousarray(seed_bits, dtype=np.uint8)
    x_bits = np.ascontiguousarray(x_bits, dtype=np.uint8)
    if output_bits < 1:
        raise ValidationError("output_bits must be positive")
    if seed_bits.size != x_bits.size + output_bits - 1:
        raise ValidationError("seed length must be input bits + output bits - 1")
    if method == "auto":
        method = "fft" if x_bits.size >= _FFT_CUTOVER_BITS else "packed"
    if method == "fft":
        return _apply_fft(seed_bits, x_bits, output_bits)
    if method == "packed":
        return _apply_packed(seed_bits, x_bits, output_bits)
    raise ValidationError(f"unknown method {method!r}")


@dataclass(frozen=True)
class ExtractionResult:
    bits: BitBuffer
    block_bits: int
    output_block_bits: int
    n_blocks: int
    dropped_bits: int

    @property
    def input_bits_used(self) -> int:
        return self.n_blocks * self.block_bits


def extract(bits: BitBuffer, config: ExtractorConfig = ExtractorConfig(),
            method: str = "auto", workers: int | None = None) -> ExtractionResult:
    """Extract from every full input block with per-block derived seeds.

    workers only parallelizes the FFT internals; the output is identical
    for any worker count.
    """
    n = config.block_bits
    n_blocks = bits.bit_len // n
    if n_blocks == 0:
        raise SequenceTooShortError(
            f"need at least {n} raw bits for one block, got {bits.bit_len}")
    x_all = bits.to_array()
    out_parts = []
    for b in range(n_blocks):
        seed = expand_seed(config.seed_key, b, config.seed_bits)
        x = x_all[b * n:(b + 1) * n]
        if workers and method in ("auto", "fft"):
            with sfft.set_workers(workers):
                out_parts.append(toeplitz_apply(seed, x, config.output_bits, method))
        else:
            out_parts.append(toeplitz_apply(seed, x, config.output_bits, method))
    out = np.concatenate(out_parts)
    return ExtractionResult(bits=BitBuffer.from_array(out),
                            block_bits=n,
                            output_block_bits=config.output_bits,
                            n_blocks=n_blocks,
                            dropped_bits=bits.bit_len - n_blocks * n)
