"""Rate-1/2 convolutional codec with an integer soft-input Viterbi decoder.

Soft inputs are confidence bytes in [0, 255]; 255 marks a coded bit that is
most likely a 1. The decoder maximises the correlation metric
``sum(s if expected_bit else 255 - s)`` over zero-terminated trellis paths,
which is order-equivalent to summing quantised log-likelihood ratios.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class CodecParams:
    """Shift-register code definition; defaults match the [133, 171] code."""

    constraint_length: int = 7
    generators: tuple[int, int] = (0o133, 0o171)

    def __post_init__(self):
        k = self.constraint_length
        if not 2 <= k <= 16:
            raise ValueError("constraint_length must lie in [2, 16]")
        if len(self.generators) != 2:
            raise ValueError("exactly two generators required for a rate-1/2 code")
        for g in self.generators:
            if not 0 < g < (1 << k):
                raise ValueError(f"generator {g:o} does not fit in {k} bits")
            if not (g >> (k - 1)) & 1:
                raise ValueError(f"generator {g:o} is missing the leading tap")

    @property
    def tail_bits(self) -> int:
        return self.constraint_length - 1

    def codeword_length(self, n_info: int) -> int:
        return 2 * (n_info + self.tail_bits)


def _as_bits(x, name: str) -> np.ndarray:
    arr = np.asarray(x)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D bit vector")
    if not np.issubdtype(arr.dtype, np.integer):
        rounded = np.rint(arr)
        if not np.array_equal(rounded, arr):
            raise ValueError(f"{name} must contain integers")
        arr = rounded.astype(np.int64)
    if np.any((arr != 0) & (arr != 1)):
        raise ValueError(f"{name} must contain only 0s and 1s")
    return arr.astype(np.uint8)


def _as_soft(x, params: CodecParams) -> np.ndarray:
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise ValueError("soft_bits must be a 1-D vector")
    if not np.issubdtype(arr.dtype, np.integer):
        rounded = np.rint(arr)
        if not np.array_equal(rounded, arr):
            raise ValueError("soft_bits must contain integers")
        arr = rounded
    arr = arr.astype(np.int64)
    if arr.size % 2:
        raise ValueError("soft_bits length must be even (two values per trellis step)")
    if arr.size < params.codeword_length(1):
        raise ValueError("soft_bits shorter than the smallest valid codeword")
    if arr.size and (arr.min() < 0 or arr.max() > 255):
        raise ValueError("soft_bits values must lie in [0, 255]")
    return arr


def encode(info_bits, params: CodecParams = CodecParams()) -> np.ndarray:
    """Encode from the zero state, appending zero tail bits to re-zero it."""
    bits = _as_bits(info_bits, "info_bits")
    return _kernels.conv_encode(bits, params.generators[0], params.generators[1],
                                params.constraint_length)


def viterbi_decode(soft_bits, params: CodecParams = CodecParams()) -> tuple[np.ndarray, int]:
    """Decode integer soft bits; returns ``(info_bits, path_metric)``.

    The metric is exact integer arithmetic, so equal-metric candidates are
    resolved identically on every run (lower predecessor state wins).
    """
    soft = _as_soft(soft_bits, params)
    return _kernels.viterbi_decode(soft, params.generators[0], params.generators[1],
                                   params.constraint_length)


def decode_success(soft_bits, params: CodecParams, true_info_bits) -> bool:
    """True iff decoding recovers ``true_info_bits`` exactly.

    Stands in for an error-detecting check: the simulator knows the sent
    bits, so no CRC is modelled.
    """
    truth = _as_bits(true_info_bits, "true_info_bits")
    soft = _as_soft(soft_bits, params)
    if soft.size != params.codeword_length(truth.size):
        raise ValueError("soft_bits length does not match the true message length")
    decoded, _ = _kernels.viterbi_decode(soft, params.generators[0], params.generators[1],
                                         params.constraint_length)
    return bool(np.array_equal(decoded, truth))


def hard_map(coded_bits) -> np.ndarray:
    """Noiseless soft mapping: bit 0 -> 0, bit 1 -> 255."""
    bits = _as_bits(coded_bits, "coded_bits")
    return bits.astype(np.int64) * 255


@dataclass(frozen=True, eq=False)
class CodedPacket:
    """One update packet: payload bits plus the codeword actually sent."""

    sensor_id: int
    round_index: int
    generation_time: float
    info_bits: np.ndarray
    coded_bits: np.ndarray
    params: CodecParams = field(default=CodecParams())

    def __post_init__(self):
        info = _as_bits(self.info_bits, "info_bits")
        coded = _as_bits(self.coded_bits, "coded_bits")
        if coded.size != self.params.codeword_length(info.size):
            raise ValueError("coded_bits length must be twice info length plus tail overhead")
        if not np.array_equal(encode(info, self.params), coded):
            raise ValueError("coded_bits is not the encoding of info_bits")
        object.__setattr__(self, "info_bits", info)
        object.__setattr__(self, "coded_bits", coded)

    @classmethod
    def from_info(cls, info_bits, sensor_id: int = 0, round_index: int = 0,
                  generation_time: float = 0.0,
                  params: CodecParams = CodecParams()) -> "CodedPacket":
        info = _as_bits(info_bits, "info_bits")
        return cls(sensor_id, round_index, generation_time, info,
                   encode(info, params), params)
