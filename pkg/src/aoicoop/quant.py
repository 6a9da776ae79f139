"""Soft-bit quantisation, m-bit requantisation for backbone forwarding,
reconstruction at the receiving AP, and multi-branch diversity combining.

All quantised vectors live on the integer range [0, 255]; an m-bit vector is
restricted to the 2**m uniform levels over that range. 255 marks a coded bit
that is most likely a 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .backbone import HEADER_BYTES


@dataclass(frozen=True)
class QuantizerParams:
    """Affine quantiser map and combining parameters.

    ``alpha_combined`` left as None derives alpha / branch_count at combine
    time, which reduces to alpha/2 for the common one-remote case.
    """

    alpha: float = 0.25
    beta: float = 0.5
    alpha_combined: float | None = None
    m: int = 8
    h_max_sq: float = 1.0

    def __post_init__(self):
        if not 0.2 <= self.alpha <= 0.5:
            raise ValueError("alpha must lie in [0.2, 0.5]")
        if self.beta != 0.5:
            raise ValueError("beta is fixed at 0.5")
        if not 1 <= self.m <= 8:
            raise ValueError("m must lie in {1..8}")
        if self.alpha_combined is not None and self.alpha_combined <= 0:
            raise ValueError("alpha_combined must be positive")


@dataclass
class SoftVector:
    """Real-valued per-bit confidence values from one AP (or combined)."""

    values: np.ndarray
    ap_id: int | str = 1

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ValueError("values must be a 1-D vector")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("values must be finite")


def quantization_levels(m: int) -> np.ndarray:
    """The 2**m permitted integers: floor(i * 255 / (2**m - 1))."""
    if not 1 <= m <= 8:
        raise ValueError("m must lie in {1..8}")
    n = (1 << m) - 1
    return (np.arange(n + 1) * 255 // n).astype(np.int64)


@dataclass
class QuantizedSoftVector:
    """Integer soft bits restricted to the 2**m uniform levels."""

    values: np.ndarray
    m: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.int64)
        if self.values.ndim != 1:
            raise ValueError("values must be a 1-D vector")
        levels = quantization_levels(self.m)
        member = np.zeros(256, dtype=bool)
        member[levels] = True
        if self.values.size and (self.values.min() < 0 or self.values.max() > 255
                                 or not member[self.values].all()):
            raise ValueError(f"values must be {1 << self.m} permitted m={self.m} levels")

    @property
    def levels(self) -> np.ndarray:
        return quantization_levels(self.m)


def _round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(np.asarray(x) + 0.5).astype(np.int64)


def quantize8(soft: SoftVector, q: QuantizerParams) -> QuantizedSoftVector:
    """Map confidences into [0, 255] bytes via ``(x/h_max * a + b) * 255``.

    Values are normalised by the packet's largest channel power, rounded
    half-up, and clamped at the range edges.
    """
    if q.h_max_sq <= 0:
        raise ValueError("h_max_sq must be positive")
    scaled = (soft.values / q.h_max_sq * q.alpha + q.beta) * 255.0
    return QuantizedSoftVector(np.clip(_round_half_up(scaled), 0, 255), m=8)


def requantize(qsv: QuantizedSoftVector, m_out: int) -> QuantizedSoftVector:
    """Snap 8-bit soft values onto the 2**m_out uniform levels.

    For two levels the split is pinned at 128 inclusive on the zero side;
    for all other m the nearest level wins and exact midpoints go up.
    """
    if qsv.m != 8:
        raise ValueError("requantize expects an 8-bit input vector")
    if not 1 <= m_out <= 8:
        raise ValueError("m_out must lie in {1..8}")
    if m_out == 8:
        return QuantizedSoftVector(qsv.values.copy(), m=8)
    if m_out == 1:
        return QuantizedSoftVector(np.where(qsv.values <= 128, 0, 255), m=1)
    levels = quantization_levels(m_out)
    mids = (levels[:-1] + levels[1:]) / 2.0
    idx = np.searchsorted(mids, qsv.values, side="right")
    return QuantizedSoftVector(levels[idx], m=m_out)


def reconstruct(qsv: QuantizedSoftVector, q: QuantizerParams) -> SoftVector:
    """Invert the affine byte map: ``(v/255 - b) / a``.

    Recovers the confidence normalised by the sender's largest channel
    power, which the receiving AP does not know.
    """
    if q.alpha <= 0:
        raise ValueError("alpha must be positive")
    values = (qsv.values / 255.0 - q.beta) / q.alpha
    return SoftVector(values=values, ap_id="reconstructed")


def combine_values(own: SoftVector, own_h_max_sq: float,
                   remote: Sequence[QuantizedSoftVector],
                   q: QuantizerParams) -> np.ndarray:
    """Pre-clamp combined confidences, as real numbers.

    The local branch enters at full precision; each remote branch is
    reconstructed from its quantised bytes. The sum is compressed with
    ``alpha_combined`` (alpha / branch count unless set) around the 0.5
    midpoint and scaled onto [0, 255].
    """
    if own_h_max_sq <= 0:
        raise ValueError("own_h_max_sq must be positive")
    for r in remote:
        if r.values.size != own.values.size:
            raise ValueError("remote vectors must match the local vector length")
    a_prime = q.alpha_combined
    if a_prime is None:
        a_prime = q.alpha / (1 + len(remote))
    total = own.values / own_h_max_sq
    for r in remote:
        total = total + reconstruct(r, q).values
    return (total * a_prime + q.beta) * 255.0


def combine(own: SoftVector, own_h_max_sq: float,
            remote: Sequence[QuantizedSoftVector], q: QuantizerParams,
            clamp: bool = True) -> QuantizedSoftVector:
    """Combine local and remote branches into decoder-ready bytes.

    With no remote branches and ``alpha_combined`` unset this reduces to
    ``quantize8`` of the local vector. ``clamp=False`` is for range analysis
    only; the caller must then guarantee the values stay in [0, 255].
    """
    values = _round_half_up(combine_values(own, own_h_max_sq, remote, q))
    if clamp:
        values = np.clip(values, 0, 255)
    return QuantizedSoftVector(values, m=8)


def pack_soft_payload(qsv: QuantizedSoftVector, header: bytes | None = None) -> bytes:
    """Serialise to the backbone wire form: 30-byte header, then level
    indices packed big-endian at m bits each (zero-padded to a byte)."""
    if header is None:
        header = bytes(HEADER_BYTES)
    if len(header) != HEADER_BYTES:
        raise ValueError(f"header must be exactly {HEADER_BYTES} bytes")
    levels = qsv.levels
    idx = np.searchsorted(levels, qsv.values)
    shifts = np.arange(qsv.m - 1, -1, -1)
    bits = ((idx[:, None] >> shifts[None, :]) & 1).astype(np.uint8).ravel()
    return header + np.packbits(bits).tobytes()


def unpack_soft_payload(data: bytes, n_values: int, m: int) -> tuple[bytes, QuantizedSoftVector]:
    """Inverse of ``pack_soft_payload``; returns (header, vector)."""
    if not 1 <= m <= 8:
        raise ValueError("m must lie in {1..8}")
    need = HEADER_BYTES + (n_values * m + 7) // 8
    if len(data) < need:
        raise ValueError(f"payload too short: need {need} bytes, got {len(data)}")
    header = data[:HEADER_BYTES]
    bits = np.unpackbits(np.frombuffer(data[HEADER_BYTES:], dtype=np.uint8))[:n_values * m]
    shifts = np.arange(m - 1, -1, -1)
    idx = (bits.reshape(n_values, m).astype(np.int64) << shifts[None, :]).sum(axis=1)
    return header, QuantizedSoftVector(quantization_levels(m)[idx], m=m)
