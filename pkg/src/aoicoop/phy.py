"""BPSK mapping, frequency-domain link model, per-symbol confidence values,
and air-time arithmetic for slotted updates.

The channel is applied per data subcarrier directly in the frequency domain;
cyclic-prefix OFDM only enters through the sample counts used for packet
timing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .quant import SoftVector


@dataclass(frozen=True)
class TimingParams:
    """Sample-count bookkeeping for one update packet inside its slot."""

    payload_bytes: int
    preamble_samples: int = 320
    fft_size: int = 64
    cp_samples: int = 16
    data_subcarriers: int = 48
    bandwidth_hz: float = 2e7
    code_rate_inverse: int = 2
    slot_seconds: float = 1.2e-3

    def __post_init__(self):
        for name in ("preamble_samples", "fft_size", "cp_samples",
                     "data_subcarriers", "code_rate_inverse"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.bandwidth_hz <= 0 or self.slot_seconds <= 0:
            raise ValueError("bandwidth_hz and slot_seconds must be positive")


@dataclass
class LinkRealization:
    """One packet's worth of channel state and received symbols at one AP."""

    ap_id: int
    gains: np.ndarray
    noise_variance: float
    received: np.ndarray
    snr_db: float

    def __post_init__(self):
        self.gains = np.asarray(self.gains, dtype=np.complex128)
        self.received = np.asarray(self.received, dtype=np.complex128)
        if self.gains.shape != self.received.shape or self.gains.ndim != 1:
            raise ValueError("gains and received must be 1-D vectors of equal length")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be nonnegative")


def modulate(coded_bits) -> np.ndarray:
    """Unit-energy antipodal mapping: bit b -> 1 - 2b."""
    bits = np.asarray(coded_bits)
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("coded_bits must contain only 0s and 1s")
    return 1.0 - 2.0 * bits.astype(np.float64)


def _as_generator(rng_seed) -> np.random.Generator:
    if isinstance(rng_seed, np.random.Generator):
        return rng_seed
    return np.random.default_rng(rng_seed)


def apply_channel(symbols, profile: str, snr_db: float, rng_seed,
                  ap_id: int = 1) -> LinkRealization:
    """Pass symbols through gain + complex AWGN; deterministic per seed.

    ``flat`` uses unit gain on every symbol; ``rayleigh_per_symbol`` draws
    i.i.d. unit-mean-square complex gains. Noise variance is
    ``10**(-snr_db / 10)`` for unit-energy symbols; ``snr_db = inf`` gives
    the exact noiseless limit.
    """
    x = np.asarray(symbols, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("symbols must be a non-empty 1-D vector")
    if math.isnan(snr_db):
        raise ValueError("snr_db must not be NaN")
    rng = _as_generator(rng_seed)
    n = x.size
    if profile == "flat":
        h = np.ones(n, dtype=np.complex128)
    elif profile == "rayleigh_per_symbol":
        h = math.sqrt(0.5) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    else:
        raise ValueError(f"unknown channel profile {profile!r}")
    sigma2 = 0.0 if math.isinf(snr_db) else 10.0 ** (-snr_db / 10.0)
    if sigma2 > 0.0:
        noise = math.sqrt(sigma2 / 2.0) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    else:
        noise = 0.0
    return LinkRealization(ap_id=ap_id, gains=h, noise_variance=sigma2,
                           received=h * x + noise, snr_db=snr_db)


def llr(link: LinkRealization) -> SoftVector:
    """Per-symbol confidence ``Re(y * conj(h))``.

    This is the dot product of received symbol and channel gain viewed as
    2-vectors; the constant ``2 / sigma^2`` scale is dropped because it does
    not change which trellis path wins.
    """
    values = np.real(link.received * np.conj(link.gains))
    return SoftVector(values=values, ap_id=link.ap_id)


def max_gain(link: LinkRealization) -> float:
    """Largest per-symbol channel power ``max_k |h[k]|^2``."""
    if link.gains.size == 0:
        raise ValueError("link has no gains")
    return float(np.max(np.abs(link.gains) ** 2))


def ofdm_symbol_count(t: TimingParams) -> int:
    """Whole OFDM symbols needed to carry the coded payload."""
    coded_bits = t.payload_bytes * 8 * t.code_rate_inverse
    return -(-coded_bits // t.data_subcarriers)


def packet_duration(t: TimingParams) -> float:
    """Air time in seconds of preamble plus payload OFDM symbols.

    Raises ``ConfigError`` when the packet does not fit in the slot.
    """
    if t.payload_bytes <= 0:
        raise ValueError("payload_bytes must be positive")
    samples = t.preamble_samples + ofdm_symbol_count(t) * (t.fft_size + t.cp_samples)
    duration = samples / t.bandwidth_hz
    if duration > t.slot_seconds:
        raise ConfigError(
            f"packet duration {duration * 1e3:.3f} ms exceeds the "
            f"{t.slot_seconds * 1e3:.3f} ms slot"
        )
    return duration
