"""Wired-backbone model: forwarded-payload sizing, MTU fragmentation, and
one-way delay models (constant, parametric, or replayed measurements).

Payload sizing counts a 30-byte link header plus either the decoded data
bytes or the m-bit soft fields for the coded data bits; trellis tail fields
are excluded from the sizing model. Anything above the 1500-byte MTU splits
into ceil(payload / 1500) fragments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import ConfigError, TraceFormatError

MTU_BYTES = 1500
HEADER_BYTES = 30

DELAY_KIND_CODES = ("decoded",) + tuple(f"soft_m{m}" for m in range(1, 9))


@dataclass(frozen=True)
class ForwardPayload:
    """One forwarded unit: its wire kind, byte count, and fragment count."""

    kind: str                 # "decoded" | "soft"
    payload_bytes: int
    fragments: int
    m: int | None = None

    @property
    def code(self) -> str:
        return self.kind if self.kind == "decoded" else f"soft_m{self.m}"


def payload_for(kind: str, data_bytes: int, m: int | None = None) -> ForwardPayload:
    """Size the backbone payload for a decoded packet or an m-bit soft dump."""
    if data_bytes <= 0:
        raise ValueError("data_bytes must be positive")
    if kind == "decoded":
        payload = HEADER_BYTES + data_bytes
        m = None
    elif kind == "soft":
        if m is None or not 1 <= m <= 8:
            raise ValueError("soft payloads need m in {1..8}")
        payload = 2 * m * data_bytes + HEADER_BYTES
    else:
        raise ValueError(f"unknown payload kind {kind!r}")
    return ForwardPayload(kind=kind, payload_bytes=payload,
                          fragments=-(-payload // MTU_BYTES), m=m)


class ConstantDelayModel:
    """Fixed one-way delay regardless of payload."""

    kind = "constant"

    def __init__(self, delay_s: float):
        if delay_s <= 0:
            raise ValueError("delay must be positive")
        self.delay_s = float(delay_s)

    def mean(self, payload: ForwardPayload) -> float:
        return self.delay_s

    def sample_from_uniform(self, payload: ForwardPayload, u: float) -> float:
        return self.delay_s

    def sample(self, payload: ForwardPayload, rng: np.random.Generator) -> float:
        return self.delay_s


class ParametricDelayModel:
    """Base plus per-fragment delay with uniform multiplicative jitter.

    The defaults (1 ms base, 2.1 ms per fragment, +/-25 % jitter) are a
    desk-scale calibration: they put the mean near 20 ms for nine-fragment
    payloads, near 10 ms for five, and near 3 ms for a single fragment.
    Replace with an EmpiricalDelayModel when real measurements exist.
    """

    kind = "parametric"

    def __init__(self, base_s: float = 1e-3, per_fragment_s: float = 2.1e-3,
                 jitter: float = 0.25):
        if base_s < 0 or per_fragment_s < 0 or base_s + per_fragment_s <= 0:
            raise ValueError("base and per-fragment delays must be nonnegative and not both zero")
        if not 0 <= jitter < 1:
            raise ValueError("jitter must lie in [0, 1)")
        self.base_s = float(base_s)
        self.per_fragment_s = float(per_fragment_s)
        self.jitter = float(jitter)

    def mean(self, payload: ForwardPayload) -> float:
        return self.base_s + self.per_fragment_s * payload.fragments

    def sample_from_uniform(self, payload: ForwardPayload, u: float) -> float:
        return self.mean(payload) * (1.0 + self.jitter * (2.0 * u - 1.0))

    def sample(self, payload: ForwardPayload, rng: np.random.Generator) -> float:
        return self.sample_from_uniform(payload, rng.random())


class EmpiricalDelayModel:
    """Uniform resampling of recorded one-way delays, keyed by payload code."""

    kind = "empirical"

    def __init__(self, samples: Mapping[str, np.ndarray]):
        self.samples: dict[str, np.ndarray] = {}
        for code, arr in samples.items():
            if code not in DELAY_KIND_CODES:
                raise ConfigError(f"unknown delay sample kind {code!r}")
            arr = np.asarray(arr, dtype=np.float64)
            if arr.size == 0:
                raise ConfigError(f"no delay samples for kind {code!r}")
            if np.any(arr <= 0):
                raise ValueError(f"delay samples for {code!r} must be positive")
            self.samples[code] = arr

    @classmethod
    def from_files(cls, paths, assume_oneway: bool | None = None) -> "EmpiricalDelayModel":
        samples = {}
        for path in paths:
            kind, arr = load_delay_samples(path, assume_oneway=assume_oneway)
            if kind is None:
                raise ConfigError(f"{path}: sample file does not name its kind")
            samples[kind] = arr
        return cls(samples)

    def _array(self, payload: ForwardPayload) -> np.ndarray:
        arr = self.samples.get(payload.code)
        if arr is None:
            raise ConfigError(f"no delay samples recorded for kind {payload.code!r}")
        return arr

    def mean(self, payload: ForwardPayload) -> float:
        return float(self._array(payload).mean())

    def sample_from_uniform(self, payload: ForwardPayload, u: float) -> float:
        arr = self._array(payload)
        return float(arr[min(int(u * arr.size), arr.size - 1)])

    def sample(self, payload: ForwardPayload, rng: np.random.Generator) -> float:
        return self.sample_from_uniform(payload, rng.random())


DelayModel = ConstantDelayModel | ParametricDelayModel | EmpiricalDelayModel


def sample_delay(model: DelayModel, payload: ForwardPayload, rng_seed) -> float:
    """Draw one delay; deterministic for a given seed."""
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    return model.sample(payload, rng)


def load_delay_samples(path, assume_oneway: bool | None = None
                       ) -> tuple[str | None, np.ndarray]:
    """Read a delay sample file: one value per line, milliseconds by default.

    An optional first line ``# kind=<code> unit=<ms|s> oneway=<true|false>``
    names the payload kind and units; round-trip files (oneway=false) are
    halved on load. ``assume_oneway`` overrides the header flag.
    """
    path = Path(path)
    kind: str | None = None
    unit = "ms"
    oneway = True
    values: list[float] = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                if lineno == 1:
                    for token in line[1:].split():
                        if "=" not in token:
                            raise TraceFormatError(f"{path}:{lineno}: bad header token {token!r}")
                        key, _, val = token.partition("=")
                        if key == "kind":
                            kind = val
                        elif key == "unit":
                            if val not in ("ms", "s"):
                                raise TraceFormatError(f"{path}:{lineno}: unsupported unit {val!r}")
                            unit = val
                        elif key == "oneway":
                            oneway = val.lower() in ("true", "1", "yes")
                        else:
                            raise TraceFormatError(f"{path}:{lineno}: unknown header key {key!r}")
                continue
            try:
                v = float(line)
            except ValueError:
                raise TraceFormatError(f"{path}:{lineno}: not a number: {line!r}") from None
            if not math.isfinite(v) or v <= 0:
                raise TraceFormatError(f"{path}:{lineno}: delays must be positive, got {line!r}")
            values.append(v)
    if not values:
        raise TraceFormatError(f"{path}: no delay samples found")
    arr = np.array(values, dtype=np.float64)
    if unit == "ms":
        arr = arr / 1e3
    if assume_oneway is not None:
        oneway = assume_oneway
    if not oneway:
        arr = arr / 2.0
    if kind is not None and kind not in DELAY_KIND_CODES:
        raise TraceFormatError(f"{path}: unknown kind {kind!r}")
    return kind, arr
