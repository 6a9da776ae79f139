"""Per-packet Monte Carlo chain: encode, modulate, per-AP channel, decode,
m-bit forwarding, and joint decoding at the primary.

One orientation note: the demapper dot product is positive for a likely coded
bit of 0, while the decoder expects 255 to mean a likely 1. The chain
therefore negates the demapper output before quantisation, so every byte fed
to the decoder (and forwarded over the backbone) follows the 255-means-1
convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import codec, phy, quant
from .seeding import TAG_CHANNEL, TAG_INFO, substream


@dataclass(frozen=True)
class ChainParams:
    """Fixed PHY-chain configuration shared by every packet of a run."""

    payload_bytes: int = 96
    profile: str = "flat"
    alpha: float = 0.25
    codec_params: codec.CodecParams = field(default_factory=codec.CodecParams)

    def __post_init__(self):
        if self.payload_bytes <= 0:
            raise ValueError("payload_bytes must be positive")
        if self.profile not in ("flat", "rayleigh_per_symbol"):
            raise ValueError(f"unknown channel profile {self.profile!r}")
        if not 0.2 <= self.alpha <= 0.5:
            raise ValueError("alpha must lie in [0.2, 0.5]")


@dataclass
class PacketRealization:
    """Everything one packet produced at every AP, kept for joint decoding."""

    info_bits: np.ndarray
    decoded_ok: list[bool]
    metric: list[np.ndarray]      # decoder-oriented confidences per AP
    h_max_sq: list[float]
    qsv8: list[quant.QuantizedSoftVector]

    @property
    def failed_secondaries(self) -> list[int]:
        return [r for r in range(1, len(self.decoded_ok)) if not self.decoded_ok[r]]


def realize_packet(snrs_db: Sequence[float], params: ChainParams,
                   master_seed: int, packet_index: int) -> PacketRealization:
    """Run one packet through every AP's link and local decoder.

    AP ``r`` draws from a stream keyed by (seed, packet, r), so adding an AP
    never perturbs the others' realizations.
    """
    rng_info = substream(master_seed, TAG_INFO, packet_index)
    info = rng_info.integers(0, 2, params.payload_bytes * 8).astype(np.uint8)
    coded = codec.encode(info, params.codec_params)
    symbols = phy.modulate(coded)

    decoded_ok: list[bool] = []
    metric: list[np.ndarray] = []
    h_max_sq: list[float] = []
    qsv8: list[quant.QuantizedSoftVector] = []
    for r, snr in enumerate(snrs_db):
        link = phy.apply_channel(symbols, params.profile, float(snr),
                                 substream(master_seed, TAG_CHANNEL, packet_index, r),
                                 ap_id=r + 1)
        values = -phy.llr(link).values           # decoder orientation
        h_max = phy.max_gain(link)
        q = quant.QuantizerParams(alpha=params.alpha, h_max_sq=h_max)
        bytes8 = quant.quantize8(quant.SoftVector(values, ap_id=r + 1), q)
        ok = codec.decode_success(bytes8.values, params.codec_params, info)
        decoded_ok.append(ok)
        metric.append(values)
        h_max_sq.append(h_max)
        qsv8.append(bytes8)
    return PacketRealization(info_bits=info, decoded_ok=decoded_ok, metric=metric,
                             h_max_sq=h_max_sq, qsv8=qsv8)


def joint_decode(real: PacketRealization, m: int, branch_aps: Sequence[int],
                 params: ChainParams) -> bool:
    """Joint decode at the primary with the given remote branches.

    Remote branches contribute their 8-bit bytes requantised to m bits; the
    primary's own confidences enter at full precision.
    """
    remotes = [quant.requantize(real.qsv8[r], m) for r in branch_aps]
    q = quant.QuantizerParams(alpha=params.alpha, h_max_sq=real.h_max_sq[0])
    own = quant.SoftVector(real.metric[0], ap_id=1)
    combined = quant.combine(own, real.h_max_sq[0], remotes, q)
    return codec.decode_success(combined.values, params.codec_params, real.info_bits)


@dataclass
class LinkProbTable:
    """Empirical decode probabilities for one SNR tuple.

    ``p_joint[m][b - 1]`` is the joint success rate with the first ``b``
    failed secondary branches, conditioned on the primary and those
    secondaries all failing; ``n_cond[b - 1]`` is the size of that
    conditioning set.
    """

    snrs_db: tuple[float, ...]
    n_packets: int
    p_ap: np.ndarray
    p_joint: dict[int, np.ndarray]
    n_cond: np.ndarray

    @property
    def n_aps(self) -> int:
        return len(self.snrs_db)


def estimate_link_probabilities(snrs_db: Sequence[float], params: ChainParams,
                                m_values: Sequence[int], n_packets: int,
                                master_seed: int,
                                collect_outcomes: bool = False):
    """Monte Carlo the chain ``n_packets`` times and tabulate success rates.

    Returns ``(table, outcomes)``; ``outcomes`` is a list of per-packet slot
    outcome tuples ``(decoded flags, joint flags dict)`` when requested,
    otherwise None. Joint decoding is attempted only when the primary failed
    and at least one secondary failed, with remote branches accumulated in
    AP order.
    """
    if n_packets < 1:
        raise ValueError("n_packets must be at least 1")
    m_values = sorted(set(int(m) for m in m_values))
    for m in m_values:
        if not 1 <= m <= 8:
            raise ValueError("m values must lie in {1..8}")
    n_aps = len(snrs_db)
    n_sec = n_aps - 1
    ap_success = np.zeros(n_aps, dtype=np.int64)
    joint_success = {m: np.zeros(max(n_sec, 1), dtype=np.int64) for m in m_values}
    n_cond = np.zeros(max(n_sec, 1), dtype=np.int64)
    outcomes = [] if collect_outcomes else None

    for p in range(n_packets):
        real = realize_packet(snrs_db, params, master_seed, p)
        ap_success += np.array(real.decoded_ok, dtype=np.int64)
        joint_flags: dict[int, bool] = {}
        if not real.decoded_ok[0]:
            failed = real.failed_secondaries
            for b in range(1, len(failed) + 1):
                n_cond[b - 1] += 1
                for m in m_values:
                    ok = joint_decode(real, m, failed[:b], params)
                    joint_success[m][b - 1] += ok
                    if b == len(failed):
                        joint_flags[m] = ok
        if collect_outcomes:
            outcomes.append((tuple(real.decoded_ok), joint_flags))

    with np.errstate(invalid="ignore"):
        p_joint = {m: np.where(n_cond > 0, joint_success[m] / np.maximum(n_cond, 1), np.nan)
                   for m in m_values}
    table = LinkProbTable(snrs_db=tuple(float(s) for s in snrs_db),
                          n_packets=n_packets,
                          p_ap=ap_success / n_packets,
                          p_joint=p_joint,
                          n_cond=n_cond)
    return table, outcomes
