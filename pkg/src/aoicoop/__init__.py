"""Status-update freshness simulator for backbone-assisted cooperative APs.

Sensors send coded update packets on a TDMA grid; every in-range access
point tries to decode them. Secondary APs forward decoded packets, or
m-bit quantised soft bits of packets they failed to decode, over a wired
backbone to the primary AP, which measures per-sensor Age of Information.
The package covers the whole pipeline: convolutional codec with soft-input
Viterbi decoding, BPSK link model, soft-bit quantisation and combining,
backbone delay models, the event-driven AoI engine, and an experiment
harness with a CLI.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .aoi import (AoiSeries, BernoulliSource, MonteCarloSource, SimConfig, SimResult,
                  SlotOutcome, TraceSource, brute_force_oracle, emit_trace, ingest_trace,
                  run)
from .backbone import (ConstantDelayModel, EmpiricalDelayModel, ForwardPayload,
                       ParametricDelayModel, load_delay_samples, payload_for,
                       sample_delay)
from .chain import ChainParams, LinkProbTable, estimate_link_probabilities, realize_packet
from .codec import CodecParams, CodedPacket, decode_success, encode, viterbi_decode
from .errors import AoicoopError, ConfigError, ConfigValidationError, TraceFormatError
from .experiments import (ExperimentSpec, generate_phy_traces, run_experiment,
                          validate_config)
from .phy import (LinkRealization, TimingParams, apply_channel, llr, max_gain, modulate,
                  packet_duration)
from .quant import (QuantizedSoftVector, QuantizerParams, SoftVector, combine,
                    pack_soft_payload, quantization_levels, quantize8, reconstruct,
                    requantize, unpack_soft_payload)

__version__ = "0.1.0"

__all__ = [
    "AoiSeries", "AoicoopError", "BernoulliSource", "ChainParams", "CodecParams",
    "CodedPacket", "ConfigError", "ConfigValidationError", "ConstantDelayModel",
    "EmpiricalDelayModel", "ExperimentSpec", "ForwardPayload", "KERNEL_BACKEND",
    "LinkProbTable", "LinkRealization", "MonteCarloSource", "ParametricDelayModel",
    "QuantizedSoftVector", "QuantizerParams", "SimConfig", "SimResult", "SlotOutcome",
    "SoftVector", "TimingParams", "TraceFormatError", "TraceSource", "apply_channel",
    "brute_force_oracle", "combine", "decode_success", "emit_trace", "encode",
    "estimate_link_probabilities", "generate_phy_traces", "ingest_trace", "llr",
    "load_delay_samples", "max_gain", "modulate", "pack_soft_payload", "packet_duration",
    "payload_for", "quantization_levels", "quantize8", "realize_packet", "reconstruct",
    "requantize", "run", "run_experiment", "sample_delay", "unpack_soft_payload",
    "validate_config", "viterbi_decode",
]
