"""Simulator and detectors for bidirectional diffusion-based molecular relaying."""

from .channel import (
    ChannelTaps,
    LinkParams,
    ReceiverGeometry,
    fick_response,
    link_snr,
    noise_sample,
    peak_time,
    q_for_target_snr,
    sample_taps,
)
from .detectors import (
    DetectorState,
    MlDecisionParams,
    RelayErrorModel,
    build_relay_error_model,
    conditional_pxr,
    detect_dfe_threshold,
    detect_fixed_threshold,
    dfe_equalize,
    joint_pdf,
    make_ml_params,
    ml_decide_compact,
    ml_decide_general,
    q_function,
)
from .montecarlo import (
    BerResult,
    SystemConfig,
    estimate_ber,
    generate_bits,
    resolve_links,
    run_links,
    run_trial,
    simulate_link,
    simulate_signals,
    wilson_interval,
)
from .relay import RelayConfig, relay_detect, relay_encode

__all__ = [
    "BerResult",
    "ChannelTaps",
    "DetectorState",
    "LinkParams",
    "MlDecisionParams",
    "ReceiverGeometry",
    "RelayConfig",
    "RelayErrorModel",
    "SystemConfig",
    "build_relay_error_model",
    "conditional_pxr",
    "detect_dfe_threshold",
    "detect_fixed_threshold",
    "dfe_equalize",
    "estimate_ber",
    "fick_response",
    "generate_bits",
    "joint_pdf",
    "link_snr",
    "make_ml_params",
    "ml_decide_compact",
    "ml_decide_general",
    "noise_sample",
    "peak_time",
    "q_for_target_snr",
    "q_function",
    "relay_detect",
    "relay_encode",
    "resolve_links",
    "run_links",
    "run_trial",
    "sample_taps",
    "simulate_link",
    "simulate_signals",
    "wilson_interval",
]

__version__ = "0.1.0"
