"""Three-node full-duplex timeline simulation and BER estimation.

Timeline and alignment
----------------------
Both end nodes transmit one bit per slot. The relay thresholds both incoming
streams every slot and transmits, in slot k, the XOR of its slot k-1
decisions (one-slot processing delay). A destination therefore buffers its
direct-path observation one slot and pairs Y_direct[k] with Y_relay[k+1], so
both observations of information slot k are processed together. All detector
equations operate in that aligned index. With n simulated slots, information
slots 0 .. n-2 are decodable; the first L-1 of them are warm-up (histories
start all-zero) and are excluded from BER accounting.

RNG discipline
--------------
One root seed. Every consumer draws from its own substream derived as
SeedSequence([seed, point_index, stream_id]) with the fixed stream ids below,
so adding or removing detectors never perturbs the channel noise
realizations (common random numbers across detector comparisons), and sweep
points are independent and order-insensitive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelTaps, LinkParams, ReceiverGeometry, sample_taps
from .detectors import (
    DetectorState,
    build_relay_error_model,
    detect_dfe_threshold,
    detect_fixed_threshold,
    dfe_equalize,
    make_ml_params,
    ml_decide_general,
)
from .relay import relay_detect, relay_encode

DETECTORS = ("fixed", "dfe_threshold", "proposed_ml")

LINK_NAMES = ("ab", "ba", "ar", "br", "ra", "rb")

# Fixed substream ids (see module docstring).
_STREAM_BITS_A = 0
_STREAM_BITS_B = 1
_STREAM_NOISE = {"ab": 2, "ba": 3, "ar": 4, "br": 5, "ra": 6, "rb": 7}

_WILSON_Z = 1.959963984540054  # two-sided 95%


def substream(seed: int, *key: int) -> np.random.Generator:
    """Deterministic, independent generator for the given (seed, *key) tuple."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, key)]))


@dataclass(frozen=True)
class SystemConfig:
    """Full three-node topology plus experiment controls.

    The six physical links are derived from node-level parameters: each end
    node's molecules diffuse with that node's coefficient over the pair
    distance, and the relay's molecules reach both nodes over their
    node-relay distances. ``relay_gamma_*`` default to half the first tap of
    the corresponding incoming link.
    """

    q_a: float = 2.0e4
    q_b: float = 2.0e4
    q_r: float = 2.0e4
    diffusion_a: float = 6.0e-9
    diffusion_b: float = 5.0e-9
    diffusion_r: float = 4.3e-9
    d_ab: float = 2.0e-6
    d_ar: float = 1.0e-6
    d_br: float = 1.0e-6
    radius: float = 80.0e-9
    symbol_duration: float = 100.0e-6
    num_taps: int = 10
    tap_offset: float = 1.0
    relay_gamma_a: float | None = None
    relay_gamma_b: float | None = None
    detector: str = "proposed_ml"
    num_symbols: int = 200_000
    seed: int = 0
    noiseless: bool = False
    variance_isi_start: int = 1

    def __post_init__(self):
        positive = (
            "q_a", "q_b", "q_r",
            "diffusion_a", "diffusion_b", "diffusion_r",
            "d_ab", "d_ar", "d_br",
            "radius", "symbol_duration",
        )
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.num_taps < 1:
            raise ValueError("num_taps must be >= 1")
        if not 0.0 < self.tap_offset <= 1.0:
            raise ValueError("tap_offset must lie in (0, 1]")
        # relay threshold overrides may be negative (stress configurations that
        # pin the relay's decisions), but not NaN
        for name in ("relay_gamma_a", "relay_gamma_b"):
            g = getattr(self, name)
            if g is not None and math.isnan(g):
                raise ValueError(f"{name} must not be NaN")
        if self.detector not in DETECTORS:
            raise ValueError(f"detector must be one of {DETECTORS}")
        if self.num_symbols <= self.warmup + 1:
            raise ValueError("num_symbols must exceed num_taps (warm-up plus one slot)")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")
        if self.variance_isi_start not in (1, 2):
            raise ValueError("variance_isi_start must be 1 or 2")

    @property
    def warmup(self) -> int:
        return self.num_taps - 1

    @property
    def geometry(self) -> ReceiverGeometry:
        return ReceiverGeometry(self.radius)


def resolve_links(cfg: SystemConfig) -> dict:
    """Per-link physical parameters implied by the node-level config."""

    def link(q, diff, dist):
        return LinkParams(
            q=q,
            diffusion=diff,
            distance=dist,
            symbol_duration=cfg.symbol_duration,
            num_taps=cfg.num_taps,
            tap_offset=cfg.tap_offset,
        )

    return {
        "ab": link(cfg.q_a, cfg.diffusion_a, cfg.d_ab),
        "ba": link(cfg.q_b, cfg.diffusion_b, cfg.d_ab),
        "ar": link(cfg.q_a, cfg.diffusion_a, cfg.d_ar),
        "br": link(cfg.q_b, cfg.diffusion_b, cfg.d_br),
        "ra": link(cfg.q_r, cfg.diffusion_r, cfg.d_ar),
        "rb": link(cfg.q_r, cfg.diffusion_r, cfg.d_br),
    }


def generate_bits(n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. equiprobable bits."""
    if n <= 0:
        raise ValueError("n must be > 0")
    return rng.integers(0, 2, size=n, dtype=np.int64)


def simulate_link(
    bits,
    taps: ChannelTaps,
    geom: ReceiverGeometry,
    rng: np.random.Generator,
    noiseless: bool = False,
) -> np.ndarray:
    """Received concentration sequence for one link.

    Slot mean is the FIR convolution of the bit stream with the taps
    (zero-padded past); each slot adds an independent zero-mean Gaussian with
    variance mean/volume, which is exactly zero on zero-signal slots.
    """
    x = np.asarray(bits, dtype=float)
    if x.size == 0:
        raise ValueError("bit sequence must be nonempty")
    mean = np.convolve(x, taps.values)[: x.size]
    if noiseless:
        return mean
    std = np.sqrt(mean / geom.volume)
    return mean + std * rng.standard_normal(x.size)


@dataclass(frozen=True)
class BerResult:
    """One experiment point for one detector at one destination."""

    detector: str
    node: str
    x_value: float
    ber: float
    ci_low: float
    ci_high: float
    symbols: int
    errors: int
    seed: int


def wilson_interval(errors: int, n: int, z: float = _WILSON_Z) -> tuple:
    """95% Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("n must be > 0")
    p = errors / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2.0 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom
    return max(center - half, 0.0), min(center + half, 1.0)


def estimate_ber(decisions, truth, warmup: int) -> tuple:
    """(ber, ci_low, ci_high, symbols_counted, errors) over indices >= warmup."""
    decisions = np.asarray(decisions)
    truth = np.asarray(truth)
    if decisions.shape != truth.shape:
        raise ValueError("decision and truth sequences must have equal length")
    if len(decisions) <= warmup:
        raise ValueError("sequences must be longer than the warm-up")
    counted = len(decisions) - warmup
    errors = int(np.count_nonzero(decisions[warmup:] != truth[warmup:]))
    ber = errors / counted
    lo, hi = wilson_interval(errors, counted)
    return ber, lo, hi, counted, errors


@dataclass
class SignalSet:
    """Everything both destinations observe for one (config, links, point) run.

    Generated once per sweep point and shared across detectors so that
    comparisons ride on identical noise realizations.
    """

    bits_a: np.ndarray
    bits_b: np.ndarray
    relay_bits: np.ndarray
    y_ab: np.ndarray
    y_ba: np.ndarray
    y_ra: np.ndarray
    y_rb: np.ndarray
    taps: dict
    gamma_a: float
    gamma_b: float


def simulate_signals(cfg: SystemConfig, links: dict, point: int = 0) -> SignalSet:
    """Run the physical layer for one point: sources, relay, all receptions."""
    geom = cfg.geometry
    taps = {name: sample_taps(links[name]) for name in LINK_NAMES}
    n = cfg.num_symbols

    bits_a = generate_bits(n, substream(cfg.seed, point, _STREAM_BITS_A))
    bits_b = generate_bits(n, substream(cfg.seed, point, _STREAM_BITS_B))

    def rx(bits, name):
        rng = substream(cfg.seed, point, _STREAM_NOISE[name])
        return simulate_link(bits, taps[name], geom, rng, cfg.noiseless)

    y_ar = rx(bits_a, "ar")
    y_br = rx(bits_b, "br")

    gamma_a = cfg.relay_gamma_a if cfg.relay_gamma_a is not None else taps["ar"].first / 2.0
    gamma_b = cfg.relay_gamma_b if cfg.relay_gamma_b is not None else taps["br"].first / 2.0

    dec_a = np.fromiter((relay_detect(y, gamma_a) for y in y_ar), dtype=np.int64, count=n)
    dec_b = np.fromiter((relay_detect(y, gamma_b) for y in y_br), dtype=np.int64, count=n)
    relay_bits = np.zeros(n, dtype=np.int64)
    for k in range(1, n):
        relay_bits[k] = relay_encode(int(dec_a[k - 1]), int(dec_b[k - 1]))

    return SignalSet(
        bits_a=bits_a,
        bits_b=bits_b,
        relay_bits=relay_bits,
        y_ab=rx(bits_a, "ab"),
        y_ba=rx(bits_b, "ba"),
        y_ra=rx(relay_bits, "ra"),
        y_rb=rx(relay_bits, "rb"),
        taps=taps,
        gamma_a=gamma_a,
        gamma_b=gamma_b,
    )


def _detect_fixed(y_relay, own_bits, taps_r):
    gamma = taps_r.first / 2.0
    n = len(own_bits)
    out = np.empty(n - 1, dtype=np.int64)
    for k in range(n - 1):
        out[k] = detect_fixed_threshold(y_relay[k + 1], int(own_bits[k]), gamma)
    return out


def _detect_dfe(y_relay, own_bits, taps_r):
    gamma = taps_r.first / 2.0
    tr = taps_r.values.tolist()
    n = len(own_bits)
    state = DetectorState.all_zero(len(tr) - 1)
    out = np.empty(n - 1, dtype=np.int64)
    for k in range(n - 1):
        x0 = int(own_bits[k])
        bit = detect_dfe_threshold(y_relay[k + 1], x0, state, tr, gamma)
        out[k] = bit
        state.push(bit, x0)
    return out


def _detect_proposed(
    y_direct,
    y_relay,
    own_bits,
    taps_d,
    taps_r,
    taps_rd,
    taps_r0,
    gamma_rd,
    gamma_r0,
    geom,
    variance_isi_start,
):
    td = taps_d.values.tolist()
    tr = taps_r.values.tolist()
    trd = taps_rd.values.tolist()
    tr0 = taps_r0.values.tolist()
    n = len(own_bits)
    state = DetectorState.all_zero(len(td) - 1)
    out = np.empty(n - 1, dtype=np.int64)
    for k in range(n - 1):
        x0 = int(own_bits[k])
        y_d_eq = dfe_equalize(float(y_direct[k]), td, state.x_d_hat)
        y_r_eq = dfe_equalize(float(y_relay[k + 1]), tr, state.x_r_hat)
        model = build_relay_error_model(trd, tr0, gamma_rd, gamma_r0, state, geom)
        params = make_ml_params(td, tr, state, geom, model, variance_isi_start)
        bit = ml_decide_general(y_d_eq, y_r_eq, x0, model, params, td, tr)
        out[k] = bit
        state.push(bit, x0)
    return out


def detect_at(signals: SignalSet, side: str, detector: str, cfg: SystemConfig) -> np.ndarray:
    """Decode the partner's bits at destination ``side`` for info slots 0..n-2."""
    if side == "b":  # node B decodes A's data
        y_direct, y_relay, own = signals.y_ab, signals.y_rb, signals.bits_b
        taps_d, taps_r = signals.taps["ab"], signals.taps["rb"]
        taps_rd, taps_r0 = signals.taps["ar"], signals.taps["br"]
        gamma_rd, gamma_r0 = signals.gamma_a, signals.gamma_b
    elif side == "a":
        y_direct, y_relay, own = signals.y_ba, signals.y_ra, signals.bits_a
        taps_d, taps_r = signals.taps["ba"], signals.taps["ra"]
        taps_rd, taps_r0 = signals.taps["br"], signals.taps["ar"]
        gamma_rd, gamma_r0 = signals.gamma_b, signals.gamma_a
    else:
        raise ValueError("side must be 'a' or 'b'")

    if detector == "fixed":
        return _detect_fixed(y_relay, own, taps_r)
    if detector == "dfe_threshold":
        return _detect_dfe(y_relay, own, taps_r)
    if detector == "proposed_ml":
        return _detect_proposed(
            y_direct, y_relay, own,
            taps_d, taps_r, taps_rd, taps_r0,
            gamma_rd, gamma_r0,
            cfg.geometry, cfg.variance_isi_start,
        )
    raise ValueError(f"unknown detector {detector!r}")


def run_links(
    cfg: SystemConfig,
    links: dict,
    detectors,
    x_value: float,
    point: int = 0,
) -> list:
    """Simulate one point and evaluate every requested detector on shared signals."""
    for det in detectors:
        if det not in DETECTORS:
            raise ValueError(f"unknown detector {det!r}")
    signals = simulate_signals(cfg, links, point)
    truth = {"a": signals.bits_b[:-1], "b": signals.bits_a[:-1]}
    results = []
    for det in detectors:
        for side in ("a", "b"):
            decisions = detect_at(signals, side, det, cfg)
            ber, lo, hi, counted, errors = estimate_ber(decisions, truth[side], cfg.warmup)
            results.append(
                BerResult(
                    detector=det,
                    node=side,
                    x_value=float(x_value),
                    ber=ber,
                    ci_low=lo,
                    ci_high=hi,
                    symbols=counted,
                    errors=errors,
                    seed=cfg.seed,
                )
            )
    return results


def run_trial(cfg: SystemConfig) -> tuple:
    """Full pipeline for the configured detector; one BerResult per destination."""
    results = run_links(cfg, resolve_links(cfg), [cfg.detector], x_value=cfg.symbol_duration)
    return results[0], results[1]
