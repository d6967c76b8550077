"""Diffusion channel primitives: impulse response, FIR taps, reception noise, SNR."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

# Variance floor (squared concentration units) applied inside pdf and
# tail-probability evaluations when an all-zero hypothesis would otherwise
# give sigma = 0. Never used when synthesizing noise.
VARIANCE_FLOOR = 1e-30
SIGMA_FLOOR = math.sqrt(VARIANCE_FLOOR)


@dataclass(frozen=True)
class LinkParams:
    """Physical constants of one diffusion link.

    q: molecules released per on-pulse (dimensionless count)
    diffusion: diffusion coefficient of the emitted molecule type, m^2/s
    distance: transmitter-receiver separation, m
    symbol_duration: slot length, s
    num_taps: FIR memory length
    tap_offset: taps are sampled at t = (j + tap_offset) * symbol_duration,
        offset in (0, 1]; the default end-of-slot sampling avoids the t = 0
        singularity and keeps the decaying-tail FIR picture.
    """

    q: float
    diffusion: float
    distance: float
    symbol_duration: float
    num_taps: int
    tap_offset: float = 1.0

    def __post_init__(self):
        for name in ("q", "diffusion", "distance", "symbol_duration"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.num_taps < 1:
            raise ValueError("num_taps must be >= 1")
        if not 0.0 < self.tap_offset <= 1.0:
            raise ValueError("tap_offset must lie in (0, 1]")

    def with_q(self, q: float) -> "LinkParams":
        return replace(self, q=q)


@dataclass(frozen=True)
class ReceiverGeometry:
    """Spherical absorbing receiver of the given radius (m)."""

    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be > 0")

    @property
    def volume(self) -> float:
        """Receiver volume (4/3) * pi * r^3, the noise-variance normalizer."""
        return 4.0 * math.pi * self.radius**3 / 3.0


@dataclass(frozen=True)
class ChannelTaps:
    """L-tap FIR discretization of one link's impulse response."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 1 or len(vals) < 1:
            raise ValueError("taps must be a nonempty 1-d sequence")
        if np.any(vals < 0):
            raise ValueError("taps must be nonnegative")
        if not vals[0] > 0:
            raise ValueError("first tap must be > 0")

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, idx):
        return self.values[idx]

    @property
    def first(self) -> float:
        return float(self.values[0])


def fick_response(p: LinkParams, t: float) -> float:
    """Average concentration at the receiver t seconds after an impulsive release.

    Returns 0 at t = 0 (the limiting value). The response is unimodal with
    its maximum at t = distance^2 / (6 * diffusion).
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0.0:
        return 0.0
    spread = (4.0 * math.pi * p.diffusion * t) ** 1.5
    return p.q / spread * math.exp(-p.distance**2 / (4.0 * p.diffusion * t))


def peak_time(p: LinkParams) -> float:
    """Time at which fick_response attains its maximum."""
    return p.distance**2 / (6.0 * p.diffusion)


def sample_taps(p: LinkParams) -> ChannelTaps:
    """FIR taps h[j] = response at t = (j + tap_offset) * symbol_duration."""
    h = np.array(
        [fick_response(p, (j + p.tap_offset) * p.symbol_duration) for j in range(p.num_taps)]
    )
    if not h[0] > 0.0:
        raise ValueError(
            "first tap underflows to zero at working precision; link unusable"
        )
    return ChannelTaps(h)


def noise_sample(signal_mean: float, geom: ReceiverGeometry, rng: np.random.Generator) -> float:
    """One reception-noise draw: N(0, signal_mean / volume), exactly 0 at zero signal."""
    if signal_mean < 0:
        raise ValueError("signal_mean must be >= 0")
    if signal_mean == 0.0:
        return 0.0
    return rng.normal(0.0, math.sqrt(signal_mean / geom.volume))


def link_snr(taps: ChannelTaps, geom: ReceiverGeometry) -> float:
    """Per-link SNR: mean squared tap over the half-sum noise normalization.

    Equals (1/L) sum h^2 divided by (0.5 / volume) sum h; linear in the
    molecule count q because every tap is.
    """
    vals = np.asarray(taps.values, dtype=float)
    total = float(vals.sum())
    if not total > 0:
        raise ValueError("all-zero taps have no SNR")
    mean_sq = float(np.mean(vals * vals))
    return mean_sq * geom.volume / (0.5 * total)


def q_for_target_snr(p: LinkParams, geom: ReceiverGeometry, target_snr: float) -> float:
    """Molecule count that puts the link at target_snr (exact: SNR is linear in q)."""
    if not target_snr > 0:
        raise ValueError("target_snr must be > 0")
    current = link_snr(sample_taps(p), geom)
    return p.q * target_snr / current
