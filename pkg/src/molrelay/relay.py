"""Relay node behavior: per-type threshold detection and XOR re-encoding."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class RelayConfig:
    """Fixed detection thresholds for the relay's two incoming links."""

    gamma_a: float
    gamma_b: float

    def __post_init__(self):
        if self.gamma_a < 0 or self.gamma_b < 0:
            raise ValueError("relay thresholds must be >= 0")


def relay_detect(y: float, gamma: float) -> int:
    """Symbol-by-symbol decision: 1 iff the observation strictly exceeds gamma.

    ISI is deliberately treated as part of the noise here; the relay does not
    equalize.
    """
    return 1 if y > gamma else 0


def relay_encode(x_a_hat: int, x_b_hat: int) -> int:
    """Network-coded relay symbol: mod-2 sum of the two decisions."""
    if x_a_hat not in (0, 1) or x_b_hat not in (0, 1):
        raise ValueError("relay_encode takes bits")
    return x_a_hat ^ x_b_hat
