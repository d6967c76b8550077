"""Destination-side detection.

Three detectors are provided for the node that decodes its partner's bits
from the relay observation and (for the combining detector) the direct-path
observation:

* ``detect_fixed_threshold`` -- threshold the raw relay observation, ignore ISI
  and the direct path entirely.
* ``detect_dfe_threshold``   -- decision-feedback equalize the relay observation
  first, still ignoring the direct path.
* ``ml_decide_general`` / ``ml_decide_compact`` -- combine both equalized
  observations under an approximate maximum-likelihood rule that folds in an
  imputed model of the relay's decision errors.

All decision rules break exact ties toward 0, matching the strict-inequality
convention of the threshold detectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.special import erfc as _erfc

from .channel import SIGMA_FLOOR, ReceiverGeometry

_SQRT2 = math.sqrt(2.0)
_LOG_2PI = math.log(2.0 * math.pi)

# Error probabilities are pulled off exact 0/1 before entering any decision
# rule so that weights, beta, and log-probabilities never degenerate. The
# upper clip must be the largest double below 1: anything closer rounds back
# to 1.0 and leaves zero-probability branches in the decision rules.
PE_CLIP = 1e-30
_PE_HI = math.nextafter(1.0, 0.0)


def q_function(x):
    """Standard normal tail probability P(N(0,1) > x). Accepts scalars or arrays."""
    if isinstance(x, np.ndarray):
        return 0.5 * _erfc(x / _SQRT2)
    return 0.5 * math.erfc(x / _SQRT2)


def dfe_equalize(y: float, taps: Sequence[float], history: Sequence[int]) -> float:
    """Subtract reconstructed ISI from one observation.

    ``history`` holds the previous L-1 symbol decisions, most recent first;
    with L = 1 the sum is empty and y is returned unchanged.
    """
    if len(history) != len(taps) - 1:
        raise ValueError("history must hold exactly len(taps) - 1 decisions")
    acc = y
    for j in range(1, len(taps)):
        acc -= taps[j] * history[j - 1]
    return acc


@dataclass
class DetectorState:
    """Sliding decision history used for ISI reconstruction (most recent first).

    ``x_r_hat[i] == x_d_hat[i] ^ x_0[i]`` holds for every entry: the relay
    bit history is reconstructed from the decisions on the partner's bits and
    the node's own (exactly known) transmissions.
    """

    x_d_hat: list
    x_0: list
    x_r_hat: list

    @classmethod
    def all_zero(cls, memory: int) -> "DetectorState":
        """Fresh state equivalent to an all-zeros preamble of length ``memory``."""
        return cls([0] * memory, [0] * memory, [0] * memory)

    def push(self, x_d_hat: int, x_0: int) -> None:
        """Record the newest decided slot, dropping the oldest."""
        if not self.x_d_hat:  # L = 1: no memory to maintain
            return
        self.x_d_hat.insert(0, x_d_hat)
        self.x_d_hat.pop()
        self.x_0.insert(0, x_0)
        self.x_0.pop()
        self.x_r_hat.insert(0, x_d_hat ^ x_0)
        self.x_r_hat.pop()


@dataclass(frozen=True)
class RelayErrorModel:
    """Per-slot error statistics the destination imputes to the relay.

    Each pair is indexed by the hypothesis bit. The ``rd`` quantities describe
    the relay's reception of the partner node's data (ISI approximated by the
    destination's own past decisions); the ``r0`` quantities describe the
    relay's reception of this node's data (ISI known exactly).
    """

    mu_rd: tuple
    sigma_rd: tuple
    mu_r0: tuple
    sigma_r0: tuple
    g_d: tuple
    g_0: tuple
    pe_d: tuple
    pe_0: tuple

    def clipped(self, lo: float = PE_CLIP) -> "RelayErrorModel":
        """Copy with error probabilities pulled off exact 0 and exact 1."""
        clip = lambda p: min(max(p, lo), _PE_HI)
        return replace(
            self,
            pe_d=(clip(self.pe_d[0]), clip(self.pe_d[1])),
            pe_0=(clip(self.pe_0[0]), clip(self.pe_0[1])),
        )


def build_relay_error_model(
    taps_rd: Sequence[float],
    taps_r0: Sequence[float],
    gamma_rd: float,
    gamma_r0: float,
    state: DetectorState,
    geom: ReceiverGeometry,
) -> RelayErrorModel:
    """Gaussian model of the relay's two threshold decisions for the current slot.

    ``taps_rd`` is the partner-to-relay channel, ``taps_r0`` the own-node-to-relay
    channel; ``gamma_*`` are the relay's fixed thresholds on those links. Means
    use the destination's decision history as an ISI surrogate on the partner
    link and the exact own-bit history on the other. sigma^2 = mu / volume;
    the variance floor enters the tail evaluations only.
    """
    rho = geom.volume
    isi_rd = 0.0
    isi_r0 = 0.0
    for j in range(1, len(taps_rd)):
        isi_rd += taps_rd[j] * state.x_d_hat[j - 1]
        isi_r0 += taps_r0[j] * state.x_0[j - 1]

    mu_rd = (isi_rd, taps_rd[0] + isi_rd)
    mu_r0 = (isi_r0, taps_r0[0] + isi_r0)
    sigma_rd = (math.sqrt(mu_rd[0] / rho), math.sqrt(mu_rd[1] / rho))
    sigma_r0 = (math.sqrt(mu_r0[0] / rho), math.sqrt(mu_r0[1] / rho))

    g_d = tuple(
        q_function((gamma_rd - mu_rd[x]) / max(sigma_rd[x], SIGMA_FLOOR)) for x in (0, 1)
    )
    g_0 = tuple(
        q_function((gamma_r0 - mu_r0[x]) / max(sigma_r0[x], SIGMA_FLOOR)) for x in (0, 1)
    )
    return RelayErrorModel(
        mu_rd=mu_rd,
        sigma_rd=sigma_rd,
        mu_r0=mu_r0,
        sigma_r0=sigma_r0,
        g_d=g_d,
        g_0=g_0,
        pe_d=(g_d[0], 1.0 - g_d[1]),
        pe_0=(g_0[0], 1.0 - g_0[1]),
    )


def conditional_pxr(x_r: int, x_d: int, x_0: int, m: RelayErrorModel) -> float:
    """P(relay transmitted x_r | data bits x_d, x_0).

    The relay bit matches x_d ^ x_0 when both of its decisions were correct or
    both were wrong; it mismatches when exactly one was in error.
    """
    ped = m.pe_d[x_d]
    pe0 = m.pe_0[x_0]
    if x_r == x_d ^ x_0:
        return ped * pe0 + (1.0 - ped) * (1.0 - pe0)
    return ped * (1.0 - pe0) + (1.0 - ped) * pe0


@dataclass(frozen=True)
class MlDecisionParams:
    """Weights, threshold, and conditional deviations for the combining rule.

    sigma_d / sigma_r are the hypothesis-conditional noise deviations of the
    equalized direct and relay observations; w1-w3 and beta come from the
    (clipped) relay error probabilities and the sigma(0)/sigma(1) ratios.
    """

    w1: float
    w2: float
    w3: float
    beta: float
    sigma_d: tuple
    sigma_r: tuple


def make_ml_params(
    taps_d: Sequence[float],
    taps_r: Sequence[float],
    state: DetectorState,
    geom: ReceiverGeometry,
    model: RelayErrorModel,
    variance_isi_start: int = 1,
) -> MlDecisionParams:
    """Per-slot decision parameters for the ML combiner.

    ``variance_isi_start`` selects the first ISI index entering the
    conditional variances; 1 sums all reconstructed interference (the default),
    2 preserves the literal truncated variant for comparison.
    """
    if variance_isi_start not in (1, 2):
        raise ValueError("variance_isi_start must be 1 or 2")
    rho = geom.volume
    isi_d = 0.0
    isi_r = 0.0
    for j in range(variance_isi_start, len(taps_d)):
        isi_d += taps_d[j] * state.x_d_hat[j - 1]
        isi_r += taps_r[j] * state.x_r_hat[j - 1]

    sigma_d = (math.sqrt(isi_d / rho), math.sqrt((taps_d[0] + isi_d) / rho))
    sigma_r = (math.sqrt(isi_r / rho), math.sqrt((taps_r[0] + isi_r) / rho))

    m = model.clipped()
    ratio_d = max(sigma_d[0], SIGMA_FLOOR) / max(sigma_d[1], SIGMA_FLOOR)
    ratio_r = max(sigma_r[0], SIGMA_FLOOR) / max(sigma_r[1], SIGMA_FLOOR)
    return MlDecisionParams(
        w1=ratio_d * conditional_pxr(0, 1, 0, m),
        w2=ratio_d * ratio_r * conditional_pxr(1, 1, 0, m),
        w3=ratio_r * conditional_pxr(1, 0, 0, m),
        beta=conditional_pxr(0, 0, 0, m),
        sigma_d=sigma_d,
        sigma_r=sigma_r,
    )


def joint_pdf(
    y_d_eq: float,
    y_r_eq: float,
    x_d: int,
    x_r: int,
    params: MlDecisionParams,
    taps_d: Sequence[float],
    taps_r: Sequence[float],
) -> float:
    """Log joint density of the equalized observations under (x_d, x_r).

    Conditioned on the hypothesis bits the two observations are independent
    Gaussians centered on first-tap multiples; the log domain avoids underflow
    of the exponential forms at high SNR.
    """
    sd = max(params.sigma_d[x_d], SIGMA_FLOOR)
    sr = max(params.sigma_r[x_r], SIGMA_FLOOR)
    zd = (y_d_eq - taps_d[0] * x_d) / sd
    zr = (y_r_eq - taps_r[0] * x_r) / sr
    return -0.5 * (zd * zd + zr * zr) - _LOG_2PI - math.log(sd) - math.log(sr)


def _logaddexp(a: float, b: float) -> float:
    if a < b:
        a, b = b, a
    diff = b - a
    if diff < -745.0:  # exp underflows; the smaller term is negligible
        return a
    return a + math.log1p(math.exp(diff))


def ml_decide_general(
    y_d_eq: float,
    y_r_eq: float,
    x_0: int,
    model: RelayErrorModel,
    params: MlDecisionParams,
    taps_d: Sequence[float],
    taps_r: Sequence[float],
) -> int:
    """Approximate-ML decision on the partner's current bit, any x_0.

    Maximizes, over the hypothesis bit, the relay-bit-marginalized joint
    likelihood of the two equalized observations. Ties decide 0.
    """
    m = model.clipped()
    scores = [0.0, 0.0]
    for x_d in (0, 1):
        t0 = math.log(conditional_pxr(0, x_d, x_0, m)) + joint_pdf(
            y_d_eq, y_r_eq, x_d, 0, params, taps_d, taps_r
        )
        t1 = math.log(conditional_pxr(1, x_d, x_0, m)) + joint_pdf(
            y_d_eq, y_r_eq, x_d, 1, params, taps_d, taps_r
        )
        scores[x_d] = _logaddexp(t0, t1)
    return 1 if scores[1] > scores[0] else 0


def ml_decide_compact(
    y_d_eq: float,
    y_r_eq: float,
    model: RelayErrorModel,
    params: MlDecisionParams,
    taps_d: Sequence[float],
    taps_r: Sequence[float],
) -> int:
    """Weighted-exponential form of the combining rule for the x_0 = 0 branch.

    Decides 1 iff w1*Phi + w2*Phi*Psi exceeds beta + w3*Psi, evaluated in the
    log domain. This grouping is the one obtained by dividing the marginalized
    likelihood comparison through by its (x_d = 0, x_r = 0) term, and is
    cross-checked against ml_decide_general.
    """
    sd0 = max(params.sigma_d[0], SIGMA_FLOOR)
    sd1 = max(params.sigma_d[1], SIGMA_FLOOR)
    sr0 = max(params.sigma_r[0], SIGMA_FLOOR)
    sr1 = max(params.sigma_r[1], SIGMA_FLOOR)
    log_phi = -((y_d_eq - taps_d[0]) ** 2) / (2.0 * sd1 * sd1) + y_d_eq**2 / (2.0 * sd0 * sd0)
    log_psi = -((y_r_eq - taps_r[0]) ** 2) / (2.0 * sr1 * sr1) + y_r_eq**2 / (2.0 * sr0 * sr0)
    lhs = _logaddexp(math.log(params.w1) + log_phi, math.log(params.w2) + log_phi + log_psi)
    rhs = _logaddexp(math.log(params.beta), math.log(params.w3) + log_psi)
    return 1 if lhs > rhs else 0


def detect_fixed_threshold(y_r: float, x_0: int, gamma: float) -> int:
    """Benchmark 1: threshold the raw relay observation, undo the network code."""
    x_r_hat = 1 if y_r > gamma else 0
    return x_r_hat ^ x_0


def detect_dfe_threshold(
    y_r: float,
    x_0: int,
    state: DetectorState,
    taps_r: Sequence[float],
    gamma: float,
) -> int:
    """Benchmark 2: equalize the relay observation with the reconstructed relay-bit
    history, then threshold and undo the network code. The direct path is unused."""
    y_eq = dfe_equalize(y_r, taps_r, state.x_r_hat)
    x_r_hat = 1 if y_eq > gamma else 0
    return x_r_hat ^ x_0
