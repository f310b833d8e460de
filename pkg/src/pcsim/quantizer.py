"""Dynamic fixed-length quantization and its bit-rate conditions.

A b-bit dynamic quantizer maps a real signal into one of 2^b uniform
cells of a moving window [alpha, alpha + beta]; out-of-window inputs
clamp to the extreme codes.  The window recenters each step on the last
decoded innovation and shrinks along the network-global schedule
beta(k), whose decay rate eta_eff must be < 1 for quantized consensus
to converge.  This module implements the encoder/decoder pair, the
alpha/beta schedules (by O(1) recursion and by an independent direct
summation used for cross-checking), and the minimum-bit / rate-budget
formulas tied to the network size N and contraction rate |lambda_2|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    CodeOutOfRange,
    EtaOutOfRange,
    Lambda2NotContractive,
    NonPositiveBeta,
)

__all__ = [
    "encode",
    "decode",
    "QuantizerSchedule",
    "RateBudget",
    "beta_sequence",
    "beta_sequence_summed",
    "min_bits",
    "min_bits_threshold",
    "bits_for_rate",
    "effective_eta",
    "required_total_rate",
]


def encode(x, alpha, beta, bits):
    """Quantize x into a code in {0, ..., 2^bits - 1}.

    In-window inputs x in (alpha, alpha + beta) map to floor((x -
    alpha) / delta) with delta = beta / 2^bits; x <= alpha maps to 0
    and x >= alpha + beta to the top code.  Accepts scalars or arrays
    (elementwise, numpy broadcasting); beta must be positive.
    """
    x = np.asarray(x, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if np.any(np.asarray(beta) <= 0):
        raise NonPositiveBeta(f"beta must be > 0, got {beta}")
    if bits < 1:
        raise ValueError(f"bits must be >= 1, got {bits}")
    top = 2**bits - 1
    delta = beta / 2**bits
    # saturated inputs may produce inf - inf or an overflowing ratio;
    # both land in the clip below
    with np.errstate(invalid="ignore", over="ignore"):
        raw = np.floor((x - alpha) / delta)
    # clip guards the top cell against floating-point roundup at x just
    # below alpha + beta
    code = np.clip(raw, 0, top)
    code = np.where(x <= alpha, 0, code)
    code = np.where(x >= alpha + beta, top, code)
    out = code.astype(np.int64)
    return int(out) if out.ndim == 0 else out


def decode(code, alpha, beta, bits):
    """Reconstruct the cell midpoint code * delta + delta/2 + alpha."""
    code = np.asarray(code)
    if np.any(code < 0) or np.any(code > 2**bits - 1):
        raise CodeOutOfRange(f"code outside 0..{2**bits - 1}")
    if np.any(np.asarray(beta) <= 0):
        raise NonPositiveBeta(f"beta must be > 0, got {beta}")
    delta = beta / 2**bits
    out = code * delta + delta / 2 + alpha
    return float(out) if np.ndim(out) == 0 else out


def _recursion_coefficients(n, lambda2_mag, bits):
    root = math.sqrt(n) / 2**bits
    a = 3.0 * root + lambda2_mag
    c = root * (4.0 - 3.0 * lambda2_mag)
    return a, c


@dataclass
class QuantizerSchedule:
    """Rolling window state for one network's dynamic quantizers.

    Holds the global beta recursion state (beta(k), beta(k-1)) plus the
    per-agent window starts alpha_i(k).  One schedule belongs to one
    protocol run; beta_step() advances beta, alpha_update() recenters the
    alpha on its decoded innovation from two steps back.
    """

    n: int
    lambda2_mag: float
    bits: int
    x_min: float
    x_max: float

    def __post_init__(self):
        if self.x_max <= self.x_min:
            raise ValueError(f"empty state range [{self.x_min}, {self.x_max}]")
        self.k = 0
        self.beta = self.x_max - self.x_min
        self.beta_prev = None
        self.alpha = np.full(self.n, self.x_min)

    def beta_step(self):
        """Advance to step k+1, returning the new beta(k+1)."""
        if self.k == 0:
            new = 3.0 * max(abs(self.x_min), abs(self.x_max))
        else:
            a, c = _recursion_coefficients(self.n, self.lambda2_mag, self.bits)
            # a, c > 0, so the true value is positive whenever the last two
            # are; keep it off exact zero when the product underflows
            new = max(a * self.beta + c * self.beta_prev, np.finfo(float).tiny)
        self.beta_prev = self.beta
        self.beta = new
        self.k += 1
        return new

    def alpha_update(self, xi_q_prev2):
        """Set and return alpha_i(k) = xi_q_i(k-2) - beta(k)/2 (k >= 1).

        At k = 1 the two-steps-back decoded innovation is the quantized
        initial state.
        """
        if self.k < 1:
            raise ValueError("alpha_update() applies from step 1; alpha(0) is x_min")
        self.alpha = np.asarray(xi_q_prev2, dtype=float) - self.beta / 2.0
        return self.alpha


@dataclass(frozen=True)
class RateBudget:
    """Network bit budget: total bits/step, per-message overhead, links."""

    total_rate: int
    overhead: int
    link_count: int

    @property
    def bits_per_message(self) -> int:
        b = self.total_rate // self.link_count - self.overhead
        if b < 1:
            raise ValueError(
                f"budget {self.total_rate} over {self.link_count} links with "
                f"{self.overhead} overhead bits leaves {b} payload bits"
            )
        return b


def beta_sequence(n, lambda2_mag, bits, x_range, k_max):
    """beta(0..k_max) by the two-term linear recursion (O(1) per step)."""
    x_min, x_max = x_range
    sched = QuantizerSchedule(n=n, lambda2_mag=lambda2_mag, bits=bits, x_min=x_min, x_max=x_max)
    out = np.empty(k_max + 1)
    out[0] = sched.beta
    for k in range(1, k_max + 1):
        out[k] = sched.beta_step()
    return out


def beta_sequence_summed(n, lambda2_mag, bits, x_range, k_max):
    """beta(0..k_max) by direct summation — the cross-check route.

    Evaluates, for k >= 1,
        beta(k+1) = (3 sqrt(N)/2^b) beta(k)
                    + (4 sqrt(N)/2^b) sum_{l=0}^{k-1} |lambda_2|^(k-1-l) beta(l)
                    + 2 |lambda_2|^k s0,
    with s0 = beta(1)/2 - (3 sqrt(N)/2^(b+1)) beta(0), recomputing the
    full history sum at every step.  Algebraically equal to the
    recursion in beta_sequence but numerically independent of it.
    """
    x_min, x_max = x_range
    lam = lambda2_mag
    root = math.sqrt(n) / 2**bits
    beta = np.empty(k_max + 1)
    beta[0] = x_max - x_min
    if k_max >= 1:
        beta[1] = 3.0 * max(abs(x_min), abs(x_max))
        s0 = beta[1] / 2.0 - (3.0 * root / 2.0) * beta[0]
        for k in range(1, k_max):
            powers = lam ** np.arange(k - 1, -1, -1.0)
            history = float(powers @ beta[:k])
            beta[k + 1] = 3.0 * root * beta[k] + 4.0 * root * history + 2.0 * lam**k * s0
    return beta


def min_bits_threshold(n, lambda2_mag) -> float:
    """The real threshold that the bit width must strictly exceed."""
    if not 0.0 <= lambda2_mag < 1.0:
        raise Lambda2NotContractive(f"|lambda_2| = {lambda2_mag} not in [0, 1)")
    return 0.5 * math.log2(n) + math.log2((7.0 - 3.0 * lambda2_mag) / (1.0 - lambda2_mag))


def min_bits(n, lambda2_mag) -> int:
    """Smallest integer bit width that makes beta(k) -> 0."""
    return math.floor(min_bits_threshold(n, lambda2_mag)) + 1


def bits_for_rate(n, lambda2_mag, eta) -> int:
    """Bit width guaranteeing beta(k) <= ||(beta(1), beta(0))|| eta^k.

    Requires |lambda_2| < eta < 1; returns the ceiling of the real bit
    requirement, so the achieved decay rate effective_eta(...) is <= eta.
    """
    if not 0.0 <= lambda2_mag < 1.0:
        raise Lambda2NotContractive(f"|lambda_2| = {lambda2_mag} not in [0, 1)")
    if not lambda2_mag < eta < 1.0:
        raise EtaOutOfRange(f"eta = {eta} not in (|lambda_2| = {lambda2_mag}, 1)")
    gap = eta - lambda2_mag
    return math.ceil(0.5 * math.log2(n) + math.log2((4.0 + 3.0 * gap) / (eta * gap)))


def effective_eta(n, lambda2_mag, bits) -> float:
    """Exact decay rate of beta(k): the dominant root of the recursion.

    The two-term recursion's companion matrix has largest eigenvalue
    (a + sqrt(a^2 + 4c))/2 with a = 3 sqrt(N)/2^b + |lambda_2| and
    c = (sqrt(N)/2^b)(4 - 3|lambda_2|); beta decays iff this is < 1,
    which holds exactly when bits > min_bits_threshold(n, lambda_2).
    """
    a, c = _recursion_coefficients(n, lambda2_mag, bits)
    return 0.5 * (a + math.sqrt(a * a + 4.0 * c))



def required_total_rate(network, spectral, overhead_bits=0) -> float:
    """Total network bits/step sufficient for quantized consensus.

    link_count * (overhead + the per-message bit threshold); callers
    round up to whole bits.
    """
    threshold = min_bits_threshold(network.n, spectral.lambda2_mag)
    return network.link_count * (overhead_bits + threshold)
