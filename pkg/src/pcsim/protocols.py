"""Discrete-time consensus protocol runners.

Three protocols over one shared innovation kernel:

* classical — agents broadcast raw states; x(k+1) = L x(k), stepped as
  x += xi with xi_i = sum_j kappa_ij (x_j - x_i).
* icc — agents broadcast innovations xi_i(k) and integrate neighbors'
  states locally from the received increments; trajectories coincide
  with classical bit-for-bit because both protocols accumulate the
  same per-edge terms in the same fixed order.
* bicc — icc with every transmitted innovation passed through the
  dynamic quantizer; the state advances on the decoded xi^q.

All runners return a SimulationTrace holding the full state and
innovation history (plus quantizer codes, windows, and saturation
flags for bicc).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InitialStateOutOfRange
from .quantizer import QuantizerSchedule, decode, encode

__all__ = [
    "SimulationTrace",
    "run_classical",
    "run_icc",
    "run_bicc",
    "consensus_envelope",
]


@dataclass(frozen=True)
class SimulationTrace:
    """Step-by-step record of one protocol run.

    x has K+1 rows (states at k = 0..K); xi and xi_ideal have K rows
    (innovations applied at k = 0..K-1), where xi_ideal is the
    unquantized reference sum_j kappa_ij (x_j - x_i) recomputed from
    the actual states.  For bicc, xi_q holds the decoded innovations
    that actually drive the state, and codes/alpha/saturated are
    indexed by quantization step: row 0 is the initial-state
    quantization, row k >= 1 the quantization of xi(k-1).
    estimate_residual is the run's max |xhat_j^i(k) - x_j(k)| over all
    local estimates (0.0 when the integrator reproduces neighbor
    states exactly).
    """

    protocol: str
    x: np.ndarray = field(repr=False)
    xi: np.ndarray = field(repr=False)
    xi_ideal: np.ndarray = field(repr=False)
    estimate_residual: float = 0.0
    xi_q: np.ndarray | None = field(default=None, repr=False)
    codes: np.ndarray | None = field(default=None, repr=False)
    alpha: np.ndarray | None = field(default=None, repr=False)
    beta: np.ndarray | None = field(default=None, repr=False)
    saturated: np.ndarray | None = field(default=None, repr=False)
    bits: int | None = None
    x_range: tuple[float, float] | None = None

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def horizon(self) -> int:
        return self.x.shape[0] - 1


def _check_x0(network, x0):
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (network.n,):
        raise DimensionMismatch(f"x0 has shape {x0.shape}, expected ({network.n},)")
    return x0


def _innovations(network, x, values):
    """Per-agent innovation sum_j kappa_ij (v_j - x_i).

    `values` is the per-edge view of what each receiver combines (the
    sender's true state, or the receiver's local estimate of it).
    Accumulation runs over the edge arrays in (receiver, sender) order,
    so every protocol adds the identical terms in the identical order.
    """
    terms = network.edge_gain * (values - x[network.edge_dst])
    return np.bincount(network.edge_dst, weights=terms, minlength=network.n)


def run_classical(network, x0, horizon) -> SimulationTrace:
    """State-broadcast consensus x(k+1) = L x(k) for k < horizon."""
    x0 = _check_x0(network, x0)
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    n, K = network.n, int(horizon)
    xs = np.empty((K + 1, n))
    xis = np.empty((K, n))
    xs[0] = x0
    x = x0.copy()
    for k in range(K):
        xi = _innovations(network, x, x[network.edge_src])
        xis[k] = xi
        x = x + xi
        xs[k + 1] = x
    return SimulationTrace(protocol="classical", x=xs, xi=xis, xi_ideal=xis.copy())


def run_icc(network, x0, horizon) -> SimulationTrace:
    """Innovation-broadcast consensus.

    Each agent keeps one integrator per incoming edge, seeded at zero
    and incremented by the sender's broadcast innovation (the first
    broadcast being the sender's initial state), and applies the
    consensus gains to the integrated estimates instead of raw states.
    """
    x0 = _check_x0(network, x0)
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    n, K = network.n, int(horizon)
    src = network.edge_src
    xs = np.empty((K + 1, n))
    xis = np.empty((K, n))
    ideal = np.empty((K, n))
    xs[0] = x0
    x = x0.copy()
    xhat = np.zeros(len(src))  # per-edge estimate of the sender's state
    broadcast = x0.copy()  # xi(-1): the initial states
    worst_estimate = 0.0
    for k in range(K):
        xhat = xhat + broadcast[src]
        worst_estimate = max(worst_estimate, float(np.max(np.abs(xhat - x[src]))))
        xi = _innovations(network, x, xhat)
        xis[k] = xi
        ideal[k] = _innovations(network, x, x[src])
        x = x + xi
        xs[k + 1] = x
        broadcast = xi
    return SimulationTrace(
        protocol="icc", x=xs, xi=xis, xi_ideal=ideal, estimate_residual=worst_estimate
    )


def run_bicc(network, spectral, x0, bits, x_range, horizon) -> SimulationTrace:
    """Innovation-broadcast consensus over a b-bit quantized channel.

    The initial states are quantized into the window [x_min, x_max];
    afterwards each innovation xi(k) is quantized at step k+1 into the
    window alpha_i(k+1) = xi_q_i(k-1) - beta(k+1)/2 of width beta(k+1),
    and the state advances on the decoded value: x(k+1) = x(k) + xi_q(k).
    Saturation flags record any input outside its closed window.
    """
    x0 = _check_x0(network, x0)
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    x_min, x_max = float(x_range[0]), float(x_range[1])
    if np.any(x0 <= x_min) or np.any(x0 >= x_max):
        raise InitialStateOutOfRange(
            f"initial states must lie strictly inside ({x_min}, {x_max}); "
            f"got range [{x0.min()}, {x0.max()}]"
        )
    n, K = network.n, int(horizon)
    src = network.edge_src

    sched = QuantizerSchedule(
        n=n, lambda2_mag=spectral.lambda2_mag, bits=bits, x_min=x_min, x_max=x_max
    )
    xs = np.empty((K + 1, n))
    xis = np.empty((K, n))
    xiqs = np.empty((K, n))
    ideal = np.empty((K, n))
    codes = np.zeros((K + 1, n), dtype=np.int64)
    alphas = np.empty((K + 1, n))
    betas = np.empty(K + 1)
    sat = np.zeros((K + 1, n), dtype=bool)

    # step-0 quantization: the initial states themselves
    codes[0] = encode(x0, x_min, sched.beta, bits)
    alphas[0] = sched.alpha
    betas[0] = sched.beta
    sat[0] = (x0 < x_min) | (x0 > x_min + sched.beta)
    x = decode(codes[0], x_min, sched.beta, bits)
    xs[0] = x

    xhat = np.zeros(len(src))  # per-edge estimate of the sender's state
    xi_q_prev = x.copy()  # xi_q(-1): the quantized initial states
    worst_estimate = 0.0
    for k in range(K):
        xhat = xhat + xi_q_prev[src]
        worst_estimate = max(worst_estimate, float(np.max(np.abs(xhat - x[src]))))
        xi = _innovations(network, x, xhat)
        ideal[k] = _innovations(network, x, x[src])
        xis[k] = xi

        beta_next = sched.beta_step()  # beta(k+1)
        alpha = sched.alpha_update(xi_q_prev)  # alpha(k+1) = xi_q(k-1) - beta/2
        codes[k + 1] = encode(xi, alpha, beta_next, bits)
        xi_q = decode(codes[k + 1], alpha, beta_next, bits)
        alphas[k + 1] = alpha
        betas[k + 1] = beta_next
        sat[k + 1] = (xi < alpha) | (xi > alpha + beta_next)
        xiqs[k] = xi_q

        x = x + xi_q
        xs[k + 1] = x
        xi_q_prev = xi_q
    return SimulationTrace(
        protocol="bicc",
        x=xs,
        xi=xis,
        xi_ideal=ideal,
        estimate_residual=worst_estimate,
        xi_q=xiqs,
        codes=codes,
        alpha=alphas,
        beta=betas,
        saturated=sat,
        bits=int(bits),
        x_range=(x_min, x_max),
    )


def consensus_envelope(trace: SimulationTrace):
    """Per-step (min_i x_i(k), max_i x_i(k)) of a trace."""
    return trace.x.min(axis=1), trace.x.max(axis=1)
