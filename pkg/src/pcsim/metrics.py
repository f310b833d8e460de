"""Consensus quality metrics: deviation bounds and convergence checks.

Quantization shifts the value agents finally agree on away from the
ideal w_l^T x(0).  The shift obeys an explicit bound built from the
quantizer window schedule: (beta(0) + bbar * eta / (1 - eta)) *
sqrt(N) / 2^(b+1), with bbar the Euclidean norm of (beta(1), beta(0))
and eta any valid decay rate of beta(k).  This module evaluates that
bound, detects when a trace has actually reached consensus, and
compares observed against bounded deviation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EtaOutOfRange, NotConverged
from .quantizer import QuantizerSchedule, effective_eta

__all__ = [
    "DeviationReport",
    "deviation_bound",
    "convergence_step",
    "verify_deviation",
]


@dataclass(frozen=True)
class DeviationReport:
    """Observed vs bounded distance between achieved and ideal consensus.

    deviation is sqrt(N) * |x_inf_observed - x_inf_ideal| (the vector
    norm of the constant offset); bound/slack/eta are None for
    unquantized traces, where no bound applies.
    """

    x_inf_ideal: float
    x_inf_observed: float
    deviation: float
    bound: float | None
    eta: float | None
    bits: int | None
    converged_at: int
    slack: float | None


def deviation_bound(schedule: QuantizerSchedule, eta=None) -> float:
    """Worst-case ||achieved - ideal consensus|| for a window schedule.

    eta defaults to the schedule's exact decay rate effective_eta(...);
    any eta in (|lambda_2|, 1) no smaller than the decay rate is valid,
    and the bound grows monotonically with eta.
    """
    if eta is None:
        eta = effective_eta(schedule.n, schedule.lambda2_mag, schedule.bits)
    if not schedule.lambda2_mag < eta < 1.0:
        raise EtaOutOfRange(
            f"eta = {eta} not in (|lambda_2| = {schedule.lambda2_mag}, 1)"
        )
    beta0 = schedule.x_max - schedule.x_min
    beta1 = 3.0 * max(abs(schedule.x_min), abs(schedule.x_max))
    bbar = math.hypot(beta1, beta0)
    return (beta0 + bbar * eta / (1.0 - eta)) * math.sqrt(schedule.n) / 2 ** (schedule.bits + 1)


def convergence_step(trace, tol=1e-6, hold=50):
    """First step where the envelope width stays below tolerance.

    The tolerance is tol * max(1, ||x(0)||_inf).  Returns the first k
    such that max_i x_i - min_i x_i < tolerance for `hold` consecutive
    steps starting at k, or None if the trace never settles.
    """
    width = trace.x.max(axis=1) - trace.x.min(axis=1)
    threshold = tol * max(1.0, float(np.max(np.abs(trace.x[0]))))
    below = width < threshold
    run = 0
    for k, ok in enumerate(below):
        run = run + 1 if ok else 0
        if run >= hold:
            return k - hold + 1
    return None


def verify_deviation(trace, spectral, x0, eta=None, tol=1e-6, hold=50) -> DeviationReport:
    """Measure a converged trace's consensus deviation against the bound.

    Raises NotConverged when the trace's envelope never settles.  The
    achieved consensus value is the mean of the final states; for
    quantized traces the report includes the schedule bound (with eta
    defaulting to the exact window decay rate) and its slack.
    """
    k0 = convergence_step(trace, tol=tol, hold=hold)
    if k0 is None:
        width = float(trace.x[-1].max() - trace.x[-1].min())
        raise NotConverged(
            f"envelope width {width:.3e} never stayed below tolerance for {hold} steps"
        )
    x0 = np.asarray(x0, dtype=float)
    ideal = float(spectral.w_left @ x0)
    observed = float(trace.x[-1].mean())
    deviation = math.sqrt(trace.n) * abs(observed - ideal)

    bound = eta_used = slack = None
    if trace.protocol == "bicc":
        schedule = QuantizerSchedule(
            n=trace.n,
            lambda2_mag=spectral.lambda2_mag,
            bits=trace.bits,
            x_min=trace.x_range[0],
            x_max=trace.x_range[1],
        )
        eta_used = eta if eta is not None else effective_eta(
            trace.n, spectral.lambda2_mag, trace.bits
        )
        bound = deviation_bound(schedule, eta_used)
        slack = bound - deviation
    return DeviationReport(
        x_inf_ideal=ideal,
        x_inf_observed=observed,
        deviation=deviation,
        bound=bound,
        eta=eta_used,
        bits=trace.bits,
        converged_at=k0,
        slack=slack,
    )
