"""Eavesdropping adversaries: interception, estimators, error moments.

An adversary overhears each agent's transmission at step k with
probability gamma, independently across agents, steps, and trials, and
maintains the best estimate available without knowing the network:

* classical traces — hold the last intercepted state (zero before the
  first hit);
* icc/bicc traces — integrate every intercepted innovation, starting
  from the intercepted initial broadcast.

Both the Monte Carlo ensemble statistics and the exact closed-form
moment recursions of the estimation error e(k) = x(k) - xhat(k) are
provided, along with the protection level tr Sigma(k) / ||x(k)||^2
that quantifies how much of the state stays hidden.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ProtocolMismatch

__all__ = [
    "AdversaryEnsemble",
    "EmpiricalMoments",
    "MomentRecursion",
    "ProtectionReport",
    "run_adversary_classical_mc",
    "run_adversary_icc_mc",
    "closed_form_moments",
    "protection_report",
]

_BLOCK = 64  # trials per reduction block; fixed so results never depend on worker count


@dataclass(frozen=True)
class AdversaryEnsemble:
    """Monte Carlo configuration: interception probability, size, seed."""

    gamma: float
    trials: int
    seed: int

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must be in (0, 1), got {self.gamma}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")


@dataclass(frozen=True)
class EmpiricalMoments:
    """Per-step ensemble statistics of the adversary error e(k).

    mean/se_mean are per-agent first moments and their standard errors;
    sq_norm/se_sq_norm are the scalar E[||e(k)||^2] statistics.
    """

    gamma: float
    trials: int
    mean: np.ndarray = field(repr=False)
    se_mean: np.ndarray = field(repr=False)
    sq_norm: np.ndarray = field(repr=False)
    se_sq_norm: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class MomentRecursion:
    """Exact per-step moments of the adversary error for one trace.

    mean is E[e(k)]; trace_second_moment is tr Sigma(k) from the
    matrix recursion; trace_second_moment_direct is the same quantity
    from the telescoped closed form (an independent arithmetic route).
    c_constant is the additive floor constant gamma(1-gamma)||x(0)||^2
    (quantized initial states for bicc; zero for classical, which has
    no protection floor), floor_coefficient the multiplicative floor
    (1-gamma)^2 (zero for classical).  sigma_samples holds full
    Sigma(k) matrices at requested steps; min_eigenvalue is the
    smallest eigenvalue seen across the sampled steps (PSD check).
    """

    protocol: str
    gamma: float
    mean: np.ndarray = field(repr=False)
    trace_second_moment: np.ndarray = field(repr=False)
    trace_second_moment_direct: np.ndarray = field(repr=False)
    c_constant: float
    floor_coefficient: float
    sigma_samples: dict[int, np.ndarray] = field(repr=False)
    min_eigenvalue: float


@dataclass(frozen=True)
class ProtectionReport:
    """Protection levels extracted from moments on one trace.

    protection[k] = tr Sigma(k) / ||x(k)||^2 (+inf where the state is
    exactly zero); epsilon_observed is the largest epsilon such that
    tr Sigma(k) >= epsilon ||x(k)||^2 + c held at every step.
    """

    protocol: str
    gamma: float
    floor: float
    c: float
    protection: np.ndarray = field(repr=False)
    min_protection: float
    asymptotic_protection: float
    epsilon_observed: float
    mc_protection: np.ndarray | None = field(default=None, repr=False)


def _observed_innovations(trace):
    """What the wire carries, rows t = -1..K-1: initial states then innovations."""
    if trace.protocol == "icc":
        return np.vstack([trace.x[0], trace.xi])
    if trace.protocol == "bicc":
        return np.vstack([trace.x[0], trace.xi_q])
    raise ProtocolMismatch(f"innovation adversary needs an icc/bicc trace, got {trace.protocol!r}")


def _accumulate(make_error, streams, shape):
    """Sum per-trial error arrays and their squares over one block."""
    sum_e = np.zeros(shape)
    sumsq_e = np.zeros(shape)
    sum_q = np.zeros(shape[0])
    sumsq_q = np.zeros(shape[0])
    for stream in streams:
        rng = np.random.Generator(np.random.Philox(stream))
        e = make_error(rng)
        sum_e += e
        sumsq_e += e * e
        q = np.einsum("kn,kn->k", e, e)
        sum_q += q
        sumsq_q += q * q
    return sum_e, sumsq_e, sum_q, sumsq_q


def _run_mc(make_error, gamma, trials, seed, shape, workers=1):
    """Shared Monte Carlo driver with a fixed blockwise reduction order."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must be in [0, 1], got {gamma}")
    if trials < 2:
        raise ValueError(f"need at least 2 trials for standard errors, got {trials}")
    streams = np.random.SeedSequence(seed).spawn(trials)
    blocks = [streams[i : i + _BLOCK] for i in range(0, trials, _BLOCK)]
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: _accumulate(make_error, b, shape), blocks))
    else:
        parts = [_accumulate(make_error, b, shape) for b in blocks]

    sum_e = np.zeros(shape)
    sumsq_e = np.zeros(shape)
    sum_q = np.zeros(shape[0])
    sumsq_q = np.zeros(shape[0])
    for pe, pse, pq, psq in parts:  # block-index order: deterministic reduction
        sum_e += pe
        sumsq_e += pse
        sum_q += pq
        sumsq_q += psq

    m = trials
    mean = sum_e / m
    var_e = np.maximum(sumsq_e - m * mean**2, 0.0) / (m - 1)
    mean_q = sum_q / m
    var_q = np.maximum(sumsq_q - m * mean_q**2, 0.0) / (m - 1)
    return EmpiricalMoments(
        gamma=gamma,
        trials=m,
        mean=mean,
        se_mean=np.sqrt(var_e / m),
        sq_norm=mean_q,
        se_sq_norm=np.sqrt(var_q / m),
    )


def run_adversary_classical_mc(trace, gamma, trials, seed, workers=1) -> EmpiricalMoments:
    """Ensemble error statistics of the hold-last-interception estimator.

    Per trial, xhat_i(k) is x_i at the most recent intercepted step
    <= k, or 0 if agent i was never intercepted; e(k) = x(k) - xhat(k).
    """
    if trace.protocol != "classical":
        raise ProtocolMismatch(f"state adversary needs a classical trace, got {trace.protocol!r}")
    x = trace.x
    steps, n = x.shape
    ks = np.arange(steps)[:, None]
    cols = np.arange(n)[None, :]

    def make_error(rng):
        hit = rng.random((steps, n)) < gamma
        last = np.maximum.accumulate(np.where(hit, ks, -1), axis=0)
        xhat = np.where(last >= 0, x[np.clip(last, 0, None), cols], 0.0)
        return x - xhat

    return _run_mc(make_error, gamma, trials, seed, (steps, n), workers)


def run_adversary_icc_mc(trace, gamma, trials, seed, workers=1) -> EmpiricalMoments:
    """Ensemble error statistics of the innovation-integrating estimator.

    Per trial, the adversary adds every intercepted broadcast to a
    running estimate, so e(k) is the sum of the innovations it missed:
    e(k) = sum_{t=-1}^{k-1} (1 - mu(t)) xi_obs(t).
    """
    xi_obs = _observed_innovations(trace)
    steps, n = xi_obs.shape

    def make_error(rng):
        missed = rng.random((steps, n)) >= gamma
        return np.cumsum(xi_obs * missed, axis=0)

    return _run_mc(make_error, gamma, trials, seed, (steps, n), workers)


def _psd_floor(sigma, worst):
    smallest = float(np.linalg.eigvalsh(sigma)[0])
    return min(worst, smallest)


def closed_form_moments(trace, gamma, sigma_at=(), psd_stride=None) -> MomentRecursion:
    """Exact E[e(k)] and tr Sigma(k) for all k, by matrix recursion.

    Innovation protocols accumulate Sigma(k+1) = Sigma(k) + Gamma(k)
    with the rank-one-plus-diagonal increment of the missed broadcast;
    the classical protocol propagates the hold-estimator moments
    through Sigma(k) = (1-g)^2 A + g(1-g) diag(A), A = Sigma(k-1) +
    m d^T + d m^T + d d^T, d = x(k) - x(k-1).  The trace is also
    re-derived along an independent arithmetic route (innovation
    protocols: the telescoped cumulative form; classical: conditioning
    on the last interception time) for cross-checking.  Full
    Sigma(k) snapshots are kept for the steps in `sigma_at`; the PSD
    floor is monitored every `psd_stride` steps (default: ~64 samples).
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must be in [0, 1], got {gamma}")
    g = gamma
    keep = g * (1.0 - g)
    sq = (1.0 - g) ** 2
    x = trace.x
    steps, n = x.shape
    if psd_stride is None:
        psd_stride = max(1, steps // 64)
    sigma_at = set(int(k) for k in sigma_at)

    mean = np.empty((steps, n))
    tr = np.empty(steps)
    samples: dict[int, np.ndarray] = {}
    worst_eig = np.inf
    sigma = np.zeros((n, n))
    m = np.zeros(n)

    if trace.protocol in ("icc", "bicc"):
        xi_obs = _observed_innovations(trace)
        for k in range(steps):
            xi = xi_obs[k]
            outer = np.outer(xi, xi)
            cross = np.outer(m, xi)
            sigma += sq * outer + (1.0 - g) * (cross + cross.T)
            sigma[np.diag_indices_from(sigma)] += keep * xi * xi
            m = m + (1.0 - g) * xi
            mean[k] = m
            tr[k] = np.trace(sigma)
            if k in sigma_at:
                samples[k] = sigma.copy()
            if k % psd_stride == 0 or k == steps - 1:
                worst_eig = _psd_floor(sigma, worst_eig)
        # telescoped form: tr Sigma(k) = (1-g)^2 ||x(k)||^2
        #                  + g(1-g) sum_{t<=k} ||xi_obs(t)||^2
        power = np.cumsum(np.einsum("kn,kn->k", xi_obs, xi_obs))
        direct = sq * np.einsum("kn,kn->k", x, x) + keep * power
        c = keep * float(xi_obs[0] @ xi_obs[0])
        floor = sq
    elif trace.protocol == "classical":
        prev = np.zeros(n)
        for k in range(steps):
            d = x[k] - prev
            prev = x[k]
            cross = np.outer(m, d)
            a = sigma + cross + cross.T + np.outer(d, d)
            sigma = sq * a
            sigma[np.diag_indices_from(sigma)] += keep * np.diag(a)
            m = (1.0 - g) * (m + d)
            mean[k] = m
            tr[k] = np.trace(sigma)
            if k in sigma_at:
                samples[k] = sigma.copy()
            if k % psd_stride == 0 or k == steps - 1:
                worst_eig = _psd_floor(sigma, worst_eig)
        # independent route: condition on the last interception time t
        # (P = g(1-g)^(k-t), never-intercepted mass (1-g)^(k+1) against
        # the zero-initialized estimate)
        direct = np.empty(steps)
        pow_miss = (1.0 - g) ** np.arange(steps + 1)
        for k in range(steps):
            diff = x[k] - x[: k + 1]
            direct[k] = g * (
                pow_miss[k::-1] @ np.einsum("tn,tn->t", diff, diff)
            ) + pow_miss[k + 1] * (x[k] @ x[k])
        c = 0.0
        floor = 0.0
    else:
        raise ProtocolMismatch(f"unknown protocol {trace.protocol!r}")

    return MomentRecursion(
        protocol=trace.protocol,
        gamma=gamma,
        mean=mean,
        trace_second_moment=tr,
        trace_second_moment_direct=direct,
        c_constant=c,
        floor_coefficient=floor,
        sigma_samples=samples,
        min_eigenvalue=float(worst_eig),
    )


def protection_report(trace, moments: MomentRecursion, mc: EmpiricalMoments | None = None):
    """Protection levels of a trace given its (closed-form) moments.

    Where ||x(k)|| = 0 the ratio is reported as +inf (the raw moment
    stays available in `moments`); min/asymptotic levels are taken
    over the finite entries.
    """
    state_power = np.einsum("kn,kn->k", trace.x, trace.x)
    tr = moments.trace_second_moment
    with np.errstate(divide="ignore", invalid="ignore"):
        protection = np.where(state_power > 0.0, tr / state_power, np.inf)
        excess = np.where(state_power > 0.0, (tr - moments.c_constant) / state_power, np.inf)
        mc_protection = None
        if mc is not None:
            mc_protection = np.where(state_power > 0.0, mc.sq_norm / state_power, np.inf)
    finite = protection[np.isfinite(protection)]
    return ProtectionReport(
        protocol=trace.protocol,
        gamma=moments.gamma,
        floor=moments.floor_coefficient,
        c=moments.c_constant,
        protection=protection,
        min_protection=float(finite.min()) if finite.size else np.inf,
        asymptotic_protection=float(protection[-1]),
        epsilon_observed=float(np.min(excess)),
        mc_protection=mc_protection,
    )
