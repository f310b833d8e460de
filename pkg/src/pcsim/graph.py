"""Consensus networks and their spectral structure.

Builds the row-stochastic update matrix L of a directed agent network
from per-edge gains, checks strong connectivity, and extracts the
quantities the rest of the library runs on: the left unit eigenvector
w_l (normalized to w_l^T 1 = 1), the projector J = 1 w_l^T, and the
magnitude of the second-largest eigenvalue |lambda_2|, which is the
contraction rate of the disagreement dynamics.

Agent ids are 1-based in the public API (matching the network file
format); internal arrays are 0-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    NegativeWeight,
    NoConvergence,
    NotStronglyConnected,
    RowSumExceeded,
)

__all__ = [
    "ConsensusNetwork",
    "SpectralData",
    "build_network",
    "ring_lattice",
    "is_strongly_connected",
    "spectral_analysis",
    "consensus_value",
    "verify_projector_identities",
]


@dataclass(frozen=True)
class ConsensusNetwork:
    """A strongly connected directed network with its update matrix L.

    ``weights[(i, j)]`` is the gain agent i applies to the value received
    from its incoming neighbor j, i.e. the matrix entry L[i, j]; the
    directed edge carrying that weight is (j -> i).  ``edge_src``,
    ``edge_dst`` and ``edge_gain`` hold the same information as flat
    0-based arrays sorted by (receiver, sender) — the fixed accumulation
    order used by every protocol step.
    """

    n: int
    edges: tuple[tuple[int, int], ...]  # (sender, receiver), 1-based
    weights: dict[tuple[int, int], float]  # (receiver, sender) -> gain
    matrix: np.ndarray = field(repr=False)
    edge_src: np.ndarray = field(repr=False)  # 0-based senders
    edge_dst: np.ndarray = field(repr=False)  # 0-based receivers
    edge_gain: np.ndarray = field(repr=False)

    @property
    def link_count(self) -> int:
        """Total number of directed communication links."""
        return len(self.edges)


@dataclass(frozen=True)
class SpectralData:
    """Spectral quantities of a consensus matrix.

    lambda2_mag is the spectral radius of L - J; w_left is the left
    eigenvector of L at eigenvalue 1 with w_left @ 1 = 1; projector_j
    is the rank-one limit matrix J = 1 w_left^T.  ``residuals`` records
    the diagnostics checked at construction time.
    """

    lambda2_mag: float
    w_left: np.ndarray = field(repr=False)
    projector_j: np.ndarray = field(repr=False)
    residuals: dict[str, float] = field(repr=False)


def _check_edges(n, edges):
    seen = set()
    for s, t in edges:
        if not (1 <= s <= n and 1 <= t <= n):
            raise DimensionMismatch(f"edge ({s},{t}) references agents outside 1..{n}")
        if s == t:
            raise ValueError(f"self-edge ({s},{t}) not allowed; the self gain is implicit")
        if (s, t) in seen:
            raise ValueError(f"duplicate edge ({s},{t})")
        seen.add((s, t))


def _reachable(n, adjacency, start):
    """Set of nodes reachable from `start` along adjacency lists."""
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for v in adjacency[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen


def _strongly_connected(n, edges_zero_based):
    fwd = [[] for _ in range(n)]
    bwd = [[] for _ in range(n)]
    for s, t in edges_zero_based:
        fwd[s].append(t)
        bwd[t].append(s)
    return len(_reachable(n, fwd, 0)) == n and len(_reachable(n, bwd, 0)) == n


def is_strongly_connected(network: ConsensusNetwork) -> bool:
    """True iff every agent can reach every other along directed edges."""
    edges0 = [(s - 1, t - 1) for s, t in network.edges]
    return _strongly_connected(network.n, edges0)


def build_network(n, edges, weights) -> ConsensusNetwork:
    """Assemble a ConsensusNetwork from 1-based edges and gains.

    edges: iterable of (sender, receiver) pairs.
    weights: mapping (receiver, sender) -> kappa, one entry per edge.

    Raises NegativeWeight, RowSumExceeded, or NotStronglyConnected when
    the gains or the topology are invalid.
    """
    if n < 2:
        raise ValueError(f"need at least 2 agents, got {n}")
    edges = [(int(s), int(t)) for s, t in edges]
    _check_edges(n, edges)

    L = np.zeros((n, n))
    for s, t in edges:
        key = (t, s)
        if key not in weights:
            raise ValueError(f"edge ({s},{t}) has no weight entry ({t},{s})")
        kappa = float(weights[key])
        if kappa < 0:
            raise NegativeWeight(f"kappa[{t},{s}] = {kappa} < 0")
        L[t - 1, s - 1] = kappa

    row_sums = L.sum(axis=1)
    worst = int(np.argmax(row_sums))
    if row_sums[worst] > 1.0 + 1e-12:
        raise RowSumExceeded(
            f"agent {worst + 1} has incoming gains summing to {row_sums[worst]:.6g} > 1"
        )
    np.fill_diagonal(L, 1.0 - row_sums)

    edges0 = [(s - 1, t - 1) for s, t in edges]
    if not _strongly_connected(n, edges0):
        raise NotStronglyConnected(f"digraph on {n} agents is not strongly connected")

    # Flat edge arrays in (receiver, sender) order: the deterministic
    # accumulation order shared by all protocol kernels.
    order = sorted(range(len(edges0)), key=lambda e: (edges0[e][1], edges0[e][0]))
    src = np.array([edges0[e][0] for e in order], dtype=np.intp)
    dst = np.array([edges0[e][1] for e in order], dtype=np.intp)
    gain = np.array([L[d, s] for s, d in zip(src, dst)], dtype=float)

    return ConsensusNetwork(
        n=n,
        edges=tuple(edges),
        weights={(t, s): L[t - 1, s - 1] for s, t in edges},
        matrix=L,
        edge_src=src,
        edge_dst=dst,
        edge_gain=gain,
    )


def ring_lattice(n, step, weight_mode="uniform", seed=None) -> ConsensusNetwork:
    """Directed ring where agent i listens to agent i - step (mod n).

    weight_mode is "uniform" (every gain 0.5), "random" (seeded: each
    agent's incoming gains are drawn positive and scaled to a row sum
    uniform in (0.2, 1)), or an explicit sequence of n gains, one per
    agent in agent order.  Requires gcd(step, n) = 1, otherwise the ring
    splits into disjoint cycles.
    """
    if n < 3:
        raise ValueError(f"ring needs at least 3 agents, got {n}")
    if math.gcd(step, n) != 1:
        raise NotStronglyConnected(
            f"gcd(step={step}, n={n}) != 1: ring splits into disjoint cycles"
        )

    # receiver i (1-based) listens to sender i - step
    senders = [((i - 1 - step) % n) + 1 for i in range(1, n + 1)]
    edges = [(senders[i - 1], i) for i in range(1, n + 1)]

    if isinstance(weight_mode, str):
        if weight_mode == "uniform":
            gains = [0.5] * n
        elif weight_mode == "random":
            # One incoming edge per agent, so the scaled gain is exactly
            # the per-agent row-sum draw in (0.2, 1).
            rng = np.random.default_rng(seed)
            gains = list(rng.uniform(0.2, 1.0, size=n))
        else:
            raise ValueError(f"unknown weight_mode {weight_mode!r}")
    else:
        gains = [float(g) for g in weight_mode]
        if len(gains) != n:
            raise DimensionMismatch(f"need {n} gains, got {len(gains)}")

    weights = {(i, senders[i - 1]): gains[i - 1] for i in range(1, n + 1)}
    return build_network(n, edges, weights)


def spectral_analysis(network, tol=1e-10, max_iters=100_000) -> SpectralData:
    """Left eigenvector, projector, and |lambda_2| of the network's L.

    w_left comes from power iteration on L^T (the unit eigenvalue is
    simple and dominant for a strongly connected network, so iteration
    converges at rate |lambda_2|).  |lambda_2| itself is the spectral
    radius of the deflated matrix L - J from a dense eigensolver: the
    dominant eigenvalues of L - J form a complex pair for directed
    rings, which unshifted power iteration cannot resolve.

    Raises NoConvergence if the iteration residual stays above tol or
    the resulting data violates its own consistency checks.
    """
    L = network.matrix
    n = network.n
    v = np.full(n, 1.0 / n)
    residual = math.inf
    iterations = 0
    for iterations in range(1, max_iters + 1):
        v = v @ L
        v /= v.sum()
        residual = float(np.max(np.abs(v @ L - v)))
        if residual <= tol:
            break
    if residual > tol:
        raise NoConvergence(
            f"left-eigenvector iteration residual {residual:.3e} > tol {tol:.1e} "
            f"after {iterations} iterations"
        )

    J = np.outer(np.ones(n), v)
    lambda2 = float(np.max(np.abs(np.linalg.eigvals(L - J))))

    # Independent consistency check: second-largest |eigenvalue| of L
    # itself must match the spectral radius of the deflated matrix.
    mags = np.sort(np.abs(np.linalg.eigvals(L)))
    rho_residual = float(abs(mags[-2] - lambda2))

    residuals = {
        "w_left": residual,
        "normalization": float(abs(v.sum() - 1.0)),
        "j_idempotent": float(np.max(np.abs(J @ J - J))),
        "lj_equals_j": float(np.max(np.abs(L @ J - J))),
        "rho_deflated": rho_residual,
        "iterations": float(iterations),
    }
    if lambda2 >= 1.0 - 1e-12:
        raise NoConvergence(
            f"|lambda_2| = {lambda2:.12f} is not contractive; "
            "the disagreement dynamics do not decay"
        )
    if residuals["j_idempotent"] > 1e-9 or residuals["lj_equals_j"] > 1e-9:
        raise NoConvergence(f"projector residuals too large: {residuals}")
    if rho_residual > 1e-8:
        raise NoConvergence(
            f"deflated spectral radius disagrees with |lambda_2(L)| by {rho_residual:.3e}"
        )
    return SpectralData(lambda2_mag=lambda2, w_left=v, projector_j=J, residuals=residuals)


def consensus_value(spectral: SpectralData, x0) -> float:
    """The conserved value w_left^T x0 that all agents converge to."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != spectral.w_left.shape:
        raise DimensionMismatch(f"x0 has shape {x0.shape}, expected {spectral.w_left.shape}")
    return float(spectral.w_left @ x0)


def verify_projector_identities(network, spectral, horizon=50) -> dict[str, float]:
    """Max residuals of the projector/deflation identities up to `horizon`.

    Checks, for k = 1..horizon: J^2 = J, (L-J)J = J(L-J) = 0, LJ = J,
    (L-J)^k = L^k - J, (L-I)L^k = (L-I)(L-J)^k, the deflated spectral
    radius against |lambda_2|, and the power limit L^k -> J.  Returns a
    dict of named residuals; report-only (raises nothing).
    """
    L = network.matrix
    J = spectral.projector_j
    n = network.n
    eye = np.eye(n)
    D = L - J

    out = {
        "j_idempotent": float(np.max(np.abs(J @ J - J))),
        "l1j_zero": float(np.max(np.abs(D @ J))),
        "jl1_zero": float(np.max(np.abs(J @ D))),
        "lj_equals_j": float(np.max(np.abs(L @ J - J))),
        "rho_deflated": spectral.residuals["rho_deflated"],
    }
    Lk = eye.copy()
    Dk = eye.copy()
    deflation = 0.0
    innovation = 0.0
    for _ in range(horizon):
        Lk = Lk @ L
        Dk = Dk @ D
        deflation = max(deflation, float(np.max(np.abs(Dk - (Lk - J)))))
        innovation = max(innovation, float(np.max(np.abs((L - eye) @ Lk - (L - eye) @ Dk))))
    out["deflation_power"] = deflation
    out["innovation_equivalence"] = innovation
    out["power_limit"] = float(np.max(np.abs(Lk - J)))
    return out
