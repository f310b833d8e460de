"""Experiment orchestration: configs, runners, and file outputs.

Reads JSON experiment configs, builds the network and initial states,
drives the protocol + adversary + metrics pipeline, and writes the
plot-ready artifacts:

* trace.csv      — k, agent, x, xi, xi_q, code, alpha, beta, saturated
* adversary.csv  — k, agent, e_mean_mc, e_mean_cf, trace_sigma_mc,
                   trace_sigma_cf, protection_level
* summary.json   — gamma, trials, min_protection, asymptotic_protection,
                   floor, c
* deviation.json — x_inf_ideal, x_inf_observed, deviation, bound, eta,
                   b, converged (quantized runs)
* spectral.json  — n, lambda2, w_left, b_min, total_rate_min
* sweep.csv      — per-bit-width convergence/protection comparison

All outputs are pure functions of (config contents, CLI flags): rerunning
the same config with the same seed reproduces them byte for byte,
regardless of PCSIM_THREADS.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import adversary as adversary_mod
from . import graph, metrics, protocols, quantizer
from .errors import ConfigError, ConsensusError, NotConverged

__all__ = [
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "network_from_spec",
    "initial_states",
    "cmd_spectral",
    "cmd_run",
    "cmd_sweep_bits",
    "cmd_verify",
]

_PROTOCOLS = ("classical", "icc", "bicc")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment parameters (defaults: the 25-ring study)."""

    network: dict
    x0_spec: dict | list
    protocol: str = "icc"
    bits: int = 12
    gamma: float = 0.5
    horizon: int = 1000
    trials: int = 10_000
    seed: int = 0
    x_range: tuple[float, float] = (4.0, 6.0)
    overhead_bits: int = 0
    out_dir: str | None = None


def _workers() -> int:
    raw = os.environ.get("PCSIM_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"PCSIM_THREADS must be an integer, got {raw!r}") from None


def load_config(path) -> ExperimentConfig:
    """Parse a JSON config file into an ExperimentConfig."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: line {exc.lineno}: {exc.msg}") from exc
    return parse_config(data)


def parse_config(data: dict) -> ExperimentConfig:
    """Validate a config mapping; unknown keys and bad values raise ConfigError."""
    if not isinstance(data, dict):
        raise ConfigError(f"config must be a JSON object, got {type(data).__name__}")
    if "n" in data and "network" not in data:
        # bare network description file: wrap it
        data = {"network": data}
    known = {
        "network", "x0", "protocol", "bits", "gamma", "horizon",
        "trials", "seed", "x_range", "overhead_bits", "out",
    }
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "network" not in data:
        raise ConfigError("config needs a 'network' section")

    protocol = data.get("protocol", "icc")
    if protocol not in _PROTOCOLS:
        raise ConfigError(f"protocol must be one of {_PROTOCOLS}, got {protocol!r}")
    gamma = float(data.get("gamma", 0.5))
    if not 0.0 < gamma < 1.0:
        raise ConfigError(f"gamma must be in (0, 1), got {gamma}")
    horizon = int(data.get("horizon", 1000))
    if horizon < 1:
        raise ConfigError(f"horizon must be >= 1, got {horizon}")
    trials = int(data.get("trials", 10_000))
    if trials < 2:
        raise ConfigError(f"trials must be >= 2, got {trials}")
    bits = int(data.get("bits", 12))
    if bits < 1:
        raise ConfigError(f"bits must be >= 1, got {bits}")
    x_range = tuple(float(v) for v in data.get("x_range", (4.0, 6.0)))
    if len(x_range) != 2 or x_range[1] <= x_range[0]:
        raise ConfigError(f"x_range must be [lo, hi] with lo < hi, got {x_range}")
    seed = int(data.get("seed", 0))
    x0_spec = data.get("x0", {"uniform": list(x_range)})
    overhead = int(data.get("overhead_bits", 0))
    if overhead < 0:
        raise ConfigError(f"overhead_bits must be >= 0, got {overhead}")
    return ExperimentConfig(
        network=data["network"],
        x0_spec=x0_spec,
        protocol=protocol,
        bits=bits,
        gamma=gamma,
        horizon=horizon,
        trials=trials,
        seed=seed,
        x_range=x_range,
        overhead_bits=overhead,
        out_dir=data.get("out"),
    )


def network_from_spec(spec: dict) -> graph.ConsensusNetwork:
    """Build a network from its file description (1-based agent ids)."""
    try:
        n = int(spec["n"])
        gen = spec["generator"]
        kind = gen["type"]
        if kind == "ring":
            return graph.ring_lattice(
                n, int(gen["step"]), gen.get("weights", "uniform"), seed=spec.get("seed")
            )
        if kind == "explicit":
            edges = []
            weights = {}
            for row in gen["edges"]:
                i, j, kappa = int(row[0]), int(row[1]), float(row[2])
                edges.append((i, j))
                weights[(j, i)] = kappa
            return graph.build_network(n, edges, weights)
        raise ConfigError(f"unknown generator type {kind!r}")
    except ConfigError:
        raise
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        raise ConfigError(f"bad network spec: {exc!r}") from exc
    except ConsensusError as exc:
        raise ConfigError(f"invalid network: {type(exc).__name__}: {exc}") from exc


def initial_states(x0_spec, n, default_seed):
    """Initial state vector from an explicit list or a seeded uniform draw."""
    if isinstance(x0_spec, (list, tuple)):
        x0 = np.asarray(x0_spec, dtype=float)
        if x0.shape != (n,):
            raise ConfigError(f"x0 has {x0.size} entries for {n} agents")
        return x0
    if isinstance(x0_spec, dict) and "uniform" in x0_spec:
        lo, hi = (float(v) for v in x0_spec["uniform"])
        if hi <= lo:
            raise ConfigError(f"x0 uniform range [{lo}, {hi}] is empty")
        rng = np.random.default_rng(x0_spec.get("seed", default_seed))
        return rng.uniform(lo, hi, size=n)
    raise ConfigError(f"x0 must be a list or {{'uniform': [lo, hi], 'seed': s}}, got {x0_spec!r}")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return [float(v) for v in value]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else repr(v)
    if isinstance(value, np.integer):
        return int(value)
    return value


def trace_rows(trace):
    """Flatten a trace into trace.csv rows (quantizer columns only for bicc).

    Row (k, agent) holds the state x(k) and the innovation xi(k)
    applied during [k, k+1] (blank at the final k); the quantizer
    columns describe the quantization event at step k, whose input is
    the previous innovation xi(k-1) (step 0 quantizes the initial
    state).
    """
    K = trace.horizon
    quantized = trace.protocol == "bicc"
    for k in range(K + 1):
        for agent in range(trace.n):
            has_xi = k < K
            yield [
                k,
                agent + 1,
                _fmt(trace.x[k, agent]),
                _fmt(trace.xi[k, agent]) if has_xi else "",
                _fmt(trace.xi_q[k, agent]) if quantized and has_xi else "",
                str(int(trace.codes[k, agent])) if quantized else "",
                _fmt(trace.alpha[k, agent]) if quantized else "",
                _fmt(trace.beta[k]) if quantized else "",
                _fmt(trace.saturated[k, agent]) if quantized else "",
            ]


def adversary_rows(trace, mc, moments, report):
    """Flatten per-step adversary statistics into adversary.csv rows."""
    steps = trace.x.shape[0]
    for k in range(steps):
        for agent in range(trace.n):
            yield [
                k,
                agent + 1,
                _fmt(mc.mean[k, agent]),
                _fmt(moments.mean[k, agent]),
                _fmt(mc.sq_norm[k]),
                _fmt(moments.trace_second_moment[k]),
                _fmt(report.protection[k]) if math.isfinite(report.protection[k]) else "inf",
            ]


def _build(config):
    network = network_from_spec(config.network)
    spectral = graph.spectral_analysis(network)
    return network, spectral


def cmd_spectral(config: ExperimentConfig, out_dir=None) -> int:
    """Write/print the network's spectral summary and bit requirements."""
    network, spectral = _build(config)
    b_min = quantizer.min_bits(network.n, spectral.lambda2_mag)
    total = quantizer.required_total_rate(network, spectral, config.overhead_bits)
    payload = {
        "n": network.n,
        "lambda2": _jsonable(spectral.lambda2_mag),
        "w_left": _jsonable(spectral.w_left),
        "b_min": b_min,
        "total_rate_min": int(math.ceil(total)),
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    out = out_dir or config.out_dir
    if out:
        path = Path(out)
        path.mkdir(parents=True, exist_ok=True)
        _write_json(path / "spectral.json", payload)
    return 0


def _run_protocol(config, network, spectral, x0, bits=None, horizon=None):
    bits = config.bits if bits is None else bits
    horizon = config.horizon if horizon is None else horizon
    if config.protocol == "classical":
        return protocols.run_classical(network, x0, horizon)
    if config.protocol == "icc":
        return protocols.run_icc(network, x0, horizon)
    return protocols.run_bicc(network, spectral, x0, bits, config.x_range, horizon)


def cmd_run(config: ExperimentConfig, out_dir=None) -> int:
    """Run one experiment end to end; 0 iff every runtime invariant held."""
    network, spectral = _build(config)
    x0 = initial_states(config.x0_spec, network.n, config.seed)
    trace = _run_protocol(config, network, spectral, x0)

    workers = _workers()
    if config.protocol == "classical":
        mc = adversary_mod.run_adversary_classical_mc(
            trace, config.gamma, config.trials, config.seed, workers
        )
    else:
        mc = adversary_mod.run_adversary_icc_mc(
            trace, config.gamma, config.trials, config.seed, workers
        )
    moments = adversary_mod.closed_form_moments(trace, config.gamma)
    report = adversary_mod.protection_report(trace, moments, mc)

    breaches = []
    if moments.min_eigenvalue < -1e-10:
        breaches.append(f"second-moment matrix lost PSD: min eig {moments.min_eigenvalue:.3e}")
    if config.protocol in ("icc", "bicc"):
        state_power = np.einsum("kn,kn->k", trace.x, trace.x)
        floor_rhs = moments.floor_coefficient * state_power + moments.c_constant
        gap = float(np.min(moments.trace_second_moment_direct - floor_rhs))
        if gap < -1e-9 * max(1.0, float(floor_rhs.max())):
            breaches.append(f"protection floor violated by {-gap:.3e}")

    deviation_payload = None
    if config.protocol == "bicc":
        if bool(trace.saturated.any()):
            breaches.append(f"quantizer saturated at {int(trace.saturated.sum())} events")
        try:
            dev = metrics.verify_deviation(trace, spectral, x0)
            deviation_payload = {
                "x_inf_ideal": _jsonable(dev.x_inf_ideal),
                "x_inf_observed": _jsonable(dev.x_inf_observed),
                "deviation": _jsonable(dev.deviation),
                "bound": _jsonable(dev.bound),
                "eta": _jsonable(dev.eta),
                "b": dev.bits,
                "converged": True,
            }
        except NotConverged:
            ideal = graph.consensus_value(spectral, x0)
            deviation_payload = {
                "x_inf_ideal": _jsonable(ideal),
                "x_inf_observed": None,
                "deviation": None,
                "bound": None,
                "eta": None,
                "b": trace.bits,
                "converged": False,
            }
            breaches.append("quantized run did not reach consensus")

    out = out_dir or config.out_dir
    if out:
        path = Path(out)
        path.mkdir(parents=True, exist_ok=True)
        _write_csv(
            path / "trace.csv",
            ["k", "agent", "x", "xi", "xi_q", "code", "alpha", "beta", "saturated"],
            trace_rows(trace),
        )
        _write_csv(
            path / "adversary.csv",
            ["k", "agent", "e_mean_mc", "e_mean_cf", "trace_sigma_mc",
             "trace_sigma_cf", "protection_level"],
            adversary_rows(trace, mc, moments, report),
        )
        _write_json(
            path / "summary.json",
            {
                "gamma": config.gamma,
                "trials": config.trials,
                "min_protection": _jsonable(report.min_protection),
                "asymptotic_protection": _jsonable(report.asymptotic_protection),
                "floor": _jsonable(report.floor),
                "c": _jsonable(report.c),
            },
        )
        if deviation_payload is not None:
            _write_json(path / "deviation.json", deviation_payload)
    for breach in breaches:
        print(f"invariant breach: {breach}")
    return 1 if breaches else 0


def cmd_sweep_bits(config: ExperimentConfig, bits_list, out_dir=None) -> int:
    """Compare quantized runs across bit widths; failures are recorded, not fatal."""
    if not bits_list:
        raise ConfigError("sweep needs a non-empty bits list")
    network, spectral = _build(config)
    x0 = initial_states(config.x0_spec, network.n, config.seed)

    rows = []
    for bits in bits_list:
        row = {"b": int(bits)}
        try:
            trace = protocols.run_bicc(
                network, spectral, x0, bits, config.x_range, config.horizon
            )
            moments = adversary_mod.closed_form_moments(trace, config.gamma)
            report = adversary_mod.protection_report(trace, moments)
            widths = trace.x.max(axis=1) - trace.x.min(axis=1)
            row.update(
                final_envelope_width=_fmt(widths[-1]),
                saturated=_fmt(bool(trace.saturated.any())),
                min_protection=_fmt(report.min_protection),
                error="",
            )
            try:
                dev = metrics.verify_deviation(trace, spectral, x0)
                row.update(
                    converged=_fmt(True),
                    convergence_step=str(dev.converged_at),
                    deviation=_fmt(dev.deviation),
                    bound=_fmt(dev.bound),
                )
            except NotConverged:
                row.update(converged=_fmt(False), convergence_step="", deviation="", bound="")
        except ConsensusError as exc:
            row.update(
                converged=_fmt(False), convergence_step="", final_envelope_width="",
                deviation="", bound="", min_protection="", saturated="",
                error=f"{type(exc).__name__}: {exc}",
            )
        rows.append(row)

    header = ["b", "converged", "convergence_step", "final_envelope_width",
              "deviation", "bound", "min_protection", "saturated", "error"]
    out = out_dir or config.out_dir
    if out:
        path = Path(out)
        path.mkdir(parents=True, exist_ok=True)
        _write_csv(path / "sweep.csv", header, ([row.get(h, "") for h in header] for row in rows))
    for row in rows:
        print(",".join(str(row.get(h, "")) for h in header))
    return 0


def _verify_checks():
    """The canned invariant suite behind `pcsim verify`."""
    rng = np.random.default_rng(20260823)

    def projector_identities():
        worst = 0.0
        for network in (
            graph.build_network(2, [(1, 2), (2, 1)], {(1, 2): 0.5, (2, 1): 0.5}),
            graph.ring_lattice(9, 2, "uniform"),
            _random_verify_network(rng),
        ):
            spectral = graph.spectral_analysis(network)
            res = graph.verify_projector_identities(network, spectral, horizon=60)
            worst = max(
                worst,
                *(res[k] for k in ("j_idempotent", "l1j_zero", "jl1_zero",
                                   "lj_equals_j", "deflation_power",
                                   "innovation_equivalence", "rho_deflated")),
            )
        return worst <= 1e-8, f"max residual {worst:.2e}"

    def quantizer_round_trip():
        m = 20_000
        alpha = rng.uniform(-50, 50, size=m)
        beta = rng.uniform(1e-6, 100, size=m)
        bits = rng.integers(1, 24, size=m)
        x = alpha + beta * rng.uniform(0, 1, size=m)
        worst = 0.0
        for b in np.unique(bits):
            pick = bits == b
            code = quantizer.encode(x[pick], alpha[pick], beta[pick], int(b))
            xq = quantizer.decode(code, alpha[pick], beta[pick], int(b))
            margin = beta[pick] / 2 ** (int(b) + 1)
            worst = max(worst, float(np.max(np.abs(x[pick] - xq) - margin)))
        return worst <= 0.0, f"worst bound excess {worst:.2e}"

    def beta_dual_route():
        worst = 0.0
        for n, bits, lam in ((4, 6, 0.3), (25, 12, 0.992), (100, 16, 0.9)):
            a = quantizer.beta_sequence(n, lam, bits, (-3.0, 5.0), 100)
            b = quantizer.beta_sequence_summed(n, lam, bits, (-3.0, 5.0), 100)
            worst = max(worst, float(np.max(np.abs(a - b) / np.maximum(np.abs(a), 1e-300))))
        return worst <= 1e-9, f"worst relative gap {worst:.2e}"

    def threshold_consistency():
        for lam in (0.0, 0.5, 0.9, 0.992):
            threshold = quantizer.min_bits_threshold(25, lam)
            for b in range(1, 33):
                decays = quantizer.effective_eta(25, lam, b) < 1.0
                if decays != (b > threshold):
                    return False, f"b={b}, |lambda2|={lam}"
        return True, ""

    def trajectory_equivalence():
        for _ in range(10):
            network = _random_verify_network(rng)
            x0 = rng.uniform(-5, 5, size=network.n)
            a = protocols.run_classical(network, x0, 200)
            b = protocols.run_icc(network, x0, 200)
            if not np.array_equal(a.x, b.x):
                return False, "state trajectories differ"
        return True, ""

    def moments_vs_monte_carlo():
        network = graph.ring_lattice(5, 1, "uniform")
        spectral = graph.spectral_analysis(network)
        x0 = rng.uniform(4, 6, size=5)
        gamma, trials = 0.5, 4000
        worst = -np.inf
        for protocol in ("classical", "icc", "bicc"):
            if protocol == "classical":
                trace = protocols.run_classical(network, x0, 50)
                mc = adversary_mod.run_adversary_classical_mc(trace, gamma, trials, 99)
            elif protocol == "icc":
                trace = protocols.run_icc(network, x0, 50)
                mc = adversary_mod.run_adversary_icc_mc(trace, gamma, trials, 99)
            else:
                trace = protocols.run_bicc(network, spectral, x0, 8, (4.0, 6.0), 50)
                mc = adversary_mod.run_adversary_icc_mc(trace, gamma, trials, 99)
            cf = adversary_mod.closed_form_moments(trace, gamma)
            se = np.maximum(mc.se_sq_norm, 1e-300)
            gap = np.abs(mc.sq_norm - cf.trace_second_moment)
            if protocol == "classical":
                # an agent never intercepted by step k contributes an
                # ||x||^2-sized lump with probability (1-g)^(k+1); once
                # the expected count of such trials drops below ~25 the
                # sample mean AND its SE can both miss that mass, so
                # discount it explicitly rather than trusting the SE.
                survive = (1.0 - gamma) ** (np.arange(trace.x.shape[0]) + 1.0)
                unsampled = trials * trace.n * survive < 25.0
                tail = survive * np.einsum("kn,kn->k", trace.x, trace.x)
                gap = gap - np.where(unsampled, tail, 0.0)
            worst = max(worst, float(np.max(gap / se)))
        return worst <= 4.0, f"worst deviation {worst:.2f} standard errors"

    def protection_floor():
        network = graph.ring_lattice(5, 1, "uniform")
        x0 = rng.uniform(4, 6, size=5)
        trace = protocols.run_icc(network, x0, 200)
        cf = adversary_mod.closed_form_moments(trace, 0.5)
        power = np.einsum("kn,kn->k", trace.x, trace.x)
        ok = bool(
            np.all(cf.trace_second_moment_direct >= cf.floor_coefficient * power + cf.c_constant)
        )
        return ok, "" if ok else "floor violated"

    return [
        ("projector identities", projector_identities),
        ("quantizer round trip", quantizer_round_trip),
        ("beta schedule dual route", beta_dual_route),
        ("bit threshold consistency", threshold_consistency),
        ("trajectory equivalence", trajectory_equivalence),
        ("adversary moments vs monte carlo", moments_vs_monte_carlo),
        ("protection floor", protection_floor),
    ]


def _random_verify_network(rng):
    n = int(rng.integers(5, 15))
    edges = [(i, i % n + 1) for i in range(1, n + 1)]
    extras = {(int(s), int(t)) for s, t in zip(rng.integers(1, n + 1, 2 * n),
                                               rng.integers(1, n + 1, 2 * n))}
    edges.extend((s, t) for s, t in extras if s != t and (s, t) not in set(edges))
    weights = {}
    by_receiver = {}
    for s, t in edges:
        by_receiver.setdefault(t, []).append(s)
    for t, senders in by_receiver.items():
        raw = rng.uniform(0.1, 1.0, size=len(senders))
        raw *= rng.uniform(0.3, 0.95) / raw.sum()
        for s, w in zip(senders, raw):
            weights[(t, s)] = float(w)
    return graph.build_network(n, edges, weights)


def cmd_verify() -> int:
    """Run the built-in invariant suite; print one line per check."""
    failures = 0
    for name, check in _verify_checks():
        ok, detail = check()
        if ok:
            print(f"[pass] {name}")
        else:
            failures += 1
            print(f"[FAIL] {name}: {detail}")
    print(f"{'all checks passed' if not failures else f'{failures} check(s) failed'}")
    return 0 if failures == 0 else 1
