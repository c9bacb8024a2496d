"""Scenario orchestration and file emission.

    ionlink <subcommand> --config <path> [--seed N] [--out DIR]

Subcommands:
  budget    link-budget numbers (efficiencies, rates, SNR) as JSON
  decay     stored-pair decay curves (CSV) and survival summary (JSON)
  simulate  herald event stream, two-pair experiment and protocol rounds
  keyrate   key-rate accounting at the scenario's measured anchors
  sweep     rate / fidelity / error-budget curves over the alpha grid

Artifacts land in one flat directory per run, ``<out>/<scenario>-<seed>/``.
The same config and seed produce byte-identical artifacts.  ``--config``
accepts a file path or the name of a shipped scenario (``default_10km``,
``default_101km``).  ``IONLINK_THREADS`` bounds the sweep worker pool.
Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import diqkd, herald, linkmodel, memory, netsim, qstate
from .config import ConfigError, ScenarioConfig, load_config, packaged_config_path
from .qstate import BellKind

__all__ = ["main", "run_scenario", "emit_plotdata"]

SUBCOMMANDS = ("budget", "decay", "simulate", "keyrate", "sweep")


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(float(value))  # shortest round-trip repr, numpy scalars coerced
    return str(value)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8", newline="\n")


def _write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def emit_plotdata(results, path) -> Path:
    """Tidy plotting CSV: one (series, x, y) row per point."""
    path = Path(path)
    _write_csv(path, ("series", "x", "y"), results)
    return path


def _protocol_params(config: ScenarioConfig, sign: BellKind) -> herald.ProtocolParams:
    return replace(config.protocol, sign=sign)


def _run_budget(config: ScenarioConfig, out: Path) -> None:
    budget = config.link
    alpha = config.protocol.alpha
    rate = linkmodel.expected_rate(budget, alpha)
    payload = {
        "alpha": alpha,
        "arm_efficiency_a": linkmodel.arm_efficiency(budget, "A"),
        "arm_efficiency_b": linkmodel.arm_efficiency(budget, "B"),
        "fibre_transmittance": linkmodel.fibre_transmittance(budget),
        "herald_prob": linkmodel.herald_prob(budget, alpha),
        "false_herald_prob": linkmodel.false_herald_prob(budget),
        "snr_per_gate": linkmodel.snr(budget, alpha),
        "expected_rate_cps": rate,
        "mean_generation_time_s": linkmodel.mean_generation_time(budget, alpha),
        "fibre_length_km": budget.fibre_length_km,
    }
    _write_json(out / "budget.json", payload)


def _run_decay(config: ScenarioConfig, out: Path) -> None:
    model = config.memory
    # the storage experiment runs at the high-rate excitation point
    rate = linkmodel.expected_rate(config.link, config.sim.two_pair_alpha)
    qle = memory.quantum_link_efficiency(model, rate)
    times = [round(0.005 * k, 6) for k in range(0, 241)]  # 0 .. 1.2 s
    rows = []
    for t in times:
        rows.append(("xx", t, memory.xx_at(model, t)))
    for t in times:
        rows.append(("zz", t, memory.zz_at(model, t)))
    for t in times:
        rows.append(("fidelity", t, memory.fidelity_at(model, t)))
    emit_plotdata(rows, out / "decay.csv")
    payload = {
        "fidelity_at_450ms": memory.fidelity_at(model, 0.45),
        "survival_time_s": memory.survival_time(model, 0.5),
        "decoherence_rate_hz": memory.decoherence_rate_hz(model),
        "naive_zz_slope_per_s": memory.naive_zz_slope(model),
        "fitted_zz_slope_per_s": model.zz_slope,
        "quantum_link_efficiency": {
            "value": qle.value,
            "threshold": qle.threshold,
            "above_threshold": qle.above_threshold,
            "rate_cps": rate,
            "alpha": config.sim.two_pair_alpha,
        },
    }
    _write_json(out / "decay.json", payload)


def _run_simulate(config: ScenarioConfig, out: Path) -> None:
    budget, model, sim = config.link, config.memory, config.sim
    alpha = config.protocol.alpha

    rng_events = np.random.default_rng([config.seed, 0])
    events = netsim.run_attempt_loop(budget, alpha, sim.duration_s, rng_events, mode=sim.mode)
    _write_csv(
        out / "events.csv",
        ("time_s", "sign", "spurious"),
        ((e.time, e.herald_sign.value, int(e.spurious)) for e in events),
    )

    rng_pairs = np.random.default_rng([config.seed, 1])
    storage_params = replace(
        config.protocol,
        alpha=sim.two_pair_alpha,
        false_herald_weight=herald.false_herald_weight_from_link(budget, sim.two_pair_alpha),
    )
    stats = netsim.run_two_pair_experiment(
        budget, storage_params, model, sim.n_trials, rng_pairs, dead_time=sim.dead_time_s
    )
    storage_rate = linkmodel.expected_rate(budget, sim.two_pair_alpha)
    quad = netsim.weighted_average_fidelity(
        model, netsim.IntervalDistribution(1.0 / storage_rate), math.inf
    )
    _write_json(out / "two_pair.json", {
        "n_trials": sim.n_trials,
        "alpha": sim.two_pair_alpha,
        "mean_fidelity": stats.mean_fidelity,
        "stderr": stats.stderr,
        "quadrature_mean_fidelity": quad,
        "deviation_sigma": abs(stats.mean_fidelity - quad) / stats.stderr if stats.stderr else 0.0,
        "mean_interval_s": 1.0 / storage_rate,
        "rate_cps": storage_rate,
        "dead_time_s": sim.dead_time_s,
        "window": "infinite",
    })

    states = {
        sign: herald.noisy_heralded_state(_protocol_params(config, sign))
        for sign in (BellKind.PLUS, BellKind.MINUS)
    }

    def state_source(rng):
        sign = BellKind.PLUS if rng.random() < 0.5 else BellKind.MINUS
        return states[sign], sign

    rng_rounds = np.random.default_rng([config.seed, 2])
    key_rate = linkmodel.expected_rate(budget, alpha)
    interval = netsim.IntervalDistribution(1.0 / key_rate)
    records = diqkd.run_rounds(
        state_source, config.diqkd.key_params().basis, config.diqkd.n_rounds,
        rng_rounds, interval_dist=interval,
    )
    _write_csv(
        out / "rounds.csv",
        ("t_s", "x", "y", "a", "b", "sign"),
        ((r.time, r.x, r.y, r.a, r.b, r.herald_sign.value) for r in records),
    )

    chsh = diqkd.estimate_chsh(records)
    qber, qber_err = diqkd.estimate_qber(records)
    params = config.diqkd.key_params()
    estimated = diqkd.finite_key_length(
        len(records), params, min(chsh.s, diqkd.TSIRELSON), min(max(qber, 0.0), 0.5)
    )
    per_sign = {}
    for sign in (BellKind.PLUS, BellKind.MINUS):
        subset = [r for r in records if r.herald_sign is sign]
        try:
            est = diqkd.estimate_chsh(subset)
            per_sign[sign.value] = {"s": est.s, "stderr": est.stderr, "n_records": len(subset)}
        except ValueError:
            per_sign[sign.value] = {"s": None, "stderr": None, "n_records": len(subset)}
    _write_json(out / "estimates.json", {
        "n_rounds": len(records),
        "s": chsh.s,
        "s_err": chsh.stderr,
        "q": qber,
        "q_err": qber_err,
        "per_sign": per_sign,
        "analytic_s": diqkd.analytic_chsh(states[BellKind.PLUS], BellKind.PLUS),
        "analytic_q": diqkd.analytic_qber(states[BellKind.PLUS], BellKind.PLUS),
        "estimated_key": {
            "ell": estimated.finite_length,
            "rate_per_round": estimated.rate_per_round,
            "asymptotic_rate": estimated.asymptotic_rate,
        },
        "finite_size_model": diqkd.FINITE_SIZE_DISCLAIMER,
    })


def _run_keyrate(config: ScenarioConfig, out: Path) -> None:
    section = config.diqkd
    params = section.key_params()
    result = diqkd.finite_key_length(section.n_rounds, params, section.s_ref, section.q_ref)
    payload = {
        "S": section.s_ref,
        "S_err": section.s_ref_err,
        "Q": section.q_ref,
        "Q_err": section.q_ref_err,
        "f": section.recon_efficiency,
        "epsilon": section.epsilon,
        "N": section.n_rounds,
        "ell": result.finite_length,
        "rate_per_round": result.rate_per_round,
        "asymptotic_rate": result.asymptotic_rate,
        "asymptotic_rate_f1": diqkd.asymptotic_rate(section.s_ref, section.q_ref, 1.0),
        "p_key": params.basis.p_key,
        "nu": params.nu,
        "finite_size_model": diqkd.FINITE_SIZE_DISCLAIMER,
    }
    _write_json(out / "keyrate.json", payload)


def _sweep_point(config: ScenarioConfig, alpha: float) -> dict:
    budget = config.link
    params = replace(
        config.protocol,
        alpha=alpha,
        false_herald_weight=herald.false_herald_weight_from_link(budget, alpha),
    )
    state = herald.noisy_heralded_state(params)
    target = qstate.bell_state(params.sign, params.dphi)
    budget_report = herald.error_budget(params)
    return {
        "alpha": alpha,
        "rate_cps": linkmodel.expected_rate(budget, alpha),
        "fidelity": qstate.fidelity(state, target),
        "total_infidelity": budget_report.total_infidelity,
        "contributions": {
            "protocol": budget_report.protocol,
            "ion": budget_report.ion,
            "noise_herald": budget_report.noise_herald,
            "phase": budget_report.phase,
            "motion": budget_report.motion,
        },
    }


def _run_sweep(config: ScenarioConfig, out: Path) -> None:
    alphas = config.sim.sweep_alphas
    max_workers = int(os.environ.get("IONLINK_THREADS", "0")) or min(4, os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        points = list(pool.map(lambda a: _sweep_point(config, a), alphas))

    _write_csv(out / "rate_curve.csv", ("alpha", "rate_cps"),
               ((p["alpha"], p["rate_cps"]) for p in points))
    rows = [("fidelity", p["alpha"], p["fidelity"]) for p in points]
    for source in ("protocol", "ion", "noise_herald", "phase", "motion"):
        rows.extend((source, p["alpha"], p["contributions"][source]) for p in points)
    emit_plotdata(rows, out / "fidelity_vs_alpha.csv")
    _write_json(out / "sweep.json", {"points": points})


_RUNNERS = {
    "budget": _run_budget,
    "decay": _run_decay,
    "simulate": _run_simulate,
    "keyrate": _run_keyrate,
    "sweep": _run_sweep,
}


def run_scenario(config: ScenarioConfig, subcommand: str, out_root=".") -> Path:
    """Execute one subcommand; returns the artifact directory."""
    if subcommand not in _RUNNERS:
        raise ValueError(f"unknown subcommand {subcommand!r}")
    out = Path(out_root) / f"{config.scenario}-{config.seed}"
    out.mkdir(parents=True, exist_ok=True)
    _RUNNERS[subcommand](config, out)
    return out


def _resolve_config_arg(value: str) -> Path:
    path = Path(value)
    if path.exists():
        return path
    if path.suffix == "" and "/" not in value and "\\" not in value:
        try:
            return packaged_config_path(value)
        except FileNotFoundError:
            pass
    return path  # let load_config produce the diagnostic


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ionlink",
        description="Trapped-ion entanglement link simulator and analysis toolkit.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        cmd = sub.add_parser(name, help=f"run the {name} scenario step")
        cmd.add_argument("--config", required=True,
                         help="scenario file or shipped scenario name")
        cmd.add_argument("--seed", type=int, default=None, help="override the config seed")
        cmd.add_argument("--out", default=".", help="parent directory for artifacts")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(_resolve_config_arg(args.config))
        if args.seed is not None:
            config = replace(config, seed=args.seed)
    except ConfigError as exc:
        print(f"ionlink: config error: {exc}", file=sys.stderr)
        return 1
    try:
        out = run_scenario(config, args.subcommand, args.out)
    except Exception as exc:  # noqa: BLE001 - boundary of the process
        print(f"ionlink: runtime error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
