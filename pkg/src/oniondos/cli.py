"""Command-line front end: generation, analytics, simulation, detection.

Every subcommand honors --seed and --out, writes its delimited results plus
rendered figures, and drops a run manifest (resolved parameters, inputs,
outputs, version, duration) alongside them.  Data goes to files; progress
and diagnostics go to stderr only.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from . import analytic, attacker, detect_exact, detect_prob, network, plots, replay
from .errors import OnionDosError

log = logging.getLogger("oniondos")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


@dataclass
class RunManifest:
    subcommand: str
    argv: list[str]
    params: dict
    seed: int
    inputs: list[str]
    outputs: list[str]
    tool_version: str
    duration_seconds: float


def _configure_logging():
    level = os.environ.get("ONIONDOS_LOG", "info").lower()
    mapping = {"quiet": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(stream=sys.stderr, level=mapping.get(level, logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s")


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.6g}"
    return str(value)


def emit_report(path, header, rows, fmt: str = "csv") -> str:
    """Write rows with a stable column order and 6-significant-digit
    floats.  The file appears atomically: no partial output on error."""
    path = Path(path)
    if fmt == "csv":
        text = ",".join(header) + "\n"
        text += "".join(",".join(_fmt(v) for v in row) + "\n" for row in rows)
    elif fmt == "gnuplot-data":
        text = "# " + " ".join(header) + "\n"
        text += "".join(" ".join(_fmt(v) for v in row) + "\n" for row in rows)
    elif fmt == "json":
        text = json.dumps([dict(zip(header, [_json_value(v) for v in row]))
                           for row in rows], indent=2) + "\n"
    else:
        raise OnionDosError(f"unknown report format {fmt!r}")
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)
    return str(path)


def _json_value(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(f"{float(v):.6g}")
    if isinstance(v, float):
        return float(f"{v:.6g}")
    return v


def _write_json(path, obj) -> str:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    os.replace(tmp, path)
    return str(path)


def _write_manifest(out_dir: Path, subcommand: str, argv, params, seed,
                    inputs, outputs, started: float) -> str:
    manifest = RunManifest(
        subcommand=subcommand, argv=list(argv), params=params, seed=seed,
        inputs=[str(p) for p in inputs], outputs=[str(p) for p in outputs],
        tool_version=__version__, duration_seconds=round(time.monotonic() - started, 3))
    return _write_json(out_dir / "manifest.json", asdict(manifest))


def _parse_axis(spec_str: str):
    try:
        name, start, stop, count = spec_str.split(":")
        return name, np.linspace(float(start), float(stop), int(count))
    except ValueError as exc:
        raise OnionDosError(f"axis must look like name:start:stop:count, got {spec_str!r}") from exc


def _parse_grid(spec_str: str):
    try:
        start, stop, count = spec_str.split(":")
        return np.linspace(float(start), float(stop), int(count))
    except ValueError as exc:
        raise OnionDosError(f"grid must look like start:stop:count, got {spec_str!r}") from exc


def _attacker_from_args(args) -> attacker.AttackerSpec:
    if getattr(args, "attacker_config", None):
        return attacker.attacker_spec_from_json(args.attacker_config)
    return attacker.AttackerSpec(
        target_g=args.target_g, target_e=args.target_e,
        p_kill=args.p_kill, p_permit=args.p_permit,
        p_kill_aware=args.p_kill_aware, p_kill_unaware=args.p_kill_unaware,
        strategy=attacker.Strategy(args.strategy),
        context_mode=attacker.ContextMode(args.context_mode))


def _load_table(args) -> network.RelayTable:
    return network.read_relay_table(args.table)


def _load_traces(args, table) -> network.TraceSet:
    traces = network.read_traces(args.traces, table=table)
    if traces.relay_ids != table.ids:
        raise OnionDosError("trace file must cover exactly the relays in the table")
    return traces


def _add_attacker_args(p):
    p.add_argument("--attacker-config", help="JSON attacker spec (overrides flags)")
    p.add_argument("--target-g", type=float, default=0.05)
    p.add_argument("--target-e", type=float, default=0.05)
    p.add_argument("--p-kill", "--pkill", dest="p_kill", type=float, default=1.0)
    p.add_argument("--p-permit", "--ppermit", dest="p_permit", type=float, default=1.0)
    p.add_argument("--p-kill-aware", type=float, default=None)
    p.add_argument("--p-kill-unaware", type=float, default=None)
    p.add_argument("--strategy", choices=[s.value for s in attacker.Strategy],
                   default="top_bandwidth")
    p.add_argument("--context-mode", choices=[c.value for c in attacker.ContextMode],
                   default="none")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oniondos",
        description="Circuit-killing DoS lab: synthetic networks, attack "
                    "analytics, trace-replay simulation, attacker detection.")
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=1,
                        help="worker processes; results are merge-order deterministic")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--no-figures", action="store_true",
                        help="skip matplotlib figure rendering")
    sub = parser.add_subparsers(dest="subcommand")

    p = sub.add_parser("gen-network", parents=[common],
                       help="generate a synthetic relay table")
    p.add_argument("--config", help="key=value generator config file")
    for f in fields(network.NetworkGenConfig):
        arg = "--" + f.name.replace("_", "-")
        p.add_argument(arg, type=int if f.name in ("n", "trial_count") else float,
                       default=None)

    p = sub.add_parser("gen-traces", parents=[common],
                       help="generate lifecycle traces for a relay table")
    p.add_argument("--table", required=True)
    p.add_argument("--trials", type=int, default=100)

    p = sub.add_parser("stats", parents=[common],
                       help="bandwidth summary of a relay table")
    p.add_argument("--table", required=True)

    p = sub.add_parser("analytic", parents=[common],
                       help="closed-form attack effectiveness at one point")
    _add_analytic_args(p)

    p = sub.add_parser("sweep", parents=[common],
                       help="eventual-control probability over a 2-D grid")
    p.add_argument("--axis1", required=True, help="name:start:stop:count")
    p.add_argument("--axis2", required=True, help="name:start:stop:count")
    p.add_argument("--z-factor", type=float, default=1.5)
    p.add_argument("--fixed-z", action="store_true",
                   help="keep --z fixed instead of coupling z to min(g, e)")
    _add_analytic_args(p)

    p = sub.add_parser("simulate", parents=[common],
                       help="trace-replay attack experiment")
    p.add_argument("--table", required=True)
    p.add_argument("--traces", required=True)
    p.add_argument("--clients", type=int, default=10000)
    p.add_argument("--attempt-cap", "--K", dest="attempt_cap", type=int, default=120)
    p.add_argument("--boot", type=int, default=1000)
    _add_attacker_args(p)

    p = sub.add_parser("compare", parents=[common],
                       help="analytic model vs replay simulation over g=e=r")
    p.add_argument("--table", required=True)
    p.add_argument("--traces", required=True)
    p.add_argument("--grid", default="0.01:0.10:10", help="start:stop:count for r")
    p.add_argument("--clients", type=int, default=10000)
    p.add_argument("--boot", type=int, default=1000)
    p.add_argument("--attempt-cap", "--K", dest="attempt_cap", type=int, default=120)
    p.add_argument("--p-kill", "--pkill", dest="p_kill", type=float, default=1.0)
    p.add_argument("--p-permit", "--ppermit", dest="p_permit", type=float, default=1.0)
    p.add_argument("--strategy", choices=[s.value for s in attacker.Strategy],
                   default="top_bandwidth")

    p = sub.add_parser("failure-rate", parents=[common],
                       help="natural circuit failure rate per trial")
    p.add_argument("--table", required=True)
    p.add_argument("--traces", required=True)
    p.add_argument("--circuits", type=int, default=100)

    p = sub.add_parser("detect-exact", parents=[common],
                       help="deterministic probe-based detection")
    p.add_argument("--table", required=True)
    p.add_argument("--traces", default=None,
                   help="replay traces for probe noise; omit for a noiseless oracle")
    p.add_argument("--retries", type=int, default=None,
                   help="probe repetitions; default derives from --failure-prob/--epsilon")
    p.add_argument("--failure-prob", type=float, default=0.45)
    p.add_argument("--epsilon", type=float, default=0.0004)
    p.add_argument("--randomize-x", action="store_true")
    _add_attacker_args(p)

    p = sub.add_parser("detect-prob", parents=[common],
                       help="probabilistic two-phase detection experiment")
    p.add_argument("--table", required=True)
    p.add_argument("--traces", required=True)
    p.add_argument("--scr", type=float, default=1.0)
    p.add_argument("--gcr", type=float, default=0.0)
    p.add_argument("--suspect-trials", "--l", dest="suspect_trials", type=int, default=5)
    p.add_argument("--guilt-trials", "--l-prime", dest="guilt_trials", type=int, default=5)
    p.add_argument("--pair-sample", type=int, default=20,
                   help="complementary pairs per suspect; 0 means all")
    p.add_argument("--repetitions", type=int, default=100)
    _add_attacker_args(p)

    return parser


def _add_analytic_args(p):
    p.add_argument("--gamma", type=float, default=0.70)
    p.add_argument("--eta", type=float, default=0.40)
    p.add_argument("--zeta", type=float, default=0.30)
    p.add_argument("--g", type=float, default=0.10)
    p.add_argument("--e", type=float, default=0.10)
    p.add_argument("--z", type=float, default=None, help="default: 1.5 * min(g, e)")
    p.add_argument("--p-kill", "--pkill", dest="p_kill", type=float, default=1.0)
    p.add_argument("--p-permit", "--ppermit", dest="p_permit", type=float, default=1.0)
    p.add_argument("--p-kill-aware", type=float, default=None)
    p.add_argument("--p-kill-unaware", type=float, default=None)
    p.add_argument("--attempt-cap", "--K", dest="attempt_cap", type=int, default=120)
    p.add_argument("--exit-only-context", action="store_true")


def _analytic_inputs(args) -> analytic.AnalyticInputs:
    z = args.z if args.z is not None else analytic.coupled_z(args.g, args.e)
    return analytic.AnalyticInputs(
        gamma=args.gamma, eta=args.eta, zeta=args.zeta,
        g=args.g, e=args.e, z=z,
        p_kill=args.p_kill, p_permit=args.p_permit,
        p_kill_aware=args.p_kill_aware, p_kill_unaware=args.p_kill_unaware,
        attempt_cap=args.attempt_cap, exit_only_context=args.exit_only_context)


# ---------------------------------------------------------------------------
# Subcommand implementations; each returns the list of output files.
# ---------------------------------------------------------------------------

def _cmd_gen_network(args, out: Path):
    if args.config:
        config = network.read_gen_config(args.config)
    else:
        config = network.NetworkGenConfig()
    overrides = {f.name: getattr(args, f.name)
                 for f in fields(network.NetworkGenConfig)
                 if getattr(args, f.name, None) is not None}
    config = replace(config, **overrides)
    table = network.generate_synthetic_network(config, args.seed)
    table_path = out / "relays.csv"
    network.write_relay_table(table, table_path)
    outputs = [str(table_path)]
    summary = network.network_stats(table)
    outputs.append(_write_json(out / "network_stats.json",
                               {k: _json_value(v) for k, v in asdict(summary).items()}))
    if not args.no_figures:
        outputs.append(plots.bandwidth_plot(table, out / "bandwidth.png"))
    params = asdict(config)
    log.info("generated %d relays: gamma=%.3f eta=%.3f zeta=%.3f",
             len(table), summary.gamma, summary.eta, summary.zeta)
    return params, outputs


def _cmd_gen_traces(args, out: Path):
    table = _load_table(args)
    traces = network.generate_lifecycle_traces(table, args.trials, args.seed)
    traces_path = out / "traces.csv"
    network.write_traces(traces, traces_path)
    outputs = [str(traces_path)]
    if not args.no_figures:
        outputs.append(plots.trace_summary_plot(traces, out / "traces.png"))
    return {"table": args.table, "trials": args.trials}, outputs


def _cmd_stats(args, out: Path):
    table = _load_table(args)
    summary = network.network_stats(table)
    rows = [(k, _json_value(v)) for k, v in asdict(summary).items()]
    outputs = [emit_report(out / "stats.csv", ("metric", "value"), rows)]
    outputs.append(_write_json(out / "stats.json", dict(rows)))
    return {"table": args.table}, outputs


def _cmd_analytic(args, out: Path):
    inputs = _analytic_inputs(args)
    probs = analytic.compromise_probs(inputs)
    result = {
        "g_star": probs.g_star, "m_star": probs.m_star, "e_star": probs.e_star,
        "u_j": {str(j): analytic.unsuccessful_prob(j, inputs, probs) for j in range(4)},
        "eventual_control": analytic.eventual_control_prob(inputs),
    }
    outputs = [_write_json(out / "analytic.json", _round_tree(result))]
    return {f.name: getattr(inputs, f.name) for f in fields(inputs)}, outputs


def _round_tree(obj):
    if isinstance(obj, dict):
        return {k: _round_tree(v) for k, v in obj.items()}
    if isinstance(obj, float):
        return float(f"{obj:.6g}")
    return obj


def _cmd_sweep(args, out: Path):
    base = _analytic_inputs(args)
    name1, values1 = _parse_axis(args.axis1)
    name2, values2 = _parse_axis(args.axis2)
    result = analytic.sweep(base, name1, values1, name2, values2,
                            z_factor=args.z_factor, couple_z=not args.fixed_z)
    grid_rows = [[f"{result.axis1_name}\\{result.axis2_name}", *result.axis2_values]]
    for i, v1 in enumerate(result.axis1_values):
        grid_rows.append([v1, *result.values[i]])
    outputs = [emit_report(out / "sweep_grid.csv",
                           [str(c) for c in grid_rows[0]], grid_rows[1:])]
    long_rows = [(v1, v2, result.values[i, k])
                 for i, v1 in enumerate(result.axis1_values)
                 for k, v2 in enumerate(result.axis2_values)]
    outputs.append(emit_report(out / "sweep_long.csv",
                               (result.axis1_name, result.axis2_name, "value"),
                               long_rows))
    if not args.no_figures:
        outputs.append(plots.sweep_contour(result, out / "sweep.png"))
    params = {f.name: getattr(base, f.name) for f in fields(base)}
    params.update({"axis1": args.axis1, "axis2": args.axis2,
                   "z_factor": args.z_factor, "couple_z": not args.fixed_z})
    return params, outputs


def _prepare_attack(args, table):
    spec = _attacker_from_args(args)
    compromised = attacker.compromise_relays(table, spec.target_g, spec.target_e,
                                             spec.strategy)
    spec = spec.with_compromised(compromised)
    if not spec.is_active() and (spec.target_g or spec.target_e):
        log.warning("attacker has zero guard/exit targets or p_permit=0; "
                    "it can never control a circuit")
    return spec


def _cmd_simulate(args, out: Path):
    table = _load_table(args)
    traces = _load_traces(args, table)
    spec = _prepare_attack(args, table)
    outcomes = replay.run_attack_experiment(traces, table, spec, args.clients,
                                            args.attempt_cap, args.seed,
                                            jobs=args.jobs)
    rows = [(c, o.trial, o.result.value, o.attempts_used)
            for c, o in enumerate(outcomes)]
    outputs = [emit_report(out / "outcomes.csv",
                           ("client", "trial", "result", "attempts"), rows)]
    stats = replay.bootstrap_stats(outcomes, n_boot=args.boot, seed=args.seed)
    frac = attacker.compromised_fractions(table, spec.compromised)
    outputs.append(_write_json(out / "simulate_stats.json", _round_tree({
        "achieved_g": frac.g, "achieved_e": frac.e, "achieved_z": frac.z,
        **asdict(stats)})))
    params = {"clients": args.clients, "attempt_cap": args.attempt_cap,
              "boot": args.boot, "target_g": spec.target_g, "target_e": spec.target_e,
              "p_kill": spec.p_kill, "p_permit": spec.p_permit,
              "strategy": spec.strategy.value, "context_mode": spec.context_mode.value}
    return params, outputs


def _cmd_compare(args, out: Path):
    table = _load_table(args)
    traces = _load_traces(args, table)
    grid = _parse_grid(args.grid)
    summary = network.network_stats(table)
    rows = []
    for r in grid:
        spec = attacker.AttackerSpec(
            target_g=float(r), target_e=float(r), p_kill=args.p_kill,
            p_permit=args.p_permit, strategy=attacker.Strategy(args.strategy))
        spec = spec.with_compromised(
            attacker.compromise_relays(table, spec.target_g, spec.target_e,
                                       spec.strategy))
        outcomes = replay.run_attack_experiment(traces, table, spec, args.clients,
                                                args.attempt_cap, args.seed,
                                                jobs=args.jobs)
        stats = replay.bootstrap_stats(outcomes, n_boot=args.boot,
                                       resample_size=args.clients, seed=args.seed)
        frac = attacker.compromised_fractions(table, spec.compromised)
        inputs = analytic.AnalyticInputs(
            gamma=summary.gamma, eta=summary.eta, zeta=summary.zeta,
            g=frac.g, e=frac.e, z=frac.z, p_kill=args.p_kill,
            p_permit=args.p_permit, attempt_cap=args.attempt_cap)
        rows.append((float(r), analytic.eventual_control_prob(inputs),
                     stats.bootstrap_median, stats.bootstrap_q1, stats.bootstrap_q3))
        log.info("r=%.3f analytic=%.5f sim_median=%.5f", *rows[-1][:3])
    outputs = [emit_report(out / "compare.csv",
                           ("r", "analytic", "sim_median", "sim_q1", "sim_q3"), rows)]
    if not args.no_figures:
        outputs.append(plots.compare_plot(rows, out / "compare.png"))
    params = {"grid": args.grid, "clients": args.clients, "boot": args.boot,
              "attempt_cap": args.attempt_cap, "p_kill": args.p_kill,
              "p_permit": args.p_permit, "strategy": args.strategy}
    return params, outputs


def _cmd_failure_rate(args, out: Path):
    table = _load_table(args)
    traces = _load_traces(args, table)
    rates = replay.circuit_failure_rate(traces, table,
                                        n_circuits_per_trial=args.circuits,
                                        seed=args.seed)
    rows = list(enumerate(rates))
    outputs = [emit_report(out / "failure_rates.csv",
                           ("trial", "median_failure_rate"), rows)]
    if not args.no_figures:
        outputs.append(plots.failure_rate_plot(rates, out / "failure_rates.png"))
    return {"circuits": args.circuits}, outputs


def _cmd_detect_exact(args, out: Path):
    table = _load_table(args)
    spec = _prepare_attack(args, table)
    rng = np.random.default_rng(np.random.SeedSequence([args.seed, 0x6f7261]))
    if spec.p_kill < 1.0 or spec.p_permit < 1.0:
        log.warning("exact detection is only guaranteed against an "
                    "always-kill/always-permit attacker (p_kill=%.2f, "
                    "p_permit=%.2f given)", spec.p_kill, spec.p_permit)
    if args.traces:
        traces = _load_traces(args, table)
        oracle = detect_exact.TraceBackedOracle(table, traces, spec, rng=rng)
        noisy = True
    else:
        oracle = detect_exact.SimulatedKillOracle(spec.compromised,
                                                  failure_prob=0.0, rng=rng)
        noisy = False
    if args.retries is not None:
        retries = args.retries
    elif noisy:
        budget = 3 * len(table)
        retries = detect_exact.required_repetitions(args.failure_prob, budget,
                                                    args.epsilon)
    else:
        retries = 1
    report = detect_exact.detect_exact(oracle, table.ids, retries=retries,
                                       randomize_x=args.randomize_x, rng=rng)
    verdicts = [{"id": rid, "verdict": v.value}
                for rid, v in sorted(report.classification.items())]
    predicted = report.compromised()
    actual = spec.compromised
    outputs = [_write_json(out / "detect_exact.json", {
        "classification": verdicts,
        "ambiguous_all_or_none": report.ambiguous_all_or_none,
        "probes_used": report.probes_used,
        "retries": retries,
        "errors": sorted(predicted.symmetric_difference(actual)),
    })]
    params = {"retries": retries, "randomize_x": args.randomize_x,
              "noisy": noisy, "target_g": spec.target_g, "target_e": spec.target_e}
    return params, outputs


def _cmd_detect_prob(args, out: Path):
    table = _load_table(args)
    traces = _load_traces(args, table)
    spec = _prepare_attack(args, table)
    config = detect_prob.DetectionConfig(
        scr=args.scr, gcr=args.gcr, suspect_trials=args.suspect_trials,
        guilt_trials=args.guilt_trials,
        pair_sample=None if args.pair_sample == 0 else args.pair_sample,
        label_all_guards=(spec.context_mode is attacker.ContextMode.EXIT_ONLY
                          and spec.p_kill_unaware == 0.0))
    summary = detect_prob.run_detection_experiment(traces, table, spec, config,
                                                   args.repetitions, args.seed)
    last = summary.reports[-1]
    rows = []
    for rid in sorted(last.suspects_guard | last.suspects_exit):
        rows.append(("suspect", rid, "suspect", last.suspect_rates.get(rid, "")))
    for rid in sorted(last.guilty):
        rows.append(("guilty", rid, "guilty", last.best_pair_rates.get(rid, "")))
    outputs = [emit_report(out / "detect_report.csv",
                           ("phase", "relay_id", "verdict", "failure_rate"), rows)]
    stat_rows = []
    for metric in ("fp_suspect", "fn_suspect", "fp_guilty", "fn_guilty",
                   "probes_used"):
        q1, med, q3 = summary.quartiles(metric)
        stat_rows.append((metric, med, q1, q3))
    outputs.append(emit_report(out / "detect_summary.csv",
                               ("metric", "median", "q1", "q3"), stat_rows))
    if not args.no_figures:
        outputs.append(plots.detection_rates_plot(summary, out / "detect_rates.png"))
    params = {"scr": config.scr, "gcr": config.gcr,
              "suspect_trials": config.suspect_trials,
              "guilt_trials": config.guilt_trials,
              "pair_sample": config.pair_sample, "repetitions": args.repetitions,
              "target_g": spec.target_g, "target_e": spec.target_e,
              "p_kill": spec.p_kill, "p_permit": spec.p_permit}
    return params, outputs


_HANDLERS = {
    "gen-network": _cmd_gen_network,
    "gen-traces": _cmd_gen_traces,
    "stats": _cmd_stats,
    "analytic": _cmd_analytic,
    "sweep": _cmd_sweep,
    "simulate": _cmd_simulate,
    "compare": _cmd_compare,
    "failure-rate": _cmd_failure_rate,
    "detect-exact": _cmd_detect_exact,
    "detect-prob": _cmd_detect_prob,
}


def dispatch(argv) -> int:
    """Run one subcommand; 0 on success, 1 on usage error, 2 on runtime error."""
    _configure_logging()
    parser = build_parser()
    argv = list(argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help/--version, 2 for usage errors
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if not args.subcommand:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    started = time.monotonic()
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        params, outputs = _HANDLERS[args.subcommand](args, out)
        manifest_path = _write_manifest(
            out, args.subcommand, argv, _round_tree(_plain(params)), args.seed,
            inputs=[p for p in (getattr(args, "table", None),
                                getattr(args, "traces", None),
                                getattr(args, "config", None),
                                getattr(args, "attacker_config", None)) if p],
            outputs=outputs, started=started)
        log.info("wrote %d files and %s", len(outputs), manifest_path)
        return EXIT_OK
    except (OnionDosError, OSError) as exc:
        print(f"oniondos {args.subcommand}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if hasattr(obj, "value"):
        return obj.value
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    return obj


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
