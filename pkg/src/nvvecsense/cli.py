"""``nv-vecsense`` command-line interface.

    nv-vecsense <subcommand> --config <path> [--out <dir>] [--seed <u64>] [--workers <n>]

Subcommands: populations, sensitivity, estimate, compensate, montecarlo.

Exit status: 0 success, 2 configuration error, 3 physics degeneracy (zero
slope, non-selective resonances, no compensation root), 4 acceptance
threshold breached (oracle deviation, estimator beyond 5 sigma).
"""
from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import compensation, dynamics, protocols
from .config import ConfigError, RunConfig, load_config
from .model import COMPONENTS, NVSenseError, check_selectivity, resonance_frequencies

EXIT_OK, EXIT_CONFIG, EXIT_PHYSICS, EXIT_THRESHOLD = 0, 2, 3, 4
ORACLE_TOLERANCE = 1e-5
ESTIMATE_SIGMAS = 5.0


class PhysicsError(NVSenseError):
    pass


def _fmt(x) -> str:
    return f"{x:.17g}"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(v if isinstance(v, str) else
                           str(v) if isinstance(v, (int, np.integer)) else _fmt(v)
                           for v in row) + "\n")
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _finite_or_none(x):
    return float(x) if x is not None and math.isfinite(x) else None


def _check_selectivity(cfg: RunConfig):
    """Multi-frequency control needs resolvable resonances; checked when B_ex and rabi are set."""
    if not cfg.plan.kind.is_multifreq or cfg.B_ex is None or cfg.rabi is None:
        return None
    verdict = check_selectivity(resonance_frequencies(cfg.B_ex, cfg.constants), cfg.rabi,
                                cfg.constants.selectivity_factor)
    info = {"verdict": verdict.label, "min_gap": verdict.min_gap, "threshold": verdict.threshold,
            "offending_pairs": [list(p) for p in verdict.offending_pairs]}
    if not verdict.selective:
        raise PhysicsError(f"resonances not selective: {info}")
    return info


def _sequence(plan, k):
    t = plan.times[k - 1]
    s = plan.signs[k - 1]
    if plan.kind.is_ac:
        return dynamics.echo_sequence(t, s)
    return dynamics.ramsey_sequence(t, s)


def cmd_populations(cfg: RunConfig, args):
    _check_selectivity(cfg)
    plan = cfg.plan
    omega = plan.omega_ac if plan.kind.is_ac else None
    rows, worst = [], 0.0
    for k in (1, 2, 3, 4):
        seq = _sequence(plan, k)
        cf = dynamics.run_sequence(seq, cfg.signal_field, k, cfg.params, cfg.constants,
                                   "closed_form", omega)
        ode = dynamics.run_sequence(seq, cfg.signal_field, k, cfg.params, cfg.constants,
                                    "ode_oracle", omega)
        dev = max(abs(cf[0] - ode[0]), abs(cf[1] - ode[1]))
        worst = max(worst, dev)
        rows.append((k, cf[0], cf[1], ode[0], ode[1], dev))
    out = {"populations.csv": _csv(
        ["axis", "p0_closed_form", "p1_closed_form", "p0_ode_oracle", "p1_ode_oracle",
         "deviation"], rows)}
    print(f"max oracle deviation: {worst:.3e}", file=sys.stderr)
    if worst > ORACLE_TOLERANCE:
        return out, f"oracle deviation {worst:.3e} exceeds {ORACLE_TOLERANCE:g}"
    return out, None


def _counterpart(plan):
    pairs = {protocols.Kind.CONV_DC: protocols.Kind.MF_DC, protocols.Kind.MF_DC: protocols.Kind.CONV_DC,
             protocols.Kind.CONV_AC: protocols.Kind.MF_AC, protocols.Kind.MF_AC: protocols.Kind.CONV_AC}
    return pairs[plan.kind]


def cmd_sensitivity(cfg: RunConfig, args):
    selectivity = _check_selectivity(cfg)
    plan = cfg.plan
    report = protocols.sensitivity(plan, cfg.params, cfg.T, cfg.constants)
    other_plan = protocols.make_plan(_counterpart(plan), plan.component, cfg.params,
                                     t=list(plan.times), omega_ac=plan.omega_ac)
    other = protocols.sensitivity(other_plan, cfg.params, cfg.T, cfg.constants)
    conv, mf = (other, report) if plan.kind.is_multifreq else (report, other)
    doc = {
        "schema_version": protocols.SCHEMA_VERSION,
        "report": report.to_dict(),
        "comparison": {
            "conventional": conv.to_dict(),
            "multifreq": mf.to_dict(),
            "improvement_ratio": _finite_or_none(conv.delta_B / mf.delta_B)
            if conv.ok and mf.ok else None,
        },
    }
    if selectivity is not None:
        doc["selectivity"] = selectivity
    out = {"sensitivity.json": _json(doc)}
    values = cfg.sweep_values()
    if values is not None:
        rows = protocols.sensitivity_sweep(plan, cfg.params, cfg.sweep["parameter"], values,
                                           cfg.T, cfg.constants)
        out["sweep.csv"] = _csv(["parameter", "delta_B", "normalized"], rows)
    if not report.ok:
        raise PhysicsError(report.error)
    if conv.ok and mf.ok:
        print(f"improvement ratio (conventional / multi-frequency): "
              f"{conv.delta_B / mf.delta_B:.6f}", file=sys.stderr)
    return out, None


def _component_seed(seed: int, c: int) -> int:
    return int(np.random.SeedSequence([seed, c]).generate_state(1, np.uint64)[0])


def cmd_estimate(cfg: RunConfig, args):
    _check_selectivity(cfg)
    seed = cfg.montecarlo["seed"]
    n = cfg.repetitions
    truth = cfg.signal_field
    plans = {c: protocols.make_plan(cfg.plan.kind, c, cfg.params, t=list(cfg.plan.times),
                                    omega_ac=cfg.plan.omega_ac) for c in COMPONENTS}
    estimate, predicted = [], []
    for i, c in enumerate(COMPONENTS):
        plan = plans[c]
        rep = protocols.sensitivity(plan, cfg.params, n * plan.repetition_time, cfg.constants)
        if not rep.ok:
            raise PhysicsError(rep.error)
        record = protocols.simulate_record(plan, truth, cfg.params, n,
                                           _component_seed(seed, i), cfg.constants)
        estimate.append(protocols.estimate_component(record, plan, cfg.params, cfg.constants))
        predicted.append(rep.delta_B)
    estimate, predicted = np.array(estimate), np.array(predicted)
    deviation = (estimate - truth) / predicted
    doc = {
        "schema_version": protocols.SCHEMA_VERSION,
        "kind": cfg.plan.kind.value,
        "repetitions": n,
        "seed": seed,
        "true_B": truth.tolist(),
        "estimated_B": estimate.tolist(),
        "predicted_delta_B": predicted.tolist(),
        "deviation_sigma": deviation.tolist(),
    }
    out = {"estimate.json": _json(doc)}
    worst = float(np.max(np.abs(deviation)))
    if worst > ESTIMATE_SIGMAS:
        return out, f"estimate deviates by {worst:.2f} sigma (> {ESTIMATE_SIGMAS:g})"
    return out, None


def cmd_compensate(cfg: RunConfig, args):
    mc = cfg.montecarlo
    out = {}
    for mode in mc["modes"]:
        rng = np.random.default_rng([mc["seed"], compensation._MODE_CODE[mode]])
        draws = compensation.draw_parameters(rng, mc["schedule_samples"], mc["mean_delta_alpha"],
                                             mc["std_delta_alpha"], mc["mean_gamma"],
                                             mc["std_gamma"])
        try:
            sched = compensation.solve_schedule(draws, mode)
        except compensation.NoRootError as exc:
            raise PhysicsError(str(exc)) from None
        out[f"schedule_{mode}.csv"] = sched.to_csv()
        out[f"curves_{mode}.csv"] = sched.curves_csv()
        print(f"{mode}: target {sched.target:.6e}, t_max {sched.t_max:.6e} s, "
              f"max relative weight error {sched.max_relative_error():.2e}", file=sys.stderr)
    return out, None


def cmd_montecarlo(cfg: RunConfig, args):
    mc = cfg.montecarlo
    out = {}
    for mode in mc["modes"]:
        rep = compensation.sensitivity_ratio_curve(
            mc["sigma_grid"], mc["samples"], mc["seed"], mode, mc["mean_delta_alpha"],
            mc["mean_gamma"], mc["mean_emission"], workers=args.workers,
            constants=cfg.constants)
        out[f"r_sigma_{mode}.csv"] = rep.to_csv()
    return out, None


COMMANDS = {
    "populations": cmd_populations,
    "sensitivity": cmd_sensitivity,
    "estimate": cmd_estimate,
    "compensate": cmd_compensate,
    "montecarlo": cmd_montecarlo,
}


def _write(outputs: dict, out_dir):
    if out_dir is None:
        for i, (name, text) in enumerate(outputs.items()):
            if len(outputs) > 1:
                sys.stdout.write(("\n" if i else "") + f"# {name}\n")
            sys.stdout.write(text)
        return
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in outputs.items():
        fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=f".{name}.")
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, out_dir / name)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nv-vecsense", description=__doc__.split("\n\n")[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", help="output directory (default: stdout)")
    parser.add_argument("--seed", type=int, help="override montecarlo.seed")
    parser.add_argument("--workers", type=int, default=1, help="Monte Carlo worker threads")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError(["--seed must be an unsigned 64-bit integer"])
            cfg.montecarlo["seed"] = args.seed
        if args.workers < 1:
            raise ConfigError(["--workers must be >= 1"])
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG

    try:
        outputs, breach = COMMANDS[args.command](cfg, args)
    except (PhysicsError, protocols.ZeroSlopeError, compensation.NoRootError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS

    _write(outputs, args.out or cfg.output_dir)
    if breach:
        print(f"threshold breach: {breach}", file=sys.stderr)
        return EXIT_THRESHOLD
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
