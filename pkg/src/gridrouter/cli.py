"""Command-line interface.

Subcommands:

* ``simulate``  run a scenario file (or bundled scenario) and write the
  trace CSV, report JSON, and figures.
* ``stability`` evaluate the small-signal predicates and optionally
  emit Bode tables for the baseline, ripple-mitigated, and
  inertia-enhanced configurations.
* ``sweep``     rerun a scenario across a parameter range and aggregate
  the summary metrics.

Exit codes: 0 run completed, 1 usage or schema error, 2 the DC link
collapsed, 3 the run diverged.
"""

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .core import GridRouterError
from .engine import run_scenario
from .report import (
    EXIT_CODES,
    build_report,
    format_float,
    summarize,
    write_report,
    write_trace_csv,
)
from .scenario_io import (
    ScenarioError,
    apply_override,
    build_scenario,
    bundled_scenario_names,
    emit_canonical,
    parse_scenario,
)
from .small_signal import (
    SmallSignalParams,
    bode_sample,
    characteristic_poly,
    classify_stability,
    closed_loop_tf,
    closed_loop_tf_filtered,
    current_loop_pole,
    filtered_loop_stable,
    poles,
    stability_margin,
    vic_stable,
    vic_tf,
)

THREADS_ENV = "GRIDROUTER_THREADS"


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gridrouter",
        description="Hybrid AC-DC multi-feeder grid simulator with "
                    "partial-power series-injection modules.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one scenario")
    sim.add_argument("scenario", help="scenario file path or bundled scenario name")
    sim.add_argument("--out", default="runs", help="output directory (default: runs)")
    sim.add_argument("--compare-closed-form", action="store_true",
                     help="track the gap between closed-form and exact AC powers")
    sim.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    sim.add_argument("--emit-canonical", action="store_true",
                     help="also write the canonical scenario form")

    stab = sub.add_parser("stability", help="small-signal analysis")
    stab.add_argument("--scenario", help="scenario file or bundled name to pull parameters from")
    stab.add_argument("--feeder", help="DC feeder id when using --scenario")
    stab.add_argument("--l-henry", type=float, help="line inductance")
    stab.add_argument("--r-ohm", type=float, help="line resistance")
    stab.add_argument("--c-farad", type=float, help="DC-link capacitance")
    stab.add_argument("--kp", type=float, default=0.0)
    stab.add_argument("--ki", type=float, default=0.0)
    stab.add_argument("--kl", type=float, default=0.0)
    stab.add_argument("--kc", type=float, default=0.0)
    stab.add_argument("--kr", type=float, default=0.0)
    stab.add_argument("--z-ohm", type=float, default=1.0,
                      help="inertia voltage-loop impedance")
    stab.add_argument("--bode", metavar="FILE", help="write Bode tables to a CSV file")
    stab.add_argument("--filtered-ripple-hz", type=float, metavar="HZ",
                      help="also analyse the loop with a realizable first-order "
                           "high-pass ripple measurement at this cutoff")
    stab.add_argument("--f-min", type=float, default=0.1)
    stab.add_argument("--f-max", type=float, default=1e4)
    stab.add_argument("--points", type=int, default=200)
    stab.add_argument("--no-figures", action="store_true")

    swp = sub.add_parser("sweep", help="parameter sweep over independent runs")
    swp.add_argument("scenario", help="scenario file path or bundled scenario name")
    swp.add_argument("--param", required=True,
                     help="dotted path into the scenario, e.g. controllers.f1.kc")
    swp.add_argument("--values", required=True, nargs="+",
                     help="JSON literals for the swept parameter")
    swp.add_argument("--out", default="runs")
    swp.add_argument("--no-figures", action="store_true")

    ls = sub.add_parser("scenarios", help="list bundled scenarios")
    ls.set_defaults(command="scenarios")
    return parser


def _render_trace_safe(trace, scenario, path):
    from . import figures

    figures.render_trace(trace, scenario, path)


def _run_compare(parsed, compare, track_closed_form):
    norm = parsed.normalized
    for path, value in sorted(compare["overrides"].items()):
        norm = apply_override(norm, path, value)
    scenario = build_scenario(norm)
    scenario.track_closed_form = track_closed_form
    trace = run_scenario(scenario)
    return scenario, trace


def _ripple_attenuation(summary, compare_summary):
    out = {}
    for key, amp in summary.items():
        if key.startswith("ripple_amp.") and key in compare_summary:
            base = compare_summary[key]
            if base > 0:
                out[key.replace("ripple_amp.", "ripple_attenuation.")] = amp / base
    return out


def cmd_simulate(args):
    parsed = parse_scenario(args.scenario)
    out_dir = Path(args.out) / parsed.name
    out_dir.mkdir(parents=True, exist_ok=True)

    scenario = parsed.scenario
    scenario.track_closed_form = args.compare_closed_form
    trace = run_scenario(scenario)
    summary = summarize(scenario, trace)

    outputs = {"trace_csv": str(out_dir / "trace.csv")}
    write_trace_csv(trace, outputs["trace_csv"])
    if args.emit_canonical:
        outputs["canonical_json"] = str(out_dir / "scenario.canonical.json")
        with open(outputs["canonical_json"], "w") as fh:
            fh.write(emit_canonical(parsed.normalized))

    compare_block = None
    if scenario.compare:
        cmp_scenario, cmp_trace = _run_compare(parsed, scenario.compare,
                                               args.compare_closed_form)
        cmp_summary = summarize(cmp_scenario, cmp_trace)
        label = scenario.compare["label"]
        outputs[f"compare_trace_csv.{label}"] = str(out_dir / f"trace_{label}.csv")
        write_trace_csv(cmp_trace, outputs[f"compare_trace_csv.{label}"])
        compare_block = {
            "label": label,
            "overrides": scenario.compare["overrides"],
            "verdict": cmp_trace.verdict,
            "summary": cmp_summary,
        }
        compare_block.update(_ripple_attenuation(summary, cmp_summary))
        if not args.no_figures:
            outputs[f"compare_figure.{label}"] = str(out_dir / f"trace_{label}.png")
            _render_trace_safe(cmp_trace, cmp_scenario, outputs[f"compare_figure.{label}"])

    if not args.no_figures:
        outputs["figure"] = str(out_dir / "trace.png")
        _render_trace_safe(trace, scenario, outputs["figure"])

    report = build_report(parsed, trace, summary, outputs, compare_block)
    report_path = out_dir / "report.json"
    write_report(report, report_path)
    print(f"verdict: {trace.verdict}")
    print(f"report: {report_path}")
    return EXIT_CODES[trace.verdict]


def _stability_params(args):
    if args.scenario:
        parsed = parse_scenario(args.scenario)
        candidates = [s for s in parsed.scenario.dc_feeders if s.feeder.module is not None]
        if args.feeder:
            candidates = [s for s in candidates if s.feeder.id == args.feeder]
        if not candidates:
            raise ScenarioError("no DC feeder with a series module matches the request")
        setup = candidates[0]
        module = setup.feeder.module
        return SmallSignalParams(
            l=setup.feeder.l, r=setup.feeder.r, c=parsed.scenario.hub.params.c_dc,
            kp=module.kp, ki=module.ki, kl=module.kl, kc=module.kc, kr=module.kr,
            z=setup.z_loop_ohm)
    missing = [name for name, v in (("--l-henry", args.l_henry),
                                    ("--r-ohm", args.r_ohm),
                                    ("--c-farad", args.c_farad)) if v is None]
    if missing:
        raise ScenarioError(f"stability needs {' '.join(missing)} (or --scenario)")
    return SmallSignalParams(
        l=args.l_henry, r=args.r_ohm, c=args.c_farad,
        kp=args.kp, ki=args.ki, kl=args.kl, kc=args.kc, kr=args.kr, z=args.z_ohm)


def _bode_configs(p):
    """Baseline, ripple-mitigated, and inertia-enhanced gain sets."""
    base = SmallSignalParams(l=p.l, r=p.r, c=p.c, kp=p.kp, ki=p.ki,
                             kl=0.0, kc=0.0, kr=0.0, z=p.z)
    ripple = SmallSignalParams(l=p.l, r=p.r, c=p.c, kp=p.kp, ki=p.ki,
                               kl=0.0, kc=0.0, kr=p.kr, z=p.z)
    inertia = SmallSignalParams(l=p.l, r=p.r, c=p.c, kp=p.kp, ki=p.ki,
                                kl=p.kl, kc=p.kc, kr=0.0, z=p.z)
    return {"baseline": base, "ripple": ripple, "inertia": inertia}


def write_bode_csv(params, path, f_min, f_max, points):
    configs = _bode_configs(params)
    tables = {}
    for label, cfg in configs.items():
        tables[f"{label}_current"] = bode_sample(closed_loop_tf(cfg), f_min, f_max, points)
        tables[f"{label}_link"] = bode_sample(vic_tf(cfg.c, cfg.kc, cfg.z),
                                              f_min, f_max, points)
    freqs = [row[0] for row in next(iter(tables.values()))]
    header = ["f_hz"]
    for name in tables:
        header += [f"{name}_gain_db", f"{name}_phase_deg"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, f in enumerate(freqs):
            row = [format_float(f)]
            for name in tables:
                row += [format_float(tables[name][i][1]), format_float(tables[name][i][2])]
            writer.writerow(row)
    return freqs, tables


def cmd_stability(args):
    params = _stability_params(args)
    poly = characteristic_poly(params)
    roots = poles(poly)
    print(f"characteristic polynomial: a2={format_float(poly[0])} "
          f"a1={format_float(poly[1])} a0={format_float(poly[2])}")
    print(f"poles: {roots[0]:.6g} {roots[1]:.6g}")
    print(f"damping condition: {classify_stability(params)} "
          f"(margin={format_float(stability_margin(params))})")
    print(f"inertia voltage loop: {'stable' if vic_stable(params.c, params.kc, params.z) else 'unstable'} "
          f"(k_c={format_float(params.kc)}, z*c={format_float(params.z * params.c)})")
    print(f"current-loop pole: {format_float(current_loop_pole(params.r, params.l, params.kl))} 1/s")
    if args.filtered_ripple_hz:
        import numpy as np

        tf = closed_loop_tf_filtered(params, args.filtered_ripple_hz)
        roots = ", ".join(f"{r:.6g}" for r in np.roots(tf.den))
        verdict = "stable" if filtered_loop_stable(params, args.filtered_ripple_hz) else "unstable"
        print(f"filtered-ripple loop ({args.filtered_ripple_hz} Hz high-pass): "
              f"{verdict}; poles: {roots}")
    if args.bode:
        freqs, tables = write_bode_csv(params, args.bode, args.f_min, args.f_max, args.points)
        print(f"bode tables: {args.bode}")
        if not args.no_figures:
            from . import figures

            curves = {name: ([r[1] for r in rows], [r[2] for r in rows])
                      for name, rows in tables.items() if name.endswith("_link")}
            png = os.path.splitext(args.bode)[0] + ".png"
            figures.render_bode(freqs, curves, png)
            print(f"bode figure: {png}")
    return 0


def _sweep_workers(n_jobs):
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            raise ScenarioError(f"{THREADS_ENV} must be an integer, got {env!r}")
    else:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_jobs))


def cmd_sweep(args):
    parsed = parse_scenario(args.scenario)
    try:
        values = [json.loads(v) for v in args.values]
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"sweep values must be JSON literals: {exc}")

    jobs = []
    for value in values:
        norm = apply_override(parsed.normalized, args.param, value)
        scenario = build_scenario(norm)
        scenario.validate()
        jobs.append((value, scenario))

    def run_one(job):
        value, scenario = job
        trace = run_scenario(scenario)
        return value, summarize(scenario, trace)

    with ThreadPoolExecutor(max_workers=_sweep_workers(len(jobs))) as pool:
        results = list(pool.map(run_one, jobs))

    keys = sorted({k for _, summary in results for k in summary})
    out_dir = Path(args.out) / parsed.name
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "sweep.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([args.param] + keys)
        for value, summary in results:
            row = [json.dumps(value)]
            for key in keys:
                v = summary.get(key)
                if v is None:
                    row.append("")
                elif isinstance(v, float):
                    row.append(format_float(v))
                else:
                    row.append(str(v))
            writer.writerow(row)
    print(f"sweep table: {csv_path}")
    if not args.no_figures:
        numeric = [k for k in keys
                   if all(isinstance(s.get(k), (int, float)) for _, s in results)]
        if numeric and all(isinstance(v, (int, float)) for v, _ in results):
            from . import figures

            metrics = {k: [s[k] for _, s in results] for k in numeric[:6]}
            png = out_dir / "sweep.png"
            figures.render_sweep([v for v, _ in results], metrics, args.param, png)
            print(f"sweep figure: {png}")
    return 0


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "stability":
            return cmd_stability(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        if args.command == "scenarios":
            for name in bundled_scenario_names():
                print(name)
            return 0
        parser.error(f"unknown command {args.command!r}")
    except (ScenarioError, GridRouterError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())
