"""Run reports, summary metrics, and delimited trace output.

The trace CSV is RFC-4180 (CRLF rows, header row, '.' decimal
separator) with floats printed as their shortest round-trip decimal, so
identical runs serialize to identical bytes. The report JSON carries
the scenario digest, the verdict, every defaulted parameter, and the
summary metrics the acceptance checks read.
"""

import csv
import json
import math

from .engine import (
    MODE_DROOP,
    MODE_SERIES,
    VERDICT_COLLAPSED,
    VERDICT_COMPLETED,
    VERDICT_DIVERGED,
    ripple_amplitude,
)
from .small_signal import (
    SmallSignalParams,
    classify_stability,
    current_loop_pole,
    stability_margin,
    vic_stable,
)

EXIT_CODES = {
    VERDICT_COMPLETED: 0,
    VERDICT_COLLAPSED: 2,
    VERDICT_DIVERGED: 3,
}

SETTLE_TOLERANCE = 0.02      # fraction of the reference
STEADY_WINDOW_FRACTION = 0.1


def format_float(x):
    """Shortest decimal that round-trips to the same double."""
    return repr(float(x))


def write_trace_csv(trace, path):
    names = list(trace.columns)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in zip(*(trace.columns[n] for n in names)):
            writer.writerow([format_float(v) for v in row])


def settling_time(trace, column, ref_column, t_from, tolerance=SETTLE_TOLERANCE):
    """First time after t_from from which the signal stays within
    tolerance of its reference through the end of the run; None if it
    never settles."""
    time = trace.time
    sig = trace.column(column)
    ref = trace.column(ref_column)
    settled_at = None
    for t, x, r in zip(time, sig, ref):
        if t < t_from:
            continue
        bound = tolerance * abs(r) if r != 0 else tolerance
        if abs(x - r) <= bound:
            if settled_at is None:
                settled_at = t
        else:
            settled_at = None
    if settled_at is None:
        return None
    return settled_at - t_from


def steady_window(trace, fraction=STEADY_WINDOW_FRACTION):
    n = len(trace.time)
    start = max(0, n - max(2, int(n * fraction)))
    return slice(start, n)


def _last_event_time(scenario):
    return max((e.time for e in scenario.events), default=0.0)


def _dc_sharing_error(trace, ids, window):
    """Mean |i_a - i_b| / mean current between the first two feeders."""
    a = trace.column(f"dc_{ids[0]}_i_amp")[window]
    b = trace.column(f"dc_{ids[1]}_i_amp")[window]
    diffs = [abs(x - y) for x, y in zip(a, b)]
    means = [abs(x + y) / 2.0 for x, y in zip(a, b)]
    denom = sum(means) / len(means)
    if denom == 0:
        return None
    return (sum(diffs) / len(diffs)) / denom


def _active_ripple_frequencies(scenario):
    freqs = []
    for load in scenario.loads.values():
        if load.kind == "ripple_source":
            freqs.append(load.omega / (2.0 * math.pi))
    for e in scenario.events:
        if e.kind == "ripple_enable":
            freqs.append(e.omega / (2.0 * math.pi))
    return sorted(set(freqs))


def summarize(scenario, trace):
    """Summary metrics for one run; entries are absent when they do not
    apply to the scenario."""
    summary = {"verdict": trace.verdict}
    if trace.diverged_tick is not None:
        summary["diverged_tick"] = trace.diverged_tick
    window = steady_window(trace)
    t_step = _last_event_time(scenario)

    dc_ids = [s.feeder.id for s in scenario.dc_feeders]
    controlled = [s for s in scenario.dc_feeders if s.mode == MODE_SERIES]
    sharing_ids = [s.feeder.id for s in scenario.dc_feeders
                   if s.mode in (MODE_SERIES, MODE_DROOP)]

    if trace.verdict == VERDICT_COMPLETED:
        for setup in controlled:
            fid = setup.feeder.id
            settle = settling_time(trace, f"dc_{fid}_i_amp", f"dc_{fid}_i_ref_amp", t_step)
            summary[f"settling_time_s.{fid}"] = settle
            sig = trace.column(f"dc_{fid}_i_amp")[window]
            ref = trace.column(f"dc_{fid}_i_ref_amp")[window]
            errs = [abs(x - r) / abs(r) for x, r in zip(sig, ref) if r != 0]
            if errs:
                summary[f"steady_state_error.{fid}"] = sum(errs) / len(errs)
        if len(sharing_ids) >= 2:
            # Sharing only means anything when the members are meant to
            # carry the same current: droop pairs always, series pairs
            # only while their references agree.
            refs = [trace.column(f"dc_{fid}_i_ref_amp")[-1] for fid in sharing_ids
                    for s in scenario.dc_feeders
                    if s.feeder.id == fid and s.mode == MODE_SERIES]
            spread = max(refs) - min(refs) if refs else 0.0
            if spread <= 1e-9 * max(1.0, max(abs(r) for r in refs) if refs else 0.0):
                err = _dc_sharing_error(trace, sharing_ids, window)
                if err is not None:
                    summary["sharing_error"] = err

    if dc_ids:
        v_bus = trace.column("hub_v_dc_volt")
        summary["v_dc_min_volt"] = min(v_bus)
        summary["v_dc_max_volt"] = max(v_bus)
        last = len(trace.time) - 1
        for setup in controlled:
            fid = setup.feeder.id
            i_last = trace.column(f"dc_{fid}_i_amp")[last]
            if abs(i_last) > 1e-9:
                v_inj = trace.column(f"dc_{fid}_v_inj_volt")[last]
                summary[f"partial_power_fraction.{fid}"] = abs(v_inj) / v_bus[last]
        residual = trace.column("hub_balance_residual_watt")[window]
        summary["balance_residual_steady_watt"] = max(abs(r) for r in residual)
        peak = 0.0
        for fid in dc_ids:
            peak = max(peak, max(abs(p) for p in trace.column(f"dc_{fid}_p_watt")))
        summary["peak_transfer_watt"] = peak

    for f_hz in _active_ripple_frequencies(scenario):
        periods = (trace.time[-1] - trace.time[0]) * f_hz
        if periods < 10:
            continue
        # Project over the trailing 20 periods so startup transients do
        # not leak into the amplitude estimate.
        n_tail = int(round(min(periods, 20.0) / (f_hz * trace.dt)))
        for setup in controlled:
            fid = setup.feeder.id
            sig = trace.column(f"dc_{fid}_i_amp")[-n_tail:]
            amp = ripple_amplitude(sig, f_hz, trace.dt)
            summary[f"ripple_amp.{fid}.{f_hz:g}hz"] = amp

    for setup in controlled:
        module = setup.feeder.module
        params = SmallSignalParams(
            l=setup.feeder.l, r=setup.feeder.r, c=scenario.hub.params.c_dc,
            kp=module.kp, ki=module.ki, kl=module.kl, kc=module.kc,
            kr=module.kr, z=setup.z_loop_ohm)
        fid = setup.feeder.id
        summary[f"stability.{fid}.damping"] = classify_stability(params)
        summary[f"stability.{fid}.damping_margin"] = stability_margin(params)
        summary[f"stability.{fid}.vic_stable"] = vic_stable(
            params.c, params.kc, params.z)
        summary[f"stability.{fid}.current_loop_pole"] = current_loop_pole(
            setup.feeder.r, setup.feeder.l, module.kl)

    if "closed_form_gap_max" in trace.meta:
        summary["closed_form_gap_max"] = trace.meta["closed_form_gap_max"]
    return summary


def build_report(parsed, trace, summary, outputs, compare=None):
    """Assemble the report document for one simulate invocation."""
    report = {
        "schema": 1,
        "scenario": parsed.name,
        "source": parsed.source,
        "digest_sha256": parsed.digest,
        "verdict": trace.verdict,
        "exit_code": EXIT_CODES[trace.verdict],
        "defaults_applied": parsed.defaults,
        "summary": summary,
        "outputs": outputs,
    }
    if compare is not None:
        report["compare"] = compare
    return report


def write_report(report, path):
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
