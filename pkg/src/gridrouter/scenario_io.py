"""Scenario file parsing, validation, and canonical emission.

Scenario files are versioned JSON with sections network, hub,
controllers, loads, events, and output. Field names carry their SI unit
as a suffix (r_ohm, l_henry, p_watt, ...). Unknown keys are rejected
with the JSON path of the offence, every injected default is recorded
so reports can echo it, and `emit_canonical` produces a normalized form
that reparses to an equal scenario.
"""

import hashlib
import json
import math
from dataclasses import dataclass
from importlib import resources

from .core import AcFeeder, DcFeeder, GridRouterError, HubParams, Impedance, phasor_from_polar
from .dc_dynamics import LoadModel
from .engine import (
    EVENT_KINDS,
    HUB_TARGET,
    MODE_DROOP,
    MODE_NONE,
    MODE_SERIES,
    MODES,
    AcFeederSetup,
    DcFeederSetup,
    Event,
    HubSetup,
    Scenario,
)
from .hub import BessState
from .series_control import (
    DEFAULT_KI,
    DEFAULT_KP,
    DEFAULT_RIPPLE_CUTOFF_HZ,
    AcSeriesModuleState,
    DcSeriesModuleState,
)

SCHEMA_VERSION = 1

DEFAULT_DT_S = 1e-4
DEFAULT_F_HZ = 50.0
DEFAULT_AC_BUS_V = 230.0
V_MAX_FRACTION = 0.1          # default injection ceiling, fraction of nominal


class ScenarioError(GridRouterError):
    """Invalid scenario file; the message carries the JSON path."""


def _fail(path, message):
    raise ScenarioError(f"{path}: {message}")


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


class _Ctx:
    """Collects every injected default as (path, value) for the report."""

    def __init__(self):
        self.defaults = []

    def default(self, path, value):
        self.defaults.append({"path": path, "value": value})
        return value


def _check_keys(obj, path, allowed):
    if not isinstance(obj, dict):
        _fail(path, f"expected an object, got {type(obj).__name__}")
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        _fail(path, f"unknown field(s) {unknown}")


_MISSING = object()


def _num(obj, path, key, ctx=None, default=_MISSING, minimum=None, above=None, at_most=None):
    if key not in obj:
        if default is _MISSING:
            _fail(path, f"missing required field {key!r}")
        if ctx is not None:
            ctx.default(f"{path}.{key}", default)
        return default
    v = obj[key]
    if not _is_number(v):
        _fail(f"{path}.{key}", f"expected a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        _fail(f"{path}.{key}", "must be finite")
    if minimum is not None and v < minimum:
        _fail(f"{path}.{key}", f"must be >= {minimum}, got {v}")
    if above is not None and v <= above:
        _fail(f"{path}.{key}", f"must be > {above}, got {v}")
    if at_most is not None and v > at_most:
        _fail(f"{path}.{key}", f"must be <= {at_most}, got {v}")
    return v


def _intval(obj, path, key, ctx=None, default=_MISSING, minimum=None):
    if key not in obj:
        if default is _MISSING:
            _fail(path, f"missing required field {key!r}")
        if ctx is not None:
            ctx.default(f"{path}.{key}", default)
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        _fail(f"{path}.{key}", f"expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        _fail(f"{path}.{key}", f"must be >= {minimum}, got {v}")
    return v


def _text(obj, path, key, ctx=None, default=_MISSING, choices=None):
    if key not in obj:
        if default is _MISSING:
            _fail(path, f"missing required field {key!r}")
        if ctx is not None:
            ctx.default(f"{path}.{key}", default)
        return default
    v = obj[key]
    if not isinstance(v, str):
        _fail(f"{path}.{key}", f"expected a string, got {v!r}")
    if choices is not None and v not in choices:
        _fail(f"{path}.{key}", f"expected one of {sorted(choices)}, got {v!r}")
    return v


def _flag(obj, path, key, ctx=None, default=_MISSING):
    if key not in obj:
        if default is _MISSING:
            _fail(path, f"missing required field {key!r}")
        if ctx is not None:
            ctx.default(f"{path}.{key}", default)
        return default
    v = obj[key]
    if not isinstance(v, bool):
        _fail(f"{path}.{key}", f"expected true/false, got {v!r}")
    return v


def _array(obj, path, key, ctx=None, default=_MISSING):
    if key not in obj:
        if default is _MISSING:
            _fail(path, f"missing required field {key!r}")
        if ctx is not None:
            ctx.default(f"{path}.{key}", default)
        return default
    v = obj[key]
    if not isinstance(v, list):
        _fail(f"{path}.{key}", f"expected an array, got {v!r}")
    return v


# -- section normalizers ----------------------------------------------------


def _norm_ac_line(raw, path):
    _check_keys(raw, path, ("r_ohm", "x_ohm", "l_henry"))
    r = _num(raw, path, "r_ohm", minimum=0.0)
    has_x = "x_ohm" in raw
    has_l = "l_henry" in raw
    if has_x and has_l:
        _fail(path, "give x_ohm or l_henry, not both")
    if not has_x and not has_l:
        _fail(path, "needs x_ohm or l_henry")
    out = {"r_ohm": r}
    if has_l:
        out["l_henry"] = _num(raw, path, "l_henry", above=0.0)
    else:
        out["x_ohm"] = _num(raw, path, "x_ohm")
    if r == 0.0 and out.get("x_ohm", 1.0) == 0.0:
        _fail(path, "line impedance magnitude must be > 0")
    return out


def _norm_dc_line(raw, path):
    _check_keys(raw, path, ("r_ohm", "l_henry"))
    return {
        "r_ohm": _num(raw, path, "r_ohm", minimum=0.0),
        "l_henry": _num(raw, path, "l_henry", above=0.0),
    }


def _norm_load(raw, path, allow_tag):
    allowed = ["kind", "r_ohm", "p_watt", "v_floor_volt", "i_amp", "delta_i_amp", "f_hz"]
    if allow_tag:
        allowed.append("tag")
    _check_keys(raw, path, allowed)
    kind = _text(raw, path, "kind", choices=LoadModel.KINDS)
    out = {"kind": kind}
    if allow_tag and "tag" in raw:
        out["tag"] = _text(raw, path, "tag")
    if kind == "resistive":
        out["r_ohm"] = _num(raw, path, "r_ohm", above=0.0)
    elif kind == "constant_power":
        out["p_watt"] = _num(raw, path, "p_watt")
        out["v_floor_volt"] = _num(raw, path, "v_floor_volt", default=1.0, above=0.0)
    elif kind == "constant_current":
        out["i_amp"] = _num(raw, path, "i_amp")
    else:
        out["delta_i_amp"] = _num(raw, path, "delta_i_amp", minimum=0.0)
        out["f_hz"] = _num(raw, path, "f_hz", above=0.0)
    return out


def _load_model(norm):
    kind = norm["kind"]
    if kind == "resistive":
        return LoadModel.resistive(norm["r_ohm"])
    if kind == "constant_power":
        return LoadModel.constant_power(norm["p_watt"], norm["v_floor_volt"])
    if kind == "constant_current":
        return LoadModel.constant_current(norm["i_amp"])
    return LoadModel.ripple(norm["delta_i_amp"], 2.0 * math.pi * norm["f_hz"])


def _norm_controller(raw, path, ctx, nominal_v, is_dc):
    allowed = ["mode", "kp", "ki", "v_max_volt", "droop_ohm", "use_mismatch_feedforward"]
    if is_dc:
        allowed += ["kr", "kc", "kl", "ripple_filter_hz", "z_loop_ohm"]
    _check_keys(raw, path, allowed)
    out = {
        "mode": _text(raw, path, "mode", ctx, default=MODE_SERIES, choices=MODES),
        "kp": _num(raw, path, "kp", ctx, default=DEFAULT_KP, minimum=0.0),
        "ki": _num(raw, path, "ki", ctx, default=DEFAULT_KI, minimum=0.0),
        "v_max_volt": _num(raw, path, "v_max_volt", ctx,
                           default=V_MAX_FRACTION * nominal_v, above=0.0),
        "droop_ohm": _num(raw, path, "droop_ohm", ctx, default=0.0, minimum=0.0),
        "use_mismatch_feedforward": _flag(raw, path, "use_mismatch_feedforward",
                                          ctx, default=False),
    }
    if is_dc:
        out["kr"] = _num(raw, path, "kr", ctx, default=0.0, minimum=0.0)
        out["kc"] = _num(raw, path, "kc", ctx, default=0.0, minimum=0.0)
        out["kl"] = _num(raw, path, "kl", ctx, default=0.0, minimum=0.0)
        out["ripple_filter_hz"] = _num(raw, path, "ripple_filter_hz", ctx,
                                       default=DEFAULT_RIPPLE_CUTOFF_HZ, above=0.0)
        out["z_loop_ohm"] = _num(raw, path, "z_loop_ohm", ctx, default=1.0, above=0.0)
    return out


_EVENT_FIELDS = {
    "p_ref_step": ("p_watt",),
    "q_ref_step": ("q_var",),
    "load_step": ("load",),
    "voltage_sag": ("fraction", "duration_s"),
    "ripple_enable": ("delta_i_amp", "f_hz"),
    "impedance_change": ("line",),
    "feeder_bypass": (),
}


def _norm_event(raw, path, duration, ac_ids, dc_ids):
    base = ("time_s", "kind", "feeder")
    kind = _text(raw, path, "kind", choices=EVENT_KINDS)
    _check_keys(raw, path, base + _EVENT_FIELDS[kind])
    out = {
        "time_s": _num(raw, path, "time_s", minimum=0.0, at_most=duration),
        "kind": kind,
        "feeder": _text(raw, path, "feeder"),
    }
    fid = out["feeder"]
    if kind == "load_step":
        if fid != HUB_TARGET and fid not in ac_ids | dc_ids:
            _fail(f"{path}.feeder", f"unknown feeder {fid!r} (use {HUB_TARGET!r} for the bus load)")
        if not isinstance(raw.get("load"), dict):
            _fail(path, "load_step needs a load object")
        out["load"] = _norm_load(raw["load"], f"{path}.load", allow_tag=False)
        return out
    if fid not in ac_ids | dc_ids:
        _fail(f"{path}.feeder", f"unknown feeder {fid!r}")
    if kind == "p_ref_step":
        out["p_watt"] = _num(raw, path, "p_watt")
    elif kind == "q_ref_step":
        if fid not in ac_ids:
            _fail(f"{path}.feeder", "q_ref_step applies to AC feeders only")
        out["q_var"] = _num(raw, path, "q_var")
    elif kind == "voltage_sag":
        fraction = _num(raw, path, "fraction", above=0.0, at_most=1.0)
        out["fraction"] = fraction
        out["duration_s"] = _num(raw, path, "duration_s", above=0.0)
    elif kind == "ripple_enable":
        out["delta_i_amp"] = _num(raw, path, "delta_i_amp", minimum=0.0)
        out["f_hz"] = _num(raw, path, "f_hz", above=0.0)
    elif kind == "impedance_change":
        if not isinstance(raw.get("line"), dict):
            _fail(path, "impedance_change needs a line object")
        if fid in dc_ids:
            out["line"] = _norm_dc_line(raw["line"], f"{path}.line")
        else:
            out["line"] = _norm_ac_line(raw["line"], f"{path}.line")
    return out


def normalize(raw, default_name="scenario"):
    """Validate a raw scenario dict and materialize every default.

    Returns (normalized_dict, defaults_applied). Normalizing an already
    normalized document injects nothing and returns an equal dict.
    """
    ctx = _Ctx()
    _check_keys(raw, "$", ("schema", "name", "duration_s", "dt_s", "f_hz",
                           "ac_bus_v_volt", "network", "hub", "controllers",
                           "loads", "events", "output"))
    schema = _intval(raw, "$", "schema")
    if schema != SCHEMA_VERSION:
        _fail("$.schema", f"unsupported version {schema}, expected {SCHEMA_VERSION}")
    out = {"schema": SCHEMA_VERSION}
    out["name"] = _text(raw, "$", "name", ctx, default=default_name)
    duration = _num(raw, "$", "duration_s", above=0.0)
    out["duration_s"] = duration
    out["dt_s"] = _num(raw, "$", "dt_s", ctx, default=DEFAULT_DT_S, above=0.0)
    out["f_hz"] = _num(raw, "$", "f_hz", ctx, default=DEFAULT_F_HZ, above=0.0)
    out["ac_bus_v_volt"] = _num(raw, "$", "ac_bus_v_volt", ctx,
                                default=DEFAULT_AC_BUS_V, above=0.0)

    network = raw.get("network")
    if not isinstance(network, dict):
        _fail("$.network", "missing or not an object")
    _check_keys(network, "$.network", ("ac_feeders", "dc_feeders"))
    ac_raw = _array(network, "$.network", "ac_feeders", ctx, default=[])
    dc_raw = _array(network, "$.network", "dc_feeders", ctx, default=[])

    hub_raw = raw.get("hub")
    if not isinstance(hub_raw, dict):
        _fail("$.hub", "missing or not an object")
    _check_keys(hub_raw, "$.hub", ("v_dc_volt", "c_farad", "stiff_bus",
                                   "collapse_fraction", "afe", "bess"))
    hub = {
        "v_dc_volt": _num(hub_raw, "$.hub", "v_dc_volt", above=0.0),
        "c_farad": _num(hub_raw, "$.hub", "c_farad", above=0.0),
        "stiff_bus": _flag(hub_raw, "$.hub", "stiff_bus", ctx, default=False),
        "collapse_fraction": _num(hub_raw, "$.hub", "collapse_fraction", ctx,
                                  default=0.5, minimum=0.0, at_most=1.0),
    }
    afe_raw = hub_raw.get("afe", None)
    if afe_raw is None:
        afe_raw = {}
        ctx.default("$.hub.afe", {})
    _check_keys(afe_raw, "$.hub.afe", ("enabled", "kp", "ki", "i_limit_amp",
                                       "v_d_volt", "loss_factor"))
    hub["afe"] = {
        "enabled": _flag(afe_raw, "$.hub.afe", "enabled", ctx, default=True),
        "kp": _num(afe_raw, "$.hub.afe", "kp", ctx, default=2.0, minimum=0.0),
        "ki": _num(afe_raw, "$.hub.afe", "ki", ctx, default=200.0, minimum=0.0),
        "v_d_volt": _num(afe_raw, "$.hub.afe", "v_d_volt", ctx, default=325.0, above=0.0),
        "loss_factor": _num(afe_raw, "$.hub.afe", "loss_factor", ctx,
                            default=1.0, above=0.0, at_most=1.0),
    }
    if "i_limit_amp" in afe_raw:
        hub["afe"]["i_limit_amp"] = _num(afe_raw, "$.hub.afe", "i_limit_amp", above=0.0)
    if "bess" in hub_raw:
        bess_raw = hub_raw["bess"]
        _check_keys(bess_raw, "$.hub.bess", ("capacity_coulomb", "v_volt",
                                             "p_limit_watt", "soc0", "kv_watt_per_volt"))
        hub["bess"] = {
            "capacity_coulomb": _num(bess_raw, "$.hub.bess", "capacity_coulomb", minimum=0.0),
            "v_volt": _num(bess_raw, "$.hub.bess", "v_volt", above=0.0),
            "p_limit_watt": _num(bess_raw, "$.hub.bess", "p_limit_watt", minimum=0.0),
            "soc0": _num(bess_raw, "$.hub.bess", "soc0", ctx, default=0.5,
                         minimum=0.0, at_most=1.0),
            "kv_watt_per_volt": _num(bess_raw, "$.hub.bess", "kv_watt_per_volt", ctx,
                                     default=0.0, minimum=0.0),
        }
    out["hub"] = hub

    ac_ids, dc_ids = set(), set()
    ac_out = []
    for idx, feeder in enumerate(ac_raw):
        path = f"$.network.ac_feeders[{idx}]"
        _check_keys(feeder, path, ("id", "v_volt", "angle_rad", "line",
                                   "p_ref_watt", "q_ref_var"))
        fid = _text(feeder, path, "id")
        if fid in ac_ids | dc_ids or fid == HUB_TARGET:
            _fail(f"{path}.id", f"duplicate or reserved feeder id {fid!r}")
        ac_ids.add(fid)
        if not isinstance(feeder.get("line"), dict):
            _fail(f"{path}.line", "missing or not an object")
        ac_out.append({
            "id": fid,
            "v_volt": _num(feeder, path, "v_volt", above=0.0),
            "angle_rad": _num(feeder, path, "angle_rad", ctx, default=0.0),
            "line": _norm_ac_line(feeder["line"], f"{path}.line"),
            "p_ref_watt": _num(feeder, path, "p_ref_watt", ctx, default=0.0),
            "q_ref_var": _num(feeder, path, "q_ref_var", ctx, default=0.0),
        })
    dc_out = []
    for idx, feeder in enumerate(dc_raw):
        path = f"$.network.dc_feeders[{idx}]"
        _check_keys(feeder, path, ("id", "v_volt", "line", "p_ref_watt", "i0_amp"))
        fid = _text(feeder, path, "id")
        if fid in ac_ids | dc_ids or fid == HUB_TARGET:
            _fail(f"{path}.id", f"duplicate or reserved feeder id {fid!r}")
        dc_ids.add(fid)
        if not isinstance(feeder.get("line"), dict):
            _fail(f"{path}.line", "missing or not an object")
        dc_out.append({
            "id": fid,
            "v_volt": _num(feeder, path, "v_volt", above=0.0),
            "line": _norm_dc_line(feeder["line"], f"{path}.line"),
            "p_ref_watt": _num(feeder, path, "p_ref_watt", ctx, default=0.0),
            "i0_amp": _num(feeder, path, "i0_amp", ctx, default=0.0),
        })
    out["network"] = {"ac_feeders": ac_out, "dc_feeders": dc_out}

    controllers_raw = raw.get("controllers", None)
    if controllers_raw is None:
        controllers_raw = {}
        ctx.default("$.controllers", {})
    if not isinstance(controllers_raw, dict):
        _fail("$.controllers", "expected an object keyed by feeder id")
    controllers = {}
    for fid, entry in controllers_raw.items():
        path = f"$.controllers.{fid}"
        if fid not in ac_ids | dc_ids:
            _fail(path, f"unknown feeder id {fid!r}")
        nominal = hub["v_dc_volt"] if fid in dc_ids else next(
            f["v_volt"] for f in ac_out if f["id"] == fid)
        controllers[fid] = _norm_controller(entry, path, ctx, nominal, fid in dc_ids)
    out["controllers"] = controllers

    loads_raw = _array(raw, "$", "loads", ctx, default=[])
    loads = []
    tags = set()
    for idx, load in enumerate(loads_raw):
        path = f"$.loads[{idx}]"
        norm = _norm_load(load, path, allow_tag=True)
        tag = norm.setdefault("tag", HUB_TARGET)
        if tag in tags:
            _fail(f"{path}.tag", f"duplicate load tag {tag!r}")
        tags.add(tag)
        loads.append(norm)
    out["loads"] = loads

    events_raw = _array(raw, "$", "events", ctx, default=[])
    events = []
    prev_t = 0.0
    for idx, event in enumerate(events_raw):
        path = f"$.events[{idx}]"
        norm = _norm_event(event, path, duration, ac_ids, dc_ids)
        if norm["time_s"] < prev_t:
            _fail(f"{path}.time_s", "events must be time-ordered")
        prev_t = norm["time_s"]
        events.append(norm)
    out["events"] = events

    output_raw = raw.get("output", None)
    if output_raw is None:
        output_raw = {}
        ctx.default("$.output", {})
    _check_keys(output_raw, "$.output", ("record_every", "compare"))
    output = {"record_every": _intval(output_raw, "$.output", "record_every",
                                      ctx, default=1, minimum=1)}
    if "compare" in output_raw:
        cmp_raw = output_raw["compare"]
        _check_keys(cmp_raw, "$.output.compare", ("label", "overrides"))
        label = _text(cmp_raw, "$.output.compare", "label")
        overrides = cmp_raw.get("overrides")
        if not isinstance(overrides, dict) or not overrides:
            _fail("$.output.compare.overrides", "expected a non-empty object")
        output["compare"] = {"label": label, "overrides": overrides}
    out["output"] = output
    return out, ctx.defaults


def build_scenario(norm):
    """Construct an engine Scenario from a normalized scenario dict."""
    omega = 2.0 * math.pi * norm["f_hz"]
    controllers = norm["controllers"]
    hub_v = norm["hub"]["v_dc_volt"]

    ac_setups = []
    for f in norm["network"]["ac_feeders"]:
        line_raw = f["line"]
        if "l_henry" in line_raw:
            line = Impedance.from_rl(line_raw["r_ohm"], line_raw["l_henry"], omega)
        else:
            line = Impedance(line_raw["r_ohm"], line_raw["x_ohm"])
        ctl = controllers.get(f["id"])
        module = None
        mode = MODE_NONE
        droop = 0.0
        use_ff = False
        if ctl is not None:
            mode = ctl["mode"]
            droop = ctl["droop_ohm"]
            use_ff = ctl["use_mismatch_feedforward"]
            if mode == MODE_SERIES:
                module = AcSeriesModuleState(kp=ctl["kp"], ki=ctl["ki"],
                                             v_max=ctl["v_max_volt"])
        feeder = AcFeeder(
            id=f["id"],
            source=phasor_from_polar(f["v_volt"], f["angle_rad"]),
            line=line, module=module,
            p_ref=f["p_ref_watt"], q_ref=f["q_ref_var"])
        ac_setups.append(AcFeederSetup(feeder, mode, droop, use_ff))

    dc_setups = []
    for f in norm["network"]["dc_feeders"]:
        ctl = controllers.get(f["id"])
        module = None
        mode = MODE_NONE
        droop = 0.0
        use_ff = False
        ripple_hz = DEFAULT_RIPPLE_CUTOFF_HZ
        z_loop = 1.0
        if ctl is not None:
            mode = ctl["mode"]
            droop = ctl["droop_ohm"]
            use_ff = ctl["use_mismatch_feedforward"]
            ripple_hz = ctl["ripple_filter_hz"]
            z_loop = ctl["z_loop_ohm"]
            if mode == MODE_SERIES:
                module = DcSeriesModuleState(
                    kp=ctl["kp"], ki=ctl["ki"], kr=ctl["kr"], kc=ctl["kc"],
                    kl=ctl["kl"], v_max=ctl["v_max_volt"])
        feeder = DcFeeder(
            id=f["id"], v_source=f["v_volt"],
            r=f["line"]["r_ohm"], l=f["line"]["l_henry"],
            module=module, i_meas=f["i0_amp"])
        dc_setups.append(DcFeederSetup(
            feeder, mode, droop, p_ref=f["p_ref_watt"],
            use_mismatch_feedforward=use_ff,
            ripple_filter_hz=ripple_hz, z_loop_ohm=z_loop))

    hub_raw = norm["hub"]
    bess = None
    bess_kv = 0.0
    params = HubParams(v_dc=hub_raw["v_dc_volt"], c_dc=hub_raw["c_farad"])
    if "bess" in hub_raw:
        b = hub_raw["bess"]
        params = HubParams(
            v_dc=hub_raw["v_dc_volt"], c_dc=hub_raw["c_farad"],
            q_battery=b["capacity_coulomb"], v_battery=b["v_volt"],
            p_bess_limit=b["p_limit_watt"])
        bess = BessState(
            charge=b["soc0"] * b["capacity_coulomb"],
            capacity=b["capacity_coulomb"], v_battery=b["v_volt"],
            p_limit=b["p_limit_watt"])
        bess_kv = b["kv_watt_per_volt"]
    afe = hub_raw["afe"]
    hub = HubSetup(
        params=params,
        stiff_bus=hub_raw["stiff_bus"],
        afe_enabled=afe["enabled"],
        afe_kp=afe["kp"], afe_ki=afe["ki"],
        afe_i_limit=afe.get("i_limit_amp", math.inf),
        afe_v_d=afe["v_d_volt"], afe_loss_factor=afe["loss_factor"],
        bess=bess, bess_kv=bess_kv,
        collapse_fraction=hub_raw["collapse_fraction"])

    loads = {entry["tag"]: _load_model(entry) for entry in norm["loads"]}

    events = []
    for e in norm["events"]:
        kind = e["kind"]
        kwargs = {"time": e["time_s"], "kind": kind, "feeder": e["feeder"]}
        if kind == "p_ref_step":
            kwargs["p_watt"] = e["p_watt"]
        elif kind == "q_ref_step":
            kwargs["q_var"] = e["q_var"]
        elif kind == "load_step":
            kwargs["load"] = _load_model(e["load"])
        elif kind == "voltage_sag":
            kwargs["fraction"] = e["fraction"]
            kwargs["duration"] = e["duration_s"]
        elif kind == "ripple_enable":
            kwargs["delta_i"] = e["delta_i_amp"]
            kwargs["omega"] = 2.0 * math.pi * e["f_hz"]
        elif kind == "impedance_change":
            line = e["line"]
            kwargs["r_ohm"] = line["r_ohm"]
            if "l_henry" in line:
                kwargs["l_henry"] = line["l_henry"]
                kwargs["x_ohm"] = omega * line["l_henry"]
            else:
                kwargs["x_ohm"] = line["x_ohm"]
        events.append(Event(**kwargs))

    return Scenario(
        name=norm["name"],
        duration=norm["duration_s"],
        dt=norm["dt_s"],
        hub=hub,
        f_hz=norm["f_hz"],
        ac_bus_v=norm["ac_bus_v_volt"],
        ac_feeders=ac_setups,
        dc_feeders=dc_setups,
        loads=loads,
        events=events,
        record_every=norm["output"]["record_every"],
        compare=norm["output"].get("compare"),
    )


def emit_canonical(norm):
    """Serialize a normalized scenario dict to its canonical JSON form."""
    return json.dumps(norm, sort_keys=True, indent=2) + "\n"


def apply_override(norm, dotted_path, value):
    """Return a copy of a normalized dict with one parameter replaced.

    The path is dot-separated with integer tokens indexing arrays, e.g.
    'controllers.f1.kc' or 'network.dc_feeders.0.line.r_ohm'. The path
    must resolve to an existing parameter.
    """
    out = json.loads(json.dumps(norm))
    tokens = dotted_path.split(".")
    node = out
    try:
        for tok in tokens[:-1]:
            node = node[int(tok)] if isinstance(node, list) else node[tok]
        leaf = tokens[-1]
        if isinstance(node, list):
            node[int(leaf)]          # index check
            node[int(leaf)] = value
        else:
            if leaf not in node:
                raise KeyError(leaf)
            node[leaf] = value
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise ScenarioError(f"invalid parameter path {dotted_path!r}: {exc}") from exc
    return out


@dataclass
class ParsedScenario:
    """A validated scenario plus the bookkeeping reports need."""

    name: str
    scenario: Scenario
    normalized: dict
    defaults: list
    digest: str
    source: str


def scenario_digest(data):
    return hashlib.sha256(data).hexdigest()


def parse_scenario_bytes(data, name, source="<memory>"):
    try:
        raw = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"{source}: not valid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ScenarioError(f"{source}: top level must be an object")
    norm, defaults = normalize(raw, default_name=name)
    scenario = build_scenario(norm)
    scenario.validate()
    return ParsedScenario(norm["name"], scenario, norm, defaults,
                          scenario_digest(data), source)


def bundled_scenario_names():
    root = resources.files(__package__) / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def read_bundled(name):
    path = resources.files(__package__) / "scenarios" / f"{name}.json"
    if not path.is_file():
        raise ScenarioError(
            f"no bundled scenario {name!r}; available: {', '.join(bundled_scenario_names())}")
    return path.read_bytes()


def resolve_scenario(ref):
    """Resolve a CLI scenario reference to (bytes, name, source).

    A reference is a path to a scenario file or the name of a bundled
    scenario.
    """
    import os

    if os.path.exists(ref):
        with open(ref, "rb") as fh:
            data = fh.read()
        name = os.path.splitext(os.path.basename(ref))[0]
        return data, name, ref
    if "/" not in ref and "\\" not in ref and not ref.endswith(".json"):
        return read_bundled(ref), ref, f"bundled:{ref}"
    raise ScenarioError(f"scenario file not found: {ref}")


def parse_scenario(ref):
    """Parse a scenario from a path or bundled name."""
    data, name, source = resolve_scenario(ref)
    return parse_scenario_bytes(data, name, source)
