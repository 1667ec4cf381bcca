"""Hybrid AC-DC multi-feeder grid simulator.

Partial-power series-injection modules steer feeder currents and powers
around a common hub: phasor power flow on the AC side, RL/C dynamics on
the DC side, dq and DC control laws with ripple mitigation and virtual
inertia, small-signal stability analysis, and a scenario engine with a
droop baseline for comparison.
"""

from .ac_power import (
    DqInjection,
    PowerPair,
    approx_power_dq,
    closed_form_gap,
    cross_coupling_terms,
    decoupled_power_dq,
    feeder_power_closed_form,
    feeder_power_exact,
    line_current,
    sensitivity_matrix,
)
from .core import (
    AcFeeder,
    DcFeeder,
    GridRouterError,
    HubParams,
    Impedance,
    Phasor,
    impedance_angle,
    phasor_from_polar,
)
from .dc_dynamics import (
    DcPlantState,
    HoldupTimes,
    LoadModel,
    StateDiverged,
    cpl_current,
    dc_link_derivative,
    effective_ripple,
    holdup_time,
    integrate_step,
    line_current_derivative,
    required_capacitance,
    ripple_voltage,
    rk4_step,
)
from .engine import (
    Event,
    Scenario,
    Trace,
    apply_event,
    ripple_amplitude,
    run_scenario,
)
from .hub import (
    AfeController,
    BessState,
    PartialPowerMetrics,
    afe_power,
    afe_power_aligned,
    bess_step,
    bus_balance_residual,
    dc_feeder_power,
    partial_power_metrics,
)
from .series_control import (
    AcSeriesModuleState,
    DcSeriesModuleState,
    HighPassFilter,
    ac_pi_step,
    ac_reference_currents,
    dc_injection_step,
    dc_mismatch,
    droop_step,
    mismatch_feedforward,
    virtual_inertia_term,
)
from .small_signal import (
    RationalTF,
    SmallSignalParams,
    bode_sample,
    characteristic_poly,
    classify_stability,
    closed_loop_tf,
    closed_loop_tf_filtered,
    current_loop_pole,
    filtered_loop_stable,
    is_stable_condition,
    poles,
    stability_margin,
    vic_stable,
    vic_tf,
)

__version__ = "0.1.0"
