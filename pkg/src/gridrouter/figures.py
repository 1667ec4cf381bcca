"""Figure rendering for simulation traces, Bode tables, and sweeps.

Figures are rendered straight to files next to the delimited output;
nothing is shown interactively.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def render_trace(trace, scenario, path):
    """Multi-panel time-series figure of one run."""
    panels = []
    dc_ids = [s.feeder.id for s in scenario.dc_feeders]
    ac_ids = [s.feeder.id for s in scenario.ac_feeders]
    if dc_ids:
        panels.append("dc_current")
        panels.append("v_dc")
        panels.append("dc_injection")
    if ac_ids:
        panels.append("ac_power")
    if not panels:
        panels = ["v_dc"]
    fig, axes = plt.subplots(len(panels), 1, sharex=True,
                             figsize=(8, 2.2 * len(panels)), squeeze=False)
    t = trace.time
    for ax, panel in zip(axes[:, 0], panels):
        if panel == "dc_current":
            for fid in dc_ids:
                ax.plot(t, trace.column(f"dc_{fid}_i_amp"), label=f"{fid} i")
                ax.plot(t, trace.column(f"dc_{fid}_i_ref_amp"), "--",
                        lw=0.8, label=f"{fid} ref")
            ax.set_ylabel("current [A]")
        elif panel == "v_dc":
            ax.plot(t, trace.column("hub_v_dc_volt"), color="k")
            ax.set_ylabel("V_dc [V]")
        elif panel == "dc_injection":
            for fid in dc_ids:
                ax.plot(t, trace.column(f"dc_{fid}_v_inj_volt"), label=fid)
            ax.set_ylabel("v_inj [V]")
        elif panel == "ac_power":
            for fid in ac_ids:
                ax.plot(t, trace.column(f"ac_{fid}_p_watt"), label=f"{fid} P")
                ax.plot(t, trace.column(f"ac_{fid}_q_var"), "--", label=f"{fid} Q")
            ax.set_ylabel("power [W, var]")
        ax.grid(True, alpha=0.3)
        if ax.get_legend_handles_labels()[1]:
            ax.legend(loc="best", fontsize=7)
    axes[-1, 0].set_xlabel("time [s]")
    fig.suptitle(f"{scenario.name} ({trace.verdict})")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_bode(freqs, curves, path, title="DC-link frequency response"):
    """Gain/phase figure; curves maps label -> (gain_db, phase_deg)."""
    fig, (ax_gain, ax_phase) = plt.subplots(2, 1, sharex=True, figsize=(8, 6))
    for label, (gain, phase) in curves.items():
        ax_gain.semilogx(freqs, gain, label=label)
        ax_phase.semilogx(freqs, phase, label=label)
    ax_gain.set_ylabel("gain [dB]")
    ax_phase.set_ylabel("phase [deg]")
    ax_phase.set_xlabel("frequency [Hz]")
    for ax in (ax_gain, ax_phase):
        ax.grid(True, which="both", alpha=0.3)
    ax_gain.legend(loc="best", fontsize=8)
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_sweep(values, metrics, param, path):
    """One panel per swept metric against the parameter value."""
    names = list(metrics)
    fig, axes = plt.subplots(len(names), 1, sharex=True,
                             figsize=(7, 2.0 * len(names)), squeeze=False)
    for ax, name in zip(axes[:, 0], names):
        ax.plot(values, metrics[name], "o-")
        ax.set_ylabel(name, fontsize=8)
        ax.grid(True, alpha=0.3)
    axes[-1, 0].set_xlabel(param)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
