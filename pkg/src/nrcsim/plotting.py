"""Figures rendered next to the CSV output.

Everything goes through the object-oriented Matplotlib API with the Agg
canvas, so nothing here touches pyplot's global state or needs a display.
"""

from __future__ import annotations

import math
from collections import defaultdict
from pathlib import Path
from typing import Sequence

from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .experiments import KoptRow, MaxNrcRow, SweepRow

_AXIS_LABELS = {
    "rho_d_db": r"$\rho_d$ (dB)",
    "n_bs": "BS antennas $N$",
    "nrc_level_db": "NRC level (dB)",
    "k_users": "users $K$",
    "per_ue_antennas": "antennas per UE",
    "single_nrc_param": "NRC parameter (dB)",
}
_STYLE = {("ZF", "analytic"): dict(color="C0", ls="-"),
          ("MRT", "analytic"): dict(color="C3", ls="-"),
          ("ZF", "mc"): dict(color="C0", ls="none", marker="o", mfc="none"),
          ("MRT", "mc"): dict(color="C3", ls="none", marker="s", mfc="none")}


def _new(ncols: int = 1) -> tuple[Figure, list]:
    fig = Figure(figsize=(4.8 * ncols, 3.6), layout="constrained")
    FigureCanvasAgg(fig)
    axes = fig.subplots(1, ncols, squeeze=False)[0]
    return fig, list(axes)


def _save(fig: Figure, path: str | Path) -> Path:
    fig.savefig(path, dpi=120)
    return Path(path)


def _finite(xs, ys, *more):
    keep = [i for i, x in enumerate(xs) if math.isfinite(x) and math.isfinite(ys[i])]
    return [[seq[i] for i in keep] for seq in (xs, ys, *more)]


def plot_sweep(rows: Sequence[SweepRow], path: str | Path, metric: str = "spectral_efficiency",
               log_x: bool = False) -> Path:
    """One panel per distinct ``variable``; analytic as lines, Monte Carlo as markers.

    ``metric`` is ``"spectral_efficiency"`` (taken from the ``sum`` rows) or
    ``"alpha"`` (antenna-averaged, from the ``mean`` rows). Grid values of
    ``-inf`` cannot be drawn and are skipped.
    """
    agg = "sum" if metric == "spectral_efficiency" else "mean"
    panels: dict[str, dict] = defaultdict(lambda: defaultdict(list))
    for r in rows:
        if r.antenna == agg:
            ci = r.ci_halfwidth if metric == "spectral_efficiency" else None
            panels[r.variable][(str(r.precoder), r.engine)].append(
                (r.value, getattr(r, metric), ci, dict(r.extras)))
    fig, axes = _new(max(len(panels), 1))
    for ax, (variable, series) in zip(axes, panels.items()):
        for (prec, engine), pts in series.items():
            xs, ys, cis = _finite([p[0] for p in pts], [p[1] for p in pts], [p[2] for p in pts])
            style = _STYLE.get((prec, engine), {})
            if engine == "mc" and all(c is not None for c in cis):
                ax.errorbar(xs, ys, yerr=cis, label=f"{prec} ({engine})", **style)
            else:
                ax.plot(xs, ys, label=f"{prec} ({engine})", **style)
            sat = [p[3].get("saturation_se_bps_hz") for p in pts]
            if engine == "analytic" and sat and sat[0] is not None and math.isfinite(sat[0]):
                ax.axhline(sat[0], color="k", ls=":", lw=1)
        if any("saturation_se_bps_hz" in p[3] for s in series.values() for p in s):
            ax.plot([], [], color="k", ls=":", lw=1, label="saturation")
        ax.set_xlabel(_AXIS_LABELS.get(variable, f"{variable} (dB)"))
        ax.set_ylabel("spectral efficiency (bit/s/Hz)" if metric == "spectral_efficiency"
                      else r"degradation $\alpha$")
        if log_x:
            ax.set_xscale("log")
        ax.grid(alpha=0.3)
        ax.legend(fontsize=8)
    return _save(fig, path)


def plot_kopt(rows: Sequence[KoptRow], path: str | Path) -> Path:
    series: dict[tuple, list] = defaultdict(list)
    for r in rows:
        series[(str(r.precoder), r.rho_d_db)].append((r.nrc_level_db, r.k_opt))
    fig, (ax,) = _new()
    for (prec, snr), pts in sorted(series.items()):
        xs, ys = _finite([p[0] for p in pts], [p[1] for p in pts])
        ax.step(xs, ys, where="mid", label=rf"{prec}, $\rho_d$={snr:g} dB")
    ax.set_xlabel("NRC level (dB)")
    ax.set_ylabel(r"$K_{\mathrm{opt}}$")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_max_nrc(rows: Sequence[MaxNrcRow], path: str | Path) -> Path:
    series: dict[tuple, list] = defaultdict(list)
    for r in rows:
        if r.feasible:
            series[(str(r.precoder), r.rho_d_db)].append((r.target_sinr_db, r.max_level_db))
    fig, (ax,) = _new()
    for (prec, snr), pts in sorted(series.items()):
        xs, ys = _finite([p[0] for p in pts], [p[1] for p in pts])
        ax.plot(xs, ys, marker=".", label=rf"{prec}, $\rho_d$={snr:g} dB")
    ax.set_xlabel("target SINR (dB)")
    ax.set_ylabel("max tolerable NRC level (dB)")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    return _save(fig, path)
