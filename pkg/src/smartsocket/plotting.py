"""Figures for the ``report`` command."""
from __future__ import annotations

import datetime as dt

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.ticker import MaxNLocator  # noqa: E402

from . import model  # noqa: E402
from .engine import PatternState  # noqa: E402
from .model import Alarm  # noqa: E402

REPORT_RC = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.bbox": "tight",
}


def activity_grid(event_times: list[dt.datetime], bin_size_minutes: int,
                  extra_days: list[dt.date] = ()):
    """Count events per (day, bin). Returns ``(days, grid)``, grid is days x bins."""
    per_day = model.bins_per_day(bin_size_minutes)
    span = [t.date() for t in event_times] + list(extra_days)
    if not span:
        return [], np.zeros((0, per_day), dtype=int)
    first, last = min(span), max(span)
    days = [first + dt.timedelta(days=i) for i in range((last - first).days + 1)]
    grid = np.zeros((len(days), per_day), dtype=int)
    for t in event_times:
        grid[(t.date() - first).days, model.bin_of(t, bin_size_minutes)] += 1
    return days, grid


def report_figure(socket: str, event_times: list[dt.datetime], states: list[PatternState],
                  alarms: list[Alarm], bin_size_minutes: int, pattern_days: int, path) -> None:
    """Two panels: the event heatmap by day and bin, and current streaks per bin."""
    per_day = model.bins_per_day(bin_size_minutes)
    days, grid = activity_grid(event_times, bin_size_minutes, [a.date for a in alarms])
    with plt.rc_context(REPORT_RC):
        fig, (ax_map, ax_bar) = plt.subplots(
            2, 1, figsize=(7.0, 5.5), gridspec_kw={"height_ratios": [max(len(days), 3), 3]})
        if days:
            im = ax_map.imshow(grid, aspect="auto", cmap="Blues", interpolation="nearest",
                               extent=(-0.5, per_day - 0.5, len(days) - 0.5, -0.5))
            fig.colorbar(im, ax=ax_map, label="switch-on events", fraction=0.04)
            step = max(1, len(days) // 10)
            ax_map.set_yticks(range(0, len(days), step))
            ax_map.set_yticklabels([days[i].isoformat() for i in range(0, len(days), step)])
            for a in alarms:
                row = (a.date - days[0]).days
                ax_map.plot(a.bin, row, marker="x", color="crimson", markersize=9, mew=2,
                            linestyle="none")
        else:
            ax_map.text(0.5, 0.5, "no events", ha="center", va="center",
                        transform=ax_map.transAxes)
        ax_map.set_xlim(-0.5, per_day - 0.5)
        ax_map.set_title(f"socket {socket}: activity by day and time of day")
        ax_map.set_xlabel("bin")

        hits = np.zeros(per_day, dtype=int)
        active = np.zeros(per_day, dtype=bool)
        for s in states:
            hits[s.bin] = s.consecutive_hits
            active[s.bin] = s.active
        colors = np.where(active, "tab:green", "tab:gray")
        ax_bar.bar(np.arange(per_day), hits, color=colors, width=0.8)
        ax_bar.axhline(pattern_days, color="k", linestyle="--", linewidth=0.8,
                       label=f"pattern threshold ({pattern_days} days)")
        ax_bar.set_xlim(-0.5, per_day - 0.5)
        ax_bar.set_ylim(0, max(pattern_days, int(hits.max(initial=0))) + 1)
        ax_bar.set_xlabel("bin")
        ax_bar.set_ylabel("consecutive days")
        ax_bar.yaxis.set_major_locator(MaxNLocator(integer=True))
        ax_bar.legend(loc="upper right", frameon=False)
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)
