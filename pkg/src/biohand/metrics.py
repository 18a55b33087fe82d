"""Run records: per-tick series, contact events, and derived aggregates.

One record captures a whole closed-loop run at control-tick resolution.
Contact forces are sampled every simulation substep; each tick stores
the per-fingertip maximum and the event mean over its substeps, so the
run aggregates (max force, mean force) are exactly recomputable from
the stored series. Wall-clock timing lives only in the sibling summary
file, never in the CSV, which keeps equal-seed runs byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .contact import ContactEvent

__all__ = ["MetricsRecord", "contact_dispersion", "write_metrics_csv", "write_summary"]


def contact_dispersion(events: list[ContactEvent]) -> float | None:
    """RMS distance of contact points from their per-fingertip centroids.

    Pools the squared distances across fingertips. Returns None when
    there are no events (absent metric, distinct from a zero).
    """
    if not events:
        return None
    by_tip: dict[str, list[np.ndarray]] = {}
    for ev in events:
        by_tip.setdefault(ev.fingertip, []).append(ev.point)
    total = 0.0
    count = 0
    for pts in by_tip.values():
        arr = np.stack(pts)
        centroid = arr.mean(axis=0)
        total += float(np.sum((arr - centroid) ** 2))
        count += arr.shape[0]
    return float(np.sqrt(total / count))


@dataclass
class MetricsRecord:
    """Everything one run produced. Series arrays share the tick axis."""

    scenario_name: str
    controller_type: str
    seed: int
    tip_names: list[str]
    tick: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    t: np.ndarray = field(default_factory=lambda: np.zeros(0))
    e_rms: np.ndarray = field(default_factory=lambda: np.zeros(0))
    eps_rms: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ks_mean: np.ndarray = field(default_factory=lambda: np.zeros(0))
    kd_mean: np.ndarray = field(default_factory=lambda: np.zeros(0))
    v_mean: np.ndarray = field(default_factory=lambda: np.zeros(0))
    tip_force: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    n_events: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    f_event_mean: np.ndarray = field(default_factory=lambda: np.zeros(0))
    progress: np.ndarray = field(default_factory=lambda: np.zeros(0))
    events: list[ContactEvent] = field(default_factory=list)
    success: bool = False
    fault: str | None = None
    wall_time_mean: float = 0.0
    wall_time_max: float = 0.0

    @property
    def n_ticks(self) -> int:
        return int(self.tick.shape[0])

    def max_contact_force(self) -> float:
        if self.n_ticks == 0 or self.tip_force.size == 0:
            return 0.0
        return float(self.tip_force.max())

    def mean_contact_force(self) -> float:
        total_events = int(self.n_events.sum())
        if total_events == 0:
            return 0.0
        return float(np.sum(self.f_event_mean * self.n_events) / total_events)

    def articulation_progress(self) -> float:
        return float(self.progress[-1]) if self.n_ticks else 0.0

    def dispersion(self) -> float | None:
        return contact_dispersion(self.events)

    def aggregates(self) -> dict:
        disp = self.dispersion()
        return {
            "max_contact_force": self.max_contact_force(),
            "mean_contact_force": self.mean_contact_force(),
            "contact_dispersion": disp,
            "articulation_progress": self.articulation_progress(),
            "success": self.success,
        }


def write_metrics_csv(record: MetricsRecord, path) -> None:
    """Per-tick CSV plus a trailing commented aggregate block.

    Deterministic for a deterministic record: full-precision repr floats,
    LF endings, no timing data.
    """
    cols = ["tick", "t", "e_rms", "eps_rms", "ks_mean", "kd_mean", "v_mean"]
    cols += [f"f_{name}" for name in record.tip_names]
    cols += ["n_events", "f_event_mean", "progress"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(record.n_ticks):
            row = [str(int(record.tick[i])), repr(float(record.t[i]))]
            row += [
                repr(float(a[i]))
                for a in (record.e_rms, record.eps_rms, record.ks_mean, record.kd_mean, record.v_mean)
            ]
            row += [repr(float(v)) for v in record.tip_force[i]]
            row += [str(int(record.n_events[i])), repr(float(record.f_event_mean[i]))]
            row += [repr(float(record.progress[i]))]
            fh.write(",".join(row) + "\n")
        agg = record.aggregates()
        fh.write(f"# max_contact_force,{agg['max_contact_force']!r}\n")
        fh.write(f"# mean_contact_force,{agg['mean_contact_force']!r}\n")
        disp = agg["contact_dispersion"]
        fh.write(f"# contact_dispersion,{'' if disp is None else repr(disp)}\n")
        fh.write(f"# articulation_progress,{agg['articulation_progress']!r}\n")
        fh.write(f"# success,{str(record.success).lower()}\n")
        if record.fault:
            fh.write(f"# fault,{record.fault}\n")


def write_summary(record: MetricsRecord, path) -> None:
    """Sibling summary: aggregates plus measured wall-time statistics."""
    agg = record.aggregates()
    payload = {
        "scenario": record.scenario_name,
        "controller": record.controller_type,
        "seed": record.seed,
        "ticks": record.n_ticks,
        "max_contact_force": agg["max_contact_force"],
        "mean_contact_force": agg["mean_contact_force"],
        "contact_dispersion": agg["contact_dispersion"],
        "articulation_progress": agg["articulation_progress"],
        "success": record.success,
        "fault": record.fault,
        "controller_step_wall_time_mean_s": record.wall_time_mean,
        "controller_step_wall_time_max_s": record.wall_time_max,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
