"""Run records: dispersion metric, aggregates, and file outputs."""

import json

import numpy as np
import pytest

from biohand.contact import ContactEvent
from biohand.metrics import (
    MetricsRecord,
    contact_dispersion,
    write_metrics_csv,
    write_summary,
)


def event(tip, point, force=1.0, t=0.0):
    point = np.asarray(point, float)
    return ContactEvent(time=t, fingertip=tip, object_id="obj", point=point,
                        normal=np.array([0.0, 0.0, 1.0]), force_magnitude=force,
                        force=np.array([0.0, 0.0, force]))


def test_dispersion_none_without_events():
    assert contact_dispersion([]) is None


def test_dispersion_zero_for_repeated_point():
    evs = [event("ff_distal", [0.1, 0.2, 0.3]) for _ in range(4)]
    assert contact_dispersion(evs) == 0.0


def test_dispersion_two_points_gives_half_separation():
    # Two points 2d apart share a centroid at the midpoint: RMS distance d.
    d = 0.004
    evs = [event("ff_distal", [-d, 0.0, 0.0]), event("ff_distal", [d, 0.0, 0.0])]
    assert contact_dispersion(evs) == pytest.approx(d, rel=1e-12)


def test_dispersion_pools_per_tip_not_across_tips():
    # Each tip's cluster is tight; tips far apart must not inflate the metric.
    evs = [
        event("ff_distal", [0.0, 0.0, 0.0]),
        event("ff_distal", [0.002, 0.0, 0.0]),
        event("th_distal", [1.0, 1.0, 1.0]),
        event("th_distal", [1.002, 1.0, 1.0]),
    ]
    assert contact_dispersion(evs) == pytest.approx(0.001, rel=1e-12)


def test_dispersion_translation_invariant(rng):
    pts = rng.normal(0.0, 0.01, (12, 3))
    evs = [event("ff_distal", p) for p in pts]
    shifted = [event("ff_distal", p + np.array([5.0, -2.0, 1.0])) for p in pts]
    assert contact_dispersion(shifted) == pytest.approx(contact_dispersion(evs), rel=1e-9)


def make_record(**kw):
    n = 4
    base = dict(
        scenario_name="mini",
        controller_type="adaptive",
        seed=3,
        tip_names=["ff_distal", "th_distal"],
        tick=np.arange(n),
        t=np.arange(n) * 0.01,
        e_rms=np.array([0.1, 0.2, 0.15, 0.05]),
        eps_rms=np.array([1.0, 2.0, 1.5, 0.5]),
        ks_mean=np.array([1.0, 1.1, 1.2, 1.3]),
        kd_mean=np.array([0.1, 0.1, 0.1, 0.1]),
        v_mean=np.array([0.0, 0.01, 0.02, 0.03]),
        tip_force=np.array([[0.0, 0.0], [1.5, 0.2], [2.5, 0.1], [0.5, 3.25]]),
        n_events=np.array([0, 2, 3, 1]),
        f_event_mean=np.array([0.0, 1.0, 2.0, 3.0]),
        progress=np.array([0.0, 0.1, 0.2, 0.35]),
        events=[event("ff_distal", [0.0, 0.0, 0.0]), event("ff_distal", [0.002, 0.0, 0.0])],
        success=True,
    )
    base.update(kw)
    return MetricsRecord(**base)


def test_aggregates_recomputable_from_series():
    rec = make_record()
    assert rec.n_ticks == 4
    # Max force is exactly the max over the stored per-tick maxima.
    assert rec.max_contact_force() == 3.25
    # Mean force is the event-count weighted mean of per-tick event means.
    want = (2 * 1.0 + 3 * 2.0 + 1 * 3.0) / 6
    assert rec.mean_contact_force() == pytest.approx(want, rel=1e-12)
    assert rec.articulation_progress() == 0.35
    agg = rec.aggregates()
    assert agg["success"] is True
    assert agg["contact_dispersion"] == pytest.approx(0.001, rel=1e-12)


def test_empty_record_aggregates():
    rec = MetricsRecord(scenario_name="x", controller_type="fixed", seed=0,
                        tip_names=["ff_distal"])
    assert rec.n_ticks == 0
    assert rec.max_contact_force() == 0.0
    assert rec.mean_contact_force() == 0.0
    assert rec.articulation_progress() == 0.0
    assert rec.dispersion() is None


def test_metrics_csv_layout_and_round_trip(tmp_path):
    rec = make_record()
    path = tmp_path / "run.csv"
    write_metrics_csv(rec, path)
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    assert header == ["tick", "t", "e_rms", "eps_rms", "ks_mean", "kd_mean",
                      "v_mean", "f_ff_distal", "f_th_distal", "n_events",
                      "f_event_mean", "progress"]
    data = [ln for ln in lines if not ln.startswith("#")]
    assert len(data) == 1 + rec.n_ticks
    # repr floats parse back exactly
    row = data[2].split(",")
    assert float(row[1]) == rec.t[1]
    assert float(row[7]) == rec.tip_force[1, 0]
    # no wall-clock columns or comments anywhere in the CSV
    assert "wall" not in path.read_text()
    tail = [ln for ln in lines if ln.startswith("#")]
    assert tail[0] == "# max_contact_force,3.25"
    assert any(ln.startswith("# success,true") for ln in tail)
    assert not any(ln.startswith("# fault") for ln in tail)


def test_metrics_csv_empty_dispersion_and_fault_line(tmp_path):
    rec = make_record(events=[], success=False, fault="SimulationFault: boom")
    path = tmp_path / "run.csv"
    write_metrics_csv(rec, path)
    lines = path.read_text().splitlines()
    assert "# contact_dispersion," in lines  # empty value, not "None"
    assert "# success,false" in lines
    assert "# fault,SimulationFault: boom" in lines


def test_summary_reports_wall_time(tmp_path):
    rec = make_record(wall_time_mean=2.5e-4, wall_time_max=9.0e-4)
    path = tmp_path / "run.summary.json"
    write_summary(rec, path)
    doc = json.loads(path.read_text())
    assert doc["scenario"] == "mini"
    assert doc["controller"] == "adaptive"
    assert doc["seed"] == 3
    assert doc["ticks"] == 4
    assert doc["controller_step_wall_time_mean_s"] == 2.5e-4
    assert doc["controller_step_wall_time_max_s"] == 9.0e-4
    assert doc["success"] is True
    assert doc["fault"] is None
