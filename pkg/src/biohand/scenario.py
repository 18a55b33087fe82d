"""Task scenarios: loading, closed-loop execution, and controller comparison.

A scenario file bundles the hand model reference, the scene, the basis
and controller blocks, the reference motion, timing, and the success
predicate. ``run_scenario`` executes the two-rate loop (controller at
ctrl_dt, dynamics at sim_dt with the torque held) and returns a
MetricsRecord; ``compare_controllers`` repeats runs over seeds and
tabulates per-controller aggregates.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, replace

import numpy as np

from .basis import GaussianBasis
from .contact import Pose, SceneObject
from .controller import ControllerConfig, make_controller
from .dynamics import SimState, init_sim_state, step_dynamics
from .errors import ControllerFault, SimulationFault
from .hand_model import HandModel, resolve_hand_model
from .metrics import MetricsRecord
from .reference import (
    FileReference,
    GraspTiming,
    LiveReference,
    ReferenceProvider,
    scripted_cap_reference,
    scripted_door_reference,
    scripted_grasp_reference,
    scripted_touch_reference,
)

__all__ = [
    "Scenario",
    "load_scenario",
    "resolve_scenario",
    "build_basis",
    "build_reference",
    "perturb_scene",
    "run_scenario",
    "success_check",
    "compare_controllers",
    "write_comparison_csv",
    "write_profile_log",
]

_POSE_PERTURBATION_M = 0.005
_POSE_PERTURBATION_RAD = 0.05


@dataclass
class Scenario:
    """One task definition, as loaded from a scenario file."""

    name: str
    hand_model: str
    duration: float
    sim_dt: float
    ctrl_dt: float
    seed: int
    basis_config: dict
    controllers: dict[str, ControllerConfig]
    controller: str
    scene: list[SceneObject]
    reference_config: dict
    success_config: dict

    def __post_init__(self) -> None:
        if self.duration < 0.0:
            raise ValueError("duration must be nonnegative")
        if self.sim_dt <= 0.0 or self.ctrl_dt <= 0.0:
            raise ValueError("time steps must be positive")
        n = round(self.ctrl_dt / self.sim_dt)
        if n < 1 or abs(n * self.sim_dt - self.ctrl_dt) > 1e-9:
            raise ValueError("ctrl_dt must be an integer multiple of sim_dt")
        if self.controller not in self.controllers:
            raise ValueError(f"active controller {self.controller!r} has no config block")

    @property
    def substeps(self) -> int:
        return round(self.ctrl_dt / self.sim_dt)


def _parse_scene(entries: list[dict]) -> list[SceneObject]:
    scene = []
    for entry in entries:
        entry = dict(entry)
        pose = entry.pop("pose", {})
        entry["pose"] = Pose(
            pos=tuple(pose.get("pos", (0.0, 0.0, 0.0))),
            rpy=tuple(pose.get("rpy", (0.0, 0.0, 0.0))),
        )
        for key in ("half_extents", "axis", "pivot"):
            if key in entry:
                entry[key] = tuple(entry[key])
        scene.append(SceneObject(**entry))
    ids = [o.id for o in scene]
    if len(set(ids)) != len(ids):
        raise ValueError("scene object ids must be unique")
    return scene


def resolve_scenario(ref: str) -> Scenario:
    """Load a scenario from a path, or by shipped name (e.g. "grasp_ball")."""
    import os

    if os.path.exists(ref):
        return load_scenario(ref)
    from importlib import resources

    candidate = resources.files("biohand").joinpath(f"data/scenarios/{ref}.json")
    if candidate.is_file():
        with resources.as_file(candidate) as p:
            return load_scenario(p)
    raise FileNotFoundError(f"no scenario file or shipped scenario named {ref!r}")


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    controllers = {
        name: ControllerConfig.from_dict({**cfg, "type": name})
        for name, cfg in raw.get("controllers", {}).items()
    }
    if not controllers:
        controllers = {"adaptive": ControllerConfig()}
    return Scenario(
        name=raw["name"],
        hand_model=raw.get("hand_model", "hand24"),
        duration=float(raw["duration"]),
        sim_dt=float(raw.get("sim_dt", 1e-3)),
        ctrl_dt=float(raw.get("ctrl_dt", 1e-2)),
        seed=int(raw.get("seed", 0)),
        basis_config=raw.get("basis", {"n_basis": 10, "phase_tau": 1.0}),
        controllers=controllers,
        controller=raw.get("controller", "adaptive"),
        scene=_parse_scene(raw.get("scene", [])),
        reference_config=raw.get("reference", {"kind": "live"}),
        success_config=raw.get("success", {"type": "none"}),
    )


def build_basis(config: dict, duration: float) -> tuple[GaussianBasis, float]:
    """Basis block to (basis, phase_tau). Explicit centers/widths win over spacing."""
    phase_tau = float(config.get("phase_tau", 1.0))
    if "centers" in config or "widths" in config:
        return (
            GaussianBasis(
                centers=np.asarray(config["centers"], dtype=float),
                widths=np.asarray(config["widths"], dtype=float),
            ),
            phase_tau,
        )
    n = int(config.get("n_basis", 10))
    span = duration if duration > 0.0 else 1.0
    # Beyond ~40 time constants the phase has decayed past any resolvable
    # kernel spacing (exp underflows), so long-running scenarios lay their
    # kernels over the phase's usable horizon instead.
    span = min(span, 40.0 * phase_tau)
    return GaussianBasis.time_spaced(n, span, tau=phase_tau), phase_tau


def build_reference(
    config: dict, model: HandModel, scene: list[SceneObject], scenario_dir=None
) -> ReferenceProvider:
    kind = config.get("kind", "live")
    if kind == "live":
        return LiveReference(model)
    if kind == "file":
        path = config["path"]
        if scenario_dir is not None:
            import os

            path = os.path.join(scenario_dir, path)
        return FileReference.from_path(path, model)
    if kind != "scripted":
        raise ValueError(f"unknown reference kind {kind!r}")

    task = config["task"]
    params = dict(config.get("params", {}))
    if task == "grasp":
        obj = next(o for o in scene if o.id == config["object"])
        timing_cfg = params.pop("timing", None)
        timing = GraspTiming(**timing_cfg) if timing_cfg else GraspTiming()
        return scripted_grasp_reference(
            model,
            np.asarray(obj.pose.pos, dtype=float),
            obj.radius,
            timing=timing,
            **params,
        )
    if task == "door":
        return scripted_door_reference(model, **params)
    if task == "cap":
        return scripted_cap_reference(model, **params)
    if task == "touch":
        return scripted_touch_reference(model, **params)
    raise ValueError(f"unknown scripted task {task!r}")


def perturb_scene(scene: list[SceneObject], rng: np.random.Generator) -> list[SceneObject]:
    """Per-seed initial-pose jitter: uniform offsets on every object's pose."""
    out = []
    for obj in scene:
        dpos = rng.uniform(-_POSE_PERTURBATION_M, _POSE_PERTURBATION_M, size=3)
        drpy = rng.uniform(-_POSE_PERTURBATION_RAD, _POSE_PERTURBATION_RAD, size=3)
        pose = Pose(
            pos=tuple(np.asarray(obj.pose.pos) + dpos),
            rpy=tuple(np.asarray(obj.pose.rpy) + drpy),
        )
        out.append(replace(obj, pose=pose))
    return out


def run_scenario(
    scenario: Scenario,
    controller_type: str | None = None,
    seed: int | None = None,
    reference: ReferenceProvider | None = None,
    profile_rows: list | None = None,
    tick_callback=None,
) -> MetricsRecord:
    """Execute the closed loop and collect metrics.

    ``controller_type``/``seed`` override the scenario's own fields (the
    CLI flags). ``profile_rows``, when a list, receives one
    (tick, ks, kd, v, e, eps, tau) tuple per control tick.
    ``tick_callback(tick, state, controller, cmd, q_d)`` hooks in the
    teleop server. Faults abort the loop; the partial record carries
    the diagnostic.
    """
    ctype = controller_type or scenario.controller
    if ctype not in scenario.controllers:
        raise ValueError(f"no controller block for type {ctype!r}")
    cfg = scenario.controllers[ctype]
    run_seed = scenario.seed if seed is None else seed

    model = resolve_hand_model(scenario.hand_model)
    rng = np.random.default_rng(run_seed)
    scene = perturb_scene(scenario.scene, rng)
    basis, phase_tau = build_basis(scenario.basis_config, scenario.duration)

    if cfg.type == "position" and "position" in scenario.controllers:
        pos_cfg = scenario.controllers["position"]
        position_gains = (pos_cfg.ks_init, pos_cfg.kd_init)
    else:
        position_gains = model.position_mode_gains
    controller = make_controller(
        cfg, model.n_joints, model.tau_max, position_gains, basis, phase_tau
    )
    controller.reset()

    provider = reference if reference is not None else build_reference(
        scenario.reference_config, model, scene
    )
    state = init_sim_state(model, scene)

    n_ticks = round(scenario.duration / scenario.ctrl_dt)
    n_sub = scenario.substeps
    tips = list(model.fingertips)
    record = MetricsRecord(
        scenario_name=scenario.name,
        controller_type=ctype,
        seed=run_seed,
        tip_names=tips,
    )
    cols = {name: [] for name in (
        "tick", "t", "e_rms", "eps_rms", "ks_mean", "kd_mean", "v_mean",
        "n_events", "f_event_mean", "progress",
    )}
    tip_force_rows: list[np.ndarray] = []
    wall_times: list[float] = []

    try:
        for tick in range(n_ticks):
            q_d = provider.sample_at(state.joints.t).q_d
            t0 = time.perf_counter()
            cmd = controller.step(state.joints.q, state.joints.q_dot, q_d, scenario.ctrl_dt)
            wall_times.append(time.perf_counter() - t0)

            ks, kd, v = controller.profiles()
            err = controller.last_error()
            if profile_rows is not None:
                profile_rows.append((tick, np.asarray(ks, dtype=float) + np.zeros(model.n_joints),
                                     np.asarray(kd, dtype=float) + np.zeros(model.n_joints),
                                     v.copy(), err.e.copy(), err.eps.copy(), cmd.tau.copy()))

            tip_max = np.zeros(len(tips))
            event_sum = 0.0
            event_count = 0
            for _ in range(n_sub):
                state, batch = step_dynamics(
                    model, state, cmd.tau, scene, scenario.sim_dt
                )
                if batch is not None:
                    for ev in batch.events:
                        record.events.append(ev)
                        idx = tips.index(ev.fingertip)
                        tip_max[idx] = max(tip_max[idx], ev.force_magnitude)
                        event_sum += ev.force_magnitude
                        event_count += 1

            cols["tick"].append(tick)
            cols["t"].append(state.joints.t)
            cols["e_rms"].append(float(np.sqrt(np.mean(err.e**2))))
            cols["eps_rms"].append(float(np.sqrt(np.mean(err.eps**2))))
            cols["ks_mean"].append(float(np.mean(ks)))
            cols["kd_mean"].append(float(np.mean(kd)))
            cols["v_mean"].append(float(np.mean(np.abs(v))))
            cols["n_events"].append(event_count)
            cols["f_event_mean"].append(event_sum / event_count if event_count else 0.0)
            cols["progress"].append(_object_progress_with_scene(scenario, scene, state))
            tip_force_rows.append(tip_max)
            if tick_callback is not None:
                tick_callback(tick, state, controller, cmd, q_d)
    except (ControllerFault, SimulationFault) as exc:
        record.fault = f"{type(exc).__name__}: {exc}"

    record.tick = np.asarray(cols["tick"], dtype=int)
    record.t = np.asarray(cols["t"])
    record.e_rms = np.asarray(cols["e_rms"])
    record.eps_rms = np.asarray(cols["eps_rms"])
    record.ks_mean = np.asarray(cols["ks_mean"])
    record.kd_mean = np.asarray(cols["kd_mean"])
    record.v_mean = np.asarray(cols["v_mean"])
    record.n_events = np.asarray(cols["n_events"], dtype=int)
    record.f_event_mean = np.asarray(cols["f_event_mean"])
    record.progress = np.asarray(cols["progress"])
    record.tip_force = (
        np.stack(tip_force_rows) if tip_force_rows else np.zeros((0, len(tips)))
    )
    if wall_times:
        record.wall_time_mean = float(np.mean(wall_times))
        record.wall_time_max = float(np.max(wall_times))
    record.success = False if record.fault else success_check(scenario, state, record)
    return record


def _object_progress_with_scene(
    scenario: Scenario, scene: list[SceneObject], state: SimState
) -> float:
    obj_id = scenario.success_config.get("object")
    if obj_id is None:
        return 0.0
    obj = next((o for o in scene if o.id == obj_id), None)
    ostate = state.objects.get(obj_id)
    if obj is None or ostate is None:
        return 0.0
    if obj.mobility == "single-axis":
        return float(ostate.angle)
    if obj.mobility == "free":
        return float(ostate.pos[2] - obj.pose.pos[2])
    return 0.0


def success_check(scenario: Scenario, final_state: SimState, record: MetricsRecord) -> bool:
    """Evaluate the scenario's success predicate on a finished run."""
    cfg = scenario.success_config
    kind = cfg.get("type", "none")
    if record.fault or record.n_ticks == 0:
        return False
    if kind == "none":
        return True

    if kind in ("door", "cap"):
        target = float(cfg["target_angle"])
        final = record.articulation_progress()
        if target >= 0.0:
            return final >= target
        return final <= target

    hold_start = float(cfg.get("hold_start", 0.0))
    frac_needed = float(cfg.get("contact_fraction", 0.9))
    window = record.t >= hold_start
    if not np.any(window):
        return False

    if kind == "grasp":
        drop_threshold = float(cfg.get("drop_threshold", 0.005))
        min_contacts = int(cfg.get("min_contacts", 2))
        z = record.progress[window]
        drop = float(z[0] - z.min())
        touching = record.tip_force[window] > 0.0
        sustained = int(np.sum(touching.mean(axis=0) >= frac_needed))
        return drop < drop_threshold and sustained >= min_contacts

    if kind == "touch":
        ceiling = float(cfg["force_ceiling"])
        min_contacts = int(cfg.get("min_contacts", 1))
        touching = record.tip_force[window] > 0.0
        sustained = int(np.sum(touching.mean(axis=0) >= frac_needed))
        return sustained >= min_contacts and record.mean_contact_force() < ceiling

    raise ValueError(f"unknown success type {kind!r}")


def compare_controllers(
    scenario: Scenario, controller_types: list[str], repeats: int
) -> list[dict]:
    """Run each controller over seeds 0..repeats-1 and tabulate aggregates.

    Returns per-(controller, seed) rows followed by per-controller
    summary rows (seed column "mean"/"max"), ranked consistently:
    rows are ordered by (controller, seed) regardless of run order.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    rows = []
    summaries = []
    for ctype in controller_types:
        per_seed = []
        for seed in range(repeats):
            rec = run_scenario(scenario, controller_type=ctype, seed=seed)
            agg = rec.aggregates()
            per_seed.append(agg)
            rows.append({
                "controller": ctype,
                "seed": seed,
                "max_contact_force": agg["max_contact_force"],
                "mean_contact_force": agg["mean_contact_force"],
                "contact_dispersion": agg["contact_dispersion"],
                "articulation_progress": agg["articulation_progress"],
                "success": agg["success"],
            })
        summaries.append({
            "controller": ctype,
            "seed": "mean",
            "max_contact_force": float(np.mean([a["max_contact_force"] for a in per_seed])),
            "mean_contact_force": float(np.mean([a["mean_contact_force"] for a in per_seed])),
            "contact_dispersion": _mean_or_none([a["contact_dispersion"] for a in per_seed]),
            "articulation_progress": float(np.mean([a["articulation_progress"] for a in per_seed])),
            "success": all(a["success"] for a in per_seed),
        })
    return rows + summaries


def _mean_or_none(values: list) -> float | None:
    present = [v for v in values if v is not None]
    return float(np.mean(present)) if present else None


def write_comparison_csv(rows: list[dict], path) -> None:
    cols = [
        "controller", "seed", "max_contact_force", "mean_contact_force",
        "contact_dispersion", "articulation_progress", "success",
    ]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            out = []
            for c in cols:
                v = row[c]
                if v is None:
                    out.append("")
                elif isinstance(v, bool):
                    out.append(str(v).lower())
                elif isinstance(v, float):
                    out.append(repr(v))
                else:
                    out.append(str(v))
            fh.write(",".join(out) + "\n")


def write_profile_log(profile_rows: list, n_joints: int, path) -> None:
    """Per-tick controller internals: Ks, Kd, v, e, eps, tau per DOF."""
    names = ["ks", "kd", "v", "e", "eps", "tau"]
    header = ["tick"]
    for name in names:
        header += [f"{name}_{i}" for i in range(n_joints)]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for tick, ks, kd, v, e, eps, tau in profile_rows:
            vals = [str(int(tick))]
            for arr in (ks, kd, v, e, eps, tau):
                vals += [repr(float(x)) for x in np.asarray(arr, dtype=float)]
            fh.write(",".join(vals) + "\n")
