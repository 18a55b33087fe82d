"""Desired joint trajectories q_d(t) for the controller to track.

Three provider kinds share one interface: recorded trajectory files
(linear interpolation, hold at both ends), scripted closed-form motions
(steps and min-jerk keyframe sequences, including the phased grasp
script), and a live mailbox fed by teleoperation. Desired velocity is
identically zero everywhere; the controller only consumes q_d.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import TrajectoryClampWarning, TrajectoryFormatError
from .hand_model import HandModel, forward_kinematics, point_ik

__all__ = [
    "ReferenceSample",
    "ReferenceProvider",
    "FileReference",
    "StepReference",
    "KeyframeReference",
    "LiveReference",
    "GraspTiming",
    "load_trajectory",
    "save_trajectory",
    "min_jerk",
    "scripted_grasp_reference",
    "scripted_door_reference",
    "scripted_cap_reference",
    "scripted_touch_reference",
]


@dataclass(frozen=True)
class ReferenceSample:
    t: float
    q_d: np.ndarray


def min_jerk(p0: np.ndarray, p1: np.ndarray, duration: float, t: float) -> np.ndarray:
    """Minimum-jerk interpolation from p0 to p1, clamped outside [0, duration]."""
    if duration <= 0.0:
        return p1 if t >= 0.0 else p0
    s = min(max(t / duration, 0.0), 1.0)
    sigma = s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
    return p0 + (p1 - p0) * sigma


class ReferenceProvider:
    """Interface: sample_at(t) valid for every t >= 0."""

    kind = "abstract"

    def sample_at(self, t: float) -> ReferenceSample:
        raise NotImplementedError


def load_trajectory(path, model: HandModel | None = None) -> list[ReferenceSample]:
    """Parse a trajectory file: header ``t,q_0,...`` then one row per sample.

    Rows must have strictly increasing t. With a model given, the column
    count must match its joint count and out-of-limit values are clamped
    (one TrajectoryClampWarning reports how many). Raises
    TrajectoryFormatError for empty files, bad headers, ragged rows, or
    non-monotone time.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise TrajectoryFormatError(f"{path}: empty trajectory file")
    header = [c.strip() for c in lines[0].split(",")]
    if header[0] != "t" or len(header) < 2:
        raise TrajectoryFormatError(f"{path}: header must be t,q_0,...,q_N-1")
    n_cols = len(header) - 1
    expected = ["t"] + [f"q_{i}" for i in range(n_cols)]
    if header != expected:
        raise TrajectoryFormatError(f"{path}: malformed header {header!r}")
    if model is not None and n_cols != model.n_joints:
        raise TrajectoryFormatError(
            f"{path}: {n_cols} joint columns, model has {model.n_joints}"
        )
    if len(lines) == 1:
        raise TrajectoryFormatError(f"{path}: no samples")

    samples: list[ReferenceSample] = []
    prev_t = -np.inf
    n_clamped = 0
    for ln_no, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != n_cols + 1:
            raise TrajectoryFormatError(f"{path}:{ln_no}: expected {n_cols + 1} columns")
        try:
            vals = [float(p) for p in parts]
        except ValueError as exc:
            raise TrajectoryFormatError(f"{path}:{ln_no}: {exc}") from exc
        t = vals[0]
        if not np.isfinite(t) or t <= prev_t:
            raise TrajectoryFormatError(f"{path}:{ln_no}: time must increase strictly")
        prev_t = t
        q = np.array(vals[1:], dtype=float)
        if model is not None:
            clamped = model.clamp(q)
            n_clamped += int(np.sum(clamped != q))
            q = clamped
        samples.append(ReferenceSample(t=t, q_d=q))
    if n_clamped:
        warnings.warn(
            f"{path}: clamped {n_clamped} out-of-limit values to joint limits",
            TrajectoryClampWarning,
            stacklevel=2,
        )
    return samples


def save_trajectory(path, samples: list[ReferenceSample]) -> None:
    """Write samples in the trajectory file format (full float precision)."""
    if not samples:
        raise ValueError("cannot save an empty trajectory")
    n = samples[0].q_d.shape[0]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t," + ",".join(f"q_{i}" for i in range(n)) + "\n")
        for s in samples:
            fh.write(repr(float(s.t)) + "," + ",".join(repr(float(v)) for v in s.q_d) + "\n")


class FileReference(ReferenceProvider):
    """Linear interpolation through file samples, holding both ends."""

    kind = "file"

    def __init__(self, samples: list[ReferenceSample]):
        if not samples:
            raise ValueError("need at least one sample")
        self._t = np.array([s.t for s in samples])
        self._q = np.stack([s.q_d for s in samples])

    @classmethod
    def from_path(cls, path, model: HandModel | None = None) -> "FileReference":
        return cls(load_trajectory(path, model))

    def sample_at(self, t: float) -> ReferenceSample:
        ts = self._t
        if t <= ts[0]:
            return ReferenceSample(t=t, q_d=self._q[0].copy())
        if t >= ts[-1]:
            return ReferenceSample(t=t, q_d=self._q[-1].copy())
        i = int(np.searchsorted(ts, t, side="right")) - 1
        frac = (t - ts[i]) / (ts[i + 1] - ts[i])
        return ReferenceSample(t=t, q_d=self._q[i] + frac * (self._q[i + 1] - self._q[i]))


class StepReference(ReferenceProvider):
    """q_a before the switch time, q_b from it onward."""

    kind = "scripted"

    def __init__(self, q_a: np.ndarray, q_b: np.ndarray, t_switch: float):
        self.q_a = np.asarray(q_a, dtype=float)
        self.q_b = np.asarray(q_b, dtype=float)
        self.t_switch = float(t_switch)

    def sample_at(self, t: float) -> ReferenceSample:
        q = self.q_b if t >= self.t_switch else self.q_a
        return ReferenceSample(t=t, q_d=q.copy())


class KeyframeReference(ReferenceProvider):
    """Min-jerk segments through keyframes, holding the last pose."""

    kind = "scripted"

    def __init__(self, times: list[float], poses: list[np.ndarray]):
        if len(times) != len(poses) or len(times) < 1:
            raise ValueError("need equally many times and poses, at least one")
        self._t = np.asarray(times, dtype=float)
        if np.any(np.diff(self._t) <= 0.0) or self._t[0] < 0.0:
            raise ValueError("keyframe times must be nonnegative and strictly increasing")
        self._q = np.stack([np.asarray(p, dtype=float) for p in poses])

    @property
    def end_time(self) -> float:
        return float(self._t[-1])

    def sample_at(self, t: float) -> ReferenceSample:
        ts = self._t
        if t <= ts[0]:
            return ReferenceSample(t=t, q_d=self._q[0].copy())
        if t >= ts[-1]:
            return ReferenceSample(t=t, q_d=self._q[-1].copy())
        i = int(np.searchsorted(ts, t, side="right")) - 1
        q = min_jerk(self._q[i], self._q[i + 1], ts[i + 1] - ts[i], t - ts[i])
        return ReferenceSample(t=t, q_d=q)


class LiveReference(ReferenceProvider):
    """Latest-command mailbox. Rest pose until the first command arrives."""

    kind = "live"

    def __init__(self, model: HandModel):
        self._model = model
        self._latest: np.ndarray | None = None

    def push(self, q_d: np.ndarray) -> np.ndarray:
        """Ingest a command, clamped to joint limits; returns the applied value."""
        q_d = np.asarray(q_d, dtype=float)
        if q_d.shape != (self._model.n_joints,):
            raise ValueError(
                f"command must have shape ({self._model.n_joints},), got {q_d.shape}"
            )
        if not np.all(np.isfinite(q_d)):
            raise ValueError("command must be finite")
        clamped = self._model.clamp(q_d)
        self._latest = clamped
        return clamped

    def sample_at(self, t: float) -> ReferenceSample:
        q = self._latest if self._latest is not None else self._model.rest_state().q
        return ReferenceSample(t=t, q_d=q.copy())


def _pose_from(model: HandModel, overrides: dict[str, float]) -> np.ndarray:
    q = model.rest_state().q.copy()
    for name, angle in overrides.items():
        q[model.joint_index(name)] = angle
    return model.clamp(q)


@dataclass(frozen=True)
class GraspTiming:
    """Phase boundaries: thumb approach ends, thumb adjust ends, finger close ends."""

    thumb_reach: float = 1.0
    adjust_end: float = 1.4
    close_end: float = 2.4

    def __post_init__(self) -> None:
        if not (0.0 < self.thumb_reach <= self.adjust_end <= self.close_end):
            raise ValueError("need 0 < thumb_reach <= adjust_end <= close_end")
        if self.close_end <= self.thumb_reach:
            raise ValueError("closing phase must end after the thumb phase")


def _finger_joints(model: HandModel, prefix: str) -> list[int]:
    return [i for i, j in enumerate(model.joints) if j.name.startswith(prefix)]


# contact directions (from object center toward each finger's side):
# thumb opposes from below, first and little finger close from above
_GRASP_DIRECTIONS = {
    "th_distal": (-0.15, -0.35, -0.92),
    "ff_distal": (0.30, -0.45, 0.84),
    "lf_distal": (0.30, 0.45, 0.84),
}


def scripted_grasp_reference(
    model: HandModel,
    object_center: np.ndarray,
    object_radius: float,
    timing: GraspTiming = GraspTiming(),
    squeeze: float | dict[str, float] = 0.006,
    approach_dirs: dict[str, tuple[float, float, float]] | None = None,
    approach_clearance: float = 0.02,
) -> KeyframeReference:
    """Phased grasp: thumb reaches the object, adjusts, then FF and LF close.

    Fingertip goals sit ``squeeze`` inside the object surface (one depth,
    or per fingertip) so the closed grasp loads the contacts. The thumb
    routes through a waypoint ``approach_clearance`` outside the surface on
    its approach ray so the reach does not sweep through the object. MF, RF
    and the wrist hold rest.
    """
    center = np.asarray(object_center, dtype=float)
    if object_radius <= 0.0:
        raise ValueError("object_radius must be positive")
    rest = model.rest_state().q
    dirs = dict(_GRASP_DIRECTIONS)
    if approach_dirs:
        dirs.update(approach_dirs)
    if isinstance(squeeze, dict):
        depth_of = dict(squeeze)
    else:
        depth_of = {tip: float(squeeze) for tip in ("th_distal", "ff_distal", "lf_distal")}

    def surface_goal(tip_name: str, depth: float) -> np.ndarray:
        d = np.asarray(dirs[tip_name], dtype=float)
        d = d / np.linalg.norm(d)
        touch_dist = object_radius + model.fingertips[tip_name].radius
        return center + (touch_dist - depth) * d

    def ik_for(tip_name: str, prefix: str, q_seed: np.ndarray, depth: float) -> np.ndarray:
        free = _finger_joints(model, prefix)
        return point_ik(model, tip_name, surface_goal(tip_name, depth), q_seed, free_joints=free)

    q_thumb_near = ik_for("th_distal", "TH", rest, -abs(approach_clearance))
    q_thumb_touch = ik_for("th_distal", "TH", q_thumb_near, 0.0)
    q_thumb_set = ik_for("th_distal", "TH", q_thumb_touch, depth_of["th_distal"])
    q_closed = q_thumb_set.copy()
    for tip_name, prefix in (("ff_distal", "FF"), ("lf_distal", "LF")):
        q_fin = ik_for(tip_name, prefix, q_closed, depth_of[tip_name])
        idx = _finger_joints(model, prefix)
        q_closed[idx] = q_fin[idx]

    times = [0.0, 0.55 * timing.thumb_reach, timing.thumb_reach]
    poses = [rest, q_thumb_near, q_thumb_touch]
    if timing.adjust_end > timing.thumb_reach:
        times.append(timing.adjust_end)
        poses.append(q_thumb_set)
    times.append(timing.close_end)
    poses.append(q_closed)
    return KeyframeReference(times, poses)


def scripted_door_reference(
    model: HandModel,
    curl_start: float = 0.5,
    pull_end: float = 3.0,
) -> KeyframeReference:
    """All fingers hook over the handle bar, then curl and flex the wrist to pull."""
    hook = {}
    for f in ("FF", "MF", "RF", "LF"):
        hook[f + "J3"] = 0.6
        hook[f + "J2"] = 0.5
        hook[f + "J1"] = 0.3
    hook.update({"THJ4": 0.5, "THJ2": 0.3, "THJ1": 0.5})
    pull = {}
    for f in ("FF", "MF", "RF", "LF"):
        pull[f + "J3"] = 1.4
        pull[f + "J2"] = 1.3
        pull[f + "J1"] = 0.9
    pull.update({"THJ4": 1.0, "THJ2": 0.45, "THJ1": 1.2, "WRJ1": 0.55})
    if not (0.0 < curl_start < pull_end):
        raise ValueError("need 0 < curl_start < pull_end")
    return KeyframeReference(
        [0.0, curl_start, pull_end],
        [model.rest_state().q, _pose_from(model, hook), _pose_from(model, pull)],
    )


def scripted_cap_reference(
    model: HandModel,
    strokes: int = 3,
    stroke_time: float = 1.4,
    recover_time: float = 0.6,
) -> KeyframeReference:
    """Repeated finger strokes: press and drag the cap rim, lift, return."""
    if strokes < 1:
        raise ValueError("need at least one stroke")
    press = {}
    drag = {}
    hoist = {}
    lift = {}
    for f in ("FF", "MF", "RF", "LF"):
        press[f + "J3"] = 0.55
        press[f + "J2"] = 0.35
        drag[f + "J3"] = 1.25
        drag[f + "J2"] = 1.05
        drag[f + "J1"] = 0.5
        hoist[f + "J3"] = 1.25
        hoist[f + "J2"] = 1.05
        hoist[f + "J1"] = 0.5
        lift[f + "J3"] = 0.15
    # Raise the wrist before uncurling so the return pass clears the rim
    # instead of dragging it back.
    hoist["WRJ1"] = -0.35
    lift["WRJ1"] = -0.35
    times = [0.0]
    poses = [model.rest_state().q]
    t = 0.4
    segments = (
        (press, 0.4),
        (drag, stroke_time),
        (hoist, 0.45 * recover_time),
        (lift, 0.55 * recover_time),
    )
    for _ in range(strokes):
        for pose, dur in segments:
            times.append(t)
            poses.append(_pose_from(model, pose))
            t += dur
    return KeyframeReference(times, poses)


def scripted_touch_reference(
    model: HandModel,
    reach_time: float = 1.2,
    press_extra: float = 0.25,
) -> KeyframeReference:
    """Lower the fingers onto the surface and hold a light press."""
    touch = {}
    for f in ("FF", "MF", "RF", "LF"):
        touch[f + "J3"] = 0.75
        touch[f + "J2"] = 0.45
        touch[f + "J1"] = 0.25
    press = {k: v + press_extra for k, v in touch.items()}
    return KeyframeReference(
        [0.0, reach_time, reach_time + 0.8],
        [model.rest_state().q, _pose_from(model, touch), _pose_from(model, press)],
    )
