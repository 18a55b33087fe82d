"""Penalty contact between fingertip spheres and primitive scene objects.

Normal force is a unilateral spring-damper on penetration depth: the
spring pushes the fingertip out, the damper acts only while penetration
is growing, and the total is never negative, so contact cannot pull.
Tangential friction is a Coulomb-capped anchor spring: each touching
fingertip drags a per-contact anchor point over the object surface, the
spring to the anchor resists slip, and the anchor slides whenever the
spring force would exceed the friction cone. This gives true sticking
(no creep under sustained load) while staying stable under explicit
integration.

Objects are rigid primitives; only fingertips collide. Mobile objects
receive the reaction force (free bodies translate, single-axis bodies
rotate about their hinge or rotor axis).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .hand_model import HandModel, _rpy_matrix, fingertip_jacobian, forward_kinematics

__all__ = [
    "Pose",
    "SceneObject",
    "ObjectState",
    "ContactEvent",
    "ContactBatch",
    "detect_contacts",
    "initial_object_states",
]

_GEOMETRY_BY_SHAPE = {
    "sphere": "sphere",
    "box": "box",
    "cylinder": "cylinder",
    "plane": "plane",
    "hinged-panel": "box",
    "capped-rotor": "cylinder",
}


@dataclass(frozen=True)
class Pose:
    pos: tuple[float, float, float] = (0.0, 0.0, 0.0)
    rpy: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def rotation(self) -> np.ndarray:
        return _rpy_matrix(self.rpy)


@dataclass(frozen=True)
class SceneObject:
    """A contact primitive plus its mobility and surface parameters.

    shape: sphere | box | cylinder | plane | hinged-panel | capped-rotor.
    The two articulated shapes are a box and a cylinder constrained to
    rotate about (pivot, axis); they require mobility "single-axis".
    """

    id: str
    shape: str
    pose: Pose = Pose()
    mobility: str = "fixed"  # fixed | free | single-axis
    radius: float = 0.0
    half_extents: tuple[float, float, float] = (0.0, 0.0, 0.0)
    half_height: float = 0.0
    mass: float = 1.0
    axis: tuple[float, float, float] = (0.0, 0.0, 1.0)
    pivot: tuple[float, float, float] = (0.0, 0.0, 0.0)
    art_inertia: float = 1.0
    art_damping: float = 0.0
    release_time: float = 0.0  # free objects are held in place until this time
    contact_stiffness: float = 5000.0
    contact_damping: float = 10.0
    friction: float = 0.8
    friction_stiffness: float = 1500.0
    friction_damping: float = 5.0

    def __post_init__(self) -> None:
        if self.shape not in _GEOMETRY_BY_SHAPE:
            raise ValueError(f"unknown shape {self.shape!r}")
        if self.mobility not in ("fixed", "free", "single-axis"):
            raise ValueError(f"unknown mobility {self.mobility!r}")
        if self.shape in ("hinged-panel", "capped-rotor") and self.mobility != "single-axis":
            raise ValueError(f"{self.shape} requires single-axis mobility")
        if self.contact_stiffness <= 0.0 or self.contact_damping < 0.0 or self.friction < 0.0:
            raise ValueError("need contact_stiffness > 0, contact_damping >= 0, friction >= 0")
        if self.mobility == "free" and self.mass <= 0.0:
            raise ValueError("free objects need positive mass")
        if self.mobility == "single-axis" and self.art_inertia <= 0.0:
            raise ValueError("single-axis objects need positive articulation inertia")

    @property
    def geometry(self) -> str:
        return _GEOMETRY_BY_SHAPE[self.shape]

    def unit_axis(self) -> np.ndarray:
        a = np.asarray(self.axis, dtype=float)
        n = np.linalg.norm(a)
        if n == 0.0:
            raise ValueError("articulation axis must be nonzero")
        return a / n


@dataclass
class ObjectState:
    """Mobile-object coordinates: translation for free bodies, angle for single-axis."""

    pos: np.ndarray
    vel: np.ndarray
    angle: float = 0.0
    speed: float = 0.0

    def copy(self) -> "ObjectState":
        return ObjectState(self.pos.copy(), self.vel.copy(), self.angle, self.speed)


def initial_object_states(scene: list[SceneObject]) -> dict[str, ObjectState]:
    return {
        o.id: ObjectState(pos=np.asarray(o.pose.pos, dtype=float), vel=np.zeros(3))
        for o in scene
    }


@dataclass(frozen=True)
class ContactEvent:
    """One fingertip/object contact this step."""

    time: float
    fingertip: str
    object_id: str
    point: np.ndarray
    normal: np.ndarray
    force_magnitude: float
    force: np.ndarray  # full force vector on the fingertip, world frame


@dataclass
class ContactBatch:
    """Everything one contact pass produces."""

    events: list[ContactEvent]
    joint_torque: np.ndarray
    object_forces: dict[str, np.ndarray]   # net world force on free objects
    object_axis_torques: dict[str, float]  # net torque about single-axis objects' axes
    anchors: dict[tuple[str, str], np.ndarray]  # (fingertip, object) -> anchor, object-local


def _axis_rotation(axis: np.ndarray, angle: float) -> np.ndarray:
    k = np.array(
        [[0.0, -axis[2], axis[1]], [axis[2], 0.0, -axis[0]], [-axis[1], axis[0], 0.0]]
    )
    return np.eye(3) + math.sin(angle) * k + (1.0 - math.cos(angle)) * (k @ k)


def _sdf_local(obj: SceneObject, p: np.ndarray) -> tuple[float, np.ndarray]:
    """Signed distance (positive outside) and outward unit normal, object-local frame."""
    geom = obj.geometry
    if geom == "sphere":
        r = np.linalg.norm(p)
        if r < 1e-12:
            return -obj.radius, np.array([0.0, 0.0, 1.0])
        return r - obj.radius, p / r
    if geom == "plane":
        return p[2], np.array([0.0, 0.0, 1.0])
    if geom == "box":
        h = np.asarray(obj.half_extents, dtype=float)
        q = np.abs(p) - h
        if np.any(q > 0.0):
            outside = np.maximum(q, 0.0)
            d = np.linalg.norm(outside)
            n = np.sign(p) * outside / d
            return d, n
        i = int(np.argmax(q))
        n = np.zeros(3)
        n[i] = 1.0 if p[i] >= 0.0 else -1.0
        return q[i], n
    if geom == "cylinder":
        rho = math.hypot(p[0], p[1])
        radial = np.array([1.0, 0.0, 0.0]) if rho < 1e-12 else np.array([p[0] / rho, p[1] / rho, 0.0])
        dr = rho - obj.radius
        dz = abs(p[2]) - obj.half_height
        zsign = 1.0 if p[2] >= 0.0 else -1.0
        if dr > 0.0 and dz > 0.0:
            d = math.hypot(dr, dz)
            n = (dr * radial + dz * zsign * np.array([0.0, 0.0, 1.0])) / d
            return d, n
        if dr > dz:
            return dr, radial
        return dz, zsign * np.array([0.0, 0.0, 1.0])
    raise AssertionError(geom)


class _ObjectFrame:
    """World/local transforms for an object at its current articulated state."""

    def __init__(self, obj: SceneObject, state: ObjectState | None):
        self.obj = obj
        base_rot = obj.pose.rotation()
        if obj.mobility == "free" and state is not None:
            self.rot = base_rot
            self.origin = state.pos
            self._art = None
        elif obj.mobility == "single-axis" and state is not None:
            axis = obj.unit_axis()
            pivot = np.asarray(obj.pivot, dtype=float)
            spin = _axis_rotation(axis, state.angle)
            self.rot = spin @ base_rot
            self.origin = pivot + spin @ (np.asarray(obj.pose.pos, dtype=float) - pivot)
            self._art = (axis, pivot, state.speed)
        else:
            self.rot = base_rot
            self.origin = np.asarray(obj.pose.pos, dtype=float)
            self._art = None
        self._state = state

    def to_local(self, p_world: np.ndarray) -> np.ndarray:
        return self.rot.T @ (p_world - self.origin)

    def to_world_dir(self, v_local: np.ndarray) -> np.ndarray:
        return self.rot @ v_local

    def to_world(self, p_local: np.ndarray) -> np.ndarray:
        return self.origin + self.rot @ p_local

    def point_velocity(self, p_world: np.ndarray) -> np.ndarray:
        if self.obj.mobility == "free" and self._state is not None:
            return self._state.vel
        if self._art is not None:
            axis, pivot, speed = self._art
            return speed * np.cross(axis, p_world - pivot)
        return np.zeros(3)


def detect_contacts(
    model: HandModel,
    q: np.ndarray,
    q_dot: np.ndarray,
    scene: list[SceneObject],
    object_states: dict[str, ObjectState] | None = None,
    anchors: dict[tuple[str, str], np.ndarray] | None = None,
    time: float = 0.0,
) -> ContactBatch:
    """One contact pass: events, fingertip joint torques, object reactions.

    ``object_states`` defaults to each object resting at its scene pose;
    ``anchors`` carries friction anchor points between steps (object-local
    coordinates, so anchors ride along with moving objects).
    """
    if object_states is None:
        object_states = initial_object_states(scene)
    anchors = {} if anchors is None else dict(anchors)

    fk = forward_kinematics(model, q)
    events: list[ContactEvent] = []
    joint_torque = np.zeros(model.n_joints)
    object_forces: dict[str, np.ndarray] = {}
    object_axis_torques: dict[str, float] = {}
    frames = {o.id: _ObjectFrame(o, object_states.get(o.id)) for o in scene}
    touched: set[tuple[str, str]] = set()

    for tip_name, tip in model.fingertips.items():
        center = fk.fingertips[tip_name]
        jac = None
        tip_vel = None
        for obj in scene:
            frame = frames[obj.id]
            dist, n_local = _sdf_local(obj, frame.to_local(center))
            depth = tip.radius - dist
            if depth <= 0.0:
                continue
            normal = frame.to_world_dir(n_local)
            point = center - dist * normal

            if jac is None:
                jac = fingertip_jacobian(model, q, tip_name)
                tip_vel = jac @ q_dot
            v_rel = tip_vel - frame.point_velocity(point)
            approach = -float(v_rel @ normal)
            fn = obj.contact_stiffness * depth + obj.contact_damping * max(0.0, approach)

            # Friction: spring to the anchor, capped at the Coulomb cone; the
            # anchor slides along the surface when the cap binds.
            key = (tip_name, obj.id)
            touched.add(key)
            anchor_local = anchors.get(key)
            if anchor_local is None:
                anchor_world = point
            else:
                anchor_world = frame.to_world(anchor_local)
            slip = point - anchor_world
            slip_t = slip - (slip @ normal) * normal
            v_t = v_rel - (v_rel @ normal) * normal
            ft_raw = -obj.friction_stiffness * slip_t - obj.friction_damping * v_t
            cap = obj.friction * fn
            ft_mag = float(np.linalg.norm(ft_raw))
            if ft_mag > cap:
                ft = ft_raw * (cap / ft_mag) if ft_mag > 0.0 else ft_raw
                # drag the anchor to the cone boundary
                slip_norm = float(np.linalg.norm(slip_t))
                max_stretch = cap / obj.friction_stiffness
                if slip_norm > max_stretch and slip_norm > 0.0:
                    anchor_world = point - slip_t * (max_stretch / slip_norm)
            else:
                ft = ft_raw
            anchors[key] = frame.to_local(anchor_world)

            force = fn * normal + ft
            events.append(
                ContactEvent(
                    time=time,
                    fingertip=tip_name,
                    object_id=obj.id,
                    point=point,
                    normal=normal,
                    force_magnitude=float(np.linalg.norm(force)),
                    force=force,
                )
            )
            joint_torque += jac.T @ force

            reaction = -force
            if obj.mobility == "free":
                object_forces[obj.id] = object_forces.get(obj.id, np.zeros(3)) + reaction
            elif obj.mobility == "single-axis":
                axis = obj.unit_axis()
                pivot = np.asarray(obj.pivot, dtype=float)
                moment = float(np.cross(point - pivot, reaction) @ axis)
                object_axis_torques[obj.id] = object_axis_torques.get(obj.id, 0.0) + moment

    # anchors of separated pairs are dropped so re-contact starts fresh
    anchors = {k: v for k, v in anchors.items() if k in touched}
    return ContactBatch(
        events=events,
        joint_torque=joint_torque,
        object_forces=object_forces,
        object_axis_torques=object_axis_torques,
        anchors=anchors,
    )
