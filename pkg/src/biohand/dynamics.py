"""Joint-space dynamics stepping for the hand and the scene it touches.

Each joint is integrated as a decoupled inertia with viscous damping;
contact and gravity enter as torques. Integration is semi-implicit
Euler (velocity first, then position with the new velocity), which
keeps the stiff penalty contacts stable at millisecond steps. Joint
limits clamp position and zero any velocity still pushing into the
limit. Mobile scene objects advance the same way: free bodies
translate under contact force plus gravity, single-axis bodies rotate
under contact moments and articulation damping.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .contact import ContactBatch, ObjectState, SceneObject, detect_contacts, initial_object_states
from .errors import SimulationFault
from .hand_model import HandModel, JointState, gravity_torque

__all__ = ["SimState", "init_sim_state", "step_dynamics"]


@dataclass
class SimState:
    """Complete integrator state: joints, mobile objects, friction anchors."""

    joints: JointState
    objects: dict[str, ObjectState] = field(default_factory=dict)
    anchors: dict[tuple[str, str], np.ndarray] = field(default_factory=dict)

    def copy(self) -> "SimState":
        return SimState(
            joints=self.joints.copy(),
            objects={k: v.copy() for k, v in self.objects.items()},
            anchors={k: v.copy() for k, v in self.anchors.items()},
        )


def init_sim_state(
    model: HandModel,
    scene: list[SceneObject] | None = None,
    q0: np.ndarray | None = None,
) -> SimState:
    joints = model.rest_state()
    if q0 is not None:
        q0 = np.asarray(q0, dtype=float)
        if q0.shape != (model.n_joints,):
            raise ValueError(f"q0 must have shape ({model.n_joints},), got {q0.shape}")
        joints.q = model.clamp(q0)
    objects = initial_object_states(scene) if scene else {}
    return SimState(joints=joints, objects=objects)


def step_dynamics(
    model: HandModel,
    state: SimState,
    tau: np.ndarray,
    scene: list[SceneObject] | None = None,
    dt: float = 1e-3,
    external_torque: np.ndarray | None = None,
) -> tuple[SimState, ContactBatch | None]:
    """Advance the world one step under commanded torque ``tau``.

    ``external_torque`` injects disturbances (loads, pushes) on top of the
    command. Returns the new state and the contact batch for this step
    (None when the scene is empty). Raises SimulationFault if the state
    stops being finite.
    """
    tau = np.asarray(tau, dtype=float)
    if tau.shape != (model.n_joints,):
        raise ValueError(f"tau must have shape ({model.n_joints},), got {tau.shape}")
    if dt <= 0.0:
        raise ValueError("dt must be positive")

    q = state.joints.q
    q_dot = state.joints.q_dot

    batch: ContactBatch | None = None
    contact_torque = 0.0
    if scene:
        batch = detect_contacts(
            model, q, q_dot, scene, state.objects, state.anchors, time=state.joints.t
        )
        contact_torque = batch.joint_torque

    total = tau + contact_torque + gravity_torque(model, q) - model.viscous_damping * q_dot
    if external_torque is not None:
        ext = np.asarray(external_torque, dtype=float)
        if ext.shape != (model.n_joints,):
            raise ValueError(f"external_torque must have shape ({model.n_joints},)")
        total = total + ext

    q_ddot = total / model.inertia
    new_q_dot = q_dot + dt * q_ddot
    new_q = q + dt * new_q_dot

    at_lo = new_q < model.limit_lo
    at_hi = new_q > model.limit_hi
    new_q = np.clip(new_q, model.limit_lo, model.limit_hi)
    new_q_dot = np.where(at_lo & (new_q_dot < 0.0), 0.0, new_q_dot)
    new_q_dot = np.where(at_hi & (new_q_dot > 0.0), 0.0, new_q_dot)

    if not (np.all(np.isfinite(new_q)) and np.all(np.isfinite(new_q_dot))):
        raise SimulationFault(
            f"non-finite joint state at t={state.joints.t:.6f}: "
            f"q={new_q!r} q_dot={new_q_dot!r}"
        )

    new_objects: dict[str, ObjectState] = {}
    if scene:
        for obj in scene:
            cur = state.objects.get(obj.id)
            if cur is None:
                cur = ObjectState(pos=np.asarray(obj.pose.pos, dtype=float), vel=np.zeros(3))
            nxt = cur.copy()
            if obj.mobility == "free":
                if state.joints.t < obj.release_time:
                    # held by its stand until the release time
                    nxt.vel = np.zeros(3)
                else:
                    force = batch.object_forces.get(obj.id, np.zeros(3)) if batch else np.zeros(3)
                    accel = force / obj.mass + model.gravity
                    nxt.vel = cur.vel + dt * accel
                    nxt.pos = cur.pos + dt * nxt.vel
            elif obj.mobility == "single-axis":
                moment = batch.object_axis_torques.get(obj.id, 0.0) if batch else 0.0
                alpha = (moment - obj.art_damping * cur.speed) / obj.art_inertia
                nxt.speed = cur.speed + dt * alpha
                nxt.angle = cur.angle + dt * nxt.speed
            if not (np.all(np.isfinite(nxt.pos)) and np.isfinite(nxt.angle) and np.isfinite(nxt.speed)):
                raise SimulationFault(
                    f"non-finite state for object {obj.id!r} at t={state.joints.t:.6f}"
                )
            new_objects[obj.id] = nxt

    anchors = batch.anchors if batch is not None else {}
    if scene:
        # a stand's release must not dump stored tangential spring stress
        # into the object, so contacts re-anchor fresh at that instant
        t_new = state.joints.t + dt
        for obj in scene:
            if obj.mobility == "free" and state.joints.t < obj.release_time <= t_new:
                anchors = {k: v for k, v in anchors.items() if k[1] != obj.id}
    new_state = SimState(
        joints=JointState(q=new_q, q_dot=new_q_dot, t=state.joints.t + dt),
        objects=new_objects,
        anchors=anchors,
    )
    return new_state, batch
