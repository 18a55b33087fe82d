"""Articulated-hand model: joint/link tree, forward kinematics, fingertip Jacobians.

The hand is a tree of revolute joints. Each joint is mounted on its parent
link by a fixed translation and rotation, and rotates its child link about
a fixed local axis. Links extend along their local +x; links with a
nonzero fingertip radius carry a contact sphere at their far end.

The default build is a 24-DOF five-finger hand: thumb and little finger
with five joints each, first/middle/ring fingers with four, plus a
two-DOF wrist.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

__all__ = [
    "LinkSpec",
    "JointSpec",
    "HandModel",
    "JointState",
    "FKResult",
    "forward_kinematics",
    "fingertip_jacobian",
    "gravity_torque",
    "point_ik",
    "default_hand24",
    "load_hand_model",
    "save_hand_model",
    "resolve_hand_model",
]


@dataclass(frozen=True)
class LinkSpec:
    """A rigid segment extending ``length`` metres along its frame's +x axis."""

    name: str
    length: float
    fingertip_radius: float = 0.0
    mass: float = 0.0


@dataclass(frozen=True)
class JointSpec:
    """A revolute joint: fixed mount on the parent link, rotation about ``axis``."""

    name: str
    parent_link: str
    child_link: str
    mount: tuple[float, float, float]
    axis: tuple[float, float, float]
    limit_lo: float
    limit_hi: float
    inertia: float
    viscous_damping: float
    tau_max: float
    mount_rpy: tuple[float, float, float] = (0.0, 0.0, 0.0)


@dataclass
class JointState:
    """Hand joint positions and velocities at simulation time ``t``."""

    q: np.ndarray
    q_dot: np.ndarray
    t: float = 0.0

    def copy(self) -> "JointState":
        return JointState(self.q.copy(), self.q_dot.copy(), self.t)


@dataclass(frozen=True)
class Fingertip:
    """Contact sphere at the end of a terminal link."""

    name: str
    joint_index: int
    chain: tuple[int, ...]
    offset: np.ndarray
    radius: float


def _rpy_matrix(rpy) -> np.ndarray:
    r, p, y = rpy
    cr, sr = math.cos(r), math.sin(r)
    cp, sp = math.cos(p), math.sin(p)
    cy, sy = math.cos(y), math.sin(y)
    rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    return rz @ ry @ rx


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


class HandModel:
    """Validated joint/link tree with precomputed kinematic caches.

    Joints are stored in topological order (parents first), so forward
    kinematics is a single pass. Immutable once constructed.
    """

    def __init__(
        self,
        name: str,
        links: list[LinkSpec],
        joints: list[JointSpec],
        gravity=(0.0, 0.0, -9.81),
        position_mode_gains=(30.0, 0.05),
    ):
        if not joints:
            raise ValueError("a hand model needs at least one joint")
        self.name = name
        self.links = {l.name: l for l in links}
        if len(self.links) != len(links):
            raise ValueError("duplicate link names")
        child_links = {j.child_link for j in joints}
        if len(child_links) != len(joints):
            raise ValueError("each link may be driven by at most one joint")
        roots = [l.name for l in links if l.name not in child_links]
        if len(roots) != 1:
            raise ValueError(f"expected exactly one root link, found {roots}")
        self.root_link = roots[0]

        # Topological order (parents first), keeping declaration order where
        # possible so chains stay contiguous in q.
        remaining = list(joints)
        ordered: list[JointSpec] = []
        known = {self.root_link}
        while remaining:
            nxt = next((j for j in remaining if j.parent_link in known), None)
            if nxt is None:
                bad = [j.name for j in remaining]
                raise ValueError(f"joints with unreachable parents: {bad}")
            if nxt.parent_link not in self.links or nxt.child_link not in self.links:
                raise ValueError(f"joint {nxt.name} references unknown links")
            ordered.append(nxt)
            known.add(nxt.child_link)
            remaining.remove(nxt)
        self.joints = ordered
        self.joint_names = [j.name for j in ordered]
        self.n_joints = len(ordered)

        for j in ordered:
            if not j.limit_lo < j.limit_hi:
                raise ValueError(f"joint {j.name}: limit_lo must be < limit_hi")
            if j.inertia <= 0.0 or j.tau_max <= 0.0 or j.viscous_damping < 0.0:
                raise ValueError(f"joint {j.name}: inertia and tau_max must be positive")

        self.limit_lo = np.array([j.limit_lo for j in ordered])
        self.limit_hi = np.array([j.limit_hi for j in ordered])
        self.inertia = np.array([j.inertia for j in ordered])
        self.viscous_damping = np.array([j.viscous_damping for j in ordered])
        self.tau_max = np.array([j.tau_max for j in ordered])
        self.gravity = np.asarray(gravity, dtype=float)
        ks, kd = position_mode_gains
        self.position_mode_gains = (float(ks), float(kd))

        # Kinematic caches: per-joint mount transform, axis skew powers, parent index.
        link_to_joint = {j.child_link: i for i, j in enumerate(ordered)}
        self._parent = np.array(
            [link_to_joint.get(j.parent_link, -1) for j in ordered], dtype=int
        )
        self._mount = np.array([j.mount for j in ordered], dtype=float)
        self._mount_rot = np.array([_rpy_matrix(j.mount_rpy) for j in ordered])
        axes = np.array([j.axis for j in ordered], dtype=float)
        norms = np.linalg.norm(axes, axis=1)
        if np.any(norms == 0.0):
            raise ValueError("joint axes must be nonzero")
        axes /= norms[:, None]
        self._axis = axes
        self._K = np.array([_skew(a) for a in axes])
        self._K2 = np.einsum("nij,njk->nik", self._K, self._K)
        # Parent-joint link lengths enter FK through the mounts, so links only
        # contribute geometry here via the fingertip offsets.
        self.fingertips: dict[str, Fingertip] = {}
        for lname, link in self.links.items():
            if link.fingertip_radius > 0.0:
                ji = link_to_joint.get(lname)
                if ji is None:
                    raise ValueError(f"fingertip link {lname} is not driven by any joint")
                chain = []
                k = ji
                while k >= 0:
                    chain.append(k)
                    k = self._parent[k]
                self.fingertips[lname] = Fingertip(
                    name=lname,
                    joint_index=ji,
                    chain=tuple(reversed(chain)),
                    offset=np.array([link.length, 0.0, 0.0]),
                    radius=link.fingertip_radius,
                )
        self._link_masses = np.array(
            [self.links[j.child_link].mass for j in ordered]
        )
        self._link_half = np.array(
            [[self.links[j.child_link].length / 2.0, 0.0, 0.0] for j in ordered]
        )
        self.has_link_mass = bool(np.any(self._link_masses > 0.0))

    def clamp(self, q: np.ndarray) -> np.ndarray:
        return np.clip(q, self.limit_lo, self.limit_hi)

    def rest_state(self) -> JointState:
        q = self.clamp(np.zeros(self.n_joints))
        return JointState(q=q, q_dot=np.zeros(self.n_joints), t=0.0)

    def joint_index(self, name: str) -> int:
        return self.joint_names.index(name)


@dataclass(frozen=True)
class FKResult:
    """Link frames (rotation + origin per joint's child link) and fingertip centres."""

    rot: np.ndarray
    pos: np.ndarray
    fingertips: dict[str, np.ndarray]


def _joint_rotations(model: HandModel, q: np.ndarray) -> np.ndarray:
    s = np.sin(q)
    c = 1.0 - np.cos(q)
    return np.eye(3) + s[:, None, None] * model._K + c[:, None, None] * model._K2


def forward_kinematics(model: HandModel, q: np.ndarray) -> FKResult:
    """Chain every joint's mount and rotation from the base; deterministic."""
    q = np.asarray(q, dtype=float)
    if q.shape != (model.n_joints,):
        raise ValueError(f"expected q of shape ({model.n_joints},), got {q.shape}")
    local = _joint_rotations(model, q)
    rot = np.empty((model.n_joints, 3, 3))
    pos = np.empty((model.n_joints, 3))
    for i in range(model.n_joints):
        p = model._parent[i]
        if p < 0:
            base_r = np.eye(3)
            base_p = np.zeros(3)
        else:
            base_r = rot[p]
            base_p = pos[p]
        pos[i] = base_p + base_r @ model._mount[i]
        rot[i] = base_r @ model._mount_rot[i] @ local[i]
    tips = {
        name: pos[f.joint_index] + rot[f.joint_index] @ f.offset
        for name, f in model.fingertips.items()
    }
    return FKResult(rot=rot, pos=pos, fingertips=tips)


def _tip_positions_batch(model: HandModel, tip: Fingertip, q_chain: np.ndarray) -> np.ndarray:
    """Fingertip centre for a batch of chain configurations, shape (m, len(chain))."""
    m = q_chain.shape[0]
    rot = np.broadcast_to(np.eye(3), (m, 3, 3))
    pos = np.zeros((m, 3))
    for col, ji in enumerate(tip.chain):
        qj = q_chain[:, col]
        s, c = np.sin(qj), 1.0 - np.cos(qj)
        local = np.eye(3) + s[:, None, None] * model._K[ji] + c[:, None, None] * model._K2[ji]
        pos = pos + np.einsum("mij,j->mi", rot, model._mount[ji])
        rot = np.einsum("mij,jk,mkl->mil", rot, model._mount_rot[ji], local)
    return pos + np.einsum("mij,j->mi", rot, tip.offset)


def fingertip_jacobian(
    model: HandModel, q: np.ndarray, fingertip: str, step: float = 1e-6
) -> np.ndarray:
    """Central finite-difference Jacobian of the fingertip centre w.r.t. q.

    Shape (3, n_joints); columns of joints not on the fingertip's chain are
    exactly zero.
    """
    if fingertip not in model.fingertips:
        raise ValueError(f"unknown fingertip {fingertip!r}")
    q = np.asarray(q, dtype=float)
    tip = model.fingertips[fingertip]
    k = len(tip.chain)
    q_chain = q[list(tip.chain)]
    batch = np.tile(q_chain, (2 * k, 1))
    for col in range(k):
        batch[2 * col, col] += step
        batch[2 * col + 1, col] -= step
    pts = _tip_positions_batch(model, tip, batch)
    jac = np.zeros((3, model.n_joints))
    for col, ji in enumerate(tip.chain):
        jac[:, ji] = (pts[2 * col] - pts[2 * col + 1]) / (2.0 * step)
    return jac


def gravity_torque(model: HandModel, q: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Generalized gravity torque from link point masses at link midpoints.

    Zero when no link carries mass (the default hand). Otherwise the
    negative gradient of potential energy, by central differences.
    """
    if not model.has_link_mass or not np.any(model.gravity):
        return np.zeros(model.n_joints)

    def potential(qv: np.ndarray) -> float:
        fk = forward_kinematics(model, qv)
        coms = fk.pos + np.einsum("nij,nj->ni", fk.rot, model._link_half)
        return float(-np.sum(model._link_masses * (coms @ model.gravity)))

    tau = np.zeros(model.n_joints)
    for i in range(model.n_joints):
        qp, qm = q.copy(), q.copy()
        qp[i] += step
        qm[i] -= step
        tau[i] = -(potential(qp) - potential(qm)) / (2.0 * step)
    return tau


def point_ik(
    model: HandModel,
    fingertip: str,
    target: np.ndarray,
    q0: np.ndarray,
    free_joints: list[int] | None = None,
    iters: int = 80,
    tol: float = 1e-5,
    damping: float = 1e-3,
) -> np.ndarray:
    """Damped least-squares inverse kinematics for one fingertip position.

    Only ``free_joints`` (default: the fingertip's whole chain) are moved;
    iterates are clamped to joint limits. Returns the best q found, which
    may not reach ``target`` if it is outside the workspace.
    """
    target = np.asarray(target, dtype=float)
    tip = model.fingertips[fingertip]
    free = list(tip.chain) if free_joints is None else list(free_joints)
    q = model.clamp(np.asarray(q0, dtype=float).copy())
    best_q, best_err = q.copy(), float("inf")
    for _ in range(iters):
        p = forward_kinematics(model, q).fingertips[fingertip]
        r = target - p
        err = float(np.linalg.norm(r))
        if err < best_err:
            best_q, best_err = q.copy(), err
        if err < tol:
            break
        jac = fingertip_jacobian(model, q, fingertip)[:, free]
        jjt = jac @ jac.T + damping * np.eye(3)
        dq = jac.T @ np.linalg.solve(jjt, r)
        step = np.linalg.norm(dq)
        if step > 0.3:
            dq *= 0.3 / step
        q[free] += dq
        q = model.clamp(q)
    return best_q


# ---------------------------------------------------------------------------
# Default 24-DOF hand
# ---------------------------------------------------------------------------

# Conventions: +x distal (fingers point along +x at rest), +y across the palm
# from first finger toward little finger, +z dorsal. Flexion about +y curls
# a finger toward -z, so manipulated objects sit on the palmar (-z) side.

_FINGER_COLUMNS = {
    # name: (mount y, link lengths proximal/middle/distal, tip radius)
    "FF": (-0.033, (0.045, 0.025, 0.026), 0.012),
    "MF": (-0.011, (0.048, 0.027, 0.027), 0.012),
    "RF": (0.011, (0.044, 0.025, 0.025), 0.012),
}


def default_hand24() -> HandModel:
    """24 DOFs: thumb 5, first/middle/ring fingers 4 each, little finger 5, wrist 2.

    Joint inertias are reflected-transmission values (motor plus gearing),
    so they sit well above bare-link inertia; this is what keeps held
    torques stable across a 10 ms control period.
    """
    links: list[LinkSpec] = [
        LinkSpec("base", 0.0),
        LinkSpec("wrist", 0.012),
        LinkSpec("palm", 0.078),
    ]
    joints: list[JointSpec] = [
        JointSpec("WRJ2", "base", "wrist", (0, 0, 0), (1, 0, 0), -0.5, 0.5, 0.02, 0.05, 10.0),
        JointSpec("WRJ1", "wrist", "palm", (0.012, 0, 0), (0, 1, 0), -0.8, 0.6, 0.018, 0.05, 10.0),
    ]

    def finger(prefix: str, mount_y: float, lengths, radius: float) -> None:
        lp, lm, ld = lengths
        links.extend(
            [
                LinkSpec(f"{prefix.lower()}_knuckle", 0.0),
                LinkSpec(f"{prefix.lower()}_proximal", lp),
                LinkSpec(f"{prefix.lower()}_middle", lm),
                LinkSpec(f"{prefix.lower()}_distal", ld, fingertip_radius=radius),
            ]
        )
        joints.extend(
            [
                JointSpec(f"{prefix}J4", "palm", f"{prefix.lower()}_knuckle",
                          (0.078, mount_y, 0), (0, 0, 1), -0.35, 0.35, 6e-3, 0.01, 5.0),
                JointSpec(f"{prefix}J3", f"{prefix.lower()}_knuckle", f"{prefix.lower()}_proximal",
                          (0, 0, 0), (0, 1, 0), -0.26, 1.57, 6e-3, 0.01, 5.0),
                JointSpec(f"{prefix}J2", f"{prefix.lower()}_proximal", f"{prefix.lower()}_middle",
                          (lp, 0, 0), (0, 1, 0), 0.0, 1.57, 4e-3, 0.008, 5.0),
                JointSpec(f"{prefix}J1", f"{prefix.lower()}_middle", f"{prefix.lower()}_distal",
                          (lm, 0, 0), (0, 1, 0), 0.0, 1.57, 3e-3, 0.006, 5.0),
            ]
        )

    for name, (mount_y, lengths, radius) in _FINGER_COLUMNS.items():
        finger(name, mount_y, lengths, radius)

    # Little finger: extra palm-arch joint, then a standard four-joint column.
    links.append(LinkSpec("lf_meta", 0.048))
    joints.append(
        JointSpec("LFJ5", "palm", "lf_meta", (0.030, 0.033, 0), (-1, 0, 0),
                  0.0, 0.79, 7e-3, 0.012, 5.0)
    )
    links.extend(
        [
            LinkSpec("lf_knuckle", 0.0),
            LinkSpec("lf_proximal", 0.037),
            LinkSpec("lf_middle", 0.022),
            LinkSpec("lf_distal", 0.024, fingertip_radius=0.011),
        ]
    )
    joints.extend(
        [
            JointSpec("LFJ4", "lf_meta", "lf_knuckle", (0.048, 0, 0), (0, 0, 1),
                      -0.35, 0.35, 6e-3, 0.01, 5.0),
            JointSpec("LFJ3", "lf_knuckle", "lf_proximal", (0, 0, 0), (0, 1, 0),
                      -0.26, 1.57, 6e-3, 0.01, 5.0),
            JointSpec("LFJ2", "lf_proximal", "lf_middle", (0.037, 0, 0), (0, 1, 0),
                      0.0, 1.57, 4e-3, 0.008, 5.0),
            JointSpec("LFJ1", "lf_middle", "lf_distal", (0.022, 0, 0), (0, 1, 0),
                      0.0, 1.57, 3e-3, 0.006, 5.0),
        ]
    )

    # Thumb: opposition sweep about the palm normal, then a pitch column.
    links.extend(
        [
            LinkSpec("th_base", 0.0),
            LinkSpec("th_meta", 0.040),
            LinkSpec("th_hub", 0.0),
            LinkSpec("th_proximal", 0.032),
            LinkSpec("th_distal", 0.029, fingertip_radius=0.012),
        ]
    )
    joints.extend(
        [
            JointSpec("THJ5", "palm", "th_base", (0.025, -0.034, -0.010), (0, 0, 1),
                      -1.05, 1.05, 7e-3, 0.012, 5.0),
            JointSpec("THJ4", "th_base", "th_meta", (0, 0, 0), (0, 1, 0),
                      0.0, 1.22, 6e-3, 0.01, 5.0),
            JointSpec("THJ3", "th_meta", "th_hub", (0.040, 0, 0), (0, 1, 0),
                      -0.26, 0.26, 4e-3, 0.008, 5.0),
            JointSpec("THJ2", "th_hub", "th_proximal", (0, 0, 0), (0, 1, 0),
                      -0.52, 0.52, 4e-3, 0.008, 5.0),
            JointSpec("THJ1", "th_proximal", "th_distal", (0.032, 0, 0), (0, 1, 0),
                      0.0, 1.57, 3e-3, 0.006, 5.0),
        ]
    )

    return HandModel(
        name="hand24",
        links=links,
        joints=joints,
        gravity=(0.0, 0.0, -9.81),
        position_mode_gains=(30.0, 0.05),
    )


# ---------------------------------------------------------------------------
# Model file IO
# ---------------------------------------------------------------------------


def save_hand_model(model: HandModel, path: str | Path) -> None:
    doc = {
        "name": model.name,
        "gravity": list(model.gravity),
        "position_mode_gains": {
            "ks": model.position_mode_gains[0],
            "kd": model.position_mode_gains[1],
        },
        "links": [
            {
                "name": l.name,
                "length": l.length,
                "fingertip_radius": l.fingertip_radius,
                "mass": l.mass,
            }
            for l in model.links.values()
        ],
        "joints": [
            {
                "name": j.name,
                "parent_link": j.parent_link,
                "child_link": j.child_link,
                "mount": list(j.mount),
                "mount_rpy": list(j.mount_rpy),
                "axis": list(j.axis),
                "limit_lo": j.limit_lo,
                "limit_hi": j.limit_hi,
                "inertia": j.inertia,
                "viscous_damping": j.viscous_damping,
                "tau_max": j.tau_max,
            }
            for j in model.joints
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_hand_model(path: str | Path) -> HandModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    links = [
        LinkSpec(
            name=l["name"],
            length=float(l["length"]),
            fingertip_radius=float(l.get("fingertip_radius", 0.0)),
            mass=float(l.get("mass", 0.0)),
        )
        for l in doc["links"]
    ]
    joints = [
        JointSpec(
            name=j["name"],
            parent_link=j["parent_link"],
            child_link=j["child_link"],
            mount=tuple(j["mount"]),
            axis=tuple(j["axis"]),
            limit_lo=float(j["limit_lo"]),
            limit_hi=float(j["limit_hi"]),
            inertia=float(j["inertia"]),
            viscous_damping=float(j["viscous_damping"]),
            tau_max=float(j["tau_max"]),
            mount_rpy=tuple(j.get("mount_rpy", (0.0, 0.0, 0.0))),
        )
        for j in doc["joints"]
    ]
    gains = doc.get("position_mode_gains", {"ks": 30.0, "kd": 0.05})
    return HandModel(
        name=doc.get("name", Path(path).stem),
        links=links,
        joints=joints,
        gravity=tuple(doc.get("gravity", (0.0, 0.0, -9.81))),
        position_mode_gains=(gains["ks"], gains["kd"]),
    )


def resolve_hand_model(ref: str | Path) -> HandModel:
    """Resolve a scenario's hand model reference: bundled name or file path."""
    if isinstance(ref, str) and ref == "hand24":
        data = resources.files("biohand").joinpath("data/hand24.model.json")
        with resources.as_file(data) as p:
            return load_hand_model(p)
    return load_hand_model(ref)
