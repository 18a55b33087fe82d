"""Kinematic tree: FK, Jacobians, IK, gravity, and model file IO."""

import dataclasses
import math

import numpy as np
import pytest

from biohand.hand_model import (
    HandModel,
    JointSpec,
    LinkSpec,
    default_hand24,
    fingertip_jacobian,
    forward_kinematics,
    gravity_torque,
    load_hand_model,
    point_ik,
    resolve_hand_model,
    save_hand_model,
)

# Rest-pose fingertip centres are plain sums of the mount offsets and link
# lengths; frozen here as a drift guard for the default model.
REST_TIPS = {
    "ff_distal": (0.186, -0.033, 0.0),
    "mf_distal": (0.192, -0.011, 0.0),
    "rf_distal": (0.184, 0.011, 0.0),
    "lf_distal": (0.173, 0.033, 0.0),
    "th_distal": (0.138, -0.034, -0.01),
}

BENT_FF_TIP = (0.10411646179505138, -0.033, -0.0826824945421451)


def quat_from_axis_angle(axis, angle):
    axis = np.asarray(axis, float)
    axis = axis / np.linalg.norm(axis)
    h = angle / 2.0
    return np.array([math.cos(h), *(math.sin(h) * axis)])


def quat_to_mat(q):
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def oracle_fk_tips(model, q):
    """Independent FK: quaternion rotations chained as 4x4 homogeneous transforms."""

    def rpy_mat(rpy):
        r, p, y = rpy
        return (
            quat_to_mat(quat_from_axis_angle([0, 0, 1], y))
            @ quat_to_mat(quat_from_axis_angle([0, 1, 0], p))
            @ quat_to_mat(quat_from_axis_angle([1, 0, 0], r))
        )

    def hom(rot, p):
        T = np.eye(4)
        T[:3, :3] = rot
        T[:3, 3] = p
        return T

    frames = {}
    for i, j in enumerate(model.joints):
        parent = frames.get(j.parent_link, np.eye(4))
        mount = hom(rpy_mat(j.mount_rpy), np.asarray(j.mount, float))
        spin = hom(quat_to_mat(quat_from_axis_angle(j.axis, q[i])), np.zeros(3))
        frames[j.child_link] = parent @ mount @ spin
    return {
        name: (frames[name] @ np.array([*f.offset, 1.0]))[:3]
        for name, f in model.fingertips.items()
    }


def test_default_hand_structure(hand):
    assert hand.n_joints == 24
    assert len(hand.fingertips) == 5
    assert len(set(hand.joint_names)) == 24
    for tip in hand.fingertips.values():
        # Chains run base-ward to tip: indices ordered, ending at the tip joint.
        assert tip.chain[-1] == tip.joint_index
        assert list(tip.chain) == sorted(tip.chain)
        assert tip.chain[0] == hand.joint_index("WRJ2")
    assert np.all(hand.limit_lo < hand.limit_hi)
    assert np.all(hand.inertia > 0)
    assert np.all(hand.tau_max > 0)


def test_rest_pose_is_within_limits(hand):
    rest = hand.rest_state()
    assert np.all(rest.q >= hand.limit_lo)
    assert np.all(rest.q <= hand.limit_hi)
    assert np.array_equal(rest.q_dot, np.zeros(24))


def test_rest_fingertips_frozen(hand):
    tips = forward_kinematics(hand, hand.rest_state().q).fingertips
    for name, want in REST_TIPS.items():
        np.testing.assert_allclose(tips[name], want, atol=1e-12)


def test_bent_finger_frozen(hand):
    q = np.zeros(24)
    q[hand.joint_index("FFJ3")] = 0.9
    q[hand.joint_index("FFJ2")] = 0.7
    q[hand.joint_index("FFJ1")] = 0.5
    tip = forward_kinematics(hand, q).fingertips["ff_distal"]
    np.testing.assert_allclose(tip, BENT_FF_TIP, atol=1e-12)


def test_fk_matches_quaternion_oracle(hand, rng):
    for _ in range(25):
        q = rng.uniform(hand.limit_lo, hand.limit_hi)
        got = forward_kinematics(hand, q).fingertips
        want = oracle_fk_tips(hand, q)
        for name in want:
            np.testing.assert_allclose(got[name], want[name], atol=1e-12)


def test_fk_rejects_wrong_shape(hand):
    with pytest.raises(ValueError):
        forward_kinematics(hand, np.zeros(23))


def test_jacobian_directional_derivative(hand, rng):
    for _ in range(10):
        q = rng.uniform(hand.limit_lo, hand.limit_hi) * 0.8
        d = rng.normal(size=24)
        d /= np.linalg.norm(d)
        h = 1e-5
        for name in hand.fingertips:
            jac = fingertip_jacobian(hand, q, name)
            p_plus = forward_kinematics(hand, q + h * d).fingertips[name]
            p_minus = forward_kinematics(hand, q - h * d).fingertips[name]
            fd = (p_plus - p_minus) / (2 * h)
            np.testing.assert_allclose(jac @ d, fd, atol=1e-6)


def test_jacobian_zero_off_chain(hand):
    q = hand.rest_state().q
    jac = fingertip_jacobian(hand, q, "ff_distal")
    chain = set(hand.fingertips["ff_distal"].chain)
    for j in range(24):
        if j not in chain:
            np.testing.assert_array_equal(jac[:, j], np.zeros(3))


def test_jacobian_unknown_tip(hand):
    with pytest.raises(ValueError):
        fingertip_jacobian(hand, np.zeros(24), "nose")


def test_point_ik_reaches_curl_targets_from_rest(hand, rng):
    # Flexion curls with modest abduction stay inside the finger's
    # workspace, so the solver must actually reach them cold.
    rest = hand.rest_state().q
    chain = hand.fingertips["mf_distal"].chain
    for _ in range(8):
        q_goal = rest.copy()
        for j in chain:
            name = hand.joints[j].name
            if name in ("MFJ1", "MFJ2", "MFJ3"):
                q_goal[j] = rng.uniform(0.1, 1.2)
            elif name == "MFJ4":
                q_goal[j] = rng.uniform(-0.15, 0.15)
        target = forward_kinematics(hand, q_goal).fingertips["mf_distal"]
        q = point_ik(hand, "mf_distal", target, rest)
        reached = forward_kinematics(hand, q).fingertips["mf_distal"]
        assert np.linalg.norm(reached - target) < 2e-4
        assert np.all(q >= hand.limit_lo) and np.all(q <= hand.limit_hi)


def test_point_ik_converges_locally(hand, rng):
    # From a nearby start the damped least-squares iteration must descend
    # to the target even for aggressive whole-hand poses.
    for _ in range(5):
        q_goal = hand.clamp(rng.uniform(hand.limit_lo, hand.limit_hi) * 0.6)
        target = forward_kinematics(hand, q_goal).fingertips["mf_distal"]
        q0 = hand.clamp(q_goal + rng.normal(0.0, 0.05, hand.n_joints))
        q = point_ik(hand, "mf_distal", target, q0)
        reached = forward_kinematics(hand, q).fingertips["mf_distal"]
        assert np.linalg.norm(reached - target) < 2e-4


def test_point_ik_returns_best_effort_for_unreachable(hand):
    rest = hand.rest_state().q
    rest_tip = forward_kinematics(hand, rest).fingertips["mf_distal"]
    target = rest_tip + np.array([0.5, 0.0, 0.0])  # far outside the workspace
    q = point_ik(hand, "mf_distal", target, rest)
    reached = forward_kinematics(hand, q).fingertips["mf_distal"]
    start_err = np.linalg.norm(rest_tip - target)
    assert np.linalg.norm(reached - target) <= start_err
    assert np.all(q >= hand.limit_lo) and np.all(q <= hand.limit_hi)


def test_point_ik_restricted_joints(hand):
    target = forward_kinematics(hand, hand.rest_state().q).fingertips["ff_distal"]
    target = target + np.array([0.0, 0.0, -0.02])
    free = [hand.joint_index(n) for n in ("FFJ3", "FFJ2", "FFJ1")]
    q = point_ik(hand, "ff_distal", target, hand.rest_state().q, free_joints=free)
    untouched = [i for i in range(24) if i not in free]
    np.testing.assert_array_equal(q[untouched], np.zeros(len(untouched)))


def test_gravity_torque_zero_for_massless(hand):
    q = hand.rest_state().q
    np.testing.assert_array_equal(gravity_torque(hand, q), np.zeros(24))


def _with_mass(model, link_name, mass):
    links = [
        dataclasses.replace(l, mass=mass) if l.name == link_name else l
        for l in model.links.values()
    ]
    return HandModel(model.name, links, list(model.joints), tuple(model.gravity),
                     model.position_mode_gains)


def test_gravity_torque_matches_moment_arm_oracle(rng):
    # One massive link: tau_j = m * g . (a_j x (com - o_j)) for chain joints.
    model = _with_mass(default_hand24(), "mf_middle", 0.04)
    mass = 0.04
    ji = model.joint_index("MFJ2")
    chain = model.fingertips["mf_distal"].chain
    for _ in range(5):
        q = rng.uniform(model.limit_lo, model.limit_hi)
        fk = forward_kinematics(model, q)
        com = fk.pos[ji] + fk.rot[ji] @ np.array([model.links["mf_middle"].length / 2, 0, 0])
        tau = gravity_torque(model, q)
        for j in range(model.n_joints):
            if j in chain and j <= ji:
                axis_w = fk.rot[j] @ model._axis[j]
                want = mass * model.gravity @ np.cross(axis_w, com - fk.pos[j])
            else:
                want = 0.0
            assert tau[j] == pytest.approx(want, abs=1e-7)


def test_save_load_round_trip(hand, tmp_path):
    path = tmp_path / "hand.model.json"
    save_hand_model(hand, path)
    back = load_hand_model(path)
    assert back.name == hand.name
    assert back.joint_names == hand.joint_names
    np.testing.assert_array_equal(back.limit_lo, hand.limit_lo)
    np.testing.assert_array_equal(back.limit_hi, hand.limit_hi)
    np.testing.assert_array_equal(back.inertia, hand.inertia)
    np.testing.assert_array_equal(back.tau_max, hand.tau_max)
    np.testing.assert_array_equal(back.viscous_damping, hand.viscous_damping)
    assert back.position_mode_gains == hand.position_mode_gains
    assert set(back.fingertips) == set(hand.fingertips)
    for name, tip in hand.fingertips.items():
        assert back.fingertips[name].chain == tip.chain
        assert back.fingertips[name].radius == tip.radius
    q = np.linspace(-0.2, 0.9, 24)
    q = hand.clamp(q)
    a = forward_kinematics(hand, q)
    b = forward_kinematics(back, q)
    np.testing.assert_array_equal(a.pos, b.pos)
    np.testing.assert_array_equal(a.rot, b.rot)


def test_bundled_model_file_matches_builtin(hand, tmp_path):
    # The shipped hand24 file must stay in sync with the coded default.
    bundled = resolve_hand_model("hand24")
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    save_hand_model(hand, a)
    save_hand_model(bundled, b)
    assert a.read_text() == b.read_text()


def test_model_validation_errors():
    base = [LinkSpec("base", 0.0), LinkSpec("tip", 0.02, fingertip_radius=0.01)]
    joint = JointSpec("J1", "base", "tip", (0, 0, 0), (0, 1, 0), -1.0, 1.0, 1e-3, 0.0, 1.0)
    with pytest.raises(ValueError):
        HandModel("h", base, [])
    with pytest.raises(ValueError):
        HandModel("h", base + [LinkSpec("base", 0.1)], [joint])
    with pytest.raises(ValueError):
        HandModel("h", base, [dataclasses.replace(joint, limit_lo=2.0)])
    with pytest.raises(ValueError):
        HandModel("h", base, [dataclasses.replace(joint, inertia=0.0)])
    with pytest.raises(ValueError):
        HandModel("h", base, [dataclasses.replace(joint, axis=(0, 0, 0))])
    with pytest.raises(ValueError):
        HandModel("h", base, [dataclasses.replace(joint, parent_link="nowhere")])
    with pytest.raises(ValueError):
        HandModel("h", base + [LinkSpec("orphan", 0.01, fingertip_radius=0.01)], [joint])


def test_clamp_and_joint_index(hand):
    q = np.full(24, 10.0)
    np.testing.assert_array_equal(hand.clamp(q), hand.limit_hi)
    assert hand.joint_index("WRJ2") == 0
    with pytest.raises(ValueError):
        hand.joint_index("XXJ9")
