"""Biomimetic adaptive force controller and fixed-gain / position-servo baselines.

The adaptive controller tracks a desired joint trajectory with a torque
command assembled from three learned profiles: a stiffness profile, a
damping profile, and a feedforward torque profile. Each profile is the
inner product of a per-joint parameter row with a shared Gaussian basis
activation vector; the parameter rows are adapted every control tick from
the sliding tracking error, so the hand stiffens only where and when the
task demands it.

All operations are pure functions of explicit state; the controller
classes just own that state between ticks.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .basis import GaussianBasis, PhaseState, eval_basis, phase_step
from .errors import ControllerFault

__all__ = [
    "AdaptiveParams",
    "AdaptationGains",
    "TrackingError",
    "TorqueCommand",
    "ControllerConfig",
    "AdaptiveController",
    "FixedGainController",
    "PositionModeController",
    "tracking_error",
    "compliant_profiles",
    "compute_torque",
    "update_params",
    "fixed_gain_step",
    "position_mode_step",
    "diagnostic_tracking_cost",
    "make_controller",
]


def _as_vector(x, n: int, name: str) -> np.ndarray:
    """Broadcast a scalar to length n, or validate an array of length n."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValueError(f"{name} must be a scalar or length-{n} vector, got shape {arr.shape}")
    return arr


@dataclass
class AdaptiveParams:
    """Parameter matrices encoding the stiffness, damping and feedforward profiles.

    Each matrix is (n_joints, n_basis); row j dotted with the basis
    activation vector yields joint j's current profile value.
    """

    theta_k: np.ndarray
    theta_d: np.ndarray
    theta_v: np.ndarray

    def __post_init__(self) -> None:
        self.theta_k = np.asarray(self.theta_k, dtype=float)
        self.theta_d = np.asarray(self.theta_d, dtype=float)
        self.theta_v = np.asarray(self.theta_v, dtype=float)
        shape = self.theta_k.shape
        if len(shape) != 2 or self.theta_d.shape != shape or self.theta_v.shape != shape:
            raise ValueError("theta_k, theta_d, theta_v must share a 2-D shape")
        for name, m in (("theta_k", self.theta_k), ("theta_d", self.theta_d), ("theta_v", self.theta_v)):
            if not np.all(np.isfinite(m)):
                raise ControllerFault(f"{name} contains non-finite entries")

    @staticmethod
    def initial(n_joints: int, n_basis: int, ks_init: float = 1.0, kd_init: float = 0.1) -> "AdaptiveParams":
        """Start compliant: uniform rows so the initial profiles are exactly
        (ks_init, kd_init, 0) for any normalized activation vector."""
        return AdaptiveParams(
            theta_k=np.full((n_joints, n_basis), float(ks_init)),
            theta_d=np.full((n_joints, n_basis), float(kd_init)),
            theta_v=np.zeros((n_joints, n_basis)),
        )

    def copy(self) -> "AdaptiveParams":
        return AdaptiveParams(self.theta_k.copy(), self.theta_d.copy(), self.theta_v.copy())


@dataclass(frozen=True)
class AdaptationGains:
    """Per-joint learning rates for the three profiles plus the sliding-error blend pi."""

    q_k: np.ndarray
    q_d: np.ndarray
    q_v: np.ndarray
    pi: float

    def __post_init__(self) -> None:
        for name in ("q_k", "q_d", "q_v"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.ndim != 1 or np.any(v <= 0.0) or not np.all(np.isfinite(v)):
                raise ValueError(f"{name} must be a 1-D vector of strictly positive finite values")
            object.__setattr__(self, name, v)
        if self.q_k.shape != self.q_d.shape or self.q_k.shape != self.q_v.shape:
            raise ValueError("q_k, q_d, q_v must share one length")
        if not (self.pi > 0.0 and np.isfinite(self.pi)):
            raise ValueError(f"pi must be strictly positive, got {self.pi}")

    @staticmethod
    def uniform(n_joints: int, q_k: float, q_d: float, q_v: float, pi: float) -> "AdaptationGains":
        return AdaptationGains(
            q_k=np.full(n_joints, float(q_k)),
            q_d=np.full(n_joints, float(q_d)),
            q_v=np.full(n_joints, float(q_v)),
            pi=float(pi),
        )


@dataclass(frozen=True)
class TrackingError:
    """Position error, velocity error, and their sliding combination eps = e_dot + pi*e."""

    e: np.ndarray
    e_dot: np.ndarray
    eps: np.ndarray


@dataclass(frozen=True)
class TorqueCommand:
    """Joint torques after saturation, with a mask of which entries were clipped."""

    tau: np.ndarray
    clamped_mask: np.ndarray


def tracking_error(q: np.ndarray, q_dot: np.ndarray, q_d: np.ndarray, pi: float) -> TrackingError:
    """Errors against the reference; the desired velocity is identically zero."""
    q = np.asarray(q, dtype=float)
    q_dot = np.asarray(q_dot, dtype=float)
    q_d = np.asarray(q_d, dtype=float)
    if q.shape != q_d.shape or q.shape != q_dot.shape:
        raise ValueError(f"state/reference length mismatch: {q.shape} vs {q_d.shape} vs {q_dot.shape}")
    e = q - q_d
    e_dot = q_dot.copy()
    return TrackingError(e=e, e_dot=e_dot, eps=e_dot + pi * e)


def compliant_profiles(params: AdaptiveParams, g: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Reconstruct (Ks, Kd, v) from the parameter rows and basis activations.

    Stiffness and damping are clamped at zero: the adaptation law can drive
    a row inner product negative, and a negative spring or damper would
    destroy passivity of the impedance term. The parameters themselves are
    left untouched.
    """
    g = np.asarray(g, dtype=float)
    if g.shape != (params.theta_k.shape[1],):
        raise ValueError(f"activation length {g.shape} does not match parameter columns {params.theta_k.shape[1]}")
    ks = np.maximum(params.theta_k @ g, 0.0)
    kd = np.maximum(params.theta_d @ g, 0.0)
    v = params.theta_v @ g
    return ks, kd, v


def compute_torque(
    err: TrackingError,
    ks: np.ndarray,
    kd: np.ndarray,
    v: np.ndarray,
    tau_max: np.ndarray,
) -> TorqueCommand:
    """tau = -(Ks*e + Kd*e_dot) - v, saturated to the per-joint torque limits."""
    raw = -(ks * err.e + kd * err.e_dot) - v
    tau_max = np.asarray(tau_max, dtype=float)
    tau = np.clip(raw, -tau_max, tau_max)
    return TorqueCommand(tau=tau, clamped_mask=np.abs(raw) > tau_max)


def update_params(
    params: AdaptiveParams,
    gains: AdaptationGains,
    err: TrackingError,
    g: np.ndarray,
    dt: float,
    gain_decay: float = 0.0,
) -> AdaptiveParams:
    """One explicit-Euler step of the adaptation laws.

    Per joint row n:
        theta_k[n] += q_k[n] * eps[n] * e[n]     * g * dt
        theta_d[n] += q_d[n] * eps[n] * e_dot[n] * g * dt
        theta_v[n] += q_v[n] * eps[n]            * g * dt

    ``gain_decay`` adds an optional forgetting term -decay*theta to each
    rate (off by default; the faithful law has none).
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    g = np.asarray(g, dtype=float)
    n_r, n = params.theta_k.shape
    if g.shape != (n,) or err.e.shape != (n_r,) or gains.q_k.shape != (n_r,):
        raise ValueError("inconsistent shapes between params, gains, error and activations")
    # Divergent inputs surface as the ControllerFault below, not as numpy
    # warnings mid-arithmetic.
    with np.errstate(invalid="ignore", over="ignore"):
        rk = (gains.q_k * err.eps * err.e)[:, None] * g[None, :]
        rd = (gains.q_d * err.eps * err.e_dot)[:, None] * g[None, :]
        rv = (gains.q_v * err.eps)[:, None] * g[None, :]
        if gain_decay != 0.0:
            rk = rk - gain_decay * params.theta_k
            rd = rd - gain_decay * params.theta_d
            rv = rv - gain_decay * params.theta_v
        theta_k = params.theta_k + rk * dt
        theta_d = params.theta_d + rd * dt
        theta_v = params.theta_v + rv * dt
    for name, m in (("theta_k", theta_k), ("theta_d", theta_d), ("theta_v", theta_v)):
        if not np.all(np.isfinite(m)):
            raise ControllerFault(f"adaptation produced non-finite {name}")
    return AdaptiveParams(theta_k=theta_k, theta_d=theta_d, theta_v=theta_v)


def fixed_gain_step(
    q: np.ndarray,
    q_dot: np.ndarray,
    q_d: np.ndarray,
    ks0: np.ndarray,
    kd0: np.ndarray,
    tau_max: np.ndarray,
) -> TorqueCommand:
    """Constant-gain impedance baseline: tau = -(Ks0*e + Kd0*e_dot), no feedforward."""
    err = tracking_error(q, q_dot, q_d, pi=1.0)
    n = err.e.shape[0]
    return compute_torque(err, _as_vector(ks0, n, "ks0"), _as_vector(kd0, n, "kd0"), np.zeros(n), tau_max)


def position_mode_step(
    q: np.ndarray,
    q_dot: np.ndarray,
    q_d: np.ndarray,
    position_gains: tuple,
    tau_max: np.ndarray,
) -> TorqueCommand:
    """Stiff-PD emulation of a position servo: same law as fixed gains, high stiffness."""
    ks, kd = position_gains
    return fixed_gain_step(q, q_dot, q_d, ks, kd, tau_max)


def diagnostic_tracking_cost(err: TrackingError, inertia: np.ndarray) -> float:
    """Inertia-weighted quadratic sliding-error cost, 0.5 * sum(m_i * eps_i^2).

    Diagnostic only; the control and adaptation laws never use it.
    """
    inertia = np.asarray(inertia, dtype=float)
    if np.any(inertia <= 0.0):
        raise ValueError("inertia entries must be positive")
    return float(0.5 * np.sum(inertia * err.eps**2))


@dataclass
class ControllerConfig:
    """Controller block of a scenario file."""

    type: str = "adaptive"
    pi: float = 10.0
    q_k: float | list = 10.0
    q_d: float | list = 1.0
    q_v: float | list = 20.0
    ks_init: float = 1.0
    kd_init: float = 0.1
    gain_decay: float = 0.0

    @staticmethod
    def from_dict(d: dict) -> "ControllerConfig":
        known = {f for f in ControllerConfig.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown controller config fields: {sorted(unknown)}")
        cfg = ControllerConfig(**d)
        if cfg.type not in ("adaptive", "fixed", "position"):
            raise ValueError(f"controller type must be adaptive|fixed|position, got {cfg.type!r}")
        return cfg


class AdaptiveController:
    """Online loop: advance phase, evaluate basis, measure error, adapt, emit torque.

    Owns the phase and the parameter matrices; everything else is passed in
    per tick. ``step`` is deterministic in (state, inputs).
    """

    type = "adaptive"

    def __init__(
        self,
        basis: GaussianBasis,
        gains: AdaptationGains,
        tau_max: np.ndarray,
        ks_init: float = 1.0,
        kd_init: float = 0.1,
        phase_tau: float = 1.0,
        gain_decay: float = 0.0,
    ):
        self.basis = basis
        self.gains = gains
        self.tau_max = np.asarray(tau_max, dtype=float)
        self.n_joints = self.tau_max.shape[0]
        self.ks_init = float(ks_init)
        self.kd_init = float(kd_init)
        self.phase_tau = float(phase_tau)
        self.gain_decay = float(gain_decay)
        if gains.q_k.shape != (self.n_joints,):
            raise ValueError("gain vectors must match the joint count")
        self.reset()

    def reset(self) -> None:
        """Fresh episode: phase back to s0, parameters to their compliant start."""
        self.phase = PhaseState(self.basis.s0)
        self.params = AdaptiveParams.initial(self.n_joints, self.basis.n, self.ks_init, self.kd_init)
        self._profiles = (
            np.full(self.n_joints, self.ks_init),
            np.full(self.n_joints, self.kd_init),
            np.zeros(self.n_joints),
        )
        self._last_err = TrackingError(
            np.zeros(self.n_joints), np.zeros(self.n_joints), np.zeros(self.n_joints)
        )

    def step(self, q: np.ndarray, q_dot: np.ndarray, q_d: np.ndarray, dt: float) -> TorqueCommand:
        self.phase = phase_step(self.phase, dt, self.phase_tau)
        g = eval_basis(self.basis, self.phase.s)
        err = tracking_error(q, q_dot, q_d, self.gains.pi)
        self.params = update_params(self.params, self.gains, err, g, dt, self.gain_decay)
        ks, kd, v = compliant_profiles(self.params, g)
        self._profiles = (ks, kd, v)
        self._last_err = err
        return compute_torque(err, ks, kd, v, self.tau_max)

    def profiles(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Profiles (Ks, Kd, v) as of the last step (initial values before any step)."""
        return self._profiles

    def last_error(self) -> TrackingError:
        return self._last_err


class FixedGainController:
    """Constant-gain impedance baseline with the adaptive controller's interface."""

    type = "fixed"

    def __init__(self, ks0, kd0, tau_max: np.ndarray, pi: float = 10.0):
        self.tau_max = np.asarray(tau_max, dtype=float)
        n = self.tau_max.shape[0]
        self.ks0 = _as_vector(ks0, n, "ks0")
        self.kd0 = _as_vector(kd0, n, "kd0")
        self.n_joints = n
        self.pi = float(pi)
        self._last_err = TrackingError(np.zeros(n), np.zeros(n), np.zeros(n))

    def reset(self) -> None:
        n = self.n_joints
        self._last_err = TrackingError(np.zeros(n), np.zeros(n), np.zeros(n))

    def step(self, q, q_dot, q_d, dt: float) -> TorqueCommand:
        self._last_err = tracking_error(q, q_dot, q_d, self.pi)
        return fixed_gain_step(q, q_dot, q_d, self.ks0, self.kd0, self.tau_max)

    def profiles(self):
        return self.ks0, self.kd0, np.zeros(self.n_joints)

    def last_error(self) -> TrackingError:
        return self._last_err


class PositionModeController(FixedGainController):
    """Position-servo emulation: the fixed-gain law at the model's high servo gains."""

    type = "position"


def make_controller(cfg: ControllerConfig, n_joints: int, tau_max, position_gains, basis: GaussianBasis, phase_tau: float = 1.0):
    """Build the controller named by ``cfg.type`` for a hand with the given limits."""
    tau_max = _as_vector(tau_max, n_joints, "tau_max")
    if cfg.type == "adaptive":
        gains = AdaptationGains(
            q_k=_as_vector(cfg.q_k, n_joints, "q_k"),
            q_d=_as_vector(cfg.q_d, n_joints, "q_d"),
            q_v=_as_vector(cfg.q_v, n_joints, "q_v"),
            pi=cfg.pi,
        )
        return AdaptiveController(
            basis, gains, tau_max,
            ks_init=cfg.ks_init, kd_init=cfg.kd_init,
            phase_tau=phase_tau, gain_decay=cfg.gain_decay,
        )
    if cfg.type == "fixed":
        return FixedGainController(cfg.ks_init, cfg.kd_init, tau_max, pi=cfg.pi)
    if cfg.type == "position":
        ks, kd = position_gains
        return PositionModeController(ks, kd, tau_max, pi=cfg.pi)
    raise ValueError(f"unknown controller type {cfg.type!r}")
