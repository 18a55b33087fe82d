"""Exception types shared across the package."""


class ControllerFault(RuntimeError):
    """Adaptation produced a non-finite parameter or torque; the run must abort."""


class SimulationFault(RuntimeError):
    """Dynamics integration produced a non-finite state; the run must abort."""


class TrajectoryFormatError(ValueError):
    """A trajectory file is empty, non-monotone in time, or has the wrong columns."""


class TrajectoryClampWarning(UserWarning):
    """A loaded trajectory contained out-of-limit values that were clamped."""
