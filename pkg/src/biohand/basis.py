"""Exponentially decaying phase variable and normalized Gaussian basis functions.

The phase ``s`` starts at ``s0`` and decays as ``ds/dt = -s / tau``; basis
activations are squared-exponential kernels over phase, normalized to sum
to one. Compliant profiles elsewhere are inner products of parameter rows
with the activation vector, so the activation vector is the only thing this
module needs to produce.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["PhaseState", "GaussianBasis", "phase_step", "eval_basis"]


@dataclass(frozen=True)
class PhaseState:
    """Current value of the decaying phase variable. Stays positive for all finite time."""

    s: float = 1.0

    def __post_init__(self) -> None:
        if not (self.s > 0.0 and math.isfinite(self.s)):
            raise ValueError(f"phase must be a positive finite number, got {self.s}")


def phase_step(phase: PhaseState, dt: float, tau: float = 1.0) -> PhaseState:
    """Advance the phase by ``dt`` seconds using the closed-form decay solution.

    Exact (no integration error): s(t + dt) = s(t) * exp(-dt / tau).
    """
    if dt < 0.0:
        raise ValueError(f"dt must be nonnegative, got {dt}")
    if tau <= 0.0:
        raise ValueError(f"tau must be positive, got {tau}")
    return PhaseState(phase.s * math.exp(-dt / tau))


@dataclass(frozen=True)
class GaussianBasis:
    """A set of N squared-exponential kernels over the phase interval (0, s0].

    centers: kernel centers, pairwise distinct, each in (0, s0].
    widths:  positive precision values; larger = narrower kernel.
    """

    centers: np.ndarray
    widths: np.ndarray
    s0: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "centers", np.asarray(self.centers, dtype=float))
        object.__setattr__(self, "widths", np.asarray(self.widths, dtype=float))
        c, h = self.centers, self.widths
        if c.ndim != 1 or h.ndim != 1 or c.size != h.size or c.size < 1:
            raise ValueError("centers and widths must be 1-D arrays of equal, nonzero length")
        if not (self.s0 > 0.0 and math.isfinite(self.s0)):
            raise ValueError(f"s0 must be positive and finite, got {self.s0}")
        if not np.all(np.isfinite(c)) or np.any(c <= 0.0) or np.any(c > self.s0):
            raise ValueError("centers must be finite and lie in (0, s0]")
        if len(np.unique(c)) != c.size:
            raise ValueError("centers must be pairwise distinct")
        if not np.all(np.isfinite(h)) or np.any(h <= 0.0):
            raise ValueError("widths must be finite and strictly positive")

    @property
    def n(self) -> int:
        return self.centers.size

    @staticmethod
    def time_spaced(n: int, duration: float, tau: float = 1.0, s0: float = 1.0) -> "GaussianBasis":
        """Build a basis whose kernels activate at equal time intervals over ``duration``.

        Centers sit at the phase values reached at uniformly spaced times,
        c_i = s0 * exp(-t_i / tau); widths are 1 / (c_{i+1} - c_i)^2 with the
        last width copying its neighbour, so adjacent kernels overlap evenly.
        """
        if n < 1:
            raise ValueError(f"need at least one basis function, got {n}")
        if duration <= 0.0 or tau <= 0.0:
            raise ValueError("duration and tau must be positive")
        times = np.linspace(0.0, duration, n)
        centers = s0 * np.exp(-times / tau)
        if n == 1:
            widths = np.array([1.0])
        else:
            diffs = np.diff(centers)
            widths = 1.0 / diffs**2
            widths = np.append(widths, widths[-1])
        return GaussianBasis(centers=centers, widths=widths, s0=s0)


def eval_basis(basis: GaussianBasis, s: float) -> np.ndarray:
    """Normalized activation vector g at phase ``s``: g_n = w_n / sum(w).

    w_n = exp(-0.5 * h_n * (s - c_n)^2). Kernels are floored at the smallest
    positive normal float so an underflowed tail stays strictly positive,
    and the normalizer sums in a fixed (sorted) order so permuting the
    kernels permutes g bit-exactly. All entries lie in (0, 1) and sum to one.
    """
    if not (s > 0.0 and math.isfinite(s)):
        raise ValueError(f"phase must be positive and finite, got {s}")
    w = np.exp(-0.5 * basis.widths * (s - basis.centers) ** 2)
    w = np.maximum(w, np.finfo(float).tiny)
    return w / np.sort(w).sum()
