"""Microwave pulse driving of the spin Bloch vector."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

# Pre-pulse state: spin anti-aligned with the bias field.
GROUND_STATE = (0.0, 0.0, -1.0)
# Reference detuning for the "spin not driven" image, in units of omega0.
FAR_OFF_RESONANT = 10.0
# Detunings (units of omega0) of the four representative cases.
TABLE_DETUNINGS = (0.0, 0.025, 0.05, 0.075)
DEFAULT_RABI_RATIO = 0.01


@dataclass(frozen=True)
class PulseParams:
    omega1: float
    delta: float
    duration: float

    def __post_init__(self) -> None:
        if not self.omega1 > 0:
            raise ValueError("omega1 must be positive")
        if self.duration < 0:
            raise ValueError("duration must be non-negative")

    @classmethod
    def pi_half(cls, omega1: float, delta: float) -> "PulseParams":
        return cls(omega1=omega1, delta=delta, duration=math.pi / (2.0 * omega1))


@dataclass(frozen=True)
class BlochState:
    s: tuple[float, float, float]

    def __post_init__(self) -> None:
        vec = tuple(float(v) for v in self.s)
        if len(vec) != 3:
            raise ValueError("Bloch vector needs three components")
        if math.sqrt(sum(v * v for v in vec)) > 1.0 + 1e-12:
            raise ValueError("Bloch vector norm exceeds 1")
        object.__setattr__(self, "s", vec)

    @property
    def x(self) -> float:
        return self.s[0]

    @property
    def y(self) -> float:
        return self.s[1]

    @property
    def z(self) -> float:
        return self.s[2]

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.s))

    def transverse_scaled(self, alpha: float) -> "BlochState":
        return BlochState((alpha * self.x, alpha * self.y, self.z))


def rotating_frame(s0: Sequence[float], omega1: float, delta: float, t: float) -> np.ndarray:
    """Closed-form undamped solution (s1, s2, sz) in the frame rotating with the drive."""
    sx0, sy0, sz0 = (float(v) for v in s0)
    w = math.hypot(omega1, delta)
    c, s = math.cos(w * t), math.sin(w * t)
    osc = (delta * sx0 - omega1 * sz0) * c + w * sy0 * s
    along = omega1 * sx0 + delta * sz0
    s1 = (omega1 * along + delta * osc) / w**2
    s2 = sy0 * c + (omega1 * sz0 - delta * sx0) / w * s
    sz = (delta * along - omega1 * osc) / w**2
    return np.array([s1, s2, sz])


def rotating_frame_rhs(s: np.ndarray, omega1: float, delta: float) -> np.ndarray:
    """Time derivative of (s1, s2, sz) generated by the closed form above."""
    s1, s2, sz = s
    return np.array([delta * s2, omega1 * sz - delta * s1, -omega1 * s2])


def to_reporting_frame(s_rot: np.ndarray, omega0: float, t: float) -> np.ndarray:
    """Undo the drive rotation and express the vector on the reporting axes.

    The lab-frame transverse components follow sx = -s1 cos(w0 t) - s2 sin(w0 t),
    sy = s2 cos(w0 t) - s1 sin(w0 t). The reported vector is then rotated by pi
    about x, the axis convention in which the on-resonance pi/2 pulse ends on +y.
    """
    s1, s2, sz = s_rot
    ph = omega0 * t
    lab_x = -s1 * math.cos(ph) - s2 * math.sin(ph)
    lab_y = s2 * math.cos(ph) - s1 * math.sin(ph)
    return np.array([lab_x, -lab_y, -sz])


def stroboscopic_time(t: float, omega0: float) -> float:
    """Phase origin at which omega0*t is a multiple of 2*pi (the imaging instants)."""
    period = 2.0 * math.pi / omega0
    return round(t / period) * period


def drive(initial: BlochState, pulse: PulseParams, omega0: float, stroboscopic: bool = True) -> BlochState:
    """Bloch vector at the end of a microwave pulse.

    With ``stroboscopic`` set, the lab-frame precession phase is evaluated at
    omega0*t = 0 mod 2*pi, i.e. images taken at integer precession periods.
    """
    s_rot = rotating_frame(initial.s, pulse.omega1, pulse.delta, pulse.duration)
    t_phase = stroboscopic_time(pulse.duration, omega0) if stroboscopic else pulse.duration
    out = to_reporting_frame(s_rot, omega0, t_phase)
    # Rounding guard: the map is orthogonal, so only the last ulp can drift.
    n_in, n_out = initial.norm, float(np.linalg.norm(out))
    if n_out > 0:
        out *= n_in / n_out
    return BlochState(tuple(out))


def detuning_sweep(deltas: Sequence[float], omega1: float, omega0: float,
                   initial: BlochState = BlochState(GROUND_STATE)) -> list[BlochState]:
    """pi/2-pulse end states for each detuning (rad/s)."""
    if len(deltas) == 0:
        raise ValueError("detuning sweep needs at least one detuning")
    return [drive(initial, PulseParams.pi_half(omega1, float(d)), omega0) for d in deltas]


def table_states(omega0: float, rabi_ratio: float = DEFAULT_RABI_RATIO) -> list[BlochState]:
    """The four representative prepared states, detunings in TABLE_DETUNINGS."""
    return detuning_sweep([d * omega0 for d in TABLE_DETUNINGS], rabi_ratio * omega0, omega0)


def reference_state(omega0: float, rabi_ratio: float = DEFAULT_RABI_RATIO) -> BlochState:
    """Far off-resonant reference used for differential images."""
    return drive(BlochState(GROUND_STATE),
                 PulseParams.pi_half(rabi_ratio * omega0, FAR_OFF_RESONANT * omega0), omega0)
