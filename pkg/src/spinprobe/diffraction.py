"""Angular-space probability maps near the zero-deflection peak.

Maps are stored as P = p0 + cx <sigma_x> + cy <sigma_y>; the <sigma_z>
coefficient is identically zero for an azimuthally symmetric beam.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .kernel import KernelContext, deflection_kernel_table
from .spin import BlochState

# Validity cut of the first-order description, in units of dk_perp/k_z0.
THETA_CUT = 8.0
# Radial kernel table spacing, in units of dk_perp/k_z0.
TABLE_STEP = 1.0 / 50.0


def azimuthal_factor(phi, varsigma: int):
    """u*(phi) . e_{z,-varsigma}, with u*(phi) = (-sin phi, cos phi, 0)."""
    phi = np.asarray(phi, dtype=float)
    if varsigma == 0:
        return np.zeros(phi.shape, dtype=complex)
    s = float(varsigma)
    return -1j * abs(s) / (2.0 * math.sqrt(2.0)) * ((s - 1.0) * np.exp(1j * phi) + (s + 1.0) * np.exp(-1j * phi))


@dataclass(frozen=True)
class AngularGrid:
    theta_max: float
    n: int

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError("grid needs n >= 2")
        if not self.theta_max > 0:
            raise ValueError("theta_max must be positive")

    @classmethod
    def validity_region(cls, ctx: KernelContext, n: int = 512) -> "AngularGrid":
        return cls(theta_max=THETA_CUT * ctx.dk / ctx.k, n=n)

    @property
    def step(self) -> float:
        return 2.0 * self.theta_max / self.n

    @property
    def axis(self) -> np.ndarray:
        return -self.theta_max + self.step * (np.arange(self.n) + 0.5)

    def check(self, ctx: KernelContext) -> None:
        limit = THETA_CUT * ctx.dk / ctx.k
        if self.theta_max > limit * (1 + 1e-12):
            raise ValueError(f"theta_max {self.theta_max:.3g} beyond the validity cut {limit:.3g}")


@dataclass
class ProbabilityMap:
    """Per-pixel decomposition of the detected density on a square grid.

    ``x`` and ``y`` are pixel-centre coordinates (rad or m), ``region`` marks
    pixels inside the detection area, ``pixel_area`` is the sample cell area.
    """

    kind: str
    x: np.ndarray
    y: np.ndarray
    p0: np.ndarray
    cx: np.ndarray
    cy: np.ndarray
    region: np.ndarray
    pixel_area: float
    meta: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.p0.shape

    @property
    def negative_pixels(self) -> int:
        """Pixels where some unit Bloch vector would make the density negative."""
        return int(np.count_nonzero(self.region & (self.p0 < np.hypot(self.cx, self.cy))))

    def signal(self, bloch: BlochState | tuple) -> np.ndarray:
        s = bloch.s if isinstance(bloch, BlochState) else tuple(bloch)
        return self.cx * s[0] + self.cy * s[1]

    def density(self, bloch: BlochState | tuple) -> np.ndarray:
        """Total density, clipped at zero inside the region and zeroed outside."""
        p = self.p0 + self.signal(bloch)
        return np.where(self.region, np.maximum(p, 0.0), 0.0)

    def same_grid(self, other: "ProbabilityMap") -> bool:
        return (self.kind == other.kind and self.shape == other.shape
                and np.array_equal(self.x, other.x) and np.array_equal(self.y, other.y))

    def scaled_signal(self, factor: float) -> "ProbabilityMap":
        return ProbabilityMap(self.kind, self.x, self.y, self.p0, self.cx * factor, self.cy * factor,
                              self.region, self.pixel_area, dict(self.meta))


def incident_profile(k_perp, ctx: KernelContext):
    """Transverse momentum amplitude exp(-k^2/(4 dk^2)) / (sqrt(2 pi) dk)."""
    dk = ctx.dk
    return np.exp(-np.asarray(k_perp) ** 2 / (4.0 * dk * dk)) / (math.sqrt(2.0 * math.pi) * dk)


def pi0_diff(theta, ctx: KernelContext):
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0):
        raise ValueError("theta must be non-negative")
    return ctx.k**2 * incident_profile(ctx.k * theta, ctx) ** 2


class RadialKernel:
    """Cubic interpolant of the z_p = 0 deflection kernel on [0, theta_max]."""

    def __init__(self, ctx: KernelContext, theta_max: float):
        step = TABLE_STEP * ctx.dk / ctx.k
        n = max(16, int(math.ceil(theta_max / step)) + 1)
        self.theta = np.linspace(0.0, theta_max, n)
        self.values = deflection_kernel_table(self.theta, ctx)
        self._spline = CubicSpline(self.theta, self.values)

    def __call__(self, theta):
        return self._spline(theta)


def pi_z_diff(theta_vec, ctx: KernelContext, varsigma: int, kernel: RadialKernel | None = None):
    """First-order spin-flip term Pi_{z,varsigma} at angular positions (theta_x, theta_y)."""
    tx, ty = (np.asarray(v, dtype=float) for v in theta_vec)
    theta = np.hypot(tx, ty)
    if varsigma == 0:
        return np.zeros(theta.shape, dtype=complex)
    if kernel is None:
        kernel = RadialKernel(ctx, max(float(np.max(theta)), ctx.dk / ctx.k))
    phi = np.arctan2(ty, tx)
    pref = -(2.0 ** (abs(varsigma) / 2.0)) / math.pi * ctx.r_e * ctx.k**2 / ctx.dk
    f = np.exp(-(ctx.k * theta) ** 2 / (4.0 * ctx.dk**2))
    out = pref * azimuthal_factor(phi, varsigma) * kernel(theta) * f
    return out


def assemble(p0, pi_plus, pi_minus, pi_zero=None):
    """Coefficients multiplying <sigma_x>, <sigma_y>, <sigma_z> from the first-order terms."""
    cx = np.real(pi_plus + pi_minus)
    cy = -np.imag(pi_plus - pi_minus)
    cz = np.zeros_like(cx) if pi_zero is None else 2.0 * np.real(pi_zero)
    return cx, cy, cz


def p_diff_map(grid: AngularGrid, ctx: KernelContext) -> ProbabilityMap:
    grid.check(ctx)
    axis = grid.axis
    tx, ty = np.meshgrid(axis, axis, indexing="xy")
    theta = np.hypot(tx, ty)
    region = theta <= grid.theta_max
    kernel = RadialKernel(ctx, float(theta.max()))
    p0 = pi0_diff(theta, ctx)
    plus = pi_z_diff((tx, ty), ctx, +1, kernel)
    minus = pi_z_diff((tx, ty), ctx, -1, kernel)
    cx, cy, _ = assemble(p0, plus, minus)
    m = ProbabilityMap("angular", axis, axis.copy(), p0, cx, cy, region, grid.step**2,
                       meta={"theta_max": grid.theta_max, "n": grid.n})
    m.meta["negative_pixels"] = m.negative_pixels
    return m


def differential_map(pmap: ProbabilityMap, s_drive: BlochState, s_ref: BlochState) -> np.ndarray:
    """P_drive - P_ref; the zero-order term cancels exactly."""
    d = (s_drive.x - s_ref.x, s_drive.y - s_ref.y, 0.0)
    return pmap.cx * d[0] + pmap.cy * d[1]
