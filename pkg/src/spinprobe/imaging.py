"""Position-space amplitudes and probability maps at a defocus plane.

The canonical path is a masked Hankel transform on composite Gauss-Legendre
panels whose widths follow the local phase advance of the integrand
(Bessel oscillation plus the defocus chirp). Closed forms without a mask are
kept as cross-checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.interpolate import CubicSpline

from .diffraction import ProbabilityMap, assemble, azimuthal_factor, incident_profile
from .kernel import KernelContext, deflection_kernel_table, smear_ft
from .specfun import bessel_j1_complex, gauss_legendre_panels

NORM_IMG = 1.0 / (4.0 * math.pi**2)
K_MAX_DEFAULT = 2.0 * math.pi / 50e-12
# Upper limit (units of 1/a0) of the transform when no mask is applied.
NO_MASK_LIMIT = 100.0
MAX_DEFOCUS = 1e-7


@dataclass(frozen=True)
class MaskFunction:
    kind: str = "hard_cutoff"
    k_max: float = K_MAX_DEFAULT

    def __post_init__(self) -> None:
        if self.kind not in ("hard_cutoff", "none"):
            raise ValueError("mask kind must be 'hard_cutoff' or 'none'")
        if not self.k_max > 0:
            raise ValueError("k_max must be positive")

    def upper(self, ctx: KernelContext) -> float:
        return self.k_max if self.kind == "hard_cutoff" else NO_MASK_LIMIT / ctx.spin.a0


NO_MASK = MaskFunction("none")


@dataclass(frozen=True)
class SpatialGrid:
    x_max: float
    n: int
    z_d: float = 0.0

    def __post_init__(self) -> None:
        if not self.x_max > 0:
            raise ValueError("x_max must be positive")
        if self.n < 2:
            raise ValueError("grid needs n >= 2")
        if abs(self.z_d) > MAX_DEFOCUS:
            raise ValueError(f"|z_d| must not exceed {MAX_DEFOCUS} m")

    @property
    def step(self) -> float:
        return 2.0 * self.x_max / self.n

    @property
    def axis(self) -> np.ndarray:
        return -self.x_max + self.step * (np.arange(self.n) + 0.5)


def hankel_nodes(ctx: KernelContext, r_max: float, z_d: float, mask: MaskFunction,
                 nodes: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Panel quadrature on [0, k_upper] with at most ~pi/2 of phase per panel."""
    k_upper = mask.upper(ctx)
    dk = ctx.dk
    chirp_rate = abs(z_d) / ctx.k
    edges = [0.0]
    k = 0.0
    while k < k_upper:
        phase_w = (math.pi / 2.0) / max(r_max + k * chirp_rate, 1e-300)
        shape_w = max(0.5 * dk, 0.1 * k) if k < 40.0 * dk else 0.1 * k
        k = min(k + min(phase_w, shape_w), k_upper)
        edges.append(k)
    return gauss_legendre_panels(edges, nodes)


def _chirp(k, z_d: float, ctx: KernelContext):
    return np.exp(-1j * k * k * z_d / (2.0 * ctx.k))


def _hankel(order: int, r, k, weights, chunk: int = 64):
    r = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.empty(r.shape, dtype=complex)
    flat = r.ravel()
    res = out.reshape(-1)
    bess = special.j0 if order == 0 else special.j1
    for i in range(0, flat.size, chunk):
        res[i:i + chunk] = bess(np.outer(flat[i:i + chunk], k)) @ weights
    return out


class RadialAmplitudes:
    """B1(r) and the radial part of B_{z,s}(r) on a table, with cubic interpolation."""

    def __init__(self, ctx: KernelContext, z_d: float, r_max: float, mask: MaskFunction = MaskFunction(),
                 step: float | None = None):
        self.ctx, self.z_d, self.mask = ctx, z_d, mask
        if step is None:
            step = r_max / 2048.0
        n = max(32, int(math.ceil(r_max / step)) + 1)
        self.r = np.linspace(0.0, r_max, n)
        k, w = hankel_nodes(ctx, r_max, z_d, mask)
        self.n_nodes = k.size
        chirp = _chirp(k, z_d, ctx)
        self._w_b1 = w * k * chirp * incident_profile(k, ctx) * 2.0 * math.pi
        self._w_h = w * k * chirp * deflection_kernel_table(k / ctx.k, ctx)
        self._k = k
        self.b1_table = _hankel(0, self.r, k, self._w_b1)
        self.h_table = _hankel(1, self.r, k, self._w_h)
        self._b1 = (CubicSpline(self.r, self.b1_table.real), CubicSpline(self.r, self.b1_table.imag))
        self._h = (CubicSpline(self.r, self.h_table.real), CubicSpline(self.r, self.h_table.imag))

    def b1(self, r):
        return self._b1[0](r) + 1j * self._b1[1](r)

    def radial(self, r):
        return self._h[0](r) + 1j * self._h[1](r)

    def b1_direct(self, r):
        return _hankel(0, r, self._k, self._w_b1)

    def radial_direct(self, r):
        return _hankel(1, r, self._k, self._w_h)


def b1(r_perp, z_d: float, ctx: KernelContext, mask: MaskFunction = MaskFunction()):
    """Propagated unscattered amplitude at radius r_perp (direct quadrature)."""
    r = np.atleast_1d(np.asarray(r_perp, dtype=float))
    if np.any(r < 0):
        raise ValueError("r_perp must be non-negative")
    k, w = hankel_nodes(ctx, float(r.max()), z_d, mask)
    weights = w * k * _chirp(k, z_d, ctx) * incident_profile(k, ctx) * 2.0 * math.pi
    out = _hankel(0, r, k, weights)
    return out.item() if np.ndim(r_perp) == 0 else out


def b1_analytic(r_perp, z_d: float, ctx: KernelContext):
    zeta = ctx.zeta(z_d)
    r = np.asarray(r_perp, dtype=float)
    return 2.0 * math.sqrt(2.0 * math.pi) * ctx.dk / zeta * np.exp(-(r * ctx.dk) ** 2 / zeta)


def _bz_prefactor(varsigma: int, ctx: KernelContext) -> float:
    return 2.0 * math.sqrt(2.0 * math.pi) * 2.0 ** (abs(varsigma) / 2.0) * ctx.r_e


def bz_radial(r_perp, z_d: float, ctx: KernelContext, mask: MaskFunction = MaskFunction()):
    """Hankel factor int dk k chirp J1(k r) L(k/k_z0; 0) M(k)."""
    r = np.atleast_1d(np.asarray(r_perp, dtype=float))
    k, w = hankel_nodes(ctx, float(r.max()), z_d, mask)
    weights = w * k * _chirp(k, z_d, ctx) * deflection_kernel_table(k / ctx.k, ctx)
    out = _hankel(1, r, k, weights)
    return out.item() if np.ndim(r_perp) == 0 else out


def b_z(r_vec, z_d: float, ctx: KernelContext, varsigma: int, mask: MaskFunction = MaskFunction(),
        radial=None):
    """Scattered amplitude B_{z,varsigma} at positions (x, y)."""
    x, y = (np.asarray(v, dtype=float) for v in r_vec)
    r = np.hypot(x, y)
    if varsigma == 0:
        return np.zeros(r.shape, dtype=complex)
    h = bz_radial(r, z_d, ctx, mask) if radial is None else radial(r)
    phi = np.arctan2(y, x)
    out = -1j * _bz_prefactor(varsigma, ctx) * azimuthal_factor(phi, varsigma) * h
    return out.item() if out.ndim == 0 else out


def bz_radial_analytic(r_perp, z_d: float, ctx: KernelContext, q_max_a0: float = 50.0, nodes: int = 4000):
    """Radial factor without mask from the Gaussian-Bessel closed form (z_p = 0).

    Needs |q r / zeta| <= 30 on the whole q range; raises otherwise.
    """
    r = float(r_perp)
    dk = ctx.dk
    zd = ctx.zeta(z_d)
    q_max = q_max_a0 / ctx.spin.a0
    edges = np.concatenate([np.linspace(0.0, 20.0 * dk, 41), np.geomspace(20.0 * dk, q_max, 400)[1:]])
    q, w = gauss_legendre_panels(edges, 16)
    arg = q * r / zd
    bess = bessel_j1_complex(arg)
    integrand = (np.exp(-(q * q) / (4.0 * dk * dk) * (1.0 - 1.0 / zd)) * smear_ft(q, ctx) / zd * bess
                 / (2.0 * dk))
    return 2.0 * dk * dk * np.exp(-(r * dk) ** 2 / zd) * np.sum(w * integrand)


def p_img_map(grid: SpatialGrid, ctx: KernelContext, mask: MaskFunction = MaskFunction(),
              zernike: bool = False, amplitudes: RadialAmplitudes | None = None) -> ProbabilityMap:
    axis = grid.axis
    x, y = np.meshgrid(axis, axis, indexing="xy")
    r = np.hypot(x, y)
    if amplitudes is None:
        amplitudes = RadialAmplitudes(ctx, grid.z_d, float(r.max()) * 1.001, mask,
                                      step=grid.x_max / (4.0 * grid.n))
    b1v = amplitudes.b1(r)
    unscattered = 1j * b1v if zernike else b1v
    terms = {}
    for s in (+1, -1):
        bz = b_z((x, y), grid.z_d, ctx, s, mask, radial=amplitudes.radial)
        terms[s] = NORM_IMG * np.conj(unscattered) * bz
    p0 = NORM_IMG * np.abs(b1v) ** 2
    cx, cy, _ = assemble(p0, terms[+1], terms[-1])
    m = ProbabilityMap("spatial", axis, axis.copy(), p0, cx, cy, np.ones(p0.shape, dtype=bool),
                       grid.step**2,
                       meta={"x_max": grid.x_max, "n": grid.n, "z_d": grid.z_d, "zernike": zernike,
                             "mask": mask.kind, "k_max": mask.k_max, "hankel_nodes": amplitudes.n_nodes})
    m.meta["negative_pixels"] = m.negative_pixels
    return m


def coherent_wavefunction(grid: SpatialGrid, z: float, ctx: KernelContext,
                          mask: MaskFunction = MaskFunction()) -> tuple[np.ndarray, float]:
    """Normalised coherent (no spin flip) electron amplitude for a spin along +y.

    Returns the complex array on the grid, with the common exp(i k z) phase
    removed, and the norm constant 4 pi^2 sqrt(8 pi) dk_z exp(-2 z^2 dk_z^2).
    """
    axis = grid.axis
    x, y = np.meshgrid(axis, axis, indexing="xy")
    r = np.hypot(x, y)
    amps = RadialAmplitudes(ctx, z, float(r.max()) * 1.001, mask, step=grid.x_max / (4.0 * grid.n))
    b1v = amps.b1(r)
    plus = b_z((x, y), z, ctx, +1, mask, radial=amps.radial)
    minus = b_z((x, y), z, ctx, -1, mask, radial=amps.radial)
    psi = (b1v + 0.5j * (plus - minus)) / (2.0 * math.pi)
    dkz = ctx.beam.dk_z
    norm = 4.0 * math.pi**2 * math.sqrt(8.0 * math.pi) * dkz * math.exp(-2.0 * (z * dkz) ** 2)
    return psi, norm


def winding_number(values: np.ndarray) -> int:
    """Net phase winding of samples taken counter-clockwise around a closed loop."""
    ph = np.angle(np.asarray(values))
    d = np.diff(np.concatenate([ph, ph[:1]]))
    d = (d + np.pi) % (2.0 * np.pi) - np.pi
    return int(round(d.sum() / (2.0 * np.pi)))
