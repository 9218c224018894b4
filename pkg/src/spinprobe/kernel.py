"""Scattering kernels shared by diffraction and imaging.

The deflection kernel is

    L(theta; z_p) = int_0^inf dq/(2 dk) exp[-(k^2 theta^2 + q^2)/(4 dk^2)] I1(theta q k zeta/(2 dk^2)) I_es(q)
                    * exp(i (s delta_k^2/k - q^2/(2k)) z_p),   zeta = 1 + 2i dk^2 z_p / k.

The Gaussian and the modified Bessel factor are always combined as
exp[-(k theta - q)^2/(4 dk^2)] * i1e(.) so the narrow-beam case never overflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .core import BeamParams, PhysConsts, SpinParams, default_params_200keV
from .specfun import DEFAULT_QUAD, QuadResult, QuadSpec, gauss_legendre_windows, integrate_1d

# Half-width of the q window around k*theta, in units of dk_perp.
Q_WINDOW = 10.0
# Above this dk_perp * a0 the smearing factor varies on the beam scale.
LARGEPROBE_LIMIT = 0.05


@dataclass(frozen=True)
class KernelContext:
    beam: BeamParams
    spin: SpinParams
    consts: PhysConsts = PhysConsts()

    @classmethod
    def default(cls, dk_perp: float | None = None) -> "KernelContext":
        consts, beam, spin = default_params_200keV() if dk_perp is None else default_params_200keV(dk_perp)
        return cls(beam=beam, spin=spin, consts=consts)

    @property
    def k(self) -> float:
        return self.beam.k_z0

    @property
    def dk(self) -> float:
        return self.beam.dk_perp

    @property
    def r_e(self) -> float:
        return self.consts.r_e

    @property
    def delta_k(self) -> float:
        return self.spin.delta_k(self.beam, self.consts)

    def zeta(self, z: float) -> complex:
        return 1.0 + 2j * self.dk**2 * z / self.k


def smear_ft(q, ctx: KernelContext):
    """Fourier transform of the hydrogen-1s spin density, 16/(4 + a0^2 q^2)^2."""
    q = np.asarray(q, dtype=float)
    if np.any(q < 0):
        raise ValueError("smear_ft requires q >= 0")
    a0 = ctx.spin.a0
    out = 16.0 / (4.0 + (a0 * q) ** 2) ** 2
    return float(out) if out.ndim == 0 else out


def _integrand_z0(q, theta, ctx: KernelContext):
    k, dk = ctx.k, ctx.dk
    arg = theta * q * k / (2.0 * dk * dk)
    return np.exp(-((k * theta - q) ** 2) / (4.0 * dk * dk)) * special.i1e(arg) * smear_ft(q, ctx) / (2.0 * dk)


def _q_window(theta: float, ctx: KernelContext) -> tuple[float, float]:
    centre = ctx.k * theta
    return max(0.0, centre - Q_WINDOW * ctx.dk), centre + Q_WINDOW * ctx.dk


def deflection_kernel(theta: float, ctx: KernelContext, varsigma: int = 1, z_p: float = 0.0,
                      spec: QuadSpec = DEFAULT_QUAD) -> QuadResult:
    """Adaptive evaluation of the deflection kernel at one angle."""
    if theta < 0:
        raise ValueError("theta must be non-negative")
    if varsigma not in (-1, 0, 1):
        raise ValueError("varsigma must be -1, 0 or +1")
    if theta == 0:
        return QuadResult(0.0 if z_p == 0 else 0j, 0.0, True)
    lo, hi = _q_window(theta, ctx)
    if z_p == 0:
        return integrate_1d(lambda q: _integrand_z0(q, theta, ctx), lo, hi, spec, points=[ctx.k * theta])

    k, dk = ctx.k, ctx.dk
    zeta = ctx.zeta(z_p)
    lead = np.exp(1j * varsigma * ctx.delta_k**2 * z_p / k)

    def f(q):
        # Re(zeta) = 1, so exp(-x) I1(x zeta) is exactly ive(1, x zeta).
        x = theta * q * k / (2.0 * dk * dk)
        env = math.exp(-((k * theta - q) ** 2) / (4.0 * dk * dk))
        return env * special.ive(1, x * zeta) * np.exp(-1j * q * q * z_p / (2 * k)) * smear_ft(q, ctx) / (2.0 * dk)

    res = integrate_1d(f, lo, hi, spec, points=[k * theta])
    return QuadResult(lead * res.value, res.error, res.converged)


def deflection_kernel_table(theta, ctx: KernelContext, nodes: int = 160) -> np.ndarray:
    """Vectorised z_p = 0 kernel on an array of angles (fixed Gauss-Legendre window)."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if np.any(theta < 0):
        raise ValueError("theta must be non-negative")
    centre = ctx.k * theta
    lo = np.maximum(0.0, centre - Q_WINDOW * ctx.dk)
    hi = centre + Q_WINDOW * ctx.dk
    out = np.empty(theta.shape)
    flat_t, flat_lo, flat_hi = theta.ravel(), lo.ravel(), hi.ravel()
    res = out.reshape(-1)
    chunk = max(1, 2_000_000 // nodes)
    for i in range(0, flat_t.size, chunk):
        sl = slice(i, i + chunk)
        q, w = gauss_legendre_windows(flat_lo[sl], flat_hi[sl], nodes)
        res[sl] = np.sum(w * _integrand_z0(q, flat_t[sl, None], ctx), axis=1)
    return out


def deflection_kernel_largeprobe(theta, ctx: KernelContext, varsigma: int = 1, z_p: float = 0.0):
    """Closed form valid when the smearing factor is ~1 over the beam's momentum spread."""
    if ctx.dk * ctx.spin.a0 > LARGEPROBE_LIMIT:
        raise ValueError(
            f"dk_perp*a0 = {ctx.dk * ctx.spin.a0:.3g} > {LARGEPROBE_LIMIT}; use deflection_kernel instead"
        )
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0):
        raise ValueError("theta must be non-negative")
    k, dk = ctx.k, ctx.dk
    zeta = ctx.zeta(z_p)
    x = (k * theta) ** 2 / (4.0 * dk * dk)
    # exp(-x) * (exp(x zeta) - 1) = expm1(x (zeta - 1)) - expm1(-x)
    bracket = np.expm1(x * (zeta - 1.0)) - np.expm1(-x)
    with np.errstate(invalid="ignore", divide="ignore"):
        val = np.where(theta > 0, dk / np.where(theta > 0, theta * k * zeta, 1.0) * bracket, 0.0)
    val = val * np.exp(1j * varsigma * ctx.delta_k**2 * z_p / k)
    if z_p == 0:
        val = val.real
    return val.item() if np.ndim(val) == 0 else val


def longitudinal_overlap(q_z, ctx: KernelContext, z_p: float = 0.0):
    """exp(-i q_z z_p) exp(-q_z^2 / (8 dk_z^2))."""
    q_z = np.asarray(q_z, dtype=float)
    out = np.exp(-1j * q_z * z_p) * np.exp(-(q_z**2) / (8.0 * ctx.beam.dk_z**2))
    return out.item() if out.ndim == 0 else out
