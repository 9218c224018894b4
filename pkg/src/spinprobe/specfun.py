"""Special functions and quadrature primitives.

Real-argument Bessel functions and erf come from scipy.special; 1-D adaptive
quadrature wraps QUADPACK. Fixed Gauss-Legendre panels are used wherever a
kernel must be evaluated on many points at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, special

COMPLEX_J1_MAX_ABS = 30.0


@dataclass(frozen=True)
class QuadSpec:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-30
    max_subdivisions: int = 200

    def __post_init__(self) -> None:
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be > 0")
        if self.abs_tol < 0:
            raise ValueError("abs_tol must be >= 0")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")


DEFAULT_QUAD = QuadSpec()


@dataclass(frozen=True)
class QuadResult:
    value: complex | float
    error: float
    converged: bool


def bessel_j0(x):
    return special.j0(x)


def bessel_j1(x):
    return special.j1(x)


def bessel_i1_scaled(x):
    """I1(x) * exp(-x) for x >= 0."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise ValueError("bessel_i1_scaled requires x >= 0")
    out = special.i1e(arr)
    return float(out) if np.ndim(out) == 0 else out


def bessel_j1_complex(z):
    """J1 for complex argument, restricted to |z| <= 30.

    Outside that disk callers should use the masked Hankel path instead.
    """
    arr = np.asarray(z, dtype=complex)
    if np.any(np.abs(arr) > COMPLEX_J1_MAX_ABS):
        raise ValueError(f"|z| exceeds {COMPLEX_J1_MAX_ABS}; use the numerical Hankel path")
    out = special.jv(1, arr)
    return complex(out) if np.ndim(out) == 0 else out


def erf(x):
    return special.erf(x)


def integrate_1d(f: Callable[[float], complex], a: float, b: float, spec: QuadSpec = DEFAULT_QUAD,
                 points=None) -> QuadResult:
    """Adaptive quadrature of a real- or complex-valued function on [a, b]."""
    if not a < b:
        raise ValueError("integrate_1d requires a < b")
    kw = dict(epsabs=spec.abs_tol, epsrel=spec.rel_tol, limit=spec.max_subdivisions, full_output=1)
    if points is not None:
        kw["points"] = [p for p in points if a < p < b]

    probe = f(0.5 * (a + b))
    is_complex = np.iscomplexobj(probe)

    def run(g):
        out = integrate.quad(g, a, b, **kw)
        converged = len(out) < 4 or out[3] is None
        return out[0], out[1], converged

    if not is_complex:
        v, err, ok = run(lambda t: float(f(t)))
        return QuadResult(v, err, ok)
    vr, er, okr = run(lambda t: complex(f(t)).real)
    vi, ei, oki = run(lambda t: complex(f(t)).imag)
    return QuadResult(complex(vr, vi), float(np.hypot(er, ei)), okr and oki)


def gauss_legendre_panels(edges, nodes: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of composite Gauss-Legendre quadrature over consecutive edges."""
    edges = np.asarray(edges, dtype=float)
    x, w = leggauss(nodes)
    a = edges[:-1, None]
    b = edges[1:, None]
    half = 0.5 * (b - a)
    return (0.5 * (a + b) + half * x).ravel(), (half * w).ravel()


def gauss_legendre_windows(lo, hi, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-row Gauss-Legendre nodes/weights for intervals [lo[i], hi[i]]."""
    lo = np.asarray(lo, dtype=float)[..., None]
    hi = np.asarray(hi, dtype=float)[..., None]
    x, w = leggauss(nodes)
    half = 0.5 * (hi - lo)
    return 0.5 * (hi + lo) + half * x, half * w
