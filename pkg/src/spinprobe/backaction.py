"""Loss of spin purity caused by a single passing electron.

The triple integral over (q, q', z) is evaluated in scaled variables
q~ = q/(2 dk_perp), z~ = 2 z dk_perp. The two momentum magnitudes are
handled in band coordinates (q~, d = q~' - q~): the integrand is
concentrated within a few units of the diagonal, so a fixed window in d
with log-spaced panels in q~ resolves it at any beam width. The z~
integral has a Gaussian weight and uses Gauss-Hermite nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import hermite_e
from scipy import special

from .kernel import KernelContext, smear_ft
from .specfun import gauss_legendre_panels

# Default momentum cutoff in units of 2 dk_perp.
Q_CUT_DEFAULT = 16.0
# Cutoff of the fully converged integral, in units of k_a = 1/a0.
SMEAR_CUT = 10.0
BAND_HALF_WIDTH = 10.0
# Relative change between node sets above which the result is flagged.
CONVERGENCE_TOL = 1e-3


@dataclass(frozen=True)
class PurityReport:
    delta_p: float
    q_cut: float
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.delta_p < 0:
            raise ValueError("purity loss must be non-negative")

    def cumulative(self, n_electrons):
        """First-order purity after N electrons, 1 - N * delta_p."""
        n = np.asarray(n_electrons, dtype=float)
        if np.any(n < 0):
            raise ValueError("electron count must be non-negative")
        out = 1.0 - n * self.delta_p
        return float(out) if out.ndim == 0 else out

    @property
    def converged(self) -> bool:
        return bool(self.diagnostics.get("converged", True))


def _band_integral(ctx: KernelContext, q_max: float, nz: int, q_panels: int, nodes: int) -> float:
    dk = ctx.dk
    k_t = ctx.k / (2.0 * dk)
    dkz_t = ctx.beam.dk_z / dk
    lo_edges = np.linspace(0.0, min(4.0, q_max), 9)
    hi_edges = np.geomspace(4.0, q_max, q_panels)[1:] if q_max > 4.0 else np.empty(0)
    q, wq = gauss_legendre_panels(np.concatenate([lo_edges, hi_edges]), nodes)
    d, wd = gauss_legendre_panels(np.linspace(-BAND_HALF_WIDTH, BAND_HALF_WIDTH, 41), nodes)
    qa = q[:, None]
    qb = qa + d[None, :]
    inside = (qb >= 0.0) & (qb <= q_max)
    qb = np.where(inside, qb, 0.0)
    zx, zw = hermite_e.hermegauss(nz)
    acc = np.zeros(inside.shape)
    for z, w in zip(zx / dkz_t, zw):
        g = 1.0 + z * z / (4.0 * k_t * k_t)
        arg = qa * qb * g
        expo = -(0.5 + z * z / (8.0 * k_t * k_t)) * (qa * qa + qb * qb) + arg
        acc += w / math.sqrt(2.0 * math.pi) * np.exp(expo) * special.i1e(arg)
    smear = smear_ft(2.0 * dk * qa, ctx) * smear_ft(2.0 * dk * qb, ctx)
    total = np.sum(wq[:, None] * wd[None, :] * smear * acc * inside)
    return float(4.0 * ctx.r_e**2 * (2.0 * dk) ** 2 * total)


def purity_loss(ctx: KernelContext, q_cut: float | None = Q_CUT_DEFAULT, nz: int = 8,
                q_panels: int = 200, nodes: int = 16) -> PurityReport:
    """Purity loss per electron for an on-resonance spin.

    ``q_cut`` bounds both momentum magnitudes in units of 2 dk_perp; it is
    further capped where the smearing factor has decayed (10 k_a). Pass None
    for the cap alone, which is the converged value of the integral.
    """
    if nz < 2 or nodes < 2:
        raise ValueError("need at least 2 quadrature nodes")
    smear_cap = SMEAR_CUT * ctx.spin.k_a / (2.0 * ctx.dk)
    if q_cut is None:
        q_max = smear_cap
    else:
        if not q_cut > 0:
            raise ValueError("q_cut must be positive")
        q_max = min(float(q_cut), smear_cap)
    value = _band_integral(ctx, q_max, nz, q_panels, nodes)
    check = _band_integral(ctx, q_max, max(2, nz // 2), q_panels // 2, nodes)
    rel = abs(value - check) / value if value > 0 else 0.0
    diag = {"q_max_scaled": q_max, "nz": nz, "q_panels": q_panels, "nodes": nodes,
            "coarse_rel_change": rel, "converged": rel < CONVERGENCE_TOL}
    return PurityReport(delta_p=value, q_cut=q_max, diagnostics=diag)
