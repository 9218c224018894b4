"""Pixelation, per-pixel SNR, threshold-mask optimisation and the linear estimator."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .diffraction import ProbabilityMap
from .spin import BlochState

# Pixels whose |n1|/n0 exceeds this are outside the first-order regime.
FIRST_ORDER_LIMIT = 0.1


@dataclass
class PixelImage:
    """Expected counts per detector pixel: reference n0 and signed signal n1."""

    n0: np.ndarray
    n1: np.ndarray
    pixel_size: float
    factor: int
    kind: str = "angular"

    def __post_init__(self) -> None:
        if self.n0.shape != self.n1.shape:
            raise ValueError("n0 and n1 shapes differ")
        if np.any(self.n0 < 0):
            raise ValueError("reference counts must be non-negative")

    @property
    def first_order_violations(self) -> int:
        pos = self.n0 > 0
        return int(np.count_nonzero(np.abs(self.n1[pos]) > FIRST_ORDER_LIMIT * self.n0[pos]))


@dataclass
class MaskSelection:
    selected: np.ndarray
    threshold: float
    total_snr: float
    trace: np.ndarray  # columns: threshold, total SNR, pixel count


def pixelate(pmap: ProbabilityMap, bloch_dr: BlochState, bloch_ref: BlochState, n_e: float,
             pixel_size: float, min_samples: int = 4) -> PixelImage:
    """Integrate the map into detector pixels of side ``pixel_size`` (grid units).

    Samples outside the map's region contribute nothing. The pixel side must be
    an integer number of simulation samples to within one sample.
    """
    step = float(pmap.x[1] - pmap.x[0])
    factor = int(round(pixel_size / step))
    if factor < 1 or abs(factor * step - pixel_size) > step:
        raise ValueError("pixel size is not commensurate with the simulation grid")
    n = pmap.shape[0]
    if n % factor:
        raise ValueError(f"grid of {n} samples cannot be split into pixels of {factor} samples")
    if factor < min_samples:
        raise ValueError(f"need at least {min_samples} samples per pixel side, got {factor}")
    w = pmap.region * pmap.pixel_area * n_e
    ds = (bloch_dr.x - bloch_ref.x, bloch_dr.y - bloch_ref.y)
    s0 = pmap.p0 * w
    s1 = (pmap.cx * ds[0] + pmap.cy * ds[1]) * w
    m = n // factor

    def bin2(a):
        return a.reshape(m, factor, m, factor).sum(axis=(1, 3))

    return PixelImage(bin2(s0), bin2(s1), factor * step, factor, pmap.kind)


def snr_px(img: PixelImage) -> np.ndarray:
    """|n1| / sqrt(2 n0 + n1), zero where the noise term is not positive."""
    den = 2.0 * img.n0 + img.n1
    ok = den > 0
    out = np.zeros(img.n0.shape)
    out[ok] = np.abs(img.n1[ok]) / np.sqrt(den[ok])
    return out


def total_snr(img: PixelImage, selected: np.ndarray) -> float:
    den = float(np.sum((2.0 * img.n0 + img.n1)[selected]))
    if den <= 0:
        return 0.0
    return float(np.sum(np.abs(img.n1[selected]))) / math.sqrt(den)


def optimize_mask(img: PixelImage) -> MaskSelection:
    """Scan every threshold that changes the selected set; keep the best total SNR.

    Ties favour the larger mask.
    """
    s = snr_px(img).ravel()
    if not np.any(s > 0):
        raise ValueError("no signal: every per-pixel SNR is zero")
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    pos = s_sorted > 0
    abs_n1 = np.abs(img.n1.ravel()[order])
    noise = (2.0 * img.n0 + img.n1).ravel()[order]
    c1 = np.cumsum(abs_n1)
    c2 = np.cumsum(noise)
    # Only group ends are reachable: pixels with equal SNR are in or out together.
    ends = np.flatnonzero(pos & np.append(s_sorted[1:] != s_sorted[:-1], True))
    with np.errstate(divide="ignore", invalid="ignore"):
        totals = np.where(c2[ends] > 0, c1[ends] / np.sqrt(np.where(c2[ends] > 0, c2[ends], 1.0)), 0.0)
    best = int(np.flatnonzero(totals == totals.max())[-1])
    last = ends[best]
    nxt = s_sorted[last + 1] if last + 1 < s_sorted.size else 0.0
    threshold = float(nxt) if nxt > 0 else 0.5 * float(s_sorted[last])
    selected = np.zeros(s.size, dtype=bool)
    selected[order[: last + 1]] = True
    thresholds = np.append(s_sorted[ends[1:]], 0.5 * s_sorted[ends[-1]])
    trace = np.column_stack([thresholds, totals, ends + 1])
    return MaskSelection(selected.reshape(img.n0.shape), threshold, float(totals[best]), trace)


@dataclass(frozen=True)
class Estimate:
    ratio: float
    std: float


def estimate_mu_b(observed: np.ndarray, img: PixelImage, mask: MaskSelection,
                  reference: np.ndarray | None = None) -> Estimate:
    """Sign-weighted linear estimate of mu_B relative to its nominal value.

    ``reference`` is the measured off-resonant image; when omitted the expected
    reference counts n0 are used.
    """
    d = mask.selected
    n1 = img.n1[d]
    denom = float(np.sum(np.abs(n1)))
    if denom == 0:
        raise ValueError("mask selects no signal")
    base = img.n0[d] if reference is None else np.asarray(reference, dtype=float)[d]
    ratio = float(np.sum(np.sign(n1) * (np.asarray(observed, dtype=float)[d] - base))) / denom
    std = math.sqrt(float(np.sum(2.0 * img.n0[d] + n1))) / denom
    return Estimate(ratio, std)


def sample_poisson(img: PixelImage, rng: np.random.Generator | int | None = None, driven: bool = True,
                   size: int | None = None) -> np.ndarray:
    """Poisson counts with mean max(0, n0 + n1) (driven) or n0 (reference)."""
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    mean = np.maximum(0.0, img.n0 + img.n1) if driven else img.n0
    shape = mean.shape if size is None else (size,) + mean.shape
    return gen.poisson(np.broadcast_to(mean, shape))
