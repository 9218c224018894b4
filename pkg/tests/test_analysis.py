import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from spinprobe.analysis import (MaskSelection, PixelImage, estimate_mu_b, optimize_mask, pixelate,
                                sample_poisson, snr_px, total_snr)
from spinprobe.metrology import cfi, snr_bound
from spinprobe.spin import BlochState

ON = BlochState((0.0, 1.0, 0.0))


def _image(n0, n1):
    return PixelImage(np.asarray(n0, dtype=float), np.asarray(n1, dtype=float), 1.0, 1)


def _best_threshold_set(img):
    """Brute force over every threshold in the attained set."""
    s = snr_px(img)
    best, best_set = -1.0, None
    for t in sorted(set(s[s > 0].ravel()), reverse=True):
        sel = s >= t
        v = total_snr(img, sel)
        if v >= best:
            best, best_set = v, sel
    return best, best_set


def test_two_pixel_exhaustive():
    img = _image([[100.0, 100.0]], [[20.0, 2.0]])
    sel = optimize_mask(img)
    # Candidates: first pixel alone or both.
    alone = 20 / math.sqrt(220)
    both = 22 / math.sqrt(422)
    assert sel.total_snr == pytest.approx(max(alone, both), rel=1e-14)
    assert sel.selected.tolist() == [[True, False]]
    assert img.n0[0, 1] == 100.0 and sel.threshold == pytest.approx(2 / math.sqrt(202))


@settings(max_examples=60, deadline=None)
@given(arrays(float, (3, 3), elements=st.floats(1.0, 1e4)), arrays(float, (3, 3), elements=st.floats(-0.9, 0.9)))
def test_optimizer_matches_brute_force(n0, frac):
    # First-order regime: |n1| < n0, so every noise term is positive.
    n1 = frac * n0
    img = _image(n0, n1)
    if not np.any(snr_px(img) > 0):
        with pytest.raises(ValueError):
            optimize_mask(img)
        return
    sel = optimize_mask(img)
    best, best_set = _best_threshold_set(img)
    assert sel.total_snr == pytest.approx(best, rel=1e-12)
    assert np.array_equal(sel.selected, best_set)
    # Never worse than the full region or the single best pixel.
    assert sel.total_snr >= total_snr(img, np.ones(n0.shape, bool)) * (1 - 1e-12)
    assert sel.total_snr >= snr_px(img).max() * (1 - 1e-12)
    # Pixels strictly above the reported threshold form the selected set.
    assert np.array_equal(snr_px(img) > sel.threshold, sel.selected)


def test_ties_prefer_larger_mask():
    img = _image([[100.0, 100.0, 100.0]], [[10.0, 10.0, 0.0]])
    sel = optimize_mask(img)
    assert sel.selected.tolist() == [[True, True, False]]


def test_snr_px_zero_without_noise():
    img = _image([[0.0, 4.0]], [[0.0, 1.0]])
    assert snr_px(img).tolist() == [[0.0, 1.0 / 3.0]]


def test_pixelate_conserves_counts(broad_diff_map, ref_state):
    m = broad_diff_map
    step = m.x[1] - m.x[0]
    img = pixelate(m, ON, ref_state, 1e10, 16 * step)
    assert img.n0.shape == (32, 32)
    assert img.n0.sum() == pytest.approx(1e10 * np.sum(m.p0 * m.region) * m.pixel_area, rel=1e-12)
    assert img.n0.sum() == pytest.approx(1e10, rel=1e-4)
    # Only a few far-tail pixels, where the background is tiny, leave the first-order regime.
    assert img.first_order_violations < 0.01 * img.n0.size


def test_pixelate_validation(small_diff_map, ref_state):
    step = small_diff_map.x[1] - small_diff_map.x[0]
    with pytest.raises(ValueError):
        pixelate(small_diff_map, ON, ref_state, 1e10, 5 * step)  # 64 not divisible by 5
    with pytest.raises(ValueError):
        pixelate(small_diff_map, ON, ref_state, 1e10, 2 * step)  # fewer than 4 samples


def test_pixel_size_robustness(broad_diff_map, ref_state):
    step = broad_diff_map.x[1] - broad_diff_map.x[0]
    a = optimize_mask(pixelate(broad_diff_map, ON, ref_state, 1e10, 16 * step)).total_snr
    b = optimize_mask(pixelate(broad_diff_map, ON, ref_state, 1e10, 8 * step)).total_snr
    assert abs(a - b) / a < 0.03


def test_masked_snr_below_cramer_rao(broad_diff_map, ref_state):
    step = broad_diff_map.x[1] - broad_diff_map.x[0]
    for f in (4, 8, 16, 32):
        sel = optimize_mask(pixelate(broad_diff_map, ON, ref_state, 1e10, f * step))
        assert sel.total_snr <= snr_bound(cfi(broad_diff_map), 1e10).snr


def test_poisson_sampling():
    img = _image(np.array([[0.0, 100.0]]), np.array([[0.0, 0.0]]))
    a = sample_poisson(img, 7)
    assert np.array_equal(a, sample_poisson(img, 7))
    draws = sample_poisson(img, np.random.default_rng(1), size=10000)
    assert np.all(draws[:, 0, 0] == 0)
    # Mean within 3 sigma of the expected count.
    assert abs(draws[:, 0, 1].mean() - 100.0) < 3 * math.sqrt(100.0 / 10000)
    neg = _image([[1.0]], [[-5.0]])
    assert sample_poisson(neg, 0)[0, 0] == 0
    ref = sample_poisson(_image([[50.0]], [[50.0]]), np.random.default_rng(2), driven=False, size=10000)
    assert abs(ref.mean() - 50.0) < 3 * math.sqrt(50.0 / 10000)


def test_estimator_exact_on_expected_counts():
    img = _image([[100.0, 100.0, 50.0]], [[10.0, -5.0, 1.0]])
    mask = MaskSelection(np.array([[True, True, False]]), 0.0, 0.0, np.zeros((0, 3)))
    est = estimate_mu_b(img.n0 + img.n1, img, mask)
    assert est.ratio == pytest.approx(1.0, rel=1e-14)
    assert est.std == pytest.approx(math.sqrt(405.0) / 15.0, rel=1e-14)
    half = estimate_mu_b(img.n0 + 0.5 * img.n1, img, mask, reference=img.n0)
    assert half.ratio == pytest.approx(0.5, rel=1e-14)
