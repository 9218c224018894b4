import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinprobe.diffraction import (AngularGrid, RadialKernel, assemble, azimuthal_factor, differential_map,
                                   p_diff_map, pi0_diff, pi_z_diff)
from spinprobe.kernel import KernelContext, deflection_kernel_table
from spinprobe.metrology import cfi
from spinprobe.spin import BlochState


def test_zero_deflection_peak_is_normalised(broad):
    t = np.linspace(0, 20 * broad.dk / broad.k, 20001)
    y = pi0_diff(t, broad) * 2 * math.pi * t
    assert float(np.sum((y[1:] + y[:-1]) * np.diff(t)) / 2) == pytest.approx(1.0, rel=1e-6)


def test_map_region_holds_nearly_all_probability(broad_diff_map):
    m = broad_diff_map
    assert float(np.sum(m.p0[m.region]) * m.pixel_area) == pytest.approx(1.0, abs=1e-4)


def test_no_longitudinal_flip_term(broad):
    tx, ty = np.meshgrid(np.linspace(-1e-5, 1e-5, 5), np.linspace(-1e-5, 1e-5, 5))
    assert np.all(pi_z_diff((tx, ty), broad, 0) == 0)
    assert np.all(azimuthal_factor(np.linspace(0, 6, 7), 0) == 0)


def test_azimuthal_factor_carries_opposite_vortices():
    phi = np.linspace(0, 2 * math.pi, 9)
    assert np.allclose(azimuthal_factor(phi, 1), -1j * np.exp(-1j * phi) / math.sqrt(2))
    assert np.allclose(azimuthal_factor(phi, -1), 1j * np.exp(1j * phi) / math.sqrt(2))


def test_coefficients_match_closed_form(broad):
    # P1 = (2/pi) r_e k^2 L f / dk * (sin(phi) s_x - cos(phi) s_y), f the Gaussian envelope.
    rng = np.random.default_rng(3)
    th = rng.uniform(0.1, 7.5, 12) * broad.dk / broad.k
    phi = rng.uniform(-math.pi, math.pi, 12)
    tx, ty = th * np.cos(phi), th * np.sin(phi)
    kern = RadialKernel(broad, float(th.max()))
    cx, cy, cz = assemble(None, pi_z_diff((tx, ty), broad, 1, kern), pi_z_diff((tx, ty), broad, -1, kern))
    amp = 2 / math.pi * broad.r_e * broad.k**2 * deflection_kernel_table(th, broad) / broad.dk
    amp *= np.exp(-(broad.k * th) ** 2 / (4 * broad.dk**2))
    assert np.allclose(cx, amp * np.sin(phi), rtol=1e-6, atol=0)
    assert np.allclose(cy, -amp * np.cos(phi), rtol=1e-6, atol=0)
    assert np.all(cz == 0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.2, 7.0), st.floats(-math.pi, math.pi), st.floats(-math.pi, math.pi),
       st.floats(-1, 1), st.floats(-1, 1))
def test_rotation_covariance(u, phi, alpha, sx, sy):
    ctx = KernelContext.default()
    th = u * ctx.dk / ctx.k
    p = np.array([th * math.cos(phi), th * math.sin(phi)])
    c, s = math.cos(alpha), math.sin(alpha)
    rot = np.array([[c, -s], [s, c]])
    q = rot @ p
    spin = np.array([sx, sy])
    spin_r = rot @ spin

    def signal(pt, sv):
        plus = pi_z_diff((np.array([pt[0]]), np.array([pt[1]])), ctx, 1)
        minus = pi_z_diff((np.array([pt[0]]), np.array([pt[1]])), ctx, -1)
        cx, cy, _ = assemble(None, plus, minus)
        return float(cx[0] * sv[0] + cy[0] * sv[1])

    a, b = signal(p, spin), signal(q, spin_r)
    assert b == pytest.approx(a, rel=1e-8, abs=1e-12 * max(1.0, abs(a)))


def test_differential_map_linearity(small_diff_map):
    m = small_diff_map
    s1, s2, ref = BlochState((0.3, 0.4, 0.0)), BlochState((-0.2, 0.5, 0.1)), BlochState((0.0, 0.0, -1.0))
    d1, d2 = differential_map(m, s1, ref), differential_map(m, s2, ref)
    both = differential_map(m, BlochState((0.1, 0.9, 0.0)), ref)
    assert np.allclose(both, d1 + d2, rtol=1e-12, atol=1e-12 * np.abs(both).max())
    assert np.allclose(differential_map(m, s1, s1), 0.0)
    # z components never enter.
    assert np.array_equal(differential_map(m, BlochState((0.3, 0.4, 0.8)), ref), d1)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(-math.pi, math.pi))
def test_cfi_quadratic_in_transverse_magnitude(alpha, ang):
    ctx = KernelContext.default()
    m = p_diff_map(AngularGrid.validity_region(ctx, 32), ctx)
    unit = BlochState((math.cos(ang), math.sin(ang), 0.0))
    base = cfi(m, unit).mu_b2_cfi
    scaled = cfi(m, BlochState((alpha * unit.x, alpha * unit.y, math.sqrt(max(0, 1 - alpha**2))))).mu_b2_cfi
    assert scaled == pytest.approx(alpha**2 * base, rel=1e-10, abs=1e-40)


def test_density_is_clipped_and_masked(small_diff_map):
    m = small_diff_map
    d = m.density((0, 1, 0))
    assert np.all(d >= 0) and np.all(d[~m.region] == 0)
    assert m.negative_pixels == 0


def test_grid_validation(broad):
    with pytest.raises(ValueError):
        AngularGrid(1e-3, 16).check(broad)
    with pytest.raises(ValueError):
        AngularGrid(1e-6, 1)


def test_scaled_signal(small_diff_map):
    m2 = small_diff_map.scaled_signal(2.0)
    assert m2.same_grid(small_diff_map)
    assert np.array_equal(m2.cy, 2.0 * small_diff_map.cy)


def test_large_probe_cfi_matches_analytic(broad_diff_map):
    # Large-probe closed form: 8 r_e^2 dk^2 * int_0^8 (1 - exp(-u^2/4))^2 / u du.
    u = np.linspace(1e-9, 8, 400001)
    y = (-np.expm1(-u * u / 4)) ** 2 / u
    integral = float(np.sum((y[1:] + y[:-1]) * np.diff(u)) / 2)
    ctx = KernelContext.default()
    analytic = 8 * ctx.r_e**2 * ctx.dk**2 * integral
    assert cfi(broad_diff_map).mu_b2_cfi == pytest.approx(analytic, rel=2e-3)
