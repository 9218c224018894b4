import math

import numpy as np
import pytest

from spinprobe.imaging import (NO_MASK, MaskFunction, RadialAmplitudes, SpatialGrid, b1, b1_analytic, b_z,
                               bz_radial, bz_radial_analytic, coherent_wavefunction, p_img_map, winding_number)
from spinprobe.metrology import cfi


@pytest.mark.parametrize("z_d", [0.0, 400e-10, 800e-10, -300e-10])
def test_unscattered_amplitude_matches_closed_form(z_d, broad):
    r = np.array([0.0, 1e-10, 5e-10, 10e-10, 200e-10])
    got = b1(r, z_d, broad, NO_MASK)
    want = b1_analytic(r, z_d, broad)
    assert np.max(np.abs(got - want)) < 1e-8 * np.max(np.abs(want))


def test_unscattered_amplitude_narrow_beam(narrow):
    r = np.linspace(0, 2e-9, 7)
    assert np.allclose(b1(r, 500e-10, narrow, NO_MASK), b1_analytic(r, 500e-10, narrow), rtol=1e-8, atol=0)


@pytest.mark.parametrize("z_d", [0.0, 200e-10])
def test_scattered_radial_factor_matches_closed_form(z_d, broad):
    for r in (0.05e-10, 0.2e-10):
        num = bz_radial(r, z_d, broad, NO_MASK)
        closed = bz_radial_analytic(r, z_d, broad)
        assert abs(num - closed) < 1e-3 * abs(closed)


@pytest.mark.parametrize("varsigma,winding", [(1, -1), (-1, 1)])
def test_spin_flip_amplitudes_carry_vortices(varsigma, winding, broad):
    ang = np.linspace(0, 2 * math.pi, 64, endpoint=False)
    rad = 0.5e-10
    vals = b_z((rad * np.cos(ang), rad * np.sin(ang)), 300e-10, broad, varsigma)
    assert winding_number(vals) == winding


def test_no_longitudinal_flip_amplitude(broad):
    assert np.all(b_z((np.array([1e-10]), np.array([0.0])), 0.0, broad, 0) == 0)


def test_zernike_keeps_background(broad):
    grid = SpatialGrid(5e-10, 64, 800e-10)
    amps = RadialAmplitudes(broad, grid.z_d, 5e-10 * math.sqrt(2) * 1.001, step=grid.x_max / (4 * grid.n))
    plain = p_img_map(grid, broad, amplitudes=amps)
    zern = p_img_map(grid, broad, zernike=True, amplitudes=amps)
    assert np.array_equal(plain.p0, zern.p0)
    assert not np.allclose(plain.cy, zern.cy)


def test_in_focus_image_has_no_phase_contrast(broad):
    m = p_img_map(SpatialGrid(5e-10, 32, 0.0), broad)
    assert cfi(m).mu_b2_cfi < 1e-6 * cfi(p_img_map(SpatialGrid(5e-10, 32, 0.0), broad, zernike=True)).mu_b2_cfi


def test_interpolated_amplitudes_match_direct(broad):
    amps = RadialAmplitudes(broad, 800e-10, 15e-10)
    r = np.array([0.0, 0.37e-10, 3.3e-10, 14e-10])
    assert np.allclose(amps.b1(r), amps.b1_direct(r), rtol=1e-9)
    assert np.allclose(amps.radial(r), amps.radial_direct(r), rtol=1e-5, atol=1e-9 * np.abs(amps.h_table).max())


def test_coherent_wavefunction_normalised(narrow):
    grid = SpatialGrid(2.5e-9, 96, 0.0)
    psi, norm = coherent_wavefunction(grid, 0.0, narrow)
    assert float(np.sum(np.abs(psi) ** 2) * grid.step**2) == pytest.approx(1.0, abs=1e-3)
    dkz = narrow.beam.dk_z
    assert norm == pytest.approx(4 * math.pi**2 * math.sqrt(8 * math.pi) * dkz, rel=1e-14)


def test_image_density_non_negative(broad):
    m = p_img_map(SpatialGrid(10e-10, 64, 800e-10), broad)
    assert m.negative_pixels == 0
    assert m.meta["mask"] == "hard_cutoff"


def test_validation():
    with pytest.raises(ValueError):
        SpatialGrid(1e-9, 64, 2e-7)
    with pytest.raises(ValueError):
        SpatialGrid(-1e-9, 64)
    with pytest.raises(ValueError):
        MaskFunction("soft")
    with pytest.raises(ValueError):
        MaskFunction(k_max=0.0)


def test_winding_number_helper():
    ang = np.linspace(0, 2 * math.pi, 50, endpoint=False)
    assert winding_number(np.exp(2j * ang)) == 2
    assert winding_number(np.ones(8)) == 0
