import numpy as np
import pytest

from orientrace import spectral, wavelets
from orientrace.errors import ParamError


def test_radial_mn_shape():
    t = wavelets.inflection_scale(0.8, 60)
    rho = np.linspace(0, np.pi, 400)
    m = wavelets.radial_mn(rho, 60, t)
    assert m[0] == pytest.approx(1.0)
    assert np.all(np.diff(m) <= 1e-15)
    # inflection of the radial profile sits at gamma * pi
    r0 = 0.8 * np.pi
    h = 1e-3
    d2 = (wavelets.radial_mn(r0 + h, 60, t) - 2 * wavelets.radial_mn(r0, 60, t) + wavelets.radial_mn(r0 - h, 60, t)) / h**2
    d2_scale = abs(wavelets.radial_mn(0.7 * np.pi + h, 60, t) - 2 * wavelets.radial_mn(0.7 * np.pi, 60, t) + wavelets.radial_mn(0.7 * np.pi - h, 60, t)) / h**2
    assert abs(d2) < 0.05 * d2_scale


def test_radial_mn_matches_truncated_series():
    t, n = 0.3, 10
    rho = np.array([0.5, 1.0, 2.0])
    z = rho**2 / t
    from math import factorial

    series = np.exp(-z) * sum(z**k / factorial(k) for k in range(n + 1))
    np.testing.assert_allclose(wavelets.radial_mn(rho, n, t), series, rtol=1e-12)


def test_bspline_values_and_partition():
    assert wavelets.bspline(0, 0.0) == 1.0
    assert wavelets.bspline(0, 0.6) == 0.0
    assert wavelets.bspline(1, 0.0) == pytest.approx(1.0)
    assert wavelets.bspline(2, 0.0) == pytest.approx(0.75)
    x = np.linspace(-0.5, 0.5, 101)
    for k in range(4):
        total = sum(wavelets.bspline(k, x - j) for j in range(-4, 5))
        np.testing.assert_allclose(total, 1.0, atol=1e-12)


def test_cake_params_validation():
    with pytest.raises(ParamError):
        wavelets.CakeParams(n_orientations=35).validate()
    with pytest.raises(ParamError):
        wavelets.CakeParams(gamma=1.2).validate()
    with pytest.raises(ParamError):
        wavelets.build_cake_stack(wavelets.CakeParams(), (63, 64))


def test_cake_stack_geometry(cake128):
    assert cake128.spatial.shape == (36, 128, 128)
    assert np.diff(cake128.thetas)[0] == pytest.approx(np.pi / 18)
    raw = wavelets.cake_fourier_kernels(wavelets.CakeParams(), (128, 128))
    assert raw[:, 0, 0].sum() == pytest.approx(1.0)
    assert np.all(raw[:, 64, :] == 0) and np.all(raw[:, :, 64] == 0)


def test_cake_wedge_orientation():
    # wedge 0 detects structures along +x: its Fourier support lies on the omega_y axis
    raw = wavelets.cake_fourier_kernels(wavelets.CakeParams(), (64, 64))
    wx, wy = spectral.frequency_grid((64, 64))
    k = raw[0]
    assert np.sum(k * np.abs(wy)) > 5 * np.sum(k * np.abs(wx))


def test_cake_kernel_is_edge_plus_line():
    stack = wavelets.build_cake_stack(wavelets.CakeParams(), (64, 64))
    psi = np.fft.fftshift(stack.spatial[0])
    # along e_eta (the y axis for theta 0) Re is even and Im is odd
    col = psi[:, 32]
    np.testing.assert_allclose(col.real[1:], col.real[1:][::-1], atol=1e-10)
    np.testing.assert_allclose(col.imag[1:], -col.imag[1:][::-1], atol=1e-10)
    assert np.abs(col.imag).max() > 0.1 * np.abs(col.real).max()


def test_m_psi_report_cake_and_gabor():
    rep = wavelets.compute_m_psi(wavelets.build_cake_stack(wavelets.CakeParams(), (64, 64)))
    assert rep.verdict == "invertible"
    # the DC bin is shared by all orientations, so M_psi(0) is about 1/N_o
    assert rep.minimum > 0 and rep.condition < 50
    g = wavelets.compute_m_psi(wavelets.build_gabor_stack(wavelets.GaborParams(), (128, 128)))
    assert g.verdict == "non-invertible"
    assert g.minimum < 1e-3 * g.maximum


def test_gabor_dilation_preserves_l2():
    shape = (256, 256)
    norms = [
        np.linalg.norm(wavelets.gabor_kernel(wavelets.GaborParams(scale=a), shape, 0.3))
        for a in (3.0, 6.0)
    ]
    assert norms[1] == pytest.approx(norms[0], rel=1e-6)


def test_gabor_integral_is_one_and_peak_location():
    p = wavelets.GaborParams(scale=1.0, k0=(0.0, 0.0))
    assert wavelets.gabor_kernel(p, (64, 64), 0.0).sum().real == pytest.approx(1.0, rel=1e-6)
    p = wavelets.GaborParams(scale=4.0)
    theta = np.pi / 6
    k = wavelets.gabor_kernel(p, (128, 128), theta)
    spectrum = np.abs(np.fft.fft2(k))
    wx, wy = spectral.frequency_grid((128, 128))
    i = np.unravel_index(np.argmax(spectrum), spectrum.shape)
    expected = np.array([-np.sin(theta), np.cos(theta)]) * 3.0 / 4.0
    assert np.hypot(wx[i] - expected[0], wy[i] - expected[1]) <= 2 * np.pi / 128


def test_gabor_scale_for_wavelength():
    assert wavelets.gabor_scale_for_wavelength(10.0) == pytest.approx(30 / (2 * np.pi))


def test_forward_weight_and_exact_split(cake128):
    assert wavelets.forward_weight(0.0) == 0.5
    plus, minus = wavelets.split_directional(cake128)
    np.testing.assert_array_equal(plus.spatial + minus.spatial, cake128.spatial)
    assert plus.sidedness == "plus" and minus.sidedness == "minus"
    with pytest.raises(ParamError):
        wavelets.split_directional(plus)


def test_plus_kernel_points_forward(cake128):
    plus, _ = wavelets.split_directional(cake128)
    x, y = spectral.centered_coordinates((128, 128))
    for i in (0, 9, 20):
        th = cake128.thetas[i]
        xi = np.cos(th) * x + np.sin(th) * y
        mass = np.abs(plus.spatial[i]) ** 2
        assert mass[xi > 0].sum() > 3 * mass[xi < 0].sum()


def test_kernel_summary_is_json_ready(cake128):
    import json

    json.dumps(wavelets.kernel_summary(cake128))
