import numpy as np
import pytest

from orientrace import oscore, phantoms, wavelets
from orientrace.errors import OutOfBounds
from conftest import band_limited_phantom

# several properties are checked on inputs that deliberately keep their mean
pytestmark = pytest.mark.filterwarnings("ignore:transform input is not DC-removed")


def test_dc_removed_stack_annihilates_constant():
    stack = wavelets.build_cake_stack(wavelets.CakeParams(dc_removed=True), (64, 64))
    u = oscore.transform(np.full((64, 64), 0.7), stack)
    assert np.abs(u.data).max() < 1e-10


def test_shift_covariance(cake128):
    f = band_limited_phantom(seed=1)
    a = oscore.transform(f, cake128).data
    b = oscore.transform(np.roll(f, (5, -7), axis=(0, 1)), cake128).data
    np.testing.assert_allclose(np.roll(a, (5, -7), axis=(1, 2)), b, atol=1e-10)


def _rotate(a, deg, center):
    """Rotate an array about an exact pixel center (``y`` down, positive is clockwise on screen)."""
    from scipy import ndimage

    t = np.deg2rad(deg)
    m = np.array([[np.cos(t), np.sin(t)], [-np.sin(t), np.cos(t)]])
    off = center - m @ center
    if np.iscomplexobj(a):
        return _rotate(a.real, deg, center) + 1j * _rotate(a.imag, deg, center)
    return ndimage.affine_transform(a, m, offset=off, order=5)


def test_rotation_by_one_step_shifts_layers():
    n = 256
    center = np.array([n / 2, n / 2])
    f = band_limited_phantom((n, n), seed=6, fraction=0.6) - 0.5
    y, x = np.mgrid[:n, :n]
    f *= np.exp(-((x - n / 2) ** 2 + (y - n / 2) ** 2) / (2 * 30**2))
    stack = wavelets.build_cake_stack(wavelets.CakeParams(), (n, n))
    g = _rotate(f, -360 / 36, center)
    a = oscore.transform(f, stack).data
    b = oscore.transform(g, stack).data
    a_rot = np.roll(np.stack([_rotate(layer, -360 / 36, center) for layer in a]), 1, axis=0)
    disk = np.hypot(x - n / 2, y - n / 2) < 60
    rel = np.linalg.norm((a_rot - b)[:, disk]) / np.linalg.norm(b[:, disk])
    assert rel < 0.05


def test_reconstruct_exact_and_zero(cake128):
    f = band_limited_phantom(seed=2)
    f0 = f - f.mean()
    u = oscore.transform(f0, cake128)
    rec = oscore.reconstruct(u, cake128)
    assert np.linalg.norm(rec - f0) / np.linalg.norm(f0) < 1e-3
    zero = oscore.transform(np.zeros((128, 128)), cake128)
    assert np.abs(oscore.reconstruct(zero, cake128)).max() == 0


def test_reconstruct_without_division_applies_m_psi(cake128):
    f = band_limited_phantom(seed=3, fraction=0.5)
    f0 = f - f.mean()
    u = oscore.transform(f0, cake128)
    b = oscore.reconstruct(u, cake128, divide_m_psi=False)
    np.testing.assert_allclose(np.fft.fft2(b), cake128.m_psi() * np.fft.fft2(f0), atol=1e-8)


def test_reconstruct_approx_and_linearity(cake128):
    f = band_limited_phantom(seed=4, fraction=0.5)
    f0 = f - f.mean()
    rec = oscore.reconstruct_approx(oscore.transform(f0, cake128))
    assert np.linalg.norm(rec - f0) / np.linalg.norm(f0) < 0.05
    g = band_limited_phantom(seed=5, fraction=0.5)
    lhs = oscore.transform(2 * f + 3 * g, cake128).data
    rhs = 2 * oscore.transform(f, cake128).data + 3 * oscore.transform(g, cake128).data
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def _toy_score():
    rng = np.random.default_rng(7)
    data = rng.normal(size=(4, 6, 5)) + 1j * rng.normal(size=(4, 6, 5))
    return oscore.OrientationScore(data, np.arange(4) * np.pi / 2, "cake", "double")


def test_sampling_grid_wrap_and_midpoint():
    u = _toy_score()
    assert oscore.sample(u, 2, 3, np.pi / 2) == pytest.approx(u.data[1, 3, 2])
    assert oscore.sample(u, 2, 3, np.pi / 2 + 2 * np.pi) == pytest.approx(u.data[1, 3, 2])
    mid = oscore.sample(u, 2, 3, 7 * np.pi / 4)
    assert mid == pytest.approx(0.5 * (u.data[3, 3, 2] + u.data[0, 3, 2]))
    xy = oscore.sample(u, 1.5, 2.5, 0.0)
    assert xy == pytest.approx(u.data[0, 2:4, 1:3].mean())
    np.testing.assert_allclose(oscore.orientation_column(u, 2, 3), u.data[:, 3, 2])
    with pytest.raises(OutOfBounds):
        oscore.sample(u, -0.1, 0, 0)
    with pytest.raises(OutOfBounds):
        oscore.sample(u, 4.5, 0, 0)
    assert not oscore.inside(u, 4.5, 0) and oscore.inside(u, 4.0, 5.0)


def test_column_peaks_at_vessel_orientation():
    theta = np.deg2rad(30)
    scene = phantoms.straight(width=8.0, angle=theta)
    stack = wavelets.build_cake_stack(wavelets.CakeParams(), scene.image.shape)
    u = oscore.transform(scene.image - scene.image.mean(), stack)
    col = -oscore.orientation_column(u, 128, 128).real
    best = u.thetas[np.argmax(col)]
    assert abs(oscore.angle_diff(best % np.pi, theta)) <= np.pi / 36 + 1e-9


def test_plus_score_has_one_lobe():
    # at the right end of a vessel running along -x only the backward direction sees it
    pts = phantoms.line((128.0, 128.0), np.pi, 200)
    img = phantoms.render((256, 256), [phantoms.Vessel(pts, np.full(2, 8.0))])
    stack = wavelets.build_cake_stack(wavelets.CakeParams(), img.shape)
    plus, _ = wavelets.split_directional(stack)
    col = np.abs(oscore.orientation_column(oscore.transform(img - img.mean(), plus), 128, 128))
    assert col[18] > 3 * col[0]
    assert np.argmax(col) in (17, 18, 19)


def test_frame_and_group():
    f = oscore.frame(np.pi / 2)
    np.testing.assert_allclose(f.e_xi, [0, 1], atol=1e-15)
    np.testing.assert_allclose(f.e_eta, [-1, 0], atol=1e-15)
    np.testing.assert_allclose(oscore.e_xi(0.0), [1, 0])
    a = oscore.Se2Element(1, 0, 0)
    b = oscore.Se2Element(0, 0, np.pi / 2)
    ab = oscore.se2_mul(a, b)
    ba = oscore.se2_mul(b, a)
    np.testing.assert_allclose([ab.x, ab.y, ab.theta], [1, 0, np.pi / 2], atol=1e-15)
    np.testing.assert_allclose([ba.x, ba.y, ba.theta], [0, 1, np.pi / 2], atol=1e-15)
    g = oscore.Se2Element(2.0, -1.0, 0.7)
    e = oscore.se2_mul(g, oscore.se2_inv(g))
    np.testing.assert_allclose([e.x, e.y, np.sin(e.theta)], 0, atol=1e-14)


def test_angle_diff_wraps():
    assert oscore.angle_diff(0.1, 2 * np.pi - 0.1) == pytest.approx(0.2)
