import numpy as np
import pytest

from orientrace import spectral
from orientrace.errors import ParamError


def test_unitary_fft():
    rng = np.random.default_rng(0)
    f = rng.normal(size=(16, 12))
    F = spectral.fft2(f)
    np.testing.assert_allclose(spectral.ifft2(F).real, f, atol=1e-12)
    assert abs(np.linalg.norm(F) - np.linalg.norm(f)) < 1e-12
    d = np.zeros((8, 8))
    d[0, 0] = 1
    np.testing.assert_allclose(np.abs(spectral.fft2(d)), 1 / 8)


def test_frequency_grid_layout():
    wx, wy = spectral.frequency_grid((4, 6))
    assert wx.shape == (4, 6)
    np.testing.assert_allclose(wx[0, :3], 2 * np.pi * np.arange(3) / 6)
    np.testing.assert_allclose(wy[:, 0], 2 * np.pi * np.array([0, 1, -2, -1]) / 4)


def test_gaussian_blur_identity_constant_impulse():
    rng = np.random.default_rng(1)
    f = rng.random((20, 20))
    np.testing.assert_array_equal(spectral.gaussian_blur(f, 0), f)
    np.testing.assert_allclose(spectral.gaussian_blur(np.full((10, 10), 3.0), 2.0), 3.0)
    d = np.zeros((64, 64))
    d[32, 32] = 1
    g = spectral.gaussian_blur(d, 2.0)
    assert abs(g.sum() - 1) < 1e-6
    y, x = np.mgrid[0:64, 0:64]
    ref = np.exp(-((x - 32) ** 2 + (y - 32) ** 2) / 8) / (8 * np.pi)
    np.testing.assert_allclose(g, ref, atol=1e-6)
    m = spectral.gaussian_blur(d, 2.0, boundary="mirror")
    assert abs(m.sum() - 1) < 1e-6
    with pytest.raises(ParamError):
        spectral.gaussian_blur(d, 1.0, boundary="wrap")


def test_gaussian_semigroup():
    rng = np.random.default_rng(2)
    f = rng.random((32, 32))
    a = spectral.gaussian_blur(spectral.gaussian_blur(f, 1.5), 2.0)
    b = spectral.gaussian_blur(f, np.hypot(1.5, 2.0))
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_scale_space_constant_and_bump_variance():
    ss = spectral.scale_space_1d(np.full(50, 2.0))
    np.testing.assert_allclose(ss.levels, 2.0)
    n = np.arange(-200, 201)
    t0 = 4.0
    bump = np.exp(-0.5 * n**2 / t0)
    ss = spectral.scale_space_1d(bump)
    for t, level in zip(ss.scales, ss.levels):
        var = np.sum(n**2 * level) / level.sum()
        assert abs(var - (t0 + t)) < 1e-3 * (t0 + t) + 1e-3


def test_extremum_count_non_increasing():
    rng = np.random.default_rng(3)
    ss = spectral.scale_space_1d(rng.normal(size=200))
    counts = [sum(len(e) for e in spectral.local_extrema(level)) for level in ss.levels]
    assert all(b <= a for a, b in zip(counts, counts[1:]))


def test_two_bumps_merge():
    n = np.arange(200)
    prof = np.exp(-0.5 * ((n - 95) / 2) ** 2) + np.exp(-0.5 * ((n - 105) / 2) ** 2)
    ss = spectral.scale_space_1d(prof)
    maxima = [len(spectral.local_extrema(level)[0]) for level in ss.levels]
    assert maxima[0] == 2 and maxima[-1] == 1
    tops = [t for t in spectral.toppoints_1d(ss) if not t.persisted]
    assert len(tops) == 1
    # the pair is last seen one ladder level before the merge
    assert abs(tops[0].position - 100) <= 2
    first_single = ss.scales[maxima.index(1)]
    assert tops[0].scale == first_single


def test_toppoints_constant_and_isolated_edge():
    assert spectral.toppoints_1d(spectral.scale_space_1d(np.zeros(40))) == []
    n = np.arange(100)
    edge = np.gradient(np.tanh((n - 50) / 2))
    tops = spectral.toppoints_1d(spectral.scale_space_1d(edge))
    assert len(tops) == 1 and tops[0].persisted and tops[0].scale is None


def test_ladder_validation():
    with pytest.raises(ParamError):
        spectral.scale_space_1d(np.zeros(10), ladder=[1, 2, 3])
    with pytest.raises(ParamError):
        spectral.scale_space_1d(np.zeros(10), ladder=[1, 2, 3, 4, 5, 6, 7, 7])


def test_hilbert_1d():
    np.testing.assert_allclose(spectral.hilbert_1d(np.ones(32)), 0, atol=1e-15)
    x = np.arange(64)
    c = np.cos(2 * np.pi * 5 * x / 64)
    np.testing.assert_allclose(spectral.hilbert_1d(c), -np.sin(2 * np.pi * 5 * x / 64), atol=1e-12)
    rng = np.random.default_rng(4)
    f = rng.normal(size=64)
    f -= f.mean()
    f_spec = np.fft.fft(f)
    f_spec[32] = 0  # the Nyquist bin has sign 0 on this grid
    f = np.real(np.fft.ifft(f_spec))
    np.testing.assert_allclose(spectral.hilbert_1d(spectral.hilbert_1d(f)), -f, atol=1e-10)


def test_hilbert_directional_matches_1d():
    rows, cols = 8, 64
    x = np.arange(cols)
    f = np.cos(2 * np.pi * 3 * x / cols)[None, :] * np.ones((rows, 1))
    # theta = -pi/2 puts e_eta along +x
    out = spectral.hilbert_directional(f, -np.pi / 2)
    np.testing.assert_allclose(out, spectral.hilbert_1d(f[0])[None, :] * np.ones((rows, 1)), atol=1e-12)
