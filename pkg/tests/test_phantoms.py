import numpy as np

from orientrace import phantoms


def test_bar_profile():
    d = np.array([0.0, 2.0, 4.0, 6.0, 20.0])
    p = phantoms.bar_profile(d, 8.0)
    assert p[0] > 0.99 and abs(p[2] - 0.5) < 1e-9 and p[-1] < 1e-9
    assert np.all(np.diff(p) <= 0)


def test_straight_scene_cross_section():
    scene = phantoms.straight(width=8.0, contrast=0.3)
    col = scene.image[:, 128]
    assert col.min() == col[128] and abs(col[128] - 0.4) < 1e-3
    assert abs(col[10] - phantoms.BACKGROUND) < 1e-9
    assert scene.truth["topology"]["segments"] == 1


def test_noise_is_seeded():
    a = phantoms.straight(noise=0.02, seed=3).image
    b = phantoms.straight(noise=0.02, seed=3).image
    c = phantoms.straight(noise=0.02, seed=4).image
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_tree_truth():
    scene = phantoms.tree()
    assert scene.image.shape == phantoms.TREE_SHAPE
    assert scene.truth["topology"] == {"segments": 5, "bifurcations": 2, "crossings": 1}
    cx, cy, r = phantoms.TREE_DISK
    assert scene.image[int(cy) - int(r / 2), int(cx)] > scene.image[10, 10]


def test_scene_registry():
    for name, make in phantoms.SCENES.items():
        assert make().image.ndim == 2, name
