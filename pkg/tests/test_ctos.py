import numpy as np
import pytest

from orientrace import ctos, oscore, phantoms
from orientrace.ctos import CtosParams


def test_nearest_center_and_ties():
    eta = np.arange(-10, 11) * 1.0
    prof = -np.exp(-((eta - 1) ** 2) / 4)
    assert ctos.nearest_center(eta, prof) == pytest.approx(1.0, abs=0.1)
    sym = (np.abs(eta) - 3) ** 2
    assert ctos.nearest_center(eta, sym) == pytest.approx(-3.0)
    with pytest.raises(ctos.LostCenter):
        ctos.nearest_center(eta, np.zeros_like(eta))


def test_nearest_orientation_periodic():
    thetas = np.arange(36) * np.pi / 18
    got = ctos.nearest_orientation(thetas, np.cos(thetas - thetas[35]), 0.1)
    assert abs(oscore.angle_diff(got, thetas[35])) < 1e-9
    assert ctos.nearest_orientation(thetas, np.zeros(36), 0.3) == 0.3


@pytest.fixture(scope="module")
def reflex():
    scene = phantoms.reflex(width=12.0)
    return scene, ctos.gabor_scores(scene.image)


def test_reflex_centerline(reflex):
    scene, scores = reflex
    seg = ctos.ctos_track(scores, [30, 128.0], 0.0, CtosParams(max_steps=80))
    c = np.array(seg.centers)
    assert len(c) > 50
    assert np.abs(c[:, 1] - 128).max() < 1.0


def test_zero_score_loses_center():
    data = np.zeros((36, 64, 64), complex)
    zero = oscore.OrientationScore(data, np.arange(36) * np.pi / 18, "gabor", "double")
    seg = ctos.ctos_track([zero], [32, 32], 0.0)
    assert seg.stop_reason == "lost center"
    assert len(seg.centers) == 1


def test_straight_rms_and_boundary():
    scene = phantoms.straight(width=8.0, angle=np.deg2rad(10))
    scores = ctos.gabor_scores(scene.image)
    seg = ctos.ctos_track(scores, [128, 128], np.deg2rad(10))
    c = np.array(seg.centers)
    n = oscore.e_eta(np.deg2rad(10))
    d = (c - [128, 128]) @ n
    assert np.sqrt(np.mean(d**2)) < 1.0
    assert seg.stop_reason == "boundary"


def test_widening_scale_non_decreasing():
    scene = phantoms.widening()
    scores = ctos.gabor_scores(scene.image)
    y0 = float(scene.vessels[0].points[0][1])
    seg = ctos.ctos_track(scores, [25, y0], 0.0, CtosParams(max_steps=130))
    s = np.array(seg.scale_indices)
    assert np.all(np.diff(s) >= 0)


def test_crossing_terminates():
    scene = phantoms.crossing()
    scores = ctos.gabor_scores(scene.image)
    seg = ctos.ctos_track(scores, [20, 128], 0.0)
    assert seg.stop_reason in ("boundary", "lost center")
    assert len(seg.centers) < CtosParams().max_steps
