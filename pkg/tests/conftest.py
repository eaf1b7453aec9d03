import numpy as np
import pytest

from orientrace import oscore, phantoms, wavelets


def cake_scores(image, params=wavelets.CakeParams()):
    """Double-sided and forward cake scores of the mean-removed image."""
    stack = wavelets.build_cake_stack(params, image.shape)
    plus, _ = wavelets.split_directional(stack)
    f = image - image.mean()
    return oscore.transform(f, stack), oscore.transform(f, plus)


@pytest.fixture(scope="session")
def cake128():
    return wavelets.build_cake_stack(wavelets.CakeParams(), (128, 128))


@pytest.fixture(scope="session")
def straight_scores():
    scene = phantoms.straight(width=8.0)
    return scene, *cake_scores(scene.image)


@pytest.fixture(scope="session")
def tree_model():
    from orientrace.vasculature import build_vasculature

    scene = phantoms.tree()
    return scene, build_vasculature(scene.image)


def band_limited_phantom(shape=(128, 128), seed=0, fraction=0.6):
    """Random image whose spectrum is confined to a disk of ``fraction * pi``."""
    rng = np.random.default_rng(seed)
    spectrum = np.fft.fft2(rng.normal(size=shape))
    wy = 2 * np.pi * np.fft.fftfreq(shape[0])[:, None]
    wx = 2 * np.pi * np.fft.fftfreq(shape[1])[None, :]
    spectrum[np.hypot(wx, wy) > fraction * np.pi] = 0
    img = np.real(np.fft.ifft2(spectrum))
    return 0.5 + 0.1 * img / img.std()


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
