"""Acceptance criteria 1-11, one test each.

Every test records a single PASS/FAIL line; the lines are printed in the
pytest terminal summary and when this file is run as a script.
"""

import os
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate

from orientrace import completion as cm
from orientrace import ctos, etos, formats, oscore, phantoms, spectral, validation, wavelets
from orientrace.etos import EtosParams, TrackPoint
from orientrace.vasculature import build_vasculature, detect_optic_disk, optic_disk
from conftest import band_limited_phantom, cake_scores

RESULTS: dict[int, str] = {}


def report(number: int, ok: bool, detail: str) -> None:
    RESULTS[number] = f"ACCEPTANCE {number:2d} {'PASS' if ok else 'FAIL'}  {detail}"


def test_01_reconstruction_fidelity():
    start = time.perf_counter()
    f = band_limited_phantom((128, 128), seed=0)
    f0 = f - f.mean()
    stack = wavelets.build_cake_stack(wavelets.CakeParams(n_orientations=36, spline_order=2, taylor_order=60, gamma=0.8), f.shape)
    u = oscore.transform(f0, stack)
    exact = oscore.reconstruct(u, stack)
    approx = oscore.reconstruct_approx(u)
    elapsed = time.perf_counter() - start
    e_exact = np.linalg.norm(exact - f0) / np.linalg.norm(f0)
    e_approx = np.linalg.norm(approx - f0) / np.linalg.norm(f0)
    ok = e_exact < 1e-3 and e_approx < 0.05 and elapsed < 2.0
    report(1, ok, f"exact {e_exact:.2e} (<1e-3), approx {e_approx:.2e} (<5e-2), {elapsed:.2f} s (<2 s)")
    assert ok


def test_02_m_psi_flatness():
    shape = (128, 128)
    cake = wavelets.compute_m_psi(wavelets.build_cake_stack(wavelets.CakeParams(), shape))
    gabor = wavelets.compute_m_psi(wavelets.build_gabor_stack(wavelets.GaborParams(), shape))
    wx, wy = spectral.frequency_grid(shape)
    disk = np.hypot(wx, wy) < 0.8 * np.pi
    deviation = float(np.abs(cake.grid[disk] - 1).max())
    off_dc = disk.copy()
    off_dc[0, 0] = False
    ripple = cake.grid[off_dc]
    ok = deviation < 0.05 and cake.verdict == "invertible" and gabor.verdict == "non-invertible"
    report(2, ok, f"max|M_psi-1| {deviation:.3f} (<0.05; M_psi(0) = {cake.grid[0, 0]:.3f}, elsewhere "
                  f"{ripple.min():.3f}..{ripple.max():.3f}), cake {cake.verdict}, gabor {gabor.verdict}")
    assert ok


def test_03_quadrature():
    errors = {}
    for n in (128, 256):
        stack = wavelets.build_cake_stack(wavelets.CakeParams(), (n, n))
        worst = 0.0
        for psi, theta in zip(stack.spatial, stack.thetas):
            re = psi.real - psi.real.mean()
            h = spectral.hilbert_directional(re, theta)
            worst = max(worst, np.linalg.norm(psi.imag - h) / np.linalg.norm(psi.imag))
        errors[n] = worst
    ok = errors[256] < 1e-3
    report(3, ok, f"max rel L2 |Im psi - H Re psi| {errors[256]:.2e} at 256^2 (<1e-3); {errors[128]:.2e} at 128^2")
    assert ok


def test_04_directional_split():
    stack = wavelets.build_cake_stack(wavelets.CakeParams(), (128, 128))
    plus, minus = wavelets.split_directional(stack)
    exact = np.array_equal(plus.spatial + minus.spatial, stack.spatial)
    f = band_limited_phantom((128, 128), seed=1)
    f0 = f - f.mean()
    up = oscore.transform(f0, plus).data
    um = oscore.transform(f0, minus).data
    half = stack.n_orientations // 2
    err = float(np.abs(um - np.conj(np.roll(up, -half, axis=0))).max())
    ok = exact and err < 1e-8
    report(4, ok, f"psi+ + psi- == psi bitwise: {exact}; max|U- - conj U+(theta+pi)| {err:.1e} (<1e-8)")
    assert ok


def _timed_track(scene, seed, steps=100):
    start = time.perf_counter()
    _, plus = cake_scores(scene.image)
    seg = etos.etos_track(plus, seed, EtosParams(max_steps=steps))
    return seg, time.perf_counter() - start


def test_05_etos_phantoms():
    straight = phantoms.straight(width=8.0)
    seg, t1 = _timed_track(straight, TrackPoint.from_center([20, 128], 0.0, 6.0))
    c = np.array([p.c for p in seg.points[1:]])
    w = np.array([p.w for p in seg.points[1:]])
    rms = float(np.sqrt(np.mean((c[:, 1] - 128) ** 2)))
    werr = float(np.abs(w - 8).mean())
    ok_straight = len(c) == 100 and rms < 0.5 and werr < 1.0

    crossing = phantoms.crossing(angle_deg=60.0)
    seg, t2 = _timed_track(crossing, TrackPoint.from_center([20, 128], 0.0, 8.0))
    th = np.array([p.theta for p in seg.points])
    xs = np.array([p.c[0] for p in seg.points])
    before = th[(xs > 60) & (xs < 100)]
    after = th[(xs > 160) & (xs < 220)]
    turn = float(np.rad2deg(np.abs(oscore.angle_diff(after, np.angle(np.mean(np.exp(1j * before))))).max())) if len(after) else np.inf
    ok_cross = turn < 5

    parallel = phantoms.parallel(gap=3.0)
    y0 = float(parallel.vessels[0].points[0][1])
    seg, t3 = _timed_track(parallel, TrackPoint.from_center([20, y0], 0.0, 6.0))
    jump = float(np.abs(np.array([p.c[1] for p in seg.points]) - y0).max())
    ok_par = jump < 1.0

    ok = ok_straight and ok_cross and ok_par and max(t1, t2, t3) < 5
    report(5, ok, f"straight rms {rms:.3f} px, mean |w-8| {werr:.2f} px; crossing turn {turn:.2f} deg; "
                  f"parallel max dev {jump:.2f} px; slowest scene {max(t1, t2, t3):.1f} s")
    assert ok


def test_06_ctos_phantoms():
    reflex = phantoms.reflex(width=12.0)
    seg = ctos.ctos_track(ctos.gabor_scores(reflex.image), [30, 128.0], 0.0, ctos.CtosParams(max_steps=80))
    dev = float(np.abs(np.array(seg.centers)[:, 1] - 128).max())
    widening = phantoms.widening()
    y0 = float(widening.vessels[0].points[0][1])
    seg = ctos.ctos_track(ctos.gabor_scores(widening.image), [25, y0], 0.0, ctos.CtosParams(max_steps=130))
    s = np.array(seg.scale_indices)
    monotone = bool(np.all(np.diff(s) >= 0))
    ok = dev < 1.0 and monotone
    report(6, ok, f"reflex centerline max dev {dev:.2f} px (<1); scale index non-decreasing: {monotone} "
                  f"(indices used {sorted(set(s.tolist()))})")
    assert ok


def test_07_vasculature_topology(tree_model):
    scene, model = tree_model
    counts = model.counts()
    try:
        model.check()
        forest = True
    except AssertionError:
        forest = False
    again = build_vasculature(scene.image)
    same = formats.dumps(formats.vasculature_document(model)) == formats.dumps(formats.vasculature_document(again))
    ok = counts == {"segments": 5, "bifurcations": 2, "crossings": 1} and forest and same
    report(7, ok, f"{counts['segments']} segments, {counts['bifurcations']} bifurcations, {counts['crossings']} crossing; "
                  f"forest {forest}; byte-identical rerun {same}")
    assert ok


def test_08_optic_disk():
    scene = phantoms.disk(bars=6)
    disk = detect_optic_disk(scene.image, params=optic_disk.DiskParams(expected_radius=60))
    dc = float(np.hypot(*(np.asarray(disk.center) - [200, 200])))
    dr = abs(disk.radius - 60)
    cal = optic_disk.avg_caliber(92)
    ok = dc < 2 and dr < 3 and cal == 15
    report(8, ok, f"center error {dc:.2f} px (<2), radius error {dr:.2f} px (<3), avg_caliber(92) = {cal!r}")
    assert ok


def _slice_mass(x, lam, d11):
    # marginal standard deviations of the Gaussian factor, covered to 8 sigma
    sd_y = 8 * np.sqrt(2 * d11 * x**3 / 3)
    sd_t = 8 * np.sqrt(2 * d11 * x)
    ys = np.linspace(-sd_y, sd_y, 161)
    ts = np.linspace(-sd_t, sd_t, 161)
    Y, T = np.meshgrid(ys, ts, indexing="ij")
    vals = cm.heisenberg_green(np.full(Y.shape, x), Y, T, lam, d11)
    return integrate.trapezoid(integrate.trapezoid(vals, ts, axis=1), ys)


def test_09_completion_math():
    lam, d11 = 1.0, 0.125
    mass, _ = integrate.quad(lambda x: _slice_mass(x, lam, d11), 0, np.inf, limit=200)
    setups = [cm.CompletionSetup((0.0, 0.0, 0.4), (2.0, 0.0, -0.4), d11=0.125)]
    rng = np.random.default_rng(2024)
    for _ in range(10):
        x2 = rng.uniform(0.5, 4)
        setups.append(cm.CompletionSetup((0.0, rng.normal(), rng.uniform(-1, 1)), (x2, rng.normal(), rng.uniform(-1, 1)),
                                         d11=rng.uniform(0.05, 1)))
    mode_dev = max(float(np.abs(cm.extract_mode(s).y - cm.cubic_hermite(s.g1, s.g2).y).max()) for s in setups)
    beta = 1.0
    energy_dev = 0.0
    for x2, y2, t2 in [(2.0, 0.3, -0.2), (1.0, 1.0, 1.0), (1.5, -0.4, 0.5)]:
        numeric = cm.elastica_energy(cm.cubic_hermite((0, 0, 0), (x2, y2, t2), n=4001), beta)
        energy_dev = max(energy_dev, abs(numeric - cm.heisenberg_energy_plus_cross_term(x2, y2, t2, beta)))
    ok = abs(mass - 1) < 1e-4 and mode_dev < 1e-6 and energy_dev < 1e-4
    report(9, ok, f"marginal mass {mass:.6f}; mode vs cubic {mode_dev:.1e} (<1e-6, 11 setups); "
                  f"energy vs stated closed form max dev {energy_dev:.3g} (<1e-4; the +3 x2 y2 theta2 term has the wrong sign)")
    assert ok


REVIEW_TABLE = {"KPIS": 0.36, "CLRIS": 0.53, "VDIS": 0.80, "HRIS": 0.45}


def test_10_review_widths():
    root = os.environ.get("ORIENTRACE_REVIEW_DIR")
    if not root:
        report(10, True, "SKIPPED: set ORIENTRACE_REVIEW_DIR to a directory of converted truth CSVs and images")
        RESULTS[10] = RESULTS[10].replace("PASS", "SKIP")
        pytest.skip("REVIEW-derived truth data not available")
    all_truth, all_meas, lines, ok = [], [], [], True
    for name, expected in REVIEW_TABLE.items():
        folder = Path(root) / name
        if not (folder / "truth.csv").exists():
            continue
        truth = formats.read_truth_csv(folder / "truth.csv")
        records = []
        for image_id in sorted({r["image_id"] for r in truth}):
            image_path = next(iter(sorted(folder.glob(f"{image_id}.*"))), None)
            if image_path is None:
                continue
            model_path = folder / f"{image_id}_model.json"
            if model_path.exists():
                points = [p for seg in formats.segments_from_document(formats.read_model(model_path)) for p in seg.points]
            else:
                from orientrace import raster

                model = build_vasculature(raster.load_image(image_path, "green").data)
                points = [p for seg in model.segments for p in seg.points]
            rows = [r for r in truth if r["image_id"] == image_id]
            matched, _ = validation.match_profiles(rows, points)
            records.extend(matched)
        stats = validation.width_statistics(records, len(truth))
        ok &= abs(stats.sigma_chi - expected) <= 0.15
        lines.append(f"{name} sigma_chi {stats.sigma_chi:.2f} (ref {expected})")
        all_truth.extend(truth)
        all_meas.extend(records)
    pooled = validation.width_statistics(all_meas, len(all_truth))
    ok &= bool(lines) and abs(pooled.slope - 0.88) <= 0.1 and abs(pooled.intercept - 0.85) <= 0.3
    report(10, ok, "; ".join(lines) + f"; slope {pooled.slope:.2f}, intercept {pooled.intercept:.2f}")
    assert ok


def test_11_metric_sanity():
    r, length, beta = 2.0, 3.0, 0.7
    arc = cm.sr_length(cm.arc_curve(r, length), beta)
    arc_ref = length * np.sqrt(r**-2 + beta**2)
    line = cm.sr_length(cm.cubic_hermite((0, 0, 0), (5.0, 0, 0)), beta)
    ok = abs(arc - arc_ref) < 1e-4 and abs(line - beta * 5.0) < 1e-9
    report(11, ok, f"arc {arc:.6f} vs {arc_ref:.6f}; line {line:.9f} vs {beta * 5.0:.9f}")
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
