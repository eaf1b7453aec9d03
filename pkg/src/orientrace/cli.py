"""Command-line interface.

Exit codes: 0 success, 2 usage or input error, 3 ill-conditioned transform,
4 no seeds or low-confidence optic disk.
"""

from __future__ import annotations

import argparse
import logging
import sys
import threading
from pathlib import Path

import numpy as np

from . import completion, ctos, etos, formats, oscore, phantoms, plotting, raster, validation, wavelets
from .errors import (
    DegenerateSpan,
    FormatError,
    IllConditioned,
    LowConfidence,
    NoSeeds,
    NotFound,
    OrientraceError,
    ParamError,
    SeedError,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_ILL_CONDITIONED = 3
EXIT_NO_SEEDS = 4

log = logging.getLogger("orientrace")
_print_lock = threading.Lock()


def _out(*args):
    with _print_lock:
        print(*args, flush=True)


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# shared helpers


def _stack_from_args(args, shape):
    if args.wavelet == "cake":
        p = wavelets.CakeParams(n_orientations=args.orientations, spline_order=args.spline_order,
                                taylor_order=args.taylor_order, gamma=args.gamma)
        stack = wavelets.build_cake_stack(p, shape)
        meta = {"wavelet": "cake", "orientations": p.n_orientations, "spline_order": p.spline_order,
                "taylor_order": p.taylor_order, "gamma": p.gamma}
    else:
        scale = args.scale if args.scale is not None else wavelets.GaborParams().scale
        p = wavelets.GaborParams(scale=scale, n_orientations=args.orientations)
        p.validate()
        stack = wavelets.build_gabor_stack(p, shape)
        meta = {"wavelet": "gabor", "orientations": p.n_orientations, "scale": p.scale}
    if args.sided != "double":
        plus, minus = wavelets.split_directional(stack)
        stack = plus if args.sided == "plus" else minus
    meta["sided"] = args.sided
    return stack, meta


def _stack_from_meta(meta, shape):
    ns = argparse.Namespace(
        wavelet=meta["wavelet"], orientations=meta["orientations"], spline_order=meta.get("spline_order", 2),
        taylor_order=meta.get("taylor_order", 60), gamma=meta.get("gamma", 0.8), scale=meta.get("scale"),
        sided=meta.get("sided", "double"),
    )
    return _stack_from_args(ns, shape)[0]


def _add_wavelet_flags(p):
    p.add_argument("--wavelet", choices=("cake", "gabor"), default="cake")
    p.add_argument("--orientations", type=int, default=36)
    p.add_argument("--spline-order", type=int, default=2)
    p.add_argument("--taylor-order", type=int, default=60)
    p.add_argument("--gamma", type=float, default=0.8)
    p.add_argument("--scale", type=float, default=None, help="Gabor dilation (pixels)")
    p.add_argument("--sided", choices=("double", "plus", "minus"), default="double")


# --------------------------------------------------------------------------
# commands


def cmd_score(args) -> int:
    img = raster.load_image(args.input, args.channel)
    stack, meta = _stack_from_args(args, img.shape)
    centered = raster.remove_dc(img)
    score = oscore.transform(centered, stack, args.threads)
    meta.update({"input": str(args.input), "channel": args.channel, "dc": float(img.data.mean())})
    report = wavelets.compute_m_psi(stack)
    meta["m_psi"] = {"min": report.minimum, "max": report.maximum, "verdict": report.verdict}
    header, data = formats.write_score(args.out, score, meta)
    _out(f"score {score.data.shape} -> {header} {data}")
    _out(f"m_psi min {report.minimum:.6g} max {report.maximum:.6g} verdict {report.verdict}")
    if args.figure:
        plotting.m_psi_figure(args.figure, report.grid, f"M_psi ({report.verdict})")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    score, header = formats.read_score(args.score)
    meta = header["meta"]
    stack = _stack_from_meta(meta, score.shape)
    report = wavelets.compute_m_psi(stack)
    if args.approx:
        recon = oscore.reconstruct_approx(score)
    else:
        if report.verdict != "invertible":
            raise IllConditioned(f"M_psi verdict {report.verdict} (min {report.minimum:.3g}, max {report.maximum:.3g})")
        recon = oscore.reconstruct(score, stack, threads=args.threads)
    recon = recon + meta.get("dc", 0.0)
    raster.save_image(args.out, recon)
    source = args.input or meta.get("input")
    if source:
        ref = raster.load_image(source, meta.get("channel", "gray")).data
        err = np.linalg.norm(recon - ref) / max(np.linalg.norm(ref), 1e-300)
        _out(f"relative_l2_error {err:.6e}")
    return EXIT_OK


def _tracking_score(gray, args):
    params = wavelets.CakeParams(n_orientations=args.orientations)
    stack = wavelets.build_cake_stack(params, gray.shape)
    plus, _ = wavelets.split_directional(stack)
    return oscore.transform(gray - gray.mean(), plus, args.threads)


def cmd_track(args) -> int:
    img = raster.load_image(args.input, args.channel, args.mask)
    seeds = formats.read_seeds(args.seeds)
    segments = []
    if args.algo == "etos":
        points = formats.seeds_to_track_points(seeds, args.default_width)
        params = etos.EtosParams(step=args.step, eta_max=args.eta_max, envelope_sigma=args.envelope_sigma,
                                 history=args.history, max_steps=args.max_steps)
        if points:
            score = _tracking_score(img.data, args)
            stop = etos.StopPolicy(mask=img.mask)
            for k, p in enumerate(points):
                segments.append(etos.etos_track(score, p, params, stop, k))
    else:
        params = ctos.CtosParams(step=args.step, eta_max=args.eta_max, max_steps=args.max_steps)
        if seeds:
            scores = ctos.gabor_scores(img.data, params, args.orientations, args.threads)
            for k, s in enumerate(seeds):
                segments.append(ctos.ctos_track(scores, s["c"], s["theta"], params, img.mask, k))
    doc = formats.model_document(segments, params={"algo": args.algo, **{k: v for k, v in vars(params).items()}})
    formats.write_json(args.out, _plain(doc))
    _out(f"segments {len(segments)} -> {args.out}")
    for seg in segments:
        n = len(seg.points) if hasattr(seg, "points") else len(seg.centers)
        _out(f"segment {seg.id} points {n} stop {seg.stop_reason}")
    if args.overlay:
        plotting.overlay(args.overlay, img.data, segments)
    return EXIT_OK


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def cmd_vasculature(args) -> int:
    from .vasculature import VasculatureParams, build_vasculature, model_features

    rgb = raster.load_rgb(args.input)
    mask = raster.load_image(args.input, mask_path=args.mask).mask if args.mask else None
    image = rgb if not np.allclose(rgb[..., 0], rgb[..., 1]) else rgb[..., 0]
    seeds = None
    if args.seed_file:
        seeds = formats.seeds_to_track_points(formats.read_seeds(args.seed_file))
    params = VasculatureParams(threads=args.threads)
    model = build_vasculature(image, mask, params, seeds)
    formats.write_json(args.out, formats.vasculature_document(model))
    counts = model.counts()
    _out(f"segments {counts['segments']} bifurcations {counts['bifurcations']} crossings {counts['crossings']}")
    feats = model_features(model)
    if args.features_out:
        base = Path(args.features_out)
        formats.write_csv(base, feats["points"],
                          ["segment_id", "index", "x", "y", "theta", "width", "disk_distance"])
        formats.write_csv(base.with_name(base.stem + "_segments.csv"), feats["segments"],
                          ["segment_id", "parent_id", "length", "mean_width", "mean_curvature", "stop_reason"])
        formats.write_csv(base.with_name(base.stem + "_junctions.csv"), feats["junctions"],
                          ["x", "y", "theta", "kind", "segment_ids"])
    if args.overlay:
        plotting.overlay(args.overlay, image, model.segments, model.junctions, model.optic_disk)
    return EXIT_OK


def cmd_validate_widths(args) -> int:
    doc = formats.read_model(args.model)
    truth = formats.read_truth_csv(args.truth)
    points = [p for seg in formats.segments_from_document(doc) for p in seg.points]
    matched, _ = validation.match_profiles(truth, points, args.match_radius)
    stats = validation.width_statistics(matched, len(truth))
    for key, value in stats.to_json().items():
        _out(f"{key} {value}")
    if args.out:
        formats.write_json(args.out, {"schema": "orientrace.widths/1", **stats.to_json()})
    if args.records_out:
        formats.write_csv(args.records_out, [
            {"image_id": r.image_id, "profile_id": r.profile_id, "width": r.width, "truth_width": r.truth_width,
             "error": r.error} for r in matched], ["image_id", "profile_id", "width", "truth_width", "error"])
    if args.figure and matched:
        plotting.width_regression_figure(args.figure, [r.truth_width for r in matched],
                                         [r.width for r in matched], stats.slope, stats.intercept)
    return EXIT_OK


def cmd_phantom(args) -> int:
    kwargs = {}
    shape = (args.size, args.size) if args.size else None
    if args.scene in ("straight", "crossing", "parallel", "reflex"):
        if shape:
            kwargs["shape"] = shape
        kwargs["noise"] = args.noise
        kwargs["seed"] = args.seed
        if args.width is not None:
            kwargs["width"] = args.width
        if args.contrast is not None:
            kwargs["contrast"] = args.contrast
    if args.scene == "straight" and args.angle is not None:
        kwargs["angle"] = np.deg2rad(args.angle)
    if args.scene == "crossing" and args.angle is not None:
        kwargs["angle_deg"] = args.angle
    if args.scene == "parallel" and args.gap is not None:
        kwargs["gap"] = args.gap
    if args.scene == "reflex" and args.reflex_height is not None:
        kwargs["reflex_height"] = args.reflex_height
    if args.scene == "tree":
        kwargs = {"noise": args.noise, "seed": args.seed}
    if args.scene == "disk":
        if shape:
            kwargs["shape"] = shape
            kwargs["center"] = (args.size / 2, args.size / 2)
        if args.bars is not None:
            kwargs["bars"] = args.bars
    scene = phantoms.SCENES[args.scene](**kwargs)
    image = scene.image
    if args.scene == "disk" and args.noise > 0:
        image = np.clip(image + np.random.default_rng(args.seed).normal(0, args.noise, image.shape), 0, 1)
    raster.save_image(args.out, image, bits=16 if args.bits == 16 else 8)
    truth_path = Path(args.truth) if args.truth else Path(args.out).with_suffix(".json")
    truth = _plain(scene.to_json())
    truth["schema"] = "orientrace.phantom/1"
    formats.write_json(truth_path, truth)
    _out(f"{args.scene} -> {args.out} {truth_path}")
    return EXIT_OK


def cmd_completion_demo(args) -> int:
    x1, y1, t1, x2, y2, t2 = args.boundary
    if not x2 > x1:
        raise UsageError("x2 must exceed x1")
    setup = completion.CompletionSetup((x1, y1, t1), (x2, y2, t2), args.lambda_res, args.d11, args.beta)
    mode = completion.extract_mode(setup, n=args.samples)
    cubic = completion.cubic_hermite(setup.g1, setup.g2, xs=mode.x)
    deviation = float(max(np.abs(mode.y - cubic.y).max(), np.abs(mode.theta - cubic.theta).max()))
    prefix = Path(args.out_prefix)
    rows = lambda c: [{"x": a, "y": b, "theta": t} for a, b, t in zip(c.x, c.y, c.theta)]  # noqa: E731
    formats.write_csv(prefix.with_name(prefix.name + "_mode.csv"), rows(mode), ["x", "y", "theta"])
    formats.write_csv(prefix.with_name(prefix.name + "_cubic.csv"), rows(cubic), ["x", "y", "theta"])
    span_y = max(abs(y1), abs(y2), 0.5 * (x2 - x1) * max(abs(t1), abs(t2), 0.5))
    xs = np.linspace(x1, x2, args.grid)[1:-1]
    ys = np.linspace(min(y1, y2) - span_y, max(y1, y2) + span_y, args.grid)
    span_t = max(abs(t1), abs(t2), 0.5)
    ts = np.linspace(min(t1, t2) - span_t, max(t1, t2) + span_t, args.grid)
    field = completion.completion_field_grid(setup, xs, ys, ts).astype("<f8")
    field_path = prefix.with_name(prefix.name + "_field.bin")
    field.tofile(field_path)
    formats.write_json(prefix.with_name(prefix.name + "_field.json"), {
        "schema": formats.FIELD_SCHEMA, "shape": list(field.shape), "dtype": "float64-le", "order": ["x", "y", "theta"],
        "x": xs.tolist(), "y": ys.tolist(), "theta": ts.tolist(), "data_file": field_path.name,
        "setup": {"g1": [x1, y1, t1], "g2": [x2, y2, t2], "lambda_res": args.lambda_res, "d11": args.d11,
                  "beta": args.beta},
    })
    if args.figure:
        plotting.completion_figure(prefix.with_name(prefix.name + "_field.png"), xs, ys, field.max(axis=2), mode, cubic)
    _out(f"max_deviation {deviation:.3e}")
    _out(f"sr_length_mode {completion.sr_length(completion.LiftedCurve(mode.x, mode.y, mode.theta, 'arclength'), args.beta):.6f}")
    _out(f"elastica_energy_mode {completion.elastica_energy(mode, args.beta):.6f}")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="orientrace", description="Orientation scores and retinal vessel tracking.")
    parser.add_argument("--threads", type=int, default=None, help="worker threads (ORIENTRACE_THREADS wins)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("score", help="compute an orientation score")
    p.add_argument("--input", required=True)
    p.add_argument("--channel", choices=("gray", "red", "green"), default="gray")
    _add_wavelet_flags(p)
    p.add_argument("--out", required=True, help="output prefix (.json header and .bin data)")
    p.add_argument("--figure", help="optional PNG of M_psi")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("reconstruct", help="reconstruct an image from a score")
    p.add_argument("--score", required=True, help="score prefix written by 'score'")
    p.add_argument("--out", required=True, help="output PNG")
    p.add_argument("--input", help="reference image (default: the score's source)")
    p.add_argument("--approx", action="store_true", help="sum over orientations instead of exact inversion")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("track", help="track vessels from seeds")
    p.add_argument("--input", required=True)
    p.add_argument("--channel", choices=("gray", "red", "green"), default="gray")
    p.add_argument("--mask")
    p.add_argument("--algo", choices=("etos", "ctos"), default="etos")
    p.add_argument("--seeds", required=True)
    p.add_argument("--orientations", type=int, default=36)
    p.add_argument("--step", type=float, default=2.0)
    p.add_argument("--eta-max", type=float, default=20.0)
    p.add_argument("--envelope-sigma", type=float, default=3.0)
    p.add_argument("--history", type=int, default=10)
    p.add_argument("--max-steps", type=int, default=1000)
    p.add_argument("--default-width", type=float, default=None, help="width for seeds given by center only")
    p.add_argument("--out", required=True)
    p.add_argument("--overlay")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("vasculature", help="build a whole-vasculature model")
    p.add_argument("--input", required=True)
    p.add_argument("--mask")
    p.add_argument("--out", required=True)
    p.add_argument("--features-out")
    p.add_argument("--seed-file")
    p.add_argument("--overlay")
    p.set_defaults(func=cmd_vasculature)

    p = sub.add_parser("validate-widths", help="compare measured widths with ground truth")
    p.add_argument("--model", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--match-radius", type=float, default=3.0)
    p.add_argument("--out")
    p.add_argument("--records-out")
    p.add_argument("--figure")
    p.set_defaults(func=cmd_validate_widths)

    p = sub.add_parser("phantom", help="render a synthetic test scene")
    p.add_argument("--scene", choices=("straight", "crossing", "parallel", "reflex", "tree", "disk"), required=True)
    p.add_argument("--size", type=int)
    p.add_argument("--width", type=float)
    p.add_argument("--contrast", type=float)
    p.add_argument("--angle", type=float, help="degrees")
    p.add_argument("--gap", type=float)
    p.add_argument("--reflex-height", type=float)
    p.add_argument("--bars", type=int)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bits", type=int, choices=(8, 16), default=16)
    p.add_argument("--out", required=True)
    p.add_argument("--truth")
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("completion-demo", help="completion field, mode and cubic for two oriented points")
    p.add_argument("--boundary", type=float, nargs=6, required=True, metavar=("X1", "Y1", "TH1", "X2", "Y2", "TH2"))
    p.add_argument("--lambda", dest="lambda_res", type=float, default=1.0)
    p.add_argument("--d11", type=float, default=0.125)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=201)
    p.add_argument("--grid", type=int, default=41)
    p.add_argument("--figure", action="store_true")
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_completion_demo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"orientrace: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.threads = oscore.resolve_threads(args.threads)
        return args.func(args)
    except (UsageError, ParamError, FormatError, NotFound, SeedError, DegenerateSpan) as exc:
        print(f"orientrace: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IllConditioned as exc:
        print(f"orientrace: ill-conditioned: {exc}", file=sys.stderr)
        return EXIT_ILL_CONDITIONED
    except (NoSeeds, LowConfidence) as exc:
        print(f"orientrace: {exc}", file=sys.stderr)
        return EXIT_NO_SEEDS
    except OrientraceError as exc:
        print(f"orientrace: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
