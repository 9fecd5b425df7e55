"""tapkit command line: thin wrappers over the library modules.

Subcommands: simgen | eval | assist | chain | stats | cluster |
tapnet-check | serve.  All batch subcommands are deterministic: the same
seed and inputs produce bit-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import assist as assist_mod
from . import chain as chain_mod
from . import metrics as metrics_mod
from . import trajstats
from .sim import build_scene, render
from .sim.export import export_video
from .tracks import Dataset, FlowVolume, Track, read_tracks, write_tracks


def _parse_resolution(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tapkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simgen", help="generate a synthetic video with ground truth")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int, default=24)
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--scene", default="jitter", help="preset name or JSON config file")
    p.add_argument("--out", required=True)
    p.add_argument("--id", dest="video_id", default=None)
    p.add_argument("--fps", type=float, default=25.0)
    p.add_argument("--budget", type=int, default=256, help="query sampling budget")
    p.set_defaults(func=cmd_simgen)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--query-mode", choices=("strided", "first"), default="strided")
    p.add_argument("--out", default=None)
    p.add_argument(
        "--non-strict",
        action="store_true",
        help="count errors equal to a threshold as within it",
    )
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("assist", help="solve tracks from control points and flow")
    p.add_argument("--flow", required=True, help="directory of .flo files")
    p.add_argument("--controls", required=True)
    p.add_argument("--mode", choices=("flow", "linear"), default="flow")
    p.add_argument("--resolution", type=_parse_resolution, default=None, metavar="WxH")
    p.add_argument("--solver", choices=("fast", "exact"), default="fast")
    p.add_argument("--out", required=True)
    p.add_argument("--id", dest="video_id", default="")
    p.add_argument("--fps", type=float, default=25.0)
    p.set_defaults(func=cmd_assist)

    p = sub.add_parser("chain", help="baseline tracker: integrate flow from queries")
    p.add_argument("--flow", required=True)
    p.add_argument("--flow-back", default=None)
    p.add_argument("--queries", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--id", dest="video_id", default="")
    p.add_argument("--fps", type=float, default=25.0)
    p.add_argument(
        "--cycle",
        action="store_true",
        help="estimate occlusion by cycle consistency (needs --flow-back)",
    )
    p.add_argument("--cycle-threshold", type=float, default=48.0)
    p.set_defaults(func=cmd_chain)

    p = sub.add_parser("stats", help="trajectory statistics for a track file")
    p.add_argument("--tracks", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("cluster", help="agglomerative trajectory clustering")
    p.add_argument("--tracks", required=True)
    p.add_argument("--threshold", type=float, default=trajstats.CLUSTER_THRESHOLD)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("tapnet-check", help="run the numeric invariant/gradient suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instances", type=int, default=200)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_tapnet_check)

    p = sub.add_parser("serve", help="run the annotation service")
    p.add_argument("--data", default=None, help="video data dir (env TAPKIT_DATA overrides)")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--ui", default=None, help="static UI bundle dir (env TAPKIT_UI)")
    p.set_defaults(func=cmd_serve)
    return parser


def _write_or_print(obj: dict, out: str | None) -> None:
    text = json.dumps(obj, indent=2)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def cmd_simgen(args) -> int:
    scene_arg = args.scene
    config = {
        "preset": scene_arg,
        "seed": args.seed,
        "frames": args.frames,
        "width": args.width,
        "height": args.height,
        "budget": args.budget,
    }
    if Path(scene_arg).is_file():
        config.update(json.loads(Path(scene_arg).read_text(encoding="utf-8")))
    scene = build_scene(
        config["preset"],
        seed=int(config["seed"]),
        num_frames=int(config["frames"]),
        width=int(config["width"]),
        height=int(config["height"]),
    )
    video_id = args.video_id or f"{config['preset']}_{config['seed']:04d}"
    out = export_video(
        scene,
        render(scene),
        args.out,
        video_id,
        fps=args.fps,
        query_budget=int(config["budget"]),
        config_echo=config,
    )
    print(out)
    return 0


def cmd_eval(args) -> int:
    gt = read_tracks(args.gt)
    pred = read_tracks(args.pred)
    report = metrics_mod.evaluate(
        gt, pred, mode=args.query_mode, strict=not args.non_strict
    )
    _write_or_print(report.to_obj(), args.out)
    return 0


def cmd_assist(args) -> int:
    flow = FlowVolume.from_dir(args.flow)
    control_tracks = assist_mod.read_controls(args.controls)
    tracks = []
    for tag, controls in control_tracks:
        tracks.append(
            assist_mod.solve_track(
                flow,
                controls,
                default_mode=args.mode,
                solver=args.solver,
                tag=tag,
                working_resolution=args.resolution,
            )
        )
    dataset = Dataset(
        video_id=args.video_id,
        width=flow.width,
        height=flow.height,
        fps=args.fps,
        tracks=tuple(tracks),
    )
    write_tracks(dataset, args.out)
    return 0


def cmd_chain(args) -> int:
    flow = FlowVolume.from_dir(args.flow)
    flow_back = FlowVolume.from_dir(args.flow_back) if args.flow_back else None
    if args.cycle and flow_back is None:
        raise SystemExit("--cycle requires --flow-back")
    tracks = []
    for tag, query in chain_mod.read_queries(args.queries):
        track = chain_mod.chain_track(flow, query, flow_back, tag=tag)
        if args.cycle:
            back_map = chain_mod.flow_back_map(flow, flow_back, query.t)
            visible = chain_mod.cycle_consistency_occlusion(
                track.points, query, back_map, threshold=args.cycle_threshold
            )
            track = Track(
                points=track.points,
                visible=track.visible & visible,
                query=track.query,
                tag=track.tag,
                source_resolution=track.source_resolution,
            )
        tracks.append(track)
    dataset = Dataset(
        video_id=args.video_id,
        width=flow.width,
        height=flow.height,
        fps=args.fps,
        tracks=tuple(tracks),
    )
    write_tracks(dataset, args.out)
    return 0


def cmd_stats(args) -> int:
    dataset = read_tracks(args.tracks)
    per_track = []
    for tr in dataset.tracks:
        per_track.append(
            {
                "tag": tr.tag,
                "diameter": trajstats.diameter(tr),
                "num_segments": trajstats.count_segments(tr),
            }
        )
    diameters = [t["diameter"] for t in per_track]
    segments = [t["num_segments"] for t in per_track]
    seg_hist: dict[str, int] = {}
    for s in segments:
        seg_hist[str(s)] = seg_hist.get(str(s), 0) + 1
    bins = [0, 16, 32, 64, 96, 128, 192, 256, 1 << 30]
    diam_hist = {
        f"{lo}-{hi}": int(sum(1 for d in diameters if lo <= d < hi))
        for lo, hi in zip(bins, bins[1:])
    }
    report = {
        "video_id": dataset.video_id,
        "num_tracks": len(per_track),
        "tracks": per_track,
        "diameter_histogram": diam_hist,
        "segment_histogram": seg_hist,
    }
    _write_or_print(report, args.out)
    return 0


def cmd_cluster(args) -> int:
    dataset = read_tracks(args.tracks)
    labels = trajstats.cluster(list(dataset.tracks), threshold=args.threshold)
    report = {
        "video_id": dataset.video_id,
        "threshold": args.threshold,
        "labels": labels,
        "num_clusters": len(set(labels)) if labels else 0,
    }
    _write_or_print(report, args.out)
    return 0


def cmd_tapnet_check(args) -> int:
    from . import tapnet

    report = tapnet.check_suite(seed=args.seed, instances=args.instances)
    _write_or_print(report, args.out)
    ok = (
        report["softmax_normalized"] == report["instances"]
        and report["hull_pass"] == report["instances"]
        and report["stable"] > 0
        and report["gradient_pass"] >= 0.99 * report["stable"]
    )
    return 0 if ok else 1


def cmd_serve(args) -> int:
    from .service import serve

    data = os.environ.get("TAPKIT_DATA") or args.data
    if not data:
        raise SystemExit("serve needs --data or TAPKIT_DATA")
    ui = os.environ.get("TAPKIT_UI") or args.ui
    serve(data, port=args.port, host=args.host, ui_dir=ui)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except Exception as exc:  # diagnostics to stderr, nonzero exit
        print(f"tapkit: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
