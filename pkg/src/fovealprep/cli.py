"""Command-line entry point.

Subcommands cover the full preprocessing/evaluation pipeline: ``filter``
(single image or box batch), ``pyramid-dump`` (stack debugging), ``vote``
(per-frame score fusion), ``partition`` (split construction), ``eval``
(video mAP), ``loss-check`` (loss values plus a gradient check), ``prep``
(annotation-driven batch filtering with a manifest), and ``bench``
(filter throughput report).

Exit codes: 0 success, 1 validation/usage error, 2 I/O error. Diagnostics
go to stderr; results meant for capture go to stdout. Outputs are
deterministic for identical inputs and flags, including ``prep`` under any
``--jobs`` degree.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import avadata, detmetrics, filters, imgcore, multihead_loss, pyramid, voting

FOVEA_FPS_TARGET = 100.0
GBB_FPS_TARGET = 300.0


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _env_jobs() -> int:
    try:
        return max(1, int(os.environ.get("FOVEAL_PREP_JOBS", "1")))
    except ValueError:
        return 1


def _parse_box(text: str) -> imgcore.BoundingBox:
    parts = text.split(",")
    if len(parts) != 4:
        raise ValueError(f"--box wants x,y,w,h, got {text!r}")
    x, y, w, h = (float(p) for p in parts)
    return imgcore.BoundingBox(x, y, w, h)


def _read_raster(path: Path) -> imgcore.Image:
    if path.suffix.lower() == ".flo":
        return imgcore.read_flow(path)
    return imgcore.read_image(path)


def _write_raster(image: imgcore.Image, path: Path) -> None:
    if path.suffix.lower() == ".flo":
        imgcore.write_flow(image, path)
    else:
        imgcore.write_image(image, path)


def _frame_filter(args, box: imgcore.BoundingBox):
    fovea = None
    if args.mode == "fovea":
        fovea = filters.FoveaParams(box=box, sigma1=args.sigma1, levels=args.levels)
    return filters.make_frame_filter(args.mode, box=box, sigma=args.sigma, fovea=fovea)


def _cmd_filter(args) -> int:
    src = Path(args.input)
    image = _read_raster(src)
    if args.box is not None:
        out = Path(args.output)
        filtered = _frame_filter(args, _parse_box(args.box))(image)
        if out.parent != Path("") and not out.parent.exists():
            out.parent.mkdir(parents=True, exist_ok=True)
        _write_raster(filtered, out)
        return 0
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = 0
    with open(args.boxes, newline="") as f:
        for line_no, row in enumerate(csv.reader(f), start=1):
            if not row:
                continue
            if len(row) != 4:
                raise ValueError(f"{args.boxes} line {line_no}: expected x,y,w,h")
            box = imgcore.BoundingBox(*(float(v) for v in row))
            filtered = _frame_filter(args, box)(image)
            _write_raster(filtered, out_dir / f"{src.stem}_{written:03d}{src.suffix}")
            written += 1
    print(f"filter: wrote {written} outputs to {out_dir}", file=sys.stderr)
    return 0


def _cmd_pyramid_dump(args) -> int:
    image = imgcore.read_image(args.input)
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    stack = pyramid.build_gaussian_stack(image, args.sigma1, args.levels)
    lap = pyramid.build_laplacian_stack(stack)
    for k, level in enumerate(stack.levels):
        imgcore.write_image(level, out_dir / f"gauss_{k}.png")
    for k, band in enumerate(lap.bands):
        # bands are signed; shift to mid-gray for viewing
        imgcore.write_image(imgcore.Image(band.data + 0.5), out_dir / f"band_{k}.png")
    print(f"pyramid-dump: wrote {len(stack.levels)} levels and {len(lap.bands)} bands",
          file=sys.stderr)
    return 0


def _read_score_rows(path):
    with open(path, newline="") as f:
        for line_no, row in enumerate(csv.reader(f), start=1):
            if not row:
                continue
            if line_no == 1 and not row[1].strip().lstrip("-").isdigit():
                continue  # header
            if len(row) != 5:
                raise ValueError(f"{path} line {line_no}: expected 5 fields, got {len(row)}")
            yield line_no, row[0], int(row[1]), row[2].strip(), int(row[3]), float(row[4])


def _cmd_vote(args) -> int:
    head_sizes = {"pose": args.pose_classes, "hh": args.hh_classes, "ho": args.ho_classes}
    segments: dict[str, dict[int, dict[str, np.ndarray]]] = defaultdict(dict)
    for line_no, seg, frame, head, class_id, score in _read_score_rows(args.scores):
        if args.single_label:
            head = "pose"
            size = args.classes
        else:
            if head not in head_sizes:
                raise ValueError(f"line {line_no}: unknown head {head!r}")
            size = head_sizes[head]
        if not 0 <= class_id < size:
            raise ValueError(f"line {line_no}: class {class_id} outside 0..{size - 1}")
        frame_scores = segments[seg].setdefault(
            frame,
            {h: np.zeros(args.classes if args.single_label else head_sizes[h])
             for h in ("pose", "hh", "ho")},
        )
        frame_scores[head][class_id] = score

    out_path = Path(args.output)
    with open(out_path, "w", newline="") as f:
        writer = csv.writer(f)
        if args.single_label:
            writer.writerow(["segment_id", "class"])
        else:
            writer.writerow(["segment_id", "pose", "hh", "ho"])
        for seg in sorted(segments):
            frames = [segments[seg][idx] for idx in sorted(segments[seg])]
            if args.single_label:
                winner = voting.aggregate_votes_single_label(
                    [fr["pose"] for fr in frames], args.classes
                )
                writer.writerow([seg, winner])
            else:
                prediction = voting.aggregate_votes(
                    [
                        multihead_loss.ScoreVector(fr["pose"], fr["hh"], fr["ho"])
                        for fr in frames
                    ],
                    threshold=args.threshold,
                )
                writer.writerow(
                    [
                        seg,
                        prediction.pose,
                        "|".join(str(c) for c in prediction.hh),
                        "|".join(str(c) for c in prediction.ho),
                    ]
                )
    print(f"vote: wrote {len(segments)} segment predictions to {out_path}", file=sys.stderr)
    return 0


def _cmd_partition(args) -> int:
    train_pool = avadata.parse_annotations(args.train)
    test_pool = avadata.parse_annotations(args.test)
    train_sel, test_sel, report = avadata.build_partition(
        train_pool,
        test_pool,
        target_size=args.target,
        min_test=args.min_test,
        test_fraction=args.test_fraction,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    avadata.write_annotations(train_sel, out_dir / "train.csv")
    avadata.write_annotations(test_sel, out_dir / "test.csv")
    (out_dir / "report.txt").write_text(avadata.format_report(report))
    print(
        f"partition: train={report.train_total} test={report.test_total} "
        f"retained={len(report.retained_classes)} dropped={len(report.dropped_classes)}",
        file=sys.stderr,
    )
    return 0


def _cmd_eval(args) -> int:
    dets = detmetrics.read_detections(args.dets)
    gts = detmetrics.read_ground_truth(args.gt)
    value, per_class = detmetrics.mean_ap(
        dets, gts, iou_thr=args.iou, eleven_point=args.eleven_point
    )
    for class_id in sorted(per_class):
        print(f"AP@{args.iou:.2f}[{class_id}] = {per_class[class_id]:.6f}")
    print(f"mAP@{args.iou:.2f} = {value:.6f}")
    if args.report:
        payload = {
            "iou": args.iou,
            "map": value,
            "per_class": {str(c): ap for c, ap in sorted(per_class.items())},
        }
        Path(args.report).write_text(json.dumps(payload, indent=2) + "\n")
    return 0


def _loss_check_rows(path, n_pose: int, n_hh: int, n_ho: int):
    width = 2 * (n_hh + n_ho) + n_pose + 1
    with open(path, newline="") as f:
        for line_no, row in enumerate(csv.reader(f), start=1):
            if not row:
                continue
            if len(row) != width:
                raise ValueError(
                    f"{path} line {line_no}: expected {width} fields "
                    f"({n_pose + n_hh + n_ho} logits, pose target, "
                    f"{n_hh}+{n_ho} binary targets), got {len(row)}"
                )
            values = [float(v) for v in row]
            logits = values[: n_pose + n_hh + n_ho]
            scores = multihead_loss.ScoreVector(
                logits[:n_pose],
                logits[n_pose : n_pose + n_hh],
                logits[n_pose + n_hh :],
            )
            rest = values[n_pose + n_hh + n_ho :]
            label = multihead_loss.LabelVector(
                pose=int(rest[0]),
                hh=tuple(int(b) for b in rest[1 : 1 + n_hh]),
                ho=tuple(int(b) for b in rest[1 + n_hh :]),
            )
            yield scores, label


def _numeric_grad(scores, label, step=1e-5):
    def loss_with(head: str, flat: np.ndarray) -> float:
        parts = {
            "pose_logits": scores.pose_logits,
            "hh_logits": scores.hh_logits,
            "ho_logits": scores.ho_logits,
        }
        parts[head] = flat
        return multihead_loss.generalized_binary_loss(
            multihead_loss.ScoreVector(**parts), label
        )

    grads = {}
    for head in ("pose_logits", "hh_logits", "ho_logits"):
        base = np.array(getattr(scores, head))
        grad = np.zeros_like(base)
        for i in range(base.size):
            hi = base.copy()
            lo = base.copy()
            hi[i] += step
            lo[i] -= step
            grad[i] = (loss_with(head, hi) - loss_with(head, lo)) / (2 * step)
        grads[head] = grad
    return grads


def _cmd_loss_check(args) -> int:
    losses = []
    max_rel_err = 0.0
    for scores, label in _loss_check_rows(args.csv, args.pose, args.hh, args.ho):
        if args.sum_of_sigmoids:
            losses.append(multihead_loss.sum_of_sigmoids_loss(scores, label))
            continue
        losses.append(multihead_loss.generalized_binary_loss(scores, label))
        analytic = multihead_loss.generalized_binary_loss_grad(scores, label)
        numeric = _numeric_grad(scores, label)
        for head, got in zip(("pose_logits", "hh_logits", "ho_logits"), analytic):
            want = numeric[head]
            scale = max(np.abs(got).max(), np.abs(want).max(), 1e-12)
            max_rel_err = max(max_rel_err, float(np.abs(got - want).max() / scale))
    if not losses:
        raise ValueError(f"{args.csv} has no data rows")
    print(f"rows: {len(losses)}")
    print(f"mean_loss = {np.mean(losses):.6f}")
    if not args.sum_of_sigmoids:
        print(f"max_grad_rel_err = {max_rel_err:.3e}")
    return 0


def _prep_group(key, rows, frames_dir: Path, out_dir: Path, label_map, args):
    """Filter one person-keyframe; returns (filename, label) or an error string."""
    video_id, timestamp, person_id = key
    frame_path = frames_dir / f"{video_id}_{timestamp}.png"
    pose_ids, hh_ids, ho_ids = [], [], []
    for r in rows:
        entry = label_map.get(r.action_id)
        if entry is None:
            return None, f"unknown action_id {r.action_id}"
        kind = entry[1]
        (pose_ids if kind == "pose" else hh_ids if kind == "human-human" else ho_ids).append(
            r.action_id
        )
    if len(pose_ids) != 1:
        return None, f"expected exactly 1 pose label, got {len(pose_ids)}"
    if len(hh_ids) > 3 or len(ho_ids) > 3:
        return None, f"too many interaction labels ({len(hh_ids)} hh, {len(ho_ids)} ho)"
    try:
        image = imgcore.read_image(frame_path)
        first = rows[0]
        box = imgcore.denormalize_box(
            first.x1, first.y1, first.x2, first.y2, image.width, image.height
        )
        filtered = _frame_filter(args, box)(image)
        filename = f"{video_id}_{timestamp}_{person_id}.png"
        imgcore.write_image(filtered, out_dir / filename)
    except (OSError, ValueError) as exc:
        return None, str(exc)
    label = (
        f"{pose_ids[0]};"
        f"{'|'.join(str(i) for i in sorted(hh_ids))};"
        f"{'|'.join(str(i) for i in sorted(ho_ids))}"
    )
    return (filename, label), None


def _cmd_prep(args) -> int:
    records = avadata.parse_annotations(args.annotations)
    label_map = avadata.parse_label_map(args.label_map)
    frames_dir = Path(args.frames)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    groups: dict[tuple, list] = defaultdict(list)
    for record in records:
        groups[record.sample_key].append(record)
    keys = sorted(groups)

    def work(key):
        return key, _prep_group(key, groups[key], frames_dir, out_dir, label_map, args)

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(work, keys))
    else:
        results = [work(key) for key in keys]

    manifest_rows = []
    errors = 0
    for key, (produced, problem) in results:
        if problem is not None:
            errors += 1
            print(f"prep: {key[0]}_{key[1]}_{key[2]}: {problem}", file=sys.stderr)
            continue
        filename, label = produced
        manifest_rows.append([filename, key[0], key[1], key[2], label])

    manifest_rows.sort(key=lambda row: row[0])
    with open(out_dir / "manifest.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["file", "video_id", "timestamp", "person_id", "label"])
        writer.writerows(manifest_rows)
    print(
        f"prep: {len(manifest_rows)} written, {errors} errors "
        f"({len(keys)} person-keyframes from {len(records)} rows)",
        file=sys.stderr,
    )
    return 0


def _throughput(fn, frames: int) -> float:
    for _ in range(3):
        fn()
    start = time.perf_counter()
    for _ in range(frames):
        fn()
    return frames / (time.perf_counter() - start)


def _cmd_bench(args) -> int:
    rng = np.random.default_rng(7)
    image = imgcore.Image(rng.random((args.size, args.size, 3), dtype=np.float32))
    box = imgcore.BoundingBox(args.size // 4, args.size // 4, args.size // 2, args.size // 2)
    params = filters.FoveaParams(box=box, sigma1=args.sigma1, levels=args.levels)

    fovea_fps = _throughput(lambda: filters.apply_fovea(image, params), args.frames)
    print(
        f"fovea: {args.size}x{args.size}x3 levels={args.levels} -> "
        f"{fovea_fps:.1f} fps (target {FOVEA_FPS_TARGET:.0f})"
    )
    if fovea_fps < FOVEA_FPS_TARGET:
        print(f"WARNING: fovea {fovea_fps:.1f} fps below target {FOVEA_FPS_TARGET:.0f}")

    gbb_fps = _throughput(lambda: filters.apply_gbb(image, box, args.gbb_sigma), args.frames)
    print(
        f"gbb: {args.size}x{args.size}x3 sigma={args.gbb_sigma} -> "
        f"{gbb_fps:.1f} fps (target {GBB_FPS_TARGET:.0f})"
    )
    if gbb_fps < GBB_FPS_TARGET:
        print(f"WARNING: gbb {gbb_fps:.1f} fps below target {GBB_FPS_TARGET:.0f}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="fovealprep", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("filter", help="apply one attention filter to an image or flow frame")
    p.add_argument("--mode", required=True, choices=("crop", "gbb", "fovea"))
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--box", help="pixel box as x,y,w,h")
    group.add_argument("--boxes", help="CSV of pixel boxes, one x,y,w,h row per output")
    p.add_argument("--sigma1", type=float, default=filters.DEFAULT_FOVEA_SIGMA1)
    p.add_argument("--levels", type=int, default=filters.DEFAULT_FOVEA_LEVELS)
    p.add_argument("--sigma", type=float, default=filters.DEFAULT_GBB_SIGMA)
    p.set_defaults(func=_cmd_filter)

    p = sub.add_parser("pyramid-dump", help="write every stack level and band as PNG")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--sigma1", type=float, default=filters.DEFAULT_FOVEA_SIGMA1)
    p.add_argument("--levels", type=int, default=filters.DEFAULT_FOVEA_LEVELS)
    p.set_defaults(func=_cmd_pyramid_dump)

    p = sub.add_parser("vote", help="fuse per-frame scores into segment predictions")
    p.add_argument("--scores", required=True,
                   help="CSV of segment_id,frame_idx,head,class,score")
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--threshold", type=float, default=voting.DEFAULT_VOTE_THRESHOLD)
    p.add_argument("--pose-classes", type=int, default=10)
    p.add_argument("--hh-classes", type=int, default=8)
    p.add_argument("--ho-classes", type=int, default=12)
    p.add_argument("--single-label", action="store_true")
    p.add_argument("--classes", type=int, default=24,
                   help="class count in --single-label mode")
    p.set_defaults(func=_cmd_vote)

    p = sub.add_parser("partition", help="build temporally contiguous train/test splits")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--target", type=int, default=avadata.DEFAULT_TARGET_SIZE)
    p.add_argument("--min-test", type=int, default=avadata.DEFAULT_MIN_TEST)
    p.add_argument("--test-fraction", type=float, default=None,
                   help="treat --target as a combined budget split by this fraction")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_partition)

    p = sub.add_parser("eval", help="per-class AP and mean AP at an IoU threshold")
    p.add_argument("--dets", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--eleven-point", action="store_true")
    p.add_argument("--report", help="also write a JSON report here")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("loss-check", help="loss values and analytic-vs-numeric gradient check")
    p.add_argument("--csv", required=True)
    p.add_argument("--pose", type=int, default=10)
    p.add_argument("--hh", type=int, default=8)
    p.add_argument("--ho", type=int, default=12)
    p.add_argument("--sum-of-sigmoids", action="store_true",
                   help="score rows with the flat sum-of-sigmoids baseline instead")
    p.set_defaults(func=_cmd_loss_check)

    p = sub.add_parser("prep", help="filter one output per annotated person-keyframe")
    p.add_argument("--annotations", required=True)
    p.add_argument("--frames", required=True, help="directory of <video>_<timestamp>.png")
    p.add_argument("--label-map", required=True, help="CSV of id,name,type")
    p.add_argument("--mode", required=True, choices=("crop", "gbb", "fovea"))
    p.add_argument("--out", required=True)
    p.add_argument("--sigma1", type=float, default=filters.DEFAULT_FOVEA_SIGMA1)
    p.add_argument("--levels", type=int, default=filters.DEFAULT_FOVEA_LEVELS)
    p.add_argument("--sigma", type=float, default=filters.DEFAULT_GBB_SIGMA)
    p.add_argument("--jobs", type=int, default=_env_jobs(),
                   help="worker threads (default from FOVEAL_PREP_JOBS)")
    p.set_defaults(func=_cmd_prep)

    p = sub.add_parser("bench", help="measure filter throughput against the fps targets")
    p.add_argument("--size", type=int, default=224)
    p.add_argument("--frames", type=int, default=120)
    p.add_argument("--levels", type=int, default=filters.DEFAULT_FOVEA_LEVELS)
    p.add_argument("--sigma1", type=float, default=filters.DEFAULT_FOVEA_SIGMA1)
    p.add_argument("--gbb-sigma", type=float, default=filters.DEFAULT_GBB_SIGMA)
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - user input must not produce tracebacks
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
