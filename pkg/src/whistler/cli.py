"""Command-line entry point: ``whistler simulate | detect | eval | bench``.

Settings may come from a TOML file (``--config``) with ``[simulate]``,
``[detect]`` and ``[bench]`` tables; command-line flags override it.
Exit status is 0 on success, 1 on a runtime error and 2 on a usage error.
"""

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import evaluate
from .detect import CfarConfig, write_decisions_csv
from .dispersion import write_kernel_csv
from .errors import InvalidArgument, StageError, WhistlerError
from .formats import (
    channel_index,
    load_timeseries,
    read_labels_json,
    read_reports,
    read_vlfr,
    save_timeseries,
    scene_filename,
    write_labels_json,
    write_report_line,
)
from .pipeline import DEFAULT_GRID, LINKAGES, CcswDetector, DetectionReport, DetectorConfig
from .preprocess import TransformKind
from .scenegen import ScenePlan, generate_scene

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

DUMP_STAGES = ("kernel", "correlation", "cfar")


class UsageError(Exception):
    pass


def _floats(text):
    try:
        return tuple(float(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _load_config(path, section):
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"{path}: {exc}") from None
    table = doc.get(section, {})
    if not isinstance(table, dict):
        raise UsageError(f"{path}: [{section}] must be a table")
    return table


def _pick(args, conf, name, default=None):
    value = getattr(args, name, None)
    if value is not None:
        return value
    return conf.get(name, default)


def default_workers():
    env = os.environ.get("WHISTLER_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise UsageError(f"WHISTLER_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise UsageError("WHISTLER_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


# -- simulate -------------------------------------------------------------------


def cmd_simulate(args):
    conf = _load_config(args.config, "simulate")
    count = int(_pick(args, conf, "count", 1))
    seed = int(_pick(args, conf, "seed", 0))
    if count < 1:
        raise UsageError("--count must be >= 1")
    noise = dict(conf.get("noise", {}))
    if args.noise_only or conf.get("noise_only", False):
        n_whistlers = (0, 0)
    else:
        n_whistlers = tuple(int(v) for v in _pick(args, conf, "whistlers", (1, 5)))
    try:
        plan = ScenePlan(
            duration=float(_pick(args, conf, "duration", 6.0)),
            fs=float(_pick(args, conf, "fs", 40e3)),
            n_whistlers=n_whistlers,
            d0_choices=tuple(float(v) for v in _pick(args, conf, "d0", (35.0, 80.0))),
            snr_db=float(_pick(args, conf, "snr", 10.0)),
            noise=noise,
        )
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        scenes = []
        for i in range(count):
            ts, labels = generate_scene(plan.scene(seed + i))
            name = scene_filename(seed + i)
            save_timeseries(out / name, ts)
            scenes.append((name, labels))
    except TypeError as exc:
        raise UsageError(f"invalid scene settings: {exc}") from None
    write_labels_json(out / args.labels, scenes)
    print(f"wrote {count} scene(s) and {args.labels} to {out}", file=sys.stderr)
    return 0


# -- detect -----------------------------------------------------------------------


def detector_config(args, conf):
    try:
        cfar = _pick(args, conf, "cfar")
        cfar = CfarConfig.parse(cfar) if isinstance(cfar, str) else CfarConfig(*(cfar or ()))
        d0 = _pick(args, conf, "d0", DEFAULT_GRID)
        grid = _pick(args, conf, "grid_d0", DEFAULT_GRID)
        return DetectorConfig(
            transform=TransformKind.parse(_pick(args, conf, "preprocess", "zscore")).value,
            cfar=cfar,
            detect_d0=tuple(float(v) for v in d0),
            grid_d0=tuple(float(v) for v in grid),
            resolution=float(_pick(args, conf, "stride_resolution", 0.1)),
            linkage=_pick(args, conf, "linkage", "gap"),
        )
    except (InvalidArgument, TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def run_digest(cfg, channel):
    text = json.dumps({"detector": cfg.canonical(), "channel": str(channel)}, sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _dump(analysis, detector, path, dump_dir, stages):
    stem = Path(path).stem
    dump_dir.mkdir(parents=True, exist_ok=True)
    if "kernel" in stages:
        for kernel in detector.kernels(analysis.cropped)[0]:
            with open(dump_dir / f"{stem}.kernel.d0_{kernel.d0:g}.csv", "w") as fh:
                write_kernel_csv(kernel, fh)
    if "correlation" in stages:
        for d0, series in analysis.series.items():
            with open(dump_dir / f"{stem}.correlation.d0_{d0:g}.csv", "w") as fh:
                fh.write("t_s,value_db\n")
                for t, v in zip(series.times(), series.values_db):
                    fh.write(f"{t:.6f},{v:.6f}\n")
    if "cfar" in stages:
        for d0, run in analysis.cfar.items():
            for name in ("ca", "os", "tm", "lf"):
                with open(dump_dir / f"{stem}.cfar_{name}.d0_{d0:g}.csv", "w") as fh:
                    write_decisions_csv(analysis.series[d0], getattr(run, name), fh)


def _detect_one(job):
    path, cfg, channel, dump_dir, stages = job
    try:
        fs, data = read_vlfr(path)
        idx = channel_index(channel, data.shape[0])
        if data.shape[1] < cfg.nfft:
            # a readable file too short to analyse fails where samples are first needed
            msg = f"series of {data.shape[1]} samples is shorter than nfft={cfg.nfft}"
            return None, {"file": str(path), "stage": "stft", "error": msg}
        ts = load_timeseries(path, idx)
        detector = CcswDetector(cfg)
        start = time.perf_counter()
        analysis = detector.analyse(ts)
        elapsed = time.perf_counter() - start
        if stages:
            _dump(analysis, detector, path, Path(dump_dir), stages)
        report = DetectionReport(
            str(path), analysis.detections, run_digest(cfg, channel), elapsed, ts.duration
        )
        return report, None
    except StageError as exc:
        return None, {"file": str(path), "stage": exc.stage, "error": str(exc.cause)}
    except (WhistlerError, OSError, ValueError) as exc:
        return None, {"file": str(path), "stage": "load", "error": str(exc)}


def _map(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


def _stages(args, conf):
    stages = _pick(args, conf, "dump_stage") or []
    if isinstance(stages, str):
        stages = [stages]
    stages = [s for item in stages for s in str(item).split(",") if s]
    bad = sorted(set(stages) - set(DUMP_STAGES))
    if bad:
        raise UsageError(f"unknown dump stage(s) {bad}; choose from {list(DUMP_STAGES)}")
    return tuple(stages)


def cmd_detect(args):
    conf = _load_config(args.config, "detect")
    cfg = detector_config(args, conf)
    channel = _pick(args, conf, "channel", "0")
    stages = _stages(args, conf)
    dump_dir = _pick(args, conf, "dump_dir", "dumps")
    workers = args.workers or default_workers()
    jobs = [(p, cfg, channel, dump_dir, stages) for p in args.inputs]
    results = _map(_detect_one, jobs, workers)
    failed = 0
    out = open(args.output, "w") if args.output != "-" else sys.stdout
    try:
        for report, err in results:
            if err is not None:
                failed += 1
                print(f"{err['file']}: [{err['stage']}] {err['error']}", file=sys.stderr)
                out.write(json.dumps(err) + "\n")
            else:
                write_report_line(out, report, include_timing=not args.no_timing)
    finally:
        if out is not sys.stdout:
            out.close()
    return 1 if failed else 0


# -- eval -------------------------------------------------------------------------


def cmd_eval(args):
    reports = [r for r in read_reports(args.reports) if "error" not in r]
    if not reports:
        raise WhistlerError(f"{args.reports}: no detection reports")
    labels = read_labels_json(args.labels)
    if args.reports_only:
        names = {os.path.basename(r["file"]) for r in reports}
        labels = {k: v for k, v in labels.items() if k in names}
    per_file = evaluate.match_batch(reports, labels)
    total = evaluate.aggregate(per_file.values())
    if args.csv:
        sys.stdout.write(total.csv_row(args.csv_label))
    else:
        doc = {"metrics": total.to_dict(), "files": len(per_file)}
        if args.per_file:
            doc["per_file"] = {k: m.to_dict() for k, m in sorted(per_file.items())}
        print(json.dumps(doc, indent=1))
    return 0


# -- bench ------------------------------------------------------------------------


def _bench_one(job):
    path, cfg, channel, repeats = job
    ts = load_timeseries(path, channel)
    detector = CcswDetector(cfg)
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        detector.analyse(ts)
        best = min(best, time.perf_counter() - start)
    return DetectionReport(str(path), [], run_digest(cfg, channel), best, ts.duration)


def cmd_bench(args):
    conf = _load_config(args.config, "bench")
    cfg = detector_config(args, conf)
    channel = _pick(args, conf, "channel", "0")
    repeats = int(_pick(args, conf, "repeats", 3))
    if repeats < 3:
        raise UsageError("--repeats must be >= 3")
    jobs = [(p, cfg, channel, repeats) for p in args.inputs]
    reports = _map(_bench_one, jobs, args.workers or 1)
    report = evaluate.timing(reports)
    doc = report.to_dict()
    doc["repeats"] = repeats
    from ._backend import BACKEND

    doc["backend"] = BACKEND
    print(json.dumps(doc, indent=1))
    return 0


# -- parser -----------------------------------------------------------------------


def _detector_flags(p):
    p.add_argument("--config", help="TOML file with default settings")
    p.add_argument("--preprocess", choices=[k.value for k in TransformKind], help="row transform (default zscore)")
    p.add_argument("--d0", type=_floats, help="detection kernel D0 values, comma-separated")
    p.add_argument("--grid-d0", dest="grid_d0", type=_floats, help="duration-estimate D0 grid")
    p.add_argument("--cfar", help="N,G,X_dB,k,Ts,Tl (default 12,10,0.5,13,5,3)")
    p.add_argument("--stride-resolution", dest="stride_resolution", type=float, help="grouping resolution, s")
    p.add_argument("--linkage", choices=LINKAGES, help="grouping rule (default gap)")
    p.add_argument("--channel", help="channel name (NS, EW) or index")
    p.add_argument("--workers", type=int, help="parallel worker processes")


def build_parser():
    parser = argparse.ArgumentParser(prog="whistler", description="Whistler detection in VLF recordings.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write synthetic VLFR1 scenes and a label file")
    p.add_argument("out_dir")
    p.add_argument("--config")
    p.add_argument("--count", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--duration", type=float)
    p.add_argument("--fs", type=float)
    p.add_argument("--snr", type=float, help="nominal whistler SNR, dB")
    p.add_argument("--d0", type=_floats, help="D0 values to draw from")
    p.add_argument("--whistlers", type=lambda s: tuple(int(v) for v in s.split(",")), help="min,max per scene")
    p.add_argument("--noise-only", action="store_true")
    p.add_argument("--labels", default="labels.json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("detect", help="run the detector, one JSON line per file")
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--output", default="-")
    _detector_flags(p)
    p.add_argument("--dump-stage", dest="dump_stage", action="append", help=f"one of {', '.join(DUMP_STAGES)}")
    p.add_argument("--dump-dir", dest="dump_dir")
    p.add_argument("--no-timing", action="store_true", help="omit processing_s")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="score detection reports against labels")
    p.add_argument("reports")
    p.add_argument("labels")
    p.add_argument("--per-file", action="store_true")
    p.add_argument("--reports-only", action="store_true", help="ignore labelled files without a report")
    p.add_argument("--csv", action="store_true", help="print one CSV row instead of JSON")
    p.add_argument("--csv-label", default="")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="processing-time ratio per file")
    p.add_argument("inputs", nargs="+")
    _detector_flags(p)
    p.add_argument("--repeats", type=int)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "workers", None) is not None and args.workers < 1:
        parser.error("--workers must be >= 1")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (WhistlerError, OSError, ValueError) as exc:
        print(f"whistler: error: {exc}", file=sys.stderr)
        return 1
