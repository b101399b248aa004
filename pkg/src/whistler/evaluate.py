"""Scoring detection reports against labels, and processing-time ratios.

A label is a true positive when its 5 kHz arrival time lies inside at least
one detection interval; each label counts once however many boxes cover it.
A detection covering no label time is a false positive.
"""

import csv
import io
import math
import os
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence

from .errors import InvalidArgument


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den else None


@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    fn: int

    @property
    def misdetection(self) -> Optional[float]:
        return _ratio(self.fn, self.tp + self.fn)

    @property
    def false_alarm(self) -> Optional[float]:
        return _ratio(self.fp, self.tp + self.fp)

    @property
    def f1(self) -> Optional[float]:
        return _ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn)

    def __add__(self, other: "Metrics") -> "Metrics":
        return Metrics(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    def to_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "misdetection": self.misdetection,
            "false_alarm": self.false_alarm,
            "f1": self.f1,
        }

    CSV_FIELDS = ("tp", "fp", "fn", "misdetection", "false_alarm", "f1")

    def csv_row(self, label: str = "") -> str:
        buf = io.StringIO()
        row = self.to_dict()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([label] + ["" if row[k] is None else row[k] for k in self.CSV_FIELDS])
        return buf.getvalue()


def _interval(det):
    if isinstance(det, dict):
        return det["t_start_s"], det["t_end_s"]
    return det.t_start, det.t_end


def _ref_time(label):
    if isinstance(label, dict):
        return label["t5khz_s"]
    return getattr(label, "t_5khz", label)


def match(report, labels: Sequence) -> Metrics:
    """Score one file.

    ``report`` is a :class:`DetectionReport`, its dict form, or a plain
    list of detections; ``labels`` are :class:`SceneLabel` objects, their
    dicts, or bare reference times.
    """
    if isinstance(report, dict):
        detections = report["detections"]
    else:
        detections = getattr(report, "detections", report)
    intervals = [_interval(d) for d in detections]
    times = [_ref_time(lab) for lab in labels]
    tp = sum(1 for t in times if any(a <= t <= b for a, b in intervals))
    fp = sum(1 for a, b in intervals if not any(a <= t <= b for t in times))
    return Metrics(tp, fp, len(times) - tp)


def match_batch(reports: Iterable, labels_by_file: Dict[str, Sequence]) -> Dict[str, Metrics]:
    """Per-file metrics, keyed by report file basename.

    Every report must have labels; a labelled file with no report is scored
    as all misses.
    """
    out: Dict[str, Metrics] = {}
    for rep in reports:
        name = rep["file"] if isinstance(rep, dict) else rep.source_file
        key = os.path.basename(name)
        if key not in labels_by_file:
            raise InvalidArgument(f"no labels for report file {name!r}")
        out[key] = match(rep, labels_by_file[key])
    for key, labels in labels_by_file.items():
        out.setdefault(key, Metrics(0, 0, len(labels)))
    return out


def aggregate(per_file: Iterable[Metrics]) -> Metrics:
    total = Metrics(0, 0, 0)
    for m in per_file:
        total = total + m
    return total


@dataclass(frozen=True)
class TimingReport:
    ratios: List[float]
    files: List[str]

    @property
    def mean_r(self) -> float:
        return sum(self.ratios) / len(self.ratios)

    @property
    def real_time(self) -> bool:
        return self.mean_r <= 1.0

    def to_dict(self) -> dict:
        return {
            "files": [{"file": f, "r": r} for f, r in zip(self.files, self.ratios)],
            "mean_r": self.mean_r,
            "real_time": self.real_time,
        }


def processing_ratio(processing_time: float, sample_duration: float) -> float:
    if not sample_duration > 0 or not math.isfinite(sample_duration):
        raise InvalidArgument(f"sample duration must be positive, got {sample_duration}")
    if not processing_time > 0:
        raise InvalidArgument(f"processing time must be positive, got {processing_time}")
    return processing_time / sample_duration


def timing(batch: Sequence) -> TimingReport:
    if not batch:
        raise InvalidArgument("empty batch")
    ratios, files = [], []
    for rep in batch:
        if isinstance(rep, dict):
            p, d, f = rep.get("processing_s"), rep.get("sample_duration_s"), rep.get("file", "")
        else:
            p, d, f = rep.processing_time, rep.sample_duration, rep.source_file
        if p is None or d is None:
            raise InvalidArgument(f"{f}: report has no timing fields")
        ratios.append(processing_ratio(p, d))
        files.append(f)
    return TimingReport(ratios, files)
