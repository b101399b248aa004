"""On-disk formats: VLFR1 raw signals, label sidecars, AWD text labels.

VLFR1 layout (little-endian)::

    offset  size  field
    0       4     magic b"VLFR"
    4       2     u16 version (1)
    6       4     u32 sample rate, Hz
    10      1     u8 channel count
    11      8     u64 samples per channel
    19      ...   f32 samples, channel-major
"""

import json
import os
import struct
from datetime import datetime
from typing import List, Sequence, Tuple

import numpy as np

from .errors import InvalidArgument
from .spectro import TimeSeries

MAGIC = b"VLFR"
VERSION = 1
_HEADER = struct.Struct("<4sHIBQ")
CHANNEL_NAMES = ("NS", "EW")


def write_vlfr(path, channels, fs: int) -> None:
    data = np.atleast_2d(np.asarray(channels, dtype="<f4"))
    n_ch, n_samples = data.shape
    if not 1 <= n_ch <= 255:
        raise InvalidArgument(f"channel count {n_ch} out of range")
    if int(fs) != fs or not 0 < fs < 2**32:
        raise InvalidArgument(f"sample rate must be a positive integer, got {fs}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, int(fs), n_ch, n_samples))
        fh.write(np.ascontiguousarray(data).tobytes())


def read_vlfr(path) -> Tuple[int, np.ndarray]:
    """Return ``(fs, samples[n_channels, n_samples])`` as float32."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise InvalidArgument(f"{path}: truncated VLFR1 header")
        magic, version, fs, n_ch, n_samples = _HEADER.unpack(header)
        if magic != MAGIC:
            raise InvalidArgument(f"{path}: not a VLFR file (magic {magic!r})")
        if version != VERSION:
            raise InvalidArgument(f"{path}: unsupported VLFR version {version}")
        expected = n_ch * n_samples * 4
        body = fh.read(expected)
    if len(body) != expected:
        raise InvalidArgument(f"{path}: expected {expected} data bytes, found {len(body)}")
    data = np.frombuffer(body, dtype="<f4").reshape(n_ch, n_samples)
    return fs, data


def channel_index(channel, n_channels: int) -> int:
    if isinstance(channel, str) and not channel.isdigit():
        names = CHANNEL_NAMES[:n_channels]
        if channel not in names:
            raise InvalidArgument(f"unknown channel {channel!r}, file has {list(names)}")
        return names.index(channel)
    idx = int(channel)
    if not 0 <= idx < n_channels:
        raise InvalidArgument(f"channel {idx} out of range for {n_channels} channel(s)")
    return idx


def load_timeseries(path, channel=0) -> TimeSeries:
    fs, data = read_vlfr(path)
    idx = channel_index(channel, data.shape[0])
    name = CHANNEL_NAMES[idx] if idx < len(CHANNEL_NAMES) else str(idx)
    return TimeSeries(data[idx], float(fs), name)


def save_timeseries(path, ts: TimeSeries) -> None:
    write_vlfr(path, ts.samples[np.newaxis, :], int(ts.fs))


# -- labels -------------------------------------------------------------------


def write_labels_json(path, scenes: Sequence[Tuple[str, Sequence]]) -> None:
    """``scenes`` is a sequence of ``(file, labels)`` pairs."""
    doc = {"scenes": [{"file": f, "labels": [lab.to_dict() for lab in labels]} for f, labels in scenes]}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=False)
        fh.write("\n")


def read_labels_json(path) -> dict:
    """Map file basename to its list of :class:`SceneLabel`."""
    from .scenegen import SceneLabel

    with open(path) as fh:
        doc = json.load(fh)
    try:
        scenes = doc["scenes"]
    except (KeyError, TypeError):
        raise InvalidArgument(f"{path}: missing 'scenes' array") from None
    return {
        os.path.basename(s["file"]): [SceneLabel.from_dict(d) for d in s["labels"]] for s in scenes
    }


def parse_awd_lines(lines, start: datetime, params=None) -> List:
    """Parse ``ISO8601:merit`` lines into labels relative to ``start``.

    Each timestamp is the whistler's 5 kHz arrival; the leading edge is
    back-projected with ``params`` (default dispersion if omitted).
    """
    from .dispersion import DispersionParams
    from .scenegen import label_from_5khz

    params = params or DispersionParams()
    labels = []
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        stamp, sep, merit = line.rpartition(":")
        try:
            when = datetime.fromisoformat(stamp)
            float(merit)
        except ValueError:
            raise InvalidArgument(f"line {lineno}: expected ISO8601:merit, got {line!r}") from None
        if not sep:
            raise InvalidArgument(f"line {lineno}: missing ':merit'")
        labels.append(label_from_5khz((when - start).total_seconds(), params, d0=None))
    return labels


# -- detection reports ----------------------------------------------------------


def write_report_line(fh, report, include_timing: bool = True) -> None:
    fh.write(json.dumps(report.to_dict(include_timing=include_timing)) + "\n")


def read_reports(path) -> List[dict]:
    """Read a JSON-lines report stream; a single JSON document is accepted too."""
    with open(path) as fh:
        text = fh.read()
    text = text.strip()
    if not text:
        return []
    if text.startswith("["):
        return json.loads(text)
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def scene_filename(index: int) -> str:
    return f"scene_{index:05d}.vlfr"
