"""Survey log parsing and ECa / pose stream synchronization."""

from __future__ import annotations

import bisect
import csv
import io
import json
import math
import re
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from typing import Iterable, Sequence, TextIO

from .geocore import GeoPoint, PlanarPoint, project_to_plane, unproject

ECA_MIN_MSM = 0.0
ECA_MAX_MSM = 1000.0
DEFAULT_MAX_GAP_S = 0.5

SURVEY_COLUMNS = ("timestamp", "lat", "lon", "eca_msm")
POSE_COLUMNS = ("timestamp", "lat", "lon", "heading_rad")


class SchemaError(ValueError):
    pass


class EmptySurveyError(ValueError):
    pass


class OrderingError(ValueError):
    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


class NoPoseError(ValueError):
    pass


class Source(str, Enum):
    HANDHELD = "handheld"
    ROBOT = "robot"
    SIMULATED = "simulated"


@dataclass(frozen=True)
class SurveyRecord:
    timestamp: float
    position: GeoPoint
    eca_msm: float
    source: Source = Source.HANDHELD

    def __post_init__(self):
        if not math.isfinite(self.timestamp):
            raise ValueError("timestamp must be finite")
        if not (ECA_MIN_MSM <= self.eca_msm <= ECA_MAX_MSM):
            raise ValueError(f"ECa {self.eca_msm} outside sensor range [0, 1000] mS/m")


@dataclass(frozen=True)
class Survey:
    records: tuple[SurveyRecord, ...]
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        for i in range(1, len(self.records)):
            if self.records[i].timestamp < self.records[i - 1].timestamp:
                raise OrderingError(i, "timestamps decrease")
        if len({r.source for r in self.records}) > 1:
            raise ValueError("survey mixes record sources")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def source(self) -> Source | None:
        return self.records[0].source if self.records else None

    @property
    def values(self) -> list[float]:
        return [r.eca_msm for r in self.records]

    def planar(self, datum: GeoPoint) -> list[PlanarPoint]:
        return [project_to_plane(datum, r.position) for r in self.records]

    def with_values(self, values: Sequence[float], **metadata: str) -> "Survey":
        if len(values) != len(self.records):
            raise ValueError("value count does not match record count")
        recs = [replace(r, eca_msm=float(v)) for r, v in zip(self.records, values)]
        return Survey(tuple(recs), {**self.metadata, **metadata})

    def subset(self, indices: Iterable[int]) -> "Survey":
        return Survey(tuple(self.records[i] for i in indices), dict(self.metadata))


@dataclass(frozen=True)
class PoseSample:
    timestamp: float
    position: GeoPoint
    heading_rad: float | None = None

    def __post_init__(self):
        if not math.isfinite(self.timestamp):
            raise ValueError("timestamp must be finite")
        if self.heading_rad is not None:
            object.__setattr__(self, "heading_rad", wrap_angle(self.heading_rad))


def wrap_angle(a: float) -> float:
    """Normalize to (-pi, pi]."""
    w = math.remainder(a, 2 * math.pi)
    return math.pi if w == -math.pi else w


@dataclass
class ParseSummary:
    rows_total: int = 0
    rows_ok: int = 0
    rows_rejected: list[int] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {"rows_total": self.rows_total, "rows_ok": self.rows_ok,
             "rows_rejected": self.rows_rejected},
            sort_keys=True,
        )


_FRACTION = re.compile(r"\.(\d+)")


def parse_timestamp(text: str) -> float:
    """Epoch seconds or ISO-8601 (naive times are taken as UTC)."""
    text = text.strip()
    try:
        t = float(text)
    except ValueError:
        # pad or trim the fraction to microseconds; fromisoformat is strict before 3.11
        iso = _FRACTION.sub(lambda m: "." + m.group(1)[:6].ljust(6, "0"),
                            text.replace("Z", "+00:00"))
        dt = datetime.fromisoformat(iso)
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        t = dt.timestamp()
    if not math.isfinite(t):
        raise ValueError("non-finite timestamp")
    return t


def _read_rows(stream: TextIO, required: Sequence[str]):
    metadata: dict[str, str] = {}
    body = []
    n_comments = 0
    for line in stream:
        if line.startswith("#"):
            n_comments += 1
            key, _, val = line[1:].partition(":")
            if key.strip():
                metadata[key.strip()] = val.strip()
        else:
            body.append(line)
    # line numbers count metadata lines so reports point into the file
    offset = n_comments
    reader = csv.reader(body)
    header = next(reader, None)
    if header is None:
        raise EmptySurveyError("file has no header")
    header = [h.strip() for h in header]
    missing = [c for c in required if c not in header]
    if missing:
        raise SchemaError(f"missing required column(s): {', '.join(missing)}")
    idx = {c: header.index(c) for c in header}
    rows = []
    for n, row in enumerate(reader, start=2 + offset):
        if not row or all(not c.strip() for c in row):
            continue
        rows.append((n, row))
    return metadata, idx, rows


def parse_survey_log(
    stream: TextIO | str,
    source: Source | str = Source.HANDHELD,
) -> tuple[Survey, ParseSummary]:
    """Parse a ``timestamp,lat,lon,eca_msm`` CSV log.

    Lines starting with ``#`` carry ``key: value`` metadata. Malformed rows
    are skipped and listed (by file line number) in the returned summary.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    source = Source(source)
    metadata, idx, rows = _read_rows(stream, SURVEY_COLUMNS)
    summary = ParseSummary(rows_total=len(rows))
    records: list[SurveyRecord] = []
    lines: list[int] = []
    for n, row in rows:
        try:
            rec = SurveyRecord(
                parse_timestamp(row[idx["timestamp"]]),
                GeoPoint(float(row[idx["lat"]]), float(row[idx["lon"]])),
                float(row[idx["eca_msm"]]),
                source,
            )
        except (ValueError, IndexError):
            summary.rows_rejected.append(n)
            continue
        records.append(rec)
        lines.append(n)
    summary.rows_ok = len(records)
    if not records:
        raise EmptySurveyError("survey log holds no valid records")
    for i in range(1, len(records)):
        if records[i].timestamp < records[i - 1].timestamp:
            raise OrderingError(lines[i], "timestamp earlier than previous row")
    return Survey(tuple(records), metadata), summary


def write_survey_csv(survey: Survey) -> str:
    """Serialize in the log schema; floats use repr so parsing round-trips exactly."""
    out = io.StringIO()
    for k in sorted(survey.metadata):
        out.write(f"# {k}: {survey.metadata[k]}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(SURVEY_COLUMNS)
    for r in survey.records:
        w.writerow([repr(r.timestamp), repr(r.position.latitude_deg),
                    repr(r.position.longitude_deg), repr(r.eca_msm)])
    return out.getvalue()


def parse_pose_log(stream: TextIO | str) -> list[PoseSample]:
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    _, idx, rows = _read_rows(stream, POSE_COLUMNS[:3])
    poses = []
    for n, row in rows:
        heading = None
        if "heading_rad" in idx and row[idx["heading_rad"]].strip():
            heading = float(row[idx["heading_rad"]])
        poses.append(PoseSample(parse_timestamp(row[idx["timestamp"]]),
                                GeoPoint(float(row[idx["lat"]]), float(row[idx["lon"]])),
                                heading))
        if len(poses) > 1 and poses[-1].timestamp < poses[-2].timestamp:
            raise OrderingError(n, "pose timestamp earlier than previous row")
    return poses


def write_pose_csv(poses: Sequence[PoseSample]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(POSE_COLUMNS)
    for p in poses:
        w.writerow([repr(p.timestamp), repr(p.position.latitude_deg),
                    repr(p.position.longitude_deg),
                    "" if p.heading_rad is None else repr(p.heading_rad)])
    return out.getvalue()


def sync_streams(
    eca: Sequence[tuple[float, float]],
    poses: Sequence[PoseSample],
    max_gap_s: float = DEFAULT_MAX_GAP_S,
    source: Source | str = Source.ROBOT,
    metadata: dict[str, str] | None = None,
) -> tuple[Survey, int]:
    """Attach a position to every ECa sample.

    A sample whose two bracketing poses both lie within ``max_gap_s`` gets a
    linearly interpolated position (in the local plane of the earlier pose);
    if only one neighbor is close enough it gets that pose's position;
    otherwise it is dropped.
    """
    if not poses:
        raise NoPoseError("pose stream is empty")
    if not max_gap_s > 0:
        raise ValueError("max_gap_s must be positive")
    source = Source(source)
    times = [p.timestamp for p in poses]
    records = []
    dropped = 0
    for t, value in eca:
        j = bisect.bisect_left(times, t)
        if j < len(times) and times[j] == t:
            records.append(SurveyRecord(t, poses[j].position, float(value), source))
            continue
        before = poses[j - 1] if j > 0 else None
        after = poses[j] if j < len(poses) else None
        ok_b = before is not None and t - before.timestamp <= max_gap_s
        ok_a = after is not None and after.timestamp - t <= max_gap_s
        if ok_b and ok_a:
            w = (t - before.timestamp) / (after.timestamp - before.timestamp)
            q = project_to_plane(before.position, after.position)
            pos = unproject(before.position, PlanarPoint(w * q.x_m, w * q.y_m))
        elif ok_b or ok_a:
            pos = before.position if ok_b else after.position
        else:
            dropped += 1
            continue
        records.append(SurveyRecord(t, pos, float(value), source))
    return Survey(tuple(records), dict(metadata or {})), dropped
