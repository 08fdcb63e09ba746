"""Mobility traces in the external-movement text format.

A file starts with a six-number header ``minTime maxTime minX maxX minY maxY``
followed by one ``time id x y`` tuple per line. Blank lines and lines
starting with ``#`` are ignored.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass
from datetime import date, datetime, timezone
from typing import Iterable, Optional, Sequence, TextIO, Union

import numpy as np

from .errors import (
    DegenerateGeoBounds,
    EmptyAfterFilter,
    EmptyTrace,
    InvalidRange,
    MalformedHeader,
    MalformedSample,
    TimeRegression,
)

COMMENT_PREFIX = "#"


@dataclass(frozen=True)
class TraceSample:
    time: float
    node_id: str
    x: float
    y: float

    def __post_init__(self):
        if not self.node_id or any(c.isspace() for c in self.node_id):
            raise MalformedSample(f"invalid node id {self.node_id!r}")


@dataclass(frozen=True)
class TraceBounds:
    min_time: float
    max_time: float
    min_x: float
    max_x: float
    min_y: float
    max_y: float

    def __post_init__(self):
        if not (self.min_time <= self.max_time and self.min_x <= self.max_x
                and self.min_y <= self.max_y):
            raise MalformedHeader(f"inverted bounds {self.as_tuple()}")

    def as_tuple(self):
        return (self.min_time, self.max_time, self.min_x, self.max_x,
                self.min_y, self.max_y)

    @classmethod
    def of(cls, samples: Sequence[TraceSample]) -> "TraceBounds":
        """Component-wise extremes of ``samples``."""
        if not samples:
            raise EmptyTrace("cannot compute bounds of an empty trace")
        ts = [s.time for s in samples]
        xs = [s.x for s in samples]
        ys = [s.y for s in samples]
        return cls(min(ts), max(ts), min(xs), max(xs), min(ys), max(ys))


@dataclass(frozen=True)
class GeoBounds:
    min_lat: float
    max_lat: float
    min_lon: float
    max_lon: float

    @classmethod
    def of(cls, fixes: Sequence["GeoFix"]) -> "GeoBounds":
        lats = [f.latitude for f in fixes]
        lons = [f.longitude for f in fixes]
        return cls(min(lats), max(lats), min(lons), max(lons))


@dataclass(frozen=True)
class GeoFix:
    taxi_id: str
    latitude: float
    longitude: float
    unix_time: float
    occupancy: Optional[bool] = None

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise InvalidRange(f"latitude {self.latitude} outside [-90, 90]")
        if not -180.0 <= self.longitude <= 180.0:
            raise InvalidRange(f"longitude {self.longitude} outside [-180, 180]")


def format_number(value: float) -> str:
    """Shortest plain-decimal text that parses back to exactly ``value``."""
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"cannot write non-finite value {value}")
    if value == 0.0:
        value = 0.0  # drop the sign of -0.0
    return np.format_float_positional(value, unique=True, trim="-")


def _float_tokens(tokens, exc, lineno, what):
    try:
        return [float(t) for t in tokens]
    except ValueError:
        raise exc(f"non-numeric {what}: {' '.join(tokens)!r}", line=lineno) from None


def parse_external_trace(source: Union[str, TextIO]):
    """Parse an external-movement file.

    Parameters
    ----------
    source : str or text stream
        The whole file content, or an open text stream.

    Returns
    -------
    bounds : TraceBounds
        The header as written in the file.
    samples : list of TraceSample
        Every data line in file order.
    """
    if isinstance(source, str):
        source = io.StringIO(source)

    bounds = None
    samples = []
    last_time = -math.inf
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith(COMMENT_PREFIX):
            continue
        tokens = line.split()
        if bounds is None:
            if len(tokens) != 6:
                raise MalformedHeader(
                    f"expected 6 header values, found {len(tokens)}", line=lineno)
            values = _float_tokens(tokens, MalformedHeader, lineno, "header")
            try:
                bounds = TraceBounds(*values)
            except MalformedHeader as exc:
                raise MalformedHeader(str(exc), line=lineno) from None
            continue
        if len(tokens) != 4:
            raise MalformedSample(
                f"expected 'time id x y', found {len(tokens)} tokens", line=lineno)
        t, x, y = _float_tokens([tokens[0], tokens[2], tokens[3]],
                                MalformedSample, lineno, "sample")
        if not all(map(math.isfinite, (t, x, y))):
            raise MalformedSample("non-finite value", line=lineno)
        if t < last_time:
            raise TimeRegression(
                f"time {tokens[0]} earlier than previous sample", line=lineno)
        last_time = t
        samples.append(TraceSample(t, tokens[1], x, y))

    if bounds is None:
        raise MalformedHeader("missing header line")
    return bounds, samples


def write_external_trace(samples: Sequence[TraceSample],
                         out: Optional[TextIO] = None) -> str:
    """Render samples with a header holding their exact extremes.

    Samples are written in the order given, which must be non-decreasing in
    time. Returns the text; also writes it to ``out`` when provided.
    """
    if not samples:
        raise EmptyTrace("refusing to write an empty trace")
    for i in range(1, len(samples)):
        if samples[i].time < samples[i - 1].time:
            raise TimeRegression(f"sample {i} goes back in time")
    bounds = TraceBounds.of(samples)
    lines = [" ".join(format_number(v) for v in bounds.as_tuple())]
    for s in samples:
        lines.append(f"{format_number(s.time)} {s.node_id} "
                     f"{format_number(s.x)} {format_number(s.y)}")
    text = "\n".join(lines) + "\n"
    if out is not None:
        out.write(text)
    return text


def read_trace_file(path: Union[str, os.PathLike]):
    with open(path, "r", encoding="ascii", newline="") as fh:
        return parse_external_trace(fh)


def write_trace_file(path: Union[str, os.PathLike], samples: Sequence[TraceSample]):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        write_external_trace(samples, fh)


def project_linear(lat: float, lon: float, geo: GeoBounds,
                   world_w: float, world_h: float):
    """Map a lat/lon pair onto the ``world_w`` x ``world_h`` rectangle.

    Plain proportional scaling of each coordinate; only sensible for small
    regions since the earth's curvature is ignored.
    """
    if not (geo.max_lat > geo.min_lat and geo.max_lon > geo.min_lon):
        raise DegenerateGeoBounds(f"geo box has zero extent: {geo}")
    if not (world_w > 0 and world_h > 0):
        raise DegenerateGeoBounds("world dimensions must be positive")
    x = (lon - geo.min_lon) / (geo.max_lon - geo.min_lon) * world_w
    y = (lat - geo.min_lat) / (geo.max_lat - geo.min_lat) * world_h
    return x, y


def _fix_date(unix_time: float, tz) -> date:
    return datetime.fromtimestamp(unix_time, tz=tz).date()


def convert_taxi_dataset(fixes: Iterable[GeoFix], day: date, geo: GeoBounds,
                         world_w: float, world_h: float, seed: int,
                         tz=timezone.utc) -> list:
    """Turn raw taxi GPS fixes into a simulator trace for one calendar day.

    Taxi ids become dense integers in lexicographic order of the raw ids.
    Nodes that first appear after the earliest retained fix get a synthetic
    sample at that earliest time, at a random position distinct from every
    other synthetic start.
    """
    fixes = list(fixes)
    codes = {raw: str(i) for i, raw in enumerate(sorted({f.taxi_id for f in fixes}))}

    kept = [f for f in fixes if _fix_date(f.unix_time, tz) == day]
    if not kept:
        raise EmptyAfterFilter(f"no fixes fall on {day.isoformat()}")
    kept.sort(key=lambda f: f.unix_time)  # stable: ties keep input order

    samples = []
    for f in kept:
        x, y = project_linear(f.latitude, f.longitude, geo, world_w, world_h)
        samples.append(TraceSample(float(f.unix_time), codes[f.taxi_id], x, y))

    t0 = samples[0].time
    first_seen = {}
    for s in samples:
        first_seen.setdefault(s.node_id, s.time)
    late = sorted((n for n, t in first_seen.items() if t > t0), key=int)

    rng = np.random.default_rng(seed)
    taken = set()
    starts = []
    for node in late:
        while True:
            pos = (float(rng.uniform(0, world_w)), float(rng.uniform(0, world_h)))
            if pos not in taken:
                break
        taken.add(pos)
        starts.append(TraceSample(t0, node, *pos))
    return starts + samples


def read_geofix_csv(path, taxi_id="taxi_id", latitude="latitude",
                    longitude="longitude", unix_time="unix_time",
                    occupancy: Optional[str] = "occupancy") -> list:
    """Read fixes from a CSV file with a header row.

    Keyword arguments name the columns holding each field, so files with a
    different layout can be read without reshaping them first.
    """
    fixes = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            occ = None
            if occupancy and row.get(occupancy) not in (None, ""):
                occ = bool(int(float(row[occupancy])))
            fixes.append(GeoFix(row[taxi_id].strip(), float(row[latitude]),
                                float(row[longitude]), float(row[unix_time]), occ))
    return fixes


def read_cabspotting_dir(directory) -> list:
    """Read a directory of per-cab files ``new_<id>.txt``.

    Each line holds ``latitude longitude occupancy unix_time``; the cab id is
    taken from the file name.
    """
    fixes = []
    for name in sorted(os.listdir(directory)):
        if not name.endswith(".txt") or name.startswith("_"):
            continue
        cab = name[:-4]
        if cab.startswith("new_"):
            cab = cab[4:]
        with open(os.path.join(directory, name)) as fh:
            for line in fh:
                parts = line.split()
                if len(parts) != 4:
                    continue
                lat, lon, occ, t = parts
                fixes.append(GeoFix(cab, float(lat), float(lon), float(t),
                                    bool(int(occ))))
    return fixes


def generate_synthetic_trace(n_nodes: int, duration: float, world_w: float,
                             world_h: float, speed=(0.5, 1.5), pause=(0.0, 60.0),
                             sample_period: float = 1.0, seed: int = 0) -> list:
    """Random-waypoint walks sampled every ``sample_period`` seconds.

    Each node starts uniformly in the world, picks a uniform destination and
    a speed from ``speed``, walks there in a straight line, pauses for a time
    drawn from ``pause`` and repeats. Output is time-major, node ids ``0`` to
    ``n_nodes - 1``.
    """
    if n_nodes < 1:
        raise InvalidRange("need at least one node")
    if not duration > 0 or not sample_period > 0:
        raise InvalidRange("duration and sample_period must be positive")
    if not (world_w > 0 and world_h > 0):
        raise InvalidRange("world dimensions must be positive")
    for name, (lo, hi) in (("speed", speed), ("pause", pause)):
        if lo < 0 or hi < lo:
            raise InvalidRange(f"{name} range must satisfy 0 <= min <= max, got {lo, hi}")

    rng = np.random.default_rng(seed)
    n_ticks = int(math.floor(duration / sample_period + 1e-9)) + 1
    times = np.arange(n_ticks) * sample_period
    pos = np.empty((n_ticks, n_nodes, 2))

    for node in range(n_nodes):
        here = np.array([rng.uniform(0, world_w), rng.uniform(0, world_h)])
        t = 0.0
        legs = []  # (t_start, t_end, start, end); a pause has start == end
        while t <= duration:
            dest = np.array([rng.uniform(0, world_w), rng.uniform(0, world_h)])
            v = rng.uniform(*speed)
            if v <= 0:
                legs.append((t, math.inf, here, here))
                break
            travel = float(np.hypot(*(dest - here))) / v
            legs.append((t, t + travel, here, dest))
            t += travel
            wait = rng.uniform(*pause)
            legs.append((t, t + wait, dest, dest))
            t += wait
            here = dest
        k = 0
        for i, tt in enumerate(times):
            while legs[k][1] < tt and k + 1 < len(legs):
                k += 1
            t_a, t_b, a, b = legs[k]
            frac = 0.0 if not math.isfinite(t_b) or t_b <= t_a else min(1.0, (tt - t_a) / (t_b - t_a))
            pos[i, node] = a + frac * (b - a)

    np.clip(pos[..., 0], 0, world_w, out=pos[..., 0])
    np.clip(pos[..., 1], 0, world_h, out=pos[..., 1])
    ids = sorted((str(i) for i in range(n_nodes)))
    order = [int(i) for i in ids]
    return [TraceSample(float(times[i]), str(n), float(pos[i, n, 0]), float(pos[i, n, 1]))
            for i in range(n_ticks) for n in order]
