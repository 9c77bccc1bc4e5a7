"""Best-track intensity ingestion, corpus manipulation and delay embedding.

The corpus CSV has the header ``cyclone_id,basin,timestamp,wind_knots`` with
timestamps written as ``YYYY-MM-DDTHH:00Z``. Records are assumed to be
6-hourly, which is what lets a cyclone's lifetime be computed from its record
count alone.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Iterable, Sequence

import numpy as np

from transtack.errors import DegenerateRange, EmptyCorpus, ParseError, SeriesTooShort

SAMPLING_INTERVAL_HOURS = 6
CSV_HEADER = ("cyclone_id", "basin", "timestamp", "wind_knots")

# Lifetime classes (days), left-closed / right-open.
DURATION_CATEGORIES: dict[str, tuple[float, float]] = {
    "0-3": (0.0, 3.0),
    "3-5": (3.0, 5.0),
    "5-7": (5.0, 7.0),
    "7-9": (7.0, 9.0),
    "9-12": (9.0, 12.0),
    "12+": (12.0, math.inf),
}

_TIMESTAMP_RE = re.compile(r"^\d{4}-\d{2}-\d{2}T\d{2}:00Z$")
_DECIMAL_RE = re.compile(r"^\+?(\d+(\.\d*)?|\.\d+)$")


@dataclass(frozen=True)
class CycloneRecord:
    cyclone_id: str
    timestamp: datetime
    wind_intensity: float

    def __post_init__(self):
        if not (self.wind_intensity >= 0.0 and math.isfinite(self.wind_intensity)):
            raise ValueError(f"wind intensity must be a finite non-negative number, got {self.wind_intensity!r}")


@dataclass(frozen=True)
class CycloneTrack:
    """One cyclone's time-ordered intensity records."""

    cyclone_id: str
    basin: str
    records: tuple[CycloneRecord, ...]

    def __post_init__(self):
        if not self.records:
            raise ValueError(f"track {self.cyclone_id!r} has no records")
        for rec in self.records:
            if rec.cyclone_id != self.cyclone_id:
                raise ValueError(f"record for {rec.cyclone_id!r} placed in track {self.cyclone_id!r}")
        for a, b in zip(self.records, self.records[1:]):
            if not a.timestamp < b.timestamp:
                raise ValueError(f"track {self.cyclone_id!r} timestamps are not strictly increasing")

    @property
    def start(self) -> datetime:
        return self.records[0].timestamp

    @property
    def start_year(self) -> int:
        return self.records[0].timestamp.year

    @property
    def duration_days(self) -> float:
        return (len(self.records) - 1) * SAMPLING_INTERVAL_HOURS / 24.0

    @property
    def intensities(self) -> np.ndarray:
        return np.array([r.wind_intensity for r in self.records], dtype=float)

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class Corpus:
    basin: str
    tracks: tuple[CycloneTrack, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "tracks", tuple(self.tracks))
        seen = set()
        for track in self.tracks:
            if track.cyclone_id in seen:
                raise ValueError(f"duplicate cyclone_id {track.cyclone_id!r} in corpus")
            seen.add(track.cyclone_id)

    def __len__(self) -> int:
        return len(self.tracks)

    def __iter__(self):
        return iter(self.tracks)

    @property
    def record_count(self) -> int:
        return sum(len(t) for t in self.tracks)

    def ids(self) -> set[str]:
        return {t.cyclone_id for t in self.tracks}

    def _subset(self, tracks: Iterable[CycloneTrack]) -> "Corpus":
        return Corpus(self.basin, tuple(tracks))


@dataclass(frozen=True)
class NormalizationParams:
    min_value: float
    max_value: float

    def __post_init__(self):
        if not self.max_value > self.min_value:
            raise DegenerateRange(f"max ({self.max_value}) must exceed min ({self.min_value})")

    @property
    def span(self) -> float:
        return self.max_value - self.min_value


@dataclass(frozen=True)
class EmbeddedDataset:
    """Delay-embedded (window, next value) patterns.

    ``inputs[i]`` holds ``[y[t-T], y[t-2T], ..., y[t-D*T]]`` and
    ``targets[i]`` holds ``y[t]``.
    """

    embedding_dimension: int
    time_lag: int
    inputs: np.ndarray
    targets: np.ndarray = field(repr=False)

    def __post_init__(self):
        inputs = np.array(self.inputs, dtype=float).reshape(-1, self.embedding_dimension)
        targets = np.array(self.targets, dtype=float).reshape(-1)
        if inputs.shape[0] != targets.shape[0]:
            raise ValueError(f"{inputs.shape[0]} input rows but {targets.shape[0]} targets")
        inputs.flags.writeable = False
        targets.flags.writeable = False
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)

    @property
    def input_dim(self) -> int:
        return self.embedding_dimension

    def __len__(self) -> int:
        return self.targets.shape[0]


def _parse_timestamp(text: str, line: int) -> datetime:
    if not _TIMESTAMP_RE.match(text):
        raise ParseError(line, f"timestamp {text!r} is not in YYYY-MM-DDTHH:00Z form")
    try:
        return datetime.strptime(text, "%Y-%m-%dT%H:%MZ").replace(tzinfo=timezone.utc)
    except ValueError as exc:
        raise ParseError(line, f"invalid timestamp {text!r}: {exc}") from None


def parse_corpus(file_content: str) -> Corpus:
    """Parse corpus CSV text into a :class:`Corpus`.

    Records are grouped per ``cyclone_id`` and sorted by timestamp. Blank lines
    are skipped; every other irregularity raises :class:`ParseError` carrying
    the 1-based line number.
    """
    reader = csv.reader(io.StringIO(file_content))
    header_seen = False
    rows: dict[str, list[tuple[CycloneRecord, int]]] = {}
    basins: dict[str, str] = {}
    corpus_basin = None

    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        cells = [cell.strip() for cell in row]
        if not header_seen:
            if tuple(cells) != CSV_HEADER:
                raise ParseError(line, f"expected header {','.join(CSV_HEADER)!r}")
            header_seen = True
            continue
        if len(cells) != len(CSV_HEADER):
            raise ParseError(line, f"expected {len(CSV_HEADER)} fields, found {len(cells)}")
        cyclone_id, basin, stamp, wind = cells
        if not cyclone_id:
            raise ParseError(line, "empty cyclone_id")
        if not basin:
            raise ParseError(line, "empty basin")
        if corpus_basin is None:
            corpus_basin = basin
        elif basin != corpus_basin:
            raise ParseError(line, f"basin {basin!r} differs from corpus basin {corpus_basin!r}")
        timestamp = _parse_timestamp(stamp, line)
        if not _DECIMAL_RE.match(wind):
            raise ParseError(line, f"wind_knots {wind!r} is not a non-negative decimal")
        record = CycloneRecord(cyclone_id, timestamp, float(wind))
        basins[cyclone_id] = basin
        rows.setdefault(cyclone_id, []).append((record, line))

    if not header_seen:
        raise EmptyCorpus("corpus file has no header and no records")
    if not rows:
        raise EmptyCorpus("corpus file contains no records")

    tracks = []
    for cyclone_id, entries in rows.items():
        entries.sort(key=lambda e: e[0].timestamp)
        for (a, _), (b, line_b) in zip(entries, entries[1:]):
            if a.timestamp == b.timestamp:
                raise ParseError(line_b, f"duplicate timestamp for cyclone {cyclone_id!r}")
        tracks.append(CycloneTrack(cyclone_id, basins[cyclone_id], tuple(e[0] for e in entries)))
    return Corpus(corpus_basin, tuple(tracks))


def load_corpus(path) -> Corpus:
    with open(path, encoding="utf-8") as fh:
        return parse_corpus(fh.read())


def format_corpus(corpus: Corpus) -> str:
    """Render a corpus back to the CSV exchange format."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for track in corpus.tracks:
        for rec in track.records:
            writer.writerow([track.cyclone_id, track.basin, rec.timestamp.strftime("%Y-%m-%dT%H:00Z"),
                             repr(rec.wind_intensity)])
    return out.getvalue()


def split_by_year(corpus: Corpus, first_test_year: int) -> tuple[Corpus, Corpus]:
    """Partition by cyclone start year: ``start_year < first_test_year`` trains."""
    train = [t for t in corpus.tracks if t.start_year < first_test_year]
    test = [t for t in corpus.tracks if t.start_year >= first_test_year]
    return corpus._subset(train), corpus._subset(test)


def filter_by_duration(corpus: Corpus, min_days: float, max_days: float | None = None) -> Corpus:
    """Keep tracks with ``min_days <= duration_days < max_days``.

    ``max_days=None`` (or ``inf``) leaves the upper end open.
    """
    upper = math.inf if max_days is None else max_days
    if min_days < 0:
        raise ValueError("min_days must be non-negative")
    if not upper > min_days:
        raise ValueError("max_days must exceed min_days")
    return corpus._subset(t for t in corpus.tracks if min_days <= t.duration_days < upper)


def filter_by_category(corpus: Corpus, category: str) -> Corpus:
    lo, hi = DURATION_CATEGORIES[category]
    return filter_by_duration(corpus, lo, hi)


def duration_category(track: CycloneTrack) -> str:
    for name, (lo, hi) in DURATION_CATEGORIES.items():
        if lo <= track.duration_days < hi:
            return name
    raise AssertionError("duration categories do not cover %r" % track.duration_days)


def filter_by_year_range(corpus: Corpus, start_year: int, end_year: int) -> Corpus:
    """Keep tracks starting in ``[start_year, end_year)``."""
    if start_year > end_year:
        raise ValueError("start_year must not exceed end_year")
    return corpus._subset(t for t in corpus.tracks if start_year <= t.start_year < end_year)


def chronological(tracks: Iterable[CycloneTrack]) -> list[CycloneTrack]:
    return sorted(tracks, key=lambda t: (t.start, t.cyclone_id))


def concatenate(corpus: Corpus) -> np.ndarray:
    """Join all track intensities into one series, tracks in start order."""
    if not corpus.tracks:
        raise EmptyCorpus(f"cannot concatenate empty {corpus.basin} corpus")
    return np.concatenate([t.intensities for t in chronological(corpus.tracks)])


def fit_normalizer(series: Sequence[float]) -> NormalizationParams:
    values = np.asarray(series, dtype=float)
    if values.size < 2:
        raise DegenerateRange("need at least two values to fit a normalizer")
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        raise DegenerateRange(f"series is constant at {lo}")
    return NormalizationParams(lo, hi)


def apply_normalizer(series: Sequence[float], params: NormalizationParams) -> np.ndarray:
    # Out-of-range values are deliberately not clamped.
    return (np.asarray(series, dtype=float) - params.min_value) / params.span


def denormalize(series: Sequence[float], params: NormalizationParams) -> np.ndarray:
    return np.asarray(series, dtype=float) * params.span + params.min_value


def embed(series: Sequence[float], D: int, T: int) -> EmbeddedDataset:
    """Delay-embed ``series`` with dimension ``D`` and lag ``T``.

    Produces ``len(series) - D*T`` patterns, the ``i``-th predicting
    ``series[D*T + i]`` from the ``D`` values lagged by ``T, 2T, ..., D*T``.
    """
    if D < 1 or T < 1:
        raise ValueError("D and T must be positive")
    y = np.asarray(series, dtype=float).reshape(-1)
    span = D * T
    if y.size <= span:
        raise SeriesTooShort(f"series of length {y.size} needs more than D*T = {span} values")
    t = np.arange(span, y.size)
    lags = T * np.arange(1, D + 1)
    return EmbeddedDataset(D, T, y[t[:, None] - lags[None, :]], y[t])


def synthetic_corpus(basin: str, first_year: int = 1985, last_year: int = 2013,
                     per_year: int = 2, seed: int = 0) -> Corpus:
    """Noiseless sine-shaped cyclones for smoke testing and demos.

    Each cyclone rises from 25 kt to a peak and decays back to 25 kt along a
    half sine, so consecutive cyclones join without jumps. Lifetimes are
    drawn so that every duration category is populated.
    """
    rng = np.random.default_rng(seed)
    lengths = [9, 17, 25, 33, 41, 61]  # 2, 4, 6, 8, 10, 15 days at 6 h
    tracks = []
    for year in range(first_year, last_year + 1):
        for k in range(per_year):
            n = lengths[(year * per_year + k) % len(lengths)]
            peak = float(rng.uniform(60.0, 140.0))
            start = datetime(year, 1 + 5 * k % 12, 1, tzinfo=timezone.utc)
            cid = f"{basin}{year}{k + 1:02d}"
            phase = np.sin(np.pi * np.arange(n) / (n - 1))
            winds = np.round(25.0 + (peak - 25.0) * phase, 3)
            records = tuple(
                CycloneRecord(cid, start + timedelta(hours=SAMPLING_INTERVAL_HOURS * i), float(w))
                for i, w in enumerate(winds))
            tracks.append(CycloneTrack(cid, basin, records))
    return Corpus(basin, tuple(tracks))

