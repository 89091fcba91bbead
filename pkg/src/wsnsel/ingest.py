"""Parsing raw Intel-lab style sensor logs into an aligned epoch x sensor matrix.

Raw log lines are whitespace separated::

    date time epoch mote_id temperature humidity light voltage

with the trailing measurements optional. Alignment keys on the integer epoch.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from datetime import date, time
from typing import Iterable, Sequence, TextIO

import numpy as np

from .errors import ContractError, EmptyDatasetError, ParseError, WindowError

FIELDS = ("temperature", "humidity", "light", "voltage")
GAP_POLICIES = ("drop_row", "forward_fill", "column_mean")
DEFAULT_MIN_SAMPLES = 35


@dataclass(frozen=True)
class SensorReading:
    date: date
    time: time
    epoch: int
    mote_id: int
    temperature: float | None = None
    humidity: float | None = None
    light: float | None = None
    voltage: float | None = None

    def value(self, name: str) -> float | None:
        return getattr(self, name)


@dataclass(frozen=True)
class SensorPosition:
    mote_id: int
    x: float
    y: float


@dataclass
class ParseReport:
    readings: list[SensorReading]
    skipped: int = 0
    skipped_lines: list[int] = field(default_factory=list)


@dataclass
class IngestReport:
    n_readings: int = 0
    skipped_lines: int = 0
    duplicates: int = 0
    dropped_sensors: dict[int, int] = field(default_factory=dict)
    gaps_filled: int = 0
    mean_fallbacks: list[tuple[int, int]] = field(default_factory=list)
    rows_dropped: int = 0

    def to_text(self) -> str:
        dropped = ", ".join(f"{s} ({n} samples)" for s, n in sorted(self.dropped_sensors.items()))
        fallbacks = ", ".join(f"{s}@{e}" for e, s in self.mean_fallbacks)
        return (
            f"readings: {self.n_readings}\n"
            f"skipped_lines: {self.skipped_lines}\n"
            f"duplicates: {self.duplicates}\n"
            f"dropped_sensors: {dropped or 'none'}\n"
            f"gaps_filled: {self.gaps_filled}\n"
            f"column_mean_fallbacks: {fallbacks or 'none'}\n"
            f"rows_dropped: {self.rows_dropped}\n"
        )


@dataclass(frozen=True)
class DataMatrix:
    """Gap-free epoch x sensor grid with a designated target (sink) column."""

    epochs: np.ndarray
    sensor_ids: tuple[int, ...]
    values: np.ndarray
    target_id: int

    def __post_init__(self):
        epochs = np.asarray(self.epochs, dtype=np.int64)
        values = np.asarray(self.values, dtype=float)
        ids = tuple(int(s) for s in self.sensor_ids)
        if values.ndim != 2 or values.shape != (len(epochs), len(ids)):
            raise ContractError(f"values shape {values.shape} does not match "
                                f"{len(epochs)} epochs x {len(ids)} sensors")
        if values.shape[0] < 2 or values.shape[1] < 2:
            raise ContractError("matrix needs at least 2 rows and 2 columns")
        if not np.all(np.isfinite(values)):
            raise ContractError("matrix contains missing or non-finite cells")
        if list(ids) != sorted(set(ids)):
            raise ContractError("sensor_ids must be strictly ascending")
        if np.any(np.diff(epochs) <= 0):
            raise ContractError("epochs must be strictly ascending")
        if self.target_id not in ids:
            raise ContractError(f"target {self.target_id} is not a matrix column")
        epochs.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "epochs", epochs)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "sensor_ids", ids)
        object.__setattr__(self, "_col", {s: j for j, s in enumerate(ids)})

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def features(self) -> tuple[int, ...]:
        return tuple(s for s in self.sensor_ids if s != self.target_id)

    @property
    def target(self) -> np.ndarray:
        return self.values[:, self._col[self.target_id]]

    def column(self, sensor_id: int) -> np.ndarray:
        try:
            return self.values[:, self._col[sensor_id]]
        except KeyError:
            raise ContractError(f"sensor {sensor_id} not in matrix") from None

    def columns(self, sensor_ids: Sequence[int]) -> np.ndarray:
        try:
            idx = [self._col[s] for s in sensor_ids]
        except KeyError as exc:
            raise ContractError(f"sensor {exc.args[0]} not in matrix") from None
        return self.values[:, idx]

    def rows(self, index) -> "DataMatrix":
        index = np.asarray(index)
        return DataMatrix(self.epochs[index], self.sensor_ids, self.values[index], self.target_id)

    def with_target(self, target_id: int) -> "DataMatrix":
        return DataMatrix(self.epochs, self.sensor_ids, self.values, target_id)


def _parse_time(text: str) -> time:
    hms, _, frac = text.partition(".")
    h, m, s = (int(p) for p in hms.split(":"))
    micro = int((frac + "000000")[:6]) if frac else 0
    return time(h, m, s, micro)


def _parse_line(parts: list[str]) -> SensorReading:
    day = date.fromisoformat(parts[0])
    tod = _parse_time(parts[1])
    epoch = int(parts[2])
    mote = int(parts[3])
    if epoch < 0 or mote < 1:
        raise ValueError("epoch must be >= 0 and mote_id >= 1")
    measurements = {}
    for name, tok in zip(FIELDS, parts[4:]):
        v = float(tok)
        measurements[name] = v if math.isfinite(v) else None
    return SensorReading(day, tod, epoch, mote, **measurements)


def parse_sensor_log(stream: TextIO | Iterable[str], field: str = "temperature") -> ParseReport:
    """Parse a raw log into readings.

    Lines with 4 to 8 fields are accepted; anything else, or any field that
    fails to parse, is counted as malformed and skipped. Blank lines are
    ignored.
    """
    if field not in FIELDS:
        raise ContractError(f"unknown field {field!r}; expected one of {FIELDS}")
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    report = ParseReport(readings=[])
    for no, line in enumerate(stream, start=1):
        parts = line.split()
        if not parts:
            continue
        if not 4 <= len(parts) <= 8:
            report.skipped += 1
            report.skipped_lines.append(no)
            continue
        try:
            report.readings.append(_parse_line(parts))
        except ValueError:
            report.skipped += 1
            report.skipped_lines.append(no)
    if not report.readings:
        raise EmptyDatasetError("no well-formed sensor readings found")
    return report


def align_epochs(readings: Sequence[SensorReading], field: str = "temperature",
                 gap_policy: str = "forward_fill", *, target_id: int,
                 min_samples: int = DEFAULT_MIN_SAMPLES) -> tuple[DataMatrix, IngestReport]:
    """Pivot long-format readings into a gap-free epoch x sensor matrix.

    Sensors with fewer than `min_samples` present values are dropped before
    gap handling. Rows are the epochs at which at least one kept sensor has a
    value. Duplicate (epoch, mote) readings keep the last occurrence.
    """
    if field not in FIELDS:
        raise ContractError(f"unknown field {field!r}")
    if gap_policy not in GAP_POLICIES:
        raise ContractError(f"unknown gap policy {gap_policy!r}; expected one of {GAP_POLICIES}")
    if not readings:
        raise EmptyDatasetError("no readings to align")

    report = IngestReport(n_readings=len(readings))
    cells: dict[tuple[int, int], float] = {}
    seen: set[tuple[int, int]] = set()
    for rd in readings:
        key = (rd.epoch, rd.mote_id)
        if key in seen:
            report.duplicates += 1
        seen.add(key)
        v = rd.value(field)
        if v is None:
            cells.pop(key, None)
        else:
            cells[key] = v

    counts: dict[int, int] = {}
    for _, mote in cells:
        counts[mote] = counts.get(mote, 0) + 1
    all_motes = {rd.mote_id for rd in readings}
    kept = sorted(m for m in all_motes if counts.get(m, 0) >= min_samples)
    report.dropped_sensors = {m: counts.get(m, 0) for m in sorted(all_motes) if m not in kept}
    if not kept:
        raise EmptyDatasetError(f"every sensor has fewer than {min_samples} samples")
    if target_id not in kept:
        reason = "was dropped" if target_id in all_motes else "has no readings"
        raise EmptyDatasetError(f"target sensor {target_id} {reason}")

    col = {m: j for j, m in enumerate(kept)}
    epochs = sorted({e for e, m in cells if m in col})
    row = {e: i for i, e in enumerate(epochs)}
    grid = np.full((len(epochs), len(kept)), np.nan)
    for (e, m), v in cells.items():
        j = col.get(m)
        if j is not None:
            grid[row[e], j] = v

    missing = np.isnan(grid)
    epoch_arr = np.asarray(epochs, dtype=np.int64)
    if gap_policy == "drop_row":
        keep_rows = ~missing.any(axis=1)
        report.rows_dropped = int((~keep_rows).sum())
        grid = grid[keep_rows]
        epoch_arr = epoch_arr[keep_rows]
    else:
        report.gaps_filled = int(missing.sum())
        col_mean = np.nanmean(grid, axis=0)
        if gap_policy == "column_mean":
            grid = np.where(missing, col_mean, grid)
        else:
            for j in range(grid.shape[1]):
                column = grid[:, j]
                for i in np.flatnonzero(missing[:, j]):
                    if i == 0 or np.isnan(column[i - 1]):
                        # leading gap: nothing to carry forward
                        column[i] = col_mean[j]
                        report.mean_fallbacks.append((int(epoch_arr[i]), kept[j]))
                    else:
                        column[i] = column[i - 1]

    if grid.shape[0] < 2 or grid.shape[1] < 2:
        raise EmptyDatasetError(f"aligned matrix is {grid.shape[0]}x{grid.shape[1]}; need at least 2x2")
    return DataMatrix(epoch_arr, tuple(kept), grid, target_id), report


def take_window(matrix: DataMatrix, start_row: int, n_rows: int) -> DataMatrix:
    if start_row < 0 or n_rows < 2 or start_row + n_rows > matrix.n_rows:
        raise WindowError(f"window [{start_row}, {start_row + n_rows}) outside "
                          f"matrix of {matrix.n_rows} rows")
    sl = slice(start_row, start_row + n_rows)
    return DataMatrix(matrix.epochs[sl], matrix.sensor_ids, matrix.values[sl], matrix.target_id)


def load_positions(stream: TextIO | Iterable[str]) -> list[SensorPosition]:
    """Read ``mote_id x y`` lines; ``#`` comments and blank lines are ignored."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    positions: list[SensorPosition] = []
    seen: set[int] = set()
    for no, line in enumerate(stream, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        parts = text.split()
        if len(parts) != 3:
            raise ParseError(f"expected 'mote_id x y', got {len(parts)} fields", no)
        try:
            mote = int(parts[0])
            x, y = float(parts[1]), float(parts[2])
        except ValueError as exc:
            raise ParseError(str(exc), no) from None
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ParseError("non-finite coordinate", no)
        if mote in seen:
            raise ParseError(f"duplicate mote_id {mote}", no)
        seen.add(mote)
        positions.append(SensorPosition(mote, x, y))
    return positions


def write_matrix(matrix: DataMatrix, stream: TextIO) -> None:
    """Comma-delimited export: header of sensor ids, first column epoch."""
    stream.write("epoch," + ",".join(str(s) for s in matrix.sensor_ids) + "\n")
    for e, row in zip(matrix.epochs, matrix.values):
        stream.write(f"{e}," + ",".join(repr(float(v)) for v in row) + "\n")


def read_matrix(stream: TextIO | Iterable[str], target_id: int) -> DataMatrix:
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    lines = iter(stream)
    try:
        header = next(lines).strip().split(",")
    except StopIteration:
        raise EmptyDatasetError("empty matrix file") from None
    if header[0] != "epoch":
        raise ParseError("first header column must be 'epoch'", 1)
    try:
        ids = [int(h) for h in header[1:]]
    except ValueError as exc:
        raise ParseError(str(exc), 1) from None
    epochs, rows = [], []
    for no, line in enumerate(lines, start=2):
        if not line.strip():
            continue
        parts = line.strip().split(",")
        if len(parts) != len(ids) + 1:
            raise ParseError(f"expected {len(ids) + 1} fields, got {len(parts)}", no)
        try:
            epochs.append(int(parts[0]))
            rows.append([float(p) for p in parts[1:]])
        except ValueError as exc:
            raise ParseError(str(exc), no) from None
    if not rows:
        raise EmptyDatasetError("matrix file has no rows")
    return DataMatrix(np.asarray(epochs), tuple(ids), np.asarray(rows), target_id)
