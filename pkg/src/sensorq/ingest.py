"""Trace-file ingestion: parse, clean, and align sensor readings.

Input format: plain text, one reading per line, 8 whitespace-separated
fields in this order:

    date  time  epoch  mote_id  temperature  humidity  light  voltage
    (YYYY-MM-DD, HH:MM:SS[.ffffff], int, int, degC, %RH, lux, V)

Lines that cannot be parsed are skipped, never fatal; each skip carries
a reason code so ingestion is auditable. Kept readings are bucketed onto
a regular grid of width delta_t seconds starting at the earliest kept
timestamp (slot = floor((t - t0) / delta_t)); when two readings land in
one slot the later one wins.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from .errors import ConfigError

CHANNELS = ("temperature", "humidity", "light", "voltage")

# cleaning windows: the public distribution of this kind of trace contains
# faulted readings (negative lux, 100+ degC spikes) that must not reach training
PLAUSIBLE = {
    "temperature": (-10.0, 60.0),
    "humidity": (0.0, 100.0),
    "light": (0.0, 200_000.0),
    "voltage": (1.5, 3.5),
}

R_FIELDS = "wrong_field_count"
R_NUMBER = "unparseable_value"
R_RANGE = "plausibility"


@dataclass
class SensorReading:
    date: str
    time: str
    epoch: int
    mote: int
    temperature: float
    humidity: float
    light: float
    voltage: float

    @property
    def timestamp(self) -> float:
        """Seconds since the Unix epoch (fractional)."""
        text = f"{self.date} {self.time}"
        fmt = "%Y-%m-%d %H:%M:%S.%f" if "." in self.time else "%Y-%m-%d %H:%M:%S"
        return datetime.strptime(text, fmt).timestamp()

    def channel(self, name: str) -> float:
        return getattr(self, name)


@dataclass
class ParseSkip:
    """Non-fatal parse failure with a reason code."""

    reason: str


@dataclass
class IngestReport:
    total: int = 0
    kept: int = 0
    skipped: dict = field(default_factory=dict)

    def skip(self, reason: str) -> None:
        self.skipped[reason] = self.skipped.get(reason, 0) + 1

    @property
    def total_skipped(self) -> int:
        return sum(self.skipped.values())


@dataclass
class MoteSeries:
    """One mote's four channels on the shared slot grid.

    values[channel] and present share one length; stats[channel] is the
    (min, max) over present values.
    """

    mote: int
    values: dict[str, np.ndarray]
    present: np.ndarray
    stats: dict[str, tuple[float, float]]


def parse_line(line: str) -> SensorReading | ParseSkip:
    """Map one trace line to a reading; malformed lines become skips."""
    fields = line.split()
    if len(fields) != 8:
        return ParseSkip(R_FIELDS)
    try:
        epoch = int(fields[2])
        mote = int(fields[3])
        channels = [float(v) for v in fields[4:8]]
    except ValueError:
        return ParseSkip(R_NUMBER)
    if any(not np.isfinite(v) for v in channels):
        return ParseSkip(R_NUMBER)
    if mote < 1 or epoch < 0:
        return ParseSkip(R_RANGE)
    reading = SensorReading(fields[0], fields[1], epoch, mote, *channels)
    try:
        reading.timestamp
    except ValueError:
        return ParseSkip(R_NUMBER)
    return reading


def load_trace(
    path, delta_t: float = 60.0, windows: dict | None = None
) -> tuple[dict[int, MoteSeries], IngestReport]:
    """Parse a trace file into per-mote aligned series plus a skip report.

    Raises OSError when the file cannot be read and ConfigError when no
    reading survives cleaning.
    """
    windows = windows or PLAUSIBLE
    report = IngestReport()
    readings: list[SensorReading] = []
    with open(path) as fh:
        for line in fh:
            report.total += 1
            parsed = parse_line(line)
            if isinstance(parsed, ParseSkip):
                report.skip(parsed.reason)
                continue
            if any(
                not windows[ch][0] <= parsed.channel(ch) <= windows[ch][1] for ch in CHANNELS
            ):
                report.skip(R_RANGE)
                continue
            report.kept += 1
            readings.append(parsed)
    if not readings:
        raise ConfigError(f"no usable readings in {path}")

    stamps = [r.timestamp for r in readings]
    t0 = min(stamps)
    slots = [int((t - t0) // delta_t) for t in stamps]
    n_slots = max(slots) + 1

    grids: dict[int, dict] = {}
    for reading, ts, slot in zip(readings, stamps, slots):
        per_mote = grids.setdefault(reading.mote, {})
        held = per_mote.get(slot)
        # slot conflicts keep the latest; value tuple breaks exact-timestamp
        # ties so the result is independent of input line order
        key = (ts, reading.epoch, reading.temperature, reading.humidity,
               reading.light, reading.voltage)
        if held is None or key > held[0]:
            per_mote[slot] = (key, reading)

    series: dict[int, MoteSeries] = {}
    for mote in sorted(grids):
        values = {ch: np.full(n_slots, np.nan) for ch in CHANNELS}
        present = np.zeros(n_slots, dtype=bool)
        for slot, (_, reading) in grids[mote].items():
            present[slot] = True
            for ch in CHANNELS:
                values[ch][slot] = reading.channel(ch)
        stats = {
            ch: (float(np.nanmin(values[ch])), float(np.nanmax(values[ch]))) for ch in CHANNELS
        }
        series[mote] = MoteSeries(mote, values, present, stats)
    return series, report


def hold_fill(series: MoteSeries) -> MoteSeries:
    """Fill gaps by repeating the last present value (leading gaps take the
    first present value). Presence flags are preserved for the record."""
    if not series.present.any():
        raise ConfigError(f"mote {series.mote}: series has no present slots")
    idx = np.where(series.present, np.arange(len(series.present)), -1)
    last = np.maximum.accumulate(idx)
    first_present = int(np.argmax(series.present))
    last[last < 0] = first_present
    filled = {ch: series.values[ch][last] for ch in CHANNELS}
    return MoteSeries(series.mote, filled, series.present.copy(), dict(series.stats))


def usable_windows(series: MoteSeries, window: int, min_presence: float) -> list[int]:
    """Start offsets (stride = window) whose presence rate clears the bar."""
    if window < 1:
        raise ConfigError("window must be positive")
    n = len(series.present)
    return [
        s
        for s in range(0, n - window + 1, window)
        if series.present[s : s + window].mean() >= min_presence
    ]


def gap_fill(series: MoteSeries, policy: str, **kwargs) -> MoteSeries | list[int]:
    """Dispatch on gap policy: "hold" fills values, "drop-episode" returns
    the usable window offsets for the given window/min_presence."""
    if policy == "hold":
        return hold_fill(series)
    if policy == "drop-episode":
        return usable_windows(series, kwargs["window"], kwargs.get("min_presence", 0.5))
    raise ConfigError(f"unknown gap policy {policy!r}")


def write_report_csv(report: IngestReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["reason", "count"])
        writer.writerow(["kept", report.kept])
        for reason in sorted(report.skipped):
            writer.writerow([reason, report.skipped[reason]])


def write_aligned_csv(series: dict[int, MoteSeries], path) -> None:
    """Inspection dump: raw and min/max-normalized values per (mote, slot)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["mote", "slot", "present", *CHANNELS, *[f"{ch}_norm" for ch in CHANNELS]]
        )
        for mote in sorted(series):
            ms = series[mote]
            for slot in range(len(ms.present)):
                row = [mote, slot, int(ms.present[slot])]
                raw, norm = [], []
                for ch in CHANNELS:
                    v = ms.values[ch][slot]
                    if np.isnan(v):
                        raw.append("")
                        norm.append("")
                        continue
                    lo, hi = ms.stats[ch]
                    span = hi - lo if hi > lo else 1.0
                    raw.append(format(float(v), ".12g"))
                    norm.append(format((float(v) - lo) / span, ".12g"))
                writer.writerow(row + raw + norm)
