"""Tick and order-book ingestion.

Prices live on an integer tick grid from the moment a file is parsed:
every decimal price must be an exact multiple of the file's tick size,
and all downstream comparisons against target levels are integer-exact.
Timestamps are integer nanoseconds and must be non-decreasing (ties are
allowed).  Parsed values are never mutated afterwards.

File layouts
------------
Tick CSV:      ``# tick_size=<decimal>`` then rows ``timestamp_ns,price,kind,volume``
Book CSV:      ``# tick_size=<decimal> depth=<N>`` then rows
               ``timestamp_ns,trade_count_delta,bid_px_1,bid_vol_1,...,ask_px_N,ask_vol_N``
               (deeper unused levels are empty fields)
Regular CSV:   rows ``timestamp_ns,price`` followed by a
               ``# session_boundaries=i1;i2;...`` footer comment
"""

from __future__ import annotations

import datetime as dt
import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from zoneinfo import ZoneInfo

import numpy as np

from .errors import (
    CrossedBook,
    EmptyDay,
    LadderOrderViolation,
    MalformedRow,
    NonMonotonicTime,
    TickSizeViolation,
)

__all__ = [
    "TickEvent",
    "BookSnapshot",
    "Session",
    "RegularSeries",
    "DayTicks",
    "SessionizedTicks",
    "parse_ticks",
    "parse_book",
    "serialize_ticks",
    "serialize_book",
    "sessionize",
    "resample",
    "serialize_regular_series",
    "parse_regular_series",
]

NS_PER_S = 1_000_000_000


# ---------------------------------------------------------------------- types


@dataclass(frozen=True)
class TickEvent:
    """One quote (Q) or trade (T).  ``price`` is in integer ticks."""

    timestamp_ns: int
    price: int
    kind: str
    volume: int


@dataclass(frozen=True)
class BookSnapshot:
    """Order-book levels at one instant.

    ``bids``/``asks`` are tuples of (price_ticks, volume) ordered best
    first: bids by strictly decreasing price, asks strictly increasing.
    ``trade_count_delta`` counts trades since the previous snapshot.
    """

    timestamp_ns: int
    trade_count_delta: int
    bids: tuple
    asks: tuple


@dataclass(frozen=True)
class Session:
    """Daily trading window, closed interval [open, close].

    ``date=None`` makes the session a daily template: sessionize() then
    slices every calendar date present in the data; with a concrete date
    only that day is kept.
    """

    open: dt.time
    close: dt.time
    timezone: str = "UTC"
    date: dt.date | None = None

    def __post_init__(self):
        if self.open >= self.close:
            raise ValueError("session open must precede close")

    def bounds_ns(self, day: dt.date) -> tuple[int, int]:
        """Epoch-ns timestamps of [open, close] on the given date."""
        tz = ZoneInfo(self.timezone)
        lo = dt.datetime.combine(day, self.open, tzinfo=tz)
        hi = dt.datetime.combine(day, self.close, tzinfo=tz)
        return int(lo.timestamp() * NS_PER_S), int(hi.timestamp() * NS_PER_S)


@dataclass(frozen=True)
class RegularSeries:
    """Evenly sampled prices, possibly spanning several sessions.

    ``session_boundaries[i]`` is the index of day i's first grid point;
    the first entry is always 0.
    """

    start_ns: int
    interval_ns: int
    values: np.ndarray = field(repr=False)
    session_boundaries: tuple = (0,)

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.size == 0:
            raise ValueError("RegularSeries requires at least one value")
        if self.interval_ns <= 0:
            raise ValueError("interval must be positive")
        b = tuple(self.session_boundaries)
        if not b or b[0] != 0 or list(b) != sorted(set(b)) or b[-1] >= self.values.size + 1:
            if b != (0,):
                raise ValueError("session_boundaries must be sorted, unique, start at 0")
        object.__setattr__(self, "session_boundaries", b)

    def __len__(self) -> int:
        return self.values.size

    @property
    def timestamps_ns(self) -> np.ndarray:
        return self.start_ns + self.interval_ns * np.arange(self.values.size, dtype=np.int64)


@dataclass(frozen=True)
class DayTicks:
    """Column-oriented events of a single session, time-ordered.

    ``session_open_ns`` anchors time-of-day measurements; for synthetic
    data it defaults to the first timestamp.
    """

    timestamps_ns: np.ndarray = field(repr=False)
    prices: np.ndarray = field(repr=False)
    volumes: np.ndarray | None = field(default=None, repr=False)
    date: dt.date | None = None
    session_open_ns: int | None = None

    def __post_init__(self):
        ts = np.asarray(self.timestamps_ns, dtype=np.int64)
        px = np.asarray(self.prices, dtype=np.int64)
        if ts.shape != px.shape:
            raise ValueError("timestamps and prices must have equal length")
        object.__setattr__(self, "timestamps_ns", ts)
        object.__setattr__(self, "prices", px)
        if self.session_open_ns is None and ts.size:
            object.__setattr__(self, "session_open_ns", int(ts[0]))

    def __len__(self) -> int:
        return self.timestamps_ns.size

    @classmethod
    def from_walk(cls, prices, step_ns: int = NS_PER_S) -> "DayTicks":
        """Wrap an integer walk as one synthetic day, one event per step."""
        px = np.asarray(prices, dtype=np.int64)
        ts = step_ns * (1 + np.arange(px.size, dtype=np.int64))
        return cls(timestamps_ns=ts, prices=px, session_open_ns=int(ts[0]) if px.size else 0)


@dataclass(frozen=True)
class SessionizedTicks:
    days: tuple
    dropped: int

    def __iter__(self):
        return iter(self.days)

    def __len__(self):
        return len(self.days)


# -------------------------------------------------------------------- parsing

_TICK_HEADER = re.compile(r"^#\s*tick_size=(\S+)\s*$")
_BOOK_HEADER = re.compile(r"^#\s*tick_size=(\S+)\s+depth=(\d+)\s*$")


def _to_ticks(text: str, tick_size: Fraction, lineno: int) -> int:
    try:
        price = Fraction(Decimal(text))
    except (InvalidOperation, ValueError):
        raise MalformedRow(lineno, f"bad price {text!r}")
    ratio = price / tick_size
    if ratio.denominator != 1:
        raise TickSizeViolation(lineno, f"price {text} is not a multiple of the tick size")
    return int(ratio)


def _parse_tick_size(text: str, lineno: int) -> tuple[Fraction, Decimal]:
    try:
        d = Decimal(text)
    except InvalidOperation:
        raise MalformedRow(lineno, f"bad tick size {text!r}")
    if d <= 0:
        raise MalformedRow(lineno, "tick size must be positive")
    return Fraction(d), d


def parse_ticks(text: str) -> tuple[list[TickEvent], Decimal]:
    """Parse a tick CSV into events with integer-tick prices.

    Returns ``(events, tick_size)``.  Raises MalformedRow, TickSizeViolation
    or NonMonotonicTime with the offending line number.
    """
    lines = text.splitlines()
    if not lines:
        raise MalformedRow(1, "missing tick_size header")
    m = _TICK_HEADER.match(lines[0])
    if not m:
        raise MalformedRow(1, "missing tick_size header")
    tick_frac, tick_dec = _parse_tick_size(m.group(1), 1)
    events: list[TickEvent] = []
    prev_ts = -1
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split(",")
        if len(parts) != 4:
            raise MalformedRow(lineno, f"expected 4 fields, got {len(parts)}")
        try:
            ts = int(parts[0])
            volume = int(parts[3])
        except ValueError:
            raise MalformedRow(lineno, "bad integer field")
        if ts <= 0:
            raise MalformedRow(lineno, "timestamp must be positive")
        if volume < 0:
            raise MalformedRow(lineno, "volume must be non-negative")
        kind = parts[2]
        if kind not in ("Q", "T"):
            raise MalformedRow(lineno, f"kind must be Q or T, got {kind!r}")
        if ts < prev_ts:
            raise NonMonotonicTime(lineno, "timestamps must be non-decreasing")
        prev_ts = ts
        events.append(TickEvent(ts, _to_ticks(parts[1], tick_frac, lineno), kind, volume))
    return events, tick_dec


def _format_price(ticks: int, tick_size: Decimal) -> str:
    value = (Decimal(ticks) * tick_size).normalize()
    return format(value, "f")


def serialize_ticks(events, tick_size: Decimal) -> str:
    """Inverse of parse_ticks for canonical-form files."""
    out = [f"# tick_size={format(tick_size.normalize(), 'f')}"]
    for e in events:
        out.append(f"{e.timestamp_ns},{_format_price(e.price, tick_size)},{e.kind},{e.volume}")
    return "\n".join(out) + "\n"


def parse_book(text: str, depth: int | None = None) -> tuple[list[BookSnapshot], Decimal, int]:
    """Parse a book CSV into snapshots.

    ``depth``, when given, must match the header's declared depth.  Returns
    ``(snapshots, tick_size, depth)``.
    """
    lines = text.splitlines()
    if not lines:
        raise MalformedRow(1, "missing book header")
    m = _BOOK_HEADER.match(lines[0])
    if not m:
        raise MalformedRow(1, "missing 'tick_size=... depth=...' header")
    tick_frac, tick_dec = _parse_tick_size(m.group(1), 1)
    file_depth = int(m.group(2))
    if file_depth < 1:
        raise MalformedRow(1, "depth must be >= 1")
    if depth is not None and depth != file_depth:
        raise MalformedRow(1, f"requested depth {depth} but file declares {file_depth}")

    snaps: list[BookSnapshot] = []
    prev_ts = -1
    n_fields = 2 + 4 * file_depth
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split(",")
        if len(parts) != n_fields:
            raise MalformedRow(lineno, f"expected {n_fields} fields, got {len(parts)}")
        try:
            ts = int(parts[0])
            tcd = int(parts[1])
        except ValueError:
            raise MalformedRow(lineno, "bad integer field")
        if ts <= 0:
            raise MalformedRow(lineno, "timestamp must be positive")
        if tcd < 0:
            raise MalformedRow(lineno, "trade_count_delta must be non-negative")
        if ts < prev_ts:
            raise NonMonotonicTime(lineno, "timestamps must be non-decreasing")
        prev_ts = ts

        def read_side(offset: int) -> tuple:
            levels = []
            ended = False
            for lvl in range(file_depth):
                px_text = parts[offset + 2 * lvl]
                vol_text = parts[offset + 2 * lvl + 1]
                if px_text == "" and vol_text == "":
                    ended = True
                    continue
                if ended:
                    raise MalformedRow(lineno, "non-contiguous book levels")
                if px_text == "" or vol_text == "":
                    raise MalformedRow(lineno, "price/volume must be both present or both empty")
                try:
                    vol_i = int(vol_text)
                except ValueError:
                    raise MalformedRow(lineno, "bad volume field")
                if vol_i <= 0:
                    raise MalformedRow(lineno, "level volume must be positive")
                levels.append((_to_ticks(px_text, tick_frac, lineno), vol_i))
            return tuple(levels)

        bids = read_side(2)
        asks = read_side(2 + 2 * file_depth)
        bid_px = [p for p, _ in bids]
        ask_px = [p for p, _ in asks]
        if any(b >= a for a, b in zip(bid_px, bid_px[1:])):
            raise LadderOrderViolation(lineno, "bid prices must be strictly decreasing")
        if any(b <= a for a, b in zip(ask_px, ask_px[1:])):
            raise LadderOrderViolation(lineno, "ask prices must be strictly increasing")
        if bids and asks and bids[0][0] >= asks[0][0]:
            raise CrossedBook(lineno, "best bid is at or above best ask")
        snaps.append(BookSnapshot(ts, tcd, bids, asks))
    return snaps, tick_dec, file_depth


def serialize_book(snaps, tick_size: Decimal, depth: int) -> str:
    """Inverse of parse_book for canonical-form files."""
    out = [f"# tick_size={format(tick_size.normalize(), 'f')} depth={depth}"]
    for s in snaps:
        fields = [str(s.timestamp_ns), str(s.trade_count_delta)]
        for side in (s.bids, s.asks):
            for lvl in range(depth):
                if lvl < len(side):
                    px, vol = side[lvl]
                    fields += [_format_price(px, tick_size), str(vol)]
                else:
                    fields += ["", ""]
        out.append(",".join(fields))
    return "\n".join(out) + "\n"


# ----------------------------------------------------------------- sessioning


def sessionize(events, session: Session) -> SessionizedTicks:
    """Split events into per-day slices, keeping only those with time of day
    inside the closed [open, close] window.  Out-of-session events are
    dropped and counted, not fatal."""
    if not events:
        return SessionizedTicks(days=(), dropped=0)
    ts = np.array([e.timestamp_ns for e in events], dtype=np.int64)
    px = np.array([e.price for e in events], dtype=np.int64)
    vol = np.array([e.volume for e in events], dtype=np.int64)

    tz = ZoneInfo(session.timezone)
    first_day = dt.datetime.fromtimestamp(ts[0] / NS_PER_S, tz).date()
    last_day = dt.datetime.fromtimestamp(ts[-1] / NS_PER_S, tz).date()

    days: list[DayTicks] = []
    kept = 0
    day = first_day
    while day <= last_day:
        if session.date is None or session.date == day:
            lo, hi = session.bounds_ns(day)
            i = int(np.searchsorted(ts, lo, side="left"))
            j = int(np.searchsorted(ts, hi, side="right"))
            if j > i:
                days.append(
                    DayTicks(
                        timestamps_ns=ts[i:j],
                        prices=px[i:j],
                        volumes=vol[i:j],
                        date=day,
                        session_open_ns=lo,
                    )
                )
                kept += j - i
        day += dt.timedelta(days=1)
    return SessionizedTicks(days=tuple(days), dropped=len(events) - kept)


def resample(days, interval_ns: int, tick_size: float = 1.0, session_close_by_day=None) -> RegularSeries:
    """Previous-tick resampling of day slices onto a fixed grid.

    The grid of each day runs from the session open in steps of
    ``interval_ns`` up to the session close (a final partial bin is
    dropped); the value at a grid point is the last price at or before it,
    and points before the day's first tick are back-filled with that first
    price.  ``tick_size`` converts integer ticks to price units.
    """
    if isinstance(days, SessionizedTicks):
        days = days.days
    if isinstance(days, DayTicks):
        days = (days,)
    if interval_ns <= 0:
        raise ValueError("interval must be positive")
    values = []
    boundaries = [0]
    start_ns = None
    for day in days:
        if len(day) == 0:
            raise EmptyDay(f"no events on {day.date}")
        open_ns = day.session_open_ns
        close_ns = day.timestamps_ns[-1]
        if session_close_by_day and day.date in session_close_by_day:
            close_ns = session_close_by_day[day.date]
        n_pts = int((close_ns - open_ns) // interval_ns) + 1
        grid = open_ns + interval_ns * np.arange(n_pts, dtype=np.int64)
        idx = np.searchsorted(day.timestamps_ns, grid, side="right") - 1
        idx = np.maximum(idx, 0)  # back-fill before the first tick
        values.append(day.prices[idx] * float(tick_size))
        if start_ns is None:
            start_ns = int(grid[0])
        boundaries.append(boundaries[-1] + n_pts)
    if not values:
        raise EmptyDay("no day slices to resample")
    return RegularSeries(
        start_ns=start_ns,
        interval_ns=int(interval_ns),
        values=np.concatenate(values),
        session_boundaries=tuple(boundaries[:-1]),
    )


# -------------------------------------------------------- regular series I/O


def serialize_regular_series(series: RegularSeries) -> str:
    ts = series.timestamps_ns
    rows = [f"{int(t)},{repr(float(v))}" for t, v in zip(ts, series.values)]
    rows.append("# session_boundaries=" + ";".join(str(i) for i in series.session_boundaries))
    return "\n".join(rows) + "\n"


def parse_regular_series(text: str) -> RegularSeries:
    ts: list[int] = []
    vals: list[float] = []
    boundaries: tuple = (0,)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        if raw.startswith("#"):
            m = re.match(r"^#\s*session_boundaries=(.*)$", raw)
            if m:
                boundaries = tuple(int(p) for p in m.group(1).split(";") if p != "")
            continue
        parts = raw.split(",")
        if len(parts) != 2:
            raise MalformedRow(lineno, f"expected 2 fields, got {len(parts)}")
        try:
            ts.append(int(parts[0]))
            vals.append(float(parts[1]))
        except ValueError:
            raise MalformedRow(lineno, "bad numeric field")
    if not ts:
        raise MalformedRow(1, "no data rows")
    interval = ts[1] - ts[0] if len(ts) > 1 else 1
    return RegularSeries(
        start_ns=ts[0],
        interval_ns=interval,
        values=np.array(vals),
        session_boundaries=boundaries,
    )
