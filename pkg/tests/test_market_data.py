"""Parsers, sessioning and resampling.

Round trips are exercised with hypothesis (serialize then parse must be
the identity); malformed inputs must fail with the precise error class and
line number, since the CLI surfaces both.
"""

import datetime as dt
from decimal import Decimal

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tickphys import (
    BookSnapshot,
    CrossedBook,
    DayTicks,
    EmptyDay,
    LadderOrderViolation,
    MalformedRow,
    NonMonotonicTime,
    RegularSeries,
    Session,
    TickEvent,
    TickSizeViolation,
    parse_book,
    parse_regular_series,
    parse_ticks,
    resample,
    serialize_book,
    serialize_regular_series,
    serialize_ticks,
    sessionize,
)

NS = 1_000_000_000

TICKS = """# tick_size=0.01
1000000000,100.05,Q,10
2000000000,100.07,T,5
2000000000,100.07,Q,0
"""

BOOK = """# tick_size=0.5 depth=2
1000000000,0,99.5,10,99.0,4,100.0,7,100.5,2
2000000000,3,99.5,12,,,100.0,9,101.0,1
"""


def test_parse_ticks_integer_grid():
    events, tick_size = parse_ticks(TICKS)
    assert tick_size == Decimal("0.01")
    assert [e.price for e in events] == [10005, 10007, 10007]
    assert [e.kind for e in events] == ["Q", "T", "Q"]
    assert events[0].timestamp_ns == NS


def test_parse_ticks_is_exact_for_small_tick_sizes():
    # 1.003 / 0.001 must come out as exactly 1003, never 1002.999...
    text = "# tick_size=0.001\n1,1.003,T,1\n"
    events, _ = parse_ticks(text)
    assert events[0].price == 1003


def test_parse_ticks_error_lines():
    with pytest.raises(MalformedRow) as err:
        parse_ticks("no header\n")
    assert err.value.line == 1
    with pytest.raises(MalformedRow):
        parse_ticks("# tick_size=0.01\n1,100.00,T\n")  # missing field
    with pytest.raises(MalformedRow):
        parse_ticks("# tick_size=0.01\n1,100.00,X,1\n")  # bad kind
    with pytest.raises(MalformedRow):
        parse_ticks("# tick_size=0.01\n1,100.00,T,-2\n")  # negative volume
    with pytest.raises(TickSizeViolation) as err:
        parse_ticks("# tick_size=0.01\n1,100.005,T,1\n")
    assert err.value.line == 2
    with pytest.raises(NonMonotonicTime):
        parse_ticks("# tick_size=0.01\n5,100.00,T,1\n4,100.00,T,1\n")


def test_tick_roundtrip_fixed():
    events, tick_size = parse_ticks(TICKS)
    assert parse_ticks(serialize_ticks(events, tick_size))[0] == events


@settings(max_examples=50, deadline=None)
@given(
    data=st.lists(
        st.tuples(
            st.integers(min_value=1, max_value=10**6),  # timestamp gaps
            st.integers(min_value=-10_000, max_value=10_000),  # price ticks
            st.sampled_from(["Q", "T"]),
            st.integers(min_value=0, max_value=10**6),
        ),
        min_size=1,
        max_size=30,
    )
)
def test_tick_roundtrip_property(data):
    ts = 0
    events = []
    for gap, price, kind, volume in data:
        ts += gap
        events.append(TickEvent(ts, price, kind, volume))
    text = serialize_ticks(events, Decimal("0.01"))
    parsed, tick_size = parse_ticks(text)
    assert parsed == events
    assert tick_size == Decimal("0.01")


def test_parse_book_levels_and_short_side():
    snaps, tick_size, depth = parse_book(BOOK)
    assert (tick_size, depth) == (Decimal("0.5"), 2)
    assert snaps[0].bids == ((199, 10), (198, 4))
    assert snaps[0].asks == ((200, 7), (201, 2))
    assert snaps[1].bids == ((199, 12),)  # second level empty
    assert snaps[1].trade_count_delta == 3


def test_parse_book_rejects_bad_ladders():
    head = "# tick_size=0.5 depth=2\n"
    with pytest.raises(LadderOrderViolation):
        parse_book(head + "1,0,99.0,5,99.5,5,100.0,7,100.5,2\n")  # bids rising
    with pytest.raises(LadderOrderViolation):
        parse_book(head + "1,0,99.5,5,99.0,5,100.5,7,100.0,2\n")  # asks falling
    with pytest.raises(CrossedBook):
        parse_book(head + "1,0,100.0,5,99.5,5,100.0,7,100.5,2\n")
    with pytest.raises(MalformedRow):
        parse_book(head + "1,0,,,99.0,4,100.0,7,100.5,2\n")  # gap then level
    with pytest.raises(MalformedRow):
        parse_book(head + "1,0,99.5,,99.0,4,100.0,7,100.5,2\n")  # half a level
    with pytest.raises(MalformedRow):
        parse_book(head + "1,0,99.5,0,99.0,4,100.0,7,100.5,2\n")  # zero volume
    with pytest.raises(MalformedRow):
        parse_book(BOOK, depth=3)  # declared depth wins


def test_book_roundtrip():
    snaps, tick_size, depth = parse_book(BOOK)
    assert parse_book(serialize_book(snaps, tick_size, depth))[0] == snaps


def test_session_validation_and_bounds():
    with pytest.raises(ValueError):
        Session(open=dt.time(16, 0), close=dt.time(9, 30))
    session = Session(open=dt.time(9, 30), close=dt.time(16, 0))
    lo, hi = session.bounds_ns(dt.date(2024, 1, 2))
    assert hi - lo == int(6.5 * 3600) * NS


def test_sessionize_splits_days_and_drops_outside():
    session = Session(open=dt.time(10, 0), close=dt.time(11, 0))
    base = int(dt.datetime(2024, 1, 2, tzinfo=dt.timezone.utc).timestamp()) * NS

    def at(day, hour, minute):
        return base + day * 86_400 * NS + (hour * 3600 + minute * 60) * NS

    events = [
        TickEvent(at(0, 9, 59), 100, "T", 1),  # before open: dropped
        TickEvent(at(0, 10, 0), 101, "T", 1),
        TickEvent(at(0, 11, 0), 102, "T", 1),  # close is inclusive
        TickEvent(at(1, 10, 30), 103, "T", 1),
        TickEvent(at(1, 11, 1), 104, "T", 1),  # after close: dropped
    ]
    out = sessionize(events, session)
    assert len(out) == 2
    assert out.dropped == 2
    assert out.days[0].prices.tolist() == [101, 102]
    assert out.days[1].prices.tolist() == [103]
    assert out.days[0].session_open_ns == at(0, 10, 0)
    assert out.days[0].date == dt.date(2024, 1, 2)

    only_day_two = sessionize(events, Session(dt.time(10, 0), dt.time(11, 0), date=dt.date(2024, 1, 3)))
    assert len(only_day_two) == 1


def test_resample_previous_tick_and_backfill():
    day = DayTicks(
        timestamps_ns=[int(0.5 * NS), int(1.2 * NS), int(2.8 * NS)],
        prices=[10, 11, 12],
        session_open_ns=0,
    )
    series = resample(day, interval_ns=NS, tick_size=0.5)
    # grid 0,1,2: back-fill, then last price at or before each point
    assert series.values.tolist() == [5.0, 5.0, 5.5]
    assert series.session_boundaries == (0,)
    assert series.timestamps_ns.tolist() == [0, NS, 2 * NS]


def test_resample_multi_day_boundaries():
    day1 = DayTicks(timestamps_ns=[NS, 3 * NS], prices=[1, 2], session_open_ns=NS)
    day2 = DayTicks(timestamps_ns=[10 * NS, 12 * NS], prices=[5, 6], session_open_ns=10 * NS)
    series = resample([day1, day2], interval_ns=NS)
    assert series.session_boundaries == (0, 3)
    assert series.values.tolist() == [1.0, 1.0, 2.0, 5.0, 5.0, 6.0]
    with pytest.raises(EmptyDay):
        resample([], interval_ns=NS)


def test_regular_series_validation():
    with pytest.raises(ValueError):
        RegularSeries(start_ns=0, interval_ns=0, values=[1.0])
    with pytest.raises(ValueError):
        RegularSeries(start_ns=0, interval_ns=1, values=[])
    with pytest.raises(ValueError):
        RegularSeries(start_ns=0, interval_ns=1, values=[1.0, 2.0], session_boundaries=(1, 0))


def test_regular_series_roundtrip():
    series = RegularSeries(
        start_ns=5,
        interval_ns=3,
        values=[1.5, -2.25, 0.1, 7.0],
        session_boundaries=(0, 2),
    )
    back = parse_regular_series(serialize_regular_series(series))
    assert back.start_ns == 5 and back.interval_ns == 3
    assert np.array_equal(back.values, series.values)
    assert back.session_boundaries == (0, 2)


@settings(max_examples=50, deadline=None)
@given(
    values=st.lists(
        st.floats(min_value=-1e9, max_value=1e9, allow_nan=False), min_size=1, max_size=50
    ),
    interval=st.integers(min_value=1, max_value=10**9),
)
def test_regular_series_roundtrip_property(values, interval):
    series = RegularSeries(start_ns=0, interval_ns=interval, values=values)
    back = parse_regular_series(serialize_regular_series(series))
    assert np.array_equal(back.values, series.values)  # repr round trip is exact
    if len(values) > 1:
        assert back.interval_ns == interval


def test_parse_regular_series_rejects_garbage():
    with pytest.raises(MalformedRow):
        parse_regular_series("")
    with pytest.raises(MalformedRow):
        parse_regular_series("1,2,3\n")
    with pytest.raises(MalformedRow):
        parse_regular_series("1,abc\n")
