import datetime as dt
import logging
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helixwaves import ingest
from helixwaves.errors import InputError, ParameterError, RowError, SchemaError
from helixwaves.ingest import ColumnMap, SeriesKind, TimeSeries

from oracles import csv_case_total

DATA = Path(__file__).parent / "data"


def write(tmp_path, text, name="cases.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_gap_fill(tmp_path):
    path = write(tmp_path, "date,cases\n2020-03-01,5\n2020-03-03,2\n")
    ts = ingest.load_csv(path, ColumnMap("date", "cases", population_override=1000))
    assert ts.values.tolist() == [5, 0, 2]
    assert ts.origin_date == dt.date(2020, 3, 1)
    assert ts.kind is SeriesKind.RAW_DAILY_CASES


def test_same_day_rows_are_summed(tmp_path):
    path = write(tmp_path, "date,cases\n2020-03-01,3\n2020-03-02,1\n2020-03-01,4\n")
    ts = ingest.load_csv(path, ColumnMap("date", "cases", population_override=10))
    assert ts.values.tolist() == [7, 1]


def test_rows_out_of_order_and_semicolons(tmp_path):
    path = write(tmp_path, "date;cases\n03/03/2020;2\n01/03/2020;1\n")
    ts = ingest.load_csv(path, ColumnMap("date", "cases", population_override=10))
    assert ts.values.tolist() == [1, 0, 2]


def test_ecdc_style_file_total():
    path = DATA / "ecdc_sample.csv"
    ts = ingest.load_csv(path, ColumnMap("dateRep", "cases", population_column="popData2019"))
    assert ts.population == 5517919
    assert ts.values.sum() == csv_case_total(path, "cases")
    assert ts.origin_date == dt.date(2020, 2, 26)
    assert len(ts) == 14      # 26 Feb .. 10 Mar 2020 inclusive


def test_ecdc_negative_day_is_clamped_and_reported(caplog):
    ts = ingest.load_csv(DATA / "ecdc_sample.csv",
                         ColumnMap("dateRep", "cases", population_column="popData2019"))
    report = ingest.cleaning_report(ts)
    assert report == [{"day_index": 10, "date": "2020-03-07", "value": -2.0}]
    with caplog.at_level(logging.WARNING):
        cumulative, density = ingest.to_probability(ts)
    assert "clamped 1 negative" in caplog.text
    assert density.values[10] == 0.0
    # total case count survives apart from the reported clamp
    clamped = sum(-r["value"] for r in report)
    assert density.values.sum() * ts.population == pytest.approx(ts.values.sum() + clamped)


def test_missing_column(tmp_path):
    path = write(tmp_path, "date,count\n2020-03-01,5\n")
    with pytest.raises(SchemaError) as exc:
        ingest.load_csv(path, ColumnMap("date", "cases", population_override=10))
    assert exc.value.column == "cases"


@pytest.mark.parametrize("body, line", [
    ("date,cases\n2020-03-01,5\n2020-03-02,five\n", 3),
    ("date,cases\n2020-03-01,5\nyesterday,1\n", 3),
    ("date,cases\nnot a date,1\n", 2),
])
def test_row_errors_carry_line_numbers(tmp_path, body, line):
    path = write(tmp_path, body)
    with pytest.raises(RowError) as exc:
        ingest.load_csv(path, ColumnMap("date", "cases", population_override=10))
    assert exc.value.line == line


def test_empty_file(tmp_path):
    with pytest.raises(InputError):
        ingest.load_csv(write(tmp_path, ""), ColumnMap("date", "cases", population_override=1))


def test_column_map_needs_exactly_one_population_source():
    with pytest.raises(ParameterError):
        ColumnMap("d", "c")
    with pytest.raises(ParameterError):
        ColumnMap("d", "c", population_column="p", population_override=5)


def raw(values, population=100):
    return TimeSeries(dt.date(2020, 1, 1), values, population)


def test_to_probability_example():
    cumulative, density = ingest.to_probability(raw([10, 20]))
    assert density.values == pytest.approx([0.1, 0.2])
    assert cumulative.values == pytest.approx([0.1, 0.3])
    assert cumulative.kind is SeriesKind.CUMULATIVE_PROBABILITY
    assert density.kind is SeriesKind.DAILY_PROBABILITY_DENSITY


def test_to_probability_zeros():
    cumulative, density = ingest.to_probability(raw([0, 0, 0]))
    assert not cumulative.values.any() and not density.values.any()


def test_negative_correction_clamped():
    ts = raw([10, -5, 3])
    cumulative, density = ingest.to_probability(ts)
    assert density.values[1] == 0.0
    assert [r["day_index"] for r in ingest.cleaning_report(ts)] == [1]


def test_counts_exceeding_population():
    with pytest.raises(InputError):
        ingest.to_probability(raw([60, 60]))


@given(st.lists(st.integers(0, 10_000), min_size=1, max_size=200))
def test_cumulative_is_prefix_sum(counts):
    cumulative, density = ingest.to_probability(raw(counts, population=10 ** 7))
    rebuilt = np.cumsum(density.values)
    assert np.allclose(cumulative.values, rebuilt, rtol=1e-12, atol=0)
    assert density.values.sum() * 10 ** 7 == pytest.approx(sum(counts), rel=1e-12, abs=1e-9)


def test_time_series_invariants():
    with pytest.raises(InputError):
        TimeSeries(dt.date(2020, 1, 1), [], 1)
    with pytest.raises(InputError):
        TimeSeries(dt.date(2020, 1, 1), [1.0, np.nan], 1)
    with pytest.raises(InputError):
        TimeSeries(dt.date(2020, 1, 1), [0.2, 0.1], 1, SeriesKind.CUMULATIVE_PROBABILITY)
    with pytest.raises(InputError):
        TimeSeries(dt.date(2020, 1, 1), [0.5, 1.5], 1, SeriesKind.CUMULATIVE_PROBABILITY)
    with pytest.raises(InputError):
        TimeSeries(dt.date(2020, 1, 1), [-0.1], 1, SeriesKind.DAILY_PROBABILITY_DENSITY)
    ts = raw([1, 2])
    with pytest.raises(ValueError):
        ts.values[0] = 5


def test_smooth_constant():
    assert ingest.moving_average([1, 1, 1, 1, 1], 3) == pytest.approx([1] * 5)


def test_smooth_truncated_edges():
    assert ingest.moving_average([0, 3, 0], 3) == pytest.approx([1.5, 1.0, 1.5])


def test_smooth_window_longer_than_series():
    with pytest.raises(ParameterError):
        ingest.moving_average([0, 0, 7, 0, 0], 7)


def test_smooth_impulse_keeps_interior_mass():
    out = ingest.moving_average([0] * 6 + [7] + [0] * 6, 7)
    assert out.sum() == pytest.approx(7.0)
    assert out[3:10] == pytest.approx([1.0] * 7)


@pytest.mark.parametrize("window", [0, 2, -1, 4])
def test_smooth_rejects_even_or_nonpositive(window):
    with pytest.raises(ParameterError):
        ingest.moving_average([1, 2, 3, 4, 5], window)


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=100))
def test_window_one_is_identity(values):
    assert np.array_equal(ingest.moving_average(values, 1), np.asarray(values, float))


@given(st.lists(st.floats(0, 1e6), min_size=9, max_size=60), st.sampled_from([3, 5, 7, 9]))
def test_smooth_matches_loop_oracle(values, window):
    half = window // 2
    expected = [np.mean(values[max(i - half, 0):i + half + 1]) for i in range(len(values))]
    assert np.allclose(ingest.moving_average(values, window), expected, rtol=1e-12, atol=1e-9)


def test_smooth_keeps_metadata():
    ts = raw([1, 5, 1])
    out = ingest.smooth(ts, 3)
    assert len(out) == 3 and out.population == ts.population and out.kind is ts.kind


def test_series_round_trip(tmp_path):
    ts = TimeSeries(dt.date(2020, 2, 27), [0.0, 1 / 3, 0.5], 1234,
                    SeriesKind.CUMULATIVE_PROBABILITY, "Finland")
    path = write(tmp_path, ingest.format_series(ts, ["note: x"]), "s.tsv")
    back = ingest.read_series(path)
    assert np.array_equal(back.values, ts.values)
    assert (back.origin_date, back.population, back.kind, back.label) == \
        (ts.origin_date, 1234, SeriesKind.CUMULATIVE_PROBABILITY, "Finland")
    text = path.read_text()
    assert "# kind: cumulative_probability" in text
    assert "day_index\tdate\tvalue" in text


def test_series_file_without_kind(tmp_path):
    path = write(tmp_path, "day_index\tdate\tvalue\n0\t2020-01-01\t1\n", "s.tsv")
    with pytest.raises(SchemaError):
        ingest.read_series(path)
