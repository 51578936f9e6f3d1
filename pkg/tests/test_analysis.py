import numpy as np
import pytest
from hypothesis import given, strategies as st

from helixwaves import analysis, table1
from helixwaves.analysis import RatioRow, model_consistency, pearson, wave_ratios
from helixwaves.errors import InputError
from helixwaves.logistic import CompositeFit, LogisticWave

import oracles


def test_usa_ratios():
    rows = wave_ratios(table1.composite_from_table1("USA"), "USA")
    assert [r.wave_index for r in rows] == [2, 3]
    assert rows[0].time_ratio == pytest.approx(176 / 86, abs=1e-9)
    assert (round(rows[0].time_ratio, 2), round(rows[0].amplitude_ratio, 2)) == (2.05, 1.86)
    assert (round(rows[1].time_ratio, 2), round(rows[1].amplitude_ratio, 2)) == (3.67, 5.89)


def test_russia_ratio():
    (row,) = wave_ratios(table1.composite_from_table1("Russia"), "Russia")
    assert round(row.time_ratio, 2) == 2.73 and round(row.amplitude_ratio, 2) == 2.73


def test_identical_waves():
    w = LogisticWave(0.01, 100, 0.05)
    (row,) = wave_ratios(CompositeFit((w, w)))
    assert (row.time_ratio, row.amplitude_ratio) == (1.0, 1.0)


def test_single_wave_gives_no_rows():
    assert wave_ratios(CompositeFit((LogisticWave(0.01, 100, 0.05),))) == []


def test_first_peak_must_be_after_origin():
    early = LogisticWave(0.01, 1.0, 0.05)       # peaks at day 0
    with pytest.raises(InputError):
        wave_ratios(CompositeFit((early, LogisticWave(0.01, 100, 0.05))))


def test_ratios_match_independent_recomputation():
    rows = [r for c in table1.COUNTRIES
            for r in wave_ratios(table1.composite_from_table1(c), c)]
    expected = oracles.table2_from_table1()
    assert len(rows) == len(expected) == 14
    for row, (country, tr, ar) in zip(rows, expected):
        assert row.country == country
        assert row.time_ratio == pytest.approx(tr, rel=1e-12)
        assert row.amplitude_ratio == pytest.approx(ar, rel=1e-12)


@given(st.floats(0.1, 10), st.floats(0.1, 10))
def test_ratios_invariant_under_uniform_rescaling(amp_scale, time_scale):
    fit = table1.composite_from_table1("Israel")
    # A -> lambda A and time stretched by s (C -> C/s, dt -> s dt) moves every peak to s T
    scaled = CompositeFit(tuple(
        LogisticWave(w.A * amp_scale, w.B, w.C / time_scale, w.dt_shift * time_scale)
        for w in fit.waves))
    a = wave_ratios(fit)
    b = wave_ratios(scaled)
    for r, s in zip(a, b):
        assert s.time_ratio == pytest.approx(r.time_ratio, rel=1e-9)
        assert s.amplitude_ratio == pytest.approx(r.amplitude_ratio, rel=1e-9)


def test_pearson_line_and_antiline():
    xs = np.arange(1.0, 8.0)
    assert pearson(zip(xs, 2 * xs)) == pytest.approx(1.0)
    assert pearson(zip(xs, -xs)) == pytest.approx(-1.0)


def test_pearson_zero_variance():
    with pytest.raises(InputError):
        pearson([(1, 2), (1, 3)])
    with pytest.raises(InputError):
        pearson([(1, 2)])


pairs = st.lists(st.tuples(st.floats(-100, 100), st.floats(-100, 100)), min_size=3, max_size=30)


def spread(ps):
    a = np.array(ps)
    return a[:, 0].std() > 1e-3 and a[:, 1].std() > 1e-3


@given(pairs.filter(spread), st.randoms())
def test_pearson_order_independent(ps, rnd):
    shuffled = list(ps)
    rnd.shuffle(shuffled)
    assert pearson(shuffled) == pytest.approx(pearson(ps), abs=1e-9)


@given(pairs.filter(spread), st.floats(0.1, 10), st.floats(-50, 50))
def test_pearson_affine_invariance(ps, scale, shift):
    moved = [(scale * x + shift, y) for x, y in ps]
    assert pearson(moved) == pytest.approx(pearson(ps), abs=1e-7)


@given(pairs.filter(spread))
def test_pearson_matches_oracle(ps):
    xs, ys = zip(*ps)
    assert pearson(ps) == pytest.approx(oracles.pearson(xs, ys), abs=1e-9)


def reference_row(country, time_ratio, amplitude_ratio):
    return RatioRow(country, 2, time_ratio, amplitude_ratio)


def test_consistency_examples():
    rows = [reference_row(*r) for r in oracles.TABLE2]
    report = model_consistency(rows)
    by_country = {}
    for d in report.deviations:
        by_country.setdefault(d.row.country, []).append(d)
    assert by_country["Russia"][0].absolute == 0
    assert by_country["Belgium"][0].absolute == pytest.approx(0.09)
    israel4 = by_country["Israel"][2]
    assert israel4.absolute == pytest.approx(4.81) and israel4.flagged
    uk3 = by_country["UK"][1]
    assert uk3.flagged and uk3.relative == pytest.approx((11.0 - 6.22) / 6.22)
    assert not by_country["Russia"][0].flagged
    assert report.max_absolute == pytest.approx(4.81)
    assert {r.country for r in report.flagged} == {"USA", "UK", "Japan", "Israel"}


def test_consistency_needs_rows():
    with pytest.raises(InputError):
        model_consistency([])


def test_markdown_tables():
    rows = [r for c in table1.COUNTRIES for r in wave_ratios(table1.composite_from_table1(c), c)]
    md = analysis.table2_markdown(analysis.correlation_report(rows))
    assert md.count("\n| ") == 14     # one line per ratio row
    assert "| Russia | 2.73 | 2.73 |" in md
    t1 = analysis.table1_markdown({c: table1.composite_from_table1(c) for c in table1.COUNTRIES})
    assert "| T_4 | - | - | - | - | - | - | - | 319 |" in t1
