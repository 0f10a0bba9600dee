import csv
import io
import json
from xml.etree import ElementTree

import pytest

from sdgpb.analytics import build_matrix, matrix_from_json, matrix_to_json
from sdgpb.errors import EmptyMatrix
from sdgpb.reporting import (
    FigureSpec,
    emit_matrix_csv,
    emit_summary_json,
    figure_spec,
    render_svg,
)
from sdgpb.taxonomy import Direction, ReportBucket

from test_analytics import cell_records, rec


def sample_matrix():
    records = []
    records += cell_records(2, 6, {ReportBucket.TT: 30, ReportBucket.DN: 10,
                                   ReportBucket.TS: 15, ReportBucket.NEUTRAL: 5})
    records += cell_records(2, 1, {ReportBucket.TS: 12, ReportBucket.DP: 6,
                                   ReportBucket.GENERIC_POSITIVE: 2})
    records += cell_records(13, 6, {ReportBucket.TT: 8, ReportBucket.NEUTRAL: 8})
    records += cell_records(14, 2, {ReportBucket.DN: 39, ReportBucket.TT: 1})
    return build_matrix(records, 150)


def test_figure_spec_structure():
    spec = figure_spec(sample_matrix())
    assert len(spec.panels) == 17
    for panel in spec.panels:
        assert len(panel.bars) == 9
        assert 0.0 <= panel.doc_share <= 1.0


def test_figure_spec_empty_cell_bar():
    spec = figure_spec(sample_matrix())
    bar = spec.panels[0].bars[0]  # SDG1 x PB1 never linked
    assert bar.length == 0.0 and bar.link_count == 0


def test_figure_spec_nonempty_bar_shares_sum_to_one():
    spec = figure_spec(sample_matrix())
    for panel in spec.panels:
        for bar in panel.bars:
            if bar.link_count > 0:
                total = bar.synergy_share + bar.neutral_share + bar.tradeoff_share
                assert total == pytest.approx(1.0, abs=1e-9)


def test_figure_spec_overlays_within_parent_segments():
    spec = figure_spec(sample_matrix())
    for panel in spec.panels:
        for bar in panel.bars:
            assert bar.ts_share + bar.dp_share <= bar.synergy_share + 1e-12
            assert bar.tt_share + bar.dn_share <= bar.tradeoff_share + 1e-12


def test_figure_spec_max_bar_is_one():
    spec = figure_spec(sample_matrix())
    for panel in spec.panels:
        lengths = [bar.length for bar in panel.bars]
        if any(bar.link_count for bar in panel.bars):
            assert max(lengths) == 1.0


def test_figure_spec_empty_matrix():
    with pytest.raises(EmptyMatrix):
        figure_spec(build_matrix([], 5))


def test_svg_well_formed_with_panel_and_bar_groups():
    svg = render_svg(figure_spec(sample_matrix()))
    root = ElementTree.fromstring(svg)
    ns = "{http://www.w3.org/2000/svg}"
    panels = [g for g in root.iter(f"{ns}g") if g.get("class") == "panel"]
    bars = [g for g in root.iter(f"{ns}g") if g.get("class") == "bar"]
    assert len(panels) == 17
    assert len(bars) == 153


def test_svg_deterministic_bytes():
    m = sample_matrix()
    assert render_svg(figure_spec(m)) == render_svg(figure_spec(m))


def test_dark_overlay_width_is_product_of_shares():
    # one cell: synergy share 0.692, TS = 88.8% of synergies
    records = cell_records(12, 6, {ReportBucket.TS: 6144, ReportBucket.DP: 775,
                                   ReportBucket.GENERIC_POSITIVE: 1,
                                   ReportBucket.TT: 1540, ReportBucket.NEUTRAL: 1540})
    m = build_matrix(records, 10000)
    spec = figure_spec(m)
    bar = spec.panels[11].bars[5]
    assert bar.synergy_share == pytest.approx(0.692, abs=1e-4)
    assert bar.ts_share / bar.synergy_share == pytest.approx(0.888, abs=1e-3)
    # rendered dark overlay width = ts_share x bar length in px
    svg = render_svg(spec).decode()
    ts_rects = [line for line in svg.splitlines() if 'class="overlay-ts"' in line]
    assert ts_rects  # dark overlay present for the TS portion


def test_overlay_never_exceeds_segment_in_svg():
    svg = render_svg(figure_spec(sample_matrix())).decode()

    def widths(cls):
        out = []
        for line in svg.splitlines():
            if f'class="{cls}"' in line:
                w = float(line.split('width="')[1].split('"')[0])
                out.append(w)
        return out

    assert sum(widths("overlay-ts")) <= sum(widths("seg-synergy")) + 1e-6
    assert sum(widths("overlay-tt")) <= sum(widths("seg-tradeoff")) + 1e-6


def test_csv_row_count_and_header():
    text = emit_matrix_csv(sample_matrix())
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0][:3] == ["sdg", "pb", "total"]
    assert len(rows) == 154  # header + 17*9


def test_csv_empty_matrix_zeros():
    text = emit_matrix_csv(build_matrix([], 0))
    rows = list(csv.reader(io.StringIO(text)))
    assert len(rows) == 154
    assert all(r[2] == "0" for r in rows[1:])


def test_csv_cell_values():
    text = emit_matrix_csv(sample_matrix())
    rows = {(r[0], r[1]): r for r in list(csv.reader(io.StringIO(text)))[1:]}
    row = rows[("2", "6")]
    header_idx = {name: i for i, name in enumerate(
        ["sdg", "pb", "total", "synergy", "neutral", "tradeoff",
         "ts", "dp", "generic_positive", "tt", "dn", "generic_negative",
         "sdg_to_pb", "pb_to_sdg"])}
    assert row[header_idx["total"]] == "60"
    assert row[header_idx["tt"]] == "30"
    assert row[header_idx["dn"]] == "10"
    assert row[header_idx["ts"]] == "15"
    assert row[header_idx["neutral"]] == "5"


def test_summary_json_round_trip_bit_exact():
    m = sample_matrix()
    summary = json.loads(emit_summary_json(m))
    # reloading and recomputing from the serialized matrix reproduces stats
    m2 = matrix_from_json(matrix_to_json(m))
    assert json.loads(emit_summary_json(m2)) == summary
    # display strings use one decimal
    assert summary["global"]["category_display"]["trade-off"].endswith("%")
    shares = summary["global"]["category_shares"]
    assert shares["synergy"] + shares["neutral"] + shares["trade-off"] == pytest.approx(1.0)


def test_summary_reports_both_tradeoff_columns():
    summary = json.loads(emit_summary_json(sample_matrix()))
    pb6 = summary["per_pb"]["6"]
    assert pb6["tradeoff_share_incl_dn"] > pb6["tradeoff_share_excl_dn"]


def test_reporting_pure_functions_of_matrix():
    m = sample_matrix()
    assert emit_matrix_csv(m) == emit_matrix_csv(m)
    assert emit_summary_json(m) == emit_summary_json(m)
