"""Machine-readable tables and the 17-panel stacked-bar figure.

The figure has one panel per SDG: a header bar showing the share of
documents mentioning the SDG, then nine horizontal bars (one per PB)
normalized to the busiest cell of that panel. Each bar stacks green
(synergy), beige (neutral), and red (trade-off) segments; darker fills
inside the green and red segments mark validated TS and TT, with a medium
shade for DP and DN.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

from .analytics import (
    InteractionMatrix,
    cell_proportions,
    global_proportions,
    goal_tradeoff_shares,
    normalize_bars,
    presence_share,
)
from .errors import EmptyMatrix, EmptyPanel
from .taxonomy import Category, Direction, PB_COUNT, ReportBucket, SDG_COUNT

STYLE = {
    "panel_cols": 4,
    "panel_rows": 5,
    "panel_w": 250,
    "panel_h": 180,
    "margin": 14,
    "label_w": 46,
    "bar_h": 11,
    "bar_gap": 4,
    "font": "Helvetica, Arial, sans-serif",
    "synergy_light": "#a8d5a2",
    "synergy_mid": "#5aa85a",
    "synergy_dark": "#1e6b1e",
    "neutral": "#e6dcc3",
    "tradeoff_light": "#f2b3ac",
    "tradeoff_mid": "#e06a5e",
    "tradeoff_dark": "#9c1f10",
    "presence": "#4a6fa5",
    "text": "#222222",
}

CSV_HEADER = [
    "sdg", "pb", "total",
    "synergy", "neutral", "tradeoff",
    "ts", "dp", "generic_positive",
    "tt", "dn", "generic_negative",
    "sdg_to_pb", "pb_to_sdg",
]


@dataclass(frozen=True)
class BarSpec:
    pb: int
    length: float
    link_count: int
    synergy_share: float
    neutral_share: float
    tradeoff_share: float
    ts_share: float
    dp_share: float
    tt_share: float
    dn_share: float


@dataclass(frozen=True)
class PanelSpec:
    sdg: int
    doc_share: float
    bars: tuple[BarSpec, ...]


@dataclass(frozen=True)
class FigureSpec:
    panels: tuple[PanelSpec, ...]


def figure_spec(m: InteractionMatrix) -> FigureSpec:
    if m.total_records == 0:
        raise EmptyMatrix("cannot build a figure from an empty matrix")
    panels = []
    for sdg in range(1, SDG_COUNT + 1):
        try:
            lengths = normalize_bars(m, sdg)
        except EmptyPanel:
            lengths = [0.0] * PB_COUNT
        bars = []
        for pb in range(1, PB_COUNT + 1):
            shares = cell_proportions(m, sdg, pb)
            if shares is None:
                bars.append(BarSpec(pb, 0.0, 0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0))
                continue
            bars.append(
                BarSpec(
                    pb=pb,
                    length=lengths[pb - 1],
                    link_count=shares.total,
                    synergy_share=shares.synergy,
                    neutral_share=shares.neutral,
                    tradeoff_share=shares.tradeoff,
                    ts_share=shares.bucket_shares[ReportBucket.TS],
                    dp_share=shares.bucket_shares[ReportBucket.DP],
                    tt_share=shares.bucket_shares[ReportBucket.TT],
                    dn_share=shares.bucket_shares[ReportBucket.DN],
                )
            )
        panels.append(
            PanelSpec(sdg=sdg, doc_share=presence_share(m, "SDG", sdg), bars=tuple(bars))
        )
    return FigureSpec(panels=tuple(panels))


def _f(x: float) -> str:
    return f"{x:.2f}"


def render_svg(spec: FigureSpec) -> bytes:
    s = STYLE
    width = s["panel_cols"] * s["panel_w"] + 2 * s["margin"]
    height = s["panel_rows"] * s["panel_h"] + 2 * s["margin"]
    out = io.StringIO()
    out.write('<?xml version="1.0" encoding="UTF-8"?>\n')
    out.write(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="{s["font"]}">\n'
    )
    out.write(f'<rect width="{width}" height="{height}" fill="#ffffff"/>\n')

    for idx, panel in enumerate(spec.panels):
        col = idx % s["panel_cols"]
        row = idx // s["panel_cols"]
        px = s["margin"] + col * s["panel_w"]
        py = s["margin"] + row * s["panel_h"]
        bar_x = px + s["label_w"]
        bar_w = s["panel_w"] - s["label_w"] - 16
        out.write(f'<g class="panel" id="sdg-{panel.sdg}" transform="translate({px},{py})">\n')
        out.write(
            f'<text x="0" y="12" font-size="11" font-weight="bold" '
            f'fill="{s["text"]}">SDG {panel.sdg}</text>\n'
        )
        # header bar: share of documents involving this SDG
        hb_y = 18
        out.write(
            f'<rect class="presence-track" x="{s["label_w"]}" y="{hb_y}" width="{bar_w}" '
            f'height="6" fill="#eeeeee"/>\n'
        )
        out.write(
            f'<rect class="presence" x="{s["label_w"]}" y="{hb_y}" '
            f'width="{_f(panel.doc_share * bar_w)}" height="6" fill="{s["presence"]}"/>\n'
        )
        out.write(
            f'<text x="{s["label_w"] + bar_w + 2}" y="{hb_y + 6}" font-size="7" '
            f'fill="{s["text"]}">{panel.doc_share * 100:.1f}%</text>\n'
        )
        y = hb_y + 12
        for bar in panel.bars:
            out.write(f'<g class="bar" id="sdg-{panel.sdg}-pb-{bar.pb}">\n')
            out.write(
                f'<text x="0" y="{y + s["bar_h"] - 2}" font-size="8" '
                f'fill="{s["text"]}">PB{bar.pb}</text>\n'
            )
            out.write(
                f'<text x="26" y="{y + s["bar_h"] - 2}" font-size="8" '
                f'fill="{s["text"]}" text-anchor="start">{bar.link_count}</text>\n'
            )
            total_w = bar.length * bar_w
            if total_w > 0:
                x = s["label_w"]
                syn_w = bar.synergy_share * total_w
                neu_w = bar.neutral_share * total_w
                trd_w = bar.tradeoff_share * total_w
                ts_w = bar.ts_share * total_w
                dp_w = bar.dp_share * total_w
                tt_w = bar.tt_share * total_w
                dn_w = bar.dn_share * total_w
                h = s["bar_h"]
                if syn_w > 0:
                    out.write(
                        f'<rect class="seg-synergy" x="{_f(x)}" y="{y}" width="{_f(syn_w)}" '
                        f'height="{h}" fill="{s["synergy_light"]}"/>\n'
                    )
                    if ts_w > 0:
                        out.write(
                            f'<rect class="overlay-ts" x="{_f(x)}" y="{y}" width="{_f(ts_w)}" '
                            f'height="{h}" fill="{s["synergy_dark"]}"/>\n'
                        )
                    if dp_w > 0:
                        out.write(
                            f'<rect class="overlay-dp" x="{_f(x + ts_w)}" y="{y}" '
                            f'width="{_f(dp_w)}" height="{h}" fill="{s["synergy_mid"]}"/>\n'
                        )
                if neu_w > 0:
                    out.write(
                        f'<rect class="seg-neutral" x="{_f(x + syn_w)}" y="{y}" '
                        f'width="{_f(neu_w)}" height="{h}" fill="{s["neutral"]}"/>\n'
                    )
                if trd_w > 0:
                    tx = x + syn_w + neu_w
                    out.write(
                        f'<rect class="seg-tradeoff" x="{_f(tx)}" y="{y}" width="{_f(trd_w)}" '
                        f'height="{h}" fill="{s["tradeoff_light"]}"/>\n'
                    )
                    if tt_w > 0:
                        out.write(
                            f'<rect class="overlay-tt" x="{_f(tx)}" y="{y}" width="{_f(tt_w)}" '
                            f'height="{h}" fill="{s["tradeoff_dark"]}"/>\n'
                        )
                    if dn_w > 0:
                        out.write(
                            f'<rect class="overlay-dn" x="{_f(tx + tt_w)}" y="{y}" '
                            f'width="{_f(dn_w)}" height="{h}" fill="{s["tradeoff_mid"]}"/>\n'
                        )
            out.write("</g>\n")
            y += s["bar_h"] + s["bar_gap"]
        out.write("</g>\n")

    out.write("</svg>\n")
    return out.getvalue().encode("utf-8")


def emit_matrix_csv(m: InteractionMatrix) -> str:
    """One row per (SDG, PB) cell, 153 rows, fixed header."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for sdg in range(1, SDG_COUNT + 1):
        for pb in range(1, PB_COUNT + 1):
            dcell = m.direction_counts.get((sdg, pb), {})
            writer.writerow(
                [
                    sdg,
                    pb,
                    m.cell_total(sdg, pb),
                    m.category_count(sdg, pb, Category.SYNERGY),
                    m.category_count(sdg, pb, Category.NEUTRAL),
                    m.category_count(sdg, pb, Category.TRADEOFF),
                    m.cell_count(sdg, pb, ReportBucket.TS),
                    m.cell_count(sdg, pb, ReportBucket.DP),
                    m.cell_count(sdg, pb, ReportBucket.GENERIC_POSITIVE),
                    m.cell_count(sdg, pb, ReportBucket.TT),
                    m.cell_count(sdg, pb, ReportBucket.DN),
                    m.cell_count(sdg, pb, ReportBucket.GENERIC_NEGATIVE),
                    dcell.get(Direction.SDG_TO_PB, 0),
                    dcell.get(Direction.PB_TO_SDG, 0),
                ]
            )
    return buf.getvalue()


def _display(x: float) -> str:
    return f"{x * 100:.1f}%"


def emit_summary_json(m: InteractionMatrix) -> str:
    """Full-precision statistics plus one-decimal display strings."""
    summary: dict = {
        "total_docs": m.total_docs,
        "total_records": m.total_records,
    }
    if m.total_records > 0:
        cat_shares, bucket_shares = global_proportions(m)
        summary["global"] = {
            "category_shares": {c.value: cat_shares[c] for c in Category},
            "category_display": {c.value: _display(cat_shares[c]) for c in Category},
            "bucket_shares": {b.value: bucket_shares[b] for b in ReportBucket},
            "bucket_display": {b.value: _display(bucket_shares[b]) for b in ReportBucket},
        }
    directed = sum(sum(d.values()) for d in m.direction_counts.values())
    if directed > 0:
        pb_driven = sum(
            d.get(Direction.PB_TO_SDG, 0) for d in m.direction_counts.values()
        )
        share = pb_driven / directed
        summary["directionality"] = {
            "directed_records": directed,
            "pb_to_sdg_share": share,
            "pb_to_sdg_display": _display(share),
        }
    if m.total_docs > 0:
        summary["presence"] = {
            "sdg": {
                str(i): {
                    "share": presence_share(m, "SDG", i),
                    "display": _display(presence_share(m, "SDG", i)),
                }
                for i in range(1, SDG_COUNT + 1)
            },
            "pb": {
                str(i): {
                    "share": presence_share(m, "PB", i),
                    "display": _display(presence_share(m, "PB", i)),
                }
                for i in range(1, PB_COUNT + 1)
            },
        }
    per_sdg = {}
    for i in range(1, SDG_COUNT + 1):
        shares = goal_tradeoff_shares(m, "SDG", i)
        if shares is not None:
            shares = dict(shares)
            shares["tradeoff_display_incl_dn"] = _display(shares["tradeoff_share_incl_dn"])
            shares["tradeoff_display_excl_dn"] = _display(shares["tradeoff_share_excl_dn"])
            per_sdg[str(i)] = shares
    per_pb = {}
    for i in range(1, PB_COUNT + 1):
        shares = goal_tradeoff_shares(m, "PB", i)
        if shares is not None:
            shares = dict(shares)
            shares["tradeoff_display_incl_dn"] = _display(shares["tradeoff_share_incl_dn"])
            shares["tradeoff_display_excl_dn"] = _display(shares["tradeoff_share_excl_dn"])
            per_pb[str(i)] = shares
    summary["per_sdg"] = per_sdg
    summary["per_pb"] = per_pb
    return json.dumps(summary, sort_keys=True, indent=2) + "\n"
