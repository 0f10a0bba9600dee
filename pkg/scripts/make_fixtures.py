#!/usr/bin/env python3
"""Regenerate the bundled fixture corpus, recorded LLM cache, and goldens.

Run from the repository root:

    python3 scripts/make_fixtures.py

Produces fixtures/corpus/*.tei.xml, fixtures/manifest.jsonl,
fixtures/llm_cache/cache.jsonl, and fixtures/golden/*. Everything is
deterministic given the seeds below, so re-running must be a no-op unless
prompts or the scripted backend change.
"""

from __future__ import annotations

import json
import random
import shutil
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from sdgpb import analytics, corpus, pipeline, reporting
from sdgpb.gateway import CACHE_FILE, CACHE_SUBDIR, Gateway, RecordingBackend
from sdgpb.taxonomy import load_catalog
from sdgpb.testing import ScriptedBackend

N_DOCS = 32
CORPUS_SEED = 20240501
BACKEND_SEED = 0

TOPICS = [
    "irrigation efficiency programs in semi-arid farmland",
    "coral reef monitoring under rising surface temperatures",
    "biofuel feedstock expansion on former pastureland",
    "urban heat mitigation through street tree planting",
    "fertilizer runoff controls in river catchments",
    "community fisheries management in coastal lagoons",
    "reforestation incentives for smallholder farmers",
    "industrial decarbonization in cement production",
    "groundwater recharge schemes for drinking water supply",
    "protected area expansion and pastoral livelihoods",
    "renewable electrification of rural health clinics",
    "sustainable tourism certification in mountain regions",
]

SENTENCE_POOL = [
    "Field measurements over three growing seasons showed a {pct} percent change in soil organic carbon across the treatment plots.",
    "The intervention reduced household water consumption by {pct} percent while crop yields remained stable.",
    "Satellite imagery documented the conversion of {pct} square kilometres of woodland to cropland during the study period.",
    "Policy enforcement after 2018 coincided with a measurable decline of {pct} percent in nutrient loading downstream.",
    "Survey respondents in {n} villages reported improved access to clean energy following the subsidy program.",
    "Acidification proxies in sediment cores indicate a steady pH decline of {pct} hundredths per decade at the sampling sites.",
    "The certification scheme covered {n} producers and reduced reported agrochemical use by {pct} percent.",
    "Model projections suggest that continued expansion would breach regional land-use thresholds within {n} years.",
    "Employment in the restoration program rose to {n} full-time positions, concentrated among smallholder households.",
    "Monitoring buoys recorded {n} marine heatwave days per year, twice the baseline frequency.",
    "The levy funded {n} kilometres of riparian buffer strips, with documented reductions in sediment transport.",
    "Interviews revealed that {n} percent of displaced herders received compensation under the new land statute.",
]

TEI_TEMPLATE = """<?xml version="1.0" encoding="UTF-8"?>
<TEI xmlns="http://www.tei-c.org/ns/1.0">
 <teiHeader>
  <fileDesc>
   <titleStmt><title>{title}</title></titleStmt>
  </fileDesc>
 </teiHeader>
 <text>
  <body>
   <div type="introduction"><head>Introduction</head><p>{intro}</p></div>
   <div><head>Results</head><p>{results}</p></div>
   <figure><head>Figure 1</head><figDesc>SENTINEL_FIGURE_{i:03d} stacked bars of observed changes.</figDesc></figure>
   <div><head>Discussion</head><p>{discussion}</p></div>
   <div type="acknowledgement"><head>Acknowledgements</head><p>SENTINEL_ACK_{i:03d} The authors thank the field teams and funding agencies.</p></div>
  </body>
  <back>
   <div type="references"><listBibl><bibl>SENTINEL_BIB_{i:03d} Placeholder citation list.</bibl></listBibl></div>
  </back>
 </text>
</TEI>
"""


def make_sentence(rng: random.Random) -> str:
    return rng.choice(SENTENCE_POOL).format(pct=rng.randint(3, 60), n=rng.randint(4, 240))


def make_corpus(fixtures: Path) -> None:
    rng = random.Random(CORPUS_SEED)
    corpus_dir = fixtures / "corpus"
    corpus_dir.mkdir(parents=True, exist_ok=True)
    manifest = []
    for i in range(N_DOCS):
        topic = TOPICS[i % len(TOPICS)]
        title = f"A field study of {topic} (case {i:03d})"
        intro = " ".join(make_sentence(rng) for _ in range(rng.randint(3, 5)))
        results = " ".join(make_sentence(rng) for _ in range(rng.randint(4, 7)))
        discussion = " ".join(make_sentence(rng) for _ in range(rng.randint(3, 5)))
        xml = TEI_TEMPLATE.format(title=title, intro=intro, results=results,
                                  discussion=discussion, i=i)
        (corpus_dir / f"doc-{i:03d}.tei.xml").write_text(xml, "utf-8")
        manifest.append(corpus.WorkRecord(f"doc-{i:03d}", title, 2020 + (i % 5)))
    corpus.write_manifest(manifest, fixtures / "manifest.jsonl")


def record_and_golden(fixtures: Path) -> None:
    docs = corpus.ingest_directory(fixtures / "corpus")
    with tempfile.TemporaryDirectory() as tmp:
        run_dir = Path(tmp)
        backend = RecordingBackend(ScriptedBackend(seed=BACKEND_SEED), run_dir)
        runner = pipeline.PipelineRunner(
            gateway=Gateway(backend),
            checkpoints=pipeline.CheckpointStore(run_dir),
            catalog=load_catalog(),
            templates=pipeline.PromptTemplates(),
        )
        results = runner.run(docs)
        golden = fixtures / "golden"
        golden.mkdir(parents=True, exist_ok=True)
        pipeline.write_results(results, golden / "results.jsonl")

        records = analytics.flatten(results)
        total_docs = sum(1 for r in results if r.status == "complete")
        matrix = analytics.build_matrix(records, total_docs)
        (golden / "matrix.json").write_text(
            json.dumps(analytics.matrix_to_json(matrix), sort_keys=True, indent=2) + "\n", "utf-8"
        )
        (golden / "summary.json").write_text(reporting.emit_summary_json(matrix), "utf-8")
        (golden / "matrix.csv").write_text(reporting.emit_matrix_csv(matrix), "utf-8")
        (golden / "figure1.svg").write_bytes(reporting.render_svg(reporting.figure_spec(matrix)))

        cache_dst = fixtures / CACHE_SUBDIR
        cache_dst.mkdir(parents=True, exist_ok=True)
        shutil.copy(run_dir / CACHE_SUBDIR / CACHE_FILE, cache_dst / CACHE_FILE)

        print(f"{len(docs)} docs, {matrix.total_records} records, "
              f"{total_docs} complete; cache and goldens written to {fixtures}")


def main() -> None:
    fixtures = Path(__file__).resolve().parent.parent / "fixtures"
    make_corpus(fixtures)
    record_and_golden(fixtures)


if __name__ == "__main__":
    main()
