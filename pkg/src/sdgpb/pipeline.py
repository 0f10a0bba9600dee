"""Five-stage document pipeline.

Stage 1 allocates SDGs, stage 2 allocates PBs, stage 3 classifies every
(SDG, PB) pair as synergy/trade-off/neutral with a verbatim evidence
quote, stage 4 assigns a direction to every non-neutral pair, and stage 5
refines synergies and trade-offs into validated subcategories. Stages 3-5
batch pairs (default cap 20 per request). A checkpoint is written after
each completed stage so interrupted runs resume without re-querying.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import CleanDocument, estimate_tokens
from .errors import (
    IdOutOfRange,
    IllegalRefinement,
    OverContext,
    PairSetMismatch,
    SchemaError,
    TemplateVersionMismatch,
    UnknownCategory,
    UnknownDirection,
)
from .gateway import Gateway, PromptRequest
from .taxonomy import (
    Catalog,
    Category,
    Direction,
    PB_COUNT,
    RefinedLabel,
    SDG_COUNT,
    refined_labels_for,
)

logger = logging.getLogger(__name__)

DEFAULT_BATCH_CAP = 20
DEFAULT_CONTEXT_BUDGET = 1_000_000

# generous output budgets; pair stages reason at length per pair
DEFAULT_OUTPUT_BUDGETS = {1: 4096, 2: 4096, 3: 65536, 4: 16384, 5: 65536}

_TEMPLATE_NAMES = (
    "sdg_allocation.txt",
    "pb_allocation.txt",
    "relationship.txt",
    "causality.txt",
    "reasoner.txt",
)

_SYSTEM_TEXT = (
    "You classify interactions between Sustainable Development Goals and "
    "Planetary Boundaries in scientific articles. You answer only with the "
    "requested JSON object."
)

_REPAIR_SUFFIX = (
    "\n\nYour previous reply was not valid. Re-emit valid JSON only, "
    "exactly matching the required schema, with no surrounding text."
)


class PromptTemplates:
    """Versioned stage templates; the version hash keys replay and resume."""

    def __init__(self, template_dir: str | Path | None = None):
        self._texts: dict[str, str] = {}
        if template_dir is None:
            for name in _TEMPLATE_NAMES:
                self._texts[name] = resources.files("sdgpb.templates").joinpath(name).read_text("utf-8")
        else:
            for name in _TEMPLATE_NAMES:
                self._texts[name] = (Path(template_dir) / name).read_text("utf-8")
        h = hashlib.sha256()
        for name in _TEMPLATE_NAMES:
            h.update(name.encode())
            h.update(b"\x00")
            h.update(self._texts[name].encode())
        self.version = h.hexdigest()[:16]

    def text(self, name: str) -> str:
        return self._texts[name]


@dataclass(frozen=True)
class PairClassification:
    sdg: int
    pb: int
    category: Category
    refined: RefinedLabel | None = None
    direction: Direction | None = None
    justification: str = ""
    evidence_quote: str = ""

    def to_json(self) -> dict:
        return {
            "sdg": self.sdg,
            "pb": self.pb,
            "category": self.category.value,
            "refined": self.refined.value if self.refined else None,
            "direction": self.direction.value if self.direction else None,
            "justification": self.justification,
            "evidence_quote": self.evidence_quote,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PairClassification":
        return cls(
            sdg=obj["sdg"],
            pb=obj["pb"],
            category=Category(obj["category"]),
            refined=RefinedLabel(obj["refined"]) if obj.get("refined") else None,
            direction=Direction(obj["direction"]) if obj.get("direction") else None,
            justification=obj.get("justification", ""),
            evidence_quote=obj.get("evidence_quote", ""),
        )


@dataclass(frozen=True)
class DocumentResult:
    doc_id: str
    sdgs: frozenset[int]
    pbs: frozenset[int]
    pairs: tuple[PairClassification, ...]
    status: str  # "complete" | "failed" | "skipped"
    template_version: str
    failed_stage: int | None = None
    reason: str = ""

    def to_json(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "sdgs": sorted(self.sdgs),
            "pbs": sorted(self.pbs),
            "pairs": [p.to_json() for p in self.pairs],
            "status": self.status,
            "failed_stage": self.failed_stage,
            "reason": self.reason,
            "template_version": self.template_version,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DocumentResult":
        return cls(
            doc_id=obj["doc_id"],
            sdgs=frozenset(obj["sdgs"]),
            pbs=frozenset(obj["pbs"]),
            pairs=tuple(PairClassification.from_json(p) for p in obj["pairs"]),
            status=obj["status"],
            template_version=obj["template_version"],
            failed_stage=obj.get("failed_stage"),
            reason=obj.get("reason", ""),
        )


# --------------------------------------------------------------------------
# Prompt construction


def _definition_block(catalog: Catalog, axis: str, ids: Sequence[int] | None = None) -> str:
    lines = []
    if axis == "SDG":
        chosen = ids if ids is not None else catalog.sdg_ids
        for i in chosen:
            d = catalog.sdg_descriptor(i)
            lines.append(f"SDG {d.id} ({d.short_name}): {d.definition}")
    else:
        chosen = ids if ids is not None else catalog.pb_ids
        for i in chosen:
            d = catalog.pb_descriptor(i)
            lines.append(f"PB {d.id} ({d.short_name}): {d.definition}")
    return "\n".join(lines)


def _guard_context(doc: CleanDocument, rendered: str, budget: int) -> None:
    if estimate_tokens(rendered) > budget:
        raise OverContext(
            f"{doc.doc_id}: prompt estimate {estimate_tokens(rendered)} tokens "
            f"exceeds context budget {budget}"
        )


def _pairs_json(batch: Sequence[tuple[int, int]]) -> str:
    return json.dumps([list(p) for p in batch], separators=(",", ":"))


def build_allocation_prompt(
    doc: CleanDocument,
    axis: str,
    catalog: Catalog,
    templates: PromptTemplates,
    context_budget: int = DEFAULT_CONTEXT_BUDGET,
    output_budgets: dict[int, int] = DEFAULT_OUTPUT_BUDGETS,
) -> PromptRequest:
    if axis not in ("SDG", "PB"):
        raise ValueError(f"axis must be 'SDG' or 'PB', got {axis!r}")
    stage = 1 if axis == "SDG" else 2
    name = "sdg_allocation.txt" if axis == "SDG" else "pb_allocation.txt"
    rendered = templates.text(name).format(
        definitions=_definition_block(catalog, axis),
        body_text=doc.body_text,
    )
    _guard_context(doc, rendered, context_budget)
    return PromptRequest(
        stage=stage,
        doc_id=doc.doc_id,
        system_text=_SYSTEM_TEXT,
        user_text=rendered,
        max_output_tokens=output_budgets[stage],
    )


def build_relationship_prompt(
    doc: CleanDocument,
    batch: Sequence[tuple[int, int]],
    catalog: Catalog,
    templates: PromptTemplates,
    context_budget: int = DEFAULT_CONTEXT_BUDGET,
    output_budgets: dict[int, int] = DEFAULT_OUTPUT_BUDGETS,
) -> PromptRequest:
    if not batch:
        raise ValueError("batch must be non-empty")
    sdg_ids = sorted({s for s, _ in batch})
    pb_ids = sorted({p for _, p in batch})
    rendered = templates.text("relationship.txt").format(
        sdg_definitions=_definition_block(catalog, "SDG", sdg_ids),
        pb_definitions=_definition_block(catalog, "PB", pb_ids),
        pairs_json=_pairs_json(batch),
        body_text=doc.body_text,
    )
    _guard_context(doc, rendered, context_budget)
    return PromptRequest(
        stage=3,
        doc_id=doc.doc_id,
        system_text=_SYSTEM_TEXT,
        user_text=rendered,
        max_output_tokens=output_budgets[3],
    )


def build_causality_prompt(
    doc: CleanDocument,
    batch: Sequence[tuple[int, int]],
    catalog: Catalog,
    templates: PromptTemplates,
    context_budget: int = DEFAULT_CONTEXT_BUDGET,
    output_budgets: dict[int, int] = DEFAULT_OUTPUT_BUDGETS,
) -> PromptRequest:
    if not batch:
        raise ValueError("batch must be non-empty")
    lines = []
    for s, p in batch:
        sd = catalog.sdg_descriptor(s)
        pd = catalog.pb_descriptor(p)
        lines.append(f"- SDG {s} ({sd.short_name}) and PB {p} ({pd.short_name})")
    rendered = templates.text("causality.txt").format(
        pair_block="\n".join(lines),
        pairs_json=_pairs_json(batch),
        body_text=doc.body_text,
    )
    _guard_context(doc, rendered, context_budget)
    return PromptRequest(
        stage=4,
        doc_id=doc.doc_id,
        system_text=_SYSTEM_TEXT,
        user_text=rendered,
        max_output_tokens=output_budgets[4],
    )


def build_reasoner_prompt(
    doc: CleanDocument,
    batch: Sequence[tuple[int, int]],
    categories: dict[tuple[int, int], Category],
    catalog: Catalog,
    templates: PromptTemplates,
    context_budget: int = DEFAULT_CONTEXT_BUDGET,
    output_budgets: dict[int, int] = DEFAULT_OUTPUT_BUDGETS,
) -> PromptRequest:
    if not batch:
        raise ValueError("batch must be non-empty")
    lines = []
    for s, p in batch:
        cat = categories[(s, p)]
        if cat is Category.NEUTRAL:
            raise ValueError(f"pair ({s},{p}) is neutral; reasoner takes only synergies/trade-offs")
        sd = catalog.sdg_descriptor(s)
        pd = catalog.pb_descriptor(p)
        lines.append(
            f"- SDG {s} ({sd.short_name}) and PB {p} ({pd.short_name}): "
            f"currently classified as {cat.value}"
        )
    rendered = templates.text("reasoner.txt").format(
        pair_block="\n".join(lines),
        pairs_json=_pairs_json(batch),
        body_text=doc.body_text,
    )
    _guard_context(doc, rendered, context_budget)
    return PromptRequest(
        stage=5,
        doc_id=doc.doc_id,
        system_text=_SYSTEM_TEXT,
        user_text=rendered,
        max_output_tokens=output_budgets[5],
    )


# --------------------------------------------------------------------------
# Response parsing

_FENCE = re.compile(r"^```(?:json)?\s*|\s*```$", re.MULTILINE)


def _parse_json_object(text: str) -> dict:
    cleaned = _FENCE.sub("", text.strip()).strip()
    try:
        obj = json.loads(cleaned)
    except ValueError as exc:
        raise SchemaError(f"response is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise SchemaError("response is not a JSON object")
    return obj


def parse_allocation(text: str, axis: str) -> frozenset[int]:
    key = "sdgs" if axis == "SDG" else "pbs"
    upper = SDG_COUNT if axis == "SDG" else PB_COUNT
    obj = _parse_json_object(text)
    if key not in obj or not isinstance(obj[key], list):
        raise SchemaError(f"expected key {key!r} holding a list")
    ids = set()
    for v in obj[key]:
        if not isinstance(v, int) or isinstance(v, bool):
            raise SchemaError(f"non-integer id {v!r} in {key!r}")
        if not 1 <= v <= upper:
            raise IdOutOfRange(f"{axis} id {v} outside [1,{upper}]")
        ids.add(v)
    return frozenset(ids)


def _check_pair_set(got: Iterable[tuple[int, int]], batch: Sequence[tuple[int, int]]) -> None:
    if set(got) != set(batch):
        raise PairSetMismatch(
            f"response covers pairs {sorted(set(got))}, expected {sorted(set(batch))}"
        )


def _pair_of(entry: dict) -> tuple[int, int]:
    try:
        s, p = entry["sdg"], entry["pb"]
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"entry missing sdg/pb: {entry!r}") from exc
    if not isinstance(s, int) or not isinstance(p, int):
        raise SchemaError(f"non-integer pair ids in {entry!r}")
    return (s, p)


_CATEGORY_ALIASES = {
    "synergy": Category.SYNERGY,
    "trade-off": Category.TRADEOFF,
    "tradeoff": Category.TRADEOFF,
    "neutral": Category.NEUTRAL,
}

_DIRECTION_ALIASES = {
    "sdg_to_pb": Direction.SDG_TO_PB,
    "pb_to_sdg": Direction.PB_TO_SDG,
}

_LABEL_BY_TEXT = {label.value.lower(): label for label in RefinedLabel}
_LABEL_BY_TEXT["double negative"] = RefinedLabel.DOUBLE_NEGATIVE


def _collect_unique(entries: list, batch: Sequence[tuple[int, int]], what: str) -> dict[tuple[int, int], dict]:
    """Deduplicate entries by pair; conflicting duplicates poison the batch."""
    by_pair: dict[tuple[int, int], dict] = {}
    for entry in entries:
        pair = _pair_of(entry)
        if pair in by_pair and by_pair[pair] != entry:
            raise SchemaError(f"conflicting duplicate {what} for pair {pair}")
        by_pair[pair] = entry
    _check_pair_set(by_pair.keys(), batch)
    return by_pair


def parse_relationship(
    text: str, batch: Sequence[tuple[int, int]]
) -> list[tuple[tuple[int, int], Category, str, str]]:
    obj = _parse_json_object(text)
    entries = obj.get("verdicts")
    if not isinstance(entries, list):
        raise SchemaError("expected key 'verdicts' holding a list")
    by_pair = _collect_unique(entries, batch, "verdicts")
    out = []
    for pair in batch:
        entry = by_pair[pair]
        raw_cat = str(entry.get("category", "")).strip().lower()
        if raw_cat not in _CATEGORY_ALIASES:
            raise UnknownCategory(f"unknown category {entry.get('category')!r} for pair {pair}")
        category = _CATEGORY_ALIASES[raw_cat]
        justification = str(entry.get("justification", "") or "")
        quote = str(entry.get("evidence_quote", "") or "")
        if category is not Category.NEUTRAL and not justification:
            raise SchemaError(f"missing justification for non-neutral pair {pair}")
        out.append((pair, category, justification, quote))
    return out


def parse_causality(
    text: str, batch: Sequence[tuple[int, int]]
) -> list[tuple[tuple[int, int], Direction]]:
    obj = _parse_json_object(text)
    entries = obj.get("directions")
    if not isinstance(entries, list):
        raise SchemaError("expected key 'directions' holding a list")
    by_pair = _collect_unique(entries, batch, "directions")
    out = []
    for pair in batch:
        raw = str(by_pair[pair].get("direction", "")).strip().lower()
        if raw not in _DIRECTION_ALIASES:
            raise UnknownDirection(f"unknown direction {by_pair[pair].get('direction')!r} for pair {pair}")
        out.append((pair, _DIRECTION_ALIASES[raw]))
    return out


def parse_reasoner(
    text: str,
    batch: Sequence[tuple[int, int]],
    categories: dict[tuple[int, int], Category],
) -> list[tuple[tuple[int, int], RefinedLabel]]:
    obj = _parse_json_object(text)
    entries = obj.get("refinements")
    if not isinstance(entries, list):
        raise SchemaError("expected key 'refinements' holding a list")
    by_pair = _collect_unique(entries, batch, "refinements")
    out = []
    for pair in batch:
        raw = str(by_pair[pair].get("label", "")).strip().lower()
        if raw not in _LABEL_BY_TEXT:
            raise SchemaError(f"unknown refinement label {by_pair[pair].get('label')!r} for pair {pair}")
        label = _LABEL_BY_TEXT[raw]
        if label not in refined_labels_for(categories[pair]):
            raise IllegalRefinement(
                f"label {label.value!r} illegal for {categories[pair].value} pair {pair}"
            )
        out.append((pair, label))
    return out


# --------------------------------------------------------------------------
# Pair enumeration and batching


def pair_candidates(sdgs: Iterable[int], pbs: Iterable[int]) -> list[tuple[int, int]]:
    """Full Cartesian product, sorted ascending by (sdg, pb)."""
    return sorted((s, p) for s in set(sdgs) for p in set(pbs))


def chunk_pairs(pairs: Sequence[tuple[int, int]], cap: int = DEFAULT_BATCH_CAP) -> list[list[tuple[int, int]]]:
    """Split into order-preserving batches of at most `cap` pairs."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    return [list(pairs[i : i + cap]) for i in range(0, len(pairs), cap)]


# --------------------------------------------------------------------------
# Checkpoints


class CheckpointStore:
    """Per-document JSONL checkpoints under run_dir/checkpoints/."""

    def __init__(self, run_dir: str | Path):
        self._dir = Path(run_dir) / "checkpoints"
        self._dir.mkdir(parents=True, exist_ok=True)

    def _path(self, doc_id: str) -> Path:
        return self._dir / f"{doc_id}.jsonl"

    def load(self, doc_id: str) -> tuple[int, dict[int, dict], str | None]:
        """Returns (last_completed_stage, payloads by stage, template_version)."""
        path = self._path(doc_id)
        payloads: dict[int, dict] = {}
        version: str | None = None
        if not path.exists():
            return 0, payloads, version
        for line in path.read_text("utf-8").splitlines():
            if not line.strip():
                continue
            entry = json.loads(line)
            payloads[entry["stage"]] = entry["payload"]
            version = entry["template_version"]
        last = max(payloads) if payloads else 0
        return last, payloads, version

    def write(self, doc_id: str, stage: int, payload: dict, template_version: str) -> None:
        last, _, _ = self.load(doc_id)
        if stage <= last:
            raise ValueError(f"{doc_id}: checkpoint stage {stage} not past {last}")
        entry = {
            "doc_id": doc_id,
            "stage": stage,
            "payload": payload,
            "template_version": template_version,
        }
        with open(self._path(doc_id), "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")


def _normalize_ws(text: str) -> str:
    return " ".join(text.split())


# --------------------------------------------------------------------------
# Document state machine


@dataclass
class _DocState:
    sdgs: frozenset[int] = frozenset()
    pbs: frozenset[int] = frozenset()
    verdicts: list[dict] = field(default_factory=list)
    directions: list[dict] = field(default_factory=list)
    refinements: list[dict] = field(default_factory=list)


class PipelineRunner:
    """Drives documents through the five stages with checkpoint/resume."""

    def __init__(
        self,
        gateway: Gateway,
        checkpoints: CheckpointStore,
        catalog: Catalog,
        templates: PromptTemplates,
        batch_cap: int = DEFAULT_BATCH_CAP,
        context_budget: int = DEFAULT_CONTEXT_BUDGET,
        output_budgets: dict[int, int] | None = None,
    ):
        self.gateway = gateway
        self.checkpoints = checkpoints
        self.catalog = catalog
        self.templates = templates
        self.batch_cap = batch_cap
        self.context_budget = context_budget
        self.output_budgets = dict(output_budgets or DEFAULT_OUTPUT_BUDGETS)

    # -- single stage call with repair + retry ---------------------------

    def _ask(self, req: PromptRequest, parse):
        """One schema-repair reprompt, then one full retry, then give up."""
        raw = self.gateway.complete(req)
        try:
            return parse(raw.text)
        except SchemaError as first:
            logger.warning("%s stage %d: %s; sending repair prompt", req.doc_id, req.stage, first)
            repair = replace(req, user_text=req.user_text + _REPAIR_SUFFIX)
            try:
                return parse(self.gateway.complete(repair).text)
            except SchemaError:
                pass
            raw = self.gateway.complete(req)  # one full retry
            return parse(raw.text)

    # -- stages -----------------------------------------------------------

    def _stage_allocation(self, doc: CleanDocument, axis: str) -> frozenset[int]:
        req = build_allocation_prompt(
            doc, axis, self.catalog, self.templates, self.context_budget, self.output_budgets
        )
        return self._ask(req, lambda t: parse_allocation(t, axis))

    def _stage_relationship(self, doc: CleanDocument, pairs: list[tuple[int, int]]) -> list[dict]:
        verdicts = []
        for batch in chunk_pairs(pairs, self.batch_cap):
            req = build_relationship_prompt(
                doc, batch, self.catalog, self.templates, self.context_budget, self.output_budgets
            )
            parsed = self._ask(req, lambda t, b=batch: parse_relationship(t, b))
            for (s, p), category, justification, quote in parsed:
                if category is not Category.NEUTRAL:
                    if not quote or _normalize_ws(quote) not in _normalize_ws(doc.body_text):
                        logger.warning(
                            "%s pair (%d,%d): evidence quote not found verbatim in body; "
                            "downgrading to neutral",
                            doc.doc_id, s, p,
                        )
                        category, quote = Category.NEUTRAL, ""
                verdicts.append(
                    {
                        "sdg": s,
                        "pb": p,
                        "category": category.value,
                        "justification": justification,
                        "evidence_quote": quote,
                    }
                )
        return verdicts

    def _stage_causality(self, doc: CleanDocument, pairs: list[tuple[int, int]]) -> list[dict]:
        directions = []
        for batch in chunk_pairs(pairs, self.batch_cap):
            req = build_causality_prompt(
                doc, batch, self.catalog, self.templates, self.context_budget, self.output_budgets
            )
            parsed = self._ask(req, lambda t, b=batch: parse_causality(t, b))
            for (s, p), direction in parsed:
                directions.append({"sdg": s, "pb": p, "direction": direction.value})
        return directions

    def _stage_reasoner(
        self,
        doc: CleanDocument,
        pairs: list[tuple[int, int]],
        categories: dict[tuple[int, int], Category],
    ) -> list[dict]:
        refinements = []
        for batch in chunk_pairs(pairs, self.batch_cap):
            req = build_reasoner_prompt(
                doc, batch, categories, self.catalog, self.templates,
                self.context_budget, self.output_budgets,
            )
            parsed = self._ask(req, lambda t, b=batch: parse_reasoner(t, b, categories))
            for (s, p), label in parsed:
                refinements.append({"sdg": s, "pb": p, "label": label.value})
        return refinements

    # -- document driver --------------------------------------------------

    def process_document(self, doc: CleanDocument) -> DocumentResult:
        version = self.templates.version
        last, payloads, ckpt_version = self.checkpoints.load(doc.doc_id)
        if ckpt_version is not None and ckpt_version != version:
            raise TemplateVersionMismatch(
                f"{doc.doc_id}: checkpoint was written with template version "
                f"{ckpt_version}, current is {version}"
            )

        state = _DocState()
        if last >= 1:
            state.sdgs = frozenset(payloads[1]["sdgs"])
        if last >= 2:
            state.pbs = frozenset(payloads[2]["pbs"])
        if last >= 3:
            state.verdicts = payloads[3]["verdicts"]
        if last >= 4:
            state.directions = payloads[4]["directions"]
        if last >= 5:
            state.refinements = payloads[5]["refinements"]

        def fail(stage: int, reason: str) -> DocumentResult:
            return DocumentResult(
                doc_id=doc.doc_id, sdgs=state.sdgs, pbs=state.pbs, pairs=(),
                status="failed", template_version=version,
                failed_stage=stage, reason=reason,
            )

        try:
            if last < 1:
                state.sdgs = self._stage_allocation(doc, "SDG")
                self.checkpoints.write(doc.doc_id, 1, {"sdgs": sorted(state.sdgs)}, version)
                last = 1
            if last < 2:
                state.pbs = self._stage_allocation(doc, "PB")
                self.checkpoints.write(doc.doc_id, 2, {"pbs": sorted(state.pbs)}, version)
                last = 2
        except OverContext as exc:
            return DocumentResult(
                doc_id=doc.doc_id, sdgs=frozenset(), pbs=frozenset(), pairs=(),
                status="skipped", template_version=version, reason=str(exc),
            )
        except SchemaError as exc:
            return fail(last + 1, type(exc).__name__)

        pairs = pair_candidates(state.sdgs, state.pbs)

        try:
            if last < 3:
                state.verdicts = self._stage_relationship(doc, pairs) if pairs else []
                self.checkpoints.write(doc.doc_id, 3, {"verdicts": state.verdicts}, version)
                last = 3
        except SchemaError as exc:
            return fail(3, type(exc).__name__)

        categories = {
            (v["sdg"], v["pb"]): Category(v["category"]) for v in state.verdicts
        }
        active = [pair for pair in pairs if categories[pair] is not Category.NEUTRAL]

        try:
            if last < 4:
                state.directions = self._stage_causality(doc, active) if active else []
                self.checkpoints.write(doc.doc_id, 4, {"directions": state.directions}, version)
                last = 4
        except SchemaError as exc:
            return fail(4, type(exc).__name__)

        try:
            if last < 5:
                state.refinements = self._stage_reasoner(doc, active, categories) if active else []
                self.checkpoints.write(doc.doc_id, 5, {"refinements": state.refinements}, version)
                last = 5
        except (SchemaError, IllegalRefinement) as exc:
            return fail(5, type(exc).__name__)

        direction_by_pair = {
            (d["sdg"], d["pb"]): Direction(d["direction"]) for d in state.directions
        }
        label_by_pair = {
            (r["sdg"], r["pb"]): RefinedLabel(r["label"]) for r in state.refinements
        }
        pair_results = []
        for v in state.verdicts:
            pair = (v["sdg"], v["pb"])
            category = Category(v["category"])
            pair_results.append(
                PairClassification(
                    sdg=pair[0],
                    pb=pair[1],
                    category=category,
                    refined=label_by_pair.get(pair),
                    direction=direction_by_pair.get(pair),
                    justification=v["justification"],
                    evidence_quote=v["evidence_quote"],
                )
            )
        return DocumentResult(
            doc_id=doc.doc_id,
            sdgs=state.sdgs,
            pbs=state.pbs,
            pairs=tuple(pair_results),
            status="complete",
            template_version=version,
        )

    def run(self, docs: Sequence[CleanDocument], workers: int = 1) -> list[DocumentResult]:
        """Process a corpus; results come back sorted by doc_id."""
        if workers <= 1:
            results = [self.process_document(d) for d in docs]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(self.process_document, docs))
        return sorted(results, key=lambda r: r.doc_id)


# --------------------------------------------------------------------------
# Results store


def write_results(results: Sequence[DocumentResult], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for res in sorted(results, key=lambda r: r.doc_id):
            fh.write(json.dumps(res.to_json(), sort_keys=True) + "\n")


def read_results(path: str | Path) -> list[DocumentResult]:
    results = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                results.append(DocumentResult.from_json(json.loads(line)))
    return results
