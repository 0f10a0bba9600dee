"""Corpus acquisition and TEI full-text ingestion.

Fetches open-access work metadata from an OpenAlex-style works endpoint
(cursor pagination), parses TEI/XML full texts, prunes figures,
acknowledgments, and bibliographies, and emits clean documents with a
chars/4 token estimate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator
from xml.etree import ElementTree

import requests

from .errors import EmptyDocument, HttpFailure, InvalidCursor, MalformedXml, NotTei, QuotaExceeded

TEI_NS = "http://www.tei-c.org/ns/1.0"


class SectionKind(Enum):
    BODY = "body"
    FIGURE = "figure"
    ACKNOWLEDGMENT = "acknowledgment"
    BIBLIOGRAPHY = "bibliography"
    OTHER = "other"


@dataclass(frozen=True)
class WorkRecord:
    work_id: str
    title: str
    publication_year: int
    open_access_url: str | None = None

    def to_json(self) -> dict:
        return {
            "work_id": self.work_id,
            "title": self.title,
            "publication_year": self.publication_year,
            "open_access_url": self.open_access_url,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "WorkRecord":
        return cls(
            work_id=obj["work_id"],
            title=obj["title"],
            publication_year=obj["publication_year"],
            open_access_url=obj.get("open_access_url"),
        )


@dataclass(frozen=True)
class TeiDocument:
    title: str
    divisions: tuple[tuple[SectionKind, str], ...]


@dataclass(frozen=True)
class CleanDocument:
    doc_id: str
    title: str
    body_text: str
    token_estimate: int
    source_path: str = ""

    def to_json(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "title": self.title,
            "body_text": self.body_text,
            "token_estimate": self.token_estimate,
            "source_path": self.source_path,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CleanDocument":
        return cls(
            doc_id=obj["doc_id"],
            title=obj["title"],
            body_text=obj["body_text"],
            token_estimate=obj["token_estimate"],
            source_path=obj.get("source_path", ""),
        )


def estimate_tokens(text: str) -> int:
    """Context-window guard heuristic: ceil(len/4), not a real tokenizer."""
    return math.ceil(len(text) / 4)


# --------------------------------------------------------------------------
# Scholarly API client


class WorksClient:
    """Cursor-paginated client for an OpenAlex-style /works endpoint."""

    def __init__(
        self,
        base_url: str = "https://api.openalex.org",
        mailto: str | None = None,
        page_size: int = 200,
        retry_budget: int = 3,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.mailto = mailto
        self.page_size = page_size
        self.retry_budget = retry_budget
        self.session = session or requests.Session()

    def fetch_works(
        self,
        query: str,
        filters: dict[str, str] | None = None,
        cursor: str | None = None,
    ) -> tuple[list[WorkRecord], str | None]:
        """Fetch one page of open-access works; returns (records, next_cursor)."""
        if not query:
            raise ValueError("query must be non-empty")
        filters = dict(filters or {})
        filters.setdefault("is_oa", "true")
        params = {
            "search": query,
            "filter": ",".join(f"{k}:{v}" for k, v in sorted(filters.items())),
            "per-page": str(self.page_size),
            "cursor": cursor if cursor is not None else "*",
        }
        if self.mailto:
            params["mailto"] = self.mailto

        payload = self._get_with_retry(f"{self.base_url}/works", params)
        results = payload.get("results", [])
        records = []
        for item in results:
            oa = item.get("open_access") or {}
            records.append(
                WorkRecord(
                    work_id=str(item.get("id", "")),
                    title=item.get("title") or "",
                    publication_year=int(item.get("publication_year") or 0),
                    open_access_url=oa.get("oa_url"),
                )
            )
        next_cursor = (payload.get("meta") or {}).get("next_cursor")
        if not results:
            next_cursor = None
        return records, next_cursor

    def fetch_all(self, query: str, filters: dict[str, str] | None = None) -> Iterator[WorkRecord]:
        """Iterate every page; deduplicates work_ids across pages."""
        seen: set[str] = set()
        cursor: str | None = None
        while True:
            records, cursor = self.fetch_works(query, filters, cursor)
            for rec in records:
                if rec.work_id not in seen:
                    seen.add(rec.work_id)
                    yield rec
            if cursor is None:
                return

    def _get_with_retry(self, url: str, params: dict) -> dict:
        attempts = 0
        while True:
            attempts += 1
            try:
                resp = self.session.get(url, params=params, timeout=60)
            except requests.RequestException as exc:
                raise HttpFailure(f"transport error calling {url}: {exc}") from exc
            if resp.status_code == 400 and "cursor" in resp.text.lower():
                raise InvalidCursor(f"server rejected cursor {params.get('cursor')!r}")
            if resp.status_code == 429:
                if attempts > self.retry_budget:
                    raise QuotaExceeded(f"rate limited after {attempts} attempts")
                continue
            if resp.status_code != 200:
                raise HttpFailure(f"HTTP {resp.status_code} from {url}")
            try:
                return resp.json()
            except ValueError as exc:
                raise HttpFailure(f"non-JSON response from {url}") from exc


# --------------------------------------------------------------------------
# TEI parsing and pruning

_KIND_BY_DIV_TYPE = {
    "acknowledgement": SectionKind.ACKNOWLEDGMENT,
    "acknowledgment": SectionKind.ACKNOWLEDGMENT,
    "acknowledgements": SectionKind.ACKNOWLEDGMENT,
    "references": SectionKind.BIBLIOGRAPHY,
    "bibliography": SectionKind.BIBLIOGRAPHY,
    "annex": SectionKind.OTHER,
}


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _text_of(elem: ElementTree.Element) -> str:
    return " ".join(" ".join(elem.itertext()).split())


def parse_tei(xml_bytes: bytes) -> TeiDocument:
    """Parse a TEI document into ordered, kind-tagged divisions.

    Division kinds come from TEI element context: <body> divs are BODY
    unless their @type marks them as acknowledgment/bibliography; <figure>
    elements are FIGURE; <back> holds acknowledgments and <listBibl>
    bibliographies; anything unrecognized is kept as OTHER.
    """
    try:
        root = ElementTree.fromstring(xml_bytes)
    except ElementTree.ParseError as exc:
        raise MalformedXml(f"XML parse failure: {exc}") from exc
    if _local(root.tag) != "TEI":
        raise NotTei(f"root element is <{_local(root.tag)}>, expected <TEI>")

    title_elem = root.find(f".//{{{TEI_NS}}}titleStmt/{{{TEI_NS}}}title")
    if title_elem is None:
        title_elem = root.find(".//titleStmt/title")
    title = _text_of(title_elem) if title_elem is not None else ""

    divisions: list[tuple[SectionKind, str]] = []

    def walk(elem: ElementTree.Element, context: str) -> None:
        tag = _local(elem.tag)
        if tag == "figure":
            text = _text_of(elem)
            if text:
                divisions.append((SectionKind.FIGURE, text))
            return
        if tag == "listBibl":
            text = _text_of(elem)
            if text:
                divisions.append((SectionKind.BIBLIOGRAPHY, text))
            return
        if tag == "div":
            div_type = (elem.get("type") or "").lower()
            kind = _KIND_BY_DIV_TYPE.get(div_type)
            if kind is None:
                if context == "body":
                    kind = SectionKind.BODY
                elif context == "back":
                    kind = SectionKind.OTHER
                else:
                    kind = SectionKind.OTHER
            # figures nested inside a div are extracted separately
            parts: list[str] = []
            for child in elem:
                if _local(child.tag) in ("figure", "listBibl"):
                    walk(child, context)
                else:
                    parts.append(_text_of(child))
            text = " ".join(p for p in parts if p)
            if text:
                divisions.append((kind, text))
            return
        for child in elem:
            walk(child, context)

    text_elem = root.find(f"{{{TEI_NS}}}text")
    if text_elem is None:
        text_elem = root.find("text")
    if text_elem is not None:
        for part in text_elem:
            walk(part, _local(part.tag))

    return TeiDocument(title=title, divisions=tuple(divisions))


def prune(doc: TeiDocument, doc_id: str, source_path: str = "") -> CleanDocument:
    """Drop figure, acknowledgment, and bibliography divisions."""
    if not doc.divisions:
        raise EmptyDocument(f"{doc_id}: document has no divisions")
    kept = [
        text
        for kind, text in doc.divisions
        if kind in (SectionKind.BODY, SectionKind.OTHER)
    ]
    body_text = "\n\n".join(kept).strip()
    if not body_text:
        raise EmptyDocument(f"{doc_id}: no body text remains after pruning")
    return CleanDocument(
        doc_id=doc_id,
        title=doc.title,
        body_text=body_text,
        token_estimate=estimate_tokens(body_text),
        source_path=source_path,
    )


# --------------------------------------------------------------------------
# Corpus directory and manifest I/O


def write_manifest(records: Iterable[WorkRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(), sort_keys=True) + "\n")


def read_manifest(path: str | Path) -> list[WorkRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(WorkRecord.from_json(json.loads(line)))
    return records


def ingest_directory(corpus_dir: str | Path) -> list[CleanDocument]:
    """Parse and prune every .tei.xml file in a corpus directory.

    Files that prune to nothing are skipped; doc ids come from filenames.
    """
    corpus_dir = Path(corpus_dir)
    docs = []
    for path in sorted(corpus_dir.glob("*.tei.xml")):
        doc_id = path.name[: -len(".tei.xml")]
        tei = parse_tei(path.read_bytes())
        try:
            docs.append(prune(tei, doc_id, source_path=str(path)))
        except EmptyDocument:
            continue
    return docs


def write_documents(docs: Iterable[CleanDocument], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(doc.to_json(), sort_keys=True) + "\n")


def read_documents(path: str | Path) -> list[CleanDocument]:
    docs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                docs.append(CleanDocument.from_json(json.loads(line)))
    return docs


def extract_pdf(pdf_bytes: bytes, service_url: str, session: requests.Session | None = None) -> bytes:
    """POST a PDF to a Grobid-compatible extraction service, returning TEI bytes."""
    session = session or requests.Session()
    try:
        resp = session.post(
            f"{service_url.rstrip('/')}/api/processFulltextDocument",
            files={"input": ("document.pdf", pdf_bytes, "application/pdf")},
            timeout=300,
        )
    except requests.RequestException as exc:
        raise HttpFailure(f"extraction service unreachable: {exc}") from exc
    if resp.status_code != 200:
        raise HttpFailure(f"extraction service returned HTTP {resp.status_code}")
    return resp.content
