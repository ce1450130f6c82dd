"""Canonical claim/evidence data model, ingestion and corpus statistics.

The on-disk format is JSONL, one record per line:

    {"id": ..., "claim": ..., "label": "SUPPORTED|REFUTED|NEI",
     "domain": ..., "gold_evidence": [{"doc_id", "sent_index"} | "literal"],
     "documents": [{"doc_id", "text"}], "source": "original|generated|cross"}

External schemas are adapted through :class:`IngestMapping` instead of
hard-coding any particular dataset's field names.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from factlab.errors import EmptyCorpusError, IngestError

SENTENCE_DELIMITERS = frozenset("。！？；\n")

SOURCES = ("original", "generated", "cross")


class Label(Enum):
    SUPPORTED = "SUPPORTED"
    REFUTED = "REFUTED"
    NEI = "NEI"

    def __lt__(self, other: "Label") -> bool:
        order = [Label.SUPPORTED, Label.REFUTED, Label.NEI]
        return order.index(self) < order.index(other)


# Fixed tie-breaking / reporting order everywhere.
LABEL_ORDER = (Label.SUPPORTED, Label.REFUTED, Label.NEI)


@dataclass(frozen=True)
class Sentence:
    index: int
    text: str
    char_span: tuple[int, int]


def split_sentences(raw_text: str) -> list[Sentence]:
    """Split on Chinese terminal punctuation 。！？； and newline.

    The delimiter attaches to the preceding sentence. Segments without
    any content (delimiter or whitespace runs between sentences) are
    merged into their neighbour instead of emitted, so the returned
    spans always tile the input.
    """
    if not raw_text:
        return []
    # Cut after every delimiter character.
    pieces: list[tuple[int, int]] = []
    start = 0
    for i, ch in enumerate(raw_text):
        if ch in SENTENCE_DELIMITERS:
            pieces.append((start, i + 1))
            start = i + 1
    if start < len(raw_text):
        pieces.append((start, len(raw_text)))

    def has_content(span: tuple[int, int]) -> bool:
        seg = raw_text[span[0] : span[1]]
        return any(c not in SENTENCE_DELIMITERS and not c.isspace() for c in seg)

    merged: list[tuple[int, int]] = []
    for span in pieces:
        if merged and not has_content(span):
            merged[-1] = (merged[-1][0], span[1])
        elif merged and not has_content(merged[-1]):
            merged[-1] = (merged[-1][0], span[1])
        else:
            merged.append(span)

    return [
        Sentence(index=i, text=raw_text[a:b], char_span=(a, b))
        for i, (a, b) in enumerate(merged)
    ]


@dataclass(frozen=True)
class EvidenceDocument:
    doc_id: str
    raw_text: str
    sentences: tuple[Sentence, ...]

    @classmethod
    def from_text(cls, doc_id: str, raw_text: str) -> "EvidenceDocument":
        return cls(doc_id, raw_text, tuple(split_sentences(raw_text)))

    def __post_init__(self) -> None:
        joined = "".join(s.text for s in self.sentences)
        if joined != self.raw_text:
            raise ValueError(f"sentences of doc {self.doc_id!r} do not tile raw_text")


# A gold-evidence reference: resolved (doc_id, sent_index) or a literal string.
GoldRef = "tuple[str, int] | str"


@dataclass(frozen=True)
class ClaimRecord:
    id: str
    text: str
    label: Label
    domain: str = "unknown"
    gold_evidence: tuple = ()
    documents: tuple[EvidenceDocument, ...] = ()
    source: str = "original"

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError(f"claim {self.id!r} has empty text")
        if self.source not in SOURCES:
            raise ValueError(f"claim {self.id!r} has unknown source {self.source!r}")

    def document(self, doc_id: str) -> EvidenceDocument:
        for doc in self.documents:
            if doc.doc_id == doc_id:
                return doc
        raise KeyError(doc_id)

    def resolve_gold(self) -> list[tuple[str, int]]:
        """Gold references as (doc_id, sent_index) pairs.

        Literal references are matched to sentences by exact text
        (leading/trailing whitespace ignored); unmatched literals are
        skipped here — ingest reports them as warnings.
        """
        resolved: list[tuple[str, int]] = []
        for ref in self.gold_evidence:
            if isinstance(ref, tuple):
                resolved.append(ref)
                continue
            needle = str(ref).strip()
            for doc in self.documents:
                for sent in doc.sentences:
                    if sent.text.strip() == needle:
                        resolved.append((doc.doc_id, sent.index))
                        break
                else:
                    continue
                break
        return resolved


class Corpus:
    """An ordered collection of validated claim records with unique ids."""

    def __init__(self, records: Iterable[ClaimRecord]):
        self.records: list[ClaimRecord] = list(records)
        self._by_id: dict[str, ClaimRecord] = {}
        for rec in self.records:
            if rec.id in self._by_id:
                raise ValueError(f"duplicate record id {rec.id!r}")
            self._by_id[rec.id] = rec

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[ClaimRecord]:
        return iter(self.records)

    def __getitem__(self, record_id: str) -> ClaimRecord:
        return self._by_id[record_id]

    def __contains__(self, record_id: str) -> bool:
        return record_id in self._by_id

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Corpus) and self.records == other.records

    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    def subset(self, ids: Iterable[str]) -> "Corpus":
        wanted = set(ids)
        return Corpus(r for r in self.records if r.id in wanted)


@dataclass
class IngestMapping:
    """Field-name and label-string adapter for external schemas.

    ``fields`` maps canonical field names to source keys; ``labels``
    maps source label strings to canonical label names. A ``labels``
    table given in a mapping file replaces the default table entirely
    (it is exhaustive: unlisted label strings are rejected), while
    ``fields`` entries extend the defaults. Mandatory canonical fields:
    id, claim, label. ``documents`` in the source may be a list of
    {doc_id, text} objects, a {doc_id: text} object, or a list of
    plain strings (auto-numbered d0, d1, ...).
    """

    fields: dict[str, str] = field(
        default_factory=lambda: {
            "id": "id",
            "claim": "claim",
            "label": "label",
            "domain": "domain",
            "gold_evidence": "gold_evidence",
            "documents": "documents",
            "source": "source",
        }
    )
    labels: dict[str, str] = field(
        default_factory=lambda: {lab.value: lab.value for lab in LABEL_ORDER}
    )

    MANDATORY = ("id", "claim", "label")

    def __post_init__(self) -> None:
        missing = [f for f in self.MANDATORY if f not in self.fields]
        if missing:
            raise IngestError(f"mapping lacks mandatory fields: {missing}")

    @classmethod
    def identity(cls) -> "IngestMapping":
        return cls()

    @classmethod
    def from_file(cls, path: str | Path) -> "IngestMapping":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        mapping = cls.identity()
        mapping.fields.update(data.get("fields", {}))
        if "labels" in data:
            mapping.labels = dict(data["labels"])
        return mapping

    def label_for(self, raw: object) -> Label:
        key = str(raw)
        if key not in self.labels:
            raise KeyError(key)
        return Label(self.labels[key])


@dataclass(frozen=True)
class Reject:
    line_no: int
    reason: str


@dataclass(frozen=True)
class IngestWarning:
    line_no: int
    record_id: str
    message: str


@dataclass
class IngestResult:
    corpus: Corpus
    rejects: list[Reject]
    warnings: list[IngestWarning]
    n_lines: int

    def write_rejects(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for rej in self.rejects:
                fh.write(
                    json.dumps(
                        {"line_no": rej.line_no, "reason": rej.reason},
                        ensure_ascii=False,
                    )
                    + "\n"
                )


def _parse_documents(raw: object) -> tuple[EvidenceDocument, ...]:
    docs: list[EvidenceDocument] = []
    if raw is None:
        return ()
    if isinstance(raw, dict):
        items: Sequence = [
            {"doc_id": str(k), "text": str(v)} for k, v in raw.items()
        ]
    elif isinstance(raw, list):
        items = raw
    else:
        raise ValueError(f"unsupported documents value: {type(raw).__name__}")
    for i, item in enumerate(items):
        if isinstance(item, str):
            docs.append(EvidenceDocument.from_text(f"d{i}", item))
        elif isinstance(item, dict) and "text" in item:
            docs.append(
                EvidenceDocument.from_text(str(item.get("doc_id", f"d{i}")), str(item["text"]))
            )
        else:
            raise ValueError(f"unsupported document entry at position {i}")
    return tuple(docs)


def _parse_gold(raw: object) -> tuple:
    refs: list = []
    if raw is None:
        return ()
    if not isinstance(raw, list):
        raise ValueError("gold_evidence must be a list")
    for item in raw:
        if isinstance(item, str):
            refs.append(item)
        elif isinstance(item, dict) and "doc_id" in item and "sent_index" in item:
            refs.append((str(item["doc_id"]), int(item["sent_index"])))
        elif isinstance(item, (list, tuple)) and len(item) == 2:
            refs.append((str(item[0]), int(item[1])))
        else:
            raise ValueError(f"unsupported gold_evidence entry: {item!r}")
    return tuple(refs)


def record_from_raw(
    raw: dict, mapping: IngestMapping, line_no: int
) -> tuple[ClaimRecord, list[IngestWarning]]:
    """Build one validated record from a source object.

    Raises ValueError with a human-readable reason on any record-level
    validation failure.
    """
    for canon in IngestMapping.MANDATORY:
        key = mapping.fields[canon]
        if key not in raw:
            raise ValueError(f"missing mandatory field {canon!r} (source key {key!r})")

    rec_id = str(raw[mapping.fields["id"]])
    claim = str(raw[mapping.fields["claim"]])
    if not claim.strip():
        raise ValueError("claim text is empty")

    try:
        label = mapping.label_for(raw[mapping.fields["label"]])
    except KeyError as exc:
        raise ValueError(f"unknown label string {exc.args[0]!r}") from None

    def optional(canon: str):
        key = mapping.fields.get(canon)
        return raw.get(key) if key else None

    domain = optional("domain")
    source = optional("source")
    documents = _parse_documents(optional("documents"))
    gold = _parse_gold(optional("gold_evidence"))

    doc_ids = {d.doc_id for d in documents}
    if len(doc_ids) != len(documents):
        raise ValueError("duplicate doc_id within record")

    record = ClaimRecord(
        id=rec_id,
        text=claim,
        label=label,
        domain=str(domain) if domain is not None else "unknown",
        gold_evidence=gold,
        documents=documents,
        source=str(source) if source is not None else "original",
    )

    warnings: list[IngestWarning] = []
    by_id = {d.doc_id: d for d in documents}
    for ref in gold:
        if isinstance(ref, tuple):
            doc_id, idx = ref
            if doc_id not in by_id:
                raise ValueError(f"gold_evidence references unknown doc {doc_id!r}")
            if not 0 <= idx < len(by_id[doc_id].sentences):
                raise ValueError(
                    f"gold_evidence sentence index {idx} out of range for doc {doc_id!r}"
                )
    literal_refs = [r for r in gold if isinstance(r, str)]
    if literal_refs:
        matched = len(record.resolve_gold()) - sum(
            1 for r in gold if isinstance(r, tuple)
        )
        if matched < len(literal_refs):
            warnings.append(
                IngestWarning(
                    line_no,
                    rec_id,
                    f"{len(literal_refs) - matched} literal gold reference(s) "
                    "did not match any sentence",
                )
            )
    return record, warnings


def ingest_jsonl(path: str | Path, mapping: IngestMapping | None = None) -> IngestResult:
    """Read a JSONL file into a validated corpus plus a rejects report.

    Records failing validation become :class:`Reject` entries citing the
    line number; they are never silently dropped. Accepted + rejected
    always equals the input line count.
    """
    mapping = mapping or IngestMapping.identity()
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc

    records: list[ClaimRecord] = []
    rejects: list[Reject] = []
    warnings: list[IngestWarning] = []
    seen_ids: set[str] = set()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            rejects.append(Reject(line_no, "empty line"))
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            rejects.append(Reject(line_no, f"invalid JSON: {exc.msg}"))
            continue
        if not isinstance(raw, dict):
            rejects.append(Reject(line_no, "line is not an object"))
            continue
        try:
            record, record_warnings = record_from_raw(raw, mapping, line_no)
        except ValueError as exc:
            rejects.append(Reject(line_no, str(exc)))
            continue
        if record.id in seen_ids:
            rejects.append(Reject(line_no, f"duplicate id {record.id!r}"))
            continue
        seen_ids.add(record.id)
        records.append(record)
        warnings.extend(record_warnings)

    return IngestResult(Corpus(records), rejects, warnings, n_lines=len(lines))


def record_to_dict(record: ClaimRecord) -> dict:
    gold = [
        {"doc_id": ref[0], "sent_index": ref[1]} if isinstance(ref, tuple) else ref
        for ref in record.gold_evidence
    ]
    return {
        "id": record.id,
        "claim": record.text,
        "label": record.label.value,
        "domain": record.domain,
        "gold_evidence": gold,
        "documents": [{"doc_id": d.doc_id, "text": d.raw_text} for d in record.documents],
        "source": record.source,
    }


def write_jsonl(corpus: Corpus, path: str | Path) -> None:
    """Emit the corpus in canonical JSONL (round-trips through ingest)."""
    with open(path, "w", encoding="utf-8") as fh:
        for record in corpus:
            fh.write(json.dumps(record_to_dict(record), ensure_ascii=False) + "\n")


@dataclass
class StatsReport:
    n_records: int
    domain_counts: dict[str, int]
    label_counts: dict[Label, int]
    table: dict[str, dict[Label, int]]

    def domain_share(self, domain: str) -> float:
        return self.domain_counts.get(domain, 0) / self.n_records

    def label_proportion(self, domain: str, label: Label) -> float:
        total = self.domain_counts.get(domain, 0)
        if total == 0:
            return 0.0
        return self.table[domain].get(label, 0) / total

    def to_csv_rows(self) -> list[list]:
        rows: list[list] = [["domain", "label", "count", "proportion", "domain_share"]]
        for domain in sorted(self.table):
            for label in LABEL_ORDER:
                count = self.table[domain].get(label, 0)
                rows.append(
                    [
                        domain,
                        label.value,
                        count,
                        f"{self.label_proportion(domain, label):.4f}",
                        f"{self.domain_share(domain):.4f}",
                    ]
                )
        return rows

    def to_markdown(self) -> str:
        header = "| domain | " + " | ".join(l.value for l in LABEL_ORDER) + " | total | share |"
        sep = "|" + "---|" * (len(LABEL_ORDER) + 3)
        lines = [header, sep]
        for domain in sorted(self.table):
            cells = [
                f"{self.table[domain].get(l, 0)} ({self.label_proportion(domain, l):.0%})"
                for l in LABEL_ORDER
            ]
            lines.append(
                f"| {domain} | "
                + " | ".join(cells)
                + f" | {self.domain_counts[domain]} | {self.domain_share(domain):.0%} |"
            )
        return "\n".join(lines)


def corpus_stats(corpus: Corpus) -> StatsReport:
    """Per-domain and per-label counts with the domain×label table."""
    if len(corpus) == 0:
        raise EmptyCorpusError("corpus_stats requires a non-empty corpus")
    domain_counts: Counter = Counter()
    label_counts: Counter = Counter()
    table: dict[str, dict[Label, int]] = {}
    for record in corpus:
        domain_counts[record.domain] += 1
        label_counts[record.label] += 1
        table.setdefault(record.domain, {})
        table[record.domain][record.label] = table[record.domain].get(record.label, 0) + 1
    return StatsReport(
        n_records=len(corpus),
        domain_counts=dict(domain_counts),
        label_counts=dict(label_counts),
        table=table,
    )


def split_corpus(corpus: Corpus, train_fraction: float, seed: int) -> tuple[Corpus, Corpus]:
    """Seeded shuffle split into (train, held-out), stable across runs."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    import random

    ids = corpus.ids()
    rng = random.Random(seed)
    rng.shuffle(ids)
    cut = int(round(train_fraction * len(ids)))
    train_ids, test_ids = set(ids[:cut]), set(ids[cut:])
    train = Corpus(r for r in corpus if r.id in train_ids)
    test = Corpus(r for r in corpus if r.id in test_ids)
    return train, test
