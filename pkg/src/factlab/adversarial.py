"""Symmetric adversarial dataset construction and quality control.

Each claim/evidence pair gets a rewritten counterpart that keeps the
original relation while stating contrasting facts. Expanding the pair
into its four combinations yields two original-relation instances and
two crossed instances with the inverted label, so every claim (and
every evidence text) appears exactly twice with opposite labels —
claim-only classification is forced to chance. Rewrites come from a
generic chat-completion endpoint or from deterministic flip rules; QC
sampling and Cohen's kappa close the loop.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import requests

from factlab.corpus import ClaimRecord, Corpus, EvidenceDocument, Label
from factlab.errors import (
    EmptyCorpusError,
    InvariantViolation,
    NotRewritable,
    RewriteError,
    WireError,
    WireFormatError,
)
from factlab.segmenter import Lexicon, word_set

DEFAULT_OVERLAP_THRESHOLD = 0.6
DEFAULT_RETRIES = 3

_API_KEY_ENV = "FACTLAB_LLM_API_KEY"


@dataclass(frozen=True)
class PairInstance:
    """One original claim/evidence pair slated for rewriting."""

    pair_id: str
    claim: str
    evidence: str
    label: Label
    domain: str = "unknown"


@dataclass(frozen=True)
class RewritePair:
    original: PairInstance
    generated_claim: str
    generated_evidence: str
    rewrite_log: tuple[str, ...]
    source: str  # llm | rule


def word_overlap(text_a: str, text_b: str, lexicon: Lexicon) -> float:
    """Jaccard similarity of the two segmented word sets.

    Two empty texts count as identical (1.0 by convention).
    """
    a, b = word_set(text_a, lexicon), word_set(text_b, lexicon)
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def check_rewrite_invariants(
    pair: RewritePair,
    lexicon: Lexicon,
    overlap_threshold: float = DEFAULT_OVERLAP_THRESHOLD,
) -> None:
    """Raise InvariantViolation unless the rewrite is usable."""
    if not pair.generated_claim.strip() or not pair.generated_evidence.strip():
        raise InvariantViolation(f"pair {pair.original.pair_id}: empty generated text")
    if pair.generated_claim == pair.original.claim:
        raise InvariantViolation(
            f"pair {pair.original.pair_id}: generated claim equals the original"
        )
    if pair.generated_evidence == pair.original.evidence:
        raise InvariantViolation(
            f"pair {pair.original.pair_id}: generated evidence equals the original"
        )
    overlap = word_overlap(pair.original.claim, pair.generated_claim, lexicon)
    if overlap < overlap_threshold:
        raise InvariantViolation(
            f"pair {pair.original.pair_id}: claim overlap {overlap:.3f} below "
            f"threshold {overlap_threshold}"
        )


# --- prompt assembly -------------------------------------------------------

PROMPT_PLACEHOLDERS = (
    "role",
    "step1",
    "step2",
    "strategies",
    "exemplars",
    "requirement",
    "payload",
)

DEFAULT_PROMPT_SECTIONS = {
    "role": (
        "你是一名编辑部的事实核查记者。下面给出一条声明和对应的证据，"
        "请改写两者，使各自的含义与原文相反，但保持它们之间原有的支持/反驳关系。"
        "输出格式：CLAIM: <改写后的声明>，换行后 EVIDENCE: <改写后的证据>。"
    ),
    "step1": "第一步：修改声明内容，使其含义与原声明相反，改动尽量少。",
    "step2": "第二步：据第一步的新声明，相应修改证据内容，使两者关系与原先一致。",
    "strategies": (
        "可用的改写策略：同时出现在声明和证据中的关键名词（时间、地点、人物、数字）"
        "可以改成别的值；表示程度或方向的动词可以换成反义词，例如把「上调」换成「下调」。"
    ),
    "requirement": (
        "最重要的要求：改写后的证据必须仍然与改写后的声明保持原有的关系，"
        "并且与原文有较高的用词重合度。"
    ),
}

DEFAULT_PROMPT_LAYOUT = (
    "{role}\n\n{step1}\n\n{step2}\n\n{strategies}\n\n{exemplars}\n\n"
    "{requirement}\n\n{payload}"
)


def _fence(text: str) -> str:
    """Triple-backtick fence, widened when the payload contains one."""
    runs = re.findall(r"`+", text)
    width = max(3, max((len(r) for r in runs), default=0) + 1)
    ticks = "`" * width
    return f"{ticks}\n{text}\n{ticks}"


def _format_exemplars(exemplars: Sequence[RewritePair]) -> str:
    if not exemplars:
        return ""
    lines = ["请同时参考以下改写示例："]
    for i, ex in enumerate(exemplars, start=1):
        lines.append(
            f"示例{i}：原声明「{ex.original.claim}」改为「{ex.generated_claim}」；"
            f"原证据「{ex.original.evidence}」改为「{ex.generated_evidence}」。"
        )
    return "\n".join(lines)


def build_prompt(
    instance: PairInstance,
    template: str = DEFAULT_PROMPT_LAYOUT,
    exemplars: Sequence[RewritePair] = (),
    sections: dict[str, str] | None = None,
) -> str:
    """Assemble the seven-section rewrite prompt.

    The template must contain every placeholder in PROMPT_PLACEHOLDERS;
    the payload is fenced with backticks. An empty exemplar list leaves
    the exemplar section out.
    """
    missing = [p for p in PROMPT_PLACEHOLDERS if "{" + p + "}" not in template]
    if missing:
        raise ValueError(f"prompt template lacks placeholders: {missing}")
    parts = dict(DEFAULT_PROMPT_SECTIONS)
    if sections:
        parts.update(sections)
    payload = _fence(f"声明：{instance.claim}\n证据：{instance.evidence}")
    prompt = template.format(
        exemplars=_format_exemplars(exemplars), payload=payload, **{
            key: parts[key] for key in ("role", "step1", "step2", "strategies", "requirement")
        }
    )
    # collapse the blank gap left by an omitted exemplar section
    return re.sub(r"\n{3,}", "\n\n", prompt).strip()


# --- LLM rewriting ---------------------------------------------------------


class LlmClient:
    """Generic chat-completion client.

    POST {endpoint} {"model", "messages", "temperature"}
      -> {"choices": [{"message": {"content": ...}}]}

    The API key is read from the environment (FACTLAB_LLM_API_KEY),
    never from config files.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        temperature: float = 0.7,
        timeout: float = 120.0,
    ):
        self.endpoint = endpoint
        self.model = model
        self.temperature = temperature
        self.timeout = timeout

    def complete(self, prompt: str) -> str:
        headers = {}
        api_key = os.environ.get(_API_KEY_ENV)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        }
        try:
            resp = requests.post(
                self.endpoint, json=payload, headers=headers, timeout=self.timeout
            )
            resp.raise_for_status()
        except requests.RequestException as exc:
            raise WireError(f"completion request failed: {exc}") from exc
        try:
            body = resp.json()
        except ValueError as exc:
            raise WireFormatError(f"completion endpoint returned invalid JSON: {exc}") from exc
        try:
            return str(body["choices"][0]["message"]["content"])
        except (KeyError, IndexError, TypeError):
            raise WireFormatError("completion response lacks choices[0].message.content") from None


_CLAIM_RE = re.compile(
    r"CLAIM[:：]\s*(?P<claim>.*?)\s*EVIDENCE[:：]\s*(?P<evidence>.+?)\s*$",
    re.DOTALL | re.IGNORECASE,
)


def parse_rewrite_completion(completion: str) -> tuple[str, str]:
    """Extract the CLAIM:/EVIDENCE: blocks from a completion."""
    text = re.sub(r"^`{3,}[^\n]*$", "", completion, flags=re.MULTILINE)
    match = _CLAIM_RE.search(text)
    if not match:
        raise WireFormatError("completion lacks CLAIM:/EVIDENCE: blocks")
    claim = match.group("claim").strip()
    evidence = match.group("evidence").strip()
    if not claim or not evidence:
        raise WireFormatError("completion has empty CLAIM or EVIDENCE block")
    return claim, evidence


def rewrite_via_llm(
    instance: PairInstance,
    client: LlmClient,
    template: str = DEFAULT_PROMPT_LAYOUT,
    exemplars: Sequence[RewritePair] = (),
    lexicon: Lexicon | None = None,
    overlap_threshold: float = DEFAULT_OVERLAP_THRESHOLD,
    retries: int = DEFAULT_RETRIES,
) -> RewritePair:
    """Ask the completion endpoint for a rewrite; re-ask on violations.

    Up to ``retries`` additional attempts after the first; parse
    failures and invariant violations are retried, transport errors
    propagate immediately.
    """
    lexicon = lexicon or Lexicon()
    prompt = build_prompt(instance, template, exemplars)
    last_reason = ""
    for attempt in range(retries + 1):
        completion = client.complete(prompt)
        try:
            claim, evidence = parse_rewrite_completion(completion)
            pair = RewritePair(
                original=instance,
                generated_claim=claim,
                generated_evidence=evidence,
                rewrite_log=(f"llm:{client.model}:attempt{attempt}",),
                source="llm",
            )
            check_rewrite_invariants(pair, lexicon, overlap_threshold)
            return pair
        except (WireFormatError, InvariantViolation) as exc:
            last_reason = str(exc)
    raise RewriteError(
        f"pair {instance.pair_id}: no valid rewrite after {retries + 1} attempts "
        f"(last: {last_reason})"
    )


# --- rule-based rewriting --------------------------------------------------


def _involution(pairs: Iterable[tuple[str, str]]) -> dict[str, str]:
    table: dict[str, str] = {}
    for a, b in pairs:
        table[a] = b
        table[b] = a
    return table


DEFAULT_ANTONYMS = _involution(
    [
        ("上调", "下调"),
        ("上涨", "下跌"),
        ("上升", "下降"),
        ("增加", "减少"),
        ("提高", "降低"),
        ("有效", "无效"),
        ("真实", "虚假"),
        ("成功", "失败"),
        ("支持", "反对"),
        ("存在大量", "不存在"),
    ]
)

DEFAULT_ENTITY_SWAPS = _involution(
    [
        ("北京", "上海"),
        ("广州", "深圳"),
        ("周一", "周五"),
    ]
)

_NUMBER_RE = re.compile(r"(?<![\d.])(\d+(?:\.\d+)?)(?![\d.])")


@dataclass
class RuleSet:
    """Deterministic rewrite rules, tried in order: degree/antonym flip,
    numeric perturbation, entity swap."""

    antonyms: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_ANTONYMS))
    entity_swaps: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_ENTITY_SWAPS))

    def flip(self, token: str) -> str:
        return self.antonyms[token]


def _perturb_number(number: str) -> str:
    if "." in number:
        value = float(number) * 2
        decimals = len(number.split(".")[1])
        return f"{value:.{decimals}f}"
    value = int(number)
    return str(value * 2 if value else 1)


def rewrite_rule_based(instance: PairInstance, rules: RuleSet | None = None) -> RewritePair:
    """Apply the first rule whose target appears in both claim and
    evidence, modifying both consistently.

    Raises NotRewritable when nothing applies; callers skip and count
    such instances.
    """
    rules = rules or RuleSet()

    def substitute(old: str, new: str, log: str) -> RewritePair:
        return RewritePair(
            original=instance,
            generated_claim=instance.claim.replace(old, new),
            generated_evidence=instance.evidence.replace(old, new),
            rewrite_log=(log,),
            source="rule",
        )

    for token in sorted(rules.antonyms, key=lambda t: (-len(t), t)):
        if token in instance.claim and token in instance.evidence:
            flipped = rules.flip(token)
            return substitute(token, flipped, f"antonym:{token}->{flipped}")

    evidence_numbers = set(_NUMBER_RE.findall(instance.evidence))
    for number in _NUMBER_RE.findall(instance.claim):
        if number in evidence_numbers:
            perturbed = _perturb_number(number)
            pattern = re.compile(rf"(?<![\d.]){re.escape(number)}(?![\d.])")
            return RewritePair(
                original=instance,
                generated_claim=pattern.sub(perturbed, instance.claim),
                generated_evidence=pattern.sub(perturbed, instance.evidence),
                rewrite_log=(f"number:{number}->{perturbed}",),
                source="rule",
            )

    for entity in sorted(rules.entity_swaps, key=lambda t: (-len(t), t)):
        if entity in instance.claim and entity in instance.evidence:
            swap = rules.entity_swaps[entity]
            return substitute(entity, swap, f"entity:{entity}->{swap}")

    raise NotRewritable(
        f"pair {instance.pair_id}: no shared flippable token, number, or entity"
    )


# --- symmetric expansion ---------------------------------------------------


def _flip_label(label: Label) -> Label:
    if label == Label.SUPPORTED:
        return Label.REFUTED
    if label == Label.REFUTED:
        return Label.SUPPORTED
    raise InvariantViolation("adversarial instances are binary; NEI cannot be flipped")


def _instance_record(
    rec_id: str, claim: str, evidence: str, label: Label, domain: str, source: str
) -> ClaimRecord:
    doc = EvidenceDocument.from_text(f"{rec_id}-ev", evidence)
    return ClaimRecord(
        id=rec_id,
        text=claim,
        label=label,
        domain=domain,
        gold_evidence=tuple((doc.doc_id, s.index) for s in doc.sentences),
        documents=(doc,),
        source=source,
    )


def build_symmetric(pairs: Sequence[RewritePair]) -> Corpus:
    """Expand rewrite pairs into the 4N-instance symmetric dataset.

    Per pair (c, e, L) with counterpart (c', e'): (c,e)->L original,
    (c',e')->L generated, (c,e')->flip cross, (c',e)->flip cross.
    Ids are deterministic; any invariant problem names the pair.
    """
    records: list[ClaimRecord] = []
    for i, pair in enumerate(pairs):
        pid = pair.original.pair_id or f"p{i:04d}"
        if pair.original.label == Label.NEI:
            raise InvariantViolation(f"pair {pid}: NEI originals are not allowed")
        if not pair.generated_claim.strip() or not pair.generated_evidence.strip():
            raise InvariantViolation(f"pair {pid}: empty generated text")
        if (
            pair.generated_claim == pair.original.claim
            or pair.generated_evidence == pair.original.evidence
        ):
            raise InvariantViolation(f"pair {pid}: generated text equals the original")
        c, e, lab = pair.original.claim, pair.original.evidence, pair.original.label
        c2, e2 = pair.generated_claim, pair.generated_evidence
        domain = pair.original.domain
        records.extend(
            [
                _instance_record(f"{pid}-orig", c, e, lab, domain, "original"),
                _instance_record(f"{pid}-gen", c2, e2, lab, domain, "generated"),
                _instance_record(f"{pid}-x1", c, e2, _flip_label(lab), domain, "cross"),
                _instance_record(f"{pid}-x2", c2, e, _flip_label(lab), domain, "cross"),
            ]
        )
    corpus = Corpus(records)
    verify_symmetric(corpus)
    return corpus


def verify_symmetric(corpus: Corpus) -> None:
    """Check the random-guess guarantee: every claim text (and every
    evidence text) occurs exactly once per binary label."""
    claim_counts: Counter = Counter()
    evidence_counts: Counter = Counter()
    for record in corpus:
        if record.label == Label.NEI:
            raise InvariantViolation(f"instance {record.id} carries NEI")
        claim_counts[(record.text, record.label)] += 1
        evidence_text = "".join(d.raw_text for d in record.documents)
        evidence_counts[(evidence_text, record.label)] += 1
    for counts, kind in ((claim_counts, "claim"), (evidence_counts, "evidence")):
        texts = {text for text, _ in counts}
        for text in texts:
            sup = counts.get((text, Label.SUPPORTED), 0)
            ref = counts.get((text, Label.REFUTED), 0)
            if sup != 1 or ref != 1:
                raise InvariantViolation(
                    f"{kind} text occurs {sup}x SUPPORTED / {ref}x REFUTED "
                    f"(expected exactly 1/1): {text[:40]!r}"
                )


def rewrite_corpus(
    instances: Sequence[PairInstance],
    rewriter: Callable[[PairInstance], RewritePair],
    max_in_flight: int = 1,
) -> tuple[list[RewritePair], list[tuple[str, str]]]:
    """Run a rewriter over instances, committing results in input order.

    Returns (pairs, skipped) where skipped holds (pair_id, reason) for
    instances the rewriter could not handle.
    """
    pairs: list[RewritePair] = []
    skipped: list[tuple[str, str]] = []

    def attempt(instance: PairInstance):
        try:
            return rewriter(instance)
        except (NotRewritable, RewriteError) as exc:
            return (instance.pair_id, str(exc))

    if max_in_flight <= 1:
        outcomes = [attempt(inst) for inst in instances]
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            outcomes = list(pool.map(attempt, instances))
    for outcome in outcomes:
        if isinstance(outcome, RewritePair):
            pairs.append(outcome)
        else:
            skipped.append(outcome)
    return pairs, skipped


def instances_from_corpus(corpus: Corpus) -> list[PairInstance]:
    """Claim/evidence pairs for rewriting: each record's claim with its
    concatenated gold (or full-document) evidence."""
    instances: list[PairInstance] = []
    for record in corpus:
        docs = {d.doc_id: d for d in record.documents}
        gold = record.resolve_gold()
        if gold:
            evidence = "".join(docs[doc_id].sentences[idx].text for doc_id, idx in gold)
        else:
            evidence = "".join(d.raw_text for d in record.documents)
        if not evidence:
            continue
        instances.append(
            PairInstance(record.id, record.text, evidence, record.label, record.domain)
        )
    return instances


# --- quality control -------------------------------------------------------


@dataclass(frozen=True)
class QCItem:
    pair_id: str
    claim: str
    evidence: str


def sample_for_qc(dataset: Corpus, fraction: float, seed: int) -> list[QCItem]:
    """Seeded uniform sample without replacement, labels stripped.

    Items come back in dataset order; at least one item is drawn.
    """
    if len(dataset) == 0:
        raise EmptyCorpusError("cannot sample from an empty dataset")
    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    import random

    n = max(1, int(round(fraction * len(dataset))))
    rng = random.Random(seed)
    chosen = sorted(rng.sample(range(len(dataset)), n))
    items: list[QCItem] = []
    for idx in chosen:
        record = dataset.records[idx]
        evidence = "\n".join(d.raw_text for d in record.documents)
        items.append(QCItem(record.id, record.text, evidence))
    return items


def write_qc_sample(items: Sequence[QCItem], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for item in items:
            fh.write(
                json.dumps(
                    {"pair_id": item.pair_id, "claim": item.claim, "evidence": item.evidence},
                    ensure_ascii=False,
                )
                + "\n"
            )


@dataclass(frozen=True)
class KappaResult:
    kappa: float
    observed_agreement: float
    expected_agreement: float
    n_items: int


def cohen_kappa(ratings_a: Sequence, ratings_b: Sequence) -> KappaResult:
    """Chance-corrected agreement between two raters.

    kappa = (p_o - p_e) / (1 - p_e) with p_e from each rater's marginal
    label frequencies. Two constant, identical raters are degenerate
    (p_e = 1); kappa is defined as 1.0 there, with a warning.
    """
    if len(ratings_a) != len(ratings_b):
        raise ValueError("both raters must rate the same items")
    n = len(ratings_a)
    if n < 2:
        raise ValueError("cohen_kappa needs at least 2 items")
    observed = sum(a == b for a, b in zip(ratings_a, ratings_b)) / n
    freq_a, freq_b = Counter(ratings_a), Counter(ratings_b)
    expected = sum(freq_a[l] / n * freq_b.get(l, 0) / n for l in freq_a)
    if expected == 1.0:
        warnings.warn("both raters are constant and equal; kappa defined as 1.0")
        return KappaResult(1.0, observed, expected, n)
    kappa = (observed - expected) / (1 - expected)
    return KappaResult(kappa, observed, expected, n)


# --- annotation storage ----------------------------------------------------


@dataclass(frozen=True)
class AnnotationRecord:
    pair_id: str
    annotator_id: str
    label: Label
    grammar_flag: bool = False
    timestamp: float = 0.0

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "annotator_id": self.annotator_id,
            "label": self.label.value,
            "grammar_flag": self.grammar_flag,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AnnotationRecord":
        return cls(
            pair_id=str(data["pair_id"]),
            annotator_id=str(data["annotator_id"]),
            label=Label(data["label"]),
            grammar_flag=bool(data.get("grammar_flag", False)),
            timestamp=float(data.get("timestamp", 0.0)),
        )


class AnnotationStore:
    """Append-only JSONL store; per-(pair, annotator) the last record wins.

    Writes are serialized with a lock so concurrent annotators through
    the server cannot interleave lines.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._records: dict[tuple[str, str], AnnotationRecord] = {}
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    record = AnnotationRecord.from_dict(json.loads(line))
                    self._records[(record.pair_id, record.annotator_id)] = record

    def add(self, record: AnnotationRecord) -> None:
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record.to_dict(), ensure_ascii=False) + "\n")
            self._records[(record.pair_id, record.annotator_id)] = record

    def get(self, pair_id: str, annotator_id: str) -> AnnotationRecord | None:
        return self._records.get((pair_id, annotator_id))

    def by_annotator(self, annotator_id: str) -> dict[str, AnnotationRecord]:
        return {
            pid: rec
            for (pid, aid), rec in self._records.items()
            if aid == annotator_id
        }

    def annotators(self) -> list[str]:
        return sorted({aid for _, aid in self._records})

    def __len__(self) -> int:
        return len(self._records)


def now_timestamp() -> float:
    return time.time()
