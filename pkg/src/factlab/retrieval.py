"""Sentence-level evidence retrieval by token-score aggregation.

A scorer assigns one score per character of an evidence document; the
retriever averages scores inside each sentence span, selects sentences
whose mean strictly exceeds the threshold, and ranks all sentences.
"Token" is a character position throughout, which keeps wire payloads
aligned with sentence char spans without committing to any subword
vocabulary. A TF-IDF semantic ranker baseline and retrieval evaluation
(Recall@k with seeded bootstrap intervals) live here too.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
import requests

from factlab.corpus import ClaimRecord, Corpus, EvidenceDocument
from factlab.errors import AlignmentError, ScoreRangeError, WireError, WireFormatError
from factlab.segmenter import Lexicon, segment, word_set

DEFAULT_THRESHOLD = 0.5
DEFAULT_K = 5


@dataclass(frozen=True)
class TokenScoreVector:
    doc_id: str
    scores: tuple[float, ...]

    def __post_init__(self) -> None:
        for s in self.scores:
            if not 0.0 <= s <= 1.0:
                raise ScoreRangeError(
                    f"token score {s} outside [0, 1] for doc {self.doc_id!r}"
                )


@dataclass(frozen=True)
class RetrievalConfig:
    threshold: float = DEFAULT_THRESHOLD
    k: int = DEFAULT_K
    mode: str = "both"  # select | rank | both

    def __post_init__(self) -> None:
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must be in [0, 1]")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.mode not in ("select", "rank", "both"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class RetrievalResult:
    doc_id: str
    sentence_means: list[float]
    ranking: list[int]          # sentence indices, best first
    selected: list[int]         # sentence indices with mean > threshold

    def is_selected(self, index: int) -> bool:
        return index in self.selected


def aggregate(
    doc: EvidenceDocument, scores: TokenScoreVector, cfg: RetrievalConfig
) -> RetrievalResult:
    """Average token scores per sentence; select strictly above threshold.

    Ranking ties are broken by the earlier sentence index.
    """
    if len(scores.scores) != len(doc.raw_text):
        raise AlignmentError(
            f"doc {doc.doc_id!r} has {len(doc.raw_text)} characters but "
            f"{len(scores.scores)} scores"
        )
    means = [
        sum(scores.scores[a:b]) / (b - a) for (a, b) in (s.char_span for s in doc.sentences)
    ]
    ranking = sorted(range(len(means)), key=lambda i: (-means[i], i))
    selected = [i for i in range(len(means)) if means[i] > cfg.threshold]
    return RetrievalResult(doc.doc_id, means, ranking, selected)


def lexical_token_scorer(
    claim: str, doc: EvidenceDocument, lexicon: Lexicon
) -> TokenScoreVector:
    """Offline scorer: a character scores 1.0 when its containing word
    appears among the claim's words, else 0.0."""
    claim_words = word_set(claim, lexicon)
    scores = [0.0] * len(doc.raw_text)
    for token in segment(doc.raw_text, lexicon):
        if token.text in claim_words:
            for pos in range(*token.char_span):
                scores[pos] = 1.0
    return TokenScoreVector(doc.doc_id, tuple(scores))


class RemoteTokenScorer:
    """Client for the token-scorer wire protocol.

    POST {endpoint}/score_tokens {"claim", "doc_id", "text"}
      -> {"scores": [float; len(text)]}
    """

    def __init__(self, endpoint: str, timeout: float = 30.0):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout

    def __call__(self, claim: str, doc: EvidenceDocument) -> TokenScoreVector:
        payload = {"claim": claim, "doc_id": doc.doc_id, "text": doc.raw_text}
        try:
            resp = requests.post(
                f"{self.endpoint}/score_tokens", json=payload, timeout=self.timeout
            )
            resp.raise_for_status()
        except requests.RequestException as exc:
            raise WireError(f"token scorer request failed: {exc}") from exc
        try:
            body = resp.json()
        except ValueError as exc:
            raise WireFormatError(f"token scorer returned invalid JSON: {exc}") from exc
        scores = body.get("scores")
        if not isinstance(scores, list) or not all(
            isinstance(s, (int, float)) for s in scores
        ):
            raise WireFormatError("token scorer response lacks a numeric 'scores' list")
        if len(scores) != len(doc.raw_text):
            raise AlignmentError(
                f"scorer returned {len(scores)} scores for a "
                f"{len(doc.raw_text)}-character document"
            )
        return TokenScoreVector(doc.doc_id, tuple(float(s) for s in scores))


class RemotePairScorer:
    """Client for the sentence-pair wire variant.

    POST {endpoint}/score_pair {"claim", "sentence"} -> {"score": float}
    """

    def __init__(self, endpoint: str, timeout: float = 30.0):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout

    def __call__(self, claim: str, sentence: str) -> float:
        try:
            resp = requests.post(
                f"{self.endpoint}/score_pair",
                json={"claim": claim, "sentence": sentence},
                timeout=self.timeout,
            )
            resp.raise_for_status()
        except requests.RequestException as exc:
            raise WireError(f"pair scorer request failed: {exc}") from exc
        try:
            body = resp.json()
        except ValueError as exc:
            raise WireFormatError(f"pair scorer returned invalid JSON: {exc}") from exc
        score = body.get("score")
        if not isinstance(score, (int, float)):
            raise WireFormatError("pair scorer response lacks a numeric 'score'")
        return float(score)


def _char_bigrams(text: str) -> list[str]:
    if len(text) < 2:
        return [text] if text else []
    return [text[i : i + 2] for i in range(len(text) - 1)]


def semantic_ranker(claim: str, sentences: Sequence[str]) -> list[tuple[int, float]]:
    """Rank sentences by cosine similarity of character-bigram TF-IDF.

    IDF comes from the given sentence collection; ties break by sentence
    index. An identical sentence always scores 1.0.
    """
    if not sentences:
        raise ValueError("semantic_ranker needs at least one sentence")
    n = len(sentences)
    df: Counter = Counter()
    sent_grams = [Counter(_char_bigrams(s)) for s in sentences]
    for grams in sent_grams:
        df.update(grams.keys())

    def idf(gram: str) -> float:
        return math.log((1 + n) / (1 + df.get(gram, 0))) + 1.0

    def vectorize(grams: Counter) -> dict[str, float]:
        return {g: tf * idf(g) for g, tf in grams.items()}

    def cosine(u: dict[str, float], v: dict[str, float]) -> float:
        if not u or not v:
            return 0.0
        dot = sum(w * v[g] for g, w in u.items() if g in v)
        nu = math.sqrt(sum(w * w for w in u.values()))
        nv = math.sqrt(sum(w * w for w in v.values()))
        if nu == 0.0 or nv == 0.0:
            return 0.0
        return dot / (nu * nv)

    claim_vec = vectorize(Counter(_char_bigrams(claim)))
    scored = [(i, cosine(claim_vec, vectorize(g))) for i, g in enumerate(sent_grams)]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored


SentenceRef = tuple[str, int]


@dataclass
class ClaimRetrieval:
    """Merged retrieval output for one claim across its documents."""

    claim_id: str
    ranked: list[tuple[SentenceRef, float]]
    selected: list[SentenceRef]
    fallback_used: bool = False

    def top_k(self, k: int) -> list[SentenceRef]:
        return [ref for ref, _ in self.ranked[:k]]

    def evidence_refs(self) -> list[SentenceRef]:
        """Sentences to hand to a verifier: the selected set in rank
        order, or the top-1 sentence when nothing cleared the threshold."""
        if self.selected:
            chosen = set(self.selected)
            return [ref for ref, _ in self.ranked if ref in chosen]
        return [ref for ref, _ in self.ranked[:1]]


TokenScorer = Callable[[str, EvidenceDocument], TokenScoreVector]


def retrieve_for_claim(
    record: ClaimRecord, scorer: TokenScorer, cfg: RetrievalConfig
) -> ClaimRetrieval:
    """Score each document independently and merge into one ranked list.

    Cross-document ties break by the record's document order, then by
    sentence index. When no sentence clears the threshold the top-ranked
    sentence is kept as verifier fallback.
    """
    candidates: list[tuple[SentenceRef, float, int]] = []
    selected: list[SentenceRef] = []
    for doc_pos, doc in enumerate(record.documents):
        if not doc.raw_text:
            continue
        result = aggregate(doc, scorer(record.text, doc), cfg)
        for sent in doc.sentences:
            candidates.append(
                ((doc.doc_id, sent.index), result.sentence_means[sent.index], doc_pos)
            )
        selected.extend((doc.doc_id, i) for i in result.selected)
    candidates.sort(key=lambda c: (-c[1], c[2], c[0][1]))
    ranked = [(ref, score) for ref, score, _ in candidates]
    fallback = not selected and bool(ranked)
    return ClaimRetrieval(record.id, ranked, selected, fallback_used=fallback)


def retrieve_corpus(
    corpus: Corpus,
    scorer: TokenScorer,
    cfg: RetrievalConfig,
    max_in_flight: int = 1,
) -> dict[str, ClaimRetrieval]:
    """Retrieve for every claim; results keyed by claim id.

    Claims are independent; ``max_in_flight`` bounds concurrent scorer
    calls (useful for remote scorers). Output order is input order.
    """
    if max_in_flight <= 1:
        return {r.id: retrieve_for_claim(r, scorer, cfg) for r in corpus}
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        results = pool.map(lambda r: retrieve_for_claim(r, scorer, cfg), corpus.records)
    return {res.claim_id: res for res in results}


def rank_with_pair_scorer(
    record: ClaimRecord,
    pair_score: Callable[[str, str], float],
    cfg: RetrievalConfig,
) -> ClaimRetrieval:
    """Claim retrieval built from independent (claim, sentence) scores.

    Used for the semantic-ranker baseline and its remote variant; the
    'selected' set is the top-k ranked sentences since pairwise scores
    carry no calibrated threshold.
    """
    candidates: list[tuple[SentenceRef, float, int]] = []
    for doc_pos, doc in enumerate(record.documents):
        for sent in doc.sentences:
            candidates.append(
                ((doc.doc_id, sent.index), pair_score(record.text, sent.text), doc_pos)
            )
    candidates.sort(key=lambda c: (-c[1], c[2], c[0][1]))
    ranked = [(ref, score) for ref, score, _ in candidates]
    selected = [ref for ref, _ in ranked[: cfg.k]]
    return ClaimRetrieval(record.id, ranked, selected)


def semantic_retrieve_for_claim(record: ClaimRecord, cfg: RetrievalConfig) -> ClaimRetrieval:
    sentences: list[str] = []
    refs: list[tuple[SentenceRef, int]] = []
    for doc_pos, doc in enumerate(record.documents):
        for sent in doc.sentences:
            sentences.append(sent.text)
            refs.append(((doc.doc_id, sent.index), doc_pos))
    if not sentences:
        return ClaimRetrieval(record.id, [], [])
    scored = semantic_ranker(record.text, sentences)
    candidates = [(refs[i][0], score, refs[i][1]) for i, score in scored]
    candidates.sort(key=lambda c: (-c[1], c[2], c[0][1]))
    ranked = [(ref, score) for ref, score, _ in candidates]
    selected = [ref for ref, _ in ranked[: cfg.k]]
    return ClaimRetrieval(record.id, ranked, selected)


@dataclass
class RecallReport:
    mean: float
    per_claim: dict[str, float]
    excluded: list[str] = field(default_factory=list)


def recall_at_k(
    results: Mapping[str, Sequence[SentenceRef]],
    gold: Mapping[str, Iterable[SentenceRef]],
    k: int,
    mode: str = "coverage",
) -> RecallReport:
    """Macro-averaged gold coverage within the top-k ranked sentences.

    ``mode='coverage'`` scores |gold ∩ top-k| / |gold| per claim;
    ``mode='any_hit'`` scores 1.0 when at least one gold sentence made
    the top k. Claims without gold are excluded and reported.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if mode not in ("coverage", "any_hit"):
        raise ValueError(f"unknown recall mode {mode!r}")
    per_claim: dict[str, float] = {}
    excluded: list[str] = []
    for claim_id, ranked in results.items():
        gold_set = set(gold.get(claim_id, ()))
        if not gold_set:
            excluded.append(claim_id)
            continue
        hits = len(gold_set.intersection(ranked[:k]))
        per_claim[claim_id] = (
            hits / len(gold_set) if mode == "coverage" else float(hits > 0)
        )
    mean = sum(per_claim.values()) / len(per_claim) if per_claim else 0.0
    return RecallReport(mean, per_claim, excluded)


def bootstrap_interval(
    per_claim_values: Sequence[float], resamples: int = 1000, seed: int = 0
) -> tuple[float, float]:
    """Seeded bootstrap over claims; returns (mean, resample-mean std)."""
    values = np.asarray(per_claim_values, dtype=float)
    if values.size < 2:
        raise ValueError("bootstrap_interval needs at least 2 values")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, values.size, size=(resamples, values.size))
    resample_means = values[idx].mean(axis=1)
    return float(values.mean()), float(resample_means.std())
