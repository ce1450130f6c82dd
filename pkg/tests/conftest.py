"""Shared fixtures."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from factlab.corpus import ClaimRecord, Corpus, EvidenceDocument, Label, record_to_dict
from factlab.segmenter import Lexicon


def make_record(
    rec_id: str,
    claim: str,
    label: Label = Label.SUPPORTED,
    evidence: str | None = None,
    domain: str = "unknown",
    gold: tuple = (),
) -> ClaimRecord:
    documents = ()
    if evidence is not None:
        doc = EvidenceDocument.from_text(f"{rec_id}-d0", evidence)
        documents = (doc,)
        if not gold:
            gold = tuple((doc.doc_id, s.index) for s in doc.sentences)
    return ClaimRecord(
        id=rec_id, text=claim, label=label, domain=domain,
        gold_evidence=gold, documents=documents,
    )


def write_corpus_jsonl(corpus: Corpus, path: Path) -> Path:
    with open(path, "w", encoding="utf-8") as fh:
        for record in corpus:
            fh.write(json.dumps(record_to_dict(record), ensure_ascii=False) + "\n")
    return path


@pytest.fixture
def lexicon() -> Lexicon:
    return Lexicon.from_words(
        ["央行", "上调", "下调", "利率", "基点", "疫苗", "病毒", "外交部",
         "台湾", "北京", "上海", "电影", "人民币", "银行", "记者"]
    )


@pytest.fixture
def tiny_corpus() -> Corpus:
    return Corpus(
        [
            make_record("c1", "央行上调利率。", Label.SUPPORTED,
                        evidence="据悉，央行上调利率。市场平稳。", domain="politics"),
            make_record("c2", "疫苗导致病毒变异。", Label.REFUTED,
                        evidence="专家辟谣：疫苗不会导致病毒变异。", domain="health"),
            make_record("c3", "北京发布电影新规。", Label.SUPPORTED,
                        evidence="北京市发布电影行业新规。", domain="culture"),
            make_record("c4", "人民币兑美元下跌。", Label.NEI,
                        evidence="银行暂未回应人民币汇率问题。", domain="finance"),
        ]
    )
