"""Synthetic corpus builders shared by module and acceptance tests.

The planted-bias corpora give a claim-side artifact with a known
p(label|phrase); the direction corpora are solvable only by comparing
claim and evidence, which is what inoculation is supposed to teach.
"""

from __future__ import annotations

import random

from factlab.adversarial import PairInstance, RuleSet, rewrite_rule_based, build_symmetric
from factlab.corpus import ClaimRecord, Corpus, EvidenceDocument, Label

# distinct filler characters (no repeats, no overlap with marker words)
NOISE = "天地玄黄宇宙洪荒日月盈昃辰宿列张寒来暑往秋收冬藏闰余成岁律吕调阳"

GENERIC_EVIDENCE = "有关部门表示，网传情况正在进一步核实之中，请以权威通报为准。"


def _noise(rng: random.Random, n: int) -> str:
    return "".join(rng.choice(NOISE) for _ in range(n))


def _record(rec_id, claim, evidence, label, domain="synthetic"):
    doc = EvidenceDocument.from_text(f"{rec_id}-d0", evidence)
    return ClaimRecord(
        id=rec_id,
        text=claim,
        label=label,
        domain=domain,
        gold_evidence=tuple((doc.doc_id, s.index) for s in doc.sentences),
        documents=(doc,),
    )


def planted_bias_corpus(
    n: int = 500,
    p_supported: float = 0.9,
    seed: int = 13,
    id_prefix: str = "b",
) -> Corpus:
    """Every claim contains the marker 货币; exactly p_supported of them
    are SUPPORTED. Evidence is generic and label-blind, so the only
    learnable signal is on the claim side."""
    rng = random.Random(seed)
    n_sup = round(n * p_supported)
    records = []
    for i in range(n):
        label = Label.SUPPORTED if i < n_sup else Label.REFUTED
        claim = f"货币{_noise(rng, 4)}第{i}号通告。"
        records.append(_record(f"{id_prefix}{i}", claim, GENERIC_EVIDENCE, label))
    return Corpus(records)


def direction_instances(
    n_pairs: int, seed: int, id_prefix: str
) -> list[PairInstance]:
    """Claim and evidence both carry 上调 plus a shared serial number."""
    rng = random.Random(seed)
    instances = []
    for i in range(n_pairs):
        filler = _noise(rng, 4)
        serial = f"{id_prefix}{i}"
        claim = f"股市{filler}上调{i}点。"
        evidence = f"记者获悉，股市{filler}上调{i}点，为第{i}次调整。"
        instances.append(PairInstance(serial, claim, evidence, Label.SUPPORTED))
    return instances


def direction_symmetric_corpus(n_pairs: int, seed: int, id_prefix: str) -> Corpus:
    """Symmetric dataset where the label is decided by whether claim and
    evidence agree on 上调 vs 下调 — unreachable from the claim alone."""
    pairs = [rewrite_rule_based(inst, RuleSet()) for inst in direction_instances(n_pairs, seed, id_prefix)]
    return build_symmetric(pairs)


def symmetrized_bias_corpus(corpus: Corpus) -> Corpus:
    """Symmetric counterpart of a planted-bias corpus.

    Each claim gets a rewritable marker pair by construction (货币 in
    claim only is not shared with the generic evidence), so rewriting
    swaps the per-claim serial number instead: we rebuild instances with
    evidence echoing the claim, then flip 第N号 via the numeric rule.
    """
    instances = []
    for record in corpus:
        evidence = f"通告称：{record.text}"
        instances.append(
            PairInstance(record.id, record.text, evidence, record.label, record.domain)
        )
    pairs = [rewrite_rule_based(inst, RuleSet()) for inst in instances]
    return build_symmetric(pairs)
