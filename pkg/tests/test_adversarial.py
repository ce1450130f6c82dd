"""Rewriting, symmetric expansion, and QC machinery."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factlab.adversarial import (
    DEFAULT_ANTONYMS,
    DEFAULT_PROMPT_LAYOUT,
    AnnotationRecord,
    AnnotationStore,
    LlmClient,
    PairInstance,
    RewritePair,
    RuleSet,
    build_prompt,
    build_symmetric,
    check_rewrite_invariants,
    cohen_kappa,
    instances_from_corpus,
    parse_rewrite_completion,
    rewrite_rule_based,
    rewrite_via_llm,
    sample_for_qc,
    verify_symmetric,
    word_overlap,
)
from factlab.corpus import Corpus, Label
from factlab.errors import (
    EmptyCorpusError,
    InvariantViolation,
    NotRewritable,
    RewriteError,
    WireFormatError,
)
from factlab.segmenter import Lexicon
from conftest import make_record

SUP, REF = Label.SUPPORTED, Label.REFUTED


def instance(claim="央行上调利率27个基点。",
             evidence="据报道，央行宣布上调利率27个基点。", label=SUP):
    return PairInstance("p1", claim, evidence, label)


class TestWordOverlap:
    def test_symmetric(self, lexicon):
        a, b = "央行上调利率。", "央行下调利率。"
        assert word_overlap(a, b, lexicon) == word_overlap(b, a, lexicon)

    def test_identical_texts(self, lexicon):
        assert word_overlap("央行上调", "央行上调", lexicon) == 1.0

    def test_both_empty_is_one(self, lexicon):
        assert word_overlap("", "", lexicon) == 1.0

    def test_disjoint_is_zero(self, lexicon):
        assert word_overlap("甲", "乙", lexicon) == 0.0

    def test_hand_value(self):
        lex = Lexicon.from_words(["央行", "上调", "下调", "利率"])
        # sets {央行,上调,利率} vs {央行,下调,利率}: 2 shared / 4 union
        assert word_overlap("央行上调利率", "央行下调利率", lex) == 0.5


class TestRuleRewrites:
    def test_antonym_flip(self):
        pair = rewrite_rule_based(instance())
        assert pair.generated_claim == "央行下调利率27个基点。"
        assert "下调" in pair.generated_evidence
        assert pair.rewrite_log == ("antonym:上调->下调",)
        assert pair.source == "rule"

    def test_flip_twice_restores_original(self):
        pair = rewrite_rule_based(instance())
        back = rewrite_rule_based(
            PairInstance("p1b", pair.generated_claim, pair.generated_evidence, SUP)
        )
        assert back.generated_claim == instance().claim
        assert back.generated_evidence == instance().evidence

    @given(st.sampled_from(sorted(DEFAULT_ANTONYMS)))
    @settings(max_examples=50, deadline=None)
    def test_antonym_table_is_an_involution(self, token):
        rules = RuleSet()
        assert rules.flip(rules.flip(token)) == token
        assert rules.flip(token) != token

    def test_number_perturbation_when_no_antonym(self):
        inst = PairInstance("p2", "该市人口为300万。", "统计显示该市人口为300万。", SUP)
        pair = rewrite_rule_based(inst)
        assert pair.generated_claim == "该市人口为600万。"
        assert pair.generated_evidence == "统计显示该市人口为600万。"
        assert pair.rewrite_log == ("number:300->600",)

    def test_zero_becomes_one(self):
        inst = PairInstance("p3", "死亡0人。", "通报称死亡0人。", SUP)
        pair = rewrite_rule_based(inst)
        assert "1人" in pair.generated_claim

    def test_decimal_number(self):
        inst = PairInstance("p4", "增长2.5个百分点。", "数据为2.5个百分点。", SUP)
        pair = rewrite_rule_based(inst)
        assert "5.0" in pair.generated_claim

    def test_number_must_be_shared(self):
        inst = PairInstance("p5", "增长25点。", "数据另有说明。", SUP)
        with pytest.raises(NotRewritable):
            rewrite_rule_based(inst)

    def test_entity_swap_as_last_resort(self):
        inst = PairInstance("p6", "北京将降温。", "气象台称北京将降温。", SUP)
        pair = rewrite_rule_based(inst)
        assert pair.generated_claim == "上海将降温。"
        assert pair.rewrite_log == ("entity:北京->上海",)

    def test_not_rewritable(self):
        inst = PairInstance("p7", "甲乙丙。", "丁戊己。", SUP)
        with pytest.raises(NotRewritable):
            rewrite_rule_based(inst)

    def test_rule_applies_to_both_sides_consistently(self):
        inst = PairInstance(
            "p8", "利率上调后又上调。", "报道称利率上调后又上调一次。", SUP
        )
        pair = rewrite_rule_based(inst)
        assert pair.generated_claim.count("下调") == 2
        assert pair.generated_evidence.count("下调") == 2
        assert "上调" not in pair.generated_claim


class TestInvariants:
    def test_valid_pair_passes(self, lexicon):
        check_rewrite_invariants(rewrite_rule_based(instance()), lexicon)

    def test_identity_claim_rejected(self, lexicon):
        pair = RewritePair(instance(), instance().claim, "别的证据。", (), "rule")
        with pytest.raises(InvariantViolation):
            check_rewrite_invariants(pair, lexicon)

    def test_empty_generation_rejected(self, lexicon):
        pair = RewritePair(instance(), " ", "别的证据。", (), "rule")
        with pytest.raises(InvariantViolation):
            check_rewrite_invariants(pair, lexicon)

    def test_low_overlap_rejected(self, lexicon):
        pair = RewritePair(instance(), "完全无关的新声明。", "别的证据。", (), "rule")
        with pytest.raises(InvariantViolation):
            check_rewrite_invariants(pair, lexicon, overlap_threshold=0.6)


class TestPrompt:
    def test_sections_appear_in_order(self):
        prompt = build_prompt(instance())
        role = prompt.find("事实核查")
        step1 = prompt.find("第一步")
        step2 = prompt.find("第二步")
        strategies = prompt.find("改写策略")
        requirement = prompt.find("最重要的要求")
        payload = prompt.find("```")
        positions = [role, step1, step2, strategies, requirement, payload]
        assert all(p >= 0 for p in positions)
        assert positions == sorted(positions)

    def test_payload_is_fenced(self):
        prompt = build_prompt(instance())
        assert f"```\n声明：{instance().claim}\n证据：{instance().evidence}\n```" in prompt

    def test_payload_with_backticks_gets_wider_fence(self):
        inst = PairInstance("p1", "内含```代码```标记。", "证据。", SUP)
        prompt = build_prompt(inst)
        assert "````\n" in prompt

    def test_exemplars_listed_when_given(self):
        pair = rewrite_rule_based(instance())
        prompt = build_prompt(instance(), exemplars=[pair, pair])
        assert "示例1" in prompt and "示例2" in prompt

    def test_empty_exemplars_section_omitted(self):
        prompt = build_prompt(instance())
        assert "示例1" not in prompt
        assert "\n\n\n" not in prompt

    def test_missing_placeholder_errors(self):
        with pytest.raises(ValueError, match="payload"):
            build_prompt(instance(), template="{role}\n{step1}\n{step2}\n{strategies}\n{exemplars}\n{requirement}")


class TestParseCompletion:
    def test_plain(self):
        claim, evidence = parse_rewrite_completion(
            "CLAIM: 新声明。\nEVIDENCE: 新证据。"
        )
        assert claim == "新声明。"
        assert evidence == "新证据。"

    def test_fullwidth_colon_and_fences(self):
        claim, evidence = parse_rewrite_completion(
            "```\nCLAIM： 新声明。\nEVIDENCE： 新证据。\n```"
        )
        assert claim == "新声明。"
        assert evidence == "新证据。"

    def test_multiline_evidence(self):
        _, evidence = parse_rewrite_completion(
            "CLAIM: 新声明。\nEVIDENCE: 第一句。\n第二句。"
        )
        assert evidence == "第一句。\n第二句。"

    def test_missing_blocks(self):
        with pytest.raises(WireFormatError):
            parse_rewrite_completion("这里没有结构化输出。")

    def test_empty_block(self):
        with pytest.raises(WireFormatError):
            parse_rewrite_completion("CLAIM:\nEVIDENCE: x")


class ScriptedClient(LlmClient):
    """LlmClient that replays canned completions instead of HTTP."""

    def __init__(self, completions):
        super().__init__("http://unused", "scripted")
        self.completions = list(completions)
        self.calls = 0

    def complete(self, prompt):
        self.calls += 1
        return self.completions.pop(0)


class TestLlmRewrite:
    GOOD = "CLAIM: 央行下调利率27个基点。\nEVIDENCE: 据报道，央行宣布下调利率27个基点。"

    def test_accepts_valid_completion(self, lexicon):
        client = ScriptedClient([self.GOOD])
        pair = rewrite_via_llm(instance(), client, lexicon=lexicon)
        assert pair.generated_claim == "央行下调利率27个基点。"
        assert pair.source == "llm"
        assert client.calls == 1

    def test_retries_after_parse_failure(self, lexicon):
        client = ScriptedClient(["垃圾输出", self.GOOD])
        pair = rewrite_via_llm(instance(), client, lexicon=lexicon)
        assert client.calls == 2
        assert pair.rewrite_log[0].endswith("attempt1")

    def test_retries_after_invariant_violation(self, lexicon):
        identical = f"CLAIM: {instance().claim}\nEVIDENCE: 新证据。"
        client = ScriptedClient([identical, self.GOOD])
        pair = rewrite_via_llm(instance(), client, lexicon=lexicon)
        assert client.calls == 2
        assert pair.generated_claim != instance().claim

    def test_exhausted_retries_raise(self, lexicon):
        client = ScriptedClient(["垃圾"] * 4)
        with pytest.raises(RewriteError):
            rewrite_via_llm(instance(), client, lexicon=lexicon, retries=3)
        assert client.calls == 4


class TestBuildSymmetric:
    def pairs(self, n=6):
        out = []
        for i in range(n):
            inst = PairInstance(
                f"q{i}",
                f"指数{i}上涨{i + 1}点。",
                f"收盘数据显示指数{i}上涨{i + 1}点。",
                SUP if i % 2 == 0 else REF,
            )
            out.append(rewrite_rule_based(inst))
        return out

    def test_four_n_records(self):
        pairs = self.pairs()
        corpus = build_symmetric(pairs)
        assert len(corpus) == 4 * len(pairs)

    def test_claims_appear_twice_with_opposite_labels(self):
        corpus = build_symmetric(self.pairs())
        seen = {}
        for record in corpus:
            seen.setdefault(record.text, []).append(record.label)
        for labels in seen.values():
            assert sorted(l.value for l in labels) == ["REFUTED", "SUPPORTED"]

    def test_sources_and_ids(self):
        corpus = build_symmetric(self.pairs(1))
        by_id = {r.id: r for r in corpus}
        assert by_id["q0-orig"].source == "original"
        assert by_id["q0-gen"].source == "generated"
        assert by_id["q0-x1"].source == "cross"
        assert by_id["q0-x2"].source == "cross"

    def test_cross_records_flip_label(self):
        corpus = build_symmetric(self.pairs(2))
        by_id = {r.id: r for r in corpus}
        assert by_id["q0-orig"].label == SUP
        assert by_id["q0-x1"].label == REF
        assert by_id["q1-orig"].label == REF
        assert by_id["q1-x1"].label == SUP

    def test_evidence_becomes_document_with_full_gold(self):
        corpus = build_symmetric(self.pairs(1))
        record = corpus["q0-orig"]
        assert len(record.documents) == 1
        assert record.resolve_gold() == [
            (record.documents[0].doc_id, s.index)
            for s in record.documents[0].sentences
        ]

    def test_nei_rejected(self):
        bad = RewritePair(
            PairInstance("n1", "甲。", "乙。", Label.NEI), "丙。", "丁。", (), "rule"
        )
        with pytest.raises(InvariantViolation, match="n1"):
            build_symmetric([bad])

    def test_duplicate_claims_across_pairs_rejected(self):
        pair = self.pairs(1)[0]
        clone = RewritePair(
            PairInstance("q9", pair.original.claim, "其他证据文本。", SUP),
            pair.generated_claim,
            "其他证据改写。",
            (),
            "rule",
        )
        with pytest.raises(InvariantViolation):
            build_symmetric([pair, clone])

    def test_verify_symmetric_catches_label_imbalance(self):
        corpus = build_symmetric(self.pairs(2))
        broken = Corpus(
            [r for r in corpus if r.id != "q0-x1"]
        )
        with pytest.raises(InvariantViolation):
            verify_symmetric(broken)

    def test_instances_round_trip_from_corpus(self, tiny_corpus):
        instances = instances_from_corpus(tiny_corpus)
        assert [i.pair_id for i in instances] == tiny_corpus.ids()
        assert all(i.evidence for i in instances)


class TestQcSample:
    def corpus(self, n=40):
        return Corpus(
            [make_record(f"r{i}", f"声明{i}。", evidence=f"证据{i}。") for i in range(n)]
        )

    def test_size_and_determinism(self):
        corpus = self.corpus()
        a = sample_for_qc(corpus, 0.25, seed=5)
        b = sample_for_qc(corpus, 0.25, seed=5)
        assert len(a) == 10
        assert a == b

    def test_items_in_corpus_order_without_labels(self):
        items = sample_for_qc(self.corpus(), 0.5, seed=1)
        ids = [item.pair_id for item in items]
        order = {rid: i for i, rid in enumerate(self.corpus().ids())}
        assert ids == sorted(ids, key=order.__getitem__)
        payload = json.dumps([item.__dict__ for item in items], ensure_ascii=False)
        assert "label" not in payload.lower()

    def test_different_seed_differs(self):
        corpus = self.corpus()
        assert sample_for_qc(corpus, 0.25, seed=1) != sample_for_qc(corpus, 0.25, seed=2)

    def test_fraction_validated(self):
        with pytest.raises(ValueError):
            sample_for_qc(self.corpus(), 0.0, seed=0)
        with pytest.raises(ValueError):
            sample_for_qc(self.corpus(), 1.5, seed=0)

    def test_empty_dataset(self):
        with pytest.raises(EmptyCorpusError):
            sample_for_qc(Corpus([]), 0.5, seed=0)


class TestKappa:
    def test_perfect_agreement(self):
        result = cohen_kappa(["a", "b", "c", "a"], ["a", "b", "c", "a"])
        assert result.kappa == 1.0
        assert result.observed_agreement == 1.0

    def test_confusion_matrix_value(self):
        a = ["x"] * 45 + ["y"] * 55
        b = ["x"] * 40 + ["y"] * 5 + ["x"] * 6 + ["y"] * 49
        result = cohen_kappa(a, b)
        assert result.observed_agreement == pytest.approx(0.89)
        assert result.expected_agreement == pytest.approx(0.504)
        assert result.kappa == pytest.approx(0.7782, abs=1e-4)

    def test_constant_identical_raters_warn(self):
        with pytest.warns(UserWarning):
            result = cohen_kappa(["a", "a"], ["a", "a"])
        assert result.kappa == 1.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            cohen_kappa(["a"], ["a", "b"])

    def test_too_few_items(self):
        with pytest.raises(ValueError):
            cohen_kappa(["a"], ["b"])

    @pytest.mark.filterwarnings("ignore:both raters are constant")
    @given(st.lists(st.tuples(st.sampled_from("xyz"), st.sampled_from("xyz")),
                    min_size=2, max_size=60))
    @settings(max_examples=150, deadline=None)
    def test_relabeling_invariance(self, ratings):
        a = [p[0] for p in ratings]
        b = [p[1] for p in ratings]
        swap = {"x": "z", "y": "x", "z": "y"}
        k1 = cohen_kappa(a, b)
        k2 = cohen_kappa([swap[v] for v in a], [swap[v] for v in b])
        assert k1.kappa == pytest.approx(k2.kappa, abs=1e-12)


class TestAnnotationStore:
    def test_last_write_wins_and_persists(self, tmp_path):
        path = tmp_path / "store.jsonl"
        store = AnnotationStore(path)
        store.add(AnnotationRecord("p1", "ann", SUP))
        store.add(AnnotationRecord("p1", "ann", REF, grammar_flag=True))
        assert len(store) == 1
        assert store.get("p1", "ann").label == REF
        # two physical lines, last one wins on reload
        assert len(path.read_text(encoding="utf-8").splitlines()) == 2
        reloaded = AnnotationStore(path)
        assert reloaded.get("p1", "ann").label == REF
        assert reloaded.get("p1", "ann").grammar_flag is True

    def test_by_annotator_and_names(self, tmp_path):
        store = AnnotationStore(tmp_path / "s.jsonl")
        store.add(AnnotationRecord("p1", "a", SUP))
        store.add(AnnotationRecord("p2", "a", REF))
        store.add(AnnotationRecord("p1", "b", SUP))
        assert set(store.by_annotator("a")) == {"p1", "p2"}
        assert store.annotators() == ["a", "b"]


class TestRewriteCorpus:
    def test_skips_are_reported(self):
        from factlab.adversarial import rewrite_corpus

        good = instance()
        bad = PairInstance("pX", "甲乙。", "丙丁。", SUP)
        pairs, skipped = rewrite_corpus([good, bad], rewrite_rule_based)
        assert len(pairs) == 1
        assert skipped[0][0] == "pX"
