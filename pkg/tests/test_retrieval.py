"""Evidence retrieval: aggregation, scorers, wire clients, recall."""

import random

import pytest

from factlab.corpus import EvidenceDocument
from factlab.errors import AlignmentError, ScoreRangeError, WireError, WireFormatError
from factlab.retrieval import (
    RemotePairScorer,
    RemoteTokenScorer,
    RetrievalConfig,
    TokenScoreVector,
    aggregate,
    bootstrap_interval,
    lexical_token_scorer,
    recall_at_k,
    retrieve_corpus,
    retrieve_for_claim,
    semantic_ranker,
    semantic_retrieve_for_claim,
)
from factlab.segmenter import Lexicon
from conftest import make_record
from mockwire import Raw, wire_server
from oracles import recall_oracle

CFG = RetrievalConfig()


def doc(text, doc_id="d0"):
    return EvidenceDocument.from_text(doc_id, text)


def scores_for(document, values):
    return TokenScoreVector(document.doc_id, tuple(values))


class TestAggregate:
    def test_hand_means(self):
        d = doc("甲乙丙。丁戊。")  # sentences of length 4 and 3
        vec = scores_for(d, [0.2, 0.9, 0.7, 0.6, 0.2, 0.3, 0.1])
        result = aggregate(d, vec, CFG)
        assert result.sentence_means[0] == pytest.approx((0.2 + 0.9 + 0.7 + 0.6) / 4)
        assert result.sentence_means[1] == pytest.approx(0.2, abs=1e-12)
        assert result.selected == [0]

    def test_selection_is_strictly_greater(self):
        d = doc("甲乙。")  # one sentence, 3 chars
        vec = scores_for(d, [0.25, 0.75, 0.5])  # mean exactly 0.5
        assert aggregate(d, vec, CFG).selected == []
        vec_above = scores_for(d, [0.25, 0.76, 0.5])
        assert aggregate(d, vec_above, CFG).selected == [0]

    def test_length_mismatch(self):
        d = doc("甲乙。")
        with pytest.raises(AlignmentError):
            aggregate(d, scores_for(d, [0.5, 0.5]), CFG)

    def test_score_range_enforced(self):
        d = doc("甲。")
        with pytest.raises(ScoreRangeError):
            scores_for(d, [0.5, 1.5])
        with pytest.raises(ScoreRangeError):
            scores_for(d, [-0.1, 0.5])

    def test_ranking_ties_prefer_earlier_sentence(self):
        d = doc("甲。乙。")
        vec = scores_for(d, [0.7, 0.7, 0.7, 0.7])
        result = aggregate(d, vec, CFG)
        assert result.ranking == [0, 1]

    def test_monotonic_under_score_increase(self):
        rng = random.Random(7)
        d = doc("甲乙丙。丁戊。己庚辛壬。")
        for _ in range(200):
            values = [rng.random() for _ in range(len(d.raw_text))]
            before = aggregate(d, scores_for(d, values), CFG)
            i = rng.randrange(len(values))
            bumped = list(values)
            bumped[i] = min(1.0, bumped[i] + rng.random())
            after = aggregate(d, scores_for(d, bumped), CFG)
            assert set(before.selected).issubset(after.selected)


class TestScorers:
    def test_lexical_scorer_marks_claim_words(self):
        lex = Lexicon.from_words(["央行", "利率"])
        d = doc("央行表示利率不变。")
        vec = lexical_token_scorer("央行调整利率", d, lex)
        # 央行(2 chars) and 利率(2 chars) hit; everything else 0
        assert vec.scores[:2] == (1.0, 1.0)
        assert vec.scores[4:6] == (1.0, 1.0)
        assert sum(vec.scores) == 4.0

    def test_retrieve_for_claim_merges_documents(self):
        lex = Lexicon.from_words(["央行"])
        record = make_record("c1", "央行", evidence="无关。央行央行。")
        result = retrieve_for_claim(
            record, lambda c, d: lexical_token_scorer(c, d, lex), CFG
        )
        assert result.ranked[0][0] == ("c1-d0", 1)
        assert result.selected == [("c1-d0", 1)]
        assert result.fallback_used is False

    def test_fallback_keeps_top1(self):
        lex = Lexicon.from_words(["央行"])
        record = make_record("c1", "央行", evidence="毫无交集。依然没有。")
        result = retrieve_for_claim(
            record, lambda c, d: lexical_token_scorer(c, d, lex), CFG
        )
        assert result.selected == []
        assert result.fallback_used is True
        assert len(result.evidence_refs()) == 1

    def test_retrieve_corpus_keyed_by_claim(self, tiny_corpus, lexicon):
        results = retrieve_corpus(
            tiny_corpus, lambda c, d: lexical_token_scorer(c, d, lexicon), CFG
        )
        assert set(results) == set(tiny_corpus.ids())

    def test_semantic_ranker_prefers_matching_sentence(self):
        ranked = semantic_ranker("央行上调利率", ["天气晴朗。", "央行上调利率。"])
        assert ranked[0][0] == 1
        assert ranked[0][1] > ranked[1][1]

    def test_semantic_retrieval_selects_top_k(self):
        record = make_record("c1", "央行上调利率", evidence="天气晴朗。央行上调利率。无关。")
        result = semantic_retrieve_for_claim(record, RetrievalConfig(k=2))
        assert len(result.selected) == 2
        assert result.selected[0] == ("c1-d0", 1)


class TestRemoteTokenScorer:
    def record(self):
        return make_record("c1", "央行上调", evidence="央行上调利率。别的。")

    def test_round_trip(self):
        record = self.record()
        text = record.documents[0].raw_text

        def score_tokens(payload):
            assert payload["claim"] == "央行上调"
            assert payload["doc_id"] == "c1-d0"
            assert payload["text"] == text
            return {"scores": [0.9] * 7 + [0.1] * len(text[7:])}

        with wire_server({"/score_tokens": score_tokens}) as server:
            scorer = RemoteTokenScorer(server.url)
            result = retrieve_for_claim(record, scorer, CFG)
            assert result.selected == [("c1-d0", 0)]

    def test_length_mismatch_is_alignment_error(self):
        with wire_server({"/score_tokens": lambda p: {"scores": [0.5]}}) as server:
            with pytest.raises(AlignmentError):
                RemoteTokenScorer(server.url)("c", self.record().documents[0])

    def test_out_of_range_scores_rejected_not_clamped(self):
        def bad(payload):
            return {"scores": [1.2] * len(payload["text"])}

        with wire_server({"/score_tokens": bad}) as server:
            with pytest.raises(ScoreRangeError):
                RemoteTokenScorer(server.url)("c", self.record().documents[0])

    def test_malformed_json(self):
        with wire_server({"/score_tokens": lambda p: Raw(b"not json")}) as server:
            with pytest.raises(WireFormatError):
                RemoteTokenScorer(server.url)("c", self.record().documents[0])

    def test_missing_field(self):
        with wire_server({"/score_tokens": lambda p: {"values": []}}) as server:
            with pytest.raises(WireFormatError):
                RemoteTokenScorer(server.url)("c", self.record().documents[0])

    def test_http_error(self):
        with wire_server({"/score_tokens": lambda p: (500, {"detail": "boom"})}) as server:
            with pytest.raises(WireError):
                RemoteTokenScorer(server.url)("c", self.record().documents[0])

    def test_connection_refused(self):
        with pytest.raises(WireError):
            RemoteTokenScorer("http://127.0.0.1:1")("c", self.record().documents[0])


class TestRemotePairScorer:
    def test_round_trip(self):
        def score_pair(payload):
            return {"score": 0.25 if "别" in payload["sentence"] else 0.75}

        with wire_server({"/score_pair": score_pair}) as server:
            scorer = RemotePairScorer(server.url)
            assert scorer("claim", "别的。") == 0.25
            assert scorer("claim", "相关。") == 0.75

    def test_missing_score_field(self):
        with wire_server({"/score_pair": lambda p: {}}) as server:
            with pytest.raises(WireFormatError):
                RemotePairScorer(server.url)("c", "s")


class TestRecall:
    def fixture(self, seed=11):
        rng = random.Random(seed)
        ranked = {}
        gold = {}
        for i in range(10):
            refs = [(f"d{j}", j) for j in range(8)]
            rng.shuffle(refs)
            ranked[f"c{i}"] = refs
            n_gold = rng.randint(0, 3)
            gold[f"c{i}"] = set(rng.sample(refs, n_gold))
        return ranked, gold

    @pytest.mark.parametrize("mode", ["coverage", "any_hit"])
    @pytest.mark.parametrize("k", [1, 3, 5])
    def test_matches_oracle(self, mode, k):
        ranked, gold = self.fixture()
        report = recall_at_k(ranked, gold, k, mode=mode)
        mean, per_claim, excluded = recall_oracle(ranked, gold, k, mode=mode)
        assert report.mean == mean
        assert report.per_claim == per_claim
        assert sorted(report.excluded) == sorted(excluded)

    def test_claims_without_gold_are_excluded(self):
        report = recall_at_k({"c1": [("d0", 0)]}, {}, k=5)
        assert report.per_claim == {}
        assert report.excluded == ["c1"]
        assert report.mean == 0.0

    def test_bad_k_and_mode(self):
        with pytest.raises(ValueError):
            recall_at_k({}, {}, 0)
        with pytest.raises(ValueError):
            recall_at_k({}, {}, 1, mode="weird")

    def test_bootstrap_deterministic(self):
        values = [0.0, 0.5, 1.0, 0.25, 0.75]
        a = bootstrap_interval(values, resamples=500, seed=3)
        b = bootstrap_interval(values, resamples=500, seed=3)
        assert a == b
        assert a[0] == pytest.approx(0.5)
        assert a[1] > 0

    def test_bootstrap_needs_two_values(self):
        with pytest.raises(ValueError):
            bootstrap_interval([1.0])
