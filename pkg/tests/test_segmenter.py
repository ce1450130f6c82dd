"""Dictionary segmentation: longest-match behavior and tiling."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factlab.corpus import Corpus
from factlab.errors import EmptyCorpusError
from factlab.segmenter import (
    Lexicon,
    WordToken,
    avg_word_length,
    content_tokens,
    ngrams,
    segment,
    word_set,
)
from conftest import make_record


def words(tokens):
    return [t.text for t in tokens]


class TestSegment:
    def test_longest_match_wins(self):
        lex = Lexicon.from_words(["外交", "外交部", "部长"])
        assert words(segment("外交部长", lex)) == ["外交部", "长"]

    def test_greedy_is_not_globally_optimal(self):
        # forward maximum matching commits left to right
        lex = Lexicon.from_words(["研究", "研究生", "生命", "命"])
        assert words(segment("研究生命", lex)) == ["研究生", "命"]

    def test_unknown_chars_become_singletons(self):
        lex = Lexicon.from_words(["央行"])
        assert words(segment("央行宣布", lex)) == ["央行", "宣", "布"]

    def test_empty_lexicon_yields_characters(self):
        assert words(segment("上调利率", Lexicon())) == ["上", "调", "利", "率"]

    def test_ascii_runs_stay_together(self):
        lex = Lexicon.from_words(["利率"])
        assert words(segment("利率上调27bp。", lex)) == ["利率", "上", "调", "27bp", "。"]

    def test_empty_text(self):
        assert segment("", Lexicon()) == []

    def test_spans_carry_offsets(self):
        lex = Lexicon.from_words(["央行"])
        tokens = segment("央行宣布", lex)
        assert tokens[0] == WordToken("央行", (0, 2))
        assert tokens[1].char_span == (2, 3)

    @given(
        text=st.text(
            alphabet=st.sampled_from("上调下利率央行ab1 。"), max_size=40
        ),
        lex_words=st.lists(
            st.text(alphabet=st.sampled_from("上调下利率央行"), min_size=1, max_size=3),
            max_size=8,
        ),
    )
    @settings(max_examples=200, deadline=None)
    def test_tokens_tile_the_input(self, text, lex_words):
        lex = Lexicon.from_words(lex_words)
        tokens = segment(text, lex)
        assert "".join(t.text for t in tokens) == text
        pos = 0
        for t in tokens:
            assert t.char_span[0] == pos
            assert text[t.char_span[0] : t.char_span[1]] == t.text
            pos = t.char_span[1]
        assert pos == len(text)

    def test_lexicon_input_order_is_irrelevant(self):
        a = Lexicon.from_words(["外交部", "外交", "部长"])
        b = Lexicon.from_words(["部长", "外交", "外交部"])
        text = "外交部长发表讲话"
        assert words(segment(text, a)) == words(segment(text, b))


class TestHelpers:
    def test_content_tokens_drop_whitespace_only(self):
        tokens = segment("a b", Lexicon())
        assert words(tokens) == ["a", " ", "b"]
        assert words(content_tokens(tokens)) == ["a", "b"]

    def test_word_set(self):
        lex = Lexicon.from_words(["央行", "利率"])
        assert word_set("央行调利率，利率。", lex) == frozenset(
            {"央行", "调", "利率", "，", "。"}
        )

    def test_ngrams_join_without_separator(self):
        tokens = segment("央行上调", Lexicon.from_words(["央行", "上调"]))
        assert ngrams(tokens, 1) == ["央行", "上调"]
        assert ngrams(tokens, 2) == ["央行上调"]
        assert ngrams(tokens, 3) == []

    def test_ngrams_reject_bad_n(self):
        with pytest.raises(ValueError):
            ngrams([], 0)

    def test_avg_word_length(self):
        lex = Lexicon.from_words(["央行", "利率"])
        corpus = Corpus([make_record("c1", "央行调利率")])
        # tokens: 央行(2) 调(1) 利率(2) -> 5/3
        assert avg_word_length(corpus, lex) == pytest.approx(5 / 3)

    def test_avg_word_length_empty(self):
        with pytest.raises(EmptyCorpusError):
            avg_word_length(Corpus([]), Lexicon())
