"""Dictionary-based word segmentation and n-gram extraction.

Forward maximum matching over a plain word list. At each position the
longest lexicon word wins; positions not covered by the lexicon fall
back to a maximal run of ASCII letters/digits, or a single character.
Token spans always tile the input exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from factlab.errors import EmptyCorpusError

_ALNUM_RUN = frozenset(
    "0123456789abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
)


@dataclass(frozen=True)
class WordToken:
    text: str
    char_span: tuple[int, int]


@dataclass
class Lexicon:
    """Word list used for maximum matching.

    Frequencies are optional and carried along for reporting only; the
    matcher ignores them.
    """

    words: frozenset[str] = field(default_factory=frozenset)
    frequencies: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if any(not w for w in self.words):
            raise ValueError("lexicon entries must be non-empty")

    @property
    def max_word_len(self) -> int:
        return max((len(w) for w in self.words), default=0)

    def __contains__(self, word: str) -> bool:
        return word in self.words

    def __len__(self) -> int:
        return len(self.words)

    @classmethod
    def from_words(cls, words: Iterable[str]) -> "Lexicon":
        return cls(words=frozenset(words))

    @classmethod
    def from_file(cls, path: str | Path) -> "Lexicon":
        """Load one word per line; an optional tab-separated frequency."""
        words: set[str] = set()
        freqs: dict[str, float] = {}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            words.add(parts[0])
            if len(parts) > 1:
                freqs[parts[0]] = float(parts[1])
        return cls(words=frozenset(words), frequencies=freqs)


def segment(text: str, lexicon: Lexicon) -> list[WordToken]:
    """Segment ``text`` by forward maximum matching against ``lexicon``.

    Fallback at unmatched positions: a maximal run of ASCII
    letters/digits becomes one token, anything else a single character.
    Output spans tile the input without gaps or overlaps.
    """
    tokens: list[WordToken] = []
    n = len(text)
    max_len = lexicon.max_word_len
    pos = 0
    while pos < n:
        word = None
        for length in range(min(max_len, n - pos), 0, -1):
            cand = text[pos : pos + length]
            if cand in lexicon:
                word = cand
                break
        if word is None:
            if text[pos] in _ALNUM_RUN:
                end = pos + 1
                while end < n and text[end] in _ALNUM_RUN:
                    end += 1
                word = text[pos:end]
            else:
                word = text[pos]
        tokens.append(WordToken(word, (pos, pos + len(word))))
        pos += len(word)
    return tokens


def content_tokens(tokens: Iterable[WordToken]) -> list[WordToken]:
    """Drop whitespace-only tokens; keeps punctuation and words."""
    return [t for t in tokens if not t.text.isspace()]


def word_set(text: str, lexicon: Lexicon) -> frozenset[str]:
    """Set of non-whitespace word texts occurring in ``text``."""
    return frozenset(t.text for t in content_tokens(segment(text, lexicon)))


def ngrams(tokens: list[WordToken], n: int) -> list[str]:
    """Contiguous word n-grams, joined without a separator."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    texts = [t.text for t in tokens]
    return ["".join(texts[i : i + n]) for i in range(len(texts) - n + 1)]


def iter_claim_tokens(corpus, lexicon: Lexicon) -> Iterator[WordToken]:
    """Non-whitespace tokens of every claim text in ``corpus``."""
    for record in corpus:
        yield from content_tokens(segment(record.text, lexicon))


def avg_word_length(corpus, lexicon: Lexicon) -> float:
    """Mean character count of claim-text word tokens across the corpus."""
    total_chars = 0
    total_tokens = 0
    for token in iter_claim_tokens(corpus, lexicon):
        total_chars += len(token.text)
        total_tokens += 1
    if total_tokens == 0:
        raise EmptyCorpusError("no claim tokens to average over")
    return total_chars / total_tokens
