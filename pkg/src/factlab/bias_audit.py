"""Label-conditional phrase statistics exposing dataset artifacts.

Counts phrase occurrences (with multiplicity) over claim texts, keyed by
the claim's label, and derives p(l|w) and local mutual information

    LMI(w, l) = p(w, l) * ln(p(l|w) / p(l))

with p(l) = count(l)/|D|, p(w, l) = count(w, l)/|D| and |D| the total
number of phrase occurrences. Natural log; ranking is invariant to the
base, and reports also carry LMI*1e6 for readability.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

from factlab.corpus import Corpus, Label, LABEL_ORDER, StatsReport, corpus_stats
from factlab.errors import EmptyCorpusError
from factlab.segmenter import Lexicon, content_tokens, ngrams, segment

DEFAULT_MIN_COUNT = 5


@dataclass
class CountTable:
    count_wl: dict[tuple[str, Label], int] = field(default_factory=dict)
    count_w: dict[str, int] = field(default_factory=dict)
    count_l: dict[Label, int] = field(default_factory=dict)
    d_total: int = 0

    def add_occurrence(self, phrase: str, label: Label, times: int = 1) -> None:
        key = (phrase, label)
        self.count_wl[key] = self.count_wl.get(key, 0) + times
        self.count_w[phrase] = self.count_w.get(phrase, 0) + times
        self.count_l[label] = self.count_l.get(label, 0) + times
        self.d_total += times

    def merge(self, other: "CountTable") -> "CountTable":
        """Pointwise sum of two tables (shard-and-merge support)."""
        out = CountTable(
            dict(self.count_wl), dict(self.count_w), dict(self.count_l), self.d_total
        )
        for (w, l), c in other.count_wl.items():
            out.add_occurrence(w, l, c)
        return out

    def phrases(self) -> list[str]:
        return sorted(self.count_w)

    def check_consistency(self) -> None:
        for w in self.count_w:
            total = sum(self.count_wl.get((w, l), 0) for l in LABEL_ORDER)
            if total != self.count_w[w]:
                raise AssertionError(f"count mismatch for phrase {w!r}")
        if sum(self.count_l.values()) != self.d_total:
            raise AssertionError("label totals do not sum to d_total")
        if sum(self.count_w.values()) != self.d_total:
            raise AssertionError("phrase totals do not sum to d_total")


@dataclass(frozen=True)
class PhraseStats:
    phrase: str
    label: Label
    p_l_given_w: float
    lmi: float
    count_wl: int
    count_w: int

    @property
    def lmi_e6(self) -> float:
        return self.lmi * 1e6


def build_count_table(corpus: Corpus, lexicon: Lexicon, n: int = 1) -> CountTable:
    """Count phrase occurrences over all claim texts, by claim label.

    Occurrences are counted with multiplicity: a phrase appearing twice
    in one claim contributes two. Whitespace tokens are excluded.
    """
    if len(corpus) == 0:
        raise EmptyCorpusError("build_count_table requires a non-empty corpus")
    table = CountTable()
    for record in corpus:
        tokens = content_tokens(segment(record.text, lexicon))
        for phrase, times in Counter(ngrams(tokens, n)).items():
            table.add_occurrence(phrase, record.label, times)
    return table


def p_label_given_word(table: CountTable, w: str, l: Label) -> float:
    """count(w, l) / count(w); raises on a phrase the table never saw."""
    cw = table.count_w.get(w, 0)
    if cw == 0:
        raise KeyError(f"phrase {w!r} does not occur in the table")
    return table.count_wl.get((w, l), 0) / cw


def lmi(table: CountTable, w: str, l: Label) -> float:
    """p(w, l) * ln(p(l|w) / p(l)); 0 when count(w, l) = 0."""
    if table.d_total == 0:
        raise EmptyCorpusError("count table is empty")
    cwl = table.count_wl.get((w, l), 0)
    if cwl == 0:
        return 0.0
    p_wl = cwl / table.d_total
    p_lw = cwl / table.count_w[w]
    p_l = table.count_l[l] / table.d_total
    return p_wl * math.log(p_lw / p_l)


def top_k_by_lmi(
    table: CountTable, l: Label, k: int, min_count: int = DEFAULT_MIN_COUNT
) -> list[PhraseStats]:
    """Phrases with count(w) >= min_count ranked by LMI for label ``l``.

    Descending LMI; ties broken by count(w) descending, then by phrase
    order, which makes the ranking a total order.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    stats = [
        PhraseStats(
            phrase=w,
            label=l,
            p_l_given_w=p_label_given_word(table, w, l),
            lmi=lmi(table, w, l),
            count_wl=table.count_wl.get((w, l), 0),
            count_w=cw,
        )
        for w, cw in table.count_w.items()
        if cw >= min_count
    ]
    stats.sort(key=lambda s: (-s.lmi, -s.count_w, s.phrase))
    return stats[:k]


def phrase_stats_csv_rows(stats: list[PhraseStats]) -> list[list]:
    rows: list[list] = [
        ["phrase", "label", "count_wl", "count_w", "p_l_given_w", "lmi", "lmi_e6"]
    ]
    for s in stats:
        rows.append(
            [
                s.phrase,
                s.label.value,
                s.count_wl,
                s.count_w,
                f"{s.p_l_given_w:.6f}",
                f"{s.lmi:.12g}",
                f"{s.lmi_e6:.2f}",
            ]
        )
    return rows


def phrase_stats_markdown(stats: list[PhraseStats]) -> str:
    lines = ["| Word | LMI(1e-6) | p(l|w) |", "|---|---|---|"]
    for s in stats:
        lines.append(f"| {s.phrase} | {s.lmi_e6:.0f} | {s.p_l_given_w:.2f} |")
    return "\n".join(lines)


def domain_label_report(corpus: Corpus) -> StatsReport:
    """Per-domain label proportions plus each domain's share of the total."""
    return corpus_stats(corpus)
