"""Inoculation sweeps: measure whether adding adversarial training data
closes the gap between original and adversarial evaluation.

For each (size, seed) the verifier is retrained from scratch on the base
training set plus a seeded sample of the adversarial pool, then scored on
both evaluation sets. The outcome taxonomy separates dataset weaknesses
(the gap closes, original accuracy holds) from model weaknesses (the gap
stays) and from distribution drift (original accuracy degrades).
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass, field
from pathlib import Path
from statistics import mean
from typing import Sequence

from factlab.corpus import Corpus
from factlab.errors import LeakageError
from factlab.segmenter import Lexicon
from factlab.verification import (
    Hyperparams,
    dataset_from_corpus,
    evaluate,
    predict_many,
    train,
)

EVAL_SETS = ("original", "adversarial")
OUTCOMES = ("Outcome1", "Outcome2", "Outcome3", "Mixed")

DEFAULT_TAU_GAP = 0.05
DEFAULT_TAU_ORIG = 0.05


@dataclass(frozen=True)
class SweepConfig:
    """Sweep shape: which pool sizes, which training seeds."""

    sizes: tuple[int, ...] = (0, 100, 200, 400, 800)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    mode: str = "claim_evidence"
    hyperparams: Hyperparams = field(default_factory=Hyperparams)

    def __post_init__(self):
        if not self.sizes:
            raise ValueError("sizes must be non-empty")
        if any(s < 0 for s in self.sizes):
            raise ValueError("sizes must be non-negative")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        object.__setattr__(self, "sizes", tuple(sorted(set(self.sizes))))
        object.__setattr__(self, "seeds", tuple(self.seeds))


@dataclass(frozen=True)
class SweepCell:
    """One trained model scored on one evaluation set."""

    size: int
    seed: int
    eval_set: str
    accuracy: float
    macro_f1: float


@dataclass(frozen=True)
class SweepResult:
    cells: tuple[SweepCell, ...]
    config: SweepConfig

    def sizes(self) -> tuple[int, ...]:
        return self.config.sizes

    def seed_mean(self, size: int, eval_set: str, metric: str = "accuracy") -> float:
        values = [
            getattr(c, metric)
            for c in self.cells
            if c.size == size and c.eval_set == eval_set
        ]
        if not values:
            raise KeyError(f"no cells for size={size} eval_set={eval_set}")
        return mean(values)

    def gap(self, size: int, metric: str = "accuracy") -> float:
        """Seed-mean original-minus-adversarial difference."""
        return self.seed_mean(size, "original", metric) - self.seed_mean(
            size, "adversarial", metric
        )


def _check_leakage(train_ids: set[str], eval_corpora: Sequence[Corpus]) -> None:
    leaked = sorted(
        train_ids & {rid for corpus in eval_corpora for rid in corpus.ids()}
    )
    if leaked:
        raise LeakageError(
            f"{len(leaked)} training ids appear in an evaluation set", leaked
        )


def run_sweep(
    base_train: Corpus,
    adv_pool: Corpus,
    eval_original: Corpus,
    eval_adversarial: Corpus,
    config: SweepConfig | None = None,
    lexicon: Lexicon | None = None,
) -> SweepResult:
    """Retrain across (size, seed) and score both evaluation sets.

    Any id shared between training-side data (base or pool) and either
    evaluation set aborts the sweep before training starts.
    """
    config = config or SweepConfig()
    over = [s for s in config.sizes if s > len(adv_pool)]
    if over:
        raise ValueError(
            f"sizes {over} exceed the adversarial pool ({len(adv_pool)} records)"
        )
    _check_leakage(
        set(base_train.ids()) | set(adv_pool.ids()),
        [eval_original, eval_adversarial],
    )

    base_examples = dataset_from_corpus(base_train)
    pool_examples = dataset_from_corpus(adv_pool)
    eval_data = {
        "original": dataset_from_corpus(eval_original),
        "adversarial": dataset_from_corpus(eval_adversarial),
    }

    cells: list[SweepCell] = []
    for size in config.sizes:
        for seed in config.seeds:
            if size:
                picked = sorted(random.Random(seed).sample(range(len(pool_examples)), size))
                extra = [pool_examples[i] for i in picked]
            else:
                extra = []
            model = train(
                base_examples + extra,
                mode=config.mode,
                hyperparams=config.hyperparams,
                seed=seed,
                lexicon=lexicon,
            )
            for eval_set, examples in eval_data.items():
                preds = predict_many(model, [x for x, _ in examples])
                report = evaluate(preds, [y for _, y in examples])
                cells.append(
                    SweepCell(size, seed, eval_set, report.accuracy, report.macro_f1)
                )
    return SweepResult(tuple(cells), config)


def classify_outcome(
    result: SweepResult,
    tau_gap: float = DEFAULT_TAU_GAP,
    tau_orig: float = DEFAULT_TAU_ORIG,
    metric: str = "accuracy",
) -> str:
    """Name what the sweep showed, judged at the size with the best
    seed-mean adversarial metric.

    Outcome3: original performance degrades beyond tau_orig (drift wins
    over everything else). Outcome1: adversarial performance improves
    beyond tau_gap with original intact (dataset weakness, now closed).
    Outcome2: no meaningful movement (model weakness). Mixed: the
    remainder, e.g. adversarial performance fell while original held.
    """
    if 0 not in result.sizes():
        raise ValueError("sweep needs size 0 as the uninoculated baseline")
    nonzero = [s for s in result.sizes() if s]
    if not nonzero:
        raise ValueError("sweep needs at least one non-zero size")
    best = max(nonzero, key=lambda s: result.seed_mean(s, "adversarial", metric))
    adv_gain = result.seed_mean(best, "adversarial", metric) - result.seed_mean(
        0, "adversarial", metric
    )
    orig_drop = result.seed_mean(0, "original", metric) - result.seed_mean(
        best, "original", metric
    )
    # Seed means are small-denominator rationals, so hitting a threshold
    # exactly (in decimal) is common; break such ties as real numbers
    # would, not by float rounding noise.
    tie = 1e-9
    if orig_drop > tau_orig + tie:
        return "Outcome3"
    if adv_gain > tau_gap + tie:
        return "Outcome1"
    if abs(adv_gain) <= tau_gap + tie:
        return "Outcome2"
    return "Mixed"


def sweep_detail_rows(result: SweepResult) -> list[list[str]]:
    rows = [["size", "seed", "eval_set", "accuracy", "macro_f1"]]
    ordered = sorted(
        result.cells, key=lambda c: (c.size, c.seed, EVAL_SETS.index(c.eval_set))
    )
    for c in ordered:
        rows.append(
            [str(c.size), str(c.seed), c.eval_set, f"{c.accuracy:.6f}", f"{c.macro_f1:.6f}"]
        )
    return rows


def sweep_summary_rows(result: SweepResult) -> list[list[str]]:
    rows = [
        [
            "size",
            "n_seeds",
            "accuracy_original",
            "accuracy_adversarial",
            "gap_accuracy",
            "macro_f1_original",
            "macro_f1_adversarial",
        ]
    ]
    for size in result.sizes():
        rows.append(
            [
                str(size),
                str(len(result.config.seeds)),
                f"{result.seed_mean(size, 'original'):.6f}",
                f"{result.seed_mean(size, 'adversarial'):.6f}",
                f"{result.gap(size):.6f}",
                f"{result.seed_mean(size, 'original', 'macro_f1'):.6f}",
                f"{result.seed_mean(size, 'adversarial', 'macro_f1'):.6f}",
            ]
        )
    return rows


def emit_sweep_report(
    result: SweepResult, detail_path: str | Path, summary_path: str | Path
) -> None:
    """Write the per-cell CSV and the per-size summary CSV.

    Row order and float formatting are fixed, so re-emitting the same
    result produces byte-identical files.
    """
    for path, rows in (
        (detail_path, sweep_detail_rows(result)),
        (summary_path, sweep_summary_rows(result)),
    ):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(rows)


def summary_markdown(result: SweepResult, outcome: str | None = None) -> str:
    lines = [
        "| Size | Acc (orig) | Acc (adv) | Gap |",
        "| ---: | ---: | ---: | ---: |",
    ]
    for size in result.sizes():
        lines.append(
            f"| {size} | {result.seed_mean(size, 'original'):.4f} "
            f"| {result.seed_mean(size, 'adversarial'):.4f} "
            f"| {result.gap(size):.4f} |"
        )
    if outcome:
        lines.append(f"\nOutcome: {outcome}")
    return "\n".join(lines)
