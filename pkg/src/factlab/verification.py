"""Claim verification over selected evidence.

The in-repo verifier is a multinomial logistic regression over hashed
bag-of-words features, trained by full-batch gradient descent for
bitwise reproducibility. Its claim-only mode deliberately ignores
evidence, which makes it the probe for claim-side dataset artifacts:
on any fully symmetric dataset its accuracy is pinned to 0.5 by
construction. Neural verifiers plug in through the wire client.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import requests
from scipy import sparse
from scipy.special import logsumexp

from factlab.corpus import Corpus, Label, LABEL_ORDER
from factlab.errors import WireError, WireFormatError
from factlab.segmenter import Lexicon, content_tokens, segment

MODES = ("claim_only", "claim_evidence")

_MODEL_MAGIC = b"FLVM1\n"


@dataclass(frozen=True)
class VerifierInput:
    claim: str
    evidence: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.claim.strip():
            raise ValueError("claim must be non-empty")


@dataclass(frozen=True)
class Hyperparams:
    learning_rate: float = 0.5
    epochs: int = 300
    l2: float = 1e-4
    hash_bits: int = 18

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")
        if not 1 <= self.hash_bits <= 30:
            raise ValueError("hash_bits must be in [1, 30]")


def _hash_feature(name: str, seed: int, dim: int) -> int:
    digest = hashlib.blake2b(
        name.encode("utf-8"), digest_size=8, key=str(seed).encode("ascii")
    ).digest()
    return int.from_bytes(digest, "big") % dim


def _word_list(text: str, lexicon: Lexicon) -> list[str]:
    return [t.text for t in content_tokens(segment(text, lexicon))]


def featurize(
    input: VerifierInput,
    mode: str,
    hash_seed: int,
    lexicon: Lexicon | None = None,
    hash_bits: int = 18,
) -> dict[int, float]:
    """Hashed word uni/bigram counts; claim features carry a "c:" tag.

    In claim_evidence mode evidence n-grams carry an "e:" tag and the
    claim/evidence word-set Jaccard lands in one of ten indicator
    buckets. claim_only mode ignores evidence entirely.
    """
    if mode not in MODES:
        raise ValueError(f"unknown feature mode {mode!r}")
    lexicon = lexicon or Lexicon()
    dim = 1 << hash_bits
    features: dict[int, float] = {}

    def add(name: str, value: float = 1.0) -> None:
        idx = _hash_feature(name, hash_seed, dim)
        features[idx] = features.get(idx, 0.0) + value

    def add_ngrams(words: list[str], tag: str) -> None:
        for w in words:
            add(f"{tag}:{w}")
        for a, b in zip(words, words[1:]):
            add(f"{tag}:{a}_{b}")

    claim_words = _word_list(input.claim, lexicon)
    add_ngrams(claim_words, "c")

    if mode == "claim_evidence":
        evidence_words: set[str] = set()
        for sentence in input.evidence:
            words = _word_list(sentence, lexicon)
            evidence_words.update(words)
            add_ngrams(words, "e")
        claim_set = set(claim_words)
        union = claim_set | evidence_words
        jaccard = len(claim_set & evidence_words) / len(union) if union else 1.0
        add(f"ov:{min(9, int(jaccard * 10))}")
    return features


@dataclass
class LinearVerifierModel:
    classes: tuple[Label, ...]
    weights: np.ndarray            # (n_classes, 2**hash_bits)
    bias: np.ndarray               # (n_classes,)
    mode: str
    hash_seed: int
    hyperparams: Hyperparams
    seed: int
    lexicon_words: tuple[str, ...] = ()
    final_loss: float = float("nan")

    def __post_init__(self) -> None:
        if self.weights.shape != (len(self.classes), 1 << self.hyperparams.hash_bits):
            raise ValueError("weight shape does not match classes/hash_bits")
        if not np.all(np.isfinite(self.weights)) or not np.all(np.isfinite(self.bias)):
            raise ValueError("model parameters must be finite")

    @property
    def lexicon(self) -> Lexicon:
        return Lexicon.from_words(self.lexicon_words)

    def featurize(self, input: VerifierInput) -> dict[int, float]:
        return featurize(
            input, self.mode, self.hash_seed, self.lexicon, self.hyperparams.hash_bits
        )


Dataset = Sequence[tuple[VerifierInput, Label]]


def _design_matrix(
    feature_dicts: Sequence[dict[int, float]], dim: int
) -> sparse.csr_matrix:
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for feats in feature_dicts:
        for idx in sorted(feats):
            indices.append(idx)
            data.append(feats[idx])
        indptr.append(len(indices))
    return sparse.csr_matrix(
        (np.array(data), np.array(indices, dtype=np.int64), np.array(indptr)),
        shape=(len(feature_dicts), dim),
    )


def _loss_grad_arrays(
    x: sparse.csr_matrix,
    y_onehot: np.ndarray,
    weights: np.ndarray,
    bias: np.ndarray,
    l2: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    n = x.shape[0]
    z = x @ weights.T + bias
    log_p = z - logsumexp(z, axis=1, keepdims=True)
    loss = float(-(y_onehot * log_p).sum() / n + 0.5 * l2 * float((weights**2).sum()))
    delta = np.exp(log_p) - y_onehot
    grad_w = (x.T @ delta).T / n + l2 * weights
    grad_b = delta.sum(axis=0) / n
    return loss, grad_w, grad_b


def _prepare(
    dataset: Dataset, model: LinearVerifierModel
) -> tuple[sparse.csr_matrix, np.ndarray]:
    dim = 1 << model.hyperparams.hash_bits
    feats = [model.featurize(inp) for inp, _ in dataset]
    x = _design_matrix(feats, dim)
    class_index = {c: i for i, c in enumerate(model.classes)}
    y = np.zeros((len(dataset), len(model.classes)))
    for row, (_, label) in enumerate(dataset):
        if label not in class_index:
            raise ValueError(f"label {label} not among model classes {model.classes}")
        y[row, class_index[label]] = 1.0
    return x, y


def train(
    dataset: Dataset,
    mode: str = "claim_evidence",
    hyperparams: Hyperparams | None = None,
    seed: int = 0,
    lexicon: Lexicon | None = None,
    warm_start: LinearVerifierModel | None = None,
) -> LinearVerifierModel:
    """Fit the verifier with zero-initialized full-batch gradient descent.

    Deterministic given (dataset, hyperparams, seed); the seed keys the
    feature hash, so different seeds yield genuinely different models.
    """
    hp = hyperparams or Hyperparams()
    labels_present = {label for _, label in dataset}
    if len(labels_present) < 2:
        raise ValueError("training needs at least 2 classes present")
    classes = tuple(l for l in LABEL_ORDER if l in labels_present)
    dim = 1 << hp.hash_bits
    lexicon = lexicon or Lexicon()

    if warm_start is not None:
        weights = warm_start.weights.copy()
        bias = warm_start.bias.copy()
        classes = warm_start.classes
    else:
        weights = np.zeros((len(classes), dim))
        bias = np.zeros(len(classes))

    model = LinearVerifierModel(
        classes=classes,
        weights=weights,
        bias=bias,
        mode=mode,
        hash_seed=seed,
        hyperparams=hp,
        seed=seed,
        lexicon_words=tuple(sorted(lexicon.words)),
    )
    x, y = _prepare(dataset, model)
    loss = float("nan")
    for _ in range(hp.epochs):
        loss, grad_w, grad_b = _loss_grad_arrays(x, y, model.weights, model.bias, hp.l2)
        model.weights -= hp.learning_rate * grad_w
        model.bias -= hp.learning_rate * grad_b
    model.final_loss = loss
    return model


def loss_and_grad(
    model: LinearVerifierModel, batch: Dataset
) -> tuple[float, tuple[np.ndarray, np.ndarray]]:
    """Cross-entropy + (λ/2)‖W‖² and its analytic gradient at the
    model's current parameters. Bias is not regularized."""
    if not batch:
        raise ValueError("batch must be non-empty")
    x, y = _prepare(batch, model)
    loss, grad_w, grad_b = _loss_grad_arrays(
        x, y, model.weights, model.bias, model.hyperparams.l2
    )
    return loss, (grad_w, grad_b)


def predict(
    model: LinearVerifierModel, input: VerifierInput
) -> tuple[Label, dict[Label, float]]:
    """Argmax of the softmax; ties break by fixed class order."""
    feats = model.featurize(input)
    z = model.bias.copy()
    for idx, value in feats.items():
        z += model.weights[:, idx] * value
    z -= logsumexp(z)
    probs = np.exp(z)
    label = model.classes[int(np.argmax(probs))]
    return label, {c: float(p) for c, p in zip(model.classes, probs)}


def predict_many(
    model: LinearVerifierModel, inputs: Sequence[VerifierInput]
) -> list[Label]:
    return [predict(model, inp)[0] for inp in inputs]


def save_model(model: LinearVerifierModel, path: str | Path) -> None:
    """Versioned binary container: magic, JSON header, raw float64 data."""
    header = {
        "classes": [c.value for c in model.classes],
        "mode": model.mode,
        "hash_seed": model.hash_seed,
        "seed": model.seed,
        "hyperparams": {
            "learning_rate": model.hyperparams.learning_rate,
            "epochs": model.hyperparams.epochs,
            "l2": model.hyperparams.l2,
            "hash_bits": model.hyperparams.hash_bits,
        },
        "lexicon_words": list(model.lexicon_words),
        "final_loss": model.final_loss,
    }
    with open(path, "wb") as fh:
        fh.write(_MODEL_MAGIC)
        fh.write((json.dumps(header, ensure_ascii=False, sort_keys=True) + "\n").encode("utf-8"))
        fh.write(np.ascontiguousarray(model.weights, dtype=np.float64).tobytes())
        fh.write(np.ascontiguousarray(model.bias, dtype=np.float64).tobytes())


def load_model(path: str | Path) -> LinearVerifierModel:
    blob = Path(path).read_bytes()
    if not blob.startswith(_MODEL_MAGIC):
        raise ValueError(f"{path} is not a verifier model file")
    rest = blob[len(_MODEL_MAGIC) :]
    header_line, _, payload = rest.partition(b"\n")
    header = json.loads(header_line.decode("utf-8"))
    hp = Hyperparams(**header["hyperparams"])
    classes = tuple(Label(v) for v in header["classes"])
    dim = 1 << hp.hash_bits
    n_weights = len(classes) * dim
    weights = np.frombuffer(payload[: n_weights * 8], dtype=np.float64).reshape(
        len(classes), dim
    )
    bias = np.frombuffer(payload[n_weights * 8 : (n_weights + len(classes)) * 8], dtype=np.float64)
    return LinearVerifierModel(
        classes=classes,
        weights=weights.copy(),
        bias=bias.copy(),
        mode=header["mode"],
        hash_seed=header["hash_seed"],
        hyperparams=hp,
        seed=header["seed"],
        lexicon_words=tuple(header["lexicon_words"]),
        final_loss=header["final_loss"],
    )


class RemoteVerifier:
    """Client for the verifier wire protocol.

    POST {endpoint}/verify {"claim", "evidence", "shots"}
      -> {"label": "SUPPORTED|REFUTED|NEI", "probs": {label: float}?}

    ``shots`` carries up to the configured number of in-context
    exemplars, serialized in the order given.
    """

    def __init__(self, endpoint: str, timeout: float = 60.0):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout

    def __call__(
        self,
        input: VerifierInput,
        shots: Sequence[tuple[VerifierInput, Label]] = (),
    ) -> tuple[Label, dict[Label, float] | None]:
        payload = {
            "claim": input.claim,
            "evidence": list(input.evidence),
            "shots": [
                {"claim": inp.claim, "evidence": list(inp.evidence), "label": lab.value}
                for inp, lab in shots
            ],
        }
        try:
            resp = requests.post(
                f"{self.endpoint}/verify", json=payload, timeout=self.timeout
            )
            resp.raise_for_status()
        except requests.RequestException as exc:
            raise WireError(f"verifier request failed: {exc}") from exc
        try:
            body = resp.json()
        except ValueError as exc:
            raise WireFormatError(f"verifier returned invalid JSON: {exc}") from exc
        try:
            label = Label(body["label"])
        except (KeyError, ValueError):
            raise WireFormatError(
                f"verifier returned unknown label {body.get('label')!r}"
            ) from None
        probs = None
        if isinstance(body.get("probs"), dict):
            try:
                probs = {Label(k): float(v) for k, v in body["probs"].items()}
            except ValueError:
                raise WireFormatError("verifier returned malformed probabilities") from None
        return label, probs


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class MetricsReport:
    accuracy: float
    per_class: dict[Label, ClassMetrics]
    macro_f1: float
    n: int

    def to_csv_rows(self) -> list[list]:
        rows: list[list] = [["metric", "value"]]
        rows.append(["accuracy", f"{self.accuracy:.6f}"])
        rows.append(["macro_f1", f"{self.macro_f1:.6f}"])
        for label, m in self.per_class.items():
            rows.append([f"precision_{label.value}", f"{m.precision:.6f}"])
            rows.append([f"recall_{label.value}", f"{m.recall:.6f}"])
            rows.append([f"f1_{label.value}", f"{m.f1:.6f}"])
        return rows

    def to_markdown(self) -> str:
        lines = [
            "| metric | value |",
            "|---|---|",
            f"| accuracy | {self.accuracy:.4f} |",
            f"| macro F1 | {self.macro_f1:.4f} |",
        ]
        for label, m in self.per_class.items():
            lines.append(
                f"| {label.value} P/R/F1 | {m.precision:.4f} / {m.recall:.4f} / {m.f1:.4f} |"
            )
        return "\n".join(lines)


def evaluate(preds: Sequence[Label], golds: Sequence[Label]) -> MetricsReport:
    """Accuracy, per-class P/R/F1 (0 when a denominator is 0) and macro
    F1 over the classes present in gold."""
    if len(preds) != len(golds):
        raise ValueError(f"{len(preds)} predictions vs {len(golds)} gold labels")
    if not golds:
        raise ValueError("evaluate needs at least one instance")
    accuracy = sum(p == g for p, g in zip(preds, golds)) / len(golds)
    gold_classes = [l for l in LABEL_ORDER if l in set(golds)]
    per_class: dict[Label, ClassMetrics] = {}
    for label in gold_classes:
        tp = sum(1 for p, g in zip(preds, golds) if p == label and g == label)
        pred_n = sum(1 for p in preds if p == label)
        gold_n = sum(1 for g in golds if g == label)
        precision = tp / pred_n if pred_n else 0.0
        recall = tp / gold_n if gold_n else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[label] = ClassMetrics(precision, recall, f1, gold_n)
    macro_f1 = sum(m.f1 for m in per_class.values()) / len(per_class)
    return MetricsReport(accuracy, per_class, macro_f1, n=len(golds))


def dataset_from_corpus(
    corpus: Corpus | Iterable,
    evidence: str = "gold",
    retrievals: Mapping[str, "object"] | None = None,
) -> list[tuple[VerifierInput, Label]]:
    """Build (input, label) pairs from records.

    ``evidence``: 'none' for claim-only probing, 'gold' for resolved
    gold sentences (document order), or 'retrieved' to take each claim's
    selected sentences in rank order from ``retrievals``.
    """
    if evidence not in ("none", "gold", "retrieved"):
        raise ValueError(f"unknown evidence source {evidence!r}")
    if evidence == "retrieved" and retrievals is None:
        raise ValueError("evidence='retrieved' requires retrievals")
    dataset: list[tuple[VerifierInput, Label]] = []
    for record in corpus:
        if evidence == "none":
            sentences: tuple[str, ...] = ()
        elif evidence == "gold":
            docs = {d.doc_id: d for d in record.documents}
            sentences = tuple(
                docs[doc_id].sentences[idx].text for doc_id, idx in record.resolve_gold()
            )
        else:
            retrieval = retrievals.get(record.id)
            if retrieval is None:
                sentences = ()
            else:
                docs = {d.doc_id: d for d in record.documents}
                sentences = tuple(
                    docs[doc_id].sentences[idx].text
                    for doc_id, idx in retrieval.evidence_refs()
                )
        dataset.append((VerifierInput(record.text, sentences), record.label))
    return dataset
