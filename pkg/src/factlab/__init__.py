"""Workbench for evidence-based Chinese claim verification.

Subpackages cover the full pipeline: corpus ingestion and stats,
dictionary segmentation, label-association bias audits, sentence-level
evidence retrieval, trainable/remote claim verifiers, symmetric
adversarial dataset construction with QC, and inoculation sweeps.
"""

__version__ = "0.1.0"

from factlab.corpus import ClaimRecord, Corpus, EvidenceDocument, Label, Sentence

__all__ = [
    "ClaimRecord",
    "Corpus",
    "EvidenceDocument",
    "Label",
    "Sentence",
    "__version__",
]
