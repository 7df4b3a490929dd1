"""Multilingual foodborne-illness complaint detection toolkit.

Builds weakly labeled multilingual training sets by projecting binary
Sick / NotSick labels through machine translation, trains a TF-IDF
logistic-regression classifier, and scans unlabeled review corpora for
complaints. Ships an in-repo character n-gram language identifier and a
pluggable classifier-backend layer (local linear model or a remote
encoder service speaking the same wire protocol).
"""

from sickscan.corpus import (
    Document,
    Label,
    LabeledDataset,
    Provenance,
    Split,
    UnlabeledCorpus,
    ingest_jsonl,
    stats,
)
from sickscan.weaklabel import ConfigLabel, TrainingAssembly, WeakLabeledDataset

__version__ = "0.1.0"

__all__ = [
    "ConfigLabel",
    "Document",
    "Label",
    "LabeledDataset",
    "Provenance",
    "Split",
    "TrainingAssembly",
    "UnlabeledCorpus",
    "WeakLabeledDataset",
    "ingest_jsonl",
    "stats",
]
