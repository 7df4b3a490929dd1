"""Tiny multilingual text encoder and its fine-tuning loop.

The encoder embeds hashed character 1-3 grams (shared across languages,
so multilingual by construction), mean-pools them, and passes the pooled
vector through a small projection. Pre-training happens offline on
multilingual seed text with a language-identification objective (see
scripts/pretrain_encoder.py); fine-tuning attaches a binary head and
trains end to end with early stopping on validation loss.
"""

from __future__ import annotations

import hashlib
import io
import unicodedata
from collections import Counter
from dataclasses import dataclass, field

import torch
from torch import nn

VOCAB_SIZE = 8192
EMBED_DIM = 64
MAX_SEQUENCE_LENGTH = 512  # hashed n-gram tokens kept per document


@dataclass
class Hparams:
    learning_rate: float = 1e-5
    batch_size: int = 512
    max_sequence_length: int = MAX_SEQUENCE_LENGTH
    max_epochs: int = 5
    patience: int = 2
    seed: int = 0

    @classmethod
    def from_dict(cls, raw: dict) -> "Hparams":
        known = {f: raw[f] for f in raw if f in cls.__dataclass_fields__}
        return cls(**known)

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "max_sequence_length": self.max_sequence_length,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "seed": self.seed,
        }


def ngram_ids(text: str, max_tokens: int = MAX_SEQUENCE_LENGTH) -> list[int]:
    """Hash character 1-3 grams of normalized text into the embedding table."""
    text = " ".join(unicodedata.normalize("NFC", text).casefold().split())
    ids = []
    for n in (1, 2, 3):
        for i in range(len(text) - n + 1):
            gram = text[i : i + n]
            digest = hashlib.blake2s(gram.encode("utf-8"), digest_size=4).digest()
            ids.append(int.from_bytes(digest, "little") % VOCAB_SIZE)
            if len(ids) >= max_tokens:
                return ids
    return ids


def batch_tensors(texts: list[str], max_tokens: int) -> tuple[torch.Tensor, torch.Tensor]:
    flat: list[int] = []
    offsets: list[int] = []
    for text in texts:
        offsets.append(len(flat))
        ids = ngram_ids(text, max_tokens)
        if not ids:
            ids = [0]
        flat.extend(ids)
    return torch.tensor(flat, dtype=torch.long), torch.tensor(offsets, dtype=torch.long)


class TinyEncoder(nn.Module):
    def __init__(self, vocab_size: int = VOCAB_SIZE, dim: int = EMBED_DIM):
        super().__init__()
        self.embedding = nn.EmbeddingBag(vocab_size, dim, mode="mean")
        self.norm = nn.LayerNorm(dim)
        self.project = nn.Linear(dim, dim)

    def forward(self, flat: torch.Tensor, offsets: torch.Tensor) -> torch.Tensor:
        pooled = self.embedding(flat, offsets)
        return torch.tanh(self.project(self.norm(pooled)))


class SickClassifier(nn.Module):
    def __init__(self, encoder: TinyEncoder):
        super().__init__()
        self.encoder = encoder
        self.head = nn.Linear(EMBED_DIM, 1)

    def forward(self, flat: torch.Tensor, offsets: torch.Tensor) -> torch.Tensor:
        return self.head(self.encoder(flat, offsets)).squeeze(-1)


def save_encoder(encoder: TinyEncoder, path) -> None:
    torch.save(
        {"state_dict": encoder.state_dict(), "vocab_size": VOCAB_SIZE, "dim": EMBED_DIM},
        path,
    )


def load_encoder(path, device: str = "cpu") -> TinyEncoder:
    payload = torch.load(path, map_location=device, weights_only=True)
    encoder = TinyEncoder(payload.get("vocab_size", VOCAB_SIZE), payload.get("dim", EMBED_DIM))
    encoder.load_state_dict(payload["state_dict"])
    return encoder


def classifier_bytes(model: SickClassifier) -> bytes:
    buffer = io.BytesIO()
    torch.save(model.state_dict(), buffer)
    return buffer.getvalue()


def classifier_ref(model: SickClassifier) -> str:
    return hashlib.sha256(classifier_bytes(model)).hexdigest()


@dataclass
class FineTuneResult:
    model: SickClassifier
    model_ref: str
    epochs_run: int
    best_val_loss: float
    val_f1_positive: float
    hparams: Hparams
    validation_langs: dict[str, int] = field(default_factory=dict)


def _labels_tensor(records: list[dict]) -> torch.Tensor:
    return torch.tensor(
        [1.0 if r.get("label") == "Sick" else 0.0 for r in records]
    )


def _evaluate(model: SickClassifier, records: list[dict], max_tokens: int):
    model.eval()
    with torch.no_grad():
        flat, offsets = batch_tensors([r["text"] for r in records], max_tokens)
        logits = model(flat, offsets)
        y = _labels_tensor(records)
        loss = nn.functional.binary_cross_entropy_with_logits(logits, y)
        predicted = (torch.sigmoid(logits) >= 0.5).float()
        tp = float(((predicted == 1) & (y == 1)).sum())
        fp = float(((predicted == 1) & (y == 0)).sum())
        fn = float(((predicted == 0) & (y == 1)).sum())
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return float(loss), f1


def fine_tune(
    encoder: TinyEncoder,
    train_records: list[dict],
    val_records: list[dict],
    hparams: Hparams,
) -> FineTuneResult:
    """Fine-tune the encoder plus a fresh binary head; early-stops on
    validation loss and returns the best-epoch weights."""
    if not train_records:
        raise ValueError("training set is empty")
    if not val_records:
        raise ValueError("validation set is empty")
    torch.manual_seed(hparams.seed)
    model = SickClassifier(encoder)
    optimizer = torch.optim.Adam(model.parameters(), lr=hparams.learning_rate)
    max_tokens = hparams.max_sequence_length

    best_loss, best_f1 = _evaluate(model, val_records, max_tokens)
    best_state = {k: v.clone() for k, v in model.state_dict().items()}
    stale = 0
    epochs_run = 0
    generator = torch.Generator().manual_seed(hparams.seed)
    y_all = _labels_tensor(train_records)

    for epoch in range(hparams.max_epochs):
        model.train()
        order = torch.randperm(len(train_records), generator=generator)
        for start in range(0, len(order), hparams.batch_size):
            rows = order[start : start + hparams.batch_size].tolist()
            flat, offsets = batch_tensors(
                [train_records[i]["text"] for i in rows], max_tokens
            )
            optimizer.zero_grad()
            logits = model(flat, offsets)
            loss = nn.functional.binary_cross_entropy_with_logits(
                logits, y_all[rows]
            )
            loss.backward()
            optimizer.step()
        epochs_run = epoch + 1
        val_loss, val_f1 = _evaluate(model, val_records, max_tokens)
        if val_loss < best_loss:
            best_loss, best_f1 = val_loss, val_f1
            best_state = {k: v.clone() for k, v in model.state_dict().items()}
            stale = 0
        else:
            stale += 1
            if stale >= hparams.patience:
                break

    model.load_state_dict(best_state)
    langs = Counter(r.get("lang", "und") for r in val_records)
    return FineTuneResult(
        model=model,
        model_ref=classifier_ref(model),
        epochs_run=epochs_run,
        best_val_loss=best_loss,
        val_f1_positive=best_f1,
        hparams=hparams,
        validation_langs=dict(langs),
    )


def predict_proba(model: SickClassifier, texts: list[str], max_tokens: int) -> list[float]:
    if not texts:
        return []
    model.eval()
    with torch.no_grad():
        flat, offsets = batch_tensors(texts, max_tokens)
        return torch.sigmoid(model(flat, offsets)).tolist()
