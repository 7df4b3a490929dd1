#!/usr/bin/env python3
"""Pre-train the tiny multilingual encoder and write the shipped checkpoint.

Pre-training objective: language identification over the multilingual
seed corpora that also back the pipeline's detector. It is a deliberately
small stand-in for large-scale multilingual pre-training, but it gives
the embedding table genuine cross-language structure before any
fine-tuning happens.

Usage: python scripts/pretrain_encoder.py [--seed-dir ../fixtures/langid_seed]
"""

import argparse
import random
import sys
from pathlib import Path

import torch
from torch import nn

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parent / "src"))

from encoder_service.model import TinyEncoder, batch_tensors, save_encoder  # noqa: E402

EMBED_DIM = 64


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--seed-dir", default=str(HERE.parent.parent / "fixtures" / "langid_seed")
    )
    parser.add_argument("--out", default=str(HERE.parent / "fixtures" / "tiny_encoder.pt"))
    parser.add_argument("--epochs", type=int, default=30)
    parser.add_argument("--seed", type=int, default=20200219)
    args = parser.parse_args()

    texts: list[str] = []
    labels: list[int] = []
    langs = []
    for path in sorted(Path(args.seed_dir).glob("*.txt")):
        langs.append(path.stem)
        for line in path.read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if line:
                texts.append(line)
                labels.append(len(langs) - 1)
    if len(langs) < 2:
        print("need at least two seed languages", file=sys.stderr)
        return 1
    print(f"pre-training on {len(texts)} sentences across {len(langs)} languages")

    torch.manual_seed(args.seed)
    rng = random.Random(args.seed)
    encoder = TinyEncoder()
    lang_head = nn.Linear(EMBED_DIM, len(langs))
    params = list(encoder.parameters()) + list(lang_head.parameters())
    optimizer = torch.optim.Adam(params, lr=1e-3)
    y = torch.tensor(labels)

    order = list(range(len(texts)))
    for epoch in range(args.epochs):
        rng.shuffle(order)
        total = 0.0
        for start in range(0, len(order), 64):
            rows = order[start : start + 64]
            flat, offsets = batch_tensors([texts[i] for i in rows], 512)
            optimizer.zero_grad()
            logits = lang_head(encoder(flat, offsets))
            loss = nn.functional.cross_entropy(logits, y[rows])
            loss.backward()
            optimizer.step()
            total += float(loss) * len(rows)
        if (epoch + 1) % 10 == 0 or epoch == 0:
            print(f"epoch {epoch + 1}: mean loss {total / len(order):.4f}")

    encoder.eval()
    with torch.no_grad():
        flat, offsets = batch_tensors(texts, 512)
        predicted = lang_head(encoder(flat, offsets)).argmax(dim=1)
        accuracy = float((predicted == y).float().mean())
    print(f"language-ID training accuracy of the pre-trained encoder: {accuracy:.4f}")

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_encoder(encoder, out)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
