"""Inference-time augmentation: sample edits from the prior, decode variants.

Labels ride along unchanged; nothing enforces that an edit preserves them,
so every record keeps its sampled edit vector and its exact Jaccard distance
to the original, and synthetic lines that merely copy their original are
flagged so downstream consumers can filter them.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from editaug.checkpoint import load_checkpoint
from editaug.editspace import EditVector, prior_sample
from editaug.embeddings import inject_oov, oov_vectors_for
from editaug.errors import FormatError, UntrainedModelError
from editaug.pairs import jaccard_distance
from editaug.transformer import ModelState, greedy_decode
from editaug.vocab import Sentence, tokenize

import numpy as np

ORIGINAL_FLAG = "orig"
SYNTHETIC_FLAG = "aug"
COPY_FLAG = "aug_copy"


@dataclass(frozen=True)
class AugmentationRecord:
    original: Sentence
    synthetic: Sentence
    label: str
    z_used: EditVector
    jaccard_dist: float

    @property
    def changed(self) -> bool:
        return self.synthetic.words != self.original.words


def load_trained(path) -> ModelState:
    if not os.path.exists(path):
        raise UntrainedModelError(f"no checkpoint at {path}")
    return load_checkpoint(path)


def ensure_oov(state: ModelState, sentences: list[Sentence],
               extra_emb: str | None = None, seed: int = 0) -> int:
    """Inject embeddings for every word the model has never seen.

    Returns the number of injected words. Existing rows are untouched, so
    outputs on fully in-vocabulary sentences are unchanged bit-for-bit.
    """
    unseen: list[str] = []
    seen: set[str] = set()
    for s in sentences:
        for w in s.words:
            if w not in state.vocab and w not in seen:
                seen.add(w)
                unseen.append(w)
    if not unseen:
        return 0
    vectors = oov_vectors_for(unseen, state.emb, extra_file=extra_emb, seed=seed)
    state.emb = inject_oov(state.emb, state.vocab, vectors)
    return len(unseen)


def augment(s: Sentence, n: int, state: ModelState, rng: np.random.Generator,
            label: str = "", temperature: float = 0.0) -> list[AugmentationRecord]:
    """Decode n variants of s under prior-sampled edit vectors."""
    records = []
    for _ in range(n):
        z = prior_sample(state.edit_cfg, rng)
        synthetic = greedy_decode(state, s, z, temperature=temperature, rng=rng)
        records.append(AugmentationRecord(
            original=s, synthetic=synthetic, label=label, z_used=z,
            jaccard_dist=jaccard_distance(s, synthetic),
        ))
    return records


def read_labeled(path) -> list[tuple[str, Sentence]]:
    """Parse `label \\t text` lines; FormatError names the offending line."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) < 2 or not parts[0] or not parts[1].strip():
                raise FormatError(f"{path}:{lineno}: expected `label<TAB>text`")
            out.append((parts[0], tokenize(parts[1])))
    return out


def augment_dataset(infile, outfile, n: int, state: ModelState, seed: int = 0,
                    temperature: float = 0.0, extra_emb: str | None = None) -> dict:
    """Write originals plus n synthetic lines per original with provenance flags.

    Output lines are `label \\t text \\t flag`. Per-line rngs are derived as
    seed XOR line index, so any parallel schedule would produce the same file.
    """
    rows = read_labeled(infile)
    ensure_oov(state, [s for _, s in rows], extra_emb=extra_emb, seed=seed)
    n_copies = 0
    dists = []
    with open(outfile, "w", encoding="utf-8") as fh:
        for idx, (label, s) in enumerate(rows):
            fh.write(f"{label}\t{s.text()}\t{ORIGINAL_FLAG}\n")
            rng = np.random.default_rng(seed ^ idx)
            for rec in augment(s, n, state, rng, label=label, temperature=temperature):
                flag = SYNTHETIC_FLAG if rec.changed else COPY_FLAG
                n_copies += not rec.changed
                dists.append(rec.jaccard_dist)
                fh.write(f"{label}\t{rec.synthetic.text()}\t{flag}\n")
    return {
        "originals": len(rows),
        "synthetic": len(rows) * n,
        "copies": n_copies,
        "mean_jaccard_dist": float(np.mean(dists)) if dists else 0.0,
    }


def read_augmented(path) -> list[tuple[str, Sentence, str]]:
    """Parse `label \\t text [\\t flag]` lines (flag defaults to orig)."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) < 2 or not parts[1].strip():
                raise FormatError(f"{path}:{lineno}: expected `label<TAB>text[<TAB>flag]`")
            flag = parts[2] if len(parts) > 2 else ORIGINAL_FLAG
            out.append((parts[0], tokenize(parts[1]), flag))
    return out
