"""Frozen word-embedding table with inference-time OOV injection.

Rows are loaded once from a GloVe-style text file and never touched by
training. New words can only be appended, never overwritten, so every model
output computed before an injection is reproducible bit-for-bit afterwards.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from editaug.errors import DimMismatchError, DuplicateWordError, FormatError
from editaug.vocab import PAD_ID, SPECIALS, Vocabulary


@dataclass
class EmbeddingTable:
    """dim-wide float64 rows indexed by vocabulary id; all rows frozen."""

    dim: int
    rows: np.ndarray                      # (|vocab|, dim), float64
    frozen: np.ndarray = field(default=None)  # bool per row, always True here

    def __post_init__(self):
        self.rows = np.ascontiguousarray(self.rows, dtype=np.float64)
        if self.rows.ndim != 2 or self.rows.shape[1] != self.dim:
            raise DimMismatchError(
                f"rows must be (n, {self.dim}), got {self.rows.shape}"
            )
        if self.frozen is None:
            self.frozen = np.ones(len(self.rows), dtype=bool)

    def __len__(self) -> int:
        return len(self.rows)

    def lookup(self, ids: np.ndarray) -> np.ndarray:
        return self.rows[ids]

    def content_hash(self) -> int:
        return hash(self.rows.tobytes())


def read_embedding_file(path) -> tuple[dict[str, np.ndarray], int]:
    """Parse `word v1 ... v_dim` lines; FormatError on inconsistent dim."""
    vectors: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                raise FormatError(f"{path}:{lineno}: expected `word v1 ... v_dim`")
            word, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise FormatError(
                    f"{path}:{lineno}: dimension {len(values)} != {dim}"
                )
            try:
                vectors[word] = np.asarray([float(v) for v in values], dtype=np.float64)
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: non-numeric value") from exc
    if dim is None:
        raise FormatError(f"{path}: empty embedding file")
    return vectors, dim


def _seeded_vector(word: str, dim: int, scale: float, seed: int) -> np.ndarray:
    """Deterministic per-word random vector at the corpus norm scale.

    Seeding from (word, seed) keeps the vector independent of load order and
    of which other words happen to be missing. The word key is a real hash:
    distinct words must get distinct vectors, since frozen embeddings are the
    only lexical identity the model ever sees.
    """
    digest = hashlib.blake2b(word.encode("utf-8"), digest_size=8).digest()
    word_key = int.from_bytes(digest, "little")
    rng = np.random.default_rng([seed, word_key])
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v) * scale


def load_embeddings(path, vocab: Vocabulary, seed: int = 0) -> EmbeddingTable:
    """Build a frozen table covering `vocab` from a GloVe-style file.

    Words absent from the file (including the special tokens) get seeded
    random vectors scaled to the file's mean row norm; PAD is all zeros.
    Two loads with the same seed are bit-identical.
    """
    vectors, dim = read_embedding_file(path)
    norms = [float(np.linalg.norm(v)) for v in vectors.values()]
    scale = float(np.mean(norms)) if norms else 1.0
    if scale == 0.0:
        scale = 1.0
    rows = np.zeros((len(vocab), dim), dtype=np.float64)
    for idx, word in enumerate(vocab.words):
        if idx == PAD_ID:
            continue
        if word in vectors:
            rows[idx] = vectors[word]
        else:
            rows[idx] = _seeded_vector(word, dim, scale, seed)
    return EmbeddingTable(dim=dim, rows=rows)


def inject_oov(
    table: EmbeddingTable,
    vocab: Vocabulary,
    new_words: list[tuple[str, np.ndarray]],
) -> EmbeddingTable:
    """Append embedding rows for new words; existing rows stay bit-identical.

    The vocabulary is extended in place (append-only ids). Returns a new
    EmbeddingTable whose leading rows share values with the old one.
    """
    for word, vec in new_words:
        if word in vocab:
            raise DuplicateWordError(f"word already present: {word!r}")
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (table.dim,):
            raise DimMismatchError(
                f"vector for {word!r} has shape {vec.shape}, expected ({table.dim},)"
            )
    if not new_words:
        return table
    appended = np.stack([np.asarray(v, dtype=np.float64) for _, v in new_words])
    rows = np.concatenate([table.rows, appended], axis=0)
    for word, _ in new_words:
        vocab.add_word(word)
    return EmbeddingTable(dim=table.dim, rows=rows)


def oov_vectors_for(
    words: list[str],
    table: EmbeddingTable,
    extra_file: str | None = None,
    seed: int = 0,
) -> list[tuple[str, np.ndarray]]:
    """Resolve vectors for unseen words: from an extra embedding file when
    available, otherwise seeded random at the table's mean row norm."""
    extra: dict[str, np.ndarray] = {}
    if extra_file is not None:
        vectors, dim = read_embedding_file(extra_file)
        if dim != table.dim:
            raise DimMismatchError(f"extra file dim {dim} != table dim {table.dim}")
        extra = vectors
    norms = np.linalg.norm(table.rows, axis=1)
    scale = float(norms[norms > 0].mean()) if (norms > 0).any() else 1.0
    out = []
    for word in words:
        if word in extra:
            out.append((word, extra[word]))
        else:
            out.append((word, _seeded_vector(word, table.dim, scale, seed)))
    return out
