"""Mining of lexically close sentence pairs with MinHash-LSH.

Candidate pairs come from banded MinHash signatures; every candidate is then
re-checked with the exact Jaccard distance, so the output contains no false
positives. Both orderings of a surviving pair are emitted because edits are
directional.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from editaug.errors import ConfigError, EmptyInputError, FormatError
from editaug.vocab import Sentence

_MERSENNE = (1 << 61) - 1


@dataclass(frozen=True)
class SentencePair:
    """Directed training example: edit the source into the target."""

    source: Sentence
    target: Sentence
    jaccard_dist: float


@dataclass(frozen=True)
class LshConfig:
    num_hashes: int = 64
    bands: int = 16
    rows: int = 4
    threshold: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.bands * self.rows != self.num_hashes:
            raise ConfigError(
                f"bands*rows must equal num_hashes: "
                f"{self.bands}*{self.rows} != {self.num_hashes}"
            )
        if not (0.0 < self.threshold <= 1.0):
            raise ConfigError("threshold must be in (0, 1]")


def jaccard_distance(a: Sentence, b: Sentence) -> float:
    """1 - |A∩B| / |A∪B| over token sets; symmetric, in [0, 1]."""
    sa, sb = a.token_set(), b.token_set()
    if not sa or not sb:
        raise EmptyInputError("jaccard_distance needs non-empty sentences")
    union = len(sa | sb)
    return 1.0 - len(sa & sb) / union


def _token_hash(word: str) -> int:
    digest = hashlib.blake2b(word.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % _MERSENNE


def _hash_params(num_hashes: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    a = rng.integers(1, _MERSENNE, size=num_hashes, dtype=np.int64)
    b = rng.integers(0, _MERSENNE, size=num_hashes, dtype=np.int64)
    return a, b


def signature(s: Sentence, cfg: LshConfig) -> np.ndarray:
    """MinHash signature over the token set: k minima of k seeded hashes.

    Duplicate tokens cannot change the result because hashing runs over the
    set, not the sequence.
    """
    a, b = _hash_params(cfg.num_hashes, cfg.seed)
    return _signature_from_params(s.token_set(), a, b)


def _signature_from_params(tokens: frozenset[str], a: np.ndarray, b: np.ndarray) -> np.ndarray:
    hashes = np.array([_token_hash(w) for w in tokens], dtype=object)
    # object dtype: the affine transform overflows int64 before the modulus
    values = (hashes[:, None] * a[None, :] + b[None, :]) % _MERSENNE
    return values.min(axis=0).astype(np.int64)


def estimate_similarity(sig_a: np.ndarray, sig_b: np.ndarray) -> float:
    return float(np.mean(sig_a == sig_b))


def mine_pairs(corpus: Sequence[Sentence], cfg: LshConfig) -> Iterator[SentencePair]:
    """Yield all ordered pairs with exact Jaccard distance < cfg.threshold.

    The corpus must already be deduplicated. Output order is deterministic:
    ascending (i, j) over corpus indices, with the (i, j) and (j, i)
    orderings adjacent.
    """
    a, b = _hash_params(cfg.num_hashes, cfg.seed)
    sigs = [_signature_from_params(s.token_set(), a, b) for s in corpus]

    candidates: set[tuple[int, int]] = set()
    for band in range(cfg.bands):
        lo, hi = band * cfg.rows, (band + 1) * cfg.rows
        buckets: dict[bytes, list[int]] = {}
        for idx, sig in enumerate(sigs):
            key = sig[lo:hi].tobytes()
            buckets.setdefault(key, []).append(idx)
        for members in buckets.values():
            if len(members) < 2:
                continue
            for pos, i in enumerate(members):
                for j in members[pos + 1:]:
                    candidates.add((i, j) if i < j else (j, i))

    for i, j in sorted(candidates):
        if corpus[i].words == corpus[j].words:
            continue
        dist = jaccard_distance(corpus[i], corpus[j])
        if dist < cfg.threshold:
            yield SentencePair(source=corpus[i], target=corpus[j], jaccard_dist=dist)
            yield SentencePair(source=corpus[j], target=corpus[i], jaccard_dist=dist)


def brute_force_pairs(corpus: Sequence[Sentence], threshold: float) -> list[SentencePair]:
    """O(n^2) oracle: exact all-pairs mining, same emission rules as mine_pairs."""
    out = []
    for i in range(len(corpus)):
        for j in range(i + 1, len(corpus)):
            if corpus[i].words == corpus[j].words:
                continue
            dist = jaccard_distance(corpus[i], corpus[j])
            if dist < threshold:
                out.append(SentencePair(corpus[i], corpus[j], dist))
                out.append(SentencePair(corpus[j], corpus[i], dist))
    return out


def write_pairs(pairs: Iterable[SentencePair], path) -> int:
    """Tab-separated lines: source tokens, target tokens, jaccard distance."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(f"{p.source.text()}\t{p.target.text()}\t{p.jaccard_dist:.6f}\n")
            n += 1
    return n


def read_pairs(path) -> list[SentencePair]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise FormatError(f"{path}:{lineno}: expected 3 tab-separated fields")
            src = Sentence(words=tuple(parts[0].split(" ")))
            tgt = Sentence(words=tuple(parts[1].split(" ")))
            pairs.append(SentencePair(src, tgt, float(parts[2])))
    return pairs
