"""Tokenization, rule-based entity tagging, and vocabulary construction.

Sentences are lowercased and split on whitespace and punctuation boundaries.
The original-case surfaces are kept alongside so the entity tagger can see
capitalization, which is lost after lowercasing.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from editaug.errors import EmptyInputError

PAD, BOS, EOS, UNK, NUM_TAG, ENT_TAG = "<pad>", "<bos>", "<eos>", "<unk>", "<num>", "<ent>"
SPECIALS = (PAD, BOS, EOS, UNK, NUM_TAG, ENT_TAG)

PAD_ID, BOS_ID, EOS_ID, UNK_ID, NUM_ID, ENT_ID = range(len(SPECIALS))

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)
_NUMERIC_RE = re.compile(r"^\d[\d.,]*$")
_CAPITALIZED_RE = re.compile(r"^[A-Z][A-Za-z]*$")


@dataclass(frozen=True)
class Sentence:
    """A tokenized sentence: lowercased surfaces plus the original-case forms."""

    words: tuple[str, ...]
    cased: tuple[str, ...] | None = None

    def __post_init__(self):
        if len(self.words) == 0:
            raise EmptyInputError("sentence has no tokens")
        if self.cased is not None and len(self.cased) != len(self.words):
            raise ValueError("cased surfaces must align with words")

    def __len__(self) -> int:
        return len(self.words)

    def token_set(self) -> frozenset[str]:
        return frozenset(self.words)

    def text(self) -> str:
        return " ".join(self.words)


def tokenize(text: str) -> Sentence:
    """Split raw text into a lowercased Sentence.

    Words and single punctuation marks become separate tokens, so
    "don't stop" -> [don, ', t, stop]. Deterministic: no state, no
    randomness. Raises EmptyInputError on whitespace-only input.
    """
    if not text.strip():
        raise EmptyInputError("cannot tokenize whitespace-only text")
    cased = tuple(_TOKEN_RE.findall(text))
    return Sentence(words=tuple(w.lower() for w in cased), cased=cased)


def tag_entities(s: Sentence) -> Sentence:
    """Replace numbers with <num> and capitalized-token runs with <ent>.

    Rules, applied to the original-case surfaces:
      - a token that is entirely numeric (digits with . or , separators)
        becomes <num>;
      - a maximal run of capitalized alphabetic tokens collapses to a single
        <ent>, except the pronoun "I" and except a run of length one at the
        start of the sentence (ordinary sentence capitalization).

    Sentences without numbers or capitalized runs pass through unchanged.
    """
    surfaces = s.cased if s.cased is not None else s.words
    out_words: list[str] = []
    out_cased: list[str] = []
    i = 0
    n = len(surfaces)
    while i < n:
        tok = surfaces[i]
        if _NUMERIC_RE.match(tok):
            out_words.append(NUM_TAG)
            out_cased.append(NUM_TAG)
            i += 1
            continue
        if _is_entity_candidate(tok):
            j = i
            while j < n and _is_entity_candidate(surfaces[j]):
                j += 1
            run_len = j - i
            if run_len >= 2 or i > 0:
                out_words.append(ENT_TAG)
                out_cased.append(ENT_TAG)
                i = j
                continue
        out_words.append(s.words[i])
        out_cased.append(surfaces[i])
        i += 1
    return Sentence(words=tuple(out_words), cased=tuple(out_cased))


def _is_entity_candidate(surface: str) -> bool:
    return surface != "I" and _CAPITALIZED_RE.match(surface) is not None


@dataclass
class Vocabulary:
    """Token-to-id mapping with the special tokens at fixed leading indices.

    Ids are append-only: add_word() never renumbers existing entries, which
    is what makes inference-time OOV injection safe.
    """

    _word_to_id: dict[str, int] = field(default_factory=dict)
    _id_to_word: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self._id_to_word:
            for w in SPECIALS:
                self._word_to_id[w] = len(self._id_to_word)
                self._id_to_word.append(w)

    @classmethod
    def build(cls, sentences: Iterable[Sentence]) -> "Vocabulary":
        """Build from a corpus, ordering words by frequency then alphabetically."""
        counts: Counter[str] = Counter()
        for s in sentences:
            counts.update(s.words)
        vocab = cls()
        for word, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])):
            if word not in vocab._word_to_id:
                vocab.add_word(word)
        return vocab

    def add_word(self, word: str) -> int:
        if word in self._word_to_id:
            return self._word_to_id[word]
        idx = len(self._id_to_word)
        self._word_to_id[word] = idx
        self._id_to_word.append(word)
        return idx

    def __len__(self) -> int:
        return len(self._id_to_word)

    def __contains__(self, word: str) -> bool:
        return word in self._word_to_id

    def id_of(self, word: str) -> int:
        return self._word_to_id.get(word, UNK_ID)

    def word_of(self, idx: int) -> str:
        return self._id_to_word[idx]

    @property
    def words(self) -> list[str]:
        return list(self._id_to_word)

    def encode(self, s: Sentence, add_bounds: bool = False) -> np.ndarray:
        """Map a Sentence to an int64 id array; unknown words map to UNK.

        With add_bounds the sequence is wrapped in BOS ... EOS. PAD never
        appears: padding is a batching concern, not a sentence one.
        """
        ids = [self._word_to_id.get(w, UNK_ID) for w in s.words]
        if add_bounds:
            ids = [BOS_ID] + ids + [EOS_ID]
        return np.asarray(ids, dtype=np.int64)

    def decode(self, ids: Iterable[int]) -> Sentence:
        words = [self._id_to_word[i] for i in ids if i not in (PAD_ID, BOS_ID, EOS_ID)]
        if not words:
            words = [UNK]
        return Sentence(words=tuple(words))

    def save(self, path) -> None:
        """One non-special token per line; id = line number + len(SPECIALS)."""
        with open(path, "w", encoding="utf-8") as fh:
            for word in self._id_to_word[len(SPECIALS):]:
                fh.write(word + "\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        vocab = cls()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                word = line.rstrip("\n")
                if word:
                    vocab.add_word(word)
        return vocab


def read_corpus(path, tag: bool = True) -> list[Sentence]:
    """Read one sentence per line, tokenize, optionally entity-tag, dedupe.

    Exact duplicate token sequences are dropped (first occurrence wins) so
    that pair mining never sees self-duplicates.
    """
    seen: set[tuple[str, ...]] = set()
    out: list[Sentence] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            s = tokenize(line)
            if tag:
                s = tag_entities(s)
            if s.words in seen:
                continue
            seen.add(s.words)
            out.append(s)
    return out
