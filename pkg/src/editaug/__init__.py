"""Edit-based sentence augmentation.

Pipeline: mine lexically close sentence pairs from a corpus, learn a latent
edit-vector distribution with a small transformer encoder-decoder, then apply
randomly sampled edits to sentences from another domain to synthesize labeled
training data.
"""

__version__ = "0.1.0"

from editaug.vocab import Sentence, Vocabulary, tokenize, tag_entities
from editaug.embeddings import EmbeddingTable, load_embeddings, inject_oov
from editaug.pairs import SentencePair, LshConfig, jaccard_distance, mine_pairs

__all__ = [
    "Sentence",
    "Vocabulary",
    "tokenize",
    "tag_entities",
    "EmbeddingTable",
    "load_embeddings",
    "inject_oov",
    "SentencePair",
    "LshConfig",
    "jaccard_distance",
    "mine_pairs",
]
