"""Downstream classification harness: does augmented data help a classifier.

The classifier is deliberately small - mean of hash-seeded word vectors into
multinomial logistic regression, trained full-batch - because the subject of
the experiment is the augmenter, not the classifier. The harness sweeps
training-set fractions and augmentation counts over several seeds, always
verifying that no test sentence leaked into training.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from editaug.embeddings import _seeded_vector
from editaug.errors import ConfigError, DegenerateLabelsError, SplitLeakageError
from editaug.vocab import Sentence

LabeledSet = list[tuple[str, Sentence]]


@dataclass(frozen=True)
class ClassifierConfig:
    feature_dim: int = 32
    feature_seed: int = 1234
    learning_rate: float = 0.5
    steps: int = 300
    l2: float = 1e-3


@dataclass(frozen=True)
class ExperimentConfig:
    fractions: tuple[float, ...] = (0.2, 0.5, 1.0)
    n_augment: tuple[int, ...] = (1, 2)
    n_seeds: int = 3
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)

    def __post_init__(self):
        if list(self.fractions) != sorted(self.fractions):
            raise ConfigError("fractions must be sorted ascending")
        if not all(0.0 < f <= 1.0 for f in self.fractions):
            raise ConfigError("fractions must lie in (0, 1]")
        if self.n_seeds < 2:
            raise ConfigError("need at least 2 seeds")


def featurize(sentences: list[Sentence], cfg: ClassifierConfig) -> np.ndarray:
    """Mean of per-word hash-seeded unit vectors; vocabulary-free and
    deterministic, so train/test featurization can never disagree."""
    out = np.zeros((len(sentences), cfg.feature_dim))
    for i, s in enumerate(sentences):
        for w in s.words:
            out[i] += _seeded_vector(w, cfg.feature_dim, 1.0, cfg.feature_seed)
        out[i] /= len(s.words)
    return out


class TextClassifier:
    """Multinomial logistic regression over bag-of-embedding features."""

    def __init__(self, cfg: ClassifierConfig, classes: list[str],
                 weights: np.ndarray, bias: np.ndarray):
        self.cfg = cfg
        self.classes = classes
        self.weights = weights
        self.bias = bias

    def predict(self, sentences: list[Sentence]) -> list[str]:
        scores = featurize(sentences, self.cfg) @ self.weights + self.bias
        return [self.classes[i] for i in scores.argmax(axis=1)]

    def accuracy(self, labeled: LabeledSet) -> float:
        pred = self.predict([s for _, s in labeled])
        return float(np.mean([p == y for p, (y, _) in zip(pred, labeled)]))


def train_classifier(train: LabeledSet, cfg: ClassifierConfig, seed: int) -> TextClassifier:
    """Deterministic full-batch training; DegenerateLabels on one class."""
    classes = sorted({label for label, _ in train})
    if len(classes) < 2:
        raise DegenerateLabelsError(f"need >= 2 classes, got {classes}")
    index = {c: i for i, c in enumerate(classes)}
    x = featurize([s for _, s in train], cfg)
    y = np.array([index[label] for label, _ in train])
    onehot = np.eye(len(classes))[y]

    rng = np.random.default_rng(seed)
    w = rng.standard_normal((cfg.feature_dim, len(classes))) * 0.01
    b = np.zeros(len(classes))
    n = len(train)
    for _ in range(cfg.steps):
        logits = x @ w + b
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        p /= p.sum(axis=1, keepdims=True)
        grad = (p - onehot) / n
        w -= cfg.learning_rate * (x.T @ grad + cfg.l2 * w)
        b -= cfg.learning_rate * grad.sum(axis=0)
    return TextClassifier(cfg, classes, w, b)


def check_isolation(train: LabeledSet, test: LabeledSet) -> None:
    """Abort if any test sentence (by token sequence) appears in training."""
    train_keys = {s.words for _, s in train}
    leaked = [s.text() for _, s in test if s.words in train_keys]
    if leaked:
        raise SplitLeakageError(
            f"{len(leaked)} test sentences appear in training data, "
            f"e.g. {leaked[0]!r}"
        )


def identity_augmenter(records: LabeledSet, n: int, seed: int) -> LabeledSet:
    """Control arm: synthetic samples are verbatim copies of the originals."""
    return [(label, s) for _ in range(n) for label, s in records]


def subset_for_seed(records: LabeledSet, fraction: float, seed: int) -> LabeledSet:
    rng = np.random.default_rng(seed)
    k = max(2, int(round(fraction * len(records))))
    idx = rng.permutation(len(records))[:k]
    return [records[i] for i in sorted(idx)]


def run_experiment(train: LabeledSet, test: LabeledSet, cfg: ExperimentConfig,
                   augmenter, seeds: list[int] | None = None,
                   include_control: bool = True) -> dict:
    """Sweep fraction x n_augment x seed; return per-cell and aggregate rows.

    augmenter(records, n, seed) -> synthetic LabeledSet. n_augment = 0 rows
    are the untouched-original baseline. With include_control, an identity-
    augmenter arm and a duplicated-data arm are run at n=1 for comparison.
    """
    check_isolation(train, test)
    seeds = seeds if seeds is not None else list(range(cfg.n_seeds))
    cells: list[dict] = []

    def run_cell(fraction, n_aug, seed, arm, make_train):
        base = subset_for_seed(train, fraction, seed)
        try:
            clf = train_classifier(make_train(base, seed), cfg.classifier, seed)
        except DegenerateLabelsError:
            return  # a tiny fraction can draw one class; skip the cell
        cells.append({
            "fraction": fraction, "n_augment": n_aug, "seed": seed,
            "arm": arm, "accuracy": clf.accuracy(test),
        })

    for fraction in cfg.fractions:
        for seed in seeds:
            run_cell(fraction, 0, seed, "original", lambda base, s: base)
            for n_aug in cfg.n_augment:
                run_cell(fraction, n_aug, seed, "augmented",
                         lambda base, s, n=n_aug: base + augmenter(base, n, s))
            if include_control:
                run_cell(fraction, 1, seed, "identity",
                         lambda base, s: base + identity_augmenter(base, 1, s))
                run_cell(fraction, 1, seed, "duplicated",
                         lambda base, s: base + base)

    aggregates = []
    keys = sorted({(c["fraction"], c["n_augment"], c["arm"]) for c in cells})
    for fraction, n_aug, arm in keys:
        accs = [c["accuracy"] for c in cells
                if (c["fraction"], c["n_augment"], c["arm"]) == (fraction, n_aug, arm)]
        aggregates.append({
            "fraction": fraction, "n_augment": n_aug, "arm": arm,
            "mean": float(np.mean(accs)),
            "std": float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0,
            "n": len(accs),
        })
    return {"cells": cells, "aggregates": aggregates}


def cells_csv(result: dict) -> str:
    lines = ["fraction,n_augment,arm,seed,accuracy"]
    for c in result["cells"]:
        lines.append(f"{c['fraction']},{c['n_augment']},{c['arm']},"
                     f"{c['seed']},{c['accuracy']:.6f}")
    return "\n".join(lines) + "\n"


def aggregates_csv(result: dict) -> str:
    lines = ["fraction,n_augment,arm,mean,std,n"]
    for a in result["aggregates"]:
        lines.append(f"{a['fraction']},{a['n_augment']},{a['arm']},"
                     f"{a['mean']:.6f},{a['std']:.6f},{a['n']}")
    return "\n".join(lines) + "\n"


def aggregates_table(result: dict) -> str:
    """Human-readable mean +/- std table, one row per (fraction, arm, n)."""
    lines = [f"{'fraction':>9} {'arm':>10} {'n_aug':>5} {'accuracy':>18}"]
    for a in result["aggregates"]:
        lines.append(f"{a['fraction']:>9.2f} {a['arm']:>10} {a['n_augment']:>5} "
                     f"{a['mean'] * 100:>9.3f} +/- {a['std'] * 100:.3f}")
    return "\n".join(lines)
