"""Deterministic toy fixtures: two tiny synthetic domains with disjoint
vocabularies, plus a labeled classification set and a small embedding file.

Domain A is review-like and is what the editor trains on; domain B is
encyclopedic-flavoured and shares not a single word with A, which is what
makes it useful for cross-domain tests (every B word exercises the OOV
injection path). Sentences are template products, so lexically close pairs
(one or two word swaps) exist in abundance within each template family.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

FOODS = ["pasta", "pizza", "soup", "salad", "burger", "steak", "cake", "bread", "curry", "stew"]
QUALITIES = ["good", "bad", "great", "awful", "tasty", "bland", "fresh", "stale", "decent", "superb"]
TASTES = ["salty", "sweet", "spicy", "sour", "bitter", "rich", "mild", "smoky"]
STAFF = ["waiter", "server", "chef", "host", "manager", "barista"]
ATTITUDES = ["friendly", "rude", "helpful", "slow", "quick", "polite"]
OPINIONS = ["loved", "liked", "hated", "enjoyed"]
DRINKS = ["coffee", "tea", "wine", "juice", "soda", "lemonade"]

MINERALS = ["quartz", "basalt", "granite", "gypsum", "marble", "slate", "shale", "obsidian"]
REGIONS = ["canyons", "plateaus", "glaciers", "deserts", "tundras", "foothills", "caverns", "ridges"]
DEVICES = ["turbine", "compressor", "dynamo", "actuator", "gyroscope", "resonator", "amplifier", "oscillator"]
PARTS = ["rotor", "stator", "bearing", "flywheel", "manifold", "piston"]


def review_sentences() -> list[str]:
    """Domain A: 500 distinct review-like sentences."""
    out = []
    for s in FOODS:
        for q in QUALITIES:
            out.append(f"the {s} was {q}")
    for s in FOODS[:8]:
        for q in TASTES:
            out.append(f"the {s} tasted really {q}")
    for s in STAFF:
        for a in ATTITUDES:
            out.append(f"the {s} seemed {a} tonight")
    for v in OPINIONS:
        for s in FOODS:
            out.append(f"we {v} the {s} here")
    for a in ATTITUDES:
        for q in QUALITIES[:8]:
            out.append(f"service felt {a} yet somehow {q}")
    for s in FOODS[:8]:
        for a in ATTITUDES:
            out.append(f"my {s} arrived {a} looking")
    for d in DRINKS:
        for q in QUALITIES:
            out.append(f"the {d} came out {q}")
    for s in FOODS:
        for t in TASTES[:6]:
            out.append(f"everyone found the {s} rather {t}")
    for s in STAFF:
        for a in ATTITUDES:
            out.append(f"the {s} greeted us {a}")
    for v in OPINIONS:
        for adv in ("immensely", "thoroughly"):
            out.append(f"we {v} that spot {adv}")
    return out


def encyclopedic_sentences() -> list[str]:
    """Domain B: 232 distinct encyclopedic sentences, vocabulary disjoint
    from domain A."""
    out = []
    for m in MINERALS:
        for r in REGIONS:
            out.append(f"each {m} formation occurs within {r}")
    for m in MINERALS:
        for r in REGIONS[:6]:
            out.append(f"this {m} sample originates from {r}")
    for d in DEVICES:
        for p in PARTS:
            out.append(f"every {d} unit houses {p} assemblies")
    for d in DEVICES[:6]:
        for p in PARTS:
            out.append(f"a {d} spins its {p} continuously")
    return out


def labeled_dataset() -> list[tuple[str, str]]:
    """Binary classification over domain B: nature vs machine sentences."""
    minerals = set(MINERALS)
    return [
        ("nature" if minerals & set(text.split()) else "machine", text)
        for text in encyclopedic_sentences()
    ]


def domain_vocab(sentences: list[str]) -> set[str]:
    return {w for s in sentences for w in s.split()}


def write_embedding_file(path, words: set[str], dim: int = 32, seed: int = 7) -> None:
    """Small GloVe-format file with seeded unit-scale vectors for `words`."""
    from editaug.embeddings import _seeded_vector

    with open(path, "w", encoding="utf-8") as fh:
        for word in sorted(words):
            vec = _seeded_vector(word, dim, 1.0, seed)
            fh.write(word + " " + " ".join(f"{v:.6f}" for v in vec) + "\n")


def write_fixtures(outdir) -> dict:
    """Write all toy files; returns a manifest of what went where."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    reviews = review_sentences()
    wiki = encyclopedic_sentences()
    labeled = labeled_dataset()

    (outdir / "toy_reviews.txt").write_text("\n".join(reviews) + "\n", encoding="utf-8")
    (outdir / "toy_wiki.txt").write_text("\n".join(wiki) + "\n", encoding="utf-8")

    rng = np.random.default_rng(13)
    order = rng.permutation(len(labeled))
    split = int(0.7 * len(labeled))
    train = [labeled[i] for i in sorted(order[:split])]
    test = [labeled[i] for i in sorted(order[split:])]
    for name, rows in (("toy_labeled_train.tsv", train), ("toy_labeled_test.tsv", test)):
        with open(outdir / name, "w", encoding="utf-8") as fh:
            for label, text in rows:
                fh.write(f"{label}\t{text}\n")

    write_embedding_file(outdir / "toy_glove.txt", domain_vocab(reviews))
    return {
        "reviews": len(reviews),
        "wiki": len(wiki),
        "labeled_train": len(train),
        "labeled_test": len(test),
        "vocab_overlap": sorted(domain_vocab(reviews) & domain_vocab(wiki)),
    }
