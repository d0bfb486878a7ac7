"""Evaluation: BLEU, same-/cross-domain loss and BLEU, latency benchmarks.

BLEU here is the sentence-level variant with n-grams up to 4, uniform
weights, brevity penalty, and add-one smoothing on the order-2..4 clipped
precisions (the unigram precision is left unsmoothed so that candidates
sharing no words with the reference score exactly zero).
"""

from __future__ import annotations

import math
import platform
import time
from collections import Counter
from dataclasses import dataclass

import numpy as np

from editaug import autodiff as ad
from editaug.editspace import (
    diff_features, posterior_noise, posterior_from_summary, posterior_sample, prior_sample,
)
from editaug.errors import EmptyInputError
from editaug.pairs import SentencePair
from editaug.training import batch_loss
from editaug.transformer import ModelState, greedy_decode
from editaug.vocab import Sentence

MAX_ORDER = 4


def _ngrams(words: tuple[str, ...], n: int) -> Counter:
    return Counter(words[i: i + n] for i in range(len(words) - n + 1))


def bleu(candidate: Sentence, reference: Sentence) -> float:
    """Smoothed sentence BLEU in [0, 1]; 1.0 iff candidate equals reference."""
    cand, ref = candidate.words, reference.words
    if not cand or not ref:
        raise EmptyInputError("bleu needs non-empty sentences")
    log_sum = 0.0
    for n in range(1, MAX_ORDER + 1):
        cand_counts = _ngrams(cand, n)
        ref_counts = _ngrams(ref, n)
        clipped = sum(min(c, ref_counts[g]) for g, c in cand_counts.items())
        total = max(len(cand) - n + 1, 0)
        if n == 1:
            if clipped == 0:
                return 0.0
            p = clipped / total
        else:
            p = (clipped + 1.0) / (total + 1.0)
        log_sum += math.log(p)
    bp = 1.0 if len(cand) >= len(ref) else math.exp(1.0 - len(ref) / len(cand))
    return bp * math.exp(log_sum / MAX_ORDER)


@dataclass
class EvalReport:
    mode: str
    mean_loss: float
    mean_bleu: float
    count: int

    def summary(self) -> str:
        return (f"mode={self.mode} pairs={self.count} "
                f"mean_loss={self.mean_loss:.4f} mean_bleu={self.mean_bleu:.4f}")


def evaluate(state: ModelState, test_pairs: list[SentencePair], mode: str = "posterior",
             seed: int = 0, bleu_limit: int | None = None) -> EvalReport:
    """Mean per-token loss and mean decoded BLEU over test pairs.

    posterior mode scores reconstruction of the target with z ~ q(z|x', x);
    prior mode draws z ~ p(z). bleu_limit caps how many pairs are decoded
    (decoding dominates the cost); loss always uses every pair.
    """
    if mode not in ("posterior", "prior"):
        raise ValueError(f"unknown mode {mode!r}")
    if not test_pairs:
        raise EmptyInputError("evaluate needs at least one test pair")
    rng = np.random.default_rng(seed)

    total, count = 0.0, 0
    with ad.no_grad():
        for i in range(0, len(test_pairs), 32):
            chunk = test_pairs[i: i + 32]
            if mode == "posterior":
                noise = posterior_noise(state.edit_cfg, len(chunk), rng)
                loss = batch_loss(state, chunk, noise)
            else:
                zs = [prior_sample(state.edit_cfg, rng) for _ in chunk]
                z = ad.Tensor(np.stack([z.vector() for z in zs]))
                src = [state.vocab.encode(p.source) for p in chunk]
                tgt = [state.vocab.encode(p.target, add_bounds=True) for p in chunk]
                from editaug.transformer import forward_loss_batch
                loss = forward_loss_batch(state, src, tgt, z)
            total += loss.item() * len(chunk)
            count += len(chunk)

    decode_pairs = test_pairs[:bleu_limit] if bleu_limit else test_pairs
    scores = []
    for p in decode_pairs:
        if mode == "posterior":
            f = diff_features(p.source, p.target, state.emb, state.vocab)
            f = f @ state.params["adapter.w"].data + state.params["adapter.b"].data
            z = posterior_sample(f, state.edit_cfg, rng)
        else:
            z = prior_sample(state.edit_cfg, rng)
        decoded = greedy_decode(state, p.source, z)
        scores.append(bleu(decoded, p.target))
    return EvalReport(mode=mode, mean_loss=total / count,
                      mean_bleu=float(np.mean(scores)), count=count)


@dataclass
class BenchReport:
    repetitions: int
    mean_ms: float
    median_ms: float
    p95_ms: float
    train_steps_per_sec: float | None
    machine: str

    def summary(self) -> str:
        lines = [
            f"inference latency over {self.repetitions} sentences:",
            f"  mean   {self.mean_ms:.3f} ms",
            f"  median {self.median_ms:.3f} ms",
            f"  p95    {self.p95_ms:.3f} ms",
        ]
        if self.train_steps_per_sec is not None:
            lines.append(f"training throughput: {self.train_steps_per_sec:.2f} steps/s")
        lines.append(f"machine: {self.machine}")
        return "\n".join(lines)

    def csv(self) -> str:
        return ("repetitions,mean_ms,median_ms,p95_ms,train_steps_per_sec\n"
                f"{self.repetitions},{self.mean_ms:.6f},{self.median_ms:.6f},"
                f"{self.p95_ms:.6f},{self.train_steps_per_sec or ''}\n")


def bench(state: ModelState, sentences: list[Sentence], repetitions: int,
          seed: int = 0, train_pairs: list[SentencePair] | None = None) -> BenchReport:
    """Per-sentence inference latency (model compute only, post warm-up) and
    optional training throughput."""
    if repetitions <= 0:
        raise ValueError("repetitions must be positive")
    if not sentences:
        raise EmptyInputError("bench needs at least one sentence")
    rng = np.random.default_rng(seed)

    # warm-up: first call pays numpy/BLAS setup costs
    greedy_decode(state, sentences[0], prior_sample(state.edit_cfg, rng))

    times = []
    for i in range(repetitions):
        s = sentences[i % len(sentences)]
        z = prior_sample(state.edit_cfg, rng)
        t0 = time.perf_counter()
        greedy_decode(state, s, z)
        times.append((time.perf_counter() - t0) * 1000.0)

    steps_per_sec = None
    if train_pairs:
        from editaug.training import Adam, train_step
        optimizer = Adam(state.params, 1e-9, 1)  # negligible updates
        batch = train_pairs[: min(8, len(train_pairs))]
        train_step(batch, state, optimizer, rng)  # warm-up
        t0 = time.perf_counter()
        n = 5
        for _ in range(n):
            train_step(batch, state, optimizer, rng)
        steps_per_sec = n / (time.perf_counter() - t0)

    arr = np.asarray(times)
    machine = f"{platform.platform()} / python {platform.python_version()}"
    return BenchReport(
        repetitions=repetitions,
        mean_ms=float(arr.mean()),
        median_ms=float(np.median(arr)),
        p95_ms=float(np.percentile(arr, 95)),
        train_steps_per_sec=steps_per_sec,
        machine=machine,
    )
