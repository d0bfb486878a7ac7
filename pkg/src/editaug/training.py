"""Optimization loop: posterior-sampled edit vectors, Adam with warmup,
patience-based early stopping, best-checkpoint tracking.

Each step draws one edit vector per pair from the inverse editor and
minimises teacher-forced reconstruction cross-entropy. The KL term of the
objective is a parameter-free constant (see editspace.kl_term) and is added
as exactly zero. Identity pairs are mixed in at a small rate so the model
also learns the near-null edit it will meet at inference time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from editaug import autodiff as ad
from editaug.editspace import (
    diff_features, edit_summary_batch, kl_term, posterior_from_summary, posterior_noise,
)
from editaug.errors import ConfigError, EmptyBatchError
from editaug.pairs import SentencePair
from editaug.transformer import ModelState, forward_loss_batch, greedy_decode
from editaug.vocab import Sentence


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    learning_rate: float = 1e-3
    warmup_steps: int = 100
    patience_steps: int = 500
    max_steps: int = 2000
    seed: int = 0
    eval_interval: int = 50
    identity_rate: float = 0.1
    bleu_sample: int = 16

    def __post_init__(self):
        if min(self.batch_size, self.warmup_steps, self.patience_steps,
               self.max_steps, self.eval_interval) <= 0 or self.learning_rate <= 0:
            raise ConfigError("all training settings must be positive")
        if self.patience_steps > self.max_steps:
            raise ConfigError("patience_steps cannot exceed max_steps")


class Adam:
    """Adaptive-moment optimizer with transformer-style inverse-sqrt warmup."""

    def __init__(self, params: dict[str, ad.Tensor], base_lr: float,
                 warmup: int, betas=(0.9, 0.98), eps: float = 1e-9):
        self.params = params
        self.base_lr = base_lr
        self.warmup = warmup
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def lr(self, step: int) -> float:
        return self.base_lr * math.sqrt(self.warmup) * min(
            step ** -0.5, step * self.warmup ** -1.5
        )

    def step(self) -> None:
        self.t += 1
        lr = self.lr(self.t)
        for name, p in self.params.items():
            if p.grad is None:
                continue
            g = p.grad
            self.m[name] = self.b1 * self.m[name] + (1 - self.b1) * g
            self.v[name] = self.b2 * self.v[name] + (1 - self.b2) * g * g
            mhat = self.m[name] / (1 - self.b1 ** self.t)
            vhat = self.v[name] / (1 - self.b2 ** self.t)
            p.data = p.data - lr * mhat / (np.sqrt(vhat) + self.eps)


def batch_loss(state: ModelState, batch: list[SentencePair], noise,
               dropout_rng: np.random.Generator | None = None) -> ad.Tensor:
    """Differentiable training loss of one batch under fixed sampling noise."""
    if not batch:
        raise EmptyBatchError("batch must contain at least one pair")
    feats = np.stack([diff_features(p.source, p.target, state.emb, state.vocab)
                      for p in batch])
    f = edit_summary_batch(feats, state.params["adapter.w"], state.params["adapter.b"])
    direction, norm = posterior_from_summary(f, state.edit_cfg, noise)
    z = ad.mul(direction, norm)
    src = [state.vocab.encode(p.source) for p in batch]
    tgt = [state.vocab.encode(p.target, add_bounds=True) for p in batch]
    loss = forward_loss_batch(state, src, tgt, z, dropout_rng)
    return ad.add(loss, kl_term())


def train_step(batch: list[SentencePair], state: ModelState, optimizer: Adam,
               rng: np.random.Generator, dropout: bool = True) -> float:
    """One optimizer update; returns the batch loss before the update."""
    if not batch:
        raise EmptyBatchError("batch must contain at least one pair")
    noise = posterior_noise(state.edit_cfg, len(batch), rng)
    loss = batch_loss(state, batch, noise, rng if dropout else None)
    state.zero_grad()
    loss.backward()
    optimizer.step()
    state.zero_grad()
    return loss.item()


def iterate_batches(pairs: list[SentencePair], cfg: TrainConfig,
                    rng: np.random.Generator):
    """Endless deterministic batch stream, length-bucketed, identity-mixed.

    Pairs are stable-sorted by target length, cut into batches, and the batch
    order is reshuffled each epoch. Each slot is replaced by an identity pair
    built from its own target at cfg.identity_rate.
    """
    ordered = sorted(pairs, key=lambda p: len(p.target))
    batches = [ordered[i: i + cfg.batch_size]
               for i in range(0, len(ordered), cfg.batch_size)]
    while True:
        for bi in rng.permutation(len(batches)):
            batch = []
            for p in batches[bi]:
                if rng.random() < cfg.identity_rate:
                    batch.append(SentencePair(p.target, p.target, 0.0))
                else:
                    batch.append(p)
            yield batch


@dataclass
class FitResult:
    state: ModelState
    history: list[dict] = field(default_factory=list)
    best_step: int = 0
    best_valid_loss: float = math.inf


def evaluate_posterior_loss(state: ModelState, pairs: list[SentencePair],
                            seed: int, batch_size: int = 32) -> float:
    """Mean validation loss with posterior-sampled z under a fixed seed."""
    rng = np.random.default_rng(seed)
    total, count = 0.0, 0
    with ad.no_grad():
        for i in range(0, len(pairs), batch_size):
            chunk = pairs[i: i + batch_size]
            noise = posterior_noise(state.edit_cfg, len(chunk), rng)
            total += batch_loss(state, chunk, noise).item() * len(chunk)
            count += len(chunk)
    return total / count


def _valid_bleu(state: ModelState, pairs: list[SentencePair], seed: int, limit: int) -> float:
    from editaug.metrics import bleu  # local import: metrics depends on nothing here

    from editaug.editspace import posterior_sample

    rng = np.random.default_rng(seed)
    sample = pairs[:limit]
    if not sample:
        return 0.0
    scores = []
    for p in sample:
        f = diff_features(p.source, p.target, state.emb, state.vocab)
        f = f @ state.params["adapter.w"].data + state.params["adapter.b"].data
        z = posterior_sample(f, state.edit_cfg, rng)
        decoded = greedy_decode(state, p.source, z)
        scores.append(bleu(decoded, p.target))
    return float(np.mean(scores))


def fit(train_pairs: list[SentencePair], valid_pairs: list[SentencePair],
        cfg: TrainConfig, state: ModelState,
        log_every: int | None = None) -> FitResult:
    """Train until patience or max_steps; returns best state and history.

    Validation loss is computed every eval_interval steps with a fixed eval
    seed; the best parameter snapshot is restored into the returned state.
    """
    if not train_pairs:
        raise EmptyBatchError("no training pairs")
    if not valid_pairs:
        raise EmptyBatchError("no validation pairs")
    rng = np.random.default_rng(cfg.seed)
    optimizer = Adam(state.params, cfg.learning_rate, cfg.warmup_steps)
    stream = iterate_batches(train_pairs, cfg, rng)
    result = FitResult(state=state)
    best_params: dict[str, np.ndarray] = {k: p.data.copy() for k, p in state.params.items()}
    eval_seed = cfg.seed ^ 0x5EED

    running = 0.0
    for step in range(1, cfg.max_steps + 1):
        running += train_step(next(stream), state, optimizer, rng)
        if step % cfg.eval_interval == 0:
            valid_loss = evaluate_posterior_loss(state, valid_pairs, eval_seed)
            valid_bleu = _valid_bleu(state, valid_pairs, eval_seed, cfg.bleu_sample)
            train_loss = running / cfg.eval_interval
            running = 0.0
            result.history.append({
                "step": step, "train_loss": train_loss,
                "valid_loss": valid_loss, "valid_bleu": valid_bleu,
            })
            if log_every and step % log_every == 0:
                print(f"step {step}: train {train_loss:.4f} valid {valid_loss:.4f} "
                      f"bleu {valid_bleu:.3f}")
            if valid_loss < result.best_valid_loss:
                # the first eval always lands here and anchors the patience window
                result.best_valid_loss = valid_loss
                result.best_step = step
                best_params = {k: p.data.copy() for k, p in state.params.items()}
            if step - result.best_step >= cfg.patience_steps:
                break
    for k, p in state.params.items():
        p.data = best_params[k]
    return result


def history_csv(history: list[dict]) -> str:
    lines = ["step,train_loss,valid_loss,valid_bleu"]
    for row in history:
        lines.append(f"{row['step']},{row['train_loss']:.6f},"
                     f"{row['valid_loss']:.6f},{row['valid_bleu']:.6f}")
    return "\n".join(lines) + "\n"


def teacher_forced_accuracy(state: ModelState, pairs: list[SentencePair],
                            seed: int = 0) -> float:
    """Fraction of non-PAD target tokens predicted correctly under teacher
    forcing with posterior-sampled edit vectors."""
    from editaug.transformer import decode_batch, encode_batch, pad_batch

    rng = np.random.default_rng(seed)
    correct, total = 0, 0
    with ad.no_grad():
        for i in range(0, len(pairs), 32):
            chunk = pairs[i: i + 32]
            feats = np.stack([diff_features(p.source, p.target, state.emb, state.vocab)
                              for p in chunk])
            f = edit_summary_batch(feats, state.params["adapter.w"], state.params["adapter.b"])
            noise = posterior_noise(state.edit_cfg, len(chunk), rng)
            direction, norm = posterior_from_summary(f, state.edit_cfg, noise)
            z = ad.mul(direction, norm)
            src = [state.vocab.encode(p.source) for p in chunk]
            tgt = [state.vocab.encode(p.target, add_bounds=True) for p in chunk]
            src_ids, src_mask = pad_batch(src)
            tgt_ids, tgt_mask = pad_batch(tgt)
            memory = encode_batch(state, src_ids, src_mask)
            logits = decode_batch(state, memory, src_mask,
                                  tgt_ids[:, :-1], tgt_mask[:, :-1], z)
            pred = logits.data.argmax(axis=-1)
            labels = tgt_ids[:, 1:]
            mask = tgt_mask[:, 1:] > 0
            correct += int((pred[mask] == labels[mask]).sum())
            total += int(mask.sum())
    return correct / max(total, 1)
