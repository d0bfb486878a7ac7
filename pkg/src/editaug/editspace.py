"""Latent edit vectors: the inverse editor q(z | x', x) and the prior p(z).

An edit is factored into a unit direction and a scalar magnitude. At training
time the direction is sampled from a von Mises-Fisher distribution centred on
the adapter-projected difference of the two sentences' word embeddings, and
the magnitude from a narrow uniform window around that difference's length.
At inference time both come from a fixed prior: uniform direction on the
sphere, uniform magnitude on [0, norm_max].

Sampling is split into noise generation (rng draws, parameter-free) and a
deterministic differentiable construction, so gradients reach the adapter
through the mean direction while the noise stays constant. With fixed
concentration and window width the KL term of the training objective is a
parameter-free constant and is dropped as exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from editaug import autodiff as ad
from editaug.errors import ConfigError, NonFiniteInputError
from editaug.vocab import Sentence, Vocabulary

_DEGENERATE_NORM = 1e-8


@dataclass(frozen=True)
class EditVaeConfig:
    d_edit: int = 128
    kappa: float = 30.0
    epsilon: float = 1.0
    norm_max: float = 10.0

    def __post_init__(self):
        if self.d_edit < 2:
            raise ConfigError("d_edit must be at least 2")
        if min(self.kappa, self.epsilon, self.norm_max) <= 0:
            raise ConfigError("kappa, epsilon, norm_max must be positive")
        if self.epsilon > self.norm_max:
            raise ConfigError("epsilon cannot exceed norm_max")


@dataclass(frozen=True)
class EditVector:
    """Unit direction plus non-negative magnitude."""

    direction: np.ndarray
    norm: float

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=np.float64)
        object.__setattr__(self, "direction", d)
        if abs(float(np.linalg.norm(d)) - 1.0) > 1e-6:
            raise ValueError("direction must have unit L2 norm")
        if self.norm < 0:
            raise ValueError("norm must be non-negative")

    def vector(self) -> np.ndarray:
        return self.direction * self.norm


def diff_features(x_prime: Sentence, x: Sentence, emb, vocab: Vocabulary) -> np.ndarray:
    """Concatenated insert/delete embedding sums, shape (2*d_emb,).

    Insertions are words of x absent from x', deletions the reverse; empty
    sets contribute zero vectors. Frozen embeddings make this a constant
    with respect to every trainable parameter.
    """
    inserted = x.token_set() - x_prime.token_set()
    deleted = x_prime.token_set() - x.token_set()
    out = np.zeros(2 * emb.dim, dtype=np.float64)
    for w in inserted:
        out[: emb.dim] += emb.rows[vocab.id_of(w)]
    for w in deleted:
        out[emb.dim:] += emb.rows[vocab.id_of(w)]
    return out


def edit_summary_batch(features: np.ndarray, adapter_w: ad.Tensor, adapter_b: ad.Tensor) -> ad.Tensor:
    """Project stacked diff features (B, 2*d_emb) to edit summaries (B, d_edit)."""
    return ad.linear(ad.Tensor(features), adapter_w, adapter_b)


def edit_summary(
    x_prime: Sentence, x: Sentence, emb, vocab: Vocabulary,
    adapter_w: ad.Tensor, adapter_b: ad.Tensor,
) -> ad.Tensor:
    feats = diff_features(x_prime, x, emb, vocab)[None, :]
    return edit_summary_batch(feats, adapter_w, adapter_b)


def sample_vmf_cos(kappa: float, dim: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Cosines of the angle to the mean for n vMF draws (Wood's rejection).

    The envelope constant b is computed in its rationalised form, which stays
    accurate for very large concentrations.
    """
    if dim < 2:
        raise ConfigError("vMF sampling needs dimension >= 2")
    m = dim - 1
    b = m / (np.sqrt(4.0 * kappa * kappa + m * m) + 2.0 * kappa)
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + m * np.log(1.0 - x0 * x0)

    out = np.empty(n, dtype=np.float64)
    filled = 0
    while filled < n:
        todo = n - filled
        z = rng.beta(m / 2.0, m / 2.0, size=todo)
        w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        u = rng.random(todo)
        ok = kappa * w + m * np.log1p(-x0 * w) - c >= np.log(u)
        k = int(ok.sum())
        out[filled: filled + k] = w[ok]
        filled += k
    return out


def vmf_from_noise(mu: ad.Tensor | np.ndarray, w: np.ndarray, g: np.ndarray) -> ad.Tensor:
    """Deterministic vMF construction: rotate canonical samples onto mu.

    mu: unit mean directions (B, d); w: cosines (B, 1); g: raw Gaussian noise
    (B, d). The tangent component of g is normalised inside the orthogonal
    complement of mu, so jointly rotating mu and g rotates the output, and
    gradients flow to mu while (w, g) are parameter-free constants.
    """
    mu = ad.as_tensor(mu)
    gt = ad.Tensor(np.asarray(g, dtype=np.float64))
    proj = ad.tsum(ad.mul(gt, mu), axis=-1, keepdims=True)
    tangent = ad.sub(gt, ad.mul(proj, mu))
    tangent = ad.div(tangent, ad.l2_norm(tangent))
    w = np.asarray(w, dtype=np.float64)
    return ad.add(ad.mul(mu, w), ad.mul(tangent, np.sqrt(1.0 - w * w)))


def posterior_noise(cfg: EditVaeConfig, n: int, rng: np.random.Generator):
    """Draw all randomness used by posterior_from_summary for n samples."""
    w = sample_vmf_cos(cfg.kappa, cfg.d_edit, n, rng)[:, None]
    g = rng.standard_normal((n, cfg.d_edit))
    u = rng.random((n, 1))
    fallback = rng.standard_normal((n, cfg.d_edit))
    return w, g, u, fallback


def posterior_from_summary(f: ad.Tensor, cfg: EditVaeConfig, noise) -> tuple[ad.Tensor, ad.Tensor]:
    """Reparameterised posterior sample for a batch of edit summaries.

    f: (B, d_edit) tensor. Returns (directions (B, d_edit), norms (B, 1)).
    Near-zero summaries fall back to a noise-supplied uniform direction with
    the magnitude window starting at zero; those rows pass no gradient.
    """
    w, g, u, fallback = noise
    if not np.all(np.isfinite(f.data)):
        raise NonFiniteInputError("edit summary contains non-finite values")
    fnorm = ad.l2_norm(f)                                    # (B, 1)
    degenerate = fnorm.data[:, 0] < _DEGENERATE_NORM
    keep = (~degenerate[:, None]).astype(np.float64)
    sub = fallback / np.linalg.norm(fallback, axis=-1, keepdims=True)

    f_eff = ad.add(ad.mul(f, keep), sub * (1.0 - keep))      # unit fallback rows
    norm_eff = ad.add(ad.mul(fnorm, keep), 1.0 - keep)
    fdir = ad.div(f_eff, norm_eff)

    window_lo = ad.mul(ad.clip_max(fnorm, cfg.norm_max - cfg.epsilon), keep)
    direction = vmf_from_noise(fdir, w, g)
    norm = ad.add(window_lo, cfg.epsilon * u)
    return direction, norm


def posterior_sample(f: np.ndarray, cfg: EditVaeConfig, rng: np.random.Generator) -> EditVector:
    """Single-vector posterior draw as a concrete EditVector."""
    f = np.asarray(f, dtype=np.float64).reshape(1, -1)
    noise = posterior_noise(cfg, 1, rng)
    direction, norm = posterior_from_summary(ad.Tensor(f), cfg, noise)
    d = direction.data[0]
    return EditVector(direction=d / np.linalg.norm(d), norm=float(norm.data[0, 0]))


def prior_sample(cfg: EditVaeConfig, rng: np.random.Generator) -> EditVector:
    """Uniform direction on the sphere, uniform magnitude on [0, norm_max]."""
    g = rng.standard_normal(cfg.d_edit)
    return EditVector(direction=g / np.linalg.norm(g), norm=float(rng.random() * cfg.norm_max))


def kl_term() -> float:
    """KL(q || p) contribution to the loss: exactly zero.

    Direction: KL(vMF(mu, kappa) || uniform sphere) depends only on kappa and
    the dimension, never on mu. Magnitude: KL(U[a, a+eps] || U[0, norm_max])
    is log(norm_max / eps) whenever the window lies inside the prior support,
    which the clipping in posterior_from_summary guarantees. Both pieces are
    constants with respect to every trainable parameter, so the optimizer
    sees a constant shift, i.e. zero.
    """
    return 0.0
