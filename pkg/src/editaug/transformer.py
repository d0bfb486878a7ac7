"""Small transformer encoder-decoder over frozen word embeddings.

The encoder is a standard multi-head attention stack. The decoder is too,
except that the sampled edit vector is concatenated to the decoder output
right before the generator projection; it is never injected into per-layer
inputs, so encoder memory is independent of the edit. The generator maps the
concatenation back to embedding space and scores it against the frozen
embedding table, which is what lets words injected at inference time be
generated at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from editaug import autodiff as ad
from editaug.editspace import EditVaeConfig, EditVector
from editaug.embeddings import EmbeddingTable
from editaug.errors import ConfigError, LengthExceededError
from editaug.pairs import SentencePair
from editaug.vocab import BOS_ID, EOS_ID, PAD_ID, Sentence, Vocabulary

NEG_INF = -1e9


@dataclass(frozen=True)
class TransformerConfig:
    d_model: int = 128
    n_heads: int = 4
    d_k: int = 32
    d_v: int = 32
    n_layers_enc: int = 2
    n_layers_dec: int = 2
    d_ffn: int = 512
    max_len: int = 64
    dropout_rate: float = 0.1

    def __post_init__(self):
        if self.d_model != self.n_heads * self.d_k or self.d_model != self.n_heads * self.d_v:
            raise ConfigError("d_model must equal n_heads*d_k and n_heads*d_v")
        if min(self.d_model, self.n_heads, self.d_k, self.d_v,
               self.n_layers_enc, self.n_layers_dec, self.d_ffn, self.max_len) <= 0:
            raise ConfigError("all transformer dimensions must be positive")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ConfigError("dropout_rate must be in [0, 1)")


@dataclass
class ModelState:
    cfg: TransformerConfig
    edit_cfg: EditVaeConfig
    vocab: Vocabulary
    emb: EmbeddingTable
    params: dict[str, ad.Tensor]
    positions: np.ndarray = field(init=False)

    def __post_init__(self):
        self.positions = sinusoidal_positions(self.cfg.max_len, self.cfg.d_model)
        gen_w = self.params["gen.w"]
        if gen_w.shape[0] != self.cfg.d_model + self.edit_cfg.d_edit:
            raise ConfigError("generator input width must be d_model + d_edit")

    def trainable(self) -> dict[str, ad.Tensor]:
        return self.params

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def param_count(self) -> int:
        return sum(p.data.size for p in self.params.values())


def sinusoidal_positions(max_len: int, d_model: int) -> np.ndarray:
    pos = np.arange(max_len, dtype=np.float64)[:, None]
    idx = np.arange(0, d_model, 2, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, idx / d_model)
    pe = np.zeros((max_len, d_model), dtype=np.float64)
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle[:, : pe[:, 1::2].shape[1]])
    return pe


def _xavier(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_state(
    cfg: TransformerConfig,
    edit_cfg: EditVaeConfig,
    vocab: Vocabulary,
    emb: EmbeddingTable,
    seed: int = 0,
) -> ModelState:
    """Create a ModelState with Xavier-initialised trainable parameters.

    Parameter insertion order is fixed and is the checkpoint tensor order.
    """
    rng = np.random.default_rng(seed)
    p: dict[str, ad.Tensor] = {}

    def mat(name, fan_in, fan_out):
        p[name] = ad.Tensor(_xavier(rng, fan_in, fan_out), requires_grad=True)

    def vec(name, n, value=0.0):
        p[name] = ad.Tensor(np.full(n, value, dtype=np.float64), requires_grad=True)

    d, h = cfg.d_model, cfg.d_ffn
    mat("in_proj.w", emb.dim, d)
    vec("in_proj.b", d)
    for side, n_layers in (("enc", cfg.n_layers_enc), ("dec", cfg.n_layers_dec)):
        for i in range(n_layers):
            blocks = ["self"] if side == "enc" else ["self", "cross"]
            for blk in blocks:
                for wname in ("wq", "wk", "wv", "wo"):
                    mat(f"{side}{i}.{blk}.{wname}", d, d)
                for bname in ("bq", "bk", "bv", "bo"):
                    vec(f"{side}{i}.{blk}.{bname}", d)
                vec(f"{side}{i}.ln_{blk}.g", d, 1.0)
                vec(f"{side}{i}.ln_{blk}.b", d)
            mat(f"{side}{i}.ffn.w1", d, h)
            vec(f"{side}{i}.ffn.b1", h)
            mat(f"{side}{i}.ffn.w2", h, d)
            vec(f"{side}{i}.ffn.b2", d)
            vec(f"{side}{i}.ln_ffn.g", d, 1.0)
            vec(f"{side}{i}.ln_ffn.b", d)
    mat("gen.w", d + edit_cfg.d_edit, emb.dim)
    vec("gen.b", emb.dim)
    mat("adapter.w", 2 * emb.dim, edit_cfg.d_edit)
    vec("adapter.b", edit_cfg.d_edit)
    return ModelState(cfg=cfg, edit_cfg=edit_cfg, vocab=vocab, emb=emb, params=p)


def attention(q, k, v, visible=None) -> ad.Tensor:
    """Scaled dot-product attention for one query: softmax(q.K/sqrt(d_k)).V.

    q: (d_k,); k: (T, d_k); v: (T, d_v); visible: optional bool (T,) mask,
    False rows receive zero weight. Returns (d_v,).
    """
    q, k, v = ad.as_tensor(q), ad.as_tensor(k), ad.as_tensor(v)
    d_k = q.shape[-1]
    scores = ad.mul(ad.matmul(ad.reshape(q, (1, d_k)), ad.swapaxes(k, -1, -2)),
                    1.0 / math.sqrt(d_k))
    if visible is not None:
        add_mask = np.where(np.asarray(visible, dtype=bool), 0.0, NEG_INF)[None, :]
        scores = ad.add(scores, add_mask)
    weights = ad.softmax(scores, axis=-1)
    return ad.reshape(ad.matmul(weights, v), (v.shape[-1],))


def pad_batch(id_seqs: list[np.ndarray], width: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Right-pad id sequences into (B, T) ids and a float visibility mask."""
    width = width or max(len(s) for s in id_seqs)
    ids = np.full((len(id_seqs), width), PAD_ID, dtype=np.int64)
    mask = np.zeros((len(id_seqs), width), dtype=np.float64)
    for i, seq in enumerate(id_seqs):
        ids[i, : len(seq)] = seq
        mask[i, : len(seq)] = 1.0
    return ids, mask


def _additive(mask: np.ndarray) -> np.ndarray:
    return np.where(mask > 0, 0.0, NEG_INF)


def _mha(p, prefix: str, q_in: ad.Tensor, kv_in: ad.Tensor,
         add_mask: np.ndarray, cfg: TransformerConfig) -> ad.Tensor:
    """Multi-head attention; add_mask is additive, broadcastable to
    (B, heads, Tq, Tk)."""
    B, Tq, D = q_in.shape
    Tk = kv_in.shape[1]
    H, dk = cfg.n_heads, cfg.d_k

    def proj(x, w, b, T):
        y = ad.linear(x, p[f"{prefix}.{w}"], p[f"{prefix}.{b}"])
        return ad.swapaxes(ad.reshape(y, (B, T, H, dk)), 1, 2)   # (B,H,T,dk)

    q = proj(q_in, "wq", "bq", Tq)
    k = proj(kv_in, "wk", "bk", Tk)
    v = proj(kv_in, "wv", "bv", Tk)
    scores = ad.mul(ad.matmul(q, ad.swapaxes(k, -1, -2)), 1.0 / math.sqrt(dk))
    weights = ad.softmax(ad.add(scores, add_mask), axis=-1)
    ctx = ad.reshape(ad.swapaxes(ad.matmul(weights, v), 1, 2), (B, Tq, D))
    return ad.linear(ctx, p[f"{prefix}.wo"], p[f"{prefix}.bo"])


def _layer_norm(x: ad.Tensor, g: ad.Tensor, b: ad.Tensor, eps: float = 1e-5) -> ad.Tensor:
    mu = ad.mean(x, axis=-1, keepdims=True)
    xc = ad.sub(x, mu)
    var = ad.mean(ad.mul(xc, xc), axis=-1, keepdims=True)
    return ad.add(ad.mul(ad.div(xc, ad.sqrt(ad.add(var, eps))), g), b)


def _ffn(p, prefix: str, x: ad.Tensor) -> ad.Tensor:
    hidden = ad.relu(ad.linear(x, p[f"{prefix}.w1"], p[f"{prefix}.b1"]))
    return ad.linear(hidden, p[f"{prefix}.w2"], p[f"{prefix}.b2"])


def _embed(state: ModelState, ids: np.ndarray) -> ad.Tensor:
    """Frozen row lookup + trainable input projection + positions."""
    x = ad.linear(ad.Tensor(state.emb.lookup(ids)),
                  state.params["in_proj.w"], state.params["in_proj.b"])
    return ad.add(x, state.positions[: ids.shape[1]])


def _sublayer(state, x, y, ln_name, rng, rate):
    if rng is not None and rate > 0:
        y = ad.dropout(y, rate, rng)
    return _layer_norm(ad.add(x, y), state.params[f"{ln_name}.g"], state.params[f"{ln_name}.b"])


def encode_batch(state: ModelState, src_ids: np.ndarray, src_mask: np.ndarray,
                 rng: np.random.Generator | None = None) -> ad.Tensor:
    """Encoder stack over a padded batch; returns memory (B, Ts, d_model)."""
    if src_ids.shape[1] > state.cfg.max_len:
        raise LengthExceededError(
            f"source length {src_ids.shape[1]} exceeds max_len {state.cfg.max_len}"
        )
    p, cfg = state.params, state.cfg
    rate = cfg.dropout_rate
    attn_mask = _additive(src_mask)[:, None, None, :]       # (B,1,1,Ts)
    x = _embed(state, src_ids)
    if rng is not None and rate > 0:
        x = ad.dropout(x, rate, rng)
    for i in range(cfg.n_layers_enc):
        x = _sublayer(state, x, _mha(p, f"enc{i}.self", x, x, attn_mask, cfg),
                      f"enc{i}.ln_self", rng, rate)
        x = _sublayer(state, x, _ffn(p, f"enc{i}.ffn", x), f"enc{i}.ln_ffn", rng, rate)
    return x


def decode_batch(state: ModelState, memory: ad.Tensor, src_mask: np.ndarray,
                 tgt_in_ids: np.ndarray, tgt_in_mask: np.ndarray,
                 z: ad.Tensor, rng: np.random.Generator | None = None) -> ad.Tensor:
    """Decoder + generator; z is (B, d_edit); returns logits (B, Tt, |vocab|)."""
    if tgt_in_ids.shape[1] > state.cfg.max_len:
        raise LengthExceededError(
            f"target length {tgt_in_ids.shape[1]} exceeds max_len {state.cfg.max_len}"
        )
    p, cfg = state.params, state.cfg
    rate = cfg.dropout_rate
    B, Tt = tgt_in_ids.shape
    causal = np.triu(np.full((Tt, Tt), NEG_INF), k=1)[None, None, :, :]
    self_mask = causal + _additive(tgt_in_mask)[:, None, None, :]
    cross_mask = _additive(src_mask)[:, None, None, :]

    x = _embed(state, tgt_in_ids)
    if rng is not None and rate > 0:
        x = ad.dropout(x, rate, rng)
    for i in range(cfg.n_layers_dec):
        x = _sublayer(state, x, _mha(p, f"dec{i}.self", x, x, self_mask, cfg),
                      f"dec{i}.ln_self", rng, rate)
        x = _sublayer(state, x, _mha(p, f"dec{i}.cross", x, memory, cross_mask, cfg),
                      f"dec{i}.ln_cross", rng, rate)
        x = _sublayer(state, x, _ffn(p, f"dec{i}.ffn", x), f"dec{i}.ln_ffn", rng, rate)

    z_tiled = ad.add(ad.Tensor(np.zeros((B, Tt, z.shape[-1]))), ad.reshape(z, (B, 1, z.shape[-1])))
    gen_in = ad.concat([x, z_tiled], axis=-1)
    h = ad.linear(gen_in, p["gen.w"], p["gen.b"])            # (B,Tt,d_emb)
    return ad.matmul(h, state.emb.rows.T)                    # frozen tied projection


def forward_loss_batch(state: ModelState, src: list[np.ndarray], tgt: list[np.ndarray],
                       z: ad.Tensor, rng: np.random.Generator | None = None) -> ad.Tensor:
    """Teacher-forced mean token cross-entropy over a batch; PAD excluded.

    src: per-pair source id sequences (no BOS/EOS); tgt: target id sequences
    including BOS and EOS; z: (B, d_edit) edit vectors.
    """
    src_ids, src_mask = pad_batch(src)
    tgt_ids, tgt_mask = pad_batch(tgt)
    memory = encode_batch(state, src_ids, src_mask, rng)
    logits = decode_batch(state, memory, src_mask, tgt_ids[:, :-1], tgt_mask[:, :-1], z, rng)
    labels = tgt_ids[:, 1:].reshape(-1)
    label_mask = tgt_mask[:, 1:].reshape(-1)
    V = len(state.emb)
    return ad.masked_nll(ad.reshape(logits, (-1, V)), labels, label_mask)


def encode(x_prime: Sentence, state: ModelState) -> np.ndarray:
    """Single-sentence encoder memory, shape (d_s, d_model)."""
    ids = state.vocab.encode(x_prime)
    with ad.no_grad():
        mem = encode_batch(state, ids[None, :], np.ones((1, len(ids))))
    return mem.data[0]


def decode_step(memory, prefix_ids: np.ndarray, z: EditVector, state: ModelState,
                src_mask: np.ndarray | None = None) -> np.ndarray:
    """Next-token logits given BOS-led prefix ids; greedy decoding's inner step."""
    if prefix_ids[0] != BOS_ID:
        raise ValueError("prefix must begin with BOS")
    mem = memory if isinstance(memory, ad.Tensor) else ad.Tensor(np.asarray(memory)[None, :, :])
    if src_mask is None:
        src_mask = np.ones((1, mem.shape[-2]))
    zt = ad.Tensor(z.vector()[None, :])
    with ad.no_grad():
        logits = decode_batch(state, mem, src_mask,
                              prefix_ids[None, :], np.ones((1, len(prefix_ids))), zt)
    return logits.data[0, -1]


def forward_loss(pair: SentencePair, z: EditVector, state: ModelState) -> float:
    """Mean per-token cross-entropy of one pair under a fixed edit vector."""
    src = state.vocab.encode(pair.source)
    tgt = state.vocab.encode(pair.target, add_bounds=True)
    zt = ad.Tensor(z.vector()[None, :])
    with ad.no_grad():
        loss = forward_loss_batch(state, [src], [tgt], zt)
    return loss.item()


def greedy_decode(state: ModelState, source: Sentence, z: EditVector,
                  temperature: float = 0.0,
                  rng: np.random.Generator | None = None,
                  max_out: int | None = None) -> Sentence:
    """Decode a sentence from source + edit vector; EOS- or length-terminated.

    temperature 0 is argmax; above 0, tokens are sampled from the tempered
    softmax using rng.
    """
    src_ids = state.vocab.encode(source)
    if len(src_ids) > state.cfg.max_len:
        raise LengthExceededError(f"source length {len(src_ids)} exceeds max_len")
    if max_out is None:
        max_out = min(int(1.5 * len(src_ids)) + 5, state.cfg.max_len - 1)
    src_mask = np.ones((1, len(src_ids)))
    with ad.no_grad():
        memory = encode_batch(state, src_ids[None, :], src_mask)
    prefix = [BOS_ID]
    for _ in range(max_out):
        logits = decode_step(memory, np.asarray(prefix), z, state, src_mask)
        if temperature > 0.0:
            scaled = logits / temperature
            probs = np.exp(scaled - scaled.max())
            probs /= probs.sum()
            nxt = int((rng or np.random.default_rng()).choice(len(probs), p=probs))
        else:
            nxt = int(np.argmax(logits))
        if nxt == EOS_ID:
            break
        prefix.append(nxt)
    return state.vocab.decode(prefix)
