"""Versioned binary checkpoints.

Layout: magic, u32 version, a UTF-8 key=value config block, the vocabulary,
then named tensors in declared order (frozen embedding rows first, trainable
parameters in their insertion order), each with a shape prefix. Tensors are
stored in their native dtype - float64 for the default double-precision
build, float32 for speed builds - so a save/load round trip reproduces
forward passes bit-for-bit.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from editaug import autodiff as ad
from editaug.editspace import EditVaeConfig
from editaug.embeddings import EmbeddingTable
from editaug.errors import FormatError
from editaug.transformer import ModelState, TransformerConfig
from editaug.vocab import SPECIALS, Vocabulary

MAGIC = b"EDCK"
VERSION = 1
_DTYPE_CODES = {8: np.dtype("<f8"), 4: np.dtype("<f4")}


def _config_block(state: ModelState) -> str:
    cfg, ecfg = state.cfg, state.edit_cfg
    pairs = {
        "d_model": cfg.d_model, "n_heads": cfg.n_heads,
        "d_k": cfg.d_k, "d_v": cfg.d_v,
        "n_layers_enc": cfg.n_layers_enc, "n_layers_dec": cfg.n_layers_dec,
        "d_ffn": cfg.d_ffn, "max_len": cfg.max_len,
        "dropout_rate": cfg.dropout_rate,
        "d_edit": ecfg.d_edit, "kappa": ecfg.kappa,
        "epsilon": ecfg.epsilon, "norm_max": ecfg.norm_max,
        "d_emb": state.emb.dim, "vocab_size": len(state.vocab),
    }
    return "".join(f"{k}={v}\n" for k, v in pairs.items())


def _parse_config(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        if "=" not in line:
            raise FormatError(f"bad config line in checkpoint: {line!r}")
        k, v = line.split("=", 1)
        out[k] = v
    return out


def _write_block(fh, payload: bytes) -> None:
    fh.write(struct.pack("<Q", len(payload)))
    fh.write(payload)


def _read_block(fh) -> bytes:
    (n,) = struct.unpack("<Q", fh.read(8))
    return fh.read(n)


def _write_tensor(fh, name: str, arr: np.ndarray) -> None:
    raw = name.encode("utf-8")
    fh.write(struct.pack("<H", len(raw)))
    fh.write(raw)
    fh.write(struct.pack("<B", arr.ndim))
    for dim in arr.shape:
        fh.write(struct.pack("<Q", dim))
    code = arr.dtype.itemsize
    if code not in _DTYPE_CODES:
        raise FormatError(f"unsupported tensor dtype {arr.dtype} for {name}")
    fh.write(struct.pack("<B", code))
    fh.write(np.ascontiguousarray(arr, dtype=_DTYPE_CODES[code]).tobytes())


def _read_tensor(fh) -> tuple[str, np.ndarray]:
    (name_len,) = struct.unpack("<H", fh.read(2))
    name = fh.read(name_len).decode("utf-8")
    (ndim,) = struct.unpack("<B", fh.read(1))
    shape = tuple(struct.unpack("<Q", fh.read(8))[0] for _ in range(ndim))
    (code,) = struct.unpack("<B", fh.read(1))
    if code not in _DTYPE_CODES:
        raise FormatError(f"unknown dtype code {code} for tensor {name}")
    dtype = _DTYPE_CODES[code]
    count = int(np.prod(shape)) if shape else 1
    data = np.frombuffer(fh.read(count * dtype.itemsize), dtype=dtype).reshape(shape)
    return name, data.copy()


def save_checkpoint(state: ModelState, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        _write_block(fh, _config_block(state).encode("utf-8"))
        words = state.vocab.words[len(SPECIALS):]
        _write_block(fh, "\n".join(words).encode("utf-8"))
        fh.write(struct.pack("<Q", 1 + len(state.params)))
        _write_tensor(fh, "emb.rows", state.emb.rows)
        for name, p in state.params.items():
            _write_tensor(fh, name, p.data)


def load_checkpoint(path) -> ModelState:
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise FormatError(f"{path}: not a checkpoint (bad magic)")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise FormatError(f"{path}: unsupported checkpoint version {version}")
        kv = _parse_config(_read_block(fh).decode("utf-8"))
        vocab = Vocabulary()
        vocab_blob = _read_block(fh).decode("utf-8")
        for word in vocab_blob.split("\n"):
            if word:
                vocab.add_word(word)
        (n_tensors,) = struct.unpack("<Q", fh.read(8))
        tensors = dict(_read_tensor(fh) for _ in range(n_tensors))

    cfg = TransformerConfig(
        d_model=int(kv["d_model"]), n_heads=int(kv["n_heads"]),
        d_k=int(kv["d_k"]), d_v=int(kv["d_v"]),
        n_layers_enc=int(kv["n_layers_enc"]), n_layers_dec=int(kv["n_layers_dec"]),
        d_ffn=int(kv["d_ffn"]), max_len=int(kv["max_len"]),
        dropout_rate=float(kv["dropout_rate"]),
    )
    ecfg = EditVaeConfig(
        d_edit=int(kv["d_edit"]), kappa=float(kv["kappa"]),
        epsilon=float(kv["epsilon"]), norm_max=float(kv["norm_max"]),
    )
    emb_rows = tensors.pop("emb.rows")
    if len(vocab) != len(emb_rows):
        raise FormatError(
            f"{path}: vocab size {len(vocab)} != embedding rows {len(emb_rows)}"
        )
    emb = EmbeddingTable(dim=int(kv["d_emb"]), rows=emb_rows)
    params = {name: ad.Tensor(arr, requires_grad=True) for name, arr in tensors.items()}
    return ModelState(cfg=cfg, edit_cfg=ecfg, vocab=vocab, emb=emb, params=params)


def inspect_checkpoint(path) -> dict:
    """Header summary without reconstructing the model: version, config,
    tensor inventory, parameter counts."""
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise FormatError(f"{path}: not a checkpoint (bad magic)")
        (version,) = struct.unpack("<I", fh.read(4))
        config = _parse_config(_read_block(fh).decode("utf-8"))
        vocab_blob = _read_block(fh).decode("utf-8")
        (n_tensors,) = struct.unpack("<Q", fh.read(8))
        tensors = []
        for _ in range(n_tensors):
            name, arr = _read_tensor(fh)
            tensors.append({"name": name, "shape": arr.shape, "dtype": str(arr.dtype)})
    n_vocab_words = len([w for w in vocab_blob.split("\n") if w])
    total = sum(int(np.prod(t["shape"])) for t in tensors)
    trainable = sum(int(np.prod(t["shape"])) for t in tensors if t["name"] != "emb.rows")
    return {
        "version": version,
        "config": config,
        "vocab_words": n_vocab_words + len(SPECIALS),
        "tensors": tensors,
        "total_values": total,
        "trainable_parameters": trainable,
    }
