import numpy as np
import pytest

from editaug import autodiff as ad
from editaug.checkpoint import inspect_checkpoint, load_checkpoint, save_checkpoint
from editaug.editspace import posterior_noise
from editaug.errors import FormatError
from editaug.pairs import SentencePair
from editaug.training import batch_loss

from test_transformer import make_state, sent


@pytest.fixture
def state():
    return make_state(seed=9)


def fixed_forward(state):
    pairs = [SentencePair(sent("alpha beta"), sent("beta gamma"), 0.4)]
    noise = posterior_noise(state.edit_cfg, 1, np.random.default_rng(123))
    with ad.no_grad():
        return batch_loss(state, pairs, noise).item()


def test_roundtrip_bit_identical_forward(tmp_path, state):
    before = fixed_forward(state)
    path = tmp_path / "model.ckpt"
    save_checkpoint(state, path)
    loaded = load_checkpoint(path)
    assert fixed_forward(loaded) == before
    for name, p in state.params.items():
        np.testing.assert_array_equal(loaded.params[name].data, p.data)
    np.testing.assert_array_equal(loaded.emb.rows, state.emb.rows)
    assert loaded.vocab.words == state.vocab.words


def test_roundtrip_preserves_configs(tmp_path, state):
    path = tmp_path / "model.ckpt"
    save_checkpoint(state, path)
    loaded = load_checkpoint(path)
    assert loaded.cfg == state.cfg
    assert loaded.edit_cfg == state.edit_cfg


def test_inspect_reports_header(tmp_path, state):
    path = tmp_path / "model.ckpt"
    save_checkpoint(state, path)
    info = inspect_checkpoint(path)
    assert info["version"] == 1
    assert info["config"]["d_model"] == str(state.cfg.d_model)
    assert info["vocab_words"] == len(state.vocab)
    names = [t["name"] for t in info["tensors"]]
    assert names[0] == "emb.rows"
    assert names[1:] == list(state.params.keys())
    assert info["trainable_parameters"] == state.param_count()


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "junk.ckpt"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(FormatError):
        load_checkpoint(path)
    with pytest.raises(FormatError):
        inspect_checkpoint(path)


def test_float32_tensors_roundtrip(tmp_path, state):
    for p in state.params.values():
        p.data = p.data.astype(np.float32)
    state.emb.rows = state.emb.rows.astype(np.float32)
    path = tmp_path / "f32.ckpt"
    save_checkpoint(state, path)
    loaded = load_checkpoint(path)
    for name, p in state.params.items():
        assert loaded.params[name].data.dtype == np.float32
        np.testing.assert_array_equal(loaded.params[name].data, p.data)
