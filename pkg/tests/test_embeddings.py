import numpy as np
import pytest

from editaug.embeddings import EmbeddingTable, inject_oov, load_embeddings, oov_vectors_for
from editaug.errors import DimMismatchError, DuplicateWordError, FormatError
from editaug.vocab import PAD_ID, SPECIALS, Vocabulary, tokenize


def write_emb(path, entries):
    with open(path, "w", encoding="utf-8") as fh:
        for word, vec in entries:
            fh.write(word + " " + " ".join(str(v) for v in vec) + "\n")


@pytest.fixture
def emb_file(tmp_path):
    path = tmp_path / "emb.txt"
    write_emb(path, [
        ("red", [1.0, 0.0, 0.0, 0.0]),
        ("green", [0.0, 2.0, 0.0, 0.0]),
        ("blue", [0.0, 0.0, 3.0, 0.0]),
    ])
    return path


def test_load_covers_vocab(emb_file):
    v = Vocabulary.build([tokenize("red green blue")])
    table = load_embeddings(emb_file, v)
    assert table.rows.shape == (3 + len(SPECIALS), 4)
    np.testing.assert_array_equal(table.rows[v.id_of("green")], [0.0, 2.0, 0.0, 0.0])
    assert table.frozen.all()
    np.testing.assert_array_equal(table.rows[PAD_ID], 0.0)


def test_missing_word_gets_seeded_vector(emb_file):
    v = Vocabulary.build([tokenize("red missing")])
    t1 = load_embeddings(emb_file, v, seed=3)
    t2 = load_embeddings(emb_file, Vocabulary.build([tokenize("red missing")]), seed=3)
    row = t1.rows[v.id_of("missing")]
    assert np.linalg.norm(row) > 0
    np.testing.assert_array_equal(row, t2.rows[v.id_of("missing")])
    # scaled to the file's mean row norm: (1 + 2 + 3) / 3
    assert np.linalg.norm(row) == pytest.approx(2.0)


def test_mixed_dim_file_raises(tmp_path):
    path = tmp_path / "bad.txt"
    write_emb(path, [("a", [1.0, 2.0, 3.0]), ("b", [1.0, 2.0, 3.0, 4.0])])
    with pytest.raises(FormatError):
        load_embeddings(path, Vocabulary())


def test_missing_file_raises(tmp_path):
    with pytest.raises(OSError):
        load_embeddings(tmp_path / "nope.txt", Vocabulary())


def test_inject_nothing_is_bit_identical(emb_file):
    v = Vocabulary.build([tokenize("red")])
    table = load_embeddings(emb_file, v)
    before = table.rows.tobytes()
    out = inject_oov(table, v, [])
    assert out.rows.tobytes() == before


def test_inject_wrong_dim(emb_file):
    v = Vocabulary.build([tokenize("red")])
    table = load_embeddings(emb_file, v)
    with pytest.raises(DimMismatchError):
        inject_oov(table, v, [("new", np.zeros(3))])


def test_inject_duplicate(emb_file):
    v = Vocabulary.build([tokenize("red")])
    table = load_embeddings(emb_file, v)
    with pytest.raises(DuplicateWordError):
        inject_oov(table, v, [("red", np.zeros(4))])


def test_inject_is_append_only(emb_file):
    v = Vocabulary.build([tokenize("red green")])
    table = load_embeddings(emb_file, v)
    old = table.rows.copy()
    out = inject_oov(table, v, [("purple", np.ones(4)), ("cyan", np.full(4, 2.0))])
    assert len(out) == len(old) + 2
    np.testing.assert_array_equal(out.rows[: len(old)], old)
    assert v.id_of("purple") == len(old)
    np.testing.assert_array_equal(out.rows[v.id_of("cyan")], 2.0)


def test_oov_vectors_prefer_extra_file(tmp_path, emb_file):
    v = Vocabulary.build([tokenize("red")])
    table = load_embeddings(emb_file, v)
    extra = tmp_path / "extra.txt"
    write_emb(extra, [("onyx", [9.0, 9.0, 9.0, 9.0])])
    got = dict(oov_vectors_for(["onyx", "quartz"], table, extra_file=extra, seed=1))
    np.testing.assert_array_equal(got["onyx"], [9.0, 9.0, 9.0, 9.0])
    assert np.isfinite(got["quartz"]).all()
    again = dict(oov_vectors_for(["quartz"], table, extra_file=extra, seed=1))
    np.testing.assert_array_equal(got["quartz"], again["quartz"])
