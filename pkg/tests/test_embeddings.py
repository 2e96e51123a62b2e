import numpy as np
import pytest

from emocause.corpus import Vocabulary
from emocause.embeddings import (EmbeddingMatrix, SkipgramConfig, load_embeddings,
                                 load_embeddings_binary, lookup, random_init,
                                 save_embeddings_binary, save_embeddings_text,
                                 train_skipgram)


@pytest.fixture
def vocab():
    return Vocabulary(["<OOV>", "a", "b", "c", "d"], oov_id=0)


def test_random_init_is_reproducible(vocab):
    m1 = random_init(vocab, 6, seed=9)
    m2 = random_init(vocab, 6, seed=9)
    assert np.array_equal(m1.values, m2.values)
    m3 = random_init(vocab, 6, seed=10)
    assert not np.array_equal(m1.values, m3.values)


def test_random_init_zero_scale_gives_zero_matrix(vocab):
    m = random_init(vocab, 4, seed=0, scale=0.0)
    assert np.all(m.values == 0.0)


def test_random_init_respects_bounds(vocab):
    m = random_init(vocab, 8, seed=1, scale=0.25)
    assert np.all(np.abs(m.values) <= 0.25)


def test_random_init_mean_matches_uniform_distribution():
    # uniform on [-s, s]: var = s^2/3, so the sample mean of n draws has
    # standard deviation s / sqrt(3 n)
    big = Vocabulary(["<OOV>"] + [f"w{i}" for i in range(9999)], oov_id=0)
    scale = 0.5
    m = random_init(big, 100, seed=2, scale=scale)
    n = m.values.size
    assert n == 10_000 * 100
    sigma = scale / np.sqrt(3.0 * n)
    assert abs(m.values.mean()) < 3.0 * sigma


def test_matrix_shape_is_validated(vocab):
    with pytest.raises(ValueError):
        EmbeddingMatrix(np.zeros((3, 2)), 3, vocab)
    with pytest.raises(ValueError):
        EmbeddingMatrix(np.full((3, 5), np.nan), 3, vocab)


def test_lookup_returns_columns(vocab):
    m = random_init(vocab, 5, seed=0)
    assert np.array_equal(lookup(m, 0), m.values[:, 0])
    assert np.array_equal(lookup(m, vocab.oov_id), m.values[:, vocab.oov_id])
    with pytest.raises(ValueError):
        lookup(m, len(vocab))


def test_lookup_reflects_inplace_update(vocab):
    m = random_init(vocab, 3, seed=0)
    grad = np.array([1.0, -2.0, 0.5])
    before = lookup(m, 2).copy()
    m.values[:, 2] -= 0.1 * grad
    assert np.allclose(lookup(m, 2), before - 0.1 * grad)


def test_text_format_roundtrip_is_exact(tmp_path, vocab):
    m = random_init(vocab, 7, seed=5, scale=0.3)
    path = tmp_path / "vec.txt"
    save_embeddings_text(m, path)
    loaded = load_embeddings(path, vocab, 7, seed=99)
    assert np.array_equal(loaded.values, m.values)
    save_embeddings_text(loaded, path)
    again = load_embeddings(path, vocab, 7, seed=100)
    assert np.array_equal(again.values, m.values)


def test_load_fills_missing_words_with_seeded_random(tmp_path, vocab):
    path = tmp_path / "vec.txt"
    path.write_text("2 3\na 1.0 2.0 3.0\nb -1.0 0.5 0.25\n", encoding="utf-8")
    m1 = load_embeddings(path, vocab, 3, seed=4)
    m2 = load_embeddings(path, vocab, 3, seed=4)
    assert np.array_equal(m1.values, m2.values)
    assert np.array_equal(m1.values[:, vocab.id_for("a")], [1.0, 2.0, 3.0])
    assert np.array_equal(m1.values[:, vocab.id_for("b")], [-1.0, 0.5, 0.25])
    # absent words got random columns, not zeros
    assert np.any(m1.values[:, vocab.id_for("c")] != 0.0)


def test_load_rejects_dimension_mismatch(tmp_path, vocab):
    path = tmp_path / "vec.txt"
    path.write_text("1 50\n" + "a " + " ".join(["0.0"] * 50) + "\n", encoding="utf-8")
    with pytest.raises(ValueError, match="dimension 50"):
        load_embeddings(path, vocab, 20)


def test_load_rejects_non_numeric_value_with_line_number(tmp_path, vocab):
    path = tmp_path / "vec.txt"
    path.write_text("1 3\na 1.0 oops 3.0\n", encoding="utf-8")
    with pytest.raises(ValueError, match="line 2"):
        load_embeddings(path, vocab, 3)


def test_load_rejects_bad_header_and_count(tmp_path, vocab):
    path = tmp_path / "vec.txt"
    path.write_text("nonsense\n", encoding="utf-8")
    with pytest.raises(ValueError, match="header"):
        load_embeddings(path, vocab, 3)
    path.write_text("3 3\na 1 2 3\n", encoding="utf-8")
    with pytest.raises(ValueError, match="declares 3"):
        load_embeddings(path, vocab, 3)


def test_binary_roundtrip_is_exact(tmp_path, vocab):
    m = random_init(vocab, 9, seed=8, scale=1.0)
    path = tmp_path / "vec.bin"
    save_embeddings_binary(m, path)
    loaded = load_embeddings_binary(path)
    assert np.array_equal(loaded.values, m.values)
    assert loaded.vocab == vocab
    assert loaded.dim == 9


def test_binary_rejects_wrong_magic(tmp_path):
    path = tmp_path / "vec.bin"
    path.write_bytes(b"NOTRIGHT" + b"\x00" * 64)
    with pytest.raises(ValueError, match="magic"):
        load_embeddings_binary(path)


SEQS = None


def co_occurrence_sequences():
    # a/b always appear interleaved, c/d likewise, never across groups
    seqs = []
    for _ in range(40):
        seqs.append([1, 2, 1, 2, 1])
        seqs.append([3, 4, 3, 4, 3])
    return seqs


def test_skipgram_groups_co_occurring_tokens(vocab):
    m = train_skipgram(co_occurrence_sequences(), vocab, SkipgramConfig(dim=10, seed=0))

    def cosine(i, j):
        u, v = m.values[:, i], m.values[:, j]
        return float(u @ v / (np.linalg.norm(u) * np.linalg.norm(v)))

    assert cosine(1, 2) > cosine(1, 3)


def test_skipgram_is_deterministic(vocab):
    m1 = train_skipgram(co_occurrence_sequences(), vocab, SkipgramConfig(dim=6, seed=3))
    m2 = train_skipgram(co_occurrence_sequences(), vocab, SkipgramConfig(dim=6, seed=3))
    assert np.array_equal(m1.values, m2.values)


def test_skipgram_output_is_finite_and_shaped(vocab):
    m = train_skipgram(co_occurrence_sequences(), vocab, SkipgramConfig(dim=12, seed=0))
    assert m.values.shape == (12, len(vocab))
    assert np.isfinite(m.values).all()


def test_skipgram_rejects_bad_config_and_input(vocab):
    with pytest.raises(ValueError):
        train_skipgram(co_occurrence_sequences(), vocab, SkipgramConfig(epochs=0))
    with pytest.raises(ValueError):
        train_skipgram([], vocab, SkipgramConfig())
    with pytest.raises(ValueError):
        train_skipgram([[99]], vocab, SkipgramConfig())  # id out of vocabulary
    with pytest.raises(ValueError):
        train_skipgram([[1]], vocab, SkipgramConfig())  # no co-occurring pairs
