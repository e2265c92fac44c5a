"""Tests for vocabulary, embedding loading, tokenization, and lookup."""

import numpy as np
import pytest

from simxfer.autodiff import Tape, backward, matmul
from simxfer.embeddings import UNK_INDEX, load_embeddings, lookup, tokenize
from simxfer.errors import DataError


def write_vectors(tmp_path, text, name="vecs.txt"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_load_small_file(tmp_path):
    path = write_vectors(tmp_path, "the 0.1 0.2\ncat 0.3 0.4\n")
    result = load_embeddings(path, expected_dim=2)
    assert len(result.vocabulary) == 3  # unk, the, cat
    assert result.embedding.matrix.shape == (3, 2)
    assert result.vocabulary.lookup("the") == 1
    assert result.vocabulary.lookup("cat") == 2
    assert result.skipped_lines == 0


def test_unk_row_is_mean_of_loaded_vectors(tmp_path):
    path = write_vectors(tmp_path, "a 1.0 3.0\nb 3.0 5.0\n")
    result = load_embeddings(path, expected_dim=2)
    assert result.vocabulary.lookup("zzz") == UNK_INDEX
    assert np.allclose(result.embedding.matrix.values[UNK_INDEX], [2.0, 4.0])


def test_malformed_lines_counted(tmp_path):
    lines = [f"w{i} 0.{i} 0.{i}" for i in range(9)]
    lines.insert(4, "broken 0.5")  # wrong dimension
    path = write_vectors(tmp_path, "\n".join(lines) + "\n")
    result = load_embeddings(path, expected_dim=2)
    assert len(result.vocabulary) == 10  # unk + 9 valid
    assert result.skipped_lines == 1


def test_unparseable_floats_skipped(tmp_path):
    path = write_vectors(tmp_path, "ok 0.1 0.2\nbad x y\n")
    result = load_embeddings(path, expected_dim=2)
    assert len(result.vocabulary) == 2
    assert result.skipped_lines == 1


def test_duplicate_tokens_keep_first(tmp_path):
    path = write_vectors(tmp_path, "dog 1 1\ndog 9 9\n")
    result = load_embeddings(path, expected_dim=2)
    assert np.allclose(result.embedding.matrix.values[result.vocabulary.lookup("dog")], [1, 1])


def test_empty_file_is_fatal(tmp_path):
    path = write_vectors(tmp_path, "")
    with pytest.raises(DataError):
        load_embeddings(path, expected_dim=2)


def test_missing_file_is_fatal(tmp_path):
    with pytest.raises(DataError):
        load_embeddings(tmp_path / "nope.txt", expected_dim=2)


@pytest.mark.parametrize(
    "text,expected",
    [
        ("To watch a film.", ["to", "watch", "a", "film", "."]),
        ("don't stop", ["don't", "stop"]),
        ("  ", []),
        ('"hello!"', ['"', "hello", "!", '"']),
        ("...", [".", ".", "."]),
        ("A man, a plan", ["a", "man", ",", "a", "plan"]),
    ],
)
def test_tokenize(text, expected):
    assert tokenize(text) == expected


def test_tokenize_never_empty_for_word_input():
    assert tokenize("(x)") == ["(", "x", ")"]


def test_lookup_known_token(tmp_path):
    result = load_embeddings(write_vectors(tmp_path, "the 0.1 0.2\ncat 0.3 0.4\n"), 2)
    with Tape():
        out = lookup(result.embedding, result.vocabulary, ["the"])
    assert out.shape == (1, 2)
    assert np.array_equal(out.values[0], result.embedding.matrix.values[1])


def test_lookup_oov_maps_to_unk(tmp_path):
    result = load_embeddings(write_vectors(tmp_path, "the 0.1 0.2\n"), 2)
    with Tape():
        out = lookup(result.embedding, result.vocabulary, ["zzzunseen"])
    assert np.array_equal(out.values[0], result.embedding.matrix.values[UNK_INDEX])


def test_lookup_preserves_order(tmp_path):
    result = load_embeddings(write_vectors(tmp_path, "the 0.1 0.2\ncat 0.3 0.4\n"), 2)
    with Tape():
        out = lookup(result.embedding, result.vocabulary, ["the", "cat"])
    assert np.array_equal(out.values,
                          result.embedding.matrix.values[[1, 2]])


def test_lookup_empty_sentence_errors(tmp_path):
    result = load_embeddings(write_vectors(tmp_path, "the 0.1 0.2\n"), 2)
    with pytest.raises(DataError):
        with Tape():
            lookup(result.embedding, result.vocabulary, [])


def test_gradients_reach_trainable_matrix(tmp_path):
    result = load_embeddings(write_vectors(tmp_path, "the 0.1 0.2\ncat 0.3 0.4\n"), 2)
    matrix = result.embedding.matrix
    matrix.trainable = True
    with Tape() as tape:
        rows = lookup(result.embedding, result.vocabulary, ["cat", "cat"])
        flat = matmul(rows, np.ones(2))
        loss = matmul(flat, flat)
    backward(tape, loss)
    cat_row = result.vocabulary.lookup("cat")
    assert matrix.grad is not None
    assert np.any(matrix.grad[cat_row] != 0)
    assert np.all(matrix.grad[UNK_INDEX] == 0)


def test_frozen_matrix_receives_no_gradient(tmp_path):
    result = load_embeddings(write_vectors(tmp_path, "the 0.1 0.2\n"), 2)
    with Tape() as tape:
        rows = lookup(result.embedding, result.vocabulary, ["the"])
        flat = matmul(rows, np.ones(2))
        loss = matmul(flat, flat)
    backward(tape, loss)
    assert result.embedding.matrix.grad is None


def test_lookup_of_tokenize_is_deterministic(tmp_path):
    result = load_embeddings(write_vectors(tmp_path, "the 0.1 0.2\ncat 0.3 0.4\n"), 2)
    text = "The cat, the CAT."
    with Tape():
        a = lookup(result.embedding, result.vocabulary, tokenize(text)).values
    with Tape():
        b = lookup(result.embedding, result.vocabulary, tokenize(text)).values
    assert np.array_equal(a, b)
