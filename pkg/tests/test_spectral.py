import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import sparse

from honem.neighborhood import NeighborhoodMatrix, build_neighborhood
from honem.ruleminer import extract_rules
from honem.spectral import (
    EmbeddingFormatError,
    embed,
    format_embedding,
    parse_embedding,
    truncated_svd,
)
from oracles import jacobi_svd


def random_sparse(n, density, seed):
    rng = np.random.default_rng(seed)
    return sparse.random(n, n, density=density, random_state=rng, format="csr")


def test_diag_rank_one():
    trip = truncated_svd(np.diag([3.0, 2.0]), 1)
    assert trip.sigma == pytest.approx([3.0], abs=1e-14)
    assert np.abs(trip.left[:, 0]) == pytest.approx([1, 0], abs=1e-12)
    assert np.abs(trip.right[:, 0]) == pytest.approx([1, 0], abs=1e-12)


def test_zero_matrix():
    trip = truncated_svd(np.zeros((3, 3)), 1)
    assert trip.sigma[0] == 0.0


def test_embed_diag_examples():
    e = embed(np.array([[4.0]]), 1)
    assert e.content[0, 0] == pytest.approx(2.0, abs=1e-14)
    assert e.context[0, 0] == pytest.approx(2.0, abs=1e-14)
    e = embed(np.diag([3.0, 2.0]), 2)
    assert e.content == pytest.approx(np.diag([np.sqrt(3), np.sqrt(2)]), abs=1e-12)


def test_sign_convention():
    e = embed(-np.diag([3.0, 2.0]), 2)
    assert (e.content.max(axis=0) > 0).all()
    assert e.context == pytest.approx(-np.diag([np.sqrt(3), np.sqrt(2)]), abs=1e-12)


def test_against_jacobi_oracle():
    A = random_sparse(50, 0.1, 3)
    _, ref, _ = jacobi_svd(A.toarray())
    trip = truncated_svd(A, 5, seed=1)
    assert trip.sigma == pytest.approx(ref[:5], abs=1e-8)


def test_orthonormal_columns():
    trip = truncated_svd(random_sparse(40, 0.2, 0), 6, seed=2)
    assert trip.left.T @ trip.left == pytest.approx(np.eye(6), abs=1e-8)
    assert trip.right.T @ trip.right == pytest.approx(np.eye(6), abs=1e-8)
    assert (np.diff(trip.sigma) <= 0).all()


def test_toy_full_rank_reconstruction(toy_corpus):
    S = build_neighborhood(extract_rules(toy_corpus, 1, threshold_scale=0.25))
    dense = S.entries.toarray()
    _, ref, _ = jacobi_svd(dense)
    e = embed(S, 5, seed=0)
    assert np.linalg.norm(e.content @ e.context.T - dense) <= 1e-8
    assert e.sigma == pytest.approx(ref, abs=1e-8)
    assert e.tokens == ("A", "C", "D", "E", "B")


def test_seed_determinism():
    A = random_sparse(30, 0.2, 5)
    a, b = embed(A, 4, seed=9), embed(A, 4, seed=9)
    assert np.array_equal(a.content, b.content)
    assert np.array_equal(a.context, b.context)


def test_scale_equivariance():
    A = random_sparse(30, 0.2, 7)
    base = embed(A, 4, seed=1)
    for c in (0.1, 10.0):
        scaled = embed(A * c, 4, seed=1)
        assert scaled.content == pytest.approx(np.sqrt(c) * base.content, abs=1e-10 * np.sqrt(c))


def test_monotone_residual():
    A = random_sparse(25, 0.3, 11).toarray()
    residuals = []
    for d in range(1, 11):
        t = truncated_svd(A, d, seed=0)
        residuals.append(np.linalg.norm(A - (t.left * t.sigma) @ t.right.T))
    assert all(b <= a + 1e-10 for a, b in zip(residuals, residuals[1:]))


def test_errors():
    with pytest.raises(ValueError):
        truncated_svd(np.eye(3), 0)
    with pytest.raises(ValueError):
        truncated_svd(np.eye(3), 4)
    with pytest.raises(ValueError, match="non-finite"):
        truncated_svd(np.array([[np.nan, 0], [0, 1]]), 1)
    with pytest.raises(ValueError, match="non-finite"):
        truncated_svd(sparse.csr_matrix(np.array([[np.inf, 0], [0, 1]])), 1)


def test_accepts_neighborhood_matrix():
    S = NeighborhoodMatrix(sparse.csr_matrix(np.diag([5.0, 1.0])), 1)
    assert truncated_svd(S, 1).sigma[0] == pytest.approx(5.0)


def test_embedding_file_round_trip(toy_corpus):
    S = build_neighborhood(extract_rules(toy_corpus, 1))
    e = embed(S, 3, seed=4)
    text = format_embedding(e)
    assert text.startswith("#honem-embedding 5 3 4\nA\t")
    again = parse_embedding(text)
    assert np.array_equal(again.content, e.content)
    assert np.array_equal(again.context, e.context)
    assert again.tokens == e.tokens
    assert format_embedding(again) == text


def test_embedding_file_errors():
    with pytest.raises(EmbeddingFormatError, match="line 1"):
        parse_embedding("garbage\n")
    with pytest.raises(EmbeddingFormatError, match="line 2"):
        parse_embedding("#honem-embedding 1 2 0\nA\t1\t2\n")


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 12), st.integers(0, 10_000))
def test_factorization_identity(n, seed):
    A = np.random.default_rng(seed).standard_normal((n, n))
    e = embed(A, n, seed=seed)
    assert np.linalg.norm(e.content @ e.context.T - A) <= 1e-8 * max(1.0, np.linalg.norm(A))
