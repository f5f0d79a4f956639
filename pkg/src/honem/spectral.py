"""Truncated SVD by randomized subspace iteration, and the resulting embeddings."""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass
from typing import TextIO

import numpy as np
from scipy import sparse

from .neighborhood import NeighborhoodMatrix


class EmbeddingFormatError(ValueError):
    pass


@dataclass(frozen=True)
class SingularTriplets:
    sigma: np.ndarray
    left: np.ndarray
    right: np.ndarray
    n_iter: int = 0

    @property
    def d(self) -> int:
        return len(self.sigma)


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Content (``left * sqrt(sigma)``) and context (``right * sqrt(sigma)``) vectors, one row per node."""

    content: np.ndarray
    context: np.ndarray
    seed: int
    sigma: np.ndarray | None = None
    tokens: tuple[str, ...] | None = None

    @property
    def dim(self) -> int:
        return self.content.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.content.shape[0]

    def scaled(self, c: float) -> "EmbeddingMatrix":
        r = np.sqrt(c)
        sigma = None if self.sigma is None else self.sigma * c
        return EmbeddingMatrix(self.content * r, self.context * r, self.seed, sigma, self.tokens)


def _as_operator(S):
    if isinstance(S, NeighborhoodMatrix):
        S = S.entries
    if sparse.issparse(S):
        A = sparse.csr_matrix(S, dtype=float)
        finite = np.all(np.isfinite(A.data))
    else:
        A = np.asarray(S, dtype=float)
        finite = np.all(np.isfinite(A))
    if A.ndim != 2:
        raise ValueError("matrix must be two-dimensional")
    if not finite:
        raise ValueError("matrix has non-finite entries")
    return A


def _orth(Y: np.ndarray) -> np.ndarray:
    Q, _ = np.linalg.qr(Y, mode="reduced")
    return Q


def truncated_svd(
    S,
    d: int,
    seed: int = 0,
    oversample: int = 10,
    power_iters: int = 4,
    tol: float = 1e-12,
    max_iter: int = 1000,
) -> SingularTriplets:
    """Top-``d`` singular triplets of ``S`` by randomized subspace iteration.

    A Gaussian sketch of ``d + oversample`` columns is refined by
    ``power_iters`` rounds of re-orthonormalized power iteration. Iteration
    then continues until every returned pair satisfies
    ``||S v_i - sigma_i u_i|| <= tol * sigma_1``, or ``max_iter`` rounds
    have run. Identical inputs and seed give bit-identical output.
    """
    A = _as_operator(S)
    n, m = A.shape
    if not 1 <= d <= min(n, m):
        raise ValueError(f"dimension d={d} must lie in [1, {min(n, m)}]")
    if oversample < 0 or power_iters < 0:
        raise ValueError("oversample and power_iters must be non-negative")

    width = min(d + oversample, n, m)
    rng = np.random.default_rng(seed)
    Q = _orth(A @ rng.standard_normal((m, width)))

    it = 0
    while True:
        if it >= power_iters:
            B = np.asarray(Q.T @ A) if not sparse.issparse(A) else np.asarray((A.T @ Q).T)
            Ub, s, Vt = np.linalg.svd(B, full_matrices=False)
            U = Q @ Ub[:, :d]
            V = Vt[:d].T
            resid = np.linalg.norm(np.asarray(A @ V) - U * s[:d], axis=0)
            if resid.max(initial=0.0) <= tol * s[0] or it >= max_iter:
                if it >= max_iter and resid.max(initial=0.0) > tol * s[0]:
                    warnings.warn(
                        f"truncated_svd did not converge in {max_iter} iterations "
                        f"(residual {resid.max():.3e})",
                        RuntimeWarning,
                        stacklevel=2,
                    )
                break
        Z = _orth(np.asarray(A.T @ Q))
        Q = _orth(np.asarray(A @ Z))
        it += 1

    return SingularTriplets(s[:d].copy(), U, V, it)


def _fix_signs(left: np.ndarray, right: np.ndarray) -> None:
    # Pivot is the first entry within 1e-9 of the column's max magnitude, so
    # near-equal entries do not flip the choice under rounding.
    for c in range(left.shape[1]):
        mag = np.abs(left[:, c])
        top = mag.max(initial=0.0)
        if top == 0:
            continue
        pivot = int(np.argmax(mag >= top * (1 - 1e-9)))
        if left[pivot, c] < 0:
            left[:, c] *= -1
            right[:, c] *= -1


def embed(
    S,
    d: int,
    seed: int = 0,
    oversample: int = 10,
    power_iters: int = 4,
    tol: float = 1e-12,
) -> EmbeddingMatrix:
    """Content and context embeddings from the top-``d`` SVD of ``S``.

    Signs are fixed so that the largest-magnitude entry of every left
    singular vector is positive.
    """
    trip = truncated_svd(S, d, seed, oversample=oversample, power_iters=power_iters, tol=tol)
    left, right = trip.left.copy(), trip.right.copy()
    _fix_signs(left, right)
    root = np.sqrt(trip.sigma)
    tokens = S.tokens if isinstance(S, NeighborhoodMatrix) else None
    return EmbeddingMatrix(left * root, right * root, seed, trip.sigma, tokens)


def format_embedding(emb: EmbeddingMatrix) -> str:
    tokens = emb.tokens or tuple(str(i) for i in range(emb.n_nodes))
    out = [f"#honem-embedding {emb.n_nodes} {emb.dim} {emb.seed}\n"]
    for tok, u, v in zip(tokens, emb.content, emb.context):
        vals = "\t".join(f"{x:.17g}" for x in np.concatenate([u, v]) + 0.0)
        out.append(f"{tok}\t{vals}\n")
    return "".join(out)


def parse_embedding(text: str | TextIO) -> EmbeddingMatrix:
    stream = io.StringIO(text) if isinstance(text, str) else text
    header = stream.readline().split()
    if len(header) != 4 or header[0] != "#honem-embedding":
        raise EmbeddingFormatError("line 1: expected header '#honem-embedding N_F d seed'")
    n, d, seed = int(header[1]), int(header[2]), int(header[3])
    tokens, rows = [], []
    for lineno, line in enumerate(stream, start=2):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 1 + 2 * d:
            raise EmbeddingFormatError(f"line {lineno}: expected token and {2 * d} values")
        tokens.append(parts[0])
        rows.append([float(x) for x in parts[1:]])
    if len(rows) != n:
        raise EmbeddingFormatError(f"header declares {n} nodes, found {len(rows)}")
    arr = np.array(rows, dtype=float).reshape(n, 2 * d)
    return EmbeddingMatrix(arr[:, :d].copy(), arr[:, d:].copy(), seed, None, tuple(tokens))
