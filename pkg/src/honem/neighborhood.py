"""Per-order distance matrices and the combined higher-order neighborhood matrix."""

from __future__ import annotations

import io
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence, TextIO

import numpy as np
from scipy import sparse

from .ruleminer import RuleSet


class MatrixFormatError(ValueError):
    pass


@dataclass(frozen=True)
class OrderDistanceMatrix:
    order: int
    entries: sparse.csr_matrix


@dataclass(frozen=True)
class NeighborhoodMatrix:
    """Weighted sum of per-order distance matrices.

    ``max_order_used`` is the highest order that contributed a term and
    ``normalization`` the scalar prefactor applied to the sum.
    """

    entries: sparse.csr_matrix
    max_order_used: int
    normalization: float = 1.0
    tokens: tuple[str, ...] | None = None

    @property
    def n_nodes(self) -> int:
        return self.entries.shape[0]

    def scaled(self, c: float) -> "NeighborhoodMatrix":
        return NeighborhoodMatrix(
            (self.entries * c).tocsr(), self.max_order_used, self.normalization * c, self.tokens
        )


def order_matrices(rules: RuleSet, n_nodes: int) -> list[OrderDistanceMatrix]:
    """Average rule probabilities per (oldest context entity, target) for each order.

    A rule ``ctx -> j`` of order v describes the path ``ctx[0] -> ... -> j``,
    so it contributes to ``D^v(ctx[0], j)``. Orders without rules are omitted.
    """
    sums: dict[int, dict[tuple[int, int], list[float]]] = defaultdict(
        lambda: defaultdict(lambda: [0.0, 0])
    )
    for r in rules:
        i, j = r.context[0], r.target
        if i >= n_nodes or j >= n_nodes:
            raise ValueError(f"rule {r} references a node outside 0..{n_nodes - 1}")
        acc = sums[r.order][(i, j)]
        acc[0] += r.probability
        acc[1] += 1
    out = []
    for v in sorted(sums):
        keys = sorted(sums[v])
        rows = np.fromiter((k[0] for k in keys), dtype=np.int64, count=len(keys))
        cols = np.fromiter((k[1] for k in keys), dtype=np.int64, count=len(keys))
        vals = np.array([sums[v][k][0] / sums[v][k][1] for k in keys])
        m = sparse.csr_matrix((vals, (rows, cols)), shape=(n_nodes, n_nodes))
        m.sort_indices()
        out.append(OrderDistanceMatrix(v, m))
    return out


def combine(
    matrices: Sequence[OrderDistanceMatrix],
    normalization: float = 1.0,
    n_nodes: int | None = None,
    max_order: int | None = None,
    tokens: tuple[str, ...] | None = None,
) -> NeighborhoodMatrix:
    """Sum ``exp(-(v - 1)) * D^v`` over the given orders, times ``normalization``.

    ``max_order`` truncates the sum (``max_order=1`` keeps only the
    first-order term). ``n_nodes`` is needed only when ``matrices`` is empty.
    """
    if not normalization > 0 or not math.isfinite(normalization):
        raise ValueError("normalization must be a positive finite number")
    orders = [m.order for m in matrices]
    if len(set(orders)) != len(orders):
        raise ValueError("orders must be distinct")
    shapes = {m.entries.shape for m in matrices}
    if len(shapes) > 1:
        raise ValueError(f"dimension mismatch among order matrices: {sorted(shapes)}")
    if shapes:
        (shape,) = shapes
        if n_nodes is not None and shape != (n_nodes, n_nodes):
            raise ValueError(f"matrices have shape {shape}, expected {n_nodes} nodes")
    elif n_nodes is None:
        raise ValueError("n_nodes is required when no matrices are given")
    else:
        shape = (n_nodes, n_nodes)

    total = sparse.csr_matrix(shape, dtype=float)
    used = 0
    for m in sorted(matrices, key=lambda m: m.order):
        if max_order is not None and m.order > max_order:
            continue
        total = total + math.exp(-(m.order - 1)) * m.entries
        used = m.order
    if normalization != 1.0:
        total = total * normalization
    total = sparse.csr_matrix(total)
    total.eliminate_zeros()
    total.sort_indices()
    return NeighborhoodMatrix(total, used, float(normalization), tokens)


def build_neighborhood(
    rules: RuleSet,
    n_nodes: int | None = None,
    normalization: float = 1.0,
    max_order: int | None = None,
) -> NeighborhoodMatrix:
    """Convenience wrapper: rules straight to the combined matrix."""
    tokens = rules.vocabulary.id_to_token if rules.vocabulary is not None else None
    if n_nodes is None:
        if tokens is None:
            raise ValueError("n_nodes is required for rules without a vocabulary")
        n_nodes = len(tokens)
    mats = order_matrices(rules, n_nodes)
    return combine(mats, normalization, n_nodes=n_nodes, max_order=max_order, tokens=tokens)


def format_matrix(S: NeighborhoodMatrix) -> str:
    coo = S.entries.tocoo()
    triples = sorted(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))
    out = [f"%honem-matrix {S.n_nodes} {len(triples)} {S.max_order_used} {S.normalization!r}\n"]
    if S.tokens is not None:
        out.append("%tokens " + " ".join(S.tokens) + "\n")
    out.extend(f"{i} {j} {v:.17g}\n" for i, j, v in triples)
    return "".join(out)


def parse_matrix(text: str | TextIO) -> NeighborhoodMatrix:
    stream = io.StringIO(text) if isinstance(text, str) else text
    header = stream.readline().split()
    if len(header) != 5 or header[0] != "%honem-matrix":
        raise MatrixFormatError(
            "line 1: expected header '%honem-matrix N_F nnz max_order normalization'"
        )
    n, nnz, max_order = int(header[1]), int(header[2]), int(header[3])
    normalization = float(header[4])
    tokens = None
    rows, cols, vals = [], [], []
    for lineno, line in enumerate(stream, start=2):
        if line.startswith("%"):
            parts = line.split()
            if parts[0] == "%tokens":
                tokens = tuple(parts[1:])
                if len(tokens) != n:
                    raise MatrixFormatError(f"line {lineno}: {len(tokens)} tokens for {n} nodes")
            continue
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 3:
            raise MatrixFormatError(f"line {lineno}: expected 'i j value'")
        i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        if not (0 <= i < n and 0 <= j < n):
            raise MatrixFormatError(f"line {lineno}: index outside 0..{n - 1}")
        rows.append(i)
        cols.append(j)
        vals.append(v)
    if len(rows) != nnz:
        raise MatrixFormatError(f"header declares {nnz} entries, found {len(rows)}")
    m = sparse.csr_matrix((np.asarray(vals, dtype=float), (rows, cols)), shape=(n, n))
    m.sort_indices()
    return NeighborhoodMatrix(m, max_order, normalization, tokens)
