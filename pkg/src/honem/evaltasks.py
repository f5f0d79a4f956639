"""Network reconstruction, link prediction and node classification on embeddings."""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np
from scipy import sparse
from scipy.special import expit
from scipy.stats import rankdata

from .corpus import FirstOrderNetwork
from .neighborhood import NeighborhoodMatrix
from .spectral import EmbeddingMatrix, embed

MAX_ALL_PAIRS_NODES = 10_000

# Scores closer than this fraction of the largest |score| rank as ties, which
# are then broken by (i, j). Keeps rankings stable under rescaling of S.
RANK_RESOLUTION = 1e-9

Edge = tuple[int, int]


@dataclass(frozen=True)
class PairScoreList:
    """Scored (i, j) pairs in rank order: score descending, then i, then j."""

    rows: np.ndarray
    cols: np.ndarray
    scores: np.ndarray

    def __len__(self) -> int:
        return len(self.scores)

    def pairs(self, k: int | None = None) -> list[Edge]:
        k = len(self) if k is None else k
        return list(zip(self.rows[:k].tolist(), self.cols[:k].tolist()))

    def for_node(self, i: int) -> "PairScoreList":
        keep = self.rows == i
        return PairScoreList(self.rows[keep], self.cols[keep], self.scores[keep])

    def hits(self, truth: Iterable[Edge]) -> np.ndarray:
        truth = set(truth)
        return np.fromiter(
            ((i, j) in truth for i, j in zip(self.rows.tolist(), self.cols.tolist())),
            dtype=bool,
            count=len(self),
        )


def rank_pairs(rows, cols, scores) -> PairScoreList:
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    scores = np.asarray(scores, dtype=float)
    top = np.abs(scores).max(initial=0.0)
    key = np.round(scores / top / RANK_RESOLUTION) if top > 0 else np.zeros_like(scores)
    order = np.lexsort((cols, rows, -key))
    return PairScoreList(rows[order], cols[order], scores[order])


def all_pairs(n_nodes: int, exclude: Iterable[Edge] = ()) -> tuple[np.ndarray, np.ndarray]:
    """Every ordered pair i != j, minus ``exclude``."""
    rows, cols = np.divmod(np.arange(n_nodes * n_nodes, dtype=np.int64), n_nodes)
    keep = rows != cols
    exclude = list(exclude)
    if exclude:
        ex = np.asarray(exclude, dtype=np.int64)
        keep[ex[:, 0] * n_nodes + ex[:, 1]] = False
    return rows[keep], cols[keep]


def score_pairs(emb: EmbeddingMatrix, candidate_pairs: Iterable[Edge] | None = None) -> PairScoreList:
    """Score pairs by the bilinear reconstruction ``content_i . context_j``.

    Without ``candidate_pairs`` every ordered pair i != j is scored, which is
    limited to graphs of at most ``MAX_ALL_PAIRS_NODES`` nodes.
    """
    U, V = emb.content, emb.context
    if not (np.all(np.isfinite(U)) and np.all(np.isfinite(V))):
        raise ValueError("embeddings contain non-finite values")
    n = emb.n_nodes
    if candidate_pairs is None:
        if n > MAX_ALL_PAIRS_NODES:
            raise ValueError(
                f"{n} nodes exceeds the all-pairs limit {MAX_ALL_PAIRS_NODES}; pass candidate pairs"
            )
        rows, cols = all_pairs(n)
        scores = (U @ V.T)[rows, cols]
    else:
        if isinstance(candidate_pairs, tuple) and len(candidate_pairs) == 2 and isinstance(
            candidate_pairs[0], np.ndarray
        ):
            rows, cols = candidate_pairs
        else:
            arr = np.asarray(list(candidate_pairs), dtype=np.int64).reshape(-1, 2)
            rows, cols = arr[:, 0], arr[:, 1]
        if len(rows) and (rows.min() < 0 or cols.min() < 0 or max(rows.max(), cols.max()) >= n):
            raise ValueError(f"candidate pair references a node outside 0..{n - 1}")
        scores = np.einsum("ij,ij->i", U[rows], V[cols])
    return rank_pairs(rows, cols, scores)


def precision_at_k(scores: PairScoreList, truth: Iterable[Edge], k: int) -> float:
    """Fraction of the top-``k`` pairs found in ``truth``."""
    if not 1 <= k <= len(scores):
        raise ValueError(f"k={k} outside [1, {len(scores)}]")
    truth = set(truth)
    return sum(p in truth for p in scores.pairs(k)) / k


def _ap_from_hits(hits: np.ndarray) -> float:
    n_hits = int(hits.sum())
    if n_hits == 0:
        return 0.0
    ranks = np.flatnonzero(hits) + 1
    return float(np.mean(np.arange(1, n_hits + 1) / ranks))


def average_precision(scores: PairScoreList, truth: Iterable[Edge]) -> float:
    """Mean of Precision@k over the ranks k that hold a truth edge.

    ``scores`` is one node's ranked candidate list and ``truth`` that node's
    true edges. Truth edges never ranked contribute nothing, so a node whose
    truth edges are all missing from the list scores 0.
    """
    truth = set(truth)
    if not truth:
        raise ValueError("average precision is undefined without truth edges")
    return _ap_from_hits(scores.hits(truth))


def per_node_ap(scores: PairScoreList, truth: Iterable[Edge]) -> dict[int, float]:
    """AP for every source node with at least one truth edge."""
    truth = set(truth)
    hits = scores.hits(truth)
    sources = sorted({i for i, _ in truth})
    return {i: _ap_from_hits(hits[scores.rows == i]) for i in sources}


def map_score(
    aps: Mapping[int, float] | Sequence[float],
    denominator: str = "defined",
    n_nodes: int | None = None,
) -> float:
    """Mean average precision.

    ``denominator="defined"`` averages over nodes that have an AP;
    ``"all"`` divides the sum by ``n_nodes``, counting the rest as 0.
    """
    values = list(aps.values()) if isinstance(aps, Mapping) else list(aps)
    if not values:
        raise ValueError("no node has truth edges; MAP is undefined")
    if denominator == "defined":
        return sum(values) / len(values)
    if denominator == "all":
        if n_nodes is None or n_nodes < len(values):
            raise ValueError("denominator='all' needs n_nodes >= number of APs")
        return sum(values) / n_nodes
    raise ValueError(f"unknown denominator {denominator!r}")


def linkpred_split(
    fon: FirstOrderNetwork, fraction: float = 0.2, seed: int = 0
) -> tuple[list[Edge], list[Edge]]:
    """Hold out ``floor(fraction * E)`` uniformly chosen edges (self-loops excluded)."""
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    edges = fon.edges(include_self_loops=False)
    n_hold = math.floor(fraction * len(edges) + 1e-9)
    if n_hold == 0:
        raise ValueError(
            f"fraction {fraction} of {len(edges)} edges leaves an empty holdout set"
        )
    rng = np.random.default_rng(seed)
    held = set(rng.permutation(len(edges))[:n_hold].tolist())
    kept = [e for idx, e in enumerate(edges) if idx not in held]
    heldout = [e for idx, e in enumerate(edges) if idx in held]
    return kept, heldout


def mask_neighborhood(S: NeighborhoodMatrix, heldout: Iterable[Edge]) -> NeighborhoodMatrix:
    """Copy of ``S`` with the held-out entries set to zero."""
    n = S.n_nodes
    heldout = list(heldout)
    coo = S.entries.tocoo()
    keep = np.ones(coo.nnz, dtype=bool)
    if heldout:
        ho = np.asarray(heldout, dtype=np.int64)
        if ho.min() < 0 or ho.max() >= n:
            raise ValueError(f"held-out edge outside 0..{n - 1}")
        drop = set((ho[:, 0] * n + ho[:, 1]).tolist())
        lin = coo.row.astype(np.int64) * n + coo.col
        keep = ~np.isin(lin, list(drop))
    m = sparse.csr_matrix(
        (coo.data[keep], (coo.row[keep], coo.col[keep])), shape=S.entries.shape
    )
    m.sort_indices()
    return NeighborhoodMatrix(m, S.max_order_used, S.normalization, S.tokens)


@dataclass(frozen=True)
class LabelSet:
    labels: Mapping[int, int]
    train: tuple[int, ...]
    test: tuple[int, ...]


def split_labels(labels: Mapping[int, int], seed: int = 0, train_fraction: float = 0.7) -> LabelSet:
    """Stratified seeded split; each class keeps round(train_fraction * size) for training."""
    rng = np.random.default_rng(seed)
    train, test = [], []
    for cls in sorted(set(labels.values())):
        members = np.array(sorted(n for n, y in labels.items() if y == cls), dtype=np.int64)
        members = members[rng.permutation(len(members))]
        cut = int(round(train_fraction * len(members)))
        train.extend(members[:cut].tolist())
        test.extend(members[cut:].tolist())
    return LabelSet(dict(labels), tuple(sorted(train)), tuple(sorted(test)))


@dataclass(frozen=True)
class LogisticModel:
    weights: np.ndarray
    bias: float
    mean: np.ndarray
    scale: np.ndarray

    def decision(self, X: np.ndarray) -> np.ndarray:
        return ((X - self.mean) / self.scale) @ self.weights + self.bias

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return expit(self.decision(X))


def fit_logistic(
    X: np.ndarray,
    y: np.ndarray,
    learning_rate: float = 0.1,
    n_iter: int = 2000,
    l2: float = 1e-4,
) -> LogisticModel:
    """Full-batch gradient descent on standardized features from a zero start."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(np.unique(y)) < 2:
        raise ValueError("training labels contain a single class")
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Z = (X - mean) / scale
    w = np.zeros(Z.shape[1])
    b = 0.0
    n = len(y)
    for _ in range(n_iter):
        p = expit(Z @ w + b)
        err = p - y
        w -= learning_rate * (Z.T @ err / n + l2 * w)
        b -= learning_rate * err.mean()
    return LogisticModel(w, float(b), mean, scale)


def classify_fit(emb: EmbeddingMatrix, labels: LabelSet, **params) -> LogisticModel:
    idx = np.asarray(labels.train, dtype=np.int64)
    y = np.array([labels.labels[i] for i in labels.train])
    return fit_logistic(emb.content[idx], y, **params)


def auroc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Probability that a random positive outscores a random negative; ties count 1/2."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = labels == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC needs both classes present")
    ranks = rankdata(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2
    return float(u / (n_pos * n_neg))


@dataclass
class EvalReport:
    task: str
    metrics: dict[str, float] = field(default_factory=dict)
    params: dict[str, object] = field(default_factory=dict)
    per_node_ap: dict[int, float] = field(default_factory=dict)

    def format(self) -> str:
        out = io.StringIO()
        out.write(f"task\t{self.task}\n")
        for key, value in self.metrics.items():
            out.write(f"{key}\t{value:.17g}\n")
        payload = {"task": self.task, "metrics": self.metrics, "params": self.params}
        out.write(json.dumps(payload, sort_keys=True) + "\n")
        return out.getvalue()


def evaluate_reconstruction(
    emb: EmbeddingMatrix,
    fon: FirstOrderNetwork,
    ks: Sequence[int],
    map_denominator: str = "defined",
) -> EvalReport:
    """Rank all pairs i != j and check them against the first-order edges."""
    if fon.n_nodes != emb.n_nodes:
        raise ValueError(f"FON has {fon.n_nodes} nodes, embedding has {emb.n_nodes}")
    truth = fon.edges(include_self_loops=False)
    scored = score_pairs(emb)
    report = EvalReport("reconstruct", params={"dim": emb.dim, "seed": emb.seed, "k": list(ks)})
    for k in ks:
        report.metrics[f"precision@{k}"] = precision_at_k(scored, truth, k)
    if truth:
        aps = per_node_ap(scored, truth)
        report.per_node_ap = aps
        report.metrics["map"] = map_score(aps, map_denominator, emb.n_nodes)
    return report


def evaluate_link_prediction(
    S: NeighborhoodMatrix,
    fon: FirstOrderNetwork,
    dim: int,
    seed: int = 0,
    fraction: float = 0.2,
    ks: Sequence[int] = (),
    map_denominator: str = "defined",
    **svd_params,
) -> EvalReport:
    """Hold out FON edges, zero them in ``S``, embed, and rank the unseen pairs."""
    if fon.n_nodes != S.n_nodes:
        raise ValueError(f"FON has {fon.n_nodes} nodes, matrix has {S.n_nodes}")
    kept, heldout = linkpred_split(fon, fraction, seed)
    emb = embed(mask_neighborhood(S, heldout), dim, seed, **svd_params)
    scored = score_pairs(emb, all_pairs(S.n_nodes, exclude=kept))
    aps = per_node_ap(scored, heldout)
    report = EvalReport(
        "linkpred",
        params={"dim": dim, "seed": seed, "fraction": fraction, "heldout": len(heldout)},
        per_node_ap=aps,
    )
    report.metrics["map"] = map_score(aps, map_denominator, S.n_nodes)
    for k in ks:
        report.metrics[f"precision@{k}"] = precision_at_k(scored, heldout, k)
    return report


def evaluate_classification(emb: EmbeddingMatrix, labels: LabelSet, **params) -> EvalReport:
    model = classify_fit(emb, labels, **params)
    idx = np.asarray(labels.test, dtype=np.int64)
    y = np.array([labels.labels[i] for i in labels.test])
    # Round so that rescaled embeddings give the same ties.
    p = np.round(model.predict_proba(emb.content[idx]), 10)
    report = EvalReport(
        "classify",
        params={"dim": emb.dim, "seed": emb.seed, "train": len(labels.train), "test": len(labels.test)},
    )
    report.metrics["auroc"] = auroc(p, y)
    return report


def parse_labels(text: str | TextIO, tokens: Sequence[str]) -> dict[int, int]:
    """Read ``token,label`` CSV lines into an id -> {0,1} map."""
    stream = io.StringIO(text) if isinstance(text, str) else text
    index = {t: i for i, t in enumerate(tokens)}
    labels = {}
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'token,label'")
        tok, lab = parts
        if tok not in index:
            if lineno == 1 and lab not in ("0", "1"):
                continue  # header row
            raise ValueError(f"line {lineno}: unknown token {tok!r}")
        if lab not in ("0", "1"):
            raise ValueError(f"line {lineno}: label must be 0 or 1, got {lab!r}")
        labels[index[tok]] = int(lab)
    return labels
