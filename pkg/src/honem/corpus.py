"""Trajectory corpus parsing and the first-order network."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np
from scipy import sparse

DEFAULT_MAX_LINE_LENGTH = 10_000_000


class CorpusFormatError(ValueError):
    """Raised when a corpus or FON file violates its line format."""


@dataclass(frozen=True)
class Vocabulary:
    """Bijection between entity tokens and dense integer ids."""

    id_to_token: tuple[str, ...] = ()
    token_to_id: dict[str, int] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not self.token_to_id and self.id_to_token:
            object.__setattr__(
                self, "token_to_id", {t: i for i, t in enumerate(self.id_to_token)}
            )
        if len(self.token_to_id) != len(self.id_to_token):
            raise ValueError("vocabulary tokens must be unique")

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __getitem__(self, token: str) -> int:
        return self.token_to_id[token]

    def token(self, idx: int) -> str:
        return self.id_to_token[idx]


@dataclass(frozen=True)
class SequenceCorpus:
    """Integer-encoded trajectories plus the vocabulary that encodes them."""

    sequences: tuple[tuple[int, ...], ...]
    vocabulary: Vocabulary

    def __post_init__(self):
        n = len(self.vocabulary)
        for seq in self.sequences:
            for e in seq:
                if not 0 <= e < n:
                    raise ValueError(f"entity id {e} outside vocabulary of size {n}")

    @property
    def n_nodes(self) -> int:
        return len(self.vocabulary)

    @property
    def transition_free(self) -> list[int]:
        """Indices of sequences too short to contribute a transition."""
        return [i for i, s in enumerate(self.sequences) if len(s) < 2]

    @property
    def n_transitions(self) -> int:
        return sum(max(len(s) - 1, 0) for s in self.sequences)

    @classmethod
    def from_tokens(cls, sequences: Iterable[Iterable[str]]) -> "SequenceCorpus":
        """Encode token sequences, assigning ids in first-appearance order."""
        token_to_id: dict[str, int] = {}
        encoded = []
        for seq in sequences:
            row = []
            for tok in seq:
                idx = token_to_id.setdefault(tok, len(token_to_id))
                row.append(idx)
            encoded.append(tuple(row))
        vocab = Vocabulary(tuple(token_to_id), token_to_id)
        return cls(tuple(encoded), vocab)

    def decode(self, idx: int) -> tuple[str, ...]:
        return tuple(self.vocabulary.token(e) for e in self.sequences[idx])


@dataclass(frozen=True)
class FirstOrderNetwork:
    """Raw consecutive-pair counts between entities."""

    adjacency: sparse.csr_matrix

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        return int(self.adjacency.nnz)

    def edges(self, include_self_loops: bool = True) -> list[tuple[int, int]]:
        """Edge list sorted by (source, target)."""
        coo = self.adjacency.tocoo()
        pairs = sorted(zip(coo.row.tolist(), coo.col.tolist()))
        if not include_self_loops:
            pairs = [(i, j) for i, j in pairs if i != j]
        return pairs


def parse_corpus(
    text: str | TextIO,
    max_line_length: int = DEFAULT_MAX_LINE_LENGTH,
    min_length: int | None = None,
) -> SequenceCorpus:
    """Parse a line-oriented corpus, one whitespace-separated trajectory per line.

    Blank lines are skipped. ``min_length`` optionally drops trajectories with
    fewer tokens; by default every non-empty line is kept, including
    single-token lines that contribute no transitions.
    """
    stream = io.StringIO(text) if isinstance(text, str) else text
    sequences = []
    for lineno, line in enumerate(stream, start=1):
        if len(line) > max_line_length:
            raise CorpusFormatError(
                f"line {lineno}: length {len(line)} exceeds bound {max_line_length}"
            )
        tokens = line.split()
        if not tokens:
            continue
        if min_length is not None and len(tokens) < min_length:
            continue
        sequences.append(tokens)
    return SequenceCorpus.from_tokens(sequences)


def read_corpus(path, **kwargs) -> SequenceCorpus:
    with open(path, encoding="utf-8") as fh:
        return parse_corpus(fh, **kwargs)


def format_corpus(corpus: SequenceCorpus) -> str:
    """Serialize a corpus so that :func:`parse_corpus` reproduces it.

    Vocabulary order is preserved only if every token appears somewhere in
    the sequences, which holds for any corpus built by ``parse_corpus``.
    """
    lines = [" ".join(corpus.decode(i)) for i in range(len(corpus.sequences))]
    return "".join(line + "\n" for line in lines)


def build_fon(corpus: SequenceCorpus) -> FirstOrderNetwork:
    """Count consecutive pairs over all trajectories; self-loops are kept."""
    n = corpus.n_nodes
    src, dst = [], []
    for seq in corpus.sequences:
        src.extend(seq[:-1])
        dst.extend(seq[1:])
    data = np.ones(len(src), dtype=np.int64)
    adj = sparse.coo_matrix(
        (data, (np.asarray(src, dtype=np.int64), np.asarray(dst, dtype=np.int64))),
        shape=(n, n),
    ).tocsr()
    adj.sum_duplicates()
    adj.sort_indices()
    return FirstOrderNetwork(adj)


def format_fon(fon: FirstOrderNetwork) -> str:
    out = [f"%fon {fon.n_nodes} {fon.n_edges}\n"]
    coo = fon.adjacency.tocoo()
    for i, j, c in sorted(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist())):
        out.append(f"{i} {j} {int(c)}\n")
    return "".join(out)


def parse_fon(text: str | TextIO) -> FirstOrderNetwork:
    stream = io.StringIO(text) if isinstance(text, str) else text
    header = stream.readline().split()
    if len(header) != 3 or header[0] != "%fon":
        raise CorpusFormatError("line 1: expected header '%fon N_F E_F'")
    n, n_edges = int(header[1]), int(header[2])
    rows, cols, vals = [], [], []
    for lineno, line in enumerate(stream, start=2):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 3:
            raise CorpusFormatError(f"line {lineno}: expected 'i j count'")
        i, j, c = int(parts[0]), int(parts[1]), int(parts[2])
        if not (0 <= i < n and 0 <= j < n):
            raise CorpusFormatError(f"line {lineno}: index outside 0..{n - 1}")
        rows.append(i)
        cols.append(j)
        vals.append(c)
    if len(rows) != n_edges:
        raise CorpusFormatError(f"header declares {n_edges} edges, found {len(rows)}")
    adj = sparse.csr_matrix(
        (np.asarray(vals, dtype=np.int64), (rows, cols)), shape=(n, n)
    )
    adj.sort_indices()
    return FirstOrderNetwork(adj)
