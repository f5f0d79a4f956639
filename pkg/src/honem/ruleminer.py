"""Variable-order dependency rule extraction.

Rules are grown context by context: every first-order context is kept, and a
context is extended one step further into the past only when the extended
next-step distribution diverges from its parent's by more than the dynamic
threshold ``k_new / log2(1 + support)``. An accepted extension keeps all of
its lower-order ancestors, so a rule of order k always comes with rules for
each of its truncated contexts.
"""

from __future__ import annotations

import io
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Mapping, TextIO

from .corpus import SequenceCorpus, Vocabulary

Context = tuple[int, ...]


class RuleFormatError(ValueError):
    pass


@dataclass(frozen=True)
class NextStepDistribution:
    """Raw next-step counts for one context, with derived probabilities."""

    counts: Mapping[int, int]

    @property
    def support(self) -> int:
        return sum(self.counts.values())

    @property
    def probs(self) -> dict[int, float]:
        total = self.support
        return {t: c / total for t, c in sorted(self.counts.items())}


@dataclass(frozen=True, order=True)
class Rule:
    order: int
    context: Context
    target: int
    probability: float
    support: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.order != len(self.context) or self.order < 1:
            raise ValueError(f"rule order {self.order} does not match context {self.context}")
        if not 0.0 < self.probability <= 1.0:
            raise ValueError(f"rule probability {self.probability} outside (0, 1]")


@dataclass(frozen=True)
class RuleSet:
    """Immutable collection of rules sorted by (order, context, target)."""

    rules: tuple[Rule, ...]
    vocabulary: Vocabulary | None = None

    @property
    def max_order(self) -> int:
        return max((r.order for r in self.rules), default=0)

    @property
    def counts_per_order(self) -> dict[int, int]:
        return dict(sorted(Counter(r.order for r in self.rules).items()))

    def __len__(self) -> int:
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)

    def contexts(self) -> dict[Context, dict[int, float]]:
        out: dict[Context, dict[int, float]] = {}
        for r in self.rules:
            out.setdefault(r.context, {})[r.target] = r.probability
        return out

    def of_order(self, k: int) -> list[Rule]:
        return [r for r in self.rules if r.order == k]


def _occurrences(corpus: SequenceCorpus, k: int) -> dict[Context, list[tuple[int, int]]]:
    """Map each length-k window that has a successor to its (seq, end) positions."""
    occ: dict[Context, list[tuple[int, int]]] = defaultdict(list)
    for s, seq in enumerate(corpus.sequences):
        for t in range(k - 1, len(seq) - 1):
            occ[tuple(seq[t - k + 1 : t + 1])].append((s, t))
    return occ


def _distribution(sequences, positions) -> NextStepDistribution:
    return NextStepDistribution(Counter(sequences[s][t + 1] for s, t in positions))


def count_paths(corpus: SequenceCorpus, order: int) -> dict[Context, NextStepDistribution]:
    """Next-step distributions for every observed context of length ``order``."""
    if order < 1:
        raise ValueError("order must be >= 1")
    occ = _occurrences(corpus, order)
    seqs = corpus.sequences
    return {ctx: _distribution(seqs, occ[ctx]) for ctx in sorted(occ)}


def _as_probs(d) -> Mapping[int, float]:
    return d.probs if isinstance(d, NextStepDistribution) else d


def kl_divergence(d_ext, d) -> float:
    """KL divergence D(d_ext || d) in bits.

    Both arguments may be :class:`NextStepDistribution` instances or plain
    ``target -> probability`` mappings. Every target of ``d_ext`` must have
    positive probability under ``d``.
    """
    p_ext, p = _as_probs(d_ext), _as_probs(d)
    total = 0.0
    for x, px in p_ext.items():
        if px <= 0:
            continue
        qx = p.get(x, 0.0)
        if qx <= 0:
            raise ValueError(f"target {x!r} of the extended distribution is absent from the base")
        total += px * math.log2(px / qx)
    return max(total, 0.0)


def dynamic_threshold(k_new: int, support_new: int) -> float:
    """Divergence an order-``k_new`` extension must exceed to be accepted."""
    if support_new < 1:
        raise ValueError("support must be >= 1")
    return k_new / math.log2(1 + support_new)


def extract_rules(
    corpus: SequenceCorpus,
    min_support: int = 1,
    threshold_scale: float = 1.0,
    max_order: int | None = None,
) -> RuleSet:
    """Mine variable-order rules, retaining all lower orders.

    Parameters
    ----------
    corpus : SequenceCorpus
    min_support : int
        Contexts observed fewer times are neither emitted (beyond first
        order) nor extended.
    threshold_scale : float
        Multiplier on the dynamic threshold. 1.0 applies the formula as is.
    max_order : int, optional
        Safety cap on the order. ``None`` lets growth stop on its own.
    """
    if min_support < 1:
        raise ValueError("min_support must be >= 1")
    if threshold_scale < 0:
        raise ValueError("threshold_scale must be >= 0")
    if max_order is not None and max_order < 1:
        raise ValueError("max_order must be >= 1")

    seqs = corpus.sequences
    rules: list[Rule] = []

    def emit(ctx: Context, dist: NextStepDistribution) -> None:
        support = dist.support
        for target, p in dist.probs.items():
            rules.append(Rule(len(ctx), ctx, target, p, support))

    first = _occurrences(corpus, 1)
    stack = []
    for ctx in sorted(first, reverse=True):
        dist = _distribution(seqs, first[ctx])
        emit(ctx, dist)
        stack.append((ctx, first[ctx], dist))

    while stack:
        ctx, positions, dist = stack.pop()
        k = len(ctx)
        if dist.support < min_support or (max_order is not None and k >= max_order):
            continue
        grouped: dict[int, list[tuple[int, int]]] = defaultdict(list)
        for s, t in positions:
            if t - k >= 0:
                grouped[seqs[s][t - k]].append((s, t))
        accepted = []
        for prev in sorted(grouped):
            ext_positions = grouped[prev]
            ext_dist = _distribution(seqs, ext_positions)
            support = ext_dist.support
            if support < min_support:
                continue
            delta = threshold_scale * dynamic_threshold(k + 1, support)
            if kl_divergence(ext_dist, dist) > delta:
                ext_ctx = (prev,) + ctx
                emit(ext_ctx, ext_dist)
                accepted.append((ext_ctx, ext_positions, ext_dist))
        stack.extend(reversed(accepted))

    return RuleSet(tuple(sorted(rules)), corpus.vocabulary)


def format_rules(rules: RuleSet) -> str:
    """TSV serialization: order, context (oldest first, '|'-joined), target, probability."""
    vocab = rules.vocabulary
    if vocab is None:
        n = max((max(r.context + (r.target,)) for r in rules), default=-1) + 1
        vocab = Vocabulary(tuple(str(i) for i in range(n)))
    for tok in vocab.id_to_token:
        if "|" in tok:
            raise RuleFormatError(f"token {tok!r} contains the context separator '|'")
    out = [
        "# honem rules\n",
        "# vocabulary: " + " ".join(vocab.id_to_token) + "\n",
        "# order\tcontext\ttarget\tprobability\n",
    ]
    for r in rules:
        ctx = "|".join(vocab.token(e) for e in r.context)
        out.append(f"{r.order}\t{ctx}\t{vocab.token(r.target)}\t{r.probability:.17g}\n")
    return "".join(out)


def parse_rules(text: str | TextIO) -> RuleSet:
    stream = io.StringIO(text) if isinstance(text, str) else text
    vocab: Vocabulary | None = None
    rules = []
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\n")
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("vocabulary:"):
                vocab = Vocabulary(tuple(body[len("vocabulary:"):].split()))
            continue
        if not line.strip():
            continue
        if vocab is None:
            raise RuleFormatError(f"line {lineno}: rule before '# vocabulary:' header")
        parts = line.split("\t")
        if len(parts) != 4:
            raise RuleFormatError(f"line {lineno}: expected 4 tab-separated fields")
        try:
            order = int(parts[0])
            ctx = tuple(vocab[t] for t in parts[1].split("|"))
            target = vocab[parts[2]]
            rules.append(Rule(order, ctx, target, float(parts[3])))
        except (KeyError, ValueError) as exc:
            raise RuleFormatError(f"line {lineno}: {exc}") from None
    return RuleSet(tuple(sorted(rules)), vocab)
