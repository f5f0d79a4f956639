"""Synthetic trajectories with planted variable-order dependencies."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Mapping, TextIO

import numpy as np

from .corpus import SequenceCorpus, Vocabulary
from .ruleminer import RuleSet

STOCHASTIC_TOL = 1e-12


class SpecFormatError(ValueError):
    pass


class DeadEndError(RuntimeError):
    """Sampling reached a state with no outgoing probability."""


@dataclass(frozen=True)
class PlantedRuleSpec:
    """Generator configuration.

    ``base`` is a row-stochastic first-order matrix (rows of zeros are
    dead ends). ``rules`` maps a context (oldest first, length >= 2) to the
    next-step distribution that overrides the base while it matches.
    """

    entities: tuple[str, ...]
    base: np.ndarray
    rules: Mapping[tuple[int, ...], Mapping[int, float]] = field(default_factory=dict)
    n_sequences: int = 100
    length: int = 20
    seed: int = 0
    initial: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.entities)
        base = np.asarray(self.base, dtype=float)
        if base.shape != (n, n):
            raise ValueError(f"base matrix must be {n}x{n}")
        if np.any(base < 0):
            raise ValueError("base matrix has negative entries")
        sums = base.sum(axis=1)
        bad = [i for i, s in enumerate(sums) if s != 0 and abs(s - 1) > STOCHASTIC_TOL]
        if bad:
            raise ValueError(f"base rows {bad} do not sum to 1")
        for ctx, dist in self.rules.items():
            if len(ctx) < 2:
                raise ValueError(f"planted context {ctx} must have order >= 2")
            if any(not 0 <= e < n for e in ctx) or any(not 0 <= e < n for e in dist):
                raise ValueError(f"planted rule {ctx} references unknown entities")
            if any(p < 0 for p in dist.values()) or abs(sum(dist.values()) - 1) > STOCHASTIC_TOL:
                raise ValueError(f"planted distribution for {ctx} does not sum to 1")
        if self.n_sequences < 0 or self.length < 1:
            raise ValueError("n_sequences must be >= 0 and length >= 1")
        object.__setattr__(self, "base", base)

    @property
    def vocabulary(self) -> Vocabulary:
        return Vocabulary(tuple(self.entities))


def generate(spec: PlantedRuleSpec) -> SequenceCorpus:
    """Sample ``n_sequences`` trajectories of ``length`` steps.

    At each step the longest planted context matching the end of the history
    decides the next entity; otherwise the base row of the current entity
    does. Sequence ``i`` draws from its own generator seeded with
    ``(seed, i)``, so the corpus is reproducible and order-independent.
    """
    n = len(spec.entities)
    init = np.ones(n) if spec.initial is None else np.asarray(spec.initial, dtype=float)
    cum_init = np.cumsum(init)
    cum_base = np.cumsum(spec.base, axis=1)
    planted = {
        ctx: (np.array(sorted(dist)), np.cumsum([dist[t] for t in sorted(dist)]))
        for ctx, dist in spec.rules.items()
    }
    lengths = sorted({len(c) for c in planted}, reverse=True)

    sequences = []
    for s in range(spec.n_sequences):
        rng = np.random.default_rng((spec.seed, s))
        u = rng.random(spec.length)
        seq = [int(np.searchsorted(cum_init, u[0] * cum_init[-1], side="right"))]
        for t in range(1, spec.length):
            targets = cum = None
            for L in lengths:
                if len(seq) >= L:
                    hit = planted.get(tuple(seq[-L:]))
                    if hit is not None:
                        targets, cum = hit
                        break
            if targets is None:
                row = cum_base[seq[-1]]
                if row[-1] == 0:
                    raise DeadEndError(
                        f"sequence {s}, step {t}: entity {spec.entities[seq[-1]]!r} has no "
                        f"outgoing base probability and no planted context matches "
                        f"history {[spec.entities[e] for e in seq[-3:]]}"
                    )
                nxt = int(np.searchsorted(row, u[t] * row[-1], side="right"))
            else:
                nxt = int(targets[np.searchsorted(cum, u[t] * cum[-1], side="right")])
            seq.append(nxt)
        sequences.append(tuple(seq))
    return SequenceCorpus(tuple(sequences), spec.vocabulary)


@dataclass(frozen=True)
class RecoveryResult:
    context: tuple[int, ...]
    target: int
    planted: float
    recovered: bool
    error: float | None


def recovery_check(extracted: RuleSet, spec: PlantedRuleSpec, tolerance: float = 0.01) -> list[RecoveryResult]:
    """Check each planted (context, target) pair against the extracted rules.

    A pair is recovered when a rule with the same context and target exists
    and its probability is within ``tolerance`` of the planted one.
    """
    found = extracted.contexts()
    out = []
    for ctx in sorted(spec.rules):
        for target, p in sorted(spec.rules[ctx].items()):
            if p <= 0:
                continue
            got = found.get(tuple(ctx), {}).get(target)
            err = None if got is None else abs(got - p)
            out.append(RecoveryResult(tuple(ctx), target, p, err is not None and err <= tolerance, err))
    return out


def parse_spec(text: str | TextIO) -> PlantedRuleSpec:
    """Read the sectioned text format (``[entities]``, ``[base]``, ``[rule]``, ``[params]``)."""
    stream = io.StringIO(text) if isinstance(text, str) else text
    section = None
    entities: list[str] = []
    base_lines, rule_lines = [], []
    params: dict[str, str] = {}
    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in ("entities", "base", "rule", "params"):
                raise SpecFormatError(f"line {lineno}: unknown section [{section}]")
            continue
        if section == "entities":
            entities.extend(line.split())
        elif section == "base":
            base_lines.append((lineno, line.split()))
        elif section == "rule":
            rule_lines.append((lineno, line.split()))
        elif section == "params":
            for item in line.split():
                if "=" not in item:
                    raise SpecFormatError(f"line {lineno}: expected key=value, got {item!r}")
                k, v = item.split("=", 1)
                params[k] = v
        else:
            raise SpecFormatError(f"line {lineno}: content before any section header")

    index = {t: i for i, t in enumerate(entities)}
    if len(index) != len(entities):
        raise SpecFormatError("duplicate entity in [entities]")

    def lookup(tok, lineno):
        try:
            return index[tok]
        except KeyError:
            raise SpecFormatError(f"line {lineno}: unknown entity {tok!r}") from None

    n = len(entities)
    base = np.zeros((n, n))
    for lineno, parts in base_lines:
        if len(parts) != 3:
            raise SpecFormatError(f"line {lineno}: expected 'from to prob'")
        base[lookup(parts[0], lineno), lookup(parts[1], lineno)] += float(parts[2])
    rules: dict[tuple[int, ...], dict[int, float]] = {}
    for lineno, parts in rule_lines:
        if len(parts) != 3:
            raise SpecFormatError(f"line {lineno}: expected 'ctx1|ctx2 target prob'")
        ctx = tuple(lookup(t, lineno) for t in parts[0].split("|"))
        rules.setdefault(ctx, {})[lookup(parts[1], lineno)] = float(parts[2])
    unknown = set(params) - {"n_sequences", "length", "seed"}
    if unknown:
        raise SpecFormatError(f"unknown params: {sorted(unknown)}")
    try:
        return PlantedRuleSpec(
            tuple(entities),
            base,
            rules,
            n_sequences=int(params.get("n_sequences", 100)),
            length=int(params.get("length", 20)),
            seed=int(params.get("seed", 0)),
        )
    except ValueError as exc:
        raise SpecFormatError(str(exc)) from None


def format_spec(spec: PlantedRuleSpec) -> str:
    ent = spec.entities
    out = ["[entities]\n", " ".join(ent) + "\n", "[base]\n"]
    for i, j in zip(*np.nonzero(spec.base)):
        out.append(f"{ent[i]} {ent[j]} {float(spec.base[i, j])!r}\n")
    out.append("[rule]\n")
    for ctx in sorted(spec.rules):
        for t, p in sorted(spec.rules[ctx].items()):
            out.append(f"{'|'.join(ent[e] for e in ctx)} {ent[t]} {p!r}\n")
    out.append("[params]\n")
    out.append(f"n_sequences={spec.n_sequences} length={spec.length} seed={spec.seed}\n")
    return "".join(out)


def random_planted_spec(
    n_entities: int = 40,
    out_degree: int = 4,
    n_order2: int = 10,
    n_order3: int = 5,
    n_sequences: int = 500,
    length: int = 30,
    seed: int = 0,
) -> PlantedRuleSpec:
    """Random sparse base network with deterministic planted rules.

    Each entity moves uniformly to ``out_degree`` random successors. An
    order-2 rule ``(w, x) -> y`` sends every ``w -> x`` step on to a single
    successor ``y`` of ``x``; an order-3 rule ``(v, w, x) -> y`` does the same
    given two steps of history. Planted contexts follow base edges, so they
    occur in the sampled corpus.
    """
    rng = np.random.default_rng(seed)
    n = n_entities
    base = np.zeros((n, n))
    for i in range(n):
        succ = rng.choice(np.delete(np.arange(n), i), size=out_degree, replace=False)
        base[i, succ] = 1.0 / out_degree
    preds = [np.flatnonzero(base[:, j]) for j in range(n)]
    rules: dict[tuple[int, ...], dict[int, float]] = {}
    for order, count in ((2, n_order2), (3, n_order3)):
        placed = tries = 0
        while placed < count and tries < 100 * (count + 1):
            tries += 1
            path = [int(rng.integers(n))]
            for _ in range(order - 1):
                if len(preds[path[0]]) == 0:
                    break
                path.insert(0, int(rng.choice(preds[path[0]])))
            if len(path) < order:
                continue
            ctx = tuple(path)
            if ctx in rules or any(ctx[-L:] in rules for L in range(2, order)):
                continue
            target = int(rng.choice(np.flatnonzero(base[ctx[-1]])))
            rules[ctx] = {target: 1.0}
            placed += 1
    entities = tuple(f"n{i}" for i in range(n))
    return PlantedRuleSpec(entities, base, rules, n_sequences, length, seed)


def grid_planted_spec(
    rows: int = 7,
    cols: int = 7,
    straight: float = 0.7,
    turn_fraction: float = 0.1,
    n_sequences: int = 500,
    length: int = 30,
    seed: int = 0,
) -> PlantedRuleSpec:
    """Movement on a grid of cells with momentum, a stand-in for vehicle traces.

    The base walk moves uniformly to one of the (up to 8) neighbouring cells.
    Order-2 rules make a walker that arrived at ``b`` from ``a`` continue
    straight with probability ``straight`` and never step straight back.
    For a random ``turn_fraction`` of three-cell histories an order-3 rule
    forces one particular next cell.
    """
    rng = np.random.default_rng(seed)
    n = rows * cols

    def neighbours(i):
        r, c = divmod(i, cols)
        return [
            (r + dr) * cols + (c + dc)
            for dr in (-1, 0, 1)
            for dc in (-1, 0, 1)
            if (dr or dc) and 0 <= r + dr < rows and 0 <= c + dc < cols
        ]

    nb = [neighbours(i) for i in range(n)]
    base = np.zeros((n, n))
    for i in range(n):
        base[i, nb[i]] = 1.0 / len(nb[i])

    rules: dict[tuple[int, ...], dict[int, float]] = {}
    for b in range(n):
        rb, cb = divmod(b, cols)
        for a in nb[b]:
            ra, ca = divmod(a, cols)
            r2, c2 = 2 * rb - ra, 2 * cb - ca
            if not (0 <= r2 < rows and 0 <= c2 < cols):
                continue
            ahead = r2 * cols + c2
            rest = [x for x in nb[b] if x not in (a, ahead)]
            dist = {ahead: straight}
            dist.update({x: (1 - straight) / len(rest) for x in rest})
            rules[(a, b)] = dist
            for z in nb[a]:
                if z != b and rng.random() < turn_fraction:
                    choice = [x for x in nb[b] if x != a]
                    rules[(z, a, b)] = {int(rng.choice(choice)): 1.0}
    entities = tuple(f"c{i}" for i in range(n))
    return PlantedRuleSpec(entities, base, rules, n_sequences, length, seed)
