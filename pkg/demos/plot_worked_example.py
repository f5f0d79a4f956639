"""
From one trajectory to node embeddings
======================================

A single trajectory over five places is mined for variable-order rules,
turned into a neighborhood matrix and factorized.
"""

import numpy as np

from honem import build_neighborhood, embed, extract_rules, parse_corpus
from honem.ruleminer import count_paths, dynamic_threshold, kl_divergence

corpus = parse_corpus("A C D E A C D B C E")
vocab = corpus.vocabulary
print("entities:", vocab.id_to_token)

# Observation counts of every context of length 1 and 2.
for k in (1, 2):
    for ctx, dist in sorted(count_paths(corpus, k).items()):
        name = " ".join(vocab.token(e) for e in ctx)
        counts = {vocab.token(t): c for t, c in dist.counts.items()}
        print(f"order {k}  {name:5s} -> {counts}")

# Does knowing the step before C change where we go next?
c, a, b = vocab["C"], vocab["A"], vocab["B"]
parent = count_paths(corpus, 1)[(c,)]
for prev in (a, b):
    ext = count_paths(corpus, 2)[(prev, c)]
    kl = kl_divergence(ext, parent)
    delta = dynamic_threshold(2, ext.support)
    print(f"{vocab.token(prev)} C: KL {kl:.3f} bits, threshold {delta:.3f}")

# Neither history clears the threshold on so little data. Scaling the
# threshold down lets the two second-order rules through.
for scale in (1.0, 0.25):
    rules = extract_rules(corpus, min_support=1, threshold_scale=scale)
    print(f"threshold scale {scale}: rules per order {rules.counts_per_order}")

S = build_neighborhood(rules)
np.set_printoptions(precision=3, suppress=True)
print("neighborhood matrix:\n", S.entries.toarray())

# A full-rank factorization reproduces S exactly.
emb = embed(S, d=5, seed=0)
print("max reconstruction error:", np.abs(emb.content @ emb.context.T - S.entries.toarray()).max())
