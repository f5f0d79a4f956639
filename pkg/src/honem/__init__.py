"""Node embeddings for networks with variable-order sequential dependencies.

The pipeline mines dependency rules from trajectories
(:mod:`honem.ruleminer`), turns them into a higher-order neighborhood matrix
(:mod:`honem.neighborhood`), factorizes it (:mod:`honem.spectral`) and
evaluates the embeddings (:mod:`honem.evaltasks`).
"""

__version__ = "0.1.0"

from .corpus import (
    FirstOrderNetwork,
    SequenceCorpus,
    Vocabulary,
    build_fon,
    parse_corpus,
)
from .evaltasks import (
    auroc,
    average_precision,
    classify_fit,
    linkpred_split,
    map_score,
    mask_neighborhood,
    precision_at_k,
    score_pairs,
)
from .neighborhood import (
    NeighborhoodMatrix,
    OrderDistanceMatrix,
    build_neighborhood,
    combine,
    order_matrices,
)
from .ruleminer import (
    NextStepDistribution,
    Rule,
    RuleSet,
    count_paths,
    dynamic_threshold,
    extract_rules,
    kl_divergence,
)
from .spectral import EmbeddingMatrix, SingularTriplets, embed, truncated_svd
from .synthgen import PlantedRuleSpec, generate, recovery_check
