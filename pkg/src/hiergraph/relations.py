"""Linear pairwise relation scorer.

Candidate pairs are ordered entity pairs whose start positions lie
within a token-distance cap.  Each pair is featurized from the two
entity labels plus their signed token offset and scored into the three
relation kinds or "none".  Decoding keeps non-none argmax picks that
pass the schema signature filter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Dataset
from .errors import EmptyDataset, LengthMismatch
from .schema import (
    ENTITY_LABELS,
    RELATION_KINDS,
    Entity,
    Relation,
    relation_signature_allowed,
)

NONE_KIND = "none"
OUTPUT_KINDS = RELATION_KINDS + (NONE_KIND,)

DEFAULT_DISTANCE_CAP = 20

# Signed offset dst.start - src.start is bucketed into these inclusive
# ranges; near offsets get their own bucket, far ones are pooled.
DISTANCE_BUCKETS = (
    (None, -11),
    (-10, -6),
    (-5, -3),
    (-2, -2),
    (-1, -1),
    (0, 0),
    (1, 1),
    (2, 2),
    (3, 5),
    (6, 10),
    (11, None),
)

# src one-hot + dst one-hot + distance buckets + direction + constant.
FEATURE_DIM = 2 * len(ENTITY_LABELS) + len(DISTANCE_BUCKETS) + 2

_LABEL_POS = {label: i for i, label in enumerate(ENTITY_LABELS)}
_KIND_POS = {kind: i for i, kind in enumerate(OUTPUT_KINDS)}


@dataclass
class RelationScorerParams:
    """Weights over pair features, one column per output kind."""

    weights: np.ndarray
    kinds: tuple[str, ...] = OUTPUT_KINDS
    distance_cap: int = DEFAULT_DISTANCE_CAP

    def __post_init__(self):
        if self.weights.shape != (FEATURE_DIM, len(self.kinds)):
            raise LengthMismatch(
                f"weights shape {self.weights.shape} != "
                f"({FEATURE_DIM}, {len(self.kinds)})"
            )


def _bucket_index(offset: int) -> int:
    for i, (lo, hi) in enumerate(DISTANCE_BUCKETS):
        if (lo is None or offset >= lo) and (hi is None or offset <= hi):
            return i
    raise AssertionError("bucket ranges cover every integer")


def pair_features(src: Entity, dst: Entity) -> np.ndarray:
    phi = np.zeros(FEATURE_DIM)
    phi[_LABEL_POS[src.label]] = 1.0
    phi[len(ENTITY_LABELS) + _LABEL_POS[dst.label]] = 1.0
    offset = dst.start_ix - src.start_ix
    base = 2 * len(ENTITY_LABELS)
    phi[base + _bucket_index(offset)] = 1.0
    if offset > 0:
        phi[base + len(DISTANCE_BUCKETS)] = 1.0
    phi[-1] = 1.0
    return phi


def _ordered(entities) -> list[Entity]:
    items = entities.values() if isinstance(entities, dict) else list(entities)
    return sorted(items, key=lambda e: (e.start_ix, e.end_ix, e.id))


def candidate_pairs(entities, cap: int = DEFAULT_DISTANCE_CAP):
    """Ordered pairs with |dst.start - src.start| <= cap, both directions."""
    ordered = _ordered(entities)
    pairs = []
    for src in ordered:
        for dst in ordered:
            if src.id == dst.id:
                continue
            if abs(dst.start_ix - src.start_ix) <= cap:
                pairs.append((src, dst))
    return pairs


def _training_pairs(ds: Dataset, cap: int):
    features = []
    gold = []
    for report in ds.reports:
        kind_of = {}
        for rel in report.relations:
            kind_of.setdefault((rel.source_id, rel.target_id), rel.kind)
        for src, dst in candidate_pairs(report.entities, cap):
            features.append(pair_features(src, dst))
            gold.append(_KIND_POS[kind_of.get((src.id, dst.id), NONE_KIND)])
    if not features:
        raise EmptyDataset("no candidate entity pairs to train on")
    return np.array(features), np.array(gold, dtype=int)


def train_relation_scorer(
    ds: Dataset, cfg=None, cap: int = DEFAULT_DISTANCE_CAP
) -> RelationScorerParams:
    """Cross-entropy training of the pair scorer.

    Runs for the combined epoch budget of the supplied TrainConfig at
    its phase-1 learning rate; the 4-way output has no hierarchy to
    phase over.
    """
    from .tagger import TrainConfig

    cfg = cfg or TrainConfig()
    cfg.validate()
    phi, gold = _training_pairs(ds, cap)
    n, _ = phi.shape
    weights = np.zeros((FEATURE_DIM, len(OUTPUT_KINDS)))
    rng = np.random.default_rng(cfg.seed)
    epochs = cfg.phase1_epochs + cfg.phase2_epochs
    lr = cfg.lr_phase1
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            scores = phi[batch] @ weights
            scores -= scores.max(axis=1, keepdims=True)
            probs = np.exp(scores)
            probs /= probs.sum(axis=1, keepdims=True)
            probs[np.arange(len(batch)), gold[batch]] -= 1.0
            grad = phi[batch].T @ probs / len(batch)
            weights -= lr * (grad + cfg.l2 * weights)
    return RelationScorerParams(weights=weights, distance_cap=cap)


def predict_relations(params: RelationScorerParams, entities) -> list[Relation]:
    """Schema-constrained decoding over all candidate pairs."""
    pairs = candidate_pairs(entities, params.distance_cap)
    if not pairs:
        return []
    phi = np.array([pair_features(src, dst) for src, dst in pairs])
    picks = np.argmax(phi @ params.weights, axis=1)
    relations = []
    for (src, dst), pick in zip(pairs, picks):
        kind = params.kinds[int(pick)]
        if kind == NONE_KIND:
            continue
        if not relation_signature_allowed(kind, src.label, dst.label):
            continue
        relations.append(Relation(source_id=src.id, target_id=dst.id, kind=kind))
    return relations
