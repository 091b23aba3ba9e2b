"""Strict entity and relation matching with micro and macro F1.

An entity prediction counts only when span boundaries and leaf label
are all identical to an unmatched gold entity; a relation counts only
when its kind and both endpoint entities match strictly.  Matching is
one-to-one: duplicate gold items absorb at most one prediction each.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .errors import DocMismatch
from .schema import ReportGraph, label_group, prune_to_radgraph1

EVAL_MODES = ("radgraph2", "radgraph1-common")


@dataclass
class TypeCounts:
    """True-positive, predicted, and gold tallies for one type."""

    tp: int = 0
    pred: int = 0
    gold: int = 0

    @property
    def precision(self) -> float:
        return self.tp / self.pred if self.pred else 0.0

    @property
    def recall(self) -> float:
        return self.tp / self.gold if self.gold else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2.0 * p * r / (p + r) if p + r else 0.0

    def add(self, other: "TypeCounts") -> None:
        self.tp += other.tp
        self.pred += other.pred
        self.gold += other.gold

    def to_json(self) -> dict:
        return {
            "tp": self.tp,
            "pred": self.pred,
            "gold": self.gold,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def _check_aligned(gold: ReportGraph, pred: ReportGraph) -> None:
    if gold.doc_id != pred.doc_id:
        raise DocMismatch(f"doc ids differ: {gold.doc_id!r} vs {pred.doc_id!r}")
    if gold.tokens != pred.tokens:
        raise DocMismatch(f"{gold.doc_id}: token sequences differ")


def _min_count_match(gold_keys, pred_keys, types) -> dict[str, TypeCounts]:
    """One-to-one matching of identical keys, tallied per type.

    Each key's first element is its type; duplicates match min-count.
    """
    gold_c = Counter(gold_keys)
    pred_c = Counter(pred_keys)
    counts: dict[str, TypeCounts] = {t: TypeCounts() for t in types}
    for key, n in gold_c.items():
        counts[key[0]].gold += n
    for key, n in pred_c.items():
        counts[key[0]].pred += n
        counts[key[0]].tp += min(n, gold_c.get(key, 0))
    return {t: c for t, c in counts.items() if c.gold or c.pred}


def match_entities(gold: ReportGraph, pred: ReportGraph) -> dict[str, TypeCounts]:
    """Per-label counts of strict span+label matches."""
    _check_aligned(gold, pred)
    gold_keys = [(e.label, e.start_ix, e.end_ix) for e in gold.entities.values()]
    pred_keys = [(e.label, e.start_ix, e.end_ix) for e in pred.entities.values()]
    labels = {k[0] for k in gold_keys} | {k[0] for k in pred_keys}
    return _min_count_match(gold_keys, pred_keys, labels)


def _relation_keys(graph: ReportGraph) -> list[tuple]:
    keys = []
    for rel in graph.relations:
        src = graph.entities[rel.source_id]
        dst = graph.entities[rel.target_id]
        keys.append(
            (
                rel.kind,
                (src.label, src.start_ix, src.end_ix),
                (dst.label, dst.start_ix, dst.end_ix),
            )
        )
    return keys


def match_relations(gold: ReportGraph, pred: ReportGraph) -> dict[str, TypeCounts]:
    """Per-kind counts; endpoints must strict-match as entities."""
    _check_aligned(gold, pred)
    gold_keys = _relation_keys(gold)
    pred_keys = _relation_keys(pred)
    kinds = {k[0] for k in gold_keys} | {k[0] for k in pred_keys}
    return _min_count_match(gold_keys, pred_keys, kinds)


@dataclass
class ReportCounts:
    """Matching results for one report, tagged with its source."""

    doc_id: str
    source: str
    entities: dict[str, TypeCounts]
    relations: dict[str, TypeCounts]


def grouped_row(label: str) -> str:
    """Coarse reporting row: anatomy and change collapse to their group."""
    group = label_group(label)
    return group if group in ("ANAT", "CHAN") else label


def _merge(dicts, grouped: bool) -> dict[str, TypeCounts]:
    merged: dict[str, TypeCounts] = {}
    for d in dicts:
        for key, counts in d.items():
            row = grouped_row(key) if grouped else key
            merged.setdefault(row, TypeCounts()).add(counts)
    return merged


def _micro(per_type: dict[str, TypeCounts]) -> TypeCounts:
    pooled = TypeCounts()
    for counts in per_type.values():
        pooled.add(counts)
    return pooled


def _macro(per_type: dict[str, TypeCounts]) -> float:
    # Sorted type order keeps the float sum independent of merge order.
    included = [
        per_type[t].f1
        for t in sorted(per_type)
        if per_type[t].gold or per_type[t].pred
    ]
    return sum(included) / len(included) if included else 0.0


@dataclass
class EvalScores:
    """Aggregated scores with per-type and per-source breakdowns."""

    entity_types: dict[str, TypeCounts]
    relation_kinds: dict[str, TypeCounts]
    per_source: dict[str, "EvalScores"] = field(default_factory=dict)

    @property
    def entity_micro(self) -> TypeCounts:
        return _micro(self.entity_types)

    @property
    def relation_micro(self) -> TypeCounts:
        return _micro(self.relation_kinds)

    @property
    def entity_f1_micro(self) -> float:
        return self.entity_micro.f1

    @property
    def entity_f1_macro(self) -> float:
        return _macro(self.entity_types)

    @property
    def relation_f1_micro(self) -> float:
        return self.relation_micro.f1

    @property
    def relation_f1_macro(self) -> float:
        return _macro(self.relation_kinds)

    def to_json(self) -> dict:
        doc = {
            "entity_f1_micro": self.entity_f1_micro,
            "entity_f1_macro": self.entity_f1_macro,
            "relation_f1_micro": self.relation_f1_micro,
            "relation_f1_macro": self.relation_f1_macro,
            "per_type": {
                "entities": {
                    t: self.entity_types[t].to_json()
                    for t in sorted(self.entity_types)
                },
                "relations": {
                    k: self.relation_kinds[k].to_json()
                    for k in sorted(self.relation_kinds)
                },
            },
        }
        if self.per_source:
            doc["per_source"] = {
                s: {
                    "entity_f1_micro": sub.entity_f1_micro,
                    "entity_f1_macro": sub.entity_f1_macro,
                    "relation_f1_micro": sub.relation_f1_micro,
                    "relation_f1_macro": sub.relation_f1_macro,
                }
                for s, sub in sorted(self.per_source.items())
            }
        return doc

    def to_text(self) -> str:
        lines = []

        def section(title: str, per_type: dict[str, TypeCounts]) -> None:
            lines.append(title)
            rows = [("", "P", "R", "F1", "TP", "Pred", "Gold")]
            for name in sorted(per_type):
                c = per_type[name]
                rows.append(
                    (
                        name,
                        f"{c.precision:.3f}",
                        f"{c.recall:.3f}",
                        f"{c.f1:.3f}",
                        str(c.tp),
                        str(c.pred),
                        str(c.gold),
                    )
                )
            micro = _micro(per_type)
            rows.append(
                (
                    "micro",
                    f"{micro.precision:.3f}",
                    f"{micro.recall:.3f}",
                    f"{micro.f1:.3f}",
                    str(micro.tp),
                    str(micro.pred),
                    str(micro.gold),
                )
            )
            rows.append(("macro", "", "", f"{_macro(per_type):.3f}", "", "", ""))
            widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
            for r in rows:
                lines.append(
                    "  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip()
                )

        section("Entities", self.entity_types)
        lines.append("")
        section("Relations", self.relation_kinds)
        if self.per_source:
            lines.append("")
            lines.append("Per source")
            for s, sub in sorted(self.per_source.items()):
                lines.append(
                    f"  {s}: entity micro {sub.entity_f1_micro:.3f} "
                    f"macro {sub.entity_f1_macro:.3f}, "
                    f"relation micro {sub.relation_f1_micro:.3f} "
                    f"macro {sub.relation_f1_macro:.3f}"
                )
        return "\n".join(lines) + "\n"


def aggregate(counts, grouped: bool = False, with_sources: bool = True) -> EvalScores:
    """Merge per-report counts into EvalScores.

    Micro pools raw tallies; macro averages F1 over types present in
    gold or predictions.  Merging is associative and commutative, so
    report order never matters.
    """
    counts = list(counts)
    scores = EvalScores(
        entity_types=_merge((c.entities for c in counts), grouped),
        relation_kinds=_merge((c.relations for c in counts), grouped),
    )
    if with_sources:
        sources = sorted({c.source for c in counts})
        if len(sources) > 1:
            scores.per_source = {
                s: aggregate(
                    [c for c in counts if c.source == s],
                    grouped=grouped,
                    with_sources=False,
                )
                for s in sources
            }
    return scores


def evaluate_report(gold: ReportGraph, pred: ReportGraph) -> ReportCounts:
    return ReportCounts(
        doc_id=gold.doc_id,
        source=gold.source,
        entities=match_entities(gold, pred),
        relations=match_relations(gold, pred),
    )


def evaluate_intersection(
    gold_ds, pred_ds, mode: str = "radgraph2", grouped: bool = False
) -> EvalScores:
    """Corpus-level evaluation over aligned doc ids.

    radgraph1-common mode prunes change entities from both sides first,
    scoring only the schema intersection; radgraph2 scores everything.
    """
    if mode not in EVAL_MODES:
        raise ValueError(f"mode must be one of {EVAL_MODES}, got {mode!r}")
    gold_by = gold_ds.by_id()
    pred_by = pred_ds.by_id()
    if set(gold_by) != set(pred_by):
        only_g = sorted(set(gold_by) - set(pred_by))
        only_p = sorted(set(pred_by) - set(gold_by))
        raise DocMismatch(
            f"doc sets differ (gold only: {only_g}, predictions only: {only_p})"
        )
    counts = []
    for doc_id in sorted(gold_by):
        gold, pred = gold_by[doc_id], pred_by[doc_id]
        if mode == "radgraph1-common":
            gold = prune_to_radgraph1(gold)
            pred = prune_to_radgraph1(pred)
        counts.append(evaluate_report(gold, pred))
    return aggregate(counts, grouped=grouped)
