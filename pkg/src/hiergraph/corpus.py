"""Report tokenization, dataset loading, label statistics, and
inter-annotator agreement.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

from .errors import (
    DocMismatch,
    FileUnreadable,
    LengthMismatch,
    MalformedRecord,
    OverlapConflict,
    ValidationError,
)
from .schema import (
    ENTITY_LABELS,
    NONE_LABEL,
    RELATION_KINDS,
    SOURCES,
    SPLITS,
    STRUCTURAL_RULES,
    ReportGraph,
    label_group,
    parse_report,
    serialize_report,
    validate_graph,
)

# Punctuation separated into its own token when attached to a word.
# Hyphens are deliberately absent: compounds stay whole.
PUNCTUATION = frozenset(".,;:?!()")


def tokenize(text: str) -> list[str]:
    """Whitespace split with listed punctuation emitted as separate tokens.

    Deleting whitespace from " ".join(result) reproduces the input with
    its whitespace deleted; no empty tokens are produced.
    """
    tokens: list[str] = []
    for chunk in text.split():
        word = []
        for ch in chunk:
            if ch in PUNCTUATION:
                if word:
                    tokens.append("".join(word))
                    word = []
                tokens.append(ch)
            else:
                word.append(ch)
        if word:
            tokens.append("".join(word))
    return tokens


@dataclass
class Dataset:
    """Parsed reports plus the split -> doc_id partition index."""

    reports: list[ReportGraph]
    partitions: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.partitions:
            self.partitions = {s: [] for s in SPLITS}
            for report in self.reports:
                self.partitions.setdefault(report.split, []).append(report.doc_id)

    def __len__(self) -> int:
        return len(self.reports)

    def by_id(self) -> dict[str, ReportGraph]:
        return {r.doc_id: r for r in self.reports}

    def subset(self, splits) -> "Dataset":
        wanted = {splits} if isinstance(splits, str) else set(splits)
        return Dataset([r for r in self.reports if r.split in wanted])


def parse_dataset(doc: dict) -> Dataset:
    """Build a Dataset from a decoded annotation document.

    Error-level structural violations abort with the offending doc_id;
    semantic findings (e.g. off-schema relation signatures) are left to
    validate_graph reporting.
    """
    if not isinstance(doc, dict):
        raise MalformedRecord("<root>", "annotation document is not an object")
    reports = []
    seen = set()
    for doc_id, record in doc.items():
        if doc_id == "_meta":
            continue
        if doc_id in seen:
            raise MalformedRecord(doc_id, "duplicate doc_id")
        seen.add(doc_id)
        graph = parse_report(doc_id, record)
        for v in validate_graph(graph):
            if v.severity == "error" and v.rule in STRUCTURAL_RULES:
                raise ValidationError(doc_id, v.rule, f"{v.subject}: {v.message}")
        reports.append(graph)
    return Dataset(reports)


def load_dataset(path: str) -> Dataset:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = fh.read()
    except OSError as exc:
        raise FileUnreadable(f"{path}: {exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedRecord("<root>", f"invalid JSON in {path}: {exc}") from exc
    return parse_dataset(doc)


def serialize_dataset(ds: Dataset) -> dict:
    return {r.doc_id: serialize_report(r) for r in ds.reports}


def save_dataset(ds: Dataset, path: str, meta: dict | None = None) -> None:
    doc: dict = {}
    if meta:
        doc["_meta"] = meta
    doc.update(serialize_dataset(ds))
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


# --- label statistics -------------------------------------------------------

# Table rows: anatomy aggregated over its subtree, all other leaves listed.
ENTITY_ROWS = ("ANAT",) + tuple(l for l in ENTITY_LABELS if l != "ANAT-DP")


def _entity_row(label: str) -> str:
    return "ANAT" if label_group(label) == "ANAT" else label


@dataclass
class ColumnStats:
    """Counts for one statistics column (a split, or a split+source)."""

    name: str
    entity_counts: dict[str, int]
    relation_counts: dict[str, int]

    @property
    def total_entities(self) -> int:
        return sum(self.entity_counts.values())

    @property
    def total_relations(self) -> int:
        return sum(self.relation_counts.values())

    def entity_pct(self, row: str) -> float:
        total = self.total_entities
        return 100.0 * self.entity_counts.get(row, 0) / total if total else 0.0

    def relation_pct(self, kind: str) -> float:
        total = self.total_relations
        return 100.0 * self.relation_counts.get(kind, 0) / total if total else 0.0


@dataclass
class LabelStats:
    columns: list[ColumnStats]

    def to_json(self) -> dict:
        return {
            "entity_rows": list(ENTITY_ROWS),
            "relation_rows": list(RELATION_KINDS),
            "columns": [
                {
                    "name": c.name,
                    "entities": {
                        row: {
                            "count": c.entity_counts.get(row, 0),
                            "pct": round(c.entity_pct(row), 1),
                        }
                        for row in ENTITY_ROWS
                    },
                    "total_entities": c.total_entities,
                    "relations": {
                        kind: {
                            "count": c.relation_counts.get(kind, 0),
                            "pct": round(c.relation_pct(kind), 1),
                        }
                        for kind in RELATION_KINDS
                    },
                    "total_relations": c.total_relations,
                }
                for c in self.columns
            ],
        }

    def to_text(self) -> str:
        """Aligned-column rendering with one-decimal percentages."""
        header = [""] + [c.name for c in self.columns]
        rows: list[list[str]] = [header]
        for row in ENTITY_ROWS:
            rows.append(
                [row]
                + [
                    f"{c.entity_counts.get(row, 0)} ({c.entity_pct(row):.1f})"
                    for c in self.columns
                ]
            )
        rows.append(
            ["Total Entities"]
            + [f"{c.total_entities} (100.0)" if c.total_entities else "0 (0.0)" for c in self.columns]
        )
        for kind in RELATION_KINDS:
            rows.append(
                [kind]
                + [
                    f"{c.relation_counts.get(kind, 0)} ({c.relation_pct(kind):.1f})"
                    for c in self.columns
                ]
            )
        rows.append(
            ["Total Relations"]
            + [f"{c.total_relations} (100.0)" if c.total_relations else "0 (0.0)" for c in self.columns]
        )
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        out = []
        for r in rows:
            out.append(
                "  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip()
            )
        return "\n".join(out) + "\n"


def _column_order(ds: Dataset) -> list[tuple[str, str, str | None]]:
    """(column name, split, source filter) triples, test split per source."""
    columns: list[tuple[str, str, str | None]] = []
    for split in ("train", "validation"):
        if any(r.split == split for r in ds.reports):
            columns.append((split, split, None))
    test_sources = {r.source for r in ds.reports if r.split == "test"}
    canonical = [s for s in SOURCES if s in test_sources]
    extra = sorted(test_sources - set(canonical))
    for source in canonical + extra:
        columns.append((f"test/{source}", "test", source))
    return columns


def label_statistics(ds: Dataset) -> LabelStats:
    """Per-column entity and relation label counts with percentages."""
    columns = []
    for name, split, source in _column_order(ds):
        entity_counts: Counter = Counter()
        relation_counts: Counter = Counter()
        for report in ds.reports:
            if report.split != split:
                continue
            if source is not None and report.source != source:
                continue
            for ent in report.entities.values():
                entity_counts[_entity_row(ent.label)] += 1
            for rel in report.relations:
                relation_counts[rel.kind] += 1
        columns.append(ColumnStats(name, dict(entity_counts), dict(relation_counts)))
    return LabelStats(columns)


# --- token-level projection and agreement -----------------------------------


@dataclass(frozen=True)
class TokenLabeling:
    """Per-token leaf label (or NONE) for one report."""

    doc_id: str
    labels: tuple[str, ...]


def to_token_labeling(graph: ReportGraph) -> TokenLabeling:
    """Project entities onto tokens; uncovered tokens get NONE.

    Overlapping entities with the same label merge silently; different
    labels on one token raise OverlapConflict.
    """
    labels = [NONE_LABEL] * len(graph.tokens)
    for ent in graph.entities.values():
        for i in range(ent.start_ix, ent.end_ix + 1):
            if labels[i] != NONE_LABEL and labels[i] != ent.label:
                raise OverlapConflict(
                    f"{graph.doc_id}: token {i} covered by both "
                    f"{labels[i]} and {ent.label}"
                )
            labels[i] = ent.label
    return TokenLabeling(doc_id=graph.doc_id, labels=tuple(labels))


def cohens_kappa(a, b) -> float:
    """Chance-corrected agreement between two equal-length labelings.

    Accepts TokenLabeling values or plain label sequences.  Perfect
    observed agreement returns exactly 1.0, which also covers the
    degenerate case of both marginals concentrated on one label.
    """
    labels_a = a.labels if isinstance(a, TokenLabeling) else tuple(a)
    labels_b = b.labels if isinstance(b, TokenLabeling) else tuple(b)
    if len(labels_a) != len(labels_b):
        raise LengthMismatch(
            f"labelings differ in length: {len(labels_a)} vs {len(labels_b)}"
        )
    if not labels_a:
        raise LengthMismatch("empty labelings")

    n = len(labels_a)
    agree = sum(1 for x, y in zip(labels_a, labels_b) if x == y)
    p_o = agree / n
    if p_o == 1.0:
        return 1.0

    marg_a = Counter(labels_a)
    marg_b = Counter(labels_b)
    p_e = sum(marg_a[l] * marg_b.get(l, 0) for l in marg_a) / (n * n)
    return (p_o - p_e) / (1.0 - p_e)


def dataset_kappa(ds_a: Dataset, ds_b: Dataset) -> float:
    """Token-level kappa between two annotation sets of the same reports."""
    by_a, by_b = ds_a.by_id(), ds_b.by_id()
    if set(by_a) != set(by_b):
        only_a = sorted(set(by_a) - set(by_b))
        only_b = sorted(set(by_b) - set(by_a))
        raise DocMismatch(f"doc sets differ (only in A: {only_a}, only in B: {only_b})")
    labels_a: list[str] = []
    labels_b: list[str] = []
    for doc_id in sorted(by_a):
        la = to_token_labeling(by_a[doc_id])
        lb = to_token_labeling(by_b[doc_id])
        if len(la.labels) != len(lb.labels):
            raise LengthMismatch(f"{doc_id}: token counts differ")
        labels_a.extend(la.labels)
        labels_b.extend(lb.labels)
    return cohens_kappa(labels_a, labels_b)
