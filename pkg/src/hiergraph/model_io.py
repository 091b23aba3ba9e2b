"""Model persistence: one JSON container per trained model.

The file is self-describing: it embeds the taxonomy edge list and its
hash, the vocabulary, every parameter array, and the training
configuration.  Loading against a different taxonomy is refused.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import FileUnreadable, ModelFormatError, TaxonomyMismatch
from .relations import RelationScorerParams
from .tagger import TaggerParams, TrainConfig
from .taxonomy import TaxonomyTree

FORMAT_VERSION = 1


@dataclass
class LoadedModel:
    tree: TaxonomyTree
    tagger: TaggerParams
    relations: RelationScorerParams | None
    train_config: TrainConfig | None


def _array(obj, name: str) -> np.ndarray:
    try:
        arr = np.array(obj, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"field {name!r} is not numeric") from exc
    if not np.all(np.isfinite(arr)):
        raise ModelFormatError(f"field {name!r} holds non-finite values")
    return arr


def save_model(
    path: str,
    tree: TaxonomyTree,
    tagger: TaggerParams,
    relations: RelationScorerParams | None = None,
    train_config: TrainConfig | None = None,
) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "taxonomy_hash": tree.config_hash,
        "taxonomy_edges": [list(e) for e in tree.edges],
        "tagger": {
            "vocab": tagger.vocab,
            "labels": list(tagger.labels),
            "window": tagger.window,
            "embed_dim": tagger.embed_dim,
            "embeddings": tagger.embeddings.tolist(),
            "weights": tagger.weights.tolist(),
            "bias": tagger.bias.tolist(),
        },
        "relations": None
        if relations is None
        else {
            "weights": relations.weights.tolist(),
            "kinds": list(relations.kinds),
            "distance_cap": relations.distance_cap,
        },
        "train_config": None if train_config is None else asdict(train_config),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_model(path: str, tree: TaxonomyTree | None = None) -> LoadedModel:
    """Load a model file, checking it against ``tree`` when supplied.

    Without a tree the taxonomy is rebuilt from the embedded edges and
    verified against the stored hash.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise FileUnreadable(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: invalid JSON: {exc}") from exc

    if not isinstance(doc, dict) or doc.get("format_version") != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: unknown model format")
    try:
        stored_hash = doc["taxonomy_hash"]
        edges = [tuple(e) for e in doc["taxonomy_edges"]]
        tagger_doc = doc["tagger"]
        vocab = dict(tagger_doc["vocab"])
        labels = tuple(tagger_doc["labels"])
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"{path}: missing field {exc}") from exc

    embedded = TaxonomyTree.from_edges(edges)
    if embedded.config_hash != stored_hash:
        raise TaxonomyMismatch("embedded taxonomy does not match its stored hash")
    if tree is not None:
        if tree.config_hash != stored_hash:
            raise TaxonomyMismatch(
                "model was trained against a different taxonomy "
                f"({stored_hash[:12]} vs {tree.config_hash[:12]})"
            )
        embedded = tree

    tagger = TaggerParams(
        vocab=vocab,
        labels=labels,
        window=int(tagger_doc["window"]),
        embed_dim=int(tagger_doc["embed_dim"]),
        embeddings=_array(tagger_doc["embeddings"], "embeddings"),
        weights=_array(tagger_doc["weights"], "weights"),
        bias=_array(tagger_doc["bias"], "bias"),
    )

    relations = None
    if doc.get("relations") is not None:
        rel_doc = doc["relations"]
        relations = RelationScorerParams(
            weights=_array(rel_doc["weights"], "relations.weights"),
            kinds=tuple(rel_doc["kinds"]),
            distance_cap=int(rel_doc["distance_cap"]),
        )

    train_config = None
    if doc.get("train_config") is not None:
        train_config = TrainConfig(**doc["train_config"])

    return LoadedModel(
        tree=embedded, tagger=tagger, relations=relations, train_config=train_config
    )
