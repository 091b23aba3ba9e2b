"""Tokenizer, dataset IO, label statistics, and agreement."""

import json

import numpy as np
import pytest

from hiergraph import (
    Dataset,
    DocMismatch,
    FileUnreadable,
    LengthMismatch,
    MalformedRecord,
    OverlapConflict,
    ValidationError,
    cohens_kappa,
    dataset_kappa,
    label_statistics,
    load_dataset,
    parse_report,
    save_dataset,
    to_token_labeling,
    tokenize,
    validate_graph,
)
from hiergraph.corpus import ENTITY_ROWS, parse_dataset


class TestTokenize:
    def test_trailing_period(self):
        assert tokenize("no change.") == ["no", "change", "."]

    def test_punctuation_kinds(self):
        assert tokenize("(see note):") == ["(", "see", "note", ")", ":"]
        assert tokenize("a, b; c?") == ["a", ",", "b", ";", "c", "?"]
        assert tokenize("done!") == ["done", "!"]

    def test_hyphens_kept(self):
        assert tokenize("post-surgical changes") == ["post-surgical", "changes"]

    def test_abbreviation(self):
        assert tokenize("q.d.") == ["q", ".", "d", "."]

    def test_empty_and_whitespace(self):
        assert tokenize("") == []
        assert tokenize("   \t\n ") == []

    def test_no_empty_tokens_and_concat_invariant(self):
        rng = np.random.default_rng(0)
        alphabet = list("ab .,;:?!()xy-")
        for _ in range(200):
            text = "".join(rng.choice(alphabet, size=rng.integers(0, 40)))
            tokens = tokenize(text)
            assert all(tokens), text
            joined = "".join(tokens)
            assert joined == "".join(text.split()), text


class TestDataset:
    def test_load_fixture(self, small_ds):
        assert len(small_ds) == 6
        assert small_ds.partitions["train"] == ["mimic-1", "synth-1"]
        assert small_ds.partitions["validation"] == ["mimic-2"]
        assert small_ds.partitions["test"] == ["mimic-3", "chex-1", "chex-2"]

    def test_by_id_and_subset(self, small_ds):
        by_id = small_ds.by_id()
        assert by_id["chex-2"].source == "CheXpert"
        test_only = small_ds.subset("test")
        assert len(test_only) == 3
        pair = small_ds.subset(["train", "validation"])
        assert {r.split for r in pair.reports} == {"train", "validation"}

    def test_meta_key_skipped(self, small_path):
        doc = json.load(open(small_path))
        doc["_meta"] = {"version": "x"}
        ds = parse_dataset(doc)
        assert len(ds) == 6

    def test_structural_error_aborts(self, small_path):
        doc = json.load(open(small_path))
        doc["mimic-1"]["entities"]["1"]["end_ix"] = 99
        with pytest.raises(ValidationError, match="mimic-1"):
            parse_dataset(doc)

    def test_signature_error_loads(self, small_path):
        doc = json.load(open(small_path))
        # located_at out of an anatomy entity: semantic, not structural.
        doc["chex-1"]["entities"]["1"]["relations"] = [["located_at", "2"]]
        doc["chex-1"]["entities"]["2"]["relations"] = []
        ds = parse_dataset(doc)
        bad = ds.by_id()["chex-1"]
        assert any(v.rule == "bad_signature" for v in validate_graph(bad))

    def test_missing_file(self):
        with pytest.raises(FileUnreadable):
            load_dataset("/nonexistent/file.json")

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(MalformedRecord):
            load_dataset(str(p))

    def test_save_load_round_trip(self, small_ds, tmp_path):
        out = tmp_path / "copy.json"
        save_dataset(small_ds, str(out), meta={"version": "0"})
        again = load_dataset(str(out))
        assert again.by_id() == small_ds.by_id()
        assert json.load(open(out))["_meta"] == {"version": "0"}


class TestStatistics:
    def test_column_order(self, small_ds):
        stats = label_statistics(small_ds)
        assert [c.name for c in stats.columns] == [
            "train",
            "validation",
            "test/MIMIC-CXR",
            "test/CheXpert",
        ]

    def test_counts(self, small_ds):
        cols = {c.name: c for c in label_statistics(small_ds).columns}
        train = cols["train"]
        assert train.entity_counts == {
            "ANAT": 1,
            "CHAN-NC": 1,
            "OBS-DP": 1,
            "CHAN-DEV-DISA": 1,
        }
        assert train.total_entities == 4
        assert train.relation_counts == {"modify": 2}
        assert cols["validation"].entity_counts == {"OBS-DP": 2, "ANAT": 1}
        assert cols["validation"].relation_counts == {"modify": 1, "located_at": 1}
        assert cols["test/MIMIC-CXR"].entity_counts == {"OBS-DP": 2, "ANAT": 2}
        assert cols["test/CheXpert"].entity_counts == {
            "ANAT": 1,
            "OBS-DA": 1,
            "OBS-DP": 1,
            "OBS-U": 1,
        }
        assert cols["test/CheXpert"].relation_counts == {
            "located_at": 1,
            "suggestive_of": 1,
        }

    def test_percentages(self, small_ds):
        cols = {c.name: c for c in label_statistics(small_ds).columns}
        assert cols["train"].entity_pct("ANAT") == pytest.approx(25.0)
        assert cols["train"].relation_pct("modify") == pytest.approx(100.0)
        assert cols["validation"].entity_pct("OBS-DP") == pytest.approx(200.0 / 3)

    def test_anat_row_aggregates_subtree(self, small_ds):
        stats = label_statistics(small_ds)
        assert ENTITY_ROWS[0] == "ANAT"
        assert "ANAT-DP" not in ENTITY_ROWS
        for col in stats.columns:
            assert "ANAT-DP" not in col.entity_counts

    def test_json_shape(self, small_ds):
        blob = label_statistics(small_ds).to_json()
        assert blob["entity_rows"][0] == "ANAT"
        assert blob["relation_rows"] == ["modify", "located_at", "suggestive_of"]
        train = blob["columns"][0]
        assert train["name"] == "train"
        assert train["entities"]["ANAT"] == {"count": 1, "pct": 25.0}
        assert train["total_entities"] == 4
        assert train["relations"]["modify"] == {"count": 2, "pct": 100.0}

    def test_text_rendering(self, small_ds):
        text = label_statistics(small_ds).to_text()
        lines = text.splitlines()
        assert lines[0].split() == ["train", "validation", "test/MIMIC-CXR", "test/CheXpert"]
        anat_line = next(l for l in lines if l.startswith("ANAT"))
        assert "1 (25.0)" in anat_line
        assert any(l.startswith("Total Entities") for l in lines)
        assert any(l.startswith("Total Relations") for l in lines)
        # One decimal everywhere: a percentage like (25.00) never appears.
        assert "(25.00)" not in text

    def test_empty_split_absent(self, small_ds):
        stats = label_statistics(small_ds.subset("train"))
        assert [c.name for c in stats.columns] == ["train"]


class TestTokenLabeling:
    def test_projection(self, small_ds):
        lab = to_token_labeling(small_ds.by_id()["mimic-2"])
        assert lab.labels == (
            "OBS-DP",
            "OBS-DP",
            "NONE",
            "NONE",
            "ANAT-DP",
            "ANAT-DP",
            "ANAT-DP",
            "NONE",
        )

    def test_no_entities_all_none(self):
        g = parse_report("d", {"text": "all clear today"})
        assert to_token_labeling(g).labels == ("NONE",) * 3

    def test_same_label_overlap_merges(self):
        rec = {
            "text": "right lower lobe",
            "entities": {
                "1": {"tokens": "right lower", "label": "ANAT-DP", "start_ix": 0, "end_ix": 1, "relations": []},
                "2": {"tokens": "lower lobe", "label": "ANAT-DP", "start_ix": 1, "end_ix": 2, "relations": []},
            },
        }
        lab = to_token_labeling(parse_report("d", rec))
        assert lab.labels == ("ANAT-DP", "ANAT-DP", "ANAT-DP")

    def test_conflicting_overlap_raises(self):
        rec = {
            "text": "right lower lobe",
            "entities": {
                "1": {"tokens": "right lower", "label": "ANAT-DP", "start_ix": 0, "end_ix": 1, "relations": []},
                "2": {"tokens": "lower", "label": "OBS-DP", "start_ix": 1, "end_ix": 1, "relations": []},
            },
        }
        with pytest.raises(OverlapConflict, match="token 1"):
            to_token_labeling(parse_report("d", rec))


class TestKappa:
    def test_identical_is_exactly_one(self):
        rng = np.random.default_rng(2)
        labels = list(rng.choice(["A", "B", "C"], size=57))
        assert cohens_kappa(labels, list(labels)) == 1.0

    def test_single_label_identical(self):
        assert cohens_kappa(["A", "A", "A"], ["A", "A", "A"]) == 1.0

    def test_half_half_is_zero(self):
        k = cohens_kappa(["A", "A", "B", "B"], ["A", "B", "A", "B"])
        assert abs(k) <= 1e-9

    def test_hand_worked_value(self):
        # p_o = 2/3, p_e = 4/9, kappa = (2/9)/(5/9) = 0.4
        k = cohens_kappa(["x", "x", "y"], ["x", "y", "y"])
        assert k == pytest.approx(0.4, abs=1e-12)

    def test_disjoint_labels_negative(self):
        k = cohens_kappa(["A", "B"], ["B", "A"])
        assert k < 0

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            cohens_kappa(["A"], ["A", "B"])
        with pytest.raises(LengthMismatch):
            cohens_kappa([], [])

    def test_dataset_kappa_self(self, small_ds):
        assert dataset_kappa(small_ds, small_ds) == 1.0

    def test_dataset_kappa_perturbed(self, small_path):
        ds_a = load_dataset(small_path)
        doc = json.load(open(small_path))
        doc["chex-1"]["entities"]["2"]["label"] = "OBS-U"
        ds_b = parse_dataset(doc)
        k = dataset_kappa(ds_a, ds_b)
        assert 0.0 < k < 1.0

    def test_dataset_kappa_doc_mismatch(self, small_ds):
        other = Dataset([r for r in small_ds.reports if r.doc_id != "chex-2"])
        with pytest.raises(DocMismatch, match="chex-2"):
            dataset_kappa(small_ds, other)

    def test_accepts_token_labelings(self, small_ds):
        lab = to_token_labeling(small_ds.by_id()["mimic-2"])
        assert cohens_kappa(lab, lab) == 1.0
