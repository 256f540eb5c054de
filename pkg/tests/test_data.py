import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qae_peptide.data import (
    DatasetError, PeptideDataset, filter_by_length, load_dataset, make_split, positional_entropy,
    synthesize_corpus, synthesize_labeled, write_dataset,
)


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_valid(tmp_path):
    ds = load_dataset(write(tmp_path, "id,sequence,label\na,ACD,1\nb,WY,-1\nc,KK,0\n"))
    assert len(ds) == 3 and list(ds.labels) == [1, -1, -1]


def test_load_rejects_noncanonical(tmp_path):
    ds = load_dataset(write(tmp_path, "id,sequence,label\na,ACD,1\nb,ABC,1\n"))
    assert ds.ids == ["a"]
    assert ds.provenance["rejected"] == [(3, "b", "B")]


def test_load_unlabeled(tmp_path):
    ds = load_dataset(write(tmp_path, "id,sequence\na,ACD\n"))
    assert ds.labels is None


@pytest.mark.parametrize("text", ["name,seq\na,ACD\n", "id,sequence,label\na,ACD,2\n"])
def test_load_errors(tmp_path, text):
    with pytest.raises(DatasetError):
        load_dataset(write(tmp_path, text))


def test_missing_file(tmp_path):
    with pytest.raises(DatasetError):
        load_dataset(tmp_path / "nope.csv")


def test_filter_examples():
    ds = PeptideDataset(["a", "b", "c"], ["ACD", "ACDEFG", "A" * 60])
    assert filter_by_length(ds, 50).ids == ["a", "b"]
    assert filter_by_length(ds, 100).ids == ds.ids
    empty = filter_by_length(ds, 2)
    assert len(empty) == 0 and empty.provenance["filtered"] == 3


@given(st.lists(st.integers(1, 30), max_size=30), st.integers(1, 30))
def test_filter_idempotent(lengths, max_len):
    ds = PeptideDataset([str(i) for i in range(len(lengths))], ["A" * n for n in lengths])
    once = filter_by_length(ds, max_len)
    twice = filter_by_length(once, max_len)
    assert once.ids == twice.ids
    assert all(len(s) <= max_len for s in once.sequences)


def test_provenance_accounting(tmp_path):
    rows = ["id,sequence,label", "a,ACD,1", "b,AXC,1", "c,ACDEFGHIK,-1", "d,W,-1", "e,ZZ,1"]
    ds = filter_by_length(load_dataset(write(tmp_path, "\n".join(rows) + "\n")), 5)
    p = ds.provenance
    assert p["loaded"] == len(ds) + len(p["rejected"]) + p["filtered"] == 5


def test_round_trip(tmp_path):
    ds = synthesize_labeled(20, seed=3)
    write_dataset(ds, tmp_path / "x.csv")
    back = load_dataset(tmp_path / "x.csv")
    assert back.ids == ds.ids and back.sequences == ds.sequences
    assert np.array_equal(back.labels, ds.labels)
    assert json.loads((tmp_path / "x.provenance.json").read_text())["seed"] == 3


def test_synthesize_examples():
    assert len(synthesize_corpus(0)) == 0
    a, b = synthesize_corpus(30, seed=5), synthesize_corpus(30, seed=5)
    assert a.sequences == b.sequences
    assert all(8 <= len(s) <= 12 for s in a.sequences)


def test_planted_entropy_below_uniform():
    planted = positional_entropy(synthesize_corpus(1000, (12, 12), seed=1).sequences, 12)
    uniform = positional_entropy(synthesize_corpus(1000, (12, 12), seed=1, mode="uniform").sequences, 12)
    assert np.all(uniform - planted > 1.0)


def test_synthesize_labeled_balanced():
    ds = synthesize_labeled(101, seed=2)
    assert abs(int(np.sum(ds.labels == 1)) - int(np.sum(ds.labels == -1))) <= 1


def test_split_fraction():
    ds = synthesize_labeled(100, seed=4)
    split = make_split(ds, "fraction", seed=0, test_fraction=0.2)
    assert len(split.train) == 80 and len(split.test) == 20
    assert set(split.train).isdisjoint(split.test)
    assert abs(np.sum(ds.labels[split.test] == 1) - 10) <= 1
    again = make_split(ds, "fraction", seed=0, test_fraction=0.2)
    assert np.array_equal(split.test, again.test)


def test_split_counts_table_row():
    labels = np.array([1] * 1400 + [-1] * 1378)
    ds = PeptideDataset([str(i) for i in range(2778)], ["A"] * 2778, labels)
    split = make_split(ds, "counts", seed=0, test_counts={1: 487, -1: 347})
    assert np.sum(labels[split.test] == 1) == 487 and np.sum(labels[split.test] == -1) == 347
    assert len(split.train) + len(split.test) == 2778
    with pytest.raises(DatasetError):
        make_split(ds, "counts", test_counts={1: 5000, -1: 1})


def test_split_kfold():
    ds = synthesize_labeled(50, seed=5)
    split = make_split(ds, "kfold", seed=1, k=5)
    assert sorted(set(split.folds)) == [0, 1, 2, 3, 4]
