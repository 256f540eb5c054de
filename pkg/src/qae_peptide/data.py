"""Peptide dataset loading, length filtering, splits and synthetic corpora."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .encoding import AMINO_ACIDS

CANONICAL = frozenset(AMINO_ACIDS)


class DatasetError(ValueError):
    pass


@dataclass
class PeptideDataset:
    ids: list
    sequences: list
    labels: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.ids) != len(self.sequences):
            raise DatasetError("ids and sequences differ in length")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=int)
            if len(self.labels) != len(self.ids):
                raise DatasetError("labels and sequences differ in length")

    def __len__(self):
        return len(self.ids)

    @property
    def max_length(self) -> int:
        return max((len(s) for s in self.sequences), default=0)

    def take(self, indices) -> "PeptideDataset":
        indices = list(indices)
        return replace(
            self,
            ids=[self.ids[i] for i in indices],
            sequences=[self.sequences[i] for i in indices],
            labels=None if self.labels is None else self.labels[indices],
            provenance=dict(self.provenance),
        )


def _parse_label(raw: str, row: int) -> int:
    raw = raw.strip()
    if raw in ("1", "+1"):
        return 1
    if raw in ("-1", "0"):
        return -1
    raise DatasetError(f"row {row}: bad label {raw!r} (expected 1/-1 or 1/0)")


def load_dataset(path) -> PeptideDataset:
    """Read an ``id,sequence[,label]`` CSV.

    Rows with non-canonical residues are skipped and listed in
    ``provenance["rejected"]`` as ``(row, id, residue)``; row numbers count the
    header as row 1.
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"{path}: no such file")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip().lower() for h in next(reader, [])]
        if header[:2] != ["id", "sequence"] or header[2:] not in ([], ["label"]):
            raise DatasetError(f"{path}: header must be id,sequence[,label], got {header}")
        has_label = len(header) == 3
        ids, seqs, labels, rejected = [], [], [], []
        n_rows = 0
        for row_no, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            n_rows += 1
            if len(row) != len(header):
                raise DatasetError(f"{path}: row {row_no} has {len(row)} fields")
            sid, seq = row[0].strip(), row[1].strip().upper()
            bad = next((c for c in seq if c not in CANONICAL), None)
            if bad is not None or not seq:
                rejected.append((row_no, sid, bad or ""))
                continue
            ids.append(sid)
            seqs.append(seq)
            if has_label:
                labels.append(_parse_label(row[2], row_no))
    provenance = {"source": str(path), "loaded": n_rows, "rejected": rejected,
                  "filtered": 0, "max_len": None}
    return PeptideDataset(ids, seqs, np.array(labels, dtype=int) if has_label else None, provenance)


def write_dataset(ds: PeptideDataset, path) -> None:
    """Write the CSV plus a ``<name>.provenance.json`` sidecar."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if ds.labels is None:
            w.writerow(["id", "sequence"])
            w.writerows(zip(ds.ids, ds.sequences))
        else:
            w.writerow(["id", "sequence", "label"])
            w.writerows(zip(ds.ids, ds.sequences, (int(v) for v in ds.labels)))
    sidecar = path.with_name(path.stem + ".provenance.json")
    sidecar.write_text(json.dumps(ds.provenance, indent=1, default=str) + "\n")


def filter_by_length(ds: PeptideDataset, max_len: int) -> PeptideDataset:
    if max_len < 1:
        raise DatasetError("max_len must be >= 1")
    keep = [i for i, s in enumerate(ds.sequences) if len(s) <= max_len]
    out = ds.take(keep)
    out.provenance["filtered"] = ds.provenance.get("filtered", 0) + len(ds) - len(keep)
    out.provenance["max_len"] = max_len
    return out


def _position_profiles(rng, max_len: int, n_preferred: int = 3):
    return [rng.choice(len(AMINO_ACIDS), n_preferred, replace=False) for _ in range(max_len)]


def _draw(rng, lengths, profiles, bias: float) -> list[str]:
    out = []
    for length in lengths:
        chars = []
        for p in range(length):
            if profiles is not None and rng.random() < bias:
                chars.append(AMINO_ACIDS[rng.choice(profiles[p])])
            else:
                chars.append(AMINO_ACIDS[rng.integers(len(AMINO_ACIDS))])
        out.append("".join(chars))
    return out


def synthesize_corpus(n_sequences: int, length_range=(8, 12), seed: int = 0,
                      mode: str = "planted", bias: float = 0.8) -> PeptideDataset:
    """Unlabeled synthetic peptides.

    ``uniform`` draws residues i.i.d.; ``planted`` draws each position from a
    small position-specific residue set with probability ``bias``.
    """
    lo, hi = length_range
    if not 1 <= lo <= hi:
        raise DatasetError("bad length range")
    if mode not in ("uniform", "planted"):
        raise DatasetError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    profiles = _position_profiles(rng, hi) if mode == "planted" else None
    lengths = rng.integers(lo, hi + 1, size=n_sequences)
    seqs = _draw(rng, lengths, profiles, bias)
    ids = [f"s{i:06d}" for i in range(n_sequences)]
    prov = {"source": f"synthetic:{mode}", "seed": seed, "loaded": n_sequences,
            "rejected": [], "filtered": 0, "max_len": hi}
    return PeptideDataset(ids, seqs, None, prov)


def synthesize_labeled(n_sequences: int, length_range=(8, 12), seed: int = 0,
                       bias: float = 0.6, label_noise: float = 0.0) -> PeptideDataset:
    """Balanced two-class peptides whose labels follow class-specific positional profiles."""
    lo, hi = length_range
    rng = np.random.default_rng(seed)
    profiles = {c: _position_profiles(rng, hi) for c in (1, -1)}
    labels = np.array([1, -1] * (n_sequences // 2) + [1] * (n_sequences % 2))
    labels = labels[rng.permutation(n_sequences)]
    seqs = []
    for c in labels:
        length = int(rng.integers(lo, hi + 1))
        seqs += _draw(rng, [length], profiles[int(c)], bias)
    if label_noise:
        flip = rng.random(n_sequences) < label_noise
        labels = np.where(flip, -labels, labels)
    ids = [f"p{i:05d}" for i in range(n_sequences)]
    prov = {"source": "synthetic:labeled", "seed": seed, "loaded": n_sequences,
            "rejected": [], "filtered": 0, "max_len": hi}
    return PeptideDataset(ids, seqs, labels, prov)


def positional_entropy(sequences, max_len: int) -> np.ndarray:
    """Empirical residue entropy (bits) per position over sequences long enough to reach it."""
    out = np.zeros(max_len)
    for p in range(max_len):
        col = [s[p] for s in sequences if len(s) > p]
        if not col:
            continue
        _, counts = np.unique(col, return_counts=True)
        prob = counts / counts.sum()
        out[p] = float(-(prob * np.log2(prob)).sum())
    return out


@dataclass
class SplitSpec:
    train: np.ndarray | None = None
    test: np.ndarray | None = None
    folds: np.ndarray | None = None


def make_split(ds: PeptideDataset, mode: str = "fraction", seed: int = 0,
               test_fraction: float = 0.2, test_counts: dict | None = None,
               k: int = 5) -> SplitSpec:
    """Train/test or k-fold assignment.

    ``fraction`` splits each class by ``test_fraction``; ``counts`` takes exactly
    ``test_counts[label]`` test samples per class; ``kfold`` returns stratified folds.
    """
    rng = np.random.default_rng(seed)
    n = len(ds)
    labels = ds.labels if ds.labels is not None else np.ones(n, dtype=int)
    if mode == "kfold":
        from .svm import stratified_kfold
        return SplitSpec(folds=stratified_kfold(labels, k, seed))
    test = []
    for c in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == c))
        if mode == "fraction":
            take = int(math.floor(test_fraction * len(members) + 0.5))
        elif mode == "counts":
            if test_counts is None or int(c) not in test_counts:
                raise DatasetError(f"no test count for class {c}")
            take = int(test_counts[int(c)])
            if take > len(members):
                raise DatasetError(f"class {c} has {len(members)} samples, {take} requested")
        else:
            raise DatasetError(f"unknown split mode {mode!r}")
        test.extend(members[:take].tolist())
    test = np.sort(np.array(test, dtype=int))
    train = np.setdiff1d(np.arange(n), test)
    return SplitSpec(train=train, test=test)
