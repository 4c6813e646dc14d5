"""Octamer datasets: parsing, merge/dedup, balancing, one-hot, PCA, rescaling, splits."""
from __future__ import annotations

import csv
import json
import logging
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

ALPHABET = "ACDEFGHIKLMNPQRSTVWY"
_INDEX = {a: i for i, a in enumerate(ALPHABET)}
OCTAMER_LEN = 8
ONE_HOT_DIM = OCTAMER_LEN * len(ALPHABET)

# merge order is part of the contract: first occurrence wins
SOURCES = (
    ("746", "746Data.txt"),
    ("1625", "1625Data.txt"),
    ("schilling", "schillingData.txt"),
    ("impens", "impensData.txt"),
)
DATA_ENV = "HIV_DATA_DIR"
SNAPSHOT_VERSION = 1


class DataError(ValueError):
    pass


class DatasetMissing(DataError, FileNotFoundError):
    pass


@dataclass(frozen=True)
class SequenceRecord:
    octamer: str
    label: int
    source: str = ""

    def __post_init__(self):
        if len(self.octamer) != OCTAMER_LEN:
            raise DataError(f"octamer {self.octamer!r} has length {len(self.octamer)}, expected 8")
        bad = [c for c in self.octamer if c not in _INDEX]
        if bad:
            raise DataError(f"octamer {self.octamer!r} has non-standard residue(s) {''.join(bad)!r}")
        if self.label not in (-1, 1):
            raise DataError(f"label must be -1 or +1, got {self.label}")


# ---------------------------------------------------------------------------
# parsing and merging
# ---------------------------------------------------------------------------

def parse_lines(lines: Iterable[str], source: str = "", where: str = "<input>") -> list[SequenceRecord]:
    out = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2:
            raise DataError(f"{where}:{lineno}: expected 'OCTAMER,LABEL', got {raw.rstrip()!r}")
        seq, lab = parts
        if lab not in ("1", "-1", "+1"):
            raise DataError(f"{where}:{lineno}: bad label {lab!r}")
        try:
            out.append(SequenceRecord(seq.upper(), int(lab), source))
        except DataError as e:
            raise DataError(f"{where}:{lineno}: {e}") from None
    return out


def parse_dataset_file(path, source: str | None = None) -> list[SequenceRecord]:
    path = Path(path)
    if source is None:
        source = next((s for s, name in SOURCES if name == path.name), path.stem)
    with open(path, encoding="utf-8") as fh:
        return parse_lines(fh, source, str(path))


def data_dir(path=None) -> Path:
    """Directory holding the four source files (argument, else ``$HIV_DATA_DIR``)."""
    d = path or os.environ.get(DATA_ENV)
    if not d:
        raise DatasetMissing(f"dataset directory not given; set {DATA_ENV} to the folder with "
                             + ", ".join(name for _, name in SOURCES))
    d = Path(d)
    missing = [name for _, name in SOURCES if not (d / name).is_file()]
    if missing:
        raise DatasetMissing(f"{d}: missing {', '.join(missing)}")
    return d


def load_sources(path=None) -> list[list[SequenceRecord]]:
    d = data_dir(path)
    return [parse_dataset_file(d / name, src) for src, name in SOURCES]


def merge_and_dedup(lists: Sequence[Sequence[SequenceRecord]],
                    conflicts: list | None = None) -> list[SequenceRecord]:
    """Concatenate in the given order and keep the first record per octamer.

    Label disagreements are logged and, if ``conflicts`` is given, appended to it
    as ``(kept, dropped)`` pairs.
    """
    seen: dict[str, SequenceRecord] = {}
    out = []
    for recs in lists:
        for r in recs:
            first = seen.get(r.octamer)
            if first is None:
                seen[r.octamer] = r
                out.append(r)
            elif first.label != r.label:
                log.warning("label conflict for %s: kept %+d (%s), dropped %+d (%s)",
                            r.octamer, first.label, first.source, r.label, r.source)
                if conflicts is not None:
                    conflicts.append((first, r))
    return out


def class_counts(records: Sequence[SequenceRecord]) -> dict[int, int]:
    neg = sum(1 for r in records if r.label == -1)
    return {-1: neg, 1: len(records) - neg}


def balance_undersample(records: Sequence[SequenceRecord], seed: int) -> list[SequenceRecord]:
    """Keep the minority class and a uniform sample of the majority, in input order."""
    counts = class_counts(records)
    if min(counts.values()) == 0:
        raise DataError("cannot balance: one class is empty")
    minority = min(counts, key=lambda k: (counts[k], k))
    major_idx = [i for i, r in enumerate(records) if r.label != minority]
    rng = np.random.default_rng(seed)
    keep = set(rng.choice(major_idx, size=counts[minority], replace=False).tolist())
    return [r for i, r in enumerate(records) if r.label == minority or i in keep]


# ---------------------------------------------------------------------------
# one-hot
# ---------------------------------------------------------------------------

def one_hot(record: SequenceRecord | str) -> np.ndarray:
    s = record.octamer if isinstance(record, SequenceRecord) else record
    if len(s) != OCTAMER_LEN:
        raise DataError(f"octamer {s!r} has length {len(s)}")
    v = np.zeros(ONE_HOT_DIM)
    for p, c in enumerate(s):
        if c not in _INDEX:
            raise DataError(f"invalid residue {c!r} in {s!r}")
        v[20 * p + _INDEX[c]] = 1.0
    return v


def decode(vec) -> str:
    v = np.asarray(vec).reshape(OCTAMER_LEN, len(ALPHABET))
    if not np.all(v.sum(axis=1) == 1):
        raise DataError("not a one-hot octamer encoding")
    return "".join(ALPHABET[i] for i in np.argmax(v, axis=1))


def encode_records(records: Sequence[SequenceRecord]) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([one_hot(r) for r in records]) if records else np.zeros((0, ONE_HOT_DIM))
    y = np.array([r.label for r in records], dtype=int)
    return x, y


# ---------------------------------------------------------------------------
# PCA and rescaling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PCAModel:
    mean: np.ndarray
    components: np.ndarray  # (d, k), orthonormal columns
    eigenvalues: np.ndarray  # (k,)

    @property
    def k(self) -> int:
        return self.components.shape[1]


def pca_fit(x, k: int) -> PCAModel:
    x = np.asarray(x, dtype=float)
    if not 1 <= k <= x.shape[1]:
        raise DataError(f"k={k} outside [1, {x.shape[1]}]")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / max(x.shape[0] - 1, 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1][:k]
    vals, vecs = vals[order], vecs[:, order]
    rank = int(np.sum(vals > 1e-12 * max(vals[0], 1e-300)))
    if rank < k:
        warnings.warn(f"PCA: requested {k} components but training data has rank {rank}; "
                      "padding with zero-variance directions", RuntimeWarning, stacklevel=2)
    # sign convention: largest-magnitude entry of each component is positive
    pivot = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[pivot, np.arange(k)])
    signs[signs == 0] = 1.0
    return PCAModel(mean, vecs * signs, np.clip(vals, 0.0, None))


def pca_transform(model: PCAModel, rows) -> np.ndarray:
    return (np.asarray(rows, dtype=float) - model.mean) @ model.components


@dataclass(frozen=True)
class FeatureRange:
    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def fit(cls, train) -> "FeatureRange":
        train = np.asarray(train, dtype=float)
        return cls(train.min(axis=0), train.max(axis=0))


def rescale_for_embedding(features, kind: str, rng: FeatureRange) -> np.ndarray:
    """Map angle/ZZ features to [0, pi] using training min/max; amplitude passes through."""
    f = np.asarray(features, dtype=float)
    if kind == "amplitude":
        return f.copy()
    if kind not in ("angle", "zz"):
        raise DataError(f"unknown embedding kind {kind!r}")
    span = rng.hi - rng.lo
    flat = span <= 0
    safe = np.where(flat, 1.0, span)
    out = np.clip((f - rng.lo) / safe, 0.0, 1.0) * np.pi
    out[..., flat] = np.pi / 2
    return out


# ---------------------------------------------------------------------------
# splits
# ---------------------------------------------------------------------------

@dataclass
class Splits:
    x_train: np.ndarray
    y_train: np.ndarray
    x_val: np.ndarray
    y_val: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray

    def sizes(self) -> tuple[int, int, int]:
        return len(self.y_train), len(self.y_val), len(self.y_test)

    def map(self, fn) -> "Splits":
        """Apply a row-wise feature transform to every split."""
        return Splits(fn(self.x_train), self.y_train, fn(self.x_val), self.y_val, fn(self.x_test), self.y_test)


def split_indices(labels, test_ratio: float = 0.2, val_fraction: float = 0.1,
                  seed: int = 0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stratified (train, val, test) index arrays; val is carved from train."""
    y = np.asarray(labels)
    if not 0 < test_ratio < 1 or not 0 <= val_fraction < 1:
        raise DataError("split ratios must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    parts = ([], [], [])
    for cls in (-1, 1):
        idx = np.flatnonzero(y == cls)
        n_test = int(round(len(idx) * test_ratio))
        n_val = int(round((len(idx) - n_test) * val_fraction))
        if len(idx) - n_test - n_val < 1 or n_test < 1 or (val_fraction > 0 and n_val < 1):
            raise DataError(f"class {cls:+d} has {len(idx)} samples: too few to stratify")
        idx = rng.permutation(idx)
        parts[2].append(idx[:n_test])
        parts[1].append(idx[n_test:n_test + n_val])
        parts[0].append(idx[n_test + n_val:])
    return tuple(np.sort(np.concatenate(p)) for p in parts)


def split(x, y, test_ratio: float = 0.2, val_fraction: float = 0.1, seed: int = 0) -> Splits:
    x, y = np.asarray(x), np.asarray(y)
    tr, va, te = split_indices(y, test_ratio, val_fraction, seed)
    return Splits(x[tr], y[tr], x[va], y[va], x[te], y[te])


# ---------------------------------------------------------------------------
# synthetic stand-in
# ---------------------------------------------------------------------------

def synthetic_records(n_per_class: int = 300, seed: int = 0, signal: float = 0.6) -> list[SequenceRecord]:
    """Labelled toy octamers with a cleavage-like motif; NOT the UCI data.

    Positives prefer hydrophobic residues around the scissile bond (positions
    3 and 4); ``signal`` is the probability each of those positions follows
    the motif. Negatives are uniform.
    """
    rng = np.random.default_rng(seed)
    motif = "FLMYV"
    out: list[SequenceRecord] = []
    seen: set[str] = set()
    for label in (1, -1):
        made = 0
        while made < n_per_class:
            s = [ALPHABET[i] for i in rng.integers(0, 20, size=8)]
            if label == 1:
                for p in (3, 4):
                    if rng.random() < signal:
                        s[p] = motif[rng.integers(len(motif))]
            o = "".join(s)
            if o in seen:
                continue
            seen.add(o)
            out.append(SequenceRecord(o, label, "synthetic"))
            made += 1
    order = rng.permutation(len(out))
    return [out[i] for i in order]


# ---------------------------------------------------------------------------
# snapshot and export
# ---------------------------------------------------------------------------

@dataclass
class DatasetSnapshot:
    records: list[SequenceRecord]
    counts: dict[str, int]
    seed: int
    origin: str = "uci"
    alphabet: str = ALPHABET
    conflicts: int = 0
    version: int = field(default=SNAPSHOT_VERSION)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return encode_records(self.records)

    def to_json(self) -> str:
        return json.dumps({
            "version": self.version, "origin": self.origin, "seed": self.seed,
            "alphabet": self.alphabet, "counts": self.counts, "conflicts": self.conflicts,
            "records": [[r.octamer, r.label, r.source] for r in self.records],
        }, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "DatasetSnapshot":
        d = json.loads(text)
        if d.get("version") != SNAPSHOT_VERSION:
            raise DataError(f"unsupported snapshot version {d.get('version')}")
        if d["alphabet"] != ALPHABET:
            raise DataError("snapshot uses a different residue order")
        recs = [SequenceRecord(o, int(l), s) for o, l, s in d["records"]]
        return cls(recs, d["counts"], d["seed"], d["origin"], d["alphabet"], d.get("conflicts", 0))

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json())
        return path

    @classmethod
    def load(cls, path) -> "DatasetSnapshot":
        return cls.from_json(Path(path).read_text())


def build_snapshot(path=None, seed: int = 0) -> DatasetSnapshot:
    """Run the full preprocessing pipeline on the four source files."""
    lists = load_sources(path)
    conflicts: list = []
    merged = merge_and_dedup(lists, conflicts)
    cc = class_counts(merged)
    balanced = balance_undersample(merged, seed)
    counts = {"parsed": sum(len(l) for l in lists), "unique": len(merged),
              "negative": cc[-1], "positive": cc[1], "balanced": len(balanced)}
    return DatasetSnapshot(balanced, counts, seed, "uci", conflicts=len(conflicts))


def synthetic_snapshot(n_per_class: int = 300, seed: int = 0) -> DatasetSnapshot:
    recs = synthetic_records(n_per_class, seed)
    cc = class_counts(recs)
    counts = {"parsed": len(recs), "unique": len(recs), "negative": cc[-1],
              "positive": cc[1], "balanced": len(recs)}
    return DatasetSnapshot(recs, counts, seed, "synthetic")


def export_csv(x, y, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    x = np.asarray(x)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label"] + [f"f{i}" for i in range(x.shape[1])])
        for row, lab in zip(x, y):
            w.writerow([int(lab)] + [repr(float(v)) if not float(v).is_integer() else int(v) for v in row])
    return path
