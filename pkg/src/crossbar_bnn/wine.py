"""Loading, normalization and splitting of the UCI Wine dataset."""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

N_FEATURES = 13
N_CLASSES = 3
N_SAMPLES = 178
N_TRAIN = 148
N_TEST = 30
# per-class sample counts of the UCI distribution, used as an integrity check
UCI_CLASS_COUNTS = (59, 71, 48)


class WineParseError(ValueError):
    """Raised for a malformed Wine CSV file."""


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # (n_samples, 13)
    labels: np.ndarray  # (n_samples,), 0-based class index
    indices: np.ndarray | None = None  # positions in the full dataset, if a subset

    @property
    def n_samples(self) -> int:
        return int(self.labels.shape[0])

    def class_counts(self) -> tuple[int, ...]:
        return tuple(int(c) for c in np.bincount(self.labels, minlength=N_CLASSES))

    def to_dict(self) -> dict:
        out = {
            "features": self.features.tolist(),
            "labels": self.labels.tolist(),
        }
        if self.indices is not None:
            out["indices"] = self.indices.tolist()
        return out


def default_wine_path() -> Path:
    return Path(str(resources.files("crossbar_bnn") / "data" / "wine.data"))


def load_wine(path: str | Path | None = None) -> Dataset:
    """Parse a label-first UCI Wine CSV (14 comma-separated fields per row).

    Labels 1..3 are remapped to 0..2. Blank lines are ignored.
    """
    path = Path(path) if path is not None else default_wine_path()
    text = path.read_text()
    rows: list[list[float]] = []
    labels: list[int] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.strip().split(",")
        if len(fields) != N_FEATURES + 1:
            raise WineParseError(
                f"{path}:{lineno}: expected {N_FEATURES + 1} fields, got {len(fields)}"
            )
        try:
            label = int(fields[0])
            values = [float(f) for f in fields[1:]]
        except ValueError as exc:
            raise WineParseError(f"{path}:{lineno}: non-numeric field ({exc})") from None
        if label not in (1, 2, 3):
            raise WineParseError(f"{path}:{lineno}: class label {label} not in 1..3")
        labels.append(label - 1)
        rows.append(values)
    if not rows:
        raise WineParseError(f"{path}: no data rows")
    return Dataset(np.array(rows, dtype=float), np.array(labels, dtype=int))


def check_integrity(ds: Dataset) -> None:
    """Raise if a full Wine dataset does not match the UCI class histogram."""
    if ds.n_samples != N_SAMPLES or ds.class_counts() != UCI_CLASS_COUNTS:
        raise WineParseError(
            f"unexpected Wine data: {ds.n_samples} samples, class counts {ds.class_counts()}"
        )


def normalize(ds: Dataset) -> Dataset:
    """Min-max scale every column to [0, 1]; constant columns become 0."""
    x = ds.features
    lo = x.min(axis=0)
    span = x.max(axis=0) - lo
    safe = np.where(span > 0, span, 1.0)
    scaled = np.where(span > 0, (x - lo) / safe, 0.0)
    return Dataset(scaled, ds.labels.copy(), ds.indices)


def split(ds: Dataset, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Stratified, seeded 148/30 train/test split of the full dataset."""
    if ds.n_samples != N_SAMPLES:
        raise ValueError(f"split expects {N_SAMPLES} samples, got {ds.n_samples}")
    rng = np.random.default_rng(seed)
    counts = np.bincount(ds.labels, minlength=N_CLASSES)
    # largest-remainder allocation of the 30 test slots across classes
    exact = counts * N_TEST / N_SAMPLES
    n_test = np.floor(exact).astype(int)
    for c in np.argsort(-(exact - n_test), kind="stable")[: N_TEST - n_test.sum()]:
        n_test[c] += 1

    test_idx = []
    for c in range(N_CLASSES):
        members = np.flatnonzero(ds.labels == c)
        test_idx.extend(rng.permutation(members)[: n_test[c]].tolist())
    test_idx = np.sort(np.array(test_idx, dtype=int))
    mask = np.ones(ds.n_samples, dtype=bool)
    mask[test_idx] = False
    train_idx = np.flatnonzero(mask)
    return subset(ds, train_idx), subset(ds, test_idx)


def subset(ds: Dataset, idx: np.ndarray) -> Dataset:
    base = ds.indices if ds.indices is not None else np.arange(ds.n_samples)
    return Dataset(ds.features[idx], ds.labels[idx], base[idx])


def prepared(path: str | Path | None = None, seed: int = 0) -> tuple[Dataset, Dataset, Dataset]:
    """Load, check, normalize over all samples, then split. Returns (full, train, test)."""
    full = load_wine(path)
    check_integrity(full)
    full = normalize(full)
    train, test = split(full, seed)
    return full, train, test


def export_split(path: str | Path, train: Dataset, test: Dataset) -> None:
    Path(path).write_text(json.dumps({"train": train.to_dict(), "test": test.to_dict()}))
