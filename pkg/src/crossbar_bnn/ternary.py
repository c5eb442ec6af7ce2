"""The fixed 13-6-3 ternary-weight perceptron and its software forward pass."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .wine import Dataset

N_IN, N_HIDDEN, N_OUT = 13, 6, 3


@dataclass(frozen=True)
class TernarySolution:
    w1: np.ndarray  # (13, 6) in {-1, 0, 1}
    b1: np.ndarray  # (6,)
    w2: np.ndarray  # (6, 3) in {-1, 0, 1}
    b2: np.ndarray  # (3,)
    seed: int = 0
    train_accuracy: float | None = None
    test_accuracy: float | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        w1 = np.asarray(self.w1, dtype=int)
        w2 = np.asarray(self.w2, dtype=int)
        if w1.shape != (N_IN, N_HIDDEN) or w2.shape != (N_HIDDEN, N_OUT):
            raise ValueError(f"bad weight shapes {w1.shape}, {w2.shape}")
        if not (np.isin(w1, (-1, 0, 1)).all() and np.isin(w2, (-1, 0, 1)).all()):
            raise ValueError("weights must be ternary")
        b1 = np.asarray(self.b1, dtype=float).reshape(N_HIDDEN)
        b2 = np.asarray(self.b2, dtype=float).reshape(N_OUT)
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "w2", w2)
        object.__setattr__(self, "b1", b1)
        object.__setattr__(self, "b2", b2)

    @classmethod
    def zeros(cls, seed: int = 0) -> "TernarySolution":
        return cls(
            np.zeros((N_IN, N_HIDDEN), int), np.zeros(N_HIDDEN),
            np.zeros((N_HIDDEN, N_OUT), int), np.zeros(N_OUT), seed,
        )

    def same_weights(self, other: "TernarySolution") -> bool:
        return np.array_equal(self.w1, other.w1) and np.array_equal(self.w2, other.w2)

    def to_dict(self) -> dict:
        return {
            "seed": int(self.seed),
            "w1": self.w1.tolist(),
            "b1": [float(v) for v in self.b1],
            "w2": self.w2.tolist(),
            "b2": [float(v) for v in self.b2],
            "train_accuracy": self.train_accuracy,
            "test_accuracy": self.test_accuracy,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TernarySolution":
        return cls(
            np.array(d["w1"], dtype=int), np.array(d["b1"], dtype=float),
            np.array(d["w2"], dtype=int), np.array(d["b2"], dtype=float),
            int(d.get("seed", 0)), d.get("train_accuracy"), d.get("test_accuracy"),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "TernarySolution":
        return cls.from_dict(json.loads(Path(path).read_text()))


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def forward(net: TernarySolution, x: np.ndarray):
    """Return (z, a, probs) for one sample or a batch of samples."""
    x = np.asarray(x, dtype=float)
    z = x @ net.w1 + net.b1
    a = np.tanh(z)
    probs = softmax(a @ net.w2 + net.b2)
    return z, a, probs


def logits(net: TernarySolution, x: np.ndarray) -> np.ndarray:
    a = np.tanh(np.asarray(x, dtype=float) @ net.w1 + net.b1)
    return a @ net.w2 + net.b2


def predict(net: TernarySolution, x: np.ndarray):
    # np.argmax returns the first maximum, i.e. ties go to the lowest class index
    return np.argmax(logits(net, x), axis=-1)


def accuracy(net: TernarySolution, ds: Dataset) -> float:
    if ds.n_samples == 0:
        raise ValueError("accuracy of an empty dataset is undefined")
    return float(np.mean(predict(net, ds.features) == ds.labels))
