"""Offline training of ternary-weight solutions.

Latent real-valued weights are quantized to {-1, 0, 1} by a symmetric dead-zone
threshold in the forward pass; gradients pass through the quantizer unchanged
(straight-through estimator). Optimization is plain full-batch gradient descent
on the softmax cross-entropy.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import ternary
from .ternary import N_HIDDEN, N_IN, N_OUT, TernarySolution
from .wine import Dataset

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    learning_rate: float = 0.5
    threshold: float = 0.3  # quantizer dead zone, latent-weight units
    batch_size: int = 0  # 0 means full batch
    target_train_accuracy: float = 0.96
    max_restarts: int = 20

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must be in (0, 1)")
        if not 0 < self.target_train_accuracy <= 1:
            raise ValueError("target_train_accuracy must be in (0, 1]")
        if self.epochs < 1 or self.max_restarts < 0 or self.batch_size < 0:
            raise ValueError("epochs >= 1, max_restarts >= 0, batch_size >= 0 required")


class TrainingFailure(RuntimeError):
    def __init__(self, seed: int, best_accuracy: float):
        super().__init__(
            f"seed {seed}: best train accuracy {best_accuracy:.4f} below target after restarts"
        )
        self.seed = seed
        self.best_accuracy = best_accuracy


def quantize(w: np.ndarray, threshold: float) -> np.ndarray:
    return np.where(w > threshold, 1, np.where(w < -threshold, -1, 0)).astype(int)


def _one_hot(labels: np.ndarray) -> np.ndarray:
    y = np.zeros((labels.shape[0], N_OUT))
    y[np.arange(labels.shape[0]), labels] = 1.0
    return y


def _loss_and_grads(w1, b1, w2, b2, x, y):
    z = x @ w1 + b1
    a = np.tanh(z)
    p = ternary.softmax(a @ w2 + b2)
    n = x.shape[0]
    loss = -np.sum(y * np.log(np.clip(p, 1e-300, None))) / n
    d_logits = (p - y) / n
    g_w2 = a.T @ d_logits
    g_b2 = d_logits.sum(axis=0)
    d_z = (d_logits @ w2.T) * (1.0 - a * a)
    g_w1 = x.T @ d_z
    g_b1 = d_z.sum(axis=0)
    return loss, g_w1, g_b1, g_w2, g_b2


@dataclass
class TrainTrace:
    ternary_loss: list
    latent_loss: list
    train_accuracy: list


def _train_attempt(rng: np.random.Generator, train: Dataset, cfg: TrainConfig):
    x, y = train.features, _one_hot(train.labels)
    w1 = rng.uniform(-1.0, 1.0, (N_IN, N_HIDDEN))
    w2 = rng.uniform(-1.0, 1.0, (N_HIDDEN, N_OUT))
    b1 = np.zeros(N_HIDDEN)
    b2 = np.zeros(N_OUT)
    trace = TrainTrace([], [], [])
    best = (-1.0, None)
    batch = cfg.batch_size or x.shape[0]
    for _ in range(cfg.epochs):
        order = np.arange(x.shape[0]) if batch >= x.shape[0] else rng.permutation(x.shape[0])
        for start in range(0, x.shape[0], batch):
            idx = order[start:start + batch]
            q1, q2 = quantize(w1, cfg.threshold), quantize(w2, cfg.threshold)
            _, g_w1, g_b1, g_w2, g_b2 = _loss_and_grads(q1, b1, q2, b2, x[idx], y[idx])
            # straight-through: the quantizer's gradient is taken as identity
            w1 -= cfg.learning_rate * g_w1
            w2 -= cfg.learning_rate * g_w2
            b1 -= cfg.learning_rate * g_b1
            b2 -= cfg.learning_rate * g_b2
        q1, q2 = quantize(w1, cfg.threshold), quantize(w2, cfg.threshold)
        tl = _loss_and_grads(q1, b1, q2, b2, x, y)[0]
        ll = _loss_and_grads(w1, b1, w2, b2, x, y)[0]
        acc = float(np.mean(np.argmax(np.tanh(x @ q1 + b1) @ q2 + b2, axis=1) == train.labels))
        trace.ternary_loss.append(float(tl))
        trace.latent_loss.append(float(ll))
        trace.train_accuracy.append(acc)
        # keep the latest epoch reaching the best accuracy so far
        if acc >= best[0]:
            best = (acc, (q1.copy(), b1.copy(), q2.copy(), b2.copy()))
    return best, trace


def train_one(
    seed: int, train: Dataset, cfg: TrainConfig = TrainConfig(), test: Dataset | None = None,
    return_trace: bool = False, entropy: tuple = (),
):
    """Train one solution; restarts with a fresh initialization until the target is met.

    The initialization stream is seeded by (*entropy, seed, attempt).
    """
    best_acc = -1.0
    for attempt in range(cfg.max_restarts + 1):
        rng = np.random.default_rng([*entropy, seed, attempt])
        (acc, params), trace = _train_attempt(rng, train, cfg)
        best_acc = max(best_acc, acc)
        if acc >= cfg.target_train_accuracy:
            q1, b1, q2, b2 = params
            net = TernarySolution(q1, b1, q2, b2, seed)
            test_acc = ternary.accuracy(net, test) if test is not None else None
            net = TernarySolution(
                q1, b1, q2, b2, seed, ternary.accuracy(net, train), test_acc,
                meta={"attempts": attempt + 1},
            )
            return (net, trace) if return_trace else net
        log.debug("seed %d attempt %d reached %.4f, restarting", seed, attempt, acc)
    raise TrainingFailure(seed, best_acc)


def generate_solutions(
    n: int = 300, base_seed: int = 0, train: Dataset | None = None,
    cfg: TrainConfig = TrainConfig(), test: Dataset | None = None, jobs: int = 1,
    entropy: tuple = (),
) -> list[TernarySolution]:
    if n < 1:
        raise ValueError("n must be >= 1")
    seeds = list(range(base_seed, base_seed + n))
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(train_one, s, train, cfg, test, False, entropy) for s in seeds]
            return [f.result() for f in futures]
    return [train_one(s, train, cfg, test, entropy=entropy) for s in seeds]


def duplicate_groups(solutions: list[TernarySolution]) -> list[list[int]]:
    """Seeds sharing identical (w1, w2), as groups of two or more."""
    groups: dict[bytes, list[int]] = {}
    for s in solutions:
        key = s.w1.tobytes() + s.w2.tobytes()
        groups.setdefault(key, []).append(s.seed)
    return [g for g in groups.values() if len(g) > 1]


def write_solutions(directory: str | Path, solutions: list[TernarySolution], cfg: TrainConfig,
                    extra: dict | None = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for s in solutions:
        s.save(directory / f"solution_{s.seed}.json")
    manifest = {
        "train_config": asdict(cfg),
        "seeds": [s.seed for s in solutions],
        "train_accuracy": {str(s.seed): s.train_accuracy for s in solutions},
        "test_accuracy": {str(s.seed): s.test_accuracy for s in solutions},
        "duplicates": duplicate_groups(solutions),
    }
    if extra:
        manifest.update(extra)
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return path


def read_solutions(directory: str | Path) -> list[TernarySolution]:
    directory = Path(directory)
    manifest = directory / "manifest.json"
    if not manifest.exists():
        raise FileNotFoundError(f"no manifest.json in {directory}; run the train command first")
    seeds = json.loads(manifest.read_text())["seeds"]
    return [TernarySolution.load(directory / f"solution_{s}.json") for s in seeds]
