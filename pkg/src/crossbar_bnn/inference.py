"""Hardware inference from a measured conductance map, and the superposition check.

Inference uses the serial model: a column current is the sum over rows of input
voltage times the conductance read for that cell. `superposition_check` measures
how far a full parallel network solve departs from that model.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import crossbar as xb
from .mapping import L1_ROWS, L2_COLS, differential
from .ternary import N_HIDDEN, N_IN, TernarySolution
from .wine import Dataset

V_READ = 0.2


def _check_gnorm(g_norm):
    if not g_norm > 0:
        raise ValueError("g_norm must be > 0")


def _values(g) -> np.ndarray:
    return g.values if isinstance(g, xb.ConductanceMap) else np.asarray(g, float)


def hw_forward(g, g_norm: float, biases, x, v_read: float = V_READ):
    """Output currents in weight units and predicted class, for one sample or a batch.

    Layer 1 drives rows 1-13 with x * v_read; hidden unit n is the difference of
    the currents on its column pair. Layer 2 drives each row pair with +a and -a
    times v_read and reads columns 13-15.
    """
    _check_gnorm(g_norm)
    b1, b2 = (np.asarray(b, float) for b in biases)
    gv = _values(g)
    x = np.asarray(x, float)
    i1 = (x * v_read) @ gv[L1_ROWS, 0:2 * N_HIDDEN]
    z = (i1[..., 0::2] - i1[..., 1::2]) / (v_read * g_norm) + b1
    a = np.tanh(z)
    v2 = np.empty(a.shape[:-1] + (2 * N_HIDDEN,))
    v2[..., 0::2] = a * v_read
    v2[..., 1::2] = -a * v_read
    i2 = v2 @ gv[0:2 * N_HIDDEN, L2_COLS]
    out = i2 / (v_read * g_norm) + b2
    return out, np.argmax(out, axis=-1)


def solution_accuracy(g, g_norm: float, net: TernarySolution, ds: Dataset) -> float:
    _, pred = hw_forward(g, g_norm, (net.b1, net.b2), ds.features)
    return float(np.mean(pred == ds.labels))


def rms_deviation(net: TernarySolution, w_hw) -> float:
    """Root-sum-square error of layer 1 plus that of layer 2 (not pooled)."""
    w1_hw, w2_hw = (np.asarray(w, float) for w in w_hw)
    if w1_hw.shape != net.w1.shape or w2_hw.shape != net.w2.shape:
        raise ValueError("hardware weight shapes do not match the network")
    return float(np.sqrt(np.sum((net.w1 - w1_hw) ** 2)) + np.sqrt(np.sum((net.w2 - w2_hw) ** 2)))


def grid_metrics(g, net: TernarySolution, ds: Dataset, grid) -> tuple[np.ndarray, np.ndarray]:
    """Accuracy and RMS deviation at every g_norm in `grid` from one conductance map.

    Vectorized over the grid; algebraically the same as calling hw_forward and
    rms_deviation per grid point.
    """
    grid = np.asarray(grid, float)
    if np.any(grid <= 0):
        raise ValueError("g_norm grid must be positive")
    d1, d2 = differential(_values(g))
    inv = 1.0 / grid[:, None, None]
    z = (ds.features @ d1)[None] * inv + net.b1
    out = (np.tanh(z) @ d2) * inv + net.b2
    acc = np.mean(np.argmax(out, axis=-1) == ds.labels, axis=1)
    e1 = np.sqrt(np.sum((net.w1[None] - d1[None] * inv) ** 2, axis=(1, 2)))
    e2 = np.sqrt(np.sum((net.w2[None] - d2[None] * inv) ** 2, axis=(1, 2)))
    return acc, e1 + e2


@dataclass
class HwEvalResult:
    seed: int
    g_norm: float
    train_accuracy: float
    test_accuracy: float
    rms_deviation: float
    outputs: np.ndarray | None = field(default=None, repr=False)  # (samples, 3)
    labels: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        for v in (self.train_accuracy, self.test_accuracy):
            if not 0.0 <= v <= 1.0:
                raise ValueError("accuracy out of range")
        if self.rms_deviation < 0:
            raise ValueError("rms deviation must be >= 0")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed, "g_norm": self.g_norm, "train_accuracy": self.train_accuracy,
            "test_accuracy": self.test_accuracy, "rms_deviation": self.rms_deviation,
        }

    def trace_csv(self) -> str:
        if self.outputs is None:
            raise ValueError("evaluation ran without trace=True")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sample", "I_out1", "I_out2", "I_out3", "label"])
        for k, (row, lab) in enumerate(zip(self.outputs, self.labels)):
            w.writerow([k] + [repr(float(v)) for v in row] + [int(lab) + 1])
        return buf.getvalue()


def evaluate(g, g_norm: float, net: TernarySolution, train: Dataset, test: Dataset,
             trace: bool = False) -> HwEvalResult:
    """Accuracy on both splits and RMS deviation; optional output traces over train then test."""
    from .mapping import extract_weights

    res = HwEvalResult(
        net.seed, float(g_norm), solution_accuracy(g, g_norm, net, train),
        solution_accuracy(g, g_norm, net, test), rms_deviation(net, extract_weights(g, g_norm)),
    )
    if trace:
        x = np.vstack([train.features, test.features])
        res.outputs = hw_forward(g, g_norm, (net.b1, net.b2), x)[0]
        res.labels = np.concatenate([train.labels, test.labels])
    return res


def save_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def superposition_check(xbar: xb.Crossbar, n_vectors: int = 100,
                        voltages=(0.1, 0.2, 0.3, 0.4, 0.5), seed=0, v_read: float = V_READ,
                        exact: bool = False) -> dict:
    """Relative RMS gap between parallel column currents and the serial-read prediction.

    The array is read once serially (noisy reads at v_read). Each random binary
    input drives its active rows at V together, every other port grounded; the
    15 column currents are each measured with the same current noise as a read.
    Returns {voltage: {"values": [...], "stats": quartiles}}.
    """
    from .study import quartile_stats

    rng = np.random.default_rng(seed)
    g_serial = xb.read_all(xbar, v_read, exact).values
    noise_ua = xbar.params.read_noise_std / xb.NA_PER_UA
    rows = xbar.geom.rows
    out = {}
    xs = rng.integers(0, 2, size=(n_vectors, rows))
    for v in voltages:
        devs = []
        for x in xs:
            if not x.any():
                continue  # nothing driven, both sides are zero
            drive = np.zeros(xbar.geom.n_ports)
            drive[:rows] = x * v
            sol = xb.solve_network(xbar, drive)
            i_par = -sol.port_currents[rows:] + rng.normal(0.0, noise_ua, xbar.geom.cols)
            i_ser = (x * v) @ g_serial
            devs.append(float(np.linalg.norm(i_par - i_ser) / np.linalg.norm(i_ser)))
        out[float(v)] = {"values": devs, "stats": quartile_stats(devs)}
    return out
