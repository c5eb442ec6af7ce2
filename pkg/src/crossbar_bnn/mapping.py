"""Differential layout of the 13-6-3 network on the 15x15 array.

Layer 1: weight w1[i, n] lives on row i, column pair (2n, 2n+1), excitatory cell
on the left. Layer 2: weight w2[n, c] lives on column 12+c, row pair (2n, 2n+1),
excitatory cell on top. Indices here are 0-based; CSV files are plain grids, so
their first row/column is row/column 1 of the array.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .crossbar import COLS, ROWS, ConductanceMap
from .ternary import N_HIDDEN, N_IN, N_OUT, TernarySolution

# states of the (excitatory, inhibitory) pair that encode a zero weight
ZERO_ENCODING = (0, 0)

L1_ROWS = slice(0, N_IN)
L1_EXC_COLS = slice(0, 2 * N_HIDDEN, 2)
L1_INH_COLS = slice(1, 2 * N_HIDDEN, 2)
L2_EXC_ROWS = slice(0, 2 * N_HIDDEN, 2)
L2_INH_ROWS = slice(1, 2 * N_HIDDEN, 2)
L2_COLS = slice(2 * N_HIDDEN, 2 * N_HIDDEN + N_OUT)


def used_cells() -> np.ndarray:
    used = np.zeros((ROWS, COLS), bool)
    used[L1_ROWS, 0:2 * N_HIDDEN] = True
    used[0:2 * N_HIDDEN, L2_COLS] = True
    return used


@dataclass(frozen=True)
class TargetStateMap:
    states: np.ndarray  # (15, 15) of 0/1

    def __post_init__(self):
        s = np.asarray(self.states, dtype=int)
        if s.shape != (ROWS, COLS) or not np.isin(s, (0, 1)).all():
            raise ValueError("target map must be 15x15 of 0/1")
        if s[~used_cells()].any():
            raise ValueError("unused cells must be off")
        object.__setattr__(self, "states", s)

    @property
    def n_on(self) -> int:
        return int(self.states.sum())

    def to_csv(self) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(self.states.tolist())
        return buf.getvalue()

    def save_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "TargetStateMap":
        rows = [[int(v) for v in r] for r in csv.reader(io.StringIO(text)) if r]
        return cls(np.array(rows))


def _pair_states(w: np.ndarray, zero=ZERO_ENCODING):
    exc = np.where(w == 1, 1, np.where(w == -1, 0, zero[0]))
    inh = np.where(w == -1, 1, np.where(w == 1, 0, zero[1]))
    return exc, inh


def map_weights(net: TernarySolution, zero_encoding=ZERO_ENCODING) -> TargetStateMap:
    s = np.zeros((ROWS, COLS), int)
    s[L1_ROWS, L1_EXC_COLS], s[L1_ROWS, L1_INH_COLS] = _pair_states(net.w1, zero_encoding)
    s[L2_EXC_ROWS, L2_COLS], s[L2_INH_ROWS, L2_COLS] = _pair_states(net.w2, zero_encoding)
    return TargetStateMap(s)


def differential(g) -> tuple[np.ndarray, np.ndarray]:
    """Raw (g_e - g_i) matrices, (13, 6) and (6, 3), in uS."""
    g = g.values if isinstance(g, ConductanceMap) else np.asarray(g, float)
    d1 = g[L1_ROWS, L1_EXC_COLS] - g[L1_ROWS, L1_INH_COLS]
    d2 = g[L2_EXC_ROWS, L2_COLS] - g[L2_INH_ROWS, L2_COLS]
    return d1, d2


def extract_weights(g, g_norm: float) -> tuple[np.ndarray, np.ndarray]:
    if not g_norm > 0:
        raise ValueError("g_norm must be > 0")
    d1, d2 = differential(g)
    return d1 / g_norm, d2 / g_norm
