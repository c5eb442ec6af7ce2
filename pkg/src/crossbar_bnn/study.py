"""g_norm sweeps over many solutions, and the with/without-variation comparison.

Two ways to obtain a conductance map per solution:

* "programmed": a fresh seeded array per solution, cleared and written with
  write-verify through the full network model, then read once (noise included).
* "sampled": one seeded array of intrinsic conductances per run, shared by all
  solutions and set to the target states directly; no line resistance, no noise.

g_norm is a software scalar, so each map is measured once and reused for every
grid point.
"""
from __future__ import annotations

import csv
import io
import zlib
from dataclasses import dataclass, field

import numpy as np

from . import crossbar as xb
from .device import DeviceParams, sample_arrays
from .inference import grid_metrics, hw_forward
from .mapping import TargetStateMap, map_weights
from .ternary import TernarySolution
from .wine import Dataset

QUARTILE_KEYS = ("min", "q25", "median", "q75", "max")


def quartile_stats(values) -> dict:
    """Five-number summary; quartiles interpolate linearly between closest ranks."""
    v = np.asarray(values, float).ravel()
    if v.size == 0:
        raise ValueError("quartile_stats of an empty list")
    q = np.percentile(v, [0, 25, 50, 75, 100])
    return {k: float(x) for k, x in zip(QUARTILE_KEYS, q)}


def make_grid(start: float, stop: float, step: float) -> np.ndarray:
    if not (0 < start <= stop and step > 0):
        raise ValueError("grid needs 0 < start <= stop and step > 0")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(n), 10)


DEFAULT_GRID = make_grid(1.0, 12.0, 0.1)


def child_seed(seed: int, task: str, index: int = 0) -> np.random.SeedSequence:
    """Per-task seed: the global seed, a stable hash of the task name, and an index."""
    return np.random.SeedSequence([int(seed), zlib.crc32(task.encode()), int(index)])


class EstimateError(ValueError):
    """Mean on/off difference needs at least one on and one off target."""


def estimate_gnorm(g, targets) -> float:
    gv = g.values if isinstance(g, xb.ConductanceMap) else np.asarray(g, float)
    t = np.asarray(getattr(targets, "states", targets), dtype=bool)
    if t.all() or not t.any():
        raise EstimateError("targets must contain both on and off cells")
    return float(gv[t].mean() - gv[~t].mean())


def locate_optima(grid, acc: np.ndarray, rms: np.ndarray) -> tuple[float, float]:
    """(accuracy-optimal, RMS-optimal) grid values from (solutions, grid) matrices.

    Accuracy: highest median; ties go to the higher mean accuracy, then to the
    smaller g_norm. RMS: lowest median, ties to the smaller g_norm.
    """
    grid = np.asarray(grid, float)
    med_acc = np.median(acc, axis=0)
    mean_acc = np.mean(acc, axis=0)
    i_acc = np.lexsort((-grid, mean_acc, med_acc))[-1]
    i_rms = int(np.argmin(np.median(rms, axis=0)))  # argmin takes the first, i.e. smallest g
    return float(grid[i_acc]), float(grid[i_rms])


@dataclass
class SweepResult:
    grid: np.ndarray
    seeds: list
    accuracy: np.ndarray  # (n_solutions, n_grid), train accuracy
    rms: np.ndarray  # (n_solutions, n_grid)
    estimates: np.ndarray  # per solution, mean on minus mean off
    accuracy_at_estimate: np.ndarray  # per solution, at its own estimate
    write_accuracy: list = field(default_factory=list)
    clear_accuracy: list = field(default_factory=list)
    errors: dict = field(default_factory=dict)  # seed -> message for excluded solutions
    mode: str = "programmed"

    def __post_init__(self):
        self.g_norm_acc_opt, self.g_norm_rms_opt = locate_optima(self.grid, self.accuracy, self.rms)

    @property
    def ratio(self) -> float:
        return self.g_norm_rms_opt / self.g_norm_acc_opt

    @property
    def g_norm_estimate(self) -> float:
        return float(np.median(self.estimates))

    def _col(self, values: np.ndarray, g: float) -> np.ndarray:
        return values[:, int(np.flatnonzero(self.grid == g)[0])]

    def median_accuracy_at(self, g: float) -> float:
        return float(np.median(self._col(self.accuracy, g)))

    @property
    def max_median_accuracy(self) -> float:
        return self.median_accuracy_at(self.g_norm_acc_opt)

    @property
    def min_median_rms(self) -> float:
        return float(np.median(self._col(self.rms, self.g_norm_rms_opt)))

    @property
    def median_accuracy_at_estimate(self) -> float:
        return float(np.median(self.accuracy_at_estimate))

    def accuracy_quartiles(self) -> list:
        return [quartile_stats(c) for c in self.accuracy.T]

    def rms_quartiles(self) -> list:
        return [quartile_stats(c) for c in self.rms.T]

    def summary(self) -> dict:
        def med(x):
            return float(np.median(x)) if len(x) else None

        return {
            "mode": self.mode,
            "n_solutions": len(self.seeds),
            "g_norm_acc_opt": self.g_norm_acc_opt,
            "g_norm_rms_opt": self.g_norm_rms_opt,
            "ratio": self.ratio,
            "g_norm_estimate": self.g_norm_estimate,
            "median_accuracy_at_acc_opt": self.max_median_accuracy,
            "median_accuracy_at_rms_opt": self.median_accuracy_at(self.g_norm_rms_opt),
            "median_accuracy_at_estimate": self.median_accuracy_at_estimate,
            "max_accuracy_at_acc_opt": float(self._col(self.accuracy, self.g_norm_acc_opt).max()),
            "min_median_rms": self.min_median_rms,
            "median_write_accuracy": med([w for w in self.write_accuracy if w is not None]),
            "median_clear_accuracy": med([c for c in self.clear_accuracy if c is not None]),
            "excluded": {str(k): v for k, v in sorted(self.errors.items())},
        }

    def to_dict(self) -> dict:
        return {
            "summary": self.summary(),
            "g_norm_grid": self.grid.tolist(),
            "accuracy_quartiles": self.accuracy_quartiles(),
            "rms_quartiles": self.rms_quartiles(),
            "per_solution": [
                {"seed": int(s), "estimate": float(e), "accuracy_at_estimate": float(a),
                 "write_accuracy": w, "clear_accuracy": c}
                for s, e, a, w, c in zip(self.seeds, self.estimates, self.accuracy_at_estimate,
                                         self.write_accuracy or [None] * len(self.seeds),
                                         self.clear_accuracy or [None] * len(self.seeds))
            ],
        }

    def quartile_csv(self, which: str) -> str:
        rows = self.accuracy_quartiles() if which == "accuracy" else self.rms_quartiles()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["g_norm"] + list(QUARTILE_KEYS))
        for g, q in zip(self.grid, rows):
            w.writerow([repr(float(g))] + [repr(q[k]) for k in QUARTILE_KEYS])
        return buf.getvalue()


def _accuracy_at(gmap, g_norm: float, net: TernarySolution, ds: Dataset) -> float:
    if not g_norm > 0:
        return 0.0  # a non-positive estimate is unusable; count it as no correct predictions
    return float(np.mean(hw_forward(gmap, g_norm, (net.b1, net.b2), ds.features)[1] == ds.labels))


def _programmed_map(net, params, geom, cfg, ss):
    bar = xb.build_crossbar(params, geom=geom, seed=ss)
    targets = map_weights(net)
    report = xb.program_solution(bar, targets, cfg)
    return xb.read_all(bar, cfg.v_read), targets, report


def _sweep_one(args):
    net, params, geom, cfg, ss, train, grid = args
    try:
        gmap, targets, report = _programmed_map(net, params, geom, cfg, ss)
    except (np.linalg.LinAlgError, RuntimeError) as exc:
        return net.seed, None, f"{type(exc).__name__}: {exc}"
    acc, rms = grid_metrics(gmap, net, train, grid)
    est = estimate_gnorm(gmap, targets)
    return net.seed, (acc, rms, est, _accuracy_at(gmap, est, net, train),
                      report.write_accuracy, report.clear_accuracy), None


def run_sweep(solutions, params: DeviceParams, train: Dataset, grid=DEFAULT_GRID, seed: int = 0,
              geom=None, cfg: xb.VerifyConfig = xb.VerifyConfig(), mode: str = "programmed",
              jobs: int = 1, task: str = "sweep") -> SweepResult:
    grid = np.asarray(grid, float)
    if grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be positive and strictly ascending")
    if mode == "sampled":
        return _sampled_sweep(solutions, params, train, grid, child_seed(seed, task))
    if mode != "programmed":
        raise ValueError(f"unknown mode {mode!r}")
    geom = geom if geom is not None else xb.make_geometry()
    jobs_args = [(s, params, geom, cfg, child_seed(seed, task, s.seed), train, grid) for s in solutions]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_one, jobs_args))
    else:
        results = [_sweep_one(a) for a in jobs_args]
    ok = [(s, r) for s, r, _ in results if r is not None]
    errors = {s: e for s, _, e in results if e is not None}
    if not ok:
        raise RuntimeError("every solution failed to simulate")
    return SweepResult(
        grid, [s for s, _ in ok], np.array([r[0] for _, r in ok]), np.array([r[1] for _, r in ok]),
        np.array([r[2] for _, r in ok]), np.array([r[3] for _, r in ok]),
        [r[4] for _, r in ok], [r[5] for _, r in ok], errors, "programmed",
    )


def sampled_conductances(params: DeviceParams, ss) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(ss)
    g_off, g_on, _, _ = sample_arrays(params, rng, (xb.ROWS, xb.COLS))
    return g_off, g_on


def _sampled_sweep(solutions, params, train, grid, ss) -> SweepResult:
    g_off, g_on = sampled_conductances(params, ss)
    acc, rms, est, acc_est = [], [], [], []
    for net in solutions:
        targets = map_weights(net)
        gmap = np.where(targets.states == 1, g_on, g_off)
        a, r = grid_metrics(gmap, net, train, grid)
        e = estimate_gnorm(gmap, targets)
        acc.append(a)
        rms.append(r)
        est.append(e)
        acc_est.append(_accuracy_at(gmap, e, net, train))
    return SweepResult(grid, [s.seed for s in solutions], np.array(acc), np.array(rms),
                       np.array(est), np.array(acc_est), mode="sampled")


@dataclass
class SizeStudy:
    name: str
    ratios: list  # one per realization with variation
    ratio_no_variation: float
    max_median_accuracy: list
    min_median_rms: list
    acc_opt: list
    rms_opt: list
    no_variation: dict

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "ratio_with_variation": {"values": self.ratios, "stats": quartile_stats(self.ratios)},
            "ratio_no_variation": self.ratio_no_variation,
            "max_median_accuracy": {"values": self.max_median_accuracy,
                                    "stats": quartile_stats(self.max_median_accuracy)},
            "min_median_rms": {"values": self.min_median_rms, "stats": quartile_stats(self.min_median_rms)},
            "g_norm_acc_opt": self.acc_opt,
            "g_norm_rms_opt": self.rms_opt,
            "no_variation": self.no_variation,
        }


def variation_study(solutions, sizes: dict, train: Dataset, n_realizations: int = 30, grids=None,
                    seed: int = 0) -> dict:
    """Per size: sampled sweeps over independent realizations, plus one with all spreads at 0.

    `sizes` maps name -> DeviceParams; `grids` maps name -> g_norm grid.
    """
    if not sizes:
        raise ValueError("at least one size is required")
    out = {}
    for name, params in sizes.items():
        grid = (grids or {}).get(name, DEFAULT_GRID)
        runs = [run_sweep(solutions, params, train, grid, seed, mode="sampled", task=f"variation/{name}/{r}")
                for r in range(n_realizations)]
        flat = run_sweep(solutions, params.without_variation(), train, grid, seed, mode="sampled",
                         task=f"variation/{name}/flat")
        out[name] = SizeStudy(
            name, [r.ratio for r in runs], flat.ratio, [r.max_median_accuracy for r in runs],
            [r.min_median_rms for r in runs], [r.g_norm_acc_opt for r in runs],
            [r.g_norm_rms_opt for r in runs], flat.summary(),
        )
    return out


def summary_csv(study: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["size"] + [f"ratio_{k}" for k in QUARTILE_KEYS]
               + ["ratio_no_variation", "median_max_median_accuracy", "median_min_median_rms"])
    for name, s in study.items():
        q = quartile_stats(s.ratios)
        w.writerow([name] + [repr(q[k]) for k in QUARTILE_KEYS] + [
            repr(s.ratio_no_variation), repr(float(np.median(s.max_median_accuracy))),
            repr(float(np.median(s.min_median_rms)))])
    return buf.getvalue()

