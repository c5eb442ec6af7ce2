"""crossbar-bnn command line.

    crossbar-bnn <command> [--config PATH] [--size NAME] [--out DIR] [--seed N] [--jobs N]

Commands: train, characterize, sweep, variation-study, superposition, export-data.
Exit codes: 0 ok, 2 configuration or input error, 3 training failure, 4 solver failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import zlib
from pathlib import Path

import numpy as np

from . import crossbar as xb
from . import study, trainer, wine
from .config import ConfigError, StudyConfig, load_config
from .inference import superposition_check
from .network import ConvergenceError, SingularNetworkError

log = logging.getLogger("crossbar_bnn")

EXIT_OK, EXIT_CONFIG, EXIT_TRAIN, EXIT_SOLVER = 0, 2, 3, 4


def _dump(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")
    return path


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _envelope(cfg: StudyConfig, command: str, **payload) -> dict:
    return {"command": command, "seed": cfg.seed, "config": cfg.to_dict(), **payload}


def _data(cfg: StudyConfig):
    return wine.prepared(cfg.dataset, cfg.split_seed)


def solutions_dir(cfg: StudyConfig) -> Path:
    return cfg.output_dir / "solutions"


def cmd_train(cfg: StudyConfig, args) -> int:
    _, train, test = _data(cfg)
    sols = trainer.generate_solutions(
        cfg.n_solutions, 0, train, cfg.train, test, cfg.jobs,
        entropy=(cfg.seed, zlib.crc32(b"train")),
    )
    path = trainer.write_solutions(solutions_dir(cfg), sols, cfg.train,
                                   {"config": cfg.to_dict(), "seed": cfg.seed})
    tr = [s.train_accuracy for s in sols]
    te = [s.test_accuracy for s in sols]
    print(f"trained {len(sols)} solutions -> {path.parent}")
    print(f"train accuracy min {min(tr):.4f}  test accuracy median {np.median(te):.4f}  "
          f"test >= 0.95: {np.mean(np.array(te) >= 0.95):.3f}")
    return EXIT_OK


def cmd_export_data(cfg: StudyConfig, args) -> int:
    _, train, test = _data(cfg)
    out = cfg.output_dir / "data_split.json"
    _dump(out, _envelope(cfg, "export-data", train=train.to_dict(), test=test.to_dict()))
    print(f"train {train.n_samples} / test {test.n_samples} -> {out}")
    return EXIT_OK


def _histogram_rows(a, b, bins=30):
    lo, hi = float(min(a.min(), b.min())), float(max(a.max(), b.max()))
    if hi == lo:
        hi = lo + 1e-9
    edges = np.linspace(lo, hi, bins + 1)
    ca, _ = np.histogram(a, edges)
    cb, _ = np.histogram(b, edges)
    return [(edges[k], edges[k + 1], int(ca[k]), int(cb[k])) for k in range(bins)]


def _stats(a) -> dict:
    return {"mean": float(np.mean(a)), "std": float(np.std(a)), "min": float(np.min(a)),
            "max": float(np.max(a))}


def cmd_characterize(cfg: StudyConfig, args) -> int:
    size = cfg.size(args.size)
    bar = xb.build_crossbar(size.device, geom=size.geometry,
                            seed=study.child_seed(cfg.seed, f"characterize/{size.name}"))
    eff = xb.effective_switching_map(bar, cfg.verify)
    g_off_read = xb.read_all(bar, cfg.verify.v_read).values
    bar.set_states(np.ones((xb.ROWS, xb.COLS), int))
    g_on_read = xb.read_all(bar, cfg.verify.v_read).values
    bar.set_states(np.zeros((xb.ROWS, xb.COLS), int))

    d = cfg.output_dir / "characterize" / size.name
    _write(d / "g_on_map.csv", xb.ConductanceMap(g_on_read).to_csv())
    _write(d / "g_off_map.csv", xb.ConductanceMap(g_off_read).to_csv())
    _write(d / "effective_vsw_map.csv", _csv([f"c{j + 1}" for j in range(xb.COLS)], eff.tolist()))
    _write(d / "vsw_histogram.csv",
           _csv(["bin_lo_V", "bin_hi_V", "count_to_on", "count_to_off"], _histogram_rows(bar.v_on, bar.v_off)))
    _write(d / "conductance_histogram.csv",
           _csv(["bin_lo_uS", "bin_hi_uS", "count_on", "count_off"], _histogram_rows(g_on_read, g_off_read)))
    center = float(eff[xb.ROWS // 2, xb.COLS // 2])
    corners = [float(eff[i, j]) for i in (0, xb.ROWS - 1) for j in (0, xb.COLS - 1)]
    summary = {
        "size": size.name,
        "device": size.device.to_dict(),
        "switching_voltage": _stats(np.concatenate([bar.v_on.ravel(), bar.v_off.ravel()])),
        "switching_voltage_to_on": _stats(bar.v_on),
        "switching_voltage_to_off": _stats(bar.v_off),
        "effective_switching_voltage": {"center": center, "corners": corners,
                                        "n_failed": int(np.isnan(eff).sum())},
        "g_on_read": _stats(g_on_read),
        "g_off_read": _stats(g_off_read),
        "v_max": bar.v_max(),
    }
    _dump(d / "summary.json", _envelope(cfg, "characterize", summary=summary))
    sv = summary["switching_voltage"]
    print(f"{size.name}: switching voltage mean {sv['mean']:.3f} V (std {sv['std']:.3f})")
    print(f"effective switching voltage: center {center:.2f} V, corners "
          + ", ".join(f"{c:.2f}" for c in corners))
    print(f"read g_on mean {summary['g_on_read']['mean']:.2f} uS, g_off mean {summary['g_off_read']['mean']:.2f} uS")
    return EXIT_OK


def _solutions(cfg: StudyConfig):
    return trainer.read_solutions(solutions_dir(cfg))


def _sweep_outputs(cfg, res: study.SweepResult, name: str, d: Path):
    _dump(d / f"{name}.json", _envelope(cfg, "sweep", **res.to_dict()))
    _write(d / f"{name}_accuracy.csv", res.quartile_csv("accuracy"))
    _write(d / f"{name}_rms.csv", res.quartile_csv("rms"))


def cmd_sweep(cfg: StudyConfig, args) -> int:
    size = cfg.size(args.size)
    sols = _solutions(cfg)
    _, train, _ = _data(cfg)
    res = study.run_sweep(sols, size.device, train, size.grid, cfg.seed, size.geometry, cfg.verify,
                          cfg.sweep_mode, cfg.jobs, task=f"sweep/{size.name}")
    _sweep_outputs(cfg, res, f"sweep_{size.name}", cfg.output_dir / "sweep")
    s = res.summary()
    print(f"{size.name} ({s['mode']}, {s['n_solutions']} solutions)")
    print(f"g_norm at max median accuracy: {s['g_norm_acc_opt']:.2f} uS "
          f"(median accuracy {s['median_accuracy_at_acc_opt']:.3f})")
    print(f"g_norm at min median RMS deviation: {s['g_norm_rms_opt']:.2f} uS "
          f"(median accuracy {s['median_accuracy_at_rms_opt']:.3f})")
    print(f"ratio rms/acc optimum: {s['ratio']:.3f}")
    print(f"mean on minus mean off estimate: {s['g_norm_estimate']:.2f} uS "
          f"(median accuracy {s['median_accuracy_at_estimate']:.3f})")
    if s["median_write_accuracy"] is not None:
        print(f"median write accuracy {s['median_write_accuracy']:.3f}, "
              f"median clear accuracy {s['median_clear_accuracy']:.3f}")
    return EXIT_OK


def cmd_variation_study(cfg: StudyConfig, args) -> int:
    sols = _solutions(cfg)
    _, train, _ = _data(cfg)
    names = [args.size] if args.size else list(cfg.sizes)
    sizes = {n: cfg.size(n).device for n in names}
    grids = {n: cfg.size(n).grid for n in names}
    res = study.variation_study(sols, sizes, train, cfg.n_realizations, grids, cfg.seed)
    d = cfg.output_dir / "variation"
    for name, s in res.items():
        _dump(d / f"variation_{name}.json", _envelope(cfg, "variation-study", **s.to_dict()))
    _write(d / "variation_summary.csv", study.summary_csv(res))
    print("size   ratio median [q25, q75]   no-variation   max median acc   min median rms")
    for name, s in res.items():
        q = study.quartile_stats(s.ratios)
        print(f"{name:6s} {q['median']:.3f} [{q['q25']:.3f}, {q['q75']:.3f}]"
              f"        {s.ratio_no_variation:.3f}          {np.median(s.max_median_accuracy):.3f}"
              f"            {np.median(s.min_median_rms):.3f}")
    return EXIT_OK


def cmd_superposition(cfg: StudyConfig, args) -> int:
    size = cfg.size(args.size)
    sp = cfg.superposition
    ss = study.child_seed(cfg.seed, f"superposition/{size.name}")
    bar_ss, target_ss, check_ss = ss.spawn(3)
    bar = xb.build_crossbar(size.device, geom=size.geometry, seed=bar_ss)
    # random half-populated target over the cells the network uses
    from .mapping import used_cells

    targets = (np.random.default_rng(target_ss).random((xb.ROWS, xb.COLS)) < 0.5) & used_cells()
    report = xb.program_solution(bar, targets.astype(int), cfg.verify)
    res = superposition_check(bar, int(sp["n_vectors"]), [float(v) for v in sp["voltages"]],
                              np.random.default_rng(check_ss), cfg.verify.v_read)
    d = cfg.output_dir / "superposition"
    _dump(d / f"superposition_{size.name}.json", _envelope(
        cfg, "superposition", size=size.name, write_accuracy=report.write_accuracy,
        deviation={repr(v): r for v, r in res.items()}))
    rows = [[v] + [r["stats"][k] for k in study.QUARTILE_KEYS] for v, r in res.items()]
    _write(d / f"superposition_{size.name}.csv", _csv(["voltage_V"] + list(study.QUARTILE_KEYS), rows))
    for v, r in res.items():
        print(f"V = {v:.2f} V: median relative RMS deviation {100 * r['stats']['median']:.3f} %")
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "characterize": cmd_characterize,
    "sweep": cmd_sweep,
    "variation-study": cmd_variation_study,
    "superposition": cmd_superposition,
    "export-data": cmd_export_data,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crossbar-bnn", description=__doc__.split("\n\n")[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON config layered over the shipped defaults")
    p.add_argument("--size", help="device-size block name (default from config)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="global seed")
    p.add_argument("--jobs", type=int, help="worker processes")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {k: v for k, v in (("output_dir", args.out), ("seed", args.seed), ("jobs", args.jobs))
                 if v is not None}
    try:
        cfg = load_config(args.config, overrides)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, wine.WineParseError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except trainer.TrainingFailure as exc:
        print(f"training failed: {exc}", file=sys.stderr)
        return EXIT_TRAIN
    except (SingularNetworkError, ConvergenceError, np.linalg.LinAlgError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
