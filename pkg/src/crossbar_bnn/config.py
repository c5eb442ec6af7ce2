"""Study configuration: a JSON file layered over the shipped defaults.

Top-level keys are merged one level deep, so a user file only needs the values it
changes. Size blocks merge per size name. Two environment variables override the
file: CROSSBAR_BNN_OUT (output directory) and CROSSBAR_BNN_JOBS (worker count).
Explicit overrides (command-line flags) win over both.
"""
from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .crossbar import VerifyConfig, make_geometry
from .device import DeviceParams
from .network import Geometry
from .study import make_grid
from .trainer import TrainConfig

TOP_KEYS = {
    "dataset", "split_seed", "seed", "n_solutions", "n_realizations", "jobs", "output_dir",
    "sweep_mode", "train", "verify", "geometry", "superposition", "sizes", "default_size",
}
GEOM_KEYS = {"r_segment", "r_contact", "lead_amplitude", "row_port_side", "col_port_side"}


class ConfigError(ValueError):
    pass


def default_config_dict() -> dict:
    text = (resources.files("crossbar_bnn") / "configs" / "default.json").read_text()
    return json.loads(text)


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if k == "sizes" and isinstance(v, dict):
            for name, block in v.items():
                cur = out["sizes"].get(name, {})
                merged = {**cur, **block}
                if "device" in cur and "device" in block:
                    merged["device"] = {**cur["device"], **block["device"]}
                out["sizes"][name] = merged
        elif isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = {**out[k], **v}
        else:
            out[k] = v
    return out


@dataclass(frozen=True)
class SizeConfig:
    name: str
    device: DeviceParams
    grid: np.ndarray
    geometry: Geometry
    raw: dict


@dataclass(frozen=True)
class StudyConfig:
    raw: dict  # fully resolved dictionary, embedded in every output
    dataset: Path | None
    split_seed: int
    seed: int
    n_solutions: int
    n_realizations: int
    jobs: int
    output_dir: Path
    sweep_mode: str
    train: TrainConfig
    verify: VerifyConfig
    sizes: dict
    default_size: str
    superposition: dict

    def size(self, name: str | None) -> SizeConfig:
        name = name or self.default_size
        if name not in self.sizes:
            raise ConfigError(f"unknown size {name!r}; configured sizes: {', '.join(self.sizes)}")
        return self.sizes[name]

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)


def _int(d, key, lo):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int) or v < lo:
        raise ConfigError(f"{key} must be an integer >= {lo}")
    return v


def _build(name, cls, block):
    try:
        return cls(**block)
    except TypeError as exc:
        raise ConfigError(f"{name}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def _geometry(block: dict, where: str) -> Geometry:
    unknown = set(block) - GEOM_KEYS
    if unknown:
        raise ConfigError(f"{where}: unknown geometry keys {sorted(unknown)}")
    try:
        return make_geometry(**block)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def resolve(d: dict, base_dir: Path | None = None) -> StudyConfig:
    unknown = set(d) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    d = copy.deepcopy(d)
    dataset = d.get("dataset")
    if dataset is not None:
        dataset = Path(dataset)
        if not dataset.is_absolute() and base_dir is not None:
            dataset = base_dir / dataset
        if not dataset.is_file():
            raise ConfigError(f"dataset file not found: {dataset}")
        d["dataset"] = str(dataset)
    if d.get("sweep_mode") not in ("programmed", "sampled"):
        raise ConfigError("sweep_mode must be 'programmed' or 'sampled'")

    sizes = {}
    if not d["sizes"]:
        raise ConfigError("at least one size block is required")
    for name, block in d["sizes"].items():
        extra = set(block) - {"device", "grid", "geometry"}
        if extra:
            raise ConfigError(f"size {name}: unknown keys {sorted(extra)}")
        dev = _build(f"size {name} device", DeviceParams, block.get("device", {}))
        g = block.get("grid", {"start": 1.0, "stop": 12.0, "step": 0.1})
        try:
            grid = make_grid(float(g["start"]), float(g["stop"]), float(g["step"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"size {name} grid: {exc}") from None
        geom = _geometry({**d["geometry"], **block.get("geometry", {})}, f"size {name}")
        sizes[name] = SizeConfig(name, dev, grid, geom, block)
    if d["default_size"] not in sizes:
        raise ConfigError(f"default_size {d['default_size']!r} is not a configured size")

    sp = d["superposition"]
    if _int(sp, "n_vectors", 1) and not sp.get("voltages"):
        raise ConfigError("superposition.voltages must be non-empty")
    if any(not float(v) > 0 for v in sp["voltages"]):
        raise ConfigError("superposition voltages must be > 0")

    return StudyConfig(
        raw=d,
        dataset=dataset,
        split_seed=_int(d, "split_seed", 0),
        seed=_int(d, "seed", 0),
        n_solutions=_int(d, "n_solutions", 1),
        n_realizations=_int(d, "n_realizations", 1),
        jobs=_int(d, "jobs", 1),
        output_dir=Path(d["output_dir"]),
        sweep_mode=d["sweep_mode"],
        train=_build("train", TrainConfig, d["train"]),
        verify=_build("verify", VerifyConfig, d["verify"]),
        sizes=sizes,
        default_size=d["default_size"],
        superposition=sp,
    )


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> StudyConfig:
    d = default_config_dict()
    base_dir = None
    if path is not None:
        path = Path(path)
        try:
            user = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: top level must be an object")
        unknown = set(user) - TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        d = _merge(d, user)
        base_dir = path.parent
    if os.environ.get("CROSSBAR_BNN_OUT"):
        d["output_dir"] = os.environ["CROSSBAR_BNN_OUT"]
    if os.environ.get("CROSSBAR_BNN_JOBS"):
        try:
            d["jobs"] = int(os.environ["CROSSBAR_BNN_JOBS"])
        except ValueError:
            raise ConfigError("CROSSBAR_BNN_JOBS must be an integer") from None
    if overrides:
        d = _merge(d, overrides)
    return resolve(d, base_dir)
