"""A 15x15 passive MTJ array: reads, V/2 writes, write-verify, clear and programming.

Device parameters are held as struct-of-arrays (15x15 each); `Crossbar.device(i, j)`
gives a single-device view when one is needed. All indices here are 0-based.

Fast path: with a linear device model the node voltages for any drive pattern are
fixed by the device states, so the unit-drive response of each port is memoized
until a device switches. A write-verify ladder then costs one solve per state
change rather than one per pulse. `exact=True` bypasses every cache and solves
the full network for each pulse and read; it is kept as an independent route.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .device import OFF, ON, DeviceParams, MtjDevice, State, sample_arrays
from .network import Geometry, Network, NetworkSolve, ResponseCache, triangular_profile

ROWS = COLS = 15
NA_PER_UA = 1000.0


@dataclass(frozen=True)
class VerifyConfig:
    v_start: float = 1.0
    v_step: float = 0.1
    ratio_threshold: float = 1.3
    v_read: float = 0.2

    def __post_init__(self):
        if self.v_start <= 0 or self.v_step <= 0 or self.v_read <= 0:
            raise ValueError("v_start, v_step and v_read must be > 0")
        if self.ratio_threshold <= 1.0:
            raise ValueError("ratio_threshold must be > 1 (a lower bar passes unswitched devices)")


@dataclass
class Crossbar:
    params: DeviceParams
    geom: Geometry
    g_off: np.ndarray
    g_on: np.ndarray
    v_on: np.ndarray  # threshold for AP -> P (positive device voltage)
    v_off: np.ndarray  # magnitude of threshold for P -> AP
    state: np.ndarray  # int, 0 = off, 1 = on
    rng: np.random.Generator  # read-noise stream
    net: Network = field(init=False, repr=False)

    def __post_init__(self):
        if (self.geom.rows, self.geom.cols) != (ROWS, COLS):
            raise ValueError("the array is fixed at 15x15")
        self.net = Network(self.geom)
        self._cache = None
        self._version = 0
        self._memo: dict = {}

    @property
    def shape(self):
        return self.state.shape

    @property
    def nonlinearity(self) -> float:
        return self.params.nonlinearity

    def conductances(self) -> np.ndarray:
        """Intrinsic (zero-bias) conductance of every device in its present state."""
        return np.where(self.state == ON, self.g_on, self.g_off)

    def device(self, i: int, j: int) -> MtjDevice:
        return MtjDevice(float(self.g_off[i, j]), float(self.g_on[i, j]), float(self.v_on[i, j]),
                         float(self.v_off[i, j]), State(int(self.state[i, j])))

    def v_max(self) -> float:
        """Write-voltage cap: twice the smallest intrinsic threshold anywhere in the array."""
        return 2.0 * float(min(self.v_on.min(), self.v_off.min()))

    def set_states(self, states) -> None:
        states = np.asarray(states, dtype=int)
        if states.shape != self.shape or not np.isin(states, (0, 1)).all():
            raise ValueError("states must be a 15x15 array of 0/1")
        for i, j in np.argwhere(states != self.state):
            self._set(int(i), int(j), int(states[i, j]))

    def _set(self, i: int, j: int, s: int) -> None:
        self.state[i, j] = s
        self._version += 1
        if self._cache is not None:
            g = self.g_on[i, j] if s == ON else self.g_off[i, j]
            self._cache.set_conductance(i * self.geom.cols + j, g)

    def cache(self) -> ResponseCache:
        if self._cache is None:
            self._cache = ResponseCache(self.net, self.conductances())
        return self._cache

    def _memoized(self, key, compute):
        hit = self._memo.get(key)
        if hit is not None and hit[0] == self._version:
            return hit[1]
        val = compute()
        self._memo[key] = (self._version, val)
        return val


def lead_profile(amplitude: float, n: int = ROWS) -> tuple:
    return tuple(float(r) for r in triangular_profile(n, amplitude)) if amplitude > 0 else ()


def make_geometry(r_segment: float = 20.0, r_contact: float = 0.0, lead_amplitude: float = 100.0,
                  row_port_side: str = "left", col_port_side: str = "bottom") -> Geometry:
    lead = lead_profile(lead_amplitude)
    return Geometry(ROWS, COLS, r_segment, r_contact, lead, lead, row_port_side, col_port_side)


def build_crossbar(params: DeviceParams, r_segment: float = 20.0, seed=0,
                   geom: Geometry | None = None, **geom_kw) -> Crossbar:
    """Sample 225 independent devices, all starting off.

    `seed` may be an int or a numpy SeedSequence; device sampling and read noise
    use separate child streams so extra reads never change the sampled devices.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    dev_ss, noise_ss = ss.spawn(2)
    if geom is None:
        geom = make_geometry(r_segment, **geom_kw)
    g_off, g_on, v_on, v_off = sample_arrays(params, np.random.default_rng(dev_ss), (ROWS, COLS))
    return Crossbar(params, geom, g_off, g_on, v_on, v_off, np.zeros((ROWS, COLS), int),
                    np.random.default_rng(noise_ss))


def solve_network(xbar: Crossbar, port_drive) -> NetworkSolve:
    """Full solve; `port_drive` has 30 entries (rows then columns), NaN = floating."""
    return xbar.net.solve(xbar.conductances(), np.asarray(port_drive, float), xbar.nonlinearity)


def _drive(geom: Geometry, rows: dict | None = None, cols: dict | None = None) -> np.ndarray:
    d = np.zeros(geom.n_ports)
    for i, v in (rows or {}).items():
        d[i] = v
    for j, v in (cols or {}).items():
        d[geom.rows + j] = v
    return d


def _linear(xbar: Crossbar, exact: bool) -> bool:
    return xbar.nonlinearity == 0.0 and not exact


def read_current(xbar: Crossbar, i: int, j: int, v_read: float = 0.2, exact: bool = False) -> float:
    """Noiseless current (uA) measured at column j with row i at v_read, all else grounded."""
    if _linear(xbar, exact):
        def unit():
            c = xbar.cache()
            return -c.column_current(c.port_response(i), j)

        return v_read * xbar._memoized(("read", i, j), unit)
    sol = solve_network(xbar, _drive(xbar.geom, rows={i: v_read}))
    return -float(sol.port_currents[xbar.geom.rows + j])


def read_device(xbar: Crossbar, i: int, j: int, v_read: float = 0.2, exact: bool = False) -> float:
    """Effective conductance (uS) from one noisy current measurement."""
    eps = xbar.rng.normal(0.0, xbar.params.read_noise_std / NA_PER_UA)
    return (read_current(xbar, i, j, v_read, exact) + eps) / v_read


def _pulse_response(xbar: Crossbar, i: int, j: int) -> np.ndarray:
    """Device voltages (15x15) per volt of v_apply under the V/2 drive on (i, j)."""
    def compute():
        c = xbar.cache()
        col = c.device_voltages(c.port_response(xbar.geom.rows + j))
        row = c.device_voltages(c.port_response(i))
        return (0.5 * (col - row)).reshape(xbar.shape)

    return xbar._memoized(("pulse", i, j), compute)


def device_voltages_for_pulse(xbar: Crossbar, i: int, j: int, v_apply: float,
                              exact: bool = False) -> np.ndarray:
    if _linear(xbar, exact):
        return v_apply * _pulse_response(xbar, i, j)
    drive = _drive(xbar.geom, rows={i: -v_apply / 2}, cols={j: v_apply / 2})
    return solve_network(xbar, drive).device_voltages


def write_pulse(xbar: Crossbar, i: int, j: int, v_apply: float, exact: bool = False) -> list:
    """V/2 pulse on (i, j); every device sees its own voltage. Returns who switched."""
    if v_apply == 0.0:
        return []
    dv = device_voltages_for_pulse(xbar, i, j, v_apply, exact)
    # thresholds are evaluated on the pre-pulse network (quasi-static pulse)
    to_on = (xbar.state == OFF) & (dv >= xbar.v_on)
    to_off = (xbar.state == ON) & (dv <= -xbar.v_off)
    switched = []
    for a, b in np.argwhere(to_on | to_off):
        xbar._set(int(a), int(b), ON if to_on[a, b] else OFF)
        switched.append((int(a), int(b)))
    return switched


@dataclass
class VerifyOutcome:
    row: int
    col: int
    target: int
    status: str  # "success", "failed" or "skipped"
    attempts: int = 0
    v_apply: float | None = None  # voltage of the last attempt
    ratio: float | None = None

    @property
    def ok(self) -> bool:
        return self.status == "success"


def ladder(cfg: VerifyConfig, v_max: float) -> np.ndarray:
    n = int(np.floor((v_max - cfg.v_start) / cfg.v_step + 1e-9)) + 1
    return np.round(cfg.v_start + cfg.v_step * np.arange(max(n, 0)), 10)


def write_verify(xbar: Crossbar, i: int, j: int, target: int, cfg: VerifyConfig = VerifyConfig(),
                 exact: bool = False) -> VerifyOutcome:
    """Four-pulse ladder: opposite pulse, read, target pulse, read; stop on a good ratio."""
    sign = 1.0 if target == ON else -1.0
    out = VerifyOutcome(i, j, int(target), "failed")
    for v in ladder(cfg, xbar.v_max()):
        write_pulse(xbar, i, j, -sign * v, exact)
        g_a = read_device(xbar, i, j, cfg.v_read, exact)
        write_pulse(xbar, i, j, sign * v, exact)
        g_b = read_device(xbar, i, j, cfg.v_read, exact)
        on_side, off_side = (g_b, g_a) if target == ON else (g_a, g_b)
        out.attempts += 1
        out.v_apply = float(v)
        out.ratio = float(on_side / off_side) if off_side != 0 else float("inf")
        if out.ratio >= cfg.ratio_threshold:
            out.status = "success"
            break
    return out


def _fraction(outcomes: list) -> float | None:
    tried = [o for o in outcomes if o.status != "skipped"]
    return sum(o.ok for o in tried) / len(tried) if tried else None


@dataclass
class WriteReport:
    clear_passes: list = field(default_factory=list)  # list of per-pass outcome lists
    writes: list = field(default_factory=list)  # outcomes of on-writes, skipped cells included

    @property
    def clear_accuracy(self) -> float | None:
        """Success fraction of the final clear pass."""
        return _fraction(self.clear_passes[-1]) if self.clear_passes else None

    @property
    def clear_pass_accuracy(self) -> list:
        return [_fraction(p) for p in self.clear_passes]

    @property
    def write_accuracy(self) -> float | None:
        """Successful on-writes over attempted on-writes (None if nothing was written)."""
        return _fraction(self.writes)

    @property
    def max_voltage(self) -> float | None:
        vs = [o.v_apply for p in self.clear_passes + [self.writes] for o in p if o.v_apply is not None]
        return max(vs) if vs else None

    def failed_cells(self) -> list:
        return [(o.row, o.col) for o in self.writes if o.status == "failed"]

    def to_dict(self) -> dict:
        return {
            "clear_accuracy": self.clear_accuracy,
            "clear_pass_accuracy": self.clear_pass_accuracy,
            "write_accuracy": self.write_accuracy,
            "max_voltage": self.max_voltage,
            "n_attempted_writes": sum(o.status != "skipped" for o in self.writes),
            "failed_writes": [[r + 1, c + 1] for r, c in self.failed_cells()],
            "writes": [asdict(o) for o in self.writes if o.status != "skipped"],
        }


def clear_array(xbar: Crossbar, cfg: VerifyConfig = VerifyConfig(), exact: bool = False,
                passes: int = 2) -> WriteReport:
    report = WriteReport()
    for _ in range(passes):
        report.clear_passes.append([
            write_verify(xbar, i, j, OFF, cfg, exact) for i in range(ROWS) for j in range(COLS)
        ])
    return report


def program_solution(xbar: Crossbar, targets, cfg: VerifyConfig = VerifyConfig(),
                     exact: bool = False) -> WriteReport:
    """Clear, then write-verify exactly the cells marked on, row-major."""
    targets = np.asarray(getattr(targets, "states", targets), dtype=int)
    if targets.shape != (ROWS, COLS):
        raise ValueError("targets must be 15x15")
    report = clear_array(xbar, cfg, exact)
    for i in range(ROWS):
        for j in range(COLS):
            if targets[i, j]:
                report.writes.append(write_verify(xbar, i, j, ON, cfg, exact))
            else:
                report.writes.append(VerifyOutcome(i, j, OFF, "skipped"))
    return report


@dataclass
class ConductanceMap:
    values: np.ndarray  # (15, 15) uS

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (ROWS, COLS):
            raise ValueError("conductance map must be 15x15")

    def to_dict(self) -> dict:
        return {"unit": "uS", "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ConductanceMap":
        return cls(np.array(d["values"], dtype=float))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for row in self.values:
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    def save_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv())

    def save_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")


def read_all(xbar: Crossbar, v_read: float = 0.2, exact: bool = False) -> ConductanceMap:
    return ConductanceMap(np.array([
        [read_device(xbar, i, j, v_read, exact) for j in range(COLS)] for i in range(ROWS)
    ]))


def effective_switching_map(xbar: Crossbar, cfg: VerifyConfig = VerifyConfig()) -> np.ndarray:
    """Lowest ladder voltage at which each device, alone in an all-off array, writes on.

    NaN marks devices that fail under the cap. The array is returned to all-off.
    """
    xbar.set_states(np.zeros((ROWS, COLS), int))
    out = np.full((ROWS, COLS), np.nan)
    for i in range(ROWS):
        for j in range(COLS):
            res = write_verify(xbar, i, j, ON, cfg)
            if res.ok:
                out[i, j] = res.v_apply
            xbar.set_states(np.zeros((ROWS, COLS), int))
    return out
