"""Nodal analysis of a passive crossbar with resistive row/column lines.

Every crossing (i, j) owns two nodes: one on row line i and one on column line j,
joined by the device conductance. Lines are resistor chains; each line ends in a
port reached through contact plus lead resistance. Ports are either held at a
voltage (grounded is 0 V) or left floating.

Resistors of exactly 0 ohm are contracted (their end nodes merged) before the
system is assembled, so the ideal-wire limit is solved exactly rather than
approximated by a huge conductance.

Units: uS, V, uA.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

SIEMENS_TO_US = 1e6


class SingularNetworkError(RuntimeError):
    """No port fixes a potential, so node voltages are undetermined."""


class ConvergenceError(RuntimeError):
    """Fixed-point iteration for a nonlinear device model did not settle."""


def triangular_profile(n: int, amplitude: float) -> np.ndarray:
    """Extra lead resistance per line, peaking at the center line and 0 at the edges."""
    if n == 1:
        return np.array([amplitude], dtype=float)
    c = (n - 1) / 2.0
    return amplitude * (1.0 - np.abs(np.arange(n) - c) / c)


@dataclass(frozen=True)
class Geometry:
    rows: int = 15
    cols: int = 15
    r_segment: float = 20.0  # ohm between adjacent crossings
    r_contact: float = 0.0  # ohm at every port
    row_lead: tuple = ()  # ohm per row line; empty means none
    col_lead: tuple = ()
    row_port_side: str = "left"  # or "right"
    col_port_side: str = "bottom"  # or "top"

    def __post_init__(self):
        if self.r_segment < 0 or self.r_contact < 0:
            raise ValueError("resistances must be >= 0")
        if self.row_port_side not in ("left", "right") or self.col_port_side not in ("bottom", "top"):
            raise ValueError("bad port side")
        for name, n in (("row_lead", self.rows), ("col_lead", self.cols)):
            lead = getattr(self, name)
            if len(lead) not in (0, n) or any(r < 0 for r in lead):
                raise ValueError(f"{name} must be empty or {n} non-negative values")

    @property
    def n_devices(self) -> int:
        return self.rows * self.cols

    @property
    def n_ports(self) -> int:
        return self.rows + self.cols

    def port_resistance(self) -> np.ndarray:
        rl = np.asarray(self.row_lead, float) if self.row_lead else np.zeros(self.rows)
        cl = np.asarray(self.col_lead, float) if self.col_lead else np.zeros(self.cols)
        return self.r_contact + np.concatenate([rl, cl])

    # node numbering: row nodes, column nodes, then port nodes
    def row_node(self, i, j):
        return i * self.cols + j

    def col_node(self, i, j):
        return self.n_devices + i * self.cols + j

    def port_node(self, k):
        return 2 * self.n_devices + k

    @property
    def n_nodes(self) -> int:
        return 2 * self.n_devices + self.n_ports

    def resistors(self) -> list[tuple[int, int, float]]:
        """Static line/port resistors as (node_a, node_b, ohm)."""
        out = []
        r = self.r_segment
        for i in range(self.rows):
            for j in range(self.cols - 1):
                out.append((self.row_node(i, j), self.row_node(i, j + 1), r))
        for j in range(self.cols):
            for i in range(self.rows - 1):
                out.append((self.col_node(i, j), self.col_node(i + 1, j), r))
        rp = self.port_resistance()
        j_end = 0 if self.row_port_side == "left" else self.cols - 1
        i_end = self.rows - 1 if self.col_port_side == "bottom" else 0
        for i in range(self.rows):
            out.append((self.port_node(i), self.row_node(i, j_end), rp[i]))
        for j in range(self.cols):
            out.append((self.port_node(self.rows + j), self.col_node(i_end, j), rp[self.rows + j]))
        return out

    def device_nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """(row-node, column-node) index of every device, row-major."""
        idx = np.arange(self.n_devices)
        return idx, self.n_devices + idx


@dataclass
class NetworkSolve:
    node_voltages: np.ndarray  # (2 * rows * cols,) row nodes then column nodes
    port_currents: np.ndarray  # (rows + cols,) current flowing from each port into the array
    device_voltages: np.ndarray = field(default=None)  # column node minus row node, (rows, cols)


def line_currents(g: np.ndarray, dv: np.ndarray) -> np.ndarray:
    """Port currents into the array from device currents, by KCL on each line.

    A line connects only its port and its devices, so its port current is the sum
    of its device currents. Each device contributes +x to its row and -x to its
    column, which keeps the total exactly balanced in floating point.
    """
    i_dev = g * dv  # column node to row node
    return np.concatenate([-i_dev.sum(axis=1), i_dev.sum(axis=0)])


class Network:
    """Topology of one crossbar, with 0-ohm resistors contracted into node groups."""

    def __init__(self, geom: Geometry):
        self.geom = geom
        n = geom.n_nodes
        parent = list(range(n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        finite = []
        for a, b, r in geom.resistors():
            if r == 0.0:
                parent[find(a)] = find(b)
            else:
                finite.append((a, b, r))
        roots = np.array([find(a) for a in range(n)])
        _, group = np.unique(roots, return_inverse=True)
        self.group = group
        self.n_groups = int(group.max()) + 1
        self.port_group = group[[geom.port_node(k) for k in range(geom.n_ports)]]
        if len(set(self.port_group.tolist())) != geom.n_ports:
            raise ValueError("two ports are shorted together")

        lap = np.zeros((self.n_groups, self.n_groups))
        for a, b, r in finite:
            ga, gb = group[a], group[b]
            if ga == gb:
                continue
            g = SIEMENS_TO_US / r
            lap[ga, ga] += g
            lap[gb, gb] += g
            lap[ga, gb] -= g
            lap[gb, ga] -= g
        self.static_laplacian = lap
        rn, cn = geom.device_nodes()
        self.dev_row_group = group[rn]
        self.dev_col_group = group[cn]
        if np.any(self.dev_row_group == self.dev_col_group):
            raise ValueError("device shorted by 0-ohm lines")
        self.line_groups = group[: 2 * geom.n_devices]

    def laplacian(self, g_dev: np.ndarray) -> np.ndarray:
        lap = self.static_laplacian.copy()
        g = np.asarray(g_dev, float).ravel()
        a, b = self.dev_row_group, self.dev_col_group
        np.add.at(lap, (a, a), g)
        np.add.at(lap, (b, b), g)
        np.add.at(lap, (a, b), -g)
        np.add.at(lap, (b, a), -g)
        return lap

    def _partition(self, drive: np.ndarray):
        drive = np.asarray(drive, float)
        if drive.shape != (self.geom.n_ports,):
            raise ValueError(f"drive must have {self.geom.n_ports} entries")
        fixed = ~np.isnan(drive)
        if not fixed.any():
            raise SingularNetworkError("all ports floating")
        is_dir = np.zeros(self.n_groups, bool)
        v = np.zeros(self.n_groups)
        is_dir[self.port_group[fixed]] = True
        v[self.port_group[fixed]] = drive[fixed]
        return is_dir, v

    def solve_linear(self, g_dev: np.ndarray, drive: np.ndarray) -> NetworkSolve:
        is_dir, v = self._partition(drive)
        lap = self.laplacian(g_dev)
        free = ~is_dir
        if free.any():
            a = lap[np.ix_(free, free)]
            rhs = -lap[np.ix_(free, is_dir)] @ v[is_dir]
            try:
                v[free] = scipy.linalg.solve(a, rhs, assume_a="pos")
            except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
                raise SingularNetworkError(str(exc)) from None
        return self._result(g_dev, v, drive)

    def _result(self, g, v, drive) -> NetworkSolve:
        dv = (v[self.dev_col_group] - v[self.dev_row_group]).reshape(self.geom.rows, self.geom.cols)
        # a floating line reports its device-current sum, which is the solve residual;
        # zeroing it would leave that residual unbalanced in the port total
        currents = line_currents(np.asarray(g, float).reshape(dv.shape), dv)
        return NetworkSolve(v[self.line_groups], currents, dv)

    def solve(self, g_base: np.ndarray, drive: np.ndarray, nonlinearity: float = 0.0,
              tol: float = 1e-9, max_iter: int = 100) -> NetworkSolve:
        """Solve the network; with nonlinearity > 0 iterate g = g0 / (1 + alpha dv^2)."""
        g_base = np.asarray(g_base, float).ravel()
        sol = self.solve_linear(g_base, drive)
        if nonlinearity == 0.0:
            return sol
        for _ in range(max_iter):
            dv = sol.device_voltages.ravel()
            g = g_base / (1.0 + nonlinearity * dv * dv)
            nxt = self.solve_linear(g, drive)
            if np.max(np.abs(nxt.device_voltages - sol.device_voltages)) < tol:
                return nxt
            sol = nxt
        raise ConvergenceError(f"no convergence in {max_iter} iterations")


class ResponseCache:
    """Potentials for unit drive on one port with every other port grounded.

    With all ports held at fixed potentials the system matrix does not depend on
    which ports are driven. The inverse of the free-node block is computed for a
    base set of conductances; later device changes are kept as a short list of
    rank-1 corrections and applied through the Woodbury identity. A device that
    toggles and returns to its base value drops out of the list. Once more than
    `max_pending` devices differ from the base, the inverse is rebuilt exactly.
    """

    def __init__(self, net: Network, g_dev: np.ndarray, max_pending: int = 48):
        self.net = net
        self.max_pending = max_pending
        is_dir = np.zeros(net.n_groups, bool)
        is_dir[net.port_group] = True
        self.free = np.flatnonzero(~is_dir)
        self.pos = np.full(net.n_groups, -1)
        self.pos[self.free] = np.arange(self.free.size)
        self.g = np.asarray(g_dev, float).ravel().copy()
        self.rebuild()

    def rebuild(self):
        self.lap = self.net.laplacian(self.g)
        self.base_g = self.g.copy()
        if self.free.size:
            self.ginv = scipy.linalg.inv(self.lap[np.ix_(self.free, self.free)])
        else:
            self.ginv = np.zeros((0, 0))
        self.pending: dict[int, float] = {}
        self._factor = None

    def set_conductance(self, d: int, g_new: float):
        dg = g_new - self.g[d]
        if dg == 0.0:
            return
        self.g[d] = g_new
        a, b = self.net.dev_row_group[d], self.net.dev_col_group[d]
        self.lap[a, a] += dg
        self.lap[b, b] += dg
        self.lap[a, b] -= dg
        self.lap[b, a] -= dg
        total = g_new - self.base_g[d]
        if total == 0.0:
            self.pending.pop(d, None)
        else:
            self.pending[d] = total
        self._factor = None
        if len(self.pending) > self.max_pending:
            self.rebuild()

    def _woodbury(self):
        if self._factor is None:
            keys = [d for d in self.pending if self._couples_free(d)]
            if not keys:
                self._factor = (None, None)
                return self._factor
            gu = np.empty((self.free.size, len(keys)))
            for c, d in enumerate(keys):
                gu[:, c] = self._ginv_times_incidence(d)
            # U^T G U, row c is the incidence of device keys[c] applied to gu
            utgu = np.array([self._incidence_dot(d, gu) for d in keys])
            cap = np.diag([1.0 / self.pending[d] for d in keys]) + utgu
            self._factor = (gu, scipy.linalg.lu_factor(cap))
        return self._factor

    def _couples_free(self, d) -> bool:
        return self.pos[self.net.dev_row_group[d]] >= 0 or self.pos[self.net.dev_col_group[d]] >= 0

    def _ginv_times_incidence(self, d):
        pa, pb = self.pos[self.net.dev_row_group[d]], self.pos[self.net.dev_col_group[d]]
        out = np.zeros(self.free.size)
        if pa >= 0:
            out += self.ginv[:, pa]
        if pb >= 0:
            out -= self.ginv[:, pb]
        return out

    def _incidence_dot(self, d, x):
        pa, pb = self.pos[self.net.dev_row_group[d]], self.pos[self.net.dev_col_group[d]]
        return (x[pa] if pa >= 0 else 0.0) - (x[pb] if pb >= 0 else 0.0)

    def port_response(self, k: int) -> np.ndarray:
        """Group potentials for 1 V on port k with all other ports grounded."""
        v = np.zeros(self.net.n_groups)
        pg = self.net.port_group[k]
        v[pg] = 1.0
        if self.free.size:
            col = self.lap[self.free, pg]
            nz = np.flatnonzero(col)
            x = -(self.ginv[:, nz] @ col[nz])
            gu, lu = self._woodbury()
            if gu is not None:
                x -= gu @ scipy.linalg.lu_solve(lu, gu.T @ (-col))
            v[self.free] = x
        return v

    def port_currents(self, v: np.ndarray) -> np.ndarray:
        geom = self.net.geom
        dv = self.device_voltages(v).reshape(geom.rows, geom.cols)
        return line_currents(self.g.reshape(dv.shape), dv)

    def column_current(self, v: np.ndarray, j: int) -> np.ndarray:
        """Current into the array at column port j."""
        geom = self.net.geom
        d = np.arange(geom.rows) * geom.cols + j
        return float(np.sum(self.g[d] * (v[self.net.dev_col_group[d]] - v[self.net.dev_row_group[d]])))

    def device_voltages(self, v: np.ndarray) -> np.ndarray:
        return v[self.net.dev_col_group] - v[self.net.dev_row_group]


def mna_oracle(geom: Geometry, g_dev: np.ndarray, drive: np.ndarray):
    """Independent dense modified-nodal-analysis solve on the raw (uncontracted) nodes.

    Ports are ideal voltage sources to ground and 0-ohm resistors are 0 V sources,
    so the unknowns are every node voltage plus every source current. Returns
    (node_voltages of line nodes, port currents into the array).
    """
    n = geom.n_nodes
    g_dev = np.asarray(g_dev, float).ravel()
    drive = np.asarray(drive, float)
    sources = []  # (node_plus, node_minus or -1 for ground, volts)
    a = np.zeros((n, n))

    def stamp(p, q, g):
        a[p, p] += g
        a[q, q] += g
        a[p, q] -= g
        a[q, p] -= g

    for p, q, r in geom.resistors():
        if r == 0.0:
            sources.append((p, q, 0.0))
        else:
            stamp(p, q, SIEMENS_TO_US / r)
    rn, cn = geom.device_nodes()
    for d in range(geom.n_devices):
        stamp(rn[d], cn[d], g_dev[d])
    port_src = {}
    for k in range(geom.n_ports):
        if not np.isnan(drive[k]):
            port_src[k] = len(sources)
            sources.append((geom.port_node(k), -1, drive[k]))
    m = len(sources)
    big = np.zeros((n + m, n + m))
    big[:n, :n] = a
    rhs = np.zeros(n + m)
    for s, (p, q, volts) in enumerate(sources):
        big[p, n + s] += 1.0
        big[n + s, p] += 1.0
        if q >= 0:
            big[q, n + s] -= 1.0
            big[n + s, q] -= 1.0
        rhs[n + s] = volts
    x = np.linalg.solve(big, rhs)
    currents = np.zeros(geom.n_ports)
    for k, s in port_src.items():
        # MNA source current flows from + terminal through the source; into the array is its negative
        currents[k] = -x[n + s]
    return x[: 2 * geom.n_devices], currents
