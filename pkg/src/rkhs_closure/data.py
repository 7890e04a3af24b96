"""Time-series containers, delay-state construction and CSV I/O."""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "TimeSeriesDataset",
    "DelayConfig",
    "DesignMatrices",
    "build_delay_states",
    "stack_designs",
    "read_csv",
    "write_csv",
    "DataError",
]


class DataError(ValueError):
    """Raised for malformed datasets, files or delay requests."""


def _as_matrix(a, name):
    a = np.array(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise DataError(f"{name} must be a 1-d or 2-d array, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class TimeSeriesDataset:
    """Paired samples ``(x_i, y_i)`` at a fixed time lag ``tau``.

    Parameters
    ----------
    tau : float
        Time between consecutive rows.
    x : (N, n_x) array
        Resolved ("relevant") variables.
    y : (N, n_y) array
        Unresolved ("irrelevant") variables, or the identifiable functions
        of them that enter the resolved equations.
    t0 : float
        Time stamp of the first row.
    x_names, y_names : tuple of str, optional
        Column names used for CSV output. Default ``x1..``, ``y1..``.
    """

    tau: float
    x: np.ndarray
    y: np.ndarray
    t0: float = 0.0
    x_names: tuple = field(default=None)
    y_names: tuple = field(default=None)

    def __post_init__(self):
        x = _as_matrix(self.x, "x")
        y = _as_matrix(self.y, "y")
        if x.shape[0] < 1:
            raise DataError("dataset needs at least one row")
        if x.shape[0] != y.shape[0]:
            raise DataError(f"x has {x.shape[0]} rows but y has {y.shape[0]}")
        if x.shape[1] < 1 or y.shape[1] < 1:
            raise DataError("x and y need at least one column each")
        if not self.tau > 0:
            raise DataError(f"tau must be positive, got {self.tau}")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "t0", float(self.t0))
        xn = self.x_names or tuple(f"x{j + 1}" for j in range(x.shape[1]))
        yn = self.y_names or tuple(f"y{j + 1}" for j in range(y.shape[1]))
        if len(xn) != x.shape[1] or len(yn) != y.shape[1]:
            raise DataError("column name count does not match data width")
        object.__setattr__(self, "x_names", tuple(xn))
        object.__setattr__(self, "y_names", tuple(yn))

    @property
    def N(self):
        return self.x.shape[0]

    @property
    def n_x(self):
        return self.x.shape[1]

    @property
    def n_y(self):
        return self.y.shape[1]

    @property
    def t(self):
        return self.t0 + self.tau * np.arange(self.N)

    def slice(self, start, stop=None):
        """Return rows ``start:stop`` as a new dataset with shifted ``t0``."""
        start, stop, _ = slice(start, stop).indices(self.N)
        return TimeSeriesDataset(self.tau, self.x[start:stop], self.y[start:stop],
                                 self.t0 + start * self.tau, self.x_names, self.y_names)


@dataclass(frozen=True)
class DelayConfig:
    """Memory depths of the delay state ``z_t = (x_{t-m:t}, y_{t-n:t-1})``.

    ``m = -1`` drops the x-block entirely, ``n = 0`` drops the y-block.
    """

    m: int
    n: int

    def __post_init__(self):
        if int(self.m) != self.m or int(self.n) != self.n:
            raise DataError("m and n must be integers")
        if self.m < -1:
            raise DataError(f"m must be >= -1, got {self.m}")
        if self.n < 0:
            raise DataError(f"n must be >= 0, got {self.n}")
        if self.m == -1 and self.n == 0:
            raise DataError("empty delay state: m = -1 together with n = 0")

    @property
    def lag(self):
        """Number of leading samples consumed by the memory window."""
        return max(self.m, self.n)

    def n_z(self, n_x, n_y):
        return (self.m + 1) * n_x + self.n * n_y


@dataclass(frozen=True)
class DesignMatrices:
    """Delay states ``Z`` and aligned targets ``G``.

    Row ``j`` of both matrices belongs to sample index ``row_index_map[j]``.
    """

    Z: np.ndarray
    G: np.ndarray
    row_index_map: np.ndarray

    def __post_init__(self):
        if self.Z.shape[0] != self.G.shape[0]:
            raise DataError("Z and G row counts differ")

    @property
    def M(self):
        return self.Z.shape[0]


def delay_window(x, y, cfg, i):
    """Delay state at sample ``i`` of the raw arrays ``x``, ``y``."""
    parts = []
    if cfg.m >= 0:
        parts.append(x[i - cfg.m:i + 1].ravel())
    if cfg.n > 0:
        parts.append(y[i - cfg.n:i].ravel())
    return np.concatenate(parts)


def build_delay_states(ds, cfg, target="Y"):
    """Assemble the regression problem ``z_i -> g(y_i)``.

    Parameters
    ----------
    ds : TimeSeriesDataset
    cfg : DelayConfig
    target : "Y" or array_like, optional
        ``"Y"`` regresses onto ``y_i``; an ``(N, n_g)`` array supplies
        arbitrary target rows aligned with the dataset rows.

    Returns
    -------
    DesignMatrices
        ``M = N - max(m, n)`` rows; the columns of ``Z`` are
        ``x_{i-m}, ..., x_i`` followed by ``y_{i-n}, ..., y_{i-1}``, each
        block oldest first, with the components of a vector sample
        contiguous.
    """
    lag = cfg.lag
    N = ds.N
    if N <= lag:
        raise DataError(f"dataset of length {N} too short for memory max(m, n) = {lag}")
    if isinstance(target, str):
        if target != "Y":
            raise DataError(f"unknown target {target!r}")
        G = ds.y
    else:
        G = _as_matrix(target, "target")
        if G.shape[0] != N:
            raise DataError(f"target has {G.shape[0]} rows, dataset has {N}")
    M = N - lag
    idx = np.arange(lag, N)
    blocks = []
    # column block for delay d holds x_{i-d}; oldest first
    for d in range(cfg.m, -1, -1):
        blocks.append(ds.x[lag - d:N - d])
    for d in range(cfg.n, 0, -1):
        blocks.append(ds.y[lag - d:N - d])
    Z = np.hstack(blocks) if blocks else np.empty((M, 0))
    return DesignMatrices(np.ascontiguousarray(Z), np.array(G[lag:], dtype=float), idx)


def stack_designs(designs):
    """Concatenate design matrices built from independent trajectories."""
    designs = list(designs)
    Z = np.vstack([d.Z for d in designs])
    G = np.vstack([d.G for d in designs])
    idx = np.concatenate([d.row_index_map for d in designs])
    return DesignMatrices(Z, G, idx)


_XY_COL = re.compile(r"^([xy])(\d+)$")


def write_csv(ds, path):
    """Write ``ds`` as CSV with columns ``t, x..., y...``.

    Values are printed with 17 significant digits so a read round-trips
    the binary doubles exactly.
    """
    path = Path(path)
    header = ["t", *ds.x_names, *ds.y_names]
    data = np.column_stack([ds.t, ds.x, ds.y])
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        np.savetxt(fh, data, delimiter=",", fmt="%.17g", newline="\n")


def read_csv(path, x_columns=None):
    """Read a dataset written by :func:`write_csv`.

    Parameters
    ----------
    path : path-like
    x_columns : sequence of str, optional
        Names of the resolved columns. By default columns named ``x<k>`` are
        resolved and ``y<k>`` unresolved; files with other names need this.

    Raises
    ------
    DataError
        Missing header, malformed rows or non-uniform timestamps.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric field") from None
    if not header or header[0] != "t":
        raise DataError(f"{path}: header must start with column 't'")
    if any(_is_number(h) for h in header):
        raise DataError(f"{path}: missing header row")
    names = header[1:]
    if x_columns is None:
        x_names = [h for h in names if _XY_COL.match(h) and h[0] == "x"]
        y_names = [h for h in names if _XY_COL.match(h) and h[0] == "y"]
        if len(x_names) + len(y_names) != len(names):
            raise DataError(f"{path}: columns other than x<k>/y<k> need explicit x_columns")
    else:
        x_names = list(x_columns)
        missing = set(x_names) - set(names)
        if missing:
            raise DataError(f"{path}: unknown x columns {sorted(missing)}")
        y_names = [h for h in names if h not in x_names]
    if not rows:
        raise DataError(f"{path}: no data rows")
    data = np.array(rows)
    t = data[:, 0]
    if len(t) >= 2:
        tau = (t[-1] - t[0]) / (len(t) - 1)
        if not tau > 0:
            raise DataError(f"{path}: timestamps must increase")
        steps = np.diff(t)
        if np.max(np.abs(steps - tau)) > 1e-9 * tau:
            raise DataError(f"{path}: non-uniform timestamps")
    else:
        tau = 1.0
    col = {h: j + 1 for j, h in enumerate(names)}
    x = data[:, [col[h] for h in x_names]]
    y = data[:, [col[h] for h in y_names]]
    return TimeSeriesDataset(tau, x, y, t0=t[0], x_names=tuple(x_names), y_names=tuple(y_names))


def _is_number(s):
    try:
        float(s)
    except ValueError:
        return False
    return True
