"""Periodic grids on the flat torus C / (Z + tau Z) and the operators that act on them.

Node ``(i, j)`` sits at ``z = (i + j * tau) / N``.  Axis 0 runs along the
lattice vector 1 and axis 1 along ``tau``.  All Laplacians use the positive
sign convention ``Lap = -d_xx - d_yy``.
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError, ShapeError, ValidationError

MAGIC = b"CMF1"


def fft_workers() -> int:
    raw = os.environ.get("CONEMETRIC_THREADS")
    if raw is None:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass(frozen=True)
class TorusGrid:
    tau: complex = 1j
    n: int = 256

    def __post_init__(self):
        object.__setattr__(self, "tau", complex(self.tau))
        if not self.tau.imag > 0:
            raise ConfigurationError("tau must lie in the upper half plane")
        if self.n < 32 or self.n & (self.n - 1):
            raise ConfigurationError(f"grid size must be a power of two >= 32, got {self.n}")

    @property
    def area(self) -> float:
        return self.tau.imag

    @property
    def cell_area(self) -> float:
        return self.tau.imag / self.n ** 2

    @property
    def spacing(self) -> float:
        """Shortest distance between neighbouring nodes."""
        return min(1.0, abs(self.tau), abs(self.tau - 1), abs(self.tau + 1)) / self.n

    @cached_property
    def nodes(self) -> np.ndarray:
        i = np.arange(self.n)
        return (i[:, None] + i[None, :] * self.tau) / self.n

    @cached_property
    def symbol(self) -> np.ndarray:
        """Eigenvalues of Lap on the Fourier modes exp(2 pi i (m s + k t))."""
        f = sfft.fftfreq(self.n, 1.0 / self.n)
        m, k = f[:, None], f[None, :]
        a, b = self.tau.real, self.tau.imag
        return 4 * np.pi ** 2 * (m ** 2 + ((k - a * m) / b) ** 2)

    def snap(self, z: complex) -> tuple[int, int]:
        """Indices of the node nearest to ``z`` (in lattice coordinates, wrapped)."""
        t = z.imag / self.tau.imag
        s = z.real - self.tau.real * t
        return int(round(s * self.n)) % self.n, int(round(t * self.n)) % self.n

    def node(self, ij: tuple[int, int]) -> complex:
        return (ij[0] + ij[1] * self.tau) / self.n

    def displacement(self, z, p: complex) -> np.ndarray:
        """Shortest representative of ``z - p`` modulo the lattice."""
        d = np.asarray(z, dtype=complex) - p
        t = d.imag / self.tau.imag
        s = d.real - self.tau.real * t
        s -= np.floor(s + 0.5)
        t -= np.floor(t + 0.5)
        base = s + t * self.tau
        best = base
        for ds in (-1, 0, 1):
            for dt in (-1, 0, 1):
                if ds == dt == 0:
                    continue
                cand = base + ds + dt * self.tau
                best = np.where(np.abs(cand) < np.abs(best), cand, best)
        return best

    def distance(self, z, p: complex) -> np.ndarray:
        return np.abs(self.displacement(z, p))

    def injectivity_radius(self) -> float:
        return 0.5 * min(1.0, abs(self.tau), abs(self.tau - 1), abs(self.tau + 1))

    def to_dict(self) -> dict:
        return {"n": self.n, "tau": [self.tau.real, self.tau.imag]}


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n, self.grid.n):
            raise ShapeError(f"field shape {v.shape} does not match grid {self.grid.n}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def mean(self) -> float:
        return float(self.values.mean())

    def sup(self) -> float:
        return float(np.abs(self.values).max())


def _same_grid(*fields: ScalarField) -> TorusGrid:
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise ShapeError("fields live on different grids")
    return g


def integrate(field: ScalarField, weight: ScalarField | None = None) -> float:
    """Lattice (trapezoidal) sum of ``field * weight`` times the cell area."""
    if weight is None:
        g = field.grid
        prod = field.values
    else:
        g = _same_grid(field, weight)
        prod = field.values * weight.values
    return float(np.sum(prod) * g.cell_area)


def spectral_laplacian(grid: TorusGrid, values: np.ndarray) -> np.ndarray:
    w = fft_workers()
    return sfft.ifft2(grid.symbol * sfft.fft2(values, workers=w), workers=w).real


def inverse_laplacian(grid: TorusGrid, values: np.ndarray) -> np.ndarray:
    """Mean-zero solution of Lap u = values (the mean of ``values`` is discarded)."""
    w = fft_workers()
    hat = sfft.fft2(values, workers=w)
    sym = grid.symbol.copy()
    sym[0, 0] = 1.0
    hat = hat / sym
    hat[0, 0] = 0.0
    return sfft.ifft2(hat, workers=w).real


def shifted_inverse(grid: TorusGrid, values: np.ndarray, shift: float) -> np.ndarray:
    """Solve (Lap + shift) u = values spectrally; ``shift`` must be positive."""
    w = fft_workers()
    return sfft.ifft2(sfft.fft2(values, workers=w) / (grid.symbol + shift), workers=w).real


def fd_laplacian(grid: TorusGrid, values: np.ndarray) -> np.ndarray:
    """Second-order central-difference Lap, written in lattice coordinates.

    With x = s + a t, y = b t one has d_x = d_s and d_y = (d_t - a d_s) / b.
    """
    v = values
    h = 1.0 / grid.n
    a, b = grid.tau.real, grid.tau.imag
    vss = (np.roll(v, -1, 0) - 2 * v + np.roll(v, 1, 0)) / h ** 2
    vtt = (np.roll(v, -1, 1) - 2 * v + np.roll(v, 1, 1)) / h ** 2
    lap = vss + (vtt + a * a * vss) / b ** 2
    if a != 0:
        vst = (np.roll(np.roll(v, -1, 0), -1, 1) - np.roll(np.roll(v, -1, 0), 1, 1)
               - np.roll(np.roll(v, 1, 0), -1, 1) + np.roll(np.roll(v, 1, 0), 1, 1)) / (4 * h * h)
        lap = lap - 2 * a * vst / b ** 2
    return -lap


def fd_laplacian4(grid: TorusGrid, values: np.ndarray) -> np.ndarray:
    """Fourth-order central-difference Lap on the lattice grid."""
    v = values
    h = 1.0 / grid.n
    a, b = grid.tau.real, grid.tau.imag

    def d2(axis):
        return (-np.roll(v, -2, axis) + 16 * np.roll(v, -1, axis) - 30 * v
                + 16 * np.roll(v, 1, axis) - np.roll(v, 2, axis)) / (12 * h * h)

    vss, vtt = d2(0), d2(1)
    lap = vss + (vtt + a * a * vss) / b ** 2
    if a != 0:
        def d1(x, axis):
            return (-np.roll(x, -2, axis) + 8 * np.roll(x, -1, axis)
                    - 8 * np.roll(x, 1, axis) + np.roll(x, 2, axis)) / (12 * h)

        lap = lap - 2 * a * d1(d1(v, 0), 1) / b ** 2
    return -lap


def fd_curvature(grid: TorusGrid, log_factor: np.ndarray, order: int = 4) -> np.ndarray:
    """Curvature exp(-2w) Lap w of exp(2w)|dz|^2 from a finite-difference Laplacian."""
    lap = fd_laplacian4 if order == 4 else fd_laplacian
    return np.exp(-2 * log_factor) * lap(grid, log_factor)


def interpolate(grid: TorusGrid, values: np.ndarray, z) -> np.ndarray:
    """Periodic cubic-spline interpolation of node values at points ``z``."""
    from scipy.ndimage import map_coordinates

    z = np.asarray(z, dtype=complex)
    t = z.imag / grid.tau.imag
    s = z.real - grid.tau.real * t
    coords = np.stack([np.ravel(s * grid.n), np.ravel(t * grid.n)])
    out = map_coordinates(values, coords, order=3, mode="grid-wrap")
    return out.reshape(z.shape)


# ---------------------------------------------------------------------------
# serialization


def write_field(field: ScalarField, path: str | Path) -> None:
    g = field.grid
    header = MAGIC + struct.pack("<qdd", g.n, g.tau.real, g.tau.imag)
    Path(path).write_bytes(header + np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_field(path: str | Path) -> ScalarField:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValidationError(f"{path}: not a CMF1 field container")
    n, re, im = struct.unpack("<qdd", raw[4:28])
    payload = np.frombuffer(raw[28:], dtype="<f8")
    if payload.size != n * n:
        raise ValidationError(f"{path}: payload holds {payload.size} values, expected {n * n}")
    return ScalarField(TorusGrid(complex(re, im), int(n)), payload.reshape(n, n))


def write_field_csv(field: ScalarField, path: str | Path) -> None:
    g = field.grid
    z = g.nodes
    rows = ["i,j,x,y,value"]
    for i in range(g.n):
        for j in range(g.n):
            rows.append(f"{i},{j},{float(z[i, j].real)!r},{float(z[i, j].imag)!r},{float(field.values[i, j])!r}")
    Path(path).write_text("\n".join(rows) + "\n")
