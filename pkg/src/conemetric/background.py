"""Singular background metrics g1 = exp(2 w0) |dz|^2 on a torus grid.

Around each divisor point the log factor is ``beta * chi(r) * log r`` where the
cutoff ``chi`` equals 1 on ``r <= delta/2`` and 0 on ``r >= delta``.  The
cutoff is a C-infinity stretched-erf smooth step; its curvature source
``rho * K1 = Lap w0`` is evaluated in closed form, so it is exactly zero on the
inner disks and outside the cutoff annuli.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .divisor import Divisor, TORUS
from .errors import ConfigurationError, HypothesisError
from .grid import ScalarField, TorusGrid

CUTOFF_NAME = "stretched-erf-Cinf"
STEP_SCALE = 4.0
STEP_STRETCH = 0.15

# mean of log(r / h) over the square [-h/2, h/2]^2
_CELL_LOG_MEAN = (math.pi / 2 - 3.0 - math.log(2.0)) / 2


def smoothstep(s: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """psi(s) rising from 0 (s <= 0) to 1 (s >= 1), with its first two derivatives.

    psi = (1 + erf(a)) / 2 with a = X y (1 - y^2)^(-P), y = 2s - 1.  The stretch
    makes every derivative vanish at both ends; the erf core keeps the Fourier
    tail short enough for the source to be resolved on moderate grids.
    """
    s = np.asarray(s, dtype=float)
    psi = np.where(s >= 1, 1.0, 0.0)
    d1 = np.zeros_like(s)
    d2 = np.zeros_like(s)
    m = (s > 0) & (s < 1)
    X, P = STEP_SCALE, STEP_STRETCH
    y = 2 * s[m] - 1
    q = 1 - y * y
    a = X * y * q ** -P
    a1 = X * (q ** -P + 2 * P * y * y * q ** (-P - 1))
    a2 = X * (6 * P * y * q ** (-P - 1) + 4 * P * (P + 1) * y ** 3 * q ** (-P - 2))
    e = np.exp(-a * a)
    psi[m] = 0.5 * (1 + erf(a))
    d1[m] = 2 / math.sqrt(math.pi) * e * a1
    d2[m] = 4 / math.sqrt(math.pi) * e * (a2 - 2 * a * a1 * a1)
    return psi, d1, d2


def cutoff(r: np.ndarray, delta: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """chi(r), chi'(r), chi''(r) for the cutoff of radius ``delta``."""
    half = delta / 2
    psi, d1, d2 = smoothstep((np.asarray(r) - half) / half)
    return 1 - psi, -d1 / half, -d2 / half ** 2


def cell_log_mean(grid: TorusGrid) -> float:
    """Average of log r over one grid cell centred on the origin (square-cell value)."""
    return math.log(math.sqrt(grid.cell_area)) + _CELL_LOG_MEAN


@dataclass(frozen=True, eq=False)
class BackgroundMetric:
    divisor: Divisor
    grid: TorusGrid
    delta: float
    nodes: tuple[tuple[int, int], ...]
    w0: ScalarField
    rho: ScalarField
    K1: ScalarField
    source: ScalarField  # rho * K1 = Lap w0 away from the points
    singular: np.ndarray = field(repr=False)
    core: np.ndarray = field(repr=False)  # nodes within delta/2 of some point
    disk: np.ndarray = field(repr=False)  # nodes within delta of some point

    @property
    def positions(self) -> list[complex]:
        return [self.grid.node(ij) for ij in self.nodes]

    def info(self) -> dict:
        return {
            "delta": self.delta,
            "cutoff": CUTOFF_NAME,
            "snapped": {e.label: {"node": list(ij), "z": [self.grid.node(ij).real, self.grid.node(ij).imag]}
                        for e, ij in zip(self.divisor.entries, self.nodes)},
        }


def require_torus(divisor: Divisor) -> None:
    if divisor.surface != TORUS:
        raise HypothesisError("unsupported surface: torus only")


def build_background(divisor: Divisor, delta: float, grid: TorusGrid) -> BackgroundMetric:
    require_torus(divisor)
    entries = [e for e in divisor.entries if e.beta != 0]
    if any(e.position is None for e in entries):
        raise ConfigurationError("every divisor point needs a position on the torus")
    if entries and not delta > 4 * grid.spacing:
        raise ConfigurationError(f"cutoff radius {delta} must exceed four grid spacings ({4 * grid.spacing:.4g})")
    if entries and not delta < grid.injectivity_radius():
        raise ConfigurationError(f"cutoff radius {delta} must stay below the injectivity radius "
                                 f"{grid.injectivity_radius():.4g}")
    nodes = [grid.snap(e.position) for e in entries]
    if len(set(nodes)) != len(nodes):
        raise ConfigurationError("two divisor points snap to the same grid node")
    pos = [grid.node(ij) for ij in nodes]
    for i in range(len(pos)):
        for j in range(i + 1, len(pos)):
            if not float(grid.distance(pos[i], pos[j])) > 4 * delta:
                raise ConfigurationError(f"points {entries[i].label!r} and {entries[j].label!r} "
                                         f"are closer than 4 * delta")

    n = grid.n
    w0 = np.zeros((n, n))
    src = np.zeros((n, n))
    singular = np.zeros((n, n), dtype=bool)
    core = np.zeros((n, n), dtype=bool)
    disk = np.zeros((n, n), dtype=bool)
    z = grid.nodes
    for e, ij, p in zip(entries, nodes, pos):
        beta = float(e.beta)
        r = grid.distance(z, p)
        near = r < delta
        disk |= near
        core |= r <= delta / 2
        singular[ij] = True
        rr = np.where(r > 0, r, 1.0)
        chi, c1, c2 = cutoff(rr, delta)
        lr = np.log(rr)
        term = np.where(near, beta * chi * lr, 0.0)
        term[ij] = beta * cell_log_mean(grid)
        w0 += term
        # Lap(chi log r) = -(chi'' log r + chi' (log r + 2) / r); zero on the core and outside
        lap = -(c2 * lr + c1 * (lr + 2) / rr)
        src += np.where(near & (r > delta / 2), beta * lap, 0.0)
    rho = np.exp(2 * w0)
    K1 = src * np.exp(-2 * w0)
    return BackgroundMetric(
        divisor=Divisor(tuple(entries), divisor.surface),
        grid=grid,
        delta=float(delta),
        nodes=tuple(nodes),
        w0=ScalarField(grid, w0),
        rho=ScalarField(grid, rho),
        K1=ScalarField(grid, K1),
        source=ScalarField(grid, src),
        singular=singular,
        core=core,
        disk=disk,
    )
