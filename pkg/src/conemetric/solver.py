"""Conformal factors solving the flat and prescribed-curvature equations on a torus.

For ``g = exp(2u) g1`` with ``g1 = exp(2 w0)|dz|^2`` the curvature obeys
``K exp(2u) rho = Lap u + rho K1``, with ``rho = exp(2 w0)`` and ``rho K1 = Lap w0``.
The flat problem is the linear case ``K = 0``; case (c) (``K <= 0``, ``K != 0``)
is solved by damped Newton with preconditioned conjugate gradients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.fft as sfft
from scipy.sparse.linalg import LinearOperator, cg

from .background import BackgroundMetric, build_background, cell_log_mean, require_torus
from .divisor import Divisor, check_flat_representable, euler_char
from .errors import ConfigurationError, HypothesisError, NoSolutionError, NumericalFailure
from .grid import (
    ScalarField,
    TorusGrid,
    fd_curvature,
    fft_workers,
    interpolate,
    inverse_laplacian,
    shifted_inverse,
    spectral_laplacian,
)

COMPAT_TOL = 1e-8
NEWTON_TOL = 1e-10
NEWTON_MAXIT = 50
CG_RTOL = 1e-12
CG_MAXIT = 500


@dataclass(frozen=True, eq=False)
class SolveReport:
    u: ScalarField
    background: BackgroundMetric
    residual_sup: float
    curvature_error_sup: float
    cone_angle_errors: dict[str, float | None]
    iterations: int
    cone_angles: dict[str, float | None] = field(default_factory=dict)
    residual_history: list[float] = field(default_factory=list)
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def log_factor(self) -> np.ndarray:
        """u + w0: the metric is exp(2 (u + w0)) |dz|^2."""
        return self.u.values + self.background.w0.values

    def to_dict(self) -> dict[str, Any]:
        g = self.u.grid
        return {
            "grid": g.to_dict(),
            "background": self.background.info(),
            "divisor": self.background.divisor.to_dict(),
            "residual_sup": self.residual_sup,
            "curvature_error_sup": self.curvature_error_sup,
            "cone_angles": self.cone_angles,
            "cone_angle_errors": self.cone_angle_errors,
            "iterations": self.iterations,
            "residual_history": self.residual_history,
            "u_sup_on_cores": float(np.abs(self.u.values[self.background.core]).max())
            if self.background.core.any() else 0.0,
            "tolerances": {"compatibility": COMPAT_TOL, "newton": NEWTON_TOL,
                           "newton_maxit": NEWTON_MAXIT, "cg_rtol": CG_RTOL},
            **self.extra,
        }


# ---------------------------------------------------------------------------
# linear solves


def poisson_solve(rhs: ScalarField) -> ScalarField:
    """Mean-zero u with Lap u = rhs; refuses right-hand sides with nonzero mean."""
    v = rhs.values
    scale = float(np.abs(v).max())
    mean = float(v.mean())
    if abs(mean) > COMPAT_TOL * scale:
        raise NoSolutionError(f"right-hand side has mean {mean:.3e}; a periodic solution needs zero mean")
    return ScalarField(rhs.grid, inverse_laplacian(rhs.grid, v))


def _curvature_error(bg: BackgroundMetric, u: np.ndarray, K: np.ndarray | None = None) -> float:
    W = u + bg.w0.values
    Kh = fd_curvature(bg.grid, W)
    if K is not None:
        Kh = Kh - K
    outside = ~bg.disk
    return float(np.abs(Kh[outside]).max())


def cone_angle(bg: BackgroundMetric, u: np.ndarray, index: int, eps: float, m: int = 256) -> float:
    """Ratio of circle length to mean radial distance around point ``index``."""
    e = bg.divisor.entries[index]
    gamma = 1.0 + float(e.beta)
    p = bg.positions[index]
    phi = 2 * np.pi * np.arange(m) / m
    ring = p + eps * np.exp(1j * phi)
    length = eps ** gamma * np.mean(np.exp(interpolate(bg.grid, u, ring))) * 2 * np.pi
    # radial distance: substitute t = rho^gamma to remove the rho^beta endpoint singularity
    x, wts = np.polynomial.legendre.leggauss(32)
    t = 0.5 * (x + 1) * eps ** gamma
    rho = t ** (1 / gamma)
    pts = p + rho[:, None] * np.exp(1j * phi)[None, :]
    vals = np.exp(interpolate(bg.grid, u, pts))
    radial = 0.5 * eps ** gamma * (wts @ vals) / gamma
    return float(length / radial.mean())


def cone_angles(bg: BackgroundMetric, u: np.ndarray) -> tuple[dict, dict]:
    """Richardson-extrapolated cone angles from circles of radius delta/8 and delta/4."""
    angles, errors = {}, {}
    eps = bg.delta / 8
    for i, e in enumerate(bg.divisor.entries):
        if not e.beta > -1:
            angles[e.label] = errors[e.label] = None
            continue
        a1 = cone_angle(bg, u, i, eps)
        a2 = cone_angle(bg, u, i, 2 * eps)
        theta = (4 * a1 - a2) / 3
        angles[e.label] = theta
        errors[e.label] = abs(theta - 2 * math.pi * (1 + float(e.beta)))
    return angles, errors


def flat_metric(divisor: Divisor, grid: TorusGrid, delta: float) -> SolveReport:
    """Flat conformal metric representing ``divisor`` (mean-zero u, i.e. one homothety representative)."""
    require_torus(divisor)
    if not check_flat_representable(divisor):
        raise HypothesisError(f"flat metric needs chi(S, beta) = 0, got {euler_char(divisor)}")
    bg = build_background(divisor, delta, grid)
    rhs = ScalarField(grid, -bg.source.values)
    u = poisson_solve(rhs)
    resid = float(np.abs(spectral_laplacian(grid, u.values) - rhs.values).max())
    angles, errors = cone_angles(bg, u.values)
    return SolveReport(u, bg, resid, _curvature_error(bg, u.values), errors, 0, angles, [resid],
                       {"mode": "flat"})


# ---------------------------------------------------------------------------
# exact oracle via the theta function


def _theta1(v: np.ndarray, tau: complex) -> np.ndarray:
    b = tau.imag
    nterms = int(math.sqrt(50 / (math.pi * b))) + 4
    out = np.zeros_like(v, dtype=complex)
    for n in range(nterms):
        coef = 2 * (-1) ** n * np.exp(1j * np.pi * tau * (n + 0.5) ** 2)
        out += coef * np.sin((2 * n + 1) * v)
    return out


def _theta1_prime0(tau: complex) -> complex:
    b = tau.imag
    nterms = int(math.sqrt(50 / (math.pi * b))) + 4
    return sum(2 * (-1) ** n * np.exp(1j * np.pi * tau * (n + 0.5) ** 2) * (2 * n + 1) for n in range(nterms))


def torus_log_kernel(grid: TorusGrid, z: np.ndarray) -> np.ndarray:
    """F(z) = log|theta1(pi z)| - pi Im(z)^2 / Im(tau): periodic, Lap F = -2 pi (delta - 1/area)."""
    d = grid.displacement(z, 0j)
    th = _theta1(np.pi * d, grid.tau)
    with np.errstate(divide="ignore"):
        return np.log(np.abs(th)) - np.pi * d.imag ** 2 / grid.tau.imag


def flat_metric_exact(divisor: Divisor, grid: TorusGrid) -> ScalarField:
    """Log factor w of the flat metric from the torus Green's function (independent of the solver).

    Singular nodes carry the regular part plus ``beta`` times the cell mean of log r,
    matching the convention of :func:`build_background`.
    """
    require_torus(divisor)
    entries = [e for e in divisor.entries if e.beta != 0]
    if euler_char(divisor) != 0:
        raise HypothesisError("the exact flat metric needs orders summing to zero on the torus")
    if any(e.position is None for e in entries):
        raise ConfigurationError("every divisor point needs a position on the torus")
    nodes = [grid.snap(e.position) for e in entries]
    pos = [grid.node(ij) for ij in nodes]
    z = grid.nodes
    w = np.zeros((grid.n, grid.n))
    reg0 = math.log(math.pi * abs(_theta1_prime0(grid.tau)))
    for e, p in zip(entries, pos):
        F = torus_log_kernel(grid, z - p)
        w += float(e.beta) * np.where(np.isfinite(F), F, 0.0)
    for i, (e, ij) in enumerate(zip(entries, nodes)):
        val = float(e.beta) * (reg0 + cell_log_mean(grid))
        for f, q in zip(entries, pos):
            if q != pos[i]:
                val += float(f.beta) * float(torus_log_kernel(grid, np.array(pos[i] - q)))
        w[ij] = val
    return ScalarField(grid, w)


# ---------------------------------------------------------------------------
# prescribed nonpositive curvature


def random_smooth_field(grid: TorusGrid, seed: int, amplitude: float = 0.5, modes: int = 4) -> ScalarField:
    rng = np.random.default_rng(seed)
    s = np.arange(grid.n) / grid.n
    S, T = s[:, None], s[None, :]
    v = np.zeros((grid.n, grid.n))
    for m in range(-modes, modes + 1):
        for k in range(-modes, modes + 1):
            a, b = rng.normal(size=2) / (1 + m * m + k * k)
            v += a * np.cos(2 * np.pi * (m * S + k * T)) + b * np.sin(2 * np.pi * (m * S + k * T))
    v *= amplitude / np.abs(v).max()
    return ScalarField(grid, v)


def _check_case_c(divisor: Divisor, K: ScalarField, bg: BackgroundMetric) -> None:
    if not euler_char(divisor) < 0:
        raise HypothesisError(f"case (c) requires chi(S, beta) < 0, got {euler_char(divisor)}")
    if (K.values > 0).any():
        raise HypothesisError("case (c) requires K <= 0")
    if not (K.values < 0).any():
        raise HypothesisError("case (c) requires K not identically zero")
    if (K.values[bg.disk] != 0).any():
        raise HypothesisError("K must vanish on the cutoff disks around divisor points")


def prescribed_curvature_solve(divisor: Divisor, K: ScalarField, grid: TorusGrid, delta: float,
                               u0: ScalarField | None = None) -> SolveReport:
    """Conformal metric representing ``divisor`` with curvature ``K`` (case (c): unique)."""
    require_torus(divisor)
    if K.grid != grid:
        raise ConfigurationError("curvature field lives on a different grid")
    bg = build_background(divisor, delta, grid)
    _check_case_c(divisor, K, bg)
    rhoK = bg.rho.values * K.values
    src = bg.source.values

    w = fft_workers()
    # The iterate is kept as Fourier coefficients: re-transforming u every step would
    # amplify FFT rounding by the top symbol (~1e6 at N = 256) and pin sup|F| near 1e-10.
    def state(uh):
        u = sfft.ifft2(uh, workers=w).real
        return u, sfft.ifft2(grid.symbol * uh, workers=w).real - (rhoK * np.exp(2 * u) - src)

    uh = sfft.fft2(np.zeros((grid.n, grid.n)) if u0 is None else u0.values, workers=w)
    u, F = state(uh)
    fsup = float(np.abs(F).max())
    history = [fsup]
    it = 0
    size = grid.n * grid.n
    while fsup >= NEWTON_TOL:
        if it >= NEWTON_MAXIT:
            raise NumericalFailure(f"Newton did not converge in {NEWTON_MAXIT} iterations (sup|F| = {fsup:.3e})")
        pot = -2 * rhoK * np.exp(2 * u)
        shift = float(pot.mean())
        A = LinearOperator((size, size), dtype=float,
                           matvec=lambda x: (spectral_laplacian(grid, x.reshape(grid.n, grid.n))
                                             + pot * x.reshape(grid.n, grid.n)).ravel())
        M = LinearOperator((size, size), dtype=float,
                           matvec=lambda x: shifted_inverse(grid, x.reshape(grid.n, grid.n), shift).ravel())
        # a partially converged CG direction is still fine if the line search accepts it
        step, _ = cg(A, -F.ravel(), rtol=CG_RTOL, atol=0.0, maxiter=CG_MAXIT, M=M)
        step_h = sfft.fft2(step.reshape(grid.n, grid.n), workers=w)
        lam = 1.0
        while True:
            trial = uh + lam * step_h
            ut, Ft = state(trial)
            ft = float(np.abs(Ft).max())
            if ft < fsup:
                break
            lam /= 2
            if lam < 1e-8:
                raise NumericalFailure(f"line search failed at sup|F| = {fsup:.3e}")
        uh, u, F, fsup = trial, ut, Ft, ft
        history.append(fsup)
        it += 1
    uf = ScalarField(grid, u)
    angles, errors = cone_angles(bg, u)
    return SolveReport(uf, bg, fsup, _curvature_error(bg, u, K.values), errors, it, angles, history,
                       {"mode": "curvature"})


def negative_bump(bg: BackgroundMetric, total: float | None = None, radius: float | None = None) -> ScalarField:
    """A smooth K <= 0 supported away from the cutoff disks.

    Centred at the node farthest from every divisor point; scaled so that its
    integral against the background area element equals ``total``
    (default 2 pi chi(S, beta), making u = 0 compatible with Gauss-Bonnet).
    """
    from .background import smoothstep

    grid = bg.grid
    z = grid.nodes
    dist = np.full((grid.n, grid.n), np.inf)
    for p in bg.positions:
        dist = np.minimum(dist, grid.distance(z, p))
    centre = z.ravel()[int(np.argmax(dist))]
    room = float(dist.max()) - bg.delta
    if radius is None:
        radius = min(0.9 * room, grid.injectivity_radius())
    if not radius > 4 * grid.spacing:
        raise ConfigurationError("no room for a curvature bump outside the cutoff disks")
    r = grid.distance(z, centre)
    psi, _, _ = smoothstep(1 - r / radius)
    vals = -psi
    if total is None:
        total = 2 * math.pi * float(euler_char(bg.divisor))
    mass = float(np.sum(vals * bg.rho.values) * grid.cell_area)
    vals = vals * (total / mass)
    vals[bg.disk] = 0.0
    return ScalarField(grid, vals)
