"""Closed-form singular metrics on the Riemann sphere and the identities they satisfy.

Every model is a conformal metric ``g = exp(2 w(z)) |dz|^2`` in the affine
chart of the sphere, with the point at infinity handled through its order.
The Laplacian convention is the positive one, ``Lap = -d_xx - d_yy``, so the
curvature of ``g`` is ``K = exp(-2 w) Lap(w)``.
"""
from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Sequence, Union

import numpy as np
from scipy import integrate

from .divisor import Divisor, DivisorPoint, SPHERE, euler_char
from .errors import DomainError, HypothesisError, QuadratureError, ValidationError

QUAD_EPSABS = 1e-12
QUAD_LIMIT = 200

INF_LABEL = "inf"


@dataclass(frozen=True)
class FlatCone:
    """``|z|^(2 alpha) |dz|^2``: a Euclidean cone with tip at 0."""

    alpha: float

    def __post_init__(self):
        if not self.alpha > -1:
            raise DomainError("FlatCone needs alpha > -1; use Cylinder for alpha = -1")


@dataclass(frozen=True)
class Cylinder:
    """``|z|^-2 |dz|^2``: the flat cylinder of circumference 2 pi."""


@dataclass(frozen=True)
class MultiCone:
    """``prod |z - p_i|^(2 beta_i) |dz|^2`` with orders summing to -2 (smooth at infinity)."""

    points: tuple[complex, ...]
    orders: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(complex(p) for p in self.points))
        object.__setattr__(self, "orders", tuple(self.orders))
        if len(self.points) != len(self.orders):
            raise ValidationError("MultiCone needs one order per point")
        if len(set(self.points)) != len(self.points):
            raise ValidationError("MultiCone points must be distinct")
        # exact rational sum of the binary values, not merely a correctly rounded one
        if sum(Fraction(b) for b in self.orders) != -2:
            raise ValidationError("MultiCone orders must sum to exactly -2")


@dataclass(frozen=True)
class Football:
    """Curvature +1 sphere with two cone points of order ``beta`` at 0 and infinity."""

    beta: float

    def __post_init__(self):
        if not self.beta > -1:
            raise DomainError("football order must exceed -1")


def RoundSphere() -> Football:
    return Football(0.0)


@dataclass(frozen=True)
class Pullback:
    """Pull-back of ``base`` under the branched cover ``z -> z**k``."""

    base: "ModelMetric"
    k: int

    def __post_init__(self):
        if isinstance(self.k, bool) or not isinstance(self.k, int) or self.k < 1:
            raise DomainError("pullback degree must be a positive integer")


ModelMetric = Union[FlatCone, Cylinder, MultiCone, Football, Pullback]

FLAT_TYPES = (FlatCone, Cylinder, MultiCone)


# ---------------------------------------------------------------------------
# serialization


def model_to_dict(model: ModelMetric) -> dict[str, Any]:
    if isinstance(model, FlatCone):
        return {"type": "FlatCone", "alpha": model.alpha}
    if isinstance(model, Cylinder):
        return {"type": "Cylinder"}
    if isinstance(model, MultiCone):
        return {"type": "MultiCone",
                "points": [{"z": [p.real, p.imag], "beta": b} for p, b in zip(model.points, model.orders)]}
    if isinstance(model, Football):
        return {"type": "Football", "beta": model.beta}
    if isinstance(model, Pullback):
        return {"type": "Pullback", "k": model.k, "base": model_to_dict(model.base)}
    raise TypeError(model)


def model_from_dict(data: dict[str, Any]) -> ModelMetric:
    try:
        tag = data["type"]
        if tag == "FlatCone":
            return FlatCone(float(data["alpha"]))
        if tag == "Cylinder":
            return Cylinder()
        if tag == "MultiCone":
            pts = data["points"]
            return MultiCone(tuple(complex(*p["z"]) for p in pts), tuple(float(p["beta"]) for p in pts))
        if tag == "Football":
            return Football(float(data["beta"]))
        if tag == "RoundSphere":
            return RoundSphere()
        if tag == "Pullback":
            return Pullback(model_from_dict(data["base"]), int(data["k"]))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed model JSON: {exc!r}") from exc
    raise ValidationError(f"unknown model type {data.get('type')!r}")


# ---------------------------------------------------------------------------
# divisors and curvature


def divisor_of(model: ModelMetric) -> Divisor:
    if isinstance(model, FlatCone):
        # Fraction keeps -2 - alpha exact, so chi is exactly 0 for every binary alpha
        a = Fraction(model.alpha)
        pts = [DivisorPoint("0", a, 0j), DivisorPoint(INF_LABEL, -2 - a)]
    elif isinstance(model, Cylinder):
        pts = [DivisorPoint("0", -1, 0j), DivisorPoint(INF_LABEL, -1)]
    elif isinstance(model, MultiCone):
        pts = [DivisorPoint(f"p{i + 1}", b, p) for i, (p, b) in enumerate(zip(model.points, model.orders))]
    elif isinstance(model, Football):
        pts = [DivisorPoint("0", model.beta, 0j), DivisorPoint(INF_LABEL, model.beta)]
    elif isinstance(model, Pullback):
        pts = _pullback_points(divisor_of(model.base), model.k)
    else:
        raise TypeError(model)
    return Divisor(tuple(pts), SPHERE)


def _pullback_points(base: Divisor, k: int) -> list[DivisorPoint]:
    at_zero, at_inf, rest = 0, 0, []
    for e in base.entries:
        if e.position is None:
            at_inf = e.beta
        elif e.position == 0:
            at_zero = e.beta
        else:
            rest.append(e)
    pts = []
    o0 = k * (at_zero + 1) - 1
    if o0 != 0:
        pts.append(DivisorPoint("0", o0, 0j))
    for e in rest:
        r = abs(e.position) ** (1.0 / k)
        phi = np.angle(e.position)
        for j in range(k):
            pos = r * complex(np.exp(1j * (phi + 2 * np.pi * j) / k))
            pts.append(DivisorPoint(f"{e.label}^{j}", e.beta, pos))
    oinf = k * (at_inf + 1) - 1
    if oinf != 0:
        pts.append(DivisorPoint(INF_LABEL, oinf))
    return pts


def log_conformal_factor(model: ModelMetric, z):
    """``w`` with ``g = exp(2w)|dz|^2``, vectorized over complex ``z``."""
    z = np.asarray(z, dtype=complex)
    if isinstance(model, FlatCone):
        return model.alpha * np.log(np.abs(z))
    if isinstance(model, Cylinder):
        return -np.log(np.abs(z))
    if isinstance(model, MultiCone):
        return sum(b * np.log(np.abs(z - p)) for p, b in zip(model.points, model.orders))
    if isinstance(model, Football):
        g = 1.0 + model.beta
        r = np.abs(z)
        return math.log(2 * g) + model.beta * np.log(r) - np.log1p(r ** (2 * g))
    if isinstance(model, Pullback):
        k = model.k
        return math.log(k) + (k - 1) * np.log(np.abs(z)) + log_conformal_factor(model.base, z ** k)
    raise TypeError(model)


def _check_regular(model: ModelMetric, z: complex) -> None:
    for e in divisor_of(model).entries:
        if e.position is not None and e.beta != 0 and abs(complex(z) - e.position) == 0:
            raise DomainError(f"z = {z} is the singular point {e.label!r}")


def curvature_at(model: ModelMetric, z: complex) -> float:
    _check_regular(model, z)
    if isinstance(model, FLAT_TYPES):
        return 0.0
    if isinstance(model, Football):
        return 1.0
    if isinstance(model, Pullback):
        return curvature_at(model.base, complex(z) ** model.k)
    raise TypeError(model)


def fd_curvature(model: ModelMetric, z: complex, h: float = 1e-2) -> float:
    """Curvature from a fourth-order finite-difference Laplacian of ``w``.

    Independent of :func:`curvature_at`; used as its oracle.
    """
    z = complex(z)
    c = np.array([-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12])
    offs = np.arange(-2, 3) * h
    wxx = c @ log_conformal_factor(model, z + offs) / h ** 2
    wyy = c @ log_conformal_factor(model, z + 1j * offs) / h ** 2
    w = float(log_conformal_factor(model, z))
    return float(np.exp(-2 * w) * -(wxx + wyy))


# ---------------------------------------------------------------------------
# quadrature


def adaptive_quad(f: Callable[[float], float], a: float, b: float) -> float:
    """QUADPACK with a hard subdivision cap; failure to converge raises."""
    val, err, info, *rest = integrate.quad(f, a, b, epsabs=QUAD_EPSABS, epsrel=0.0,
                                           limit=QUAD_LIMIT, full_output=1)
    ier = rest[0] if rest else 0
    if ier not in (0,) and err > QUAD_EPSABS:
        raise QuadratureError(f"adaptive quadrature failed on [{a}, {b}] (ier={ier}, err={err:.2e})")
    return val


def half_line_quad(f: Callable[[float], float]) -> float:
    """Integral over (0, inf) as [0, 1] plus [1, inf) mapped to (0, 1] by r = 1/s."""
    head = adaptive_quad(f, 0.0, 1.0)
    tail = adaptive_quad(lambda s: f(1.0 / s) / s ** 2 if s > 0 else 0.0, 0.0, 1.0)
    return head + tail


def football_area(beta: float) -> float:
    g = 1.0 + beta

    def element(r):
        return 4 * g * g * r ** (2 * beta) / (1 + r ** (2 * g)) ** 2 * 2 * math.pi * r

    return half_line_quad(element)


def football_geodesic_distance(beta: float) -> float:
    """Length of the radial geodesic joining the two cone points of a football."""
    if not beta > -1:
        raise DomainError("football order must exceed -1")
    g = 1.0 + beta

    def element(r):
        if r == 0:
            return 0.0
        return 2 * g * r ** beta / (1 + r ** (2 * g))

    return half_line_quad(element)


# ---------------------------------------------------------------------------
# global identities


@dataclass(frozen=True)
class GaussBonnetResult:
    total_curvature: float
    expected: float
    residual: float

    def to_dict(self) -> dict[str, float]:
        return {"total_curvature": self.total_curvature, "expected": self.expected,
                "residual": self.residual}


def total_curvature(model: ModelMetric) -> float:
    if isinstance(model, FLAT_TYPES):
        return 0.0
    if isinstance(model, Football):
        return football_area(model.beta)
    if isinstance(model, Pullback):
        # integral over the cover is the degree times the integral downstairs
        return model.k * total_curvature(model.base)
    raise TypeError(model)


def gauss_bonnet_total(model: ModelMetric) -> GaussBonnetResult:
    total = total_curvature(model)
    expected = 2 * math.pi * float(euler_char(divisor_of(model)))
    return GaussBonnetResult(total, expected, abs(total - expected))


@dataclass(frozen=True)
class IsoperimetricSample:
    """Length and area of the metric ball of radius ``r``; ``ratio`` = L^2 / (4 pi A).

    The ratio is taken from the closed form where one exists, so for exact cones it
    is exactly ``1 + alpha`` rather than a quotient of two rounded numbers.
    """

    r: float
    L: float
    A: float
    ratio: float


@dataclass(frozen=True)
class IsoperimetricProfile:
    samples: list[IsoperimetricSample]
    limit: float
    monotone: bool

    def to_csv(self) -> str:
        lines = ["r,L,A,ratio"]
        lines += [f"{s.r!r},{s.L!r},{s.A!r},{s.ratio!r}" for s in self.samples]
        return "\n".join(lines) + "\n"


def _cylinder_ball(r: float) -> IsoperimetricSample:
    if r <= math.pi:
        return IsoperimetricSample(r, 2 * math.pi * r, math.pi * r * r, 1.0)
    s = math.asin(math.pi / r)
    half_area = math.pi * math.sqrt(r * r - math.pi ** 2) + r * r * s
    ratio = 2 * r * r * s * s / (math.pi * half_area)
    return IsoperimetricSample(r, 4 * r * s, 2 * half_area, ratio)


def isoperimetric_profile(model: ModelMetric, radii: Iterable[float]) -> IsoperimetricProfile:
    """Metric balls about the cone tip (FlatCone) or a waist point (Cylinder)."""
    radii = [float(r) for r in radii]
    if any(r <= 0 for r in radii):
        raise DomainError("radii must be positive")
    if isinstance(model, FlatCone):
        c = 1.0 + model.alpha
        samples = [IsoperimetricSample(r, 2 * math.pi * c * r, math.pi * c * r * r, c) for r in radii]
        limit = -((-2 - model.alpha) + 1)
    elif isinstance(model, Cylinder):
        samples = [_cylinder_ball(r) for r in radii]
        limit = -((-1 + 1) + (-1 + 1))
    elif isinstance(model, Football):
        raise HypothesisError("football ends have order > -1; the isoperimetric limit needs orders <= -1")
    else:
        raise DomainError(f"isoperimetric profiles need a radially symmetric model, got {type(model).__name__}")
    errs = [abs(s.ratio - limit) for s in sorted(samples, key=lambda s: s.r)]
    monotone = all(b <= a + 1e-15 for a, b in zip(errs, errs[1:]))
    return IsoperimetricProfile(samples, float(limit), monotone)


@dataclass(frozen=True)
class CohnVossenResult:
    lhs: float
    rhs: int
    holds: bool
    equality: bool  # the finite-area equality case applies and is attained
    finite_area: bool
    values_equal: bool

    def to_dict(self) -> dict[str, Any]:
        return {"lhs": self.lhs, "rhs": self.rhs, "holds": self.holds, "equality": self.equality,
                "finite_area": self.finite_area, "values_equal": self.values_equal}


def cohn_vossen_check(model: ModelMetric, punctures: Sequence[str]) -> CohnVossenResult:
    """Compare total curvature of the punctured surface with its Euler characteristic.

    Every singular point must be punctured and every puncture must have order <= -1.
    """
    div = divisor_of(model)
    orders = {e.label: e.beta for e in div.entries if e.beta != 0}
    punctures = list(punctures)
    if not punctures:
        raise HypothesisError("no punctures: the surface has no ends")
    unknown = set(punctures) - set(orders)
    if unknown:
        raise HypothesisError(f"punctures {sorted(unknown)} are not singular points")
    if set(orders) - set(punctures):
        raise HypothesisError("every singular point must be punctured for a smooth open surface")
    if any(orders[p] > -1 for p in punctures):
        raise HypothesisError("punctured points must have order <= -1")
    lhs = total_curvature(model) / (2 * math.pi)
    rhs = div.surface.euler_characteristic - len(punctures)
    # flat ends of order <= -1 on these models all carry infinite area
    finite_area = False
    same = abs(lhs - rhs) <= 1e-12
    return CohnVossenResult(lhs, rhs, lhs <= rhs + 1e-12, finite_area and same, finite_area, same)
