"""Divisors on closed surfaces and the decidable conditions stated about them.

Orders are kept as the user supplied them.  Integers and ``Fraction`` values
are summed exactly; floats are summed with ``math.fsum`` so the result is the
correctly rounded sum of the binary inputs.  No tolerance is applied anywhere
in this module: equalities such as ``chi == 0`` or ``beta == -1`` are exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational, Real
from typing import Any, Iterable, Sequence

from .errors import (
    DomainError,
    ImpossibleCoverError,
    IndeterminateError,
    ValidationError,
)

TWO_PI = 2.0 * math.pi


def _exact_sum(values: Iterable[Real]) -> Real:
    values = list(values)
    if all(isinstance(v, Rational) for v in values):
        return sum((Fraction(v) for v in values), Fraction(0))
    return math.fsum(float(v) for v in values)


def _as_number(value: Real) -> Real:
    """Collapse integral Fractions to int so JSON output stays tidy."""
    if isinstance(value, Fraction) and value.denominator == 1:
        return int(value)
    return value


@dataclass(frozen=True)
class SurfaceSpec:
    """Closed orientable surface of a given genus."""

    genus: int = 0

    def __post_init__(self):
        if isinstance(self.genus, bool) or not isinstance(self.genus, int) or self.genus < 0:
            raise DomainError(f"genus must be a nonnegative integer, got {self.genus!r}")

    @property
    def euler_characteristic(self) -> int:
        return 2 - 2 * self.genus

    @property
    def name(self) -> str:
        return {0: "sphere", 1: "torus"}.get(self.genus, f"genus-{self.genus} surface")


SPHERE = SurfaceSpec(0)
TORUS = SurfaceSpec(1)


@dataclass(frozen=True)
class DivisorPoint:
    label: str
    beta: Real
    position: complex | None = None


@dataclass(frozen=True)
class Divisor:
    """Finite formal sum of labelled points with real orders on a surface.

    ``position`` is optional; it is only needed by the torus field solver,
    which places each point in the plane covering the torus.
    """

    entries: tuple[DivisorPoint, ...] = ()
    surface: SurfaceSpec = SPHERE

    def __post_init__(self):
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        labels = [e.label for e in entries]
        if len(set(labels)) != len(labels):
            raise ValidationError(f"divisor labels must be distinct: {labels}")
        for e in entries:
            if not isinstance(e.beta, Real) or not math.isfinite(float(e.beta)):
                raise DomainError(f"order of {e.label!r} must be a finite real, got {e.beta!r}")

    @classmethod
    def from_orders(cls, orders: Sequence[Real], surface: SurfaceSpec = SPHERE,
                    labels: Sequence[str] | None = None,
                    positions: Sequence[complex] | None = None) -> "Divisor":
        if labels is None:
            labels = [f"p{i + 1}" for i in range(len(orders))]
        if positions is None:
            positions = [None] * len(orders)
        return cls(tuple(DivisorPoint(str(l), b, p) for l, b, p in zip(labels, orders, positions)),
                   surface)

    @property
    def orders(self) -> list[Real]:
        return [e.beta for e in self.entries]

    @property
    def labels(self) -> list[str]:
        return [e.label for e in self.entries]

    @property
    def support(self) -> list[str]:
        return [e.label for e in self.entries if e.beta != 0]

    def __len__(self) -> int:
        return len(self.entries)

    def degree(self) -> Real:
        return _exact_sum(self.orders)

    def add(self, label: str, beta: Real, position: complex | None = None) -> "Divisor":
        return Divisor(self.entries + (DivisorPoint(label, beta, position),), self.surface)

    def permuted(self, order: Sequence[int]) -> "Divisor":
        return Divisor(tuple(self.entries[i] for i in order), self.surface)

    def to_dict(self) -> dict[str, Any]:
        points = []
        for e in self.entries:
            item: dict[str, Any] = {"label": e.label, "beta": float(e.beta)}
            if e.position is not None:
                item["z"] = [e.position.real, e.position.imag]
            points.append(item)
        return {"surface": {"genus": self.surface.genus}, "points": points}

    @classmethod
    def from_dict(cls, data: dict[str, Any], tol: float | None = None) -> "Divisor":
        """Parse the JSON layout; ``tol`` quantizes orders to exact multiples of ``tol``."""
        try:
            surface = SurfaceSpec(int(data.get("surface", {}).get("genus", 0)))
            points = data["points"]
            entries = []
            for item in points:
                beta = item["beta"]
                if isinstance(beta, bool) or not isinstance(beta, (int, float)):
                    raise ValidationError(f"beta must be a number, got {beta!r}")
                if tol is not None:
                    beta = quantize(beta, tol)
                pos = item.get("z")
                if pos is not None:
                    pos = complex(float(pos[0]), float(pos[1]))
                entries.append(DivisorPoint(str(item["label"]), beta, pos))
        except (KeyError, TypeError, IndexError, DomainError) as exc:
            raise ValidationError(f"malformed divisor JSON: {exc!r}") from exc
        return cls(tuple(entries), surface)


def quantize(value: float, tol: float) -> Fraction:
    """Round ``value`` to the nearest multiple of ``tol`` as an exact rational."""
    if tol <= 0:
        raise DomainError("quantization step must be positive")
    step = Fraction(str(tol))
    return round(Fraction(value) / step) * step


# ---------------------------------------------------------------------------
# singularity classes


@dataclass(frozen=True)
class SingularityClass:
    kind: str  # "conical" | "cusp" | "infinite_end"
    angle: float | None = None

    def __post_init__(self):
        if self.kind not in ("conical", "cusp", "infinite_end"):
            raise DomainError(f"unknown singularity kind {self.kind!r}")
        if self.kind == "conical" and not (self.angle is not None and self.angle > 0):
            raise DomainError("a conical singularity needs a positive angle")


def euler_char(divisor: Divisor) -> Real:
    """chi(S) + sum of orders, exact for rational orders."""
    return _as_number(_exact_sum([divisor.surface.euler_characteristic, *divisor.orders]))


def order_to_angle(beta: Real) -> float:
    if not beta > -1:
        raise DomainError(f"cone angle needs order > -1, got {beta}")
    return TWO_PI * (float(beta) + 1.0)


def angle_to_order(theta: float) -> float:
    if not theta > 0:
        raise DomainError(f"cone angle must be positive, got {theta}")
    return theta / TWO_PI - 1.0


def classify_order(beta: Real, finite_area_hint: bool | None = None) -> SingularityClass:
    if beta > -1:
        return SingularityClass("conical", order_to_angle(beta))
    if beta < -1:
        return SingularityClass("infinite_end")
    if finite_area_hint is None:
        raise IndeterminateError("order -1 may be a cusp or an infinite end; pass finite_area_hint")
    return SingularityClass("cusp" if finite_area_hint else "infinite_end")


# ---------------------------------------------------------------------------
# verdicts


@dataclass(frozen=True)
class Verdict:
    condition: str
    holds: bool | None
    verdict: str
    witness: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "condition": self.condition,
            "holds": self.holds,
            "verdict": self.verdict,
            "witness": {k: _jsonable(v) for k, v in self.witness.items()},
        }
        for key in ("lhs", "rhs"):
            if key in self.witness:
                out[key] = _jsonable(self.witness[key])
        return out


def _jsonable(v: Any) -> Any:
    if isinstance(v, Fraction):
        return float(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def check_flat_representable(divisor: Divisor) -> bool:
    return euler_char(divisor) == 0


def flat_verdict(divisor: Divisor) -> Verdict:
    chi = euler_char(divisor)
    holds = chi == 0
    return Verdict("flat", holds, "representable" if holds else "not_representable",
                   {"euler_char": chi, "lhs": chi, "rhs": 0})


def check_luo_tian(divisor: Divisor) -> Verdict:
    """Spherical metric of curvature +1 with n >= 3 cone points of order in (-1, 0)."""
    if divisor.surface.genus != 0:
        raise DomainError("the Luo-Tian condition concerns the sphere only")
    orders = [b for b in divisor.orders if b != 0]
    n = len(orders)
    if n < 3 or any(not (-1 < b < 0) for b in orders):
        return Verdict("luo-tian", None, "out_of_theorem_scope",
                       {"n": n, "reason": "needs n >= 3 and every order in (-1, 0)"})
    total = _exact_sum([2, *orders])
    lo = min(orders)
    bound = _as_number(2 * (1 + lo)) if isinstance(lo, Rational) else 2.0 * (1.0 + float(lo))
    holds = 0 < total < bound
    thetas = [order_to_angle(b) for b in orders]
    angle_mid = 4 * math.pi + math.fsum(t - TWO_PI for t in thetas)
    witness = {
        "lhs": _as_number(total),
        "rhs": bound,
        "lower": 0,
        "angle_form": {"lower": 0.0, "middle": angle_mid, "upper": 2 * min(thetas)},
    }
    return Verdict("luo-tian", holds, "representable_uniquely" if holds else "not_representable",
                   witness)


@dataclass(frozen=True)
class CurvatureSummary:
    """Sign and integrability facts about a prescribed curvature function K."""

    sup_positive: bool = False
    nonpositive: bool = False
    not_identically_zero: bool = True
    identically_zero: bool = False
    integrability_exponent: float = 2.0
    integral_sign_vs_flat: str = "unknown"

    def __post_init__(self):
        if not self.integrability_exponent > 1:
            raise ValidationError("integrability exponent p must exceed 1")
        if self.identically_zero == self.not_identically_zero:
            raise ValidationError("exactly one of identically_zero / not_identically_zero must hold")
        if self.identically_zero and self.sup_positive:
            raise ValidationError("K identically zero cannot have positive supremum")
        if self.nonpositive and self.sup_positive:
            raise ValidationError("K <= 0 contradicts sup K > 0")
        if self.identically_zero and not self.nonpositive:
            raise ValidationError("K identically zero is nonpositive")
        if self.integral_sign_vs_flat not in ("negative", "zero", "positive", "unknown"):
            raise ValidationError(f"bad integral sign {self.integral_sign_vs_flat!r}")
        if self.identically_zero and self.integral_sign_vs_flat not in ("zero", "unknown"):
            raise ValidationError("K identically zero has zero integral")

    @classmethod
    def zero(cls) -> "CurvatureSummary":
        return cls(nonpositive=True, not_identically_zero=False, identically_zero=True,
                   integral_sign_vs_flat="zero")

    @property
    def conjugate_exponent(self) -> float:
        p = self.integrability_exponent
        return p / (p - 1)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "CurvatureSummary":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(data) - known
        if extra:
            raise ValidationError(f"unknown curvature summary keys: {sorted(extra)}")
        return cls(**data)


def check_curvature_case(divisor: Divisor, K: CurvatureSummary) -> Verdict:
    """Select the case of the prescribed-curvature existence theorem and test its hypotheses."""
    chi = euler_char(divisor)
    q = K.conjugate_exponent
    w: dict[str, Any] = {"euler_char": chi, "p": K.integrability_exponent, "q": q}
    if chi > 0:
        case = "a"
        w["q_chi"] = q * float(chi)
        met = K.sup_positive and q * float(chi) < 2
        w["lhs"], w["rhs"] = w["q_chi"], 2
    elif chi == 0:
        case = "b"
        met = K.identically_zero or (K.sup_positive and K.integral_sign_vs_flat == "negative")
    else:
        case = "c"
        met = K.nonpositive and K.not_identically_zero
    w["case"] = case
    w["unique"] = case == "c" and met
    return Verdict("curvature-case", met, f"case_{case}_{'met' if met else 'not_met'}", w)


def check_tang_necessary(integral_K_dA0: float, beta_leq_alpha: bool) -> Verdict:
    violated = beta_leq_alpha and integral_K_dA0 >= 0
    return Verdict("tang", not violated,
                   "necessary_condition_violated" if violated else "no_obstruction_detected",
                   {"lhs": integral_K_dA0, "rhs": 0, "beta_leq_alpha": beta_leq_alpha})


# ---------------------------------------------------------------------------
# covers and orbifolds


@dataclass(frozen=True)
class BranchData:
    degree: int
    base: SurfaceSpec = SPHERE
    branch_orders: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "branch_orders", tuple(tuple(b) for b in self.branch_orders))
        if not isinstance(self.degree, int) or self.degree < 1:
            raise DomainError("cover degree must be a positive integer")
        for label, o in self.branch_orders:
            if not isinstance(o, int) or not 1 <= o <= self.degree - 1:
                raise DomainError(f"branch order at {label!r} must lie in [1, d-1], got {o}")

    @property
    def total_branching(self) -> int:
        return sum(o for _, o in self.branch_orders)


@dataclass(frozen=True)
class HurwitzResult:
    chi_total: int
    genus: int

    def consistent_with(self, surface: SurfaceSpec) -> bool:
        return surface.euler_characteristic == self.chi_total


def riemann_hurwitz(branch: BranchData) -> HurwitzResult:
    chi = branch.degree * branch.base.euler_characteristic - branch.total_branching
    if chi > 2 or chi % 2:
        raise ImpossibleCoverError(f"total space would have Euler characteristic {chi}")
    return HurwitzResult(chi, (2 - chi) // 2)


def orbifold_divisor(stabilizer_orders: Sequence[int], surface: SurfaceSpec = SPHERE) -> Divisor:
    entries = []
    for i, n in enumerate(stabilizer_orders):
        if isinstance(n, bool) or not isinstance(n, int) or n <= 0:
            raise DomainError(f"stabilizer orders must be positive integers, got {n!r}")
        if n > 1:
            entries.append(DivisorPoint(f"x{i + 1}", Fraction(1, n) - 1))
    return Divisor(tuple(entries), surface)
