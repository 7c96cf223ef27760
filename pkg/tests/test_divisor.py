import math
from fractions import Fraction

import pytest

from conemetric.divisor import (
    SPHERE,
    TORUS,
    BranchData,
    CurvatureSummary,
    Divisor,
    SurfaceSpec,
    angle_to_order,
    check_flat_representable,
    check_luo_tian,
    check_tang_necessary,
    check_curvature_case,
    classify_order,
    euler_char,
    order_to_angle,
    orbifold_divisor,
    quantize,
    riemann_hurwitz,
)
from conemetric.errors import (
    DomainError,
    ImpossibleCoverError,
    IndeterminateError,
    ValidationError,
)

HALF = Fraction(1, 2)


def test_euler_char_examples():
    assert euler_char(Divisor.from_orders([-2], SPHERE)) == 0
    assert euler_char(Divisor.from_orders([], SurfaceSpec(3))) == -4
    assert euler_char(Divisor.from_orders([-HALF] * 3, SPHERE)) == HALF


def test_euler_char_float_sum_is_correctly_rounded():
    # naive left-to-right float addition would leave 1.1102e-16 here
    d = Divisor.from_orders([0.1, 0.2, -0.3], TORUS)
    assert euler_char(d) == math.fsum([0.1, 0.2, -0.3])


def test_quantize_gives_exact_rationals():
    assert quantize(-0.49999999, 1e-6) == Fraction(-1, 2)
    d = Divisor.from_dict({"surface": {"genus": 1},
                           "points": [{"label": "p", "beta": 0.3333333}, {"label": "q", "beta": -0.3333333}]},
                          tol=1e-6)
    assert euler_char(d) == 0
    with pytest.raises(DomainError):
        quantize(0.5, 0.0)


@pytest.mark.parametrize("beta,kind", [(1, "conical"), (-2, "infinite_end"), (-0.5, "conical")])
def test_classify_order(beta, kind):
    assert classify_order(beta).kind == kind


def test_classify_cone_angle_and_cusp():
    assert classify_order(1).angle == pytest.approx(4 * math.pi, rel=1e-15)
    assert classify_order(-1, finite_area_hint=True).kind == "cusp"
    assert classify_order(-1, finite_area_hint=False).kind == "infinite_end"
    with pytest.raises(IndeterminateError):
        classify_order(-1)


def test_angle_order_conversions():
    assert angle_to_order(2 * math.pi) == 0
    assert order_to_angle(-0.5) == pytest.approx(math.pi, rel=1e-15)
    assert angle_to_order(math.pi / 2) == pytest.approx(-0.75, abs=1e-16)
    with pytest.raises(DomainError):
        order_to_angle(-1)
    with pytest.raises(DomainError):
        angle_to_order(0.0)


def test_flat_representable():
    assert check_flat_representable(Divisor.from_orders([-2], SPHERE))
    assert check_flat_representable(Divisor.from_orders([HALF, -HALF], TORUS))
    assert not check_flat_representable(Divisor.from_orders([-HALF], SPHERE))


def _luo_tian_direct(orders):
    # inequality evaluated from scratch with exact rationals
    total = 2 + sum(Fraction(b) for b in orders)
    return 0 < total < 2 * (1 + min(Fraction(b) for b in orders))


def test_luo_tian_examples():
    v = check_luo_tian(Divisor.from_orders([-HALF] * 3, SPHERE))
    assert v.holds is True and v.verdict == "representable_uniquely"
    assert v.to_dict()["lhs"] == 0.5 and v.to_dict()["rhs"] == 1.0

    v = check_luo_tian(Divisor.from_orders([Fraction(-9, 10), Fraction(-1, 10), Fraction(-1, 10)], SPHERE))
    assert v.holds is False and v.verdict == "not_representable"
    assert _luo_tian_direct([-0.9, -0.1, -0.1]) is False

    v = check_luo_tian(Divisor.from_orders([-HALF, -HALF], SPHERE))
    assert v.verdict == "out_of_theorem_scope" and v.holds is None


def test_luo_tian_rejects_torus():
    with pytest.raises(DomainError):
        check_luo_tian(Divisor.from_orders([-HALF] * 3, TORUS))


def test_luo_tian_angle_form_matches_order_form():
    orders = [Fraction(-1, 3), Fraction(-1, 4), Fraction(-2, 5)]
    w = check_luo_tian(Divisor.from_orders(orders, SPHERE)).witness
    # 4 pi + sum(theta - 2 pi) = 2 pi (2 + sum beta)
    assert w["angle_form"]["middle"] == pytest.approx(2 * math.pi * float(w["lhs"]), rel=1e-14)
    assert w["angle_form"]["upper"] == pytest.approx(2 * math.pi * float(w["rhs"]), rel=1e-14)


def test_curvature_cases():
    K_pos = CurvatureSummary(sup_positive=True, integrability_exponent=2.0)
    v = check_curvature_case(Divisor.from_orders([-HALF] * 3, SPHERE), K_pos)
    assert v.verdict == "case_a_met" and v.witness["q_chi"] == pytest.approx(1.0)

    K_neg = CurvatureSummary(nonpositive=True)
    v = check_curvature_case(Divisor.from_orders([-HALF], TORUS), K_neg)
    assert v.verdict == "case_c_met" and v.witness["unique"]

    for p in (1.01, 2.0, 50.0):
        v = check_curvature_case(Divisor.from_orders([], SPHERE),
                                CurvatureSummary(sup_positive=True, integrability_exponent=p))
        assert v.verdict == "case_a_not_met"


def test_curvature_case_b():
    flat = Divisor.from_orders([HALF, -HALF], TORUS)
    assert check_curvature_case(flat, CurvatureSummary.zero()).verdict == "case_b_met"
    K = CurvatureSummary(sup_positive=True, integral_sign_vs_flat="negative")
    assert check_curvature_case(flat, K).holds
    K = CurvatureSummary(sup_positive=True, integral_sign_vs_flat="positive")
    assert check_curvature_case(flat, K).verdict == "case_b_not_met"


def test_curvature_summary_validation():
    with pytest.raises(ValidationError):
        CurvatureSummary(integrability_exponent=1.0)
    with pytest.raises(ValidationError):
        CurvatureSummary(nonpositive=True, sup_positive=True)
    with pytest.raises(ValidationError):
        CurvatureSummary(identically_zero=True, not_identically_zero=True)
    with pytest.raises(ValidationError):
        CurvatureSummary.from_dict({"colour": "red"})


def test_tang():
    assert check_tang_necessary(-0.3, True).verdict == "no_obstruction_detected"
    assert check_tang_necessary(0.1, True).verdict == "necessary_condition_violated"
    assert check_tang_necessary(0.1, False).holds


@pytest.mark.parametrize("k", range(1, 8))
def test_hurwitz_power_map(k):
    b = BranchData(k, SPHERE, (("0", k - 1), ("inf", k - 1)) if k > 1 else ())
    assert riemann_hurwitz(b).chi_total == 2


def test_hurwitz_torus_double_cover():
    r = riemann_hurwitz(BranchData(2, SPHERE, tuple((f"b{i}", 1) for i in range(4))))
    assert r.chi_total == 0 and r.genus == 1 and r.consistent_with(TORUS)


def test_hurwitz_identity_and_impossible():
    assert riemann_hurwitz(BranchData(1, SurfaceSpec(2))).chi_total == -2
    with pytest.raises(ImpossibleCoverError):
        riemann_hurwitz(BranchData(2, SPHERE, (("a", 1),)))
    with pytest.raises(ImpossibleCoverError):
        riemann_hurwitz(BranchData(3, SPHERE))
    with pytest.raises(DomainError):
        BranchData(2, SPHERE, (("a", 2),))


def test_orbifold():
    assert orbifold_divisor([2]).orders == [Fraction(-1, 2)]
    assert len(orbifold_divisor([1])) == 0
    assert euler_char(orbifold_divisor([2, 3, 7])) == Fraction(-1, 42)


def test_divisor_json_round_trip():
    d = Divisor.from_orders([0.5, -0.5], TORUS, labels=["p", "q"], positions=[0.25 + 0.25j, 0.75 + 0.75j])
    back = Divisor.from_dict(d.to_dict())
    assert back == d


@pytest.mark.parametrize("bad", [
    {"points": [{"label": "p"}]},
    {"points": [{"label": "p", "beta": "half"}]},
    {"points": [{"label": "p", "beta": True}]},
    {"surface": {"genus": -1}, "points": []},
    {},
])
def test_malformed_divisor_json(bad):
    with pytest.raises(ValidationError):
        Divisor.from_dict(bad)
