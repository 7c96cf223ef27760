import math

import mpmath as mp
import numpy as np
import pytest

import conemetric.solver as sv
from conemetric.background import build_background
from conemetric.divisor import SPHERE, TORUS, Divisor
from conemetric.errors import ConfigurationError, HypothesisError, NumericalFailure
from conemetric.grid import ScalarField, TorusGrid, fd_laplacian4, integrate

P, Q = 0.25 + 0.25j, 0.75 + 0.75j


def pair(b=0.5, p=P, q=Q):
    return Divisor.from_orders([b, -b], TORUS, labels=["p", "q"], positions=[p, q])


SINGLE = Divisor.from_orders([-0.5], TORUS, labels=["p"], positions=[0.5 + 0.5j])


def _aligned_dev(a, b, mask):
    d = (a - b)[mask]
    return float(np.abs(d - d.mean()).max())


@pytest.fixture(scope="module")
def flat256():
    g = TorusGrid(1j, 256)
    return sv.flat_metric(pair(), g, 0.17), sv.flat_metric_exact(pair(), g)


@pytest.mark.parametrize("tau", [1j, 0.4 + 0.9j])
def test_log_kernel_against_mpmath_theta(tau):
    g = TorusGrid(tau, 32)
    q = mp.exp(1j * mp.pi * mp.mpc(tau))
    for z in (0.3 + 0.1j, 0.55 + 0.4j, -0.2 + 0.35j):
        ref = mp.log(abs(mp.jtheta(1, mp.pi * mp.mpc(z), q))) - mp.pi * mp.im(z) ** 2 / tau.imag
        # the kernel is lattice periodic, so evaluating at the minimal image must agree
        assert float(sv.torus_log_kernel(g, np.array(z))) == pytest.approx(float(ref), abs=1e-13)
        assert float(sv.torus_log_kernel(g, np.array(z + 1 + tau))) == pytest.approx(float(ref), abs=1e-12)


def test_empty_divisor_is_flat_torus():
    g = TorusGrid(1j, 64)
    r = sv.flat_metric(Divisor.from_orders([], TORUS), g, 0.2)
    assert r.u.sup() == 0 and r.curvature_error_sup == 0 and r.cone_angle_errors == {}


def test_flat_pair_accuracy(flat256):
    rep, w = flat256
    assert rep.curvature_error_sup < 1e-3
    assert max(rep.cone_angle_errors.values()) < 1e-2
    mask = ~rep.background.singular
    assert _aligned_dev(rep.log_factor, w.values, mask) < 1e-3
    assert rep.residual_sup < 1e-9


def test_flat_grid_convergence(flat256):
    coarse = sv.flat_metric(pair(), TorusGrid(1j, 128), 0.17)
    order = math.log2(coarse.curvature_error_sup / flat256[0].curvature_error_sup)
    assert order >= 1.9


def test_cone_angle_for_order_one():
    g = TorusGrid(1j, 256)
    rep = sv.flat_metric(pair(1.0), g, 0.17)
    assert rep.cone_angles["p"] == pytest.approx(4 * math.pi, abs=1e-2)
    assert rep.cone_angles["q"] is None  # order -1: no cone angle to recover


def test_flat_independent_of_cutoff_radius(flat256):
    g = TorusGrid(1j, 256)
    half = sv.flat_metric(pair(), g, 0.085)
    mask = ~flat256[0].background.singular
    W1, W2 = flat256[0].log_factor, half.log_factor
    shift = (W1 - W2)[mask].mean()
    metric1, metric2 = np.exp(2 * W1[mask]), np.exp(2 * (W2[mask] + shift))
    assert np.abs(metric1 / metric2 - 1).max() < 1e-3


def test_exact_oracle_antisymmetry_and_harmonicity():
    g = TorusGrid(1j, 256)
    w = sv.flat_metric_exact(pair(), g).values
    swapped = sv.flat_metric_exact(pair(p=Q, q=P), g).values
    np.testing.assert_allclose(swapped, -w, atol=1e-12)
    far = np.ones(w.shape, bool)
    for c in (P, Q):
        far &= g.distance(g.nodes, c) > 0.15
    assert np.abs(fd_laplacian4(g, w)[far]).max() < 1e-4


def test_exact_oracle_rejects():
    g = TorusGrid(1j, 64)
    with pytest.raises(HypothesisError):
        sv.flat_metric_exact(SINGLE, g)
    with pytest.raises(HypothesisError, match="torus only"):
        sv.flat_metric_exact(Divisor.from_orders([-2], SPHERE), g)


def test_flat_rejects_nonzero_chi_and_sphere():
    g = TorusGrid(1j, 64)
    with pytest.raises(HypothesisError):
        sv.flat_metric(SINGLE, g, 0.3)
    with pytest.raises(HypothesisError, match="torus only"):
        sv.flat_metric(Divisor.from_orders([-2], SPHERE, positions=[0j]), g, 0.2)


# ---------------------------------------------------------------------------
# case (c)


@pytest.fixture(scope="module")
def case_c():
    g = TorusGrid(1j, 256)
    bg = build_background(SINGLE, 0.35, g)
    K = sv.negative_bump(bg)
    return g, bg, K, sv.prescribed_curvature_solve(SINGLE, K, g, 0.35)


def test_negative_bump(case_c):
    g, bg, K, _ = case_c
    assert K.values.max() <= 0 and K.values.min() < 0
    assert np.all(K.values[bg.disk] == 0)
    assert integrate(K, bg.rho) == pytest.approx(-math.pi, rel=1e-12)


def test_case_c_solution(case_c):
    g, bg, K, rep = case_c
    assert rep.iterations <= 15 and rep.residual_sup < 1e-10
    h = rep.residual_history
    assert all(b < a for a, b in zip(h, h[1:]))
    gb = integrate(K, ScalarField(g, bg.rho.values * np.exp(2 * rep.u.values)))
    assert gb == pytest.approx(-math.pi, abs=1e-6)
    assert rep.curvature_error_sup < 1e-3
    assert rep.cone_angle_errors["p"] < 1e-2


@pytest.mark.parametrize("seed", [0, 7])
def test_case_c_uniqueness(case_c, seed):
    g, _, K, rep = case_c
    other = sv.prescribed_curvature_solve(SINGLE, K, g, 0.35, u0=sv.random_smooth_field(g, seed))
    assert np.abs(other.u.values - rep.u.values).max() < 1e-8


def test_case_c_unbalanced_bump_still_solves():
    # any K <= 0, K != 0 works in case (c); Gauss-Bonnet then fixes the conformal scale
    g = TorusGrid(1j, 128)
    bg = build_background(SINGLE, 0.35, g)
    K = sv.negative_bump(bg, total=-5.0)
    rep = sv.prescribed_curvature_solve(SINGLE, K, g, 0.35)
    gb = integrate(K, ScalarField(g, bg.rho.values * np.exp(2 * rep.u.values)))
    assert gb == pytest.approx(-math.pi, abs=1e-6)


def test_case_c_hypotheses():
    g = TorusGrid(1j, 64)
    bg = build_background(SINGLE, 0.35, g)
    K = sv.negative_bump(bg)
    zero = ScalarField(g, np.zeros((64, 64)))
    with pytest.raises(HypothesisError, match="not identically zero"):
        sv.prescribed_curvature_solve(SINGLE, zero, g, 0.35)
    with pytest.raises(HypothesisError, match="K <= 0"):
        sv.prescribed_curvature_solve(SINGLE, ScalarField(g, -K.values), g, 0.35)
    with pytest.raises(HypothesisError, match="chi"):
        sv.prescribed_curvature_solve(pair(), K, g, 0.17)
    leaky = K.values.copy()
    leaky[bg.nodes[0]] = -1.0
    with pytest.raises(HypothesisError, match="vanish"):
        sv.prescribed_curvature_solve(SINGLE, ScalarField(g, leaky), g, 0.35)
    with pytest.raises(ConfigurationError):
        sv.prescribed_curvature_solve(SINGLE, ScalarField(TorusGrid(1j, 32), np.zeros((32, 32))), g, 0.35)


def test_newton_budget_exhaustion(monkeypatch):
    g = TorusGrid(1j, 64)
    K = sv.negative_bump(build_background(SINGLE, 0.35, g))
    monkeypatch.setattr(sv, "NEWTON_MAXIT", 2)
    with pytest.raises(NumericalFailure):
        sv.prescribed_curvature_solve(SINGLE, K, g, 0.35)


def test_report_serialization(case_c):
    d = case_c[3].to_dict()
    assert d["grid"] == {"n": 256, "tau": [0.0, 1.0]}
    assert d["background"]["delta"] == 0.35
    assert d["tolerances"]["newton"] == 1e-10 and d["iterations"] == case_c[3].iterations
    assert d["mode"] == "curvature"
