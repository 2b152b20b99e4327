import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from sitcontrol import (
    Params,
    basic_offspring_number,
    classify_stability,
    periodic_threshold,
    sit_equilibria,
    sit_rhs,
    sit_thresholds,
    verify_equilibrium_by_bisection,
    wild_equilibrium,
)
from sitcontrol.equilibria import Kind, NoPositiveEquilibrium, discriminant, slope_condition

gammas = st.sampled_from([0.04, 0.06, 0.08, 0.1])
fractions = st.floats(1e-4, 0.999)


def test_thresholds_closed_form(p04):
    q, mt1, mt2 = sit_thresholds(p04)
    assert q == pytest.approx(2e-4 * 0.14 / (0.09 * 0.51 * 0.04), rel=1e-14)
    R = basic_offspring_number(p04)
    assert mt1 == pytest.approx((math.sqrt(R) - 1) ** 2 / q, rel=1e-14)
    assert mt1 == pytest.approx(881.57, abs=0.01)
    assert mt1 < mt2


def test_thresholds_published_within_documented_gap():
    # published values follow a male fraction of 0.5
    assert sit_thresholds(Params.mosquito(0.04))[1] == pytest.approx(863.9, rel=0.06)
    assert sit_thresholds(Params.mosquito(0.1))[1] == pytest.approx(5954, rel=0.06)


def test_threshold_vanishes_as_r_tends_to_one():
    p = Params.mosquito(0.04)
    R = basic_offspring_number(p)
    near = Params.mosquito(0.04, phi=p.phi * (1 + 1e-9) / R)
    q, mt1, _ = sit_thresholds(near)
    assert mt1 < 1e-15 / q


def test_thresholds_require_persistence():
    with pytest.raises(NoPositiveEquilibrium):
        sit_thresholds(Params.mosquito(0.04, phi=0.3))
    with pytest.raises(NoPositiveEquilibrium):
        sit_equilibria(Params.mosquito(0.04, phi=0.3), 10)
    with pytest.raises(NoPositiveEquilibrium):
        periodic_threshold(Params.mosquito(0.04, phi=0.3), 7)


def test_e1_against_quadratic_oracle(params):
    # independent route: numpy polynomial roots of the alpha quadratic
    mt = 500.0
    q, _, _ = sit_thresholds(params)
    R = basic_offspring_number(params)
    roots = np.sort(np.roots([1.0, -(R - 1 - q * mt), q * mt]).real)
    a = sit_equilibria(params, mt)
    assert a.kind is Kind.PAIR
    assert a.alpha_minus == pytest.approx(roots[0], rel=1e-9)
    assert a.alpha_plus == pytest.approx(roots[1], rel=1e-9)
    assert a.e1.m == pytest.approx(mt / roots[1], rel=1e-9)
    assert a.e2.m == pytest.approx(mt / roots[0], rel=1e-9)


def test_e1_published_gamma_006():
    e1 = sit_equilibria(Params.mosquito(0.06), 100).e1
    assert np.allclose(e1, (18.79, 4.03, 0.21), rtol=0.08)


def test_zero_release_recovers_wild_equilibrium(params):
    a = sit_equilibria(params, 0.0)
    R = basic_offspring_number(params)
    assert a.alpha_minus == 0.0
    assert a.alpha_plus == pytest.approx(R - 1, rel=1e-14)
    assert np.allclose(a.e2, wild_equilibrium(params), rtol=1e-12)
    assert tuple(a.e1) == (0.0, 0.0, 0.0)


@given(gammas, fractions)
def test_vieta_and_reconstruction(g, frac):
    p = Params.mosquito(g)
    q, mt1, _ = sit_thresholds(p)
    mt = frac * mt1
    a = sit_equilibria(p, mt)
    assume(a.kind is Kind.PAIR)
    R = basic_offspring_number(p)
    assert a.alpha_plus * a.alpha_minus == pytest.approx(q * mt, rel=1e-10)
    assert a.alpha_plus + a.alpha_minus == pytest.approx(R - 1 - q * mt, rel=1e-10)
    for e in (a.e1, a.e2):
        assert np.max(np.abs(sit_rhs(p, e, mt))) <= 1e-8 * np.linalg.norm(e)
    assert a.e1 < a.e2 < wild_equilibrium(p)


@given(gammas, st.floats(0, 1e5))
def test_discriminant_identity(g, mt):
    p = Params.mosquito(g)
    q, _, _ = sit_thresholds(p)
    R = basic_offspring_number(p)
    direct = (R - 1 - q * mt) ** 2 - 4 * q * mt
    scale = max(abs(direct), (R - 1 + q * mt) ** 2)
    assert abs(discriminant(p, mt) - direct) <= 1e-10 * scale


def test_discriminant_vanishes_at_thresholds(params):
    q, mt1, mt2 = sit_thresholds(params)
    R = basic_offspring_number(params)
    scale = (math.sqrt(R) + 1) ** 4
    assert abs(discriminant(params, mt1)) <= 1e-10 * scale
    assert abs(discriminant(params, mt2)) <= 1e-10 * scale


def test_kinds(params):
    _, mt1, _ = sit_thresholds(params)
    assert sit_equilibria(params, 0.5 * mt1).kind is Kind.PAIR
    assert sit_equilibria(params, mt1).kind is Kind.TANGENT
    assert sit_equilibria(params, 1.01 * mt1).kind is Kind.NO_POSITIVE
    assert sit_equilibria(params, 100 * mt1).kind is Kind.NO_POSITIVE


def test_tangent_equilibrium_is_double_root(p04):
    _, mt1, _ = sit_thresholds(p04)
    a = sit_equilibria(p04, mt1)
    assert np.max(np.abs(sit_rhs(p04, a.e_dagger, mt1))) < 1e-8 * np.linalg.norm(a.e_dagger)
    assert abs(slope_condition(p04, mt1, a.e_dagger.m)) < 1e-9


def test_negative_level_rejected(p04):
    with pytest.raises(ValueError):
        sit_equilibria(p04, -1.0)


def test_bisection_oracle_matches_pair(p04):
    a = sit_equilibria(p04, 800)
    roots = verify_equilibrium_by_bisection(p04, 800)
    assert len(roots) == 2
    assert roots[0] == pytest.approx(a.e1.m, rel=1e-8)
    assert roots[1] == pytest.approx(a.e2.m, rel=1e-8)


@given(gammas, st.floats(0.01, 0.99))
def test_bisection_oracle_property(g, frac):
    p = Params.mosquito(g)
    mt = frac * sit_thresholds(p)[1]
    a = sit_equilibria(p, mt)
    roots = verify_equilibrium_by_bisection(p, mt)
    assert len(roots) == 2
    assert roots[0] == pytest.approx(a.e1.m, rel=1e-8)
    assert roots[1] == pytest.approx(a.e2.m, rel=1e-8)


def test_bisection_oracle_above_threshold(p04):
    _, mt1, _ = sit_thresholds(p04)
    assert verify_equilibrium_by_bisection(p04, 1.01 * mt1) == []


def test_bisection_oracle_at_threshold(p04):
    _, mt1, _ = sit_thresholds(p04)
    roots = verify_equilibrium_by_bisection(p04, mt1)
    assert len(roots) == 1
    assert roots[0] == pytest.approx(sit_equilibria(p04, mt1).e_dagger.m, rel=1e-4)


def test_stability_above_threshold(p04):
    _, mt1, _ = sit_thresholds(p04)
    reports = classify_stability(p04, sit_equilibria(p04, 2 * mt1))
    assert [(r.name, r.label) for r in reports] == [("0", "GAS")]
    assert all(ev.real < 0 for ev in reports[0].eigenvalues)


def test_stability_bistable(p04):
    reports = {r.name: r for r in classify_stability(p04, sit_equilibria(p04, 800))}
    assert reports["E1"].slope > 0 and reports["E1"].determinant > 0
    assert reports["E2"].slope < 0 and reports["E2"].determinant < 0
    assert max(ev.real for ev in reports["E1"].eigenvalues) > 0
    assert max(ev.real for ev in reports["E2"].eigenvalues) < 0
    assert max(ev.real for ev in reports["0"].eigenvalues) < 0
    assert reports["0"].label == "LAS"


def test_stability_without_release(p04):
    reports = {r.name: r for r in classify_stability(p04, sit_equilibria(p04, 0.0))}
    assert reports["E*"].label == "stable"
    assert max(ev.real for ev in reports["E*"].eigenvalues) < 0
    assert max(ev.real for ev in reports["0"].eigenvalues) > 0


def test_periodic_threshold(p04):
    _, mt1, _ = sit_thresholds(p04)
    assert periodic_threshold(p04, 7) == pytest.approx(mt1 * (math.exp(0.98) - 1), rel=1e-14)
    assert periodic_threshold(p04, 7) == pytest.approx(1484.5, rel=0.06)
    assert periodic_threshold(Params.mosquito(0.1), 7) == pytest.approx(10230, rel=0.06)
    # small-period limit gives the release-rate condition
    tau = 1e-7
    assert periodic_threshold(p04, tau) / tau == pytest.approx(p04.mu_t * mt1, rel=1e-6)
    with pytest.raises(ValueError):
        periodic_threshold(p04, 0.0)
