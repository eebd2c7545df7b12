import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, special

from ebmono.intensities import TruthId, e_theo, eval_truth, mass, truth


def test_step_values():
    assert eval_truth("Lambda01", 0.0) == 4.0
    assert eval_truth("Lambda01", 2.999) == 4.0
    assert eval_truth("Lambda01", 3.5) == 2.0
    assert eval_truth("Lambda01", 8.0) == 2.0


def test_exp_at_zero():
    assert eval_truth("Lambda02", 0.0) == 1.0


@pytest.mark.parametrize("t", [-0.1, 8.01, np.nan])
def test_domain_error(t):
    with pytest.raises(ValueError):
        eval_truth("Lambda03", t)


def test_step_mass_and_moment():
    assert mass("Lambda01") == 22.0
    assert e_theo("Lambda01") == pytest.approx(73 / 22, rel=1e-14)
    lam = truth("Lambda01")
    assert lam.mass_quad() == pytest.approx(22.0, rel=1e-10)
    assert lam.moment_quad() / 22.0 == pytest.approx(73 / 22, rel=1e-10)


def test_exp_decay_closed_forms_against_quadrature():
    # rate 0.4: mass (1 - e^-3.2)/0.4, mean 2.5(1 - e^-3.2 (1 + 3.2))/(1 - e^-3.2)
    lam = truth("Lambda02", decay=0.4)
    e = math.exp(-3.2)
    assert lam.mass() == pytest.approx((1 - e) / 0.4, rel=1e-14)
    assert lam.mass() == pytest.approx(2.39810, abs=1e-5)
    assert lam.e_theo() == pytest.approx(2.5 * (1 - e * 4.2) / (1 - e), rel=1e-13)
    assert lam.e_theo() == pytest.approx(2.1601, abs=1e-4)
    assert lam.mass_quad() == pytest.approx(lam.mass(), rel=1e-10)
    assert lam.moment_quad() / lam.mass() == pytest.approx(lam.e_theo(), rel=1e-10)


def test_default_decay_is_one():
    lam = truth("Lambda02")
    assert lam(1.0) == pytest.approx(math.exp(-1.0))
    assert lam.e_theo() == pytest.approx((1 - 9 * math.exp(-8)) / (1 - math.exp(-8)), rel=1e-13)


def test_spline_regression_constants():
    # independent quadrature of arccos(Phi) on [0,3] plus the linear branch
    c = math.acos(special.ndtr(3.0))
    left = integrate.quad(lambda t: math.acos(special.ndtr(t)), 0, 3, epsabs=0, epsrel=1e-13)[0]
    left1 = integrate.quad(lambda t: t * math.acos(special.ndtr(t)), 0, 3, epsabs=0, epsrel=1e-13)[0]
    lin = lambda t: c * (1.5 - t / 6.0)
    right = integrate.quad(lin, 3, 8)[0]
    right1 = integrate.quad(lambda t: t * lin(t), 3, 8)[0]
    m = left + right
    assert mass("Lambda03") == pytest.approx(m, rel=1e-10)
    assert mass("Lambda03") == pytest.approx(1.4540680306, rel=1e-9)
    assert e_theo("Lambda03") == pytest.approx((left1 + right1) / m, rel=1e-9)
    assert e_theo("Lambda03") == pytest.approx(1.3235917396, rel=1e-9)


def test_spline_continuous_at_three():
    f = truth("Lambda03")
    assert abs(f(3.0 - 1e-12) - f(3.0 + 1e-12)) < 1e-9


def test_spline_does_not_vanish_at_horizon():
    c = math.acos(special.ndtr(3.0))
    assert eval_truth("Lambda03", 8.0) == pytest.approx(c / 6.0, rel=1e-12)


@pytest.mark.parametrize("tid", list(TruthId))
def test_normalized_integrates_to_one(tid):
    bar = truth(tid).normalized()
    val = sum(integrate.quad(bar, lo, hi, epsabs=0, epsrel=1e-12)[0]
              for lo, hi in ((0, 3), (3, 8)))
    assert val == pytest.approx(1.0, abs=1e-8)
    assert 0.0 < bar.e_theo() < 8.0


@pytest.mark.parametrize("tid", list(TruthId))
def test_non_increasing(tid):
    t = np.linspace(0, 8, 5001)
    v = truth(tid)(t)
    assert np.all(v >= 0)
    assert np.all(np.diff(v) <= 1e-15)


@given(st.floats(0.0, 8.0))
def test_non_negative_everywhere(t):
    for tid in TruthId:
        assert eval_truth(tid, t) >= 0.0


def test_other_horizon():
    lam = truth("Lambda01", T=10.0)
    assert lam.mass() == 4 * 3 + 2 * 7
    with pytest.raises(ValueError):
        lam(10.5)
