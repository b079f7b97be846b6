from fractions import Fraction as F
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from multicrit.phase import locate_multicritical
from multicrit.scaling import (CollapseError, FitError, collapse, fit_power_law, mf_scaling_data, perturbed_spreads,
                               predicted_exponents, sliding_window_fits)


def test_table_examples():
    t0 = predicted_exponents(0)
    assert (t0.beta_r, t0.xi_r, t0.delta_eps) == (F(1, 2), F(3, 2), F(1, 3))
    t1 = predicted_exponents(1)
    assert (t1.gamma_eps_w1, t1.xi_r, t1.delta_eps) == (F(2, 5), F(1), F(1, 2))
    t2 = predicted_exponents(2)
    assert (t2.xi_r, t2.beta_r) == (F(5, 6), F(1, 6))
    assert t1.quench_exponents() == (F(1, 2), F(3, 2))
    assert t0.quench_exponents() == (F(2, 3), F(1))


@given(M=st.integers(0, 12))
def test_rational_identities(M):
    t = predicted_exponents(M)
    assert t.gamma_eps_r / t.xi_r == t.gamma_eps_w1 / t.xi_w1 == t.delta_eps == F(M + 1, M + 3)
    if M >= 1:
        assert t.beta_u[-1] == F(1, 2)
    assert len(t.beta_w) == M + 1 and t.beta_w[0] == F(1, 2 * M + 3)
    for a in t.variables():
        for b in t.variables():
            assert t.crossover(a, b) * t.crossover(b, a) == 1


@pytest.mark.parametrize("M", range(1, 6))
def test_leading_singularity_ordering(M):
    t = predicted_exponents(M)
    for j in range(1, M + 1):
        assert t.crossover("r", f"u{j}") < 1
    for a in t.variables():
        if a != "w1":
            assert t.crossover("w1", a) < 1


def test_fit_exact_power_law():
    x = np.logspace(-3, 0, 7)
    r = fit_power_law(x, 3 * x**0.4)
    assert abs(r.exponent - 0.4) < 1e-12 and r.stderr < 1e-12 and r.n_points == 7


@settings(max_examples=30, deadline=None)
@given(a=st.floats(1e-3, 1e3), b=st.floats(1e-3, 1e3), p=st.floats(-2, 2))
def test_fit_scale_invariance(a, b, p):
    x = np.linspace(1, 5, 6)
    y = np.exp(np.sin(x)) * x**p
    base = fit_power_law(x, y).exponent
    assert abs(fit_power_law(a * x, b * y).exponent - base) < 1e-12


def test_fit_errors():
    with pytest.raises(FitError):
        fit_power_law([1, 2], [1, 2])
    with pytest.raises(FitError):
        fit_power_law([1, 2, 3], [1, -2, 3])
    with pytest.raises(FitError):
        fit_power_law([1, 2, 3, 4], [1, 2, 3, 4], window=(2.5, 10))


def test_sliding_windows_move_to_small_x():
    x = np.logspace(-6, 0, 13)
    fits = sliding_window_fits(x, x**0.5 * (1 + x), width=5)
    assert fits[0].window[1] == 1.0
    assert abs(fits[-1].exponent - 0.5) < abs(fits[0].exponent - 0.5)


def _synthetic(etas, taus, a, b, S=lambda X: 1 / (1 + X)):
    return [SimpleNamespace(eta=e, tau=t, jz_residual=e**a * S(t * e**b)) for e in etas for t in taus]


def test_collapse_of_exact_scaling_form_is_zero():
    etas = [0.01, 0.005]
    res = [r for e in etas for r in _synthetic([e], np.geomspace(1, 10, 8) * e**-1.5, 0.5, 1.5)]
    curves, spread = collapse(res, predicted_exponents(1))
    assert spread < 1e-12 and set(curves) == set(etas)


def test_collapse_discriminates_exponents():
    etas = [0.01, 0.005, 0.0025]
    res = [r for e in etas for r in _synthetic([e], np.geomspace(1, 10, 8) * e**-1.5, 0.5, 1.5)]
    _, good = collapse(res, (0.5, 1.5))
    _, bad = collapse(res, (2 / 3, 1.0))
    assert bad > 3 * max(good, 1e-3)
    assert all(s > good for s in perturbed_spreads(res, (0.5, 1.5)).values())


def test_collapse_errors():
    one = _synthetic([0.01], [1, 2, 3], 0.5, 1.5)
    with pytest.raises(CollapseError, match="two distinct"):
        collapse(one, (0.5, 1.5))
    apart = _synthetic([0.01, 0.0001], [1, 2, 3], 0.5, 1.5)
    with pytest.raises(CollapseError, match="no overlap"):
        collapse(apart, (0.5, 1.5))


def test_collapse_against_reference():
    etas = [0.01, 0.005]
    res = [r for e in etas for r in _synthetic([e], np.geomspace(1, 10, 8) * e**-1.5, 0.5, 1.5)]
    ref = [r for r in res if r.eta == 0.005]
    _, s = collapse(res, (0.5, 1.5), reference=ref)
    assert s < 1e-12


def test_mean_field_beta_r_at_tcp():
    cp = locate_multicritical(1, (1.0,))
    x, y = mf_scaling_data(cp, "beta_r", np.logspace(-9, -5, 9))
    assert abs(fit_power_law(x, y).exponent - 0.25) < 1e-2
