"""Special-function kernel vs slow brute-force quadrature oracles.

Every expected value here comes from an independent route (adaptive
quadrature of the defining integral, or a closed form), never from the
implementation under test.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import i0 as _i0
from scipy.special import j1 as _j1

from uavfso import specfun


# ---------------------------------------------------------------- oracles


def q_oracle(x):
    """Gaussian tail by adaptive quadrature."""
    val, _ = quad(lambda t: math.exp(-t * t / 2) / math.sqrt(2 * math.pi), x, x + 45.0,
                  epsabs=1e-14, limit=300)
    return val


def erfc_oracle(x):
    val, _ = quad(lambda t: 2.0 / math.sqrt(math.pi) * math.exp(-t * t), x, x + 30.0,
                  epsabs=1e-14, limit=300)
    return val


def marcum_oracle(a, b):
    """Direct quadrature of the defining integral x exp(-(x^2+a^2)/2) I0(ax)."""
    val, _ = quad(lambda x: x * math.exp(-(x * x + a * a) / 2) * _i0(a * x), b, b + 60.0,
                  epsabs=1e-13, limit=400)
    return val


def gamma_upper_oracle(s, x):
    val, _ = quad(lambda t: t ** (s - 1) * math.exp(-t), x, x + 300.0, epsabs=1e-14, limit=400)
    return val


def bessel_k_oracle(nu, x):
    """K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt."""
    val, _ = quad(lambda t: math.exp(-x * math.cosh(t)) * math.cosh(nu * t), 0.0, 30.0,
                  epsabs=1e-14, limit=400)
    return val


def bessel_i0_oracle(x):
    """I0(x) = (1/pi) int_0^pi exp(x cos t) dt."""
    val, _ = quad(lambda t: math.exp(x * math.cos(t)) / math.pi, 0.0, math.pi,
                  epsabs=1e-13, limit=200)
    return val


def bessel_j1_oracle(x):
    """J1(x) = (1/pi) int_0^pi cos(t - x sin t) dt."""
    val, _ = quad(lambda t: math.cos(t - x * math.sin(t)) / math.pi, 0.0, math.pi,
                  epsabs=1e-13, limit=200)
    return val


# ---------------------------------------------------------------- Q function


def test_q_symmetry_at_zero():
    assert specfun.q_function(0.0) == pytest.approx(0.5, abs=1e-15)


def test_q_vanishes_at_infinity():
    assert specfun.q_function(40.0) < 1e-300


def test_q_at_one_vs_quadrature():
    # frozen from q_oracle(1.0)
    assert specfun.q_function(1.0) == pytest.approx(0.15865525393145707, abs=1e-12)
    assert specfun.q_function(1.0) == pytest.approx(q_oracle(1.0), abs=1e-12)


def test_q_erfc_identity_grid():
    x = np.linspace(-8.0, 8.0, 161)
    assert np.max(np.abs(specfun.q_function(x) - 0.5 * specfun.erfc(x / np.sqrt(2)))) < 1e-12


@given(st.floats(-30.0, 30.0))
@settings(max_examples=60, deadline=None)
def test_q_complement(x):
    assert specfun.q_function(x) + specfun.q_function(-x) == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------- Marcum Q


def test_marcum_full_mass_at_b_zero():
    for a in (0.0, 0.5, 2.0, 7.0):
        assert specfun.marcum_q1(a, 0.0) == pytest.approx(1.0, abs=1e-12)


def test_marcum_rayleigh_reduction():
    b = np.array([0.3, 1.0, 2.5])
    assert specfun.marcum_q1(0.0, b) == pytest.approx(np.exp(-b * b / 2), abs=1e-13)


def test_marcum_1_2_vs_quadrature():
    # frozen from marcum_oracle(1.0, 2.0)
    assert specfun.marcum_q1(1.0, 2.0) == pytest.approx(0.26901206003591, abs=1e-10)


def test_marcum_grid_vs_quadrature():
    for a in (0.1, 1.0, 3.0, 6.0):
        for b in (0.05, 0.7, 2.0, 5.0, 9.0):
            assert specfun.marcum_q1(a, b) == pytest.approx(marcum_oracle(a, b), abs=1e-10)


def test_marcum_monotone_decreasing_in_b():
    b = np.linspace(0.0, 8.0, 200)
    q = specfun.marcum_q1(1.7, b)
    assert np.all(np.diff(q) <= 1e-14)


def test_marcum_increasing_in_a():
    a = np.linspace(0.0, 6.0, 100)
    q = specfun.marcum_q1(a, 2.0)
    assert np.all(np.diff(q) >= -1e-14)


def test_marcum_rejects_negative():
    with pytest.raises(ValueError):
        specfun.marcum_q1(-1.0, 2.0)


# ---------------------------------------------------------------- incomplete gamma


def test_gamma_upper_at_zero_is_gamma():
    assert specfun.gamma_upper(1.0, 0.0) == pytest.approx(1.0, abs=1e-14)
    assert specfun.gamma_upper(2.5, 0.0) == pytest.approx(math.gamma(2.5), rel=1e-14)


def test_gamma_lower_at_zero():
    for s in (0.5, 1.0, 3.7):
        assert specfun.gamma_lower(s, 0.0) == 0.0


def test_gamma_upper_1p5_2_vs_quadrature():
    # frozen from gamma_upper_oracle(1.5, 2.0)
    assert specfun.gamma_upper(1.5, 2.0) == pytest.approx(0.23171655200098065, abs=1e-12)


def test_gamma_additivity():
    rng = np.random.default_rng(42)
    for _ in range(40):
        s = rng.uniform(0.1, 8.0)
        x = rng.uniform(0.0, 12.0)
        total = specfun.gamma_upper(s, x) + specfun.gamma_lower(s, x)
        assert total == pytest.approx(math.gamma(s), rel=1e-10)


def test_gamma_rejects_nonpositive_order():
    with pytest.raises(ValueError):
        specfun.gamma_upper(0.0, 1.0)
    with pytest.raises(ValueError):
        specfun.gamma_lower(-1.5, 1.0)


# ---------------------------------------------------------------- Bessel


def test_bessel_trivia():
    assert specfun.bessel_i0(0.0) == 1.0
    assert specfun.bessel_j1(0.0) == 0.0
    assert specfun.bessel_k(0.5, 1.0) == pytest.approx(math.sqrt(math.pi / 2) * math.exp(-1), rel=1e-13)


def test_bessel_k_symmetric_in_order():
    x = np.array([0.2, 1.0, 4.0])
    assert specfun.bessel_k(1.3, x) == pytest.approx(specfun.bessel_k(-1.3, x), rel=1e-13)


def test_bessel_k_rejects_zero_argument():
    with pytest.raises(ValueError):
        specfun.bessel_k(1.5, 0.0)


def test_bessel_vs_quadrature_oracles():
    for x in (0.1, 0.9, 3.0, 8.0):
        assert specfun.bessel_i0(x) == pytest.approx(bessel_i0_oracle(x), rel=1e-11)
        assert specfun.bessel_j1(x) == pytest.approx(bessel_j1_oracle(x), abs=1e-11)
    for nu in (0.5, 1.3, 2.8):
        for x in (0.1, 1.0, 4.0):
            assert specfun.bessel_k(nu, x) == pytest.approx(bessel_k_oracle(nu, x), rel=1e-10)


def test_j1_squared_normalization():
    # int_0^inf J1(x)^2 / x dx = 1/2; truncate at X and add the averaged
    # asymptotic tail 1/(pi X) from J1(x)^2 ~ (1 - sin 2x)/(pi x).
    X = 2000.0
    head, _ = quad(lambda x: _j1(x) ** 2 / x, 1e-12, X, limit=4000)
    assert head + 1.0 / (math.pi * X) == pytest.approx(0.5, abs=1e-6)


# ---------------------------------------------------------------- K series


def test_k_series_matches_half_integer_closed_form():
    approx = specfun.bessel_k_series(0.5, 1.0, 30)
    assert approx == pytest.approx(math.sqrt(math.pi / 2) * math.exp(-1), abs=1e-8)


def test_k_series_small_argument_vs_oracle():
    assert specfun.bessel_k_series(1.3, 0.1, 20) == pytest.approx(bessel_k_oracle(1.3, 0.1), abs=1e-8)


def test_k_series_truncation_error_decreases():
    nu, z = 2.3, 1.7
    exact = specfun.bessel_k(nu, z)
    errs = [abs(specfun.bessel_k_series(nu, z, m) - exact) for m in (5, 15, 25)]
    assert errs[0] > errs[1] > errs[2] or errs[2] < 1e-14


def test_k_series_rejects_integer_order():
    with pytest.raises(ValueError):
        specfun.bessel_k_series(2.0, 1.0, 10)


# ---------------------------------------------------------------- acceptance-style grid

def test_oracle_grid_suite():
    """Q, erfc, incomplete gammas, I0, J1, K_nu, Marcum vs oracles, 1e-8 abs."""
    xs = np.linspace(0.05, 5.0, 25)
    for x in xs:
        assert abs(specfun.q_function(x) - q_oracle(x)) < 1e-8
        assert abs(specfun.erfc(x) - erfc_oracle(x)) < 1e-8
        assert abs(specfun.gamma_upper(1.7, x) - gamma_upper_oracle(1.7, x)) < 1e-8
        assert abs(specfun.bessel_i0(x) - bessel_i0_oracle(x)) < 1e-8 * max(1.0, _i0(x))
        assert abs(specfun.bessel_j1(x) - bessel_j1_oracle(x)) < 1e-8
        assert abs(specfun.bessel_k(1.3, x) - bessel_k_oracle(1.3, x)) < 1e-8 * max(1.0, bessel_k_oracle(1.3, x))
        assert abs(specfun.marcum_q1(1.5, x) - marcum_oracle(1.5, x)) < 1e-8
