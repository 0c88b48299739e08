"""Bessel sequence, scalar polynomial recursions, and the dt advisors."""

import math

import numpy as np
import pytest

from polyprop.errors import UsageError
from polyprop.propagators import (bessel_j_sequence, hermite_scalar,
                                  laguerre_scalar, suggest_dt_hermite,
                                  suggest_dt_laguerre)


def bessel_series_oracle(k: int, tau: float) -> float:
    """J_k by its power series, summed to machine precision (good for tau <~ 12)."""
    term = (0.5 * tau) ** k / math.factorial(k)
    total = term
    for m in range(1, 200):
        term *= -(0.25 * tau * tau) / (m * (m + k))
        total += term
        if abs(term) < 1e-20 * max(abs(total), 1e-30):
            break
    return total


def test_bessel_at_zero_is_kronecker():
    seq = bessel_j_sequence(0.0, 6)
    assert seq[0] == 1.0
    assert np.all(seq[1:] == 0.0)


def test_bessel_j0_at_one():
    assert bessel_j_sequence(1.0, 0)[0] == pytest.approx(0.7651976865579666, abs=1e-15)
    assert bessel_series_oracle(0, 1.0) == pytest.approx(0.7651976865579666, abs=1e-15)


@pytest.mark.parametrize("tau", [0.05, 0.5, 1.0, 2.404825, 3.83, 5.0, 7.7, 9.9])
def test_bessel_matches_power_series(tau):
    seq = bessel_j_sequence(tau, 30)
    for k in range(31):
        assert seq[k] == pytest.approx(bessel_series_oracle(k, tau), abs=1e-13)


def test_bessel_normalization_identity():
    rng = np.random.default_rng(17)
    for tau in rng.uniform(0.01, 10.0, size=25):
        seq = bessel_j_sequence(float(tau), 80)
        assert seq[0] + 2.0 * np.sum(seq[2::2]) == pytest.approx(1.0, abs=1e-12)


def test_bessel_sum_of_squares_identity():
    for tau in (0.3, 1.0, 4.2, 8.8):
        seq = bessel_j_sequence(tau, 80)
        assert seq[0] ** 2 + 2.0 * np.sum(seq[1:] ** 2) == pytest.approx(1.0, abs=1e-12)


def test_bessel_negative_tau_parity():
    plus = bessel_j_sequence(2.7, 9)
    minus = bessel_j_sequence(-2.7, 9)
    signs = (-1.0) ** np.arange(10)
    assert np.allclose(minus, plus * signs, atol=1e-15)


def test_bessel_large_tau_stays_normalized():
    seq = bessel_j_sequence(9000.0, 40)
    assert np.all(np.abs(seq) < 1.0)
    # the closed normalization cannot be checked truncated; parity + finiteness only
    assert np.all(np.isfinite(seq))


def test_bessel_input_validation():
    with pytest.raises(UsageError):
        bessel_j_sequence(float("nan"), 3)
    with pytest.raises(UsageError):
        bessel_j_sequence(1e5, 3)
    with pytest.raises(UsageError):
        bessel_j_sequence(1.0, -1)


def test_hermite_scalar_low_orders():
    assert hermite_scalar(0, 0.7) == 1.0
    assert hermite_scalar(1, 0.7) == pytest.approx(1.4)
    assert hermite_scalar(2, 1.0) == pytest.approx(2.0)  # 4x^2 - 2
    x = 1.3
    assert hermite_scalar(3, x) == pytest.approx(8 * x ** 3 - 12 * x)
    assert hermite_scalar(4, x) == pytest.approx(16 * x ** 4 - 48 * x ** 2 + 12)


def test_laguerre_scalar_low_orders():
    assert laguerre_scalar(0, -0.5, 2.0) == 1.0
    assert laguerre_scalar(1, -0.5, 2.0) == pytest.approx(-1.5)  # alpha + 1 - x
    a, x = 0.7, 1.9
    l2 = ((a + 1) * (a + 2) / 2.0) - (a + 2) * x + x * x / 2.0
    assert laguerre_scalar(2, a, x) == pytest.approx(l2, rel=1e-13)


def test_laguerre_scalar_validates_alpha_and_order():
    with pytest.raises(UsageError):
        laguerre_scalar(2, -1.0, 0.3)
    with pytest.raises(UsageError):
        laguerre_scalar(500, 0.0, 0.3)
    with pytest.raises(UsageError):
        hermite_scalar(500, 0.3)


@pytest.mark.parametrize("x", [0.5, 1.0, 2.0])
def test_laguerre_hermite_identity(x):
    # L_k^{-1/2}(x^2) = (-1)^k / (2^{2k} k!) * H_{2k}(x)
    for k in range(11):
        lhs = laguerre_scalar(k, -0.5, x * x)
        rhs = (-1.0) ** k / (4.0 ** k * math.factorial(k)) * hermite_scalar(2 * k, x)
        assert lhs == pytest.approx(rhs, rel=1e-9)


def test_suggest_dt_hermite_values():
    assert suggest_dt_hermite(0.0, 30, 0.5) == pytest.approx(
        math.sqrt(30 / math.e) * 0.5, rel=1e-12)
    assert suggest_dt_hermite(0.0, 30, 0.5) == pytest.approx(1.6611, abs=2e-4)
    assert suggest_dt_hermite(24.0, 30, 0.5) == pytest.approx(
        math.sqrt(30 / math.e) * 0.5 * math.exp(-2.4), rel=1e-12)
    assert suggest_dt_hermite(24.0, 30, 0.5) == pytest.approx(0.1507, abs=2e-4)


def test_suggest_dt_hermite_monotone_in_em():
    vals = [suggest_dt_hermite(em, 30, 0.5) for em in np.linspace(0.0, 40.0, 15)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_suggest_dt_laguerre_values():
    assert suggest_dt_laguerre(24.0, 30) == pytest.approx(
        (math.exp((24 + math.log(2)) / 30) - 1.0) ** -0.5, rel=1e-12)
    assert suggest_dt_laguerre(24.0, 30) == pytest.approx(0.885, abs=1e-3)


def test_suggest_dt_laguerre_monotone_in_k_and_diverges():
    vals = [suggest_dt_laguerre(24.0, k) for k in range(1, 40)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    # E_m = 0: grows like sqrt(k / ln 2) for large k
    k = 20000
    assert suggest_dt_laguerre(0.0, k) == pytest.approx(
        math.sqrt(k / math.log(2)), rel=1e-3)


def test_advisors_validate_inputs():
    with pytest.raises(UsageError):
        suggest_dt_hermite(-1.0, 30, 0.5)
    with pytest.raises(UsageError):
        suggest_dt_hermite(1.0, 0, 0.5)
    with pytest.raises(UsageError):
        suggest_dt_laguerre(1.0, 0)
