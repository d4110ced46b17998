import math

import pytest
from scipy import special

from physics.specfun import RICCATI_WRONSKIAN, gamma_fn, hurwitz_zeta, riccati_bessel
from service.errors import DomainError, PoleError, UnsupportedError


def test_hurwitz_zeta_matches_riemann_values():
    assert hurwitz_zeta(2.0, 1.0) == pytest.approx(math.pi ** 2 / 6, rel=1e-12)
    assert hurwitz_zeta(0.5, 1.0) == pytest.approx(-1.4603545088095868, rel=1e-10)
    assert hurwitz_zeta(-0.5, 1.0) == pytest.approx(-0.20788622497735457, rel=1e-10)


def test_hurwitz_zeta_half_argument():
    # ζ(s, 1/2) = (2^s - 1) ζ(s)
    assert hurwitz_zeta(2.0, 0.5) == pytest.approx(math.pi ** 2 / 2, rel=1e-12)


@pytest.mark.parametrize("s, a", [(2.5, 0.3), (1.5, 0.99), (3.0, 2.7)])
def test_hurwitz_zeta_agrees_with_scipy(s, a):
    assert hurwitz_zeta(s, a) == pytest.approx(float(special.zeta(s, a)), rel=1e-11)


@pytest.mark.parametrize("s", [0.5, -0.5])
@pytest.mark.parametrize("a", [0.01, 0.25, 0.99, 1.0])
def test_hurwitz_zeta_shift_recurrence(s, a):
    lhs = hurwitz_zeta(s, a)
    rhs = hurwitz_zeta(s, a + 1) + a ** (-s)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)


def test_hurwitz_zeta_rejects_bad_arguments():
    with pytest.raises(DomainError):
        hurwitz_zeta(0.5, 0.0)
    with pytest.raises(DomainError):
        hurwitz_zeta(0.5, -1.0)
    with pytest.raises(PoleError):
        hurwitz_zeta(1.0, 0.5)


def test_gamma_fn():
    assert gamma_fn(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-14)
    assert gamma_fn(5.0) == pytest.approx(24.0, rel=1e-14)
    with pytest.raises(DomainError):
        gamma_fn(0.0)


def test_riccati_bessel_s_wave_is_trigonometric():
    rb = riccati_bessel(0, 1.3)
    assert rb.j == pytest.approx(math.sin(1.3))
    assert rb.n == pytest.approx(-math.cos(1.3))
    assert rb.dj == pytest.approx(math.cos(1.3))
    assert rb.dn == pytest.approx(math.sin(1.3))


@pytest.mark.parametrize("ell", [0, 1, 2])
@pytest.mark.parametrize("x", [0.3, 0.99, 1.01, 5.0, 40.0])
def test_riccati_wronskian(ell, x):
    rb = riccati_bessel(ell, x)
    assert rb.j * rb.dn - rb.dj * rb.n == pytest.approx(RICCATI_WRONSKIAN, rel=1e-10)


@pytest.mark.parametrize("ell", [1, 2])
def test_riccati_series_joins_closed_form(ell):
    below = riccati_bessel(ell, 1.0 - 1e-9)
    above = riccati_bessel(ell, 1.0 + 1e-9)
    assert below.j == pytest.approx(above.j, rel=1e-7)
    assert below.dj == pytest.approx(above.dj, rel=1e-7)


def test_riccati_small_argument_behaviour():
    # x j_1(x) ≈ x²/3, x j_2(x) ≈ x³/15
    assert riccati_bessel(1, 1e-3).j == pytest.approx(1e-6 / 3, rel=1e-6)
    assert riccati_bessel(2, 1e-3).j == pytest.approx(1e-9 / 15, rel=1e-6)


def test_riccati_rejects_unsupported_arguments():
    with pytest.raises(UnsupportedError):
        riccati_bessel(3, 1.0)
    with pytest.raises(DomainError):
        riccati_bessel(1, 0.0)


@pytest.mark.parametrize("x", [0.25, 0.75, 1.5, 7.3])
def test_gamma_recurrence(x):
    assert gamma_fn(x + 1) == pytest.approx(x * gamma_fn(x), rel=1e-13)


def test_gamma_quarter():
    assert gamma_fn(0.25) == pytest.approx(3.6256099082, rel=1e-10)


def test_hurwitz_zeta_half_decreases_in_a():
    values = [hurwitz_zeta(0.5, 0.05 + 0.1 * i) for i in range(30)]
    assert all(later < earlier for earlier, later in zip(values, values[1:]))
