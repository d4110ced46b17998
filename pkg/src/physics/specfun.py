"""
Специальные функции для формул CIR: дзета Гурвица, гамма-функция
и функции Риккати-Бесселя для сшивки фаз рассеяния.
"""
import math
from typing import NamedTuple

from scipy import special

from service.errors import DomainError, NumericError, PoleError, UnsupportedError
from service.logger import logger
from service.settings import DEBUG, SPECFUN_SETTINGS

# B_2, B_4, ..., B_12
BERNOULLI_EVEN = (1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730)

_BERNOULLI_COEFFS = tuple(b / math.factorial(2 * j) for j, b in enumerate(BERNOULLI_EVEN, start=1))

# u = ĵ cos δ - n̂ sin δ, n̂_0 = -cos x
RICCATI_WRONSKIAN = 1.0

MAX_RICCATI_ELL = 2


class RiccatiBessel(NamedTuple):
    j: float
    dj: float
    n: float
    dn: float


def hurwitz_zeta(s: float, a: float) -> float:
    """
    ζ_H(s, a) через формулу Эйлера-Маклорена: K членов в голове,
    хвостовой интеграл и поправки Бернулли до B_12.
    """
    if not a > 0:
        raise DomainError(f"ζ_H определена только при a > 0, получено a={a!r}")
    if s == 1:
        raise PoleError("ζ_H имеет полюс при s = 1")

    head_terms = SPECFUN_SETTINGS["head_terms"]
    head = math.fsum((n + a) ** (-s) for n in range(head_terms))

    x = head_terms + a
    tail = x ** (1 - s) / (s - 1) + 0.5 * x ** (-s)

    corrections = []
    rising = s
    power = x ** (-s - 1)
    for j, coeff in enumerate(_BERNOULLI_COEFFS, start=1):
        if j > 1:
            rising *= (s + 2 * j - 3) * (s + 2 * j - 2)
            power /= x * x
        corrections.append(coeff * rising * power)

    return head + tail + math.fsum(corrections)


def gamma_fn(x: float) -> float:
    if not x > 0:
        raise DomainError(f"Γ(x) нужна только при x > 0, получено x={x!r}")
    return float(special.gamma(x))


def _regular_series(ell: int, x: float) -> tuple[float, float]:
    # x^{ℓ+1} Σ (-x²/2)^m / (m! (2ℓ+2m+1)!!)
    double_fact = float(math.prod(range(1, 2 * ell + 2, 2)))
    coeff = 1.0 / double_fact
    value = 0.0
    deriv = 0.0
    for m in range(SPECFUN_SETTINGS["series_terms"]):
        if m > 0:
            coeff *= -0.5 / (m * (2 * ell + 2 * m + 1))
        order = ell + 1 + 2 * m
        value += coeff * x ** order
        deriv += coeff * order * x ** (order - 1)
    return value, deriv


def riccati_bessel(ell: int, x: float) -> RiccatiBessel:
    """Функции Риккати-Бесселя x·j_ℓ(x), x·n_ℓ(x) и их производные для ℓ = 0, 1, 2."""
    if ell < 0 or ell > MAX_RICCATI_ELL:
        raise UnsupportedError(f"Поддерживаются только ℓ = 0..{MAX_RICCATI_ELL}, получено ℓ={ell}")
    if not x > 0:
        raise DomainError(f"Аргумент должен быть положительным, получено x={x!r}")

    s, c = math.sin(x), math.cos(x)

    if ell == 0:
        j, dj = s, c
        n, dn = -c, s
    elif ell == 1:
        j = s / x - c
        dj = c / x - s / x ** 2 + s
        n = -c / x - s
        dn = s / x + c / x ** 2 - c
    else:
        j = (3 / x ** 2 - 1) * s - 3 * c / x
        dj = -6 * s / x ** 3 + (3 / x ** 2 - 1) * c + 3 * s / x + 3 * c / x ** 2
        n = (1 - 3 / x ** 2) * c - 3 * s / x
        dn = 6 * c / x ** 3 - (1 - 3 / x ** 2) * s - 3 * c / x + 3 * s / x ** 2

    # при малых x замкнутая форма теряет точность на сокращении
    if ell > 0 and x < SPECFUN_SETTINGS["series_switch"]:
        j, dj = _regular_series(ell, x)

    return RiccatiBessel(j, dj, n, dn)


def _self_check() -> None:
    samples = ((0.5, 0.25), (0.5, 0.99), (-0.5, 0.5), (-0.5, 0.999), (2.5, 1.7))
    for s, a in samples:
        lhs = hurwitz_zeta(s, a)
        rhs = hurwitz_zeta(s, a + 1) + a ** (-s)
        if abs(lhs - rhs) > 1e-10 * max(1.0, abs(lhs)):
            raise NumericError(f"Самопроверка ζ_H не пройдена: s={s}, a={a}, {lhs!r} != {rhs!r}")
    logger.debug("Самопроверка ζ_H пройдена")


if DEBUG:
    _self_check()
