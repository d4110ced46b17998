"""
Квазиодномерное рассеяние в волноводе: 1D-фазы η± из трёхмерных длин рассеяния
и коэффициент прохождения T(B) = cos²(η₊ + η₋).

Все формулы вычисляются через обратные величины (1/a, 1/V_p, 1/a_d) и atan2,
поэтому полюса трёхмерных длин остаются регулярными точками T.
"""
import cmath
import math
from dataclasses import dataclass
from functools import partial
from typing import FrozenSet, List, Optional, Protocol, Sequence, Tuple

import numpy as np
from scipy import optimize

from physics.radial import (
    CHANNELS,
    FeshbachResonance,
    ScatteringData,
    VdwModel,
    wrap_half_pi,
    solver_for,
)
from physics.specfun import hurwitz_zeta
from service.errors import BracketingError, ConfigError, DomainError, NumericError, PoleError, UnsupportedError
from service.logger import logger
from service.settings import FLAGS, TRAP_DEFAULTS
from service.workers import parallel_map

EQ6_READINGS = ("reduced", "literal")

_IDENTITY_TOL = 1e-12

OK, POLE = FLAGS[0], FLAGS[3]


@dataclass(frozen=True)
class TrapConfig:
    d: float = TRAP_DEFAULTS["d"]
    p: float = TRAP_DEFAULTS["p"]
    partial_waves: FrozenSet[str] = frozenset(TRAP_DEFAULTS["partial_waves"])
    eq6_reading: str = TRAP_DEFAULTS["eq6_reading"]

    def __post_init__(self):
        object.__setattr__(self, "partial_waves", frozenset(self.partial_waves))
        if not self.d > 0:
            raise DomainError(f"Ширина волновода d должна быть положительной, получено {self.d!r}")
        if self.p < 0:
            raise DomainError(f"Продольный импульс p должен быть неотрицательным, получено {self.p!r}")
        if not self.p * self.d < 2:
            raise DomainError(f"Нарушено одномодовое условие p·d < 2 (p·d = {self.p * self.d!r})")
        unknown = self.partial_waves - set(CHANNELS)
        if unknown:
            raise UnsupportedError(f"Неизвестные парциальные волны: {sorted(unknown)}")
        if self.eq6_reading not in EQ6_READINGS:
            raise ConfigError(f"Допустимые значения: {EQ6_READINGS}", key="trap.eq6_reading")


@dataclass(frozen=True)
class PhaseShifts1D:
    eta_plus: float
    eta_minus: float

    def __post_init__(self):
        if not (math.isfinite(self.eta_plus) and math.isfinite(self.eta_minus)):
            raise DomainError(f"Фазы должны быть конечными: η₊={self.eta_plus!r}, η₋={self.eta_minus!r}")

    @property
    def total(self) -> float:
        return self.eta_plus + self.eta_minus


class DWaveCoefficients(Protocol):
    def coefficients(self, trap: TrapConfig) -> Tuple[float, float, float]:
        ...


@dataclass(frozen=True)
class FixedDWaveCoefficients:
    """Постоянные C₂, C₃, C₄ для поправки d-волны к чётной фазе."""
    c2: float
    c3: float
    c4: float

    def coefficients(self, trap: TrapConfig) -> Tuple[float, float, float]:
        return self.c2, self.c3, self.c4


def zeta_energy_arg(trap: TrapConfig) -> float:
    """3/2 - E/(2ħω) = 1 - p²d²/4."""
    q = 1.0 - (trap.p * trap.d) ** 2 / 4.0
    if not q > 0:
        raise DomainError(f"Аргумент ζ_H неположителен (q = {q!r}): открывается следующая поперечная мода")
    return q


def olshanii_constant(trap: TrapConfig) -> float:
    return -hurwitz_zeta(0.5, zeta_energy_arg(trap))


def collision_wavenumber(trap: TrapConfig) -> float:
    """k из E = ħω + ħ²p²/2m при ħω = 1/d²."""
    return math.sqrt(trap.p ** 2 + 2.0 / trap.d ** 2)


def _reciprocal(value: float) -> float:
    if value == 0:
        return math.inf
    if math.isinf(value):
        return 0.0
    return 1.0 / value


def _fifth_power(x: float) -> float:
    try:
        return x ** 5
    except OverflowError:
        return math.copysign(math.inf, x)


def even_phase_s_inverse(inv_a: float, trap: TrapConfig) -> float:
    if math.isinf(inv_a):
        return 0.0
    c = olshanii_constant(trap)
    return wrap_half_pi(math.atan2(-2.0, trap.p * trap.d * (trap.d * inv_a - c)))


def even_phase_s(a_s: float, trap: TrapConfig) -> float:
    return even_phase_s_inverse(_reciprocal(a_s), trap)


def odd_phase_p_inverse(inv_Vp: float, trap: TrapConfig) -> float:
    if math.isinf(inv_Vp):
        return 0.0
    q = zeta_energy_arg(trap)
    if trap.eq6_reading == "literal":
        numerator = 6.0 * trap.p * trap.d / trap.d ** 3
    else:
        numerator = 6.0 * trap.p / trap.d ** 2
    denominator = inv_Vp - 12.0 * hurwitz_zeta(-0.5, q) / trap.d ** 3
    return wrap_half_pi(math.atan2(-numerator, denominator))


def odd_phase_p(V_p: float, trap: TrapConfig) -> float:
    return odd_phase_p_inverse(_reciprocal(V_p), trap)


def even_phase_sd_inverse(
    inv_a: float,
    inv_a_d: float,
    trap: TrapConfig,
    coefficients: Optional[DWaveCoefficients] = None,
) -> float:
    if coefficients is None:
        raise ConfigError("Для d-волны нужны коэффициенты C₂, C₃, C₄", key="trap.c2")
    c2, c3, c4 = coefficients.coefficients(trap)
    if inv_a_d == 0:
        beta5 = math.inf
    elif math.isinf(inv_a_d):
        beta5 = 0.0
    else:
        beta5 = _fifth_power(1.0 / (trap.d * inv_a_d))
    if beta5 == 0:
        return even_phase_s_inverse(inv_a, trap)

    cg = hurwitz_zeta(0.5, zeta_energy_arg(trap))
    pd = trap.p * trap.d

    if math.isinf(inv_a) and math.isinf(beta5):
        return wrap_half_pi(math.atan2(-10.0, pd * c2))
    if math.isinf(inv_a):
        return wrap_half_pi(math.atan2(-10.0 * beta5, pd * (1.0 + beta5 * c2)))

    g = trap.d * inv_a
    shifted = g + cg
    inner = g + cg - c4 / 2.0
    if math.isinf(beta5):
        mixed = c2 * g + c3
        numerator = 2.0 * mixed + 10.0 * inner ** 2
        denominator = pd * shifted * mixed
    else:
        full = shifted + beta5 * (c2 * g + c3)
        numerator = 2.0 * full + 10.0 * beta5 * inner ** 2
        denominator = pd * shifted * full
    return wrap_half_pi(math.atan2(-numerator, denominator))


def even_phase_sd(
    a_s: float,
    a_d: float,
    trap: TrapConfig,
    coefficients: Optional[DWaveCoefficients] = None,
) -> float:
    return even_phase_sd_inverse(_reciprocal(a_s), _reciprocal(a_d), trap, coefficients)


def scattering_amplitudes(ph: PhaseShifts1D) -> Tuple[complex, complex]:
    """f⁺ = -1/(1 + i cot η₊), f⁻ = -1/(1 - i cot η₋) в форме i sinη e^{iη}."""
    f_plus = 1j * math.sin(ph.eta_plus) * cmath.exp(1j * ph.eta_plus)
    f_minus = -1j * math.sin(ph.eta_minus) * cmath.exp(-1j * ph.eta_minus)
    return f_plus, f_minus


def transmission(ph: PhaseShifts1D) -> float:
    f_plus, f_minus = scattering_amplitudes(ph)
    amplitude = abs(1.0 + f_plus + f_minus) ** 2
    closed = math.cos(ph.total) ** 2
    if abs(amplitude - closed) > _IDENTITY_TOL:
        raise NumericError(f"|1+f⁺+f⁻|² = {amplitude!r} не совпадает с cos²(η₊+η₋) = {closed!r}")
    return min(max(amplitude, 0.0), 1.0)


def reflection(ph: PhaseShifts1D) -> float:
    return math.sin(ph.total) ** 2


@dataclass(frozen=True)
class TransmissionPoint:
    B: float
    T: float
    R: float
    eta_plus: float
    eta_minus: float
    flags: Tuple[str, ...]
    scattering: Optional[ScatteringData] = None


@dataclass(frozen=True)
class TransmissionModel:
    """Связка волновода, радиальной модели и резонанса: T как функция поля."""
    trap: TrapConfig
    vdw: VdwModel
    resonance: FeshbachResonance
    mass_factor: float = TRAP_DEFAULTS["mass_factor"]
    d_wave: Optional[DWaveCoefficients] = None

    def __post_init__(self):
        if self.mass_factor <= 0:
            raise DomainError(f"mass_factor должен быть положительным, получено {self.mass_factor!r}")
        if "d" in self.trap.partial_waves and self.d_wave is None:
            raise ConfigError("Канал d включён, но коэффициенты C₂, C₃, C₄ не заданы", key="trap.partial_waves")

    @property
    def k(self) -> float:
        return collision_wavenumber(self.trap)

    def waves(self) -> Tuple[int, ...]:
        return tuple(ell for ell, name in enumerate(CHANNELS) if name in self.trap.partial_waves)

    def scattering(self, B: float) -> ScatteringData:
        return solver_for(self.vdw).scattering_quantities(self.resonance, B, self.k, self.mass_factor, self.waves())

    def phases_from(self, data: ScatteringData) -> PhaseShifts1D:
        waves = self.trap.partial_waves
        inv_a = data.inv_a_s if "s" in waves else math.inf
        if "d" in waves:
            eta_plus = even_phase_sd_inverse(inv_a, data.inv_a_d, self.trap, self.d_wave)
        else:
            eta_plus = even_phase_s_inverse(inv_a, self.trap)
        eta_minus = odd_phase_p_inverse(data.inv_V_p, self.trap) if "p" in waves else 0.0
        return PhaseShifts1D(eta_plus, eta_minus)

    def phases(self, B: float) -> PhaseShifts1D:
        return self.phases_from(self.scattering(B))

    def phase(self, B: float) -> float:
        return self.phases(B).total

    def transmission(self, B: float) -> float:
        return transmission(self.phases(B))

    def reflection(self, B: float) -> float:
        return reflection(self.phases(B))

    def point(self, B: float) -> TransmissionPoint:
        data = self.scattering(B)
        ph = self.phases_from(data)
        flags = (POLE,) if data.poles else (OK,)
        return TransmissionPoint(B, transmission(ph), reflection(ph), ph.eta_plus, ph.eta_minus, flags, data)


def _point_or_flag(model: TransmissionModel, B: float) -> TransmissionPoint:
    try:
        return model.point(B)
    except (PoleError, BracketingError) as error:
        logger.warning(f"B={B!r}: точка пропущена ({error})")
        return TransmissionPoint(B, math.nan, math.nan, math.nan, math.nan, (POLE,))


def transmission_vs_B(
    trap: TrapConfig,
    model: VdwModel,
    res: FeshbachResonance,
    B_grid: Sequence[float],
    mass_factor: float = 1.0,
    d_wave: Optional[DWaveCoefficients] = None,
    threads: int = 1,
) -> List[TransmissionPoint]:
    tm = TransmissionModel(trap, model, res, mass_factor, d_wave)
    B_grid = [float(B) for B in B_grid]
    if any(b >= a for a, b in zip(B_grid[1:], B_grid)):
        raise DomainError("Сетка по B должна строго возрастать")
    curve = parallel_map(partial(_point_or_flag, tm), B_grid, threads)
    flagged = sum(1 for point in curve if point.flags != (OK,))
    logger.info(f"Скан T(B): {len(curve)} точек, помечено {flagged}")
    return curve


def _channel_phase(model: TransmissionModel, channel: str, B: float) -> float:
    ph = model.phases(B)
    if channel == "s":
        return ph.eta_plus
    if channel == "p":
        return ph.eta_minus
    raise UnsupportedError(f"Поиск CIR поддерживается для каналов s и p, получено {channel!r}")


def _cir_denominator(model: TransmissionModel, channel: str, B: float) -> float:
    data = model.scattering(B)
    trap = model.trap
    if channel == "s":
        return trap.d * data.inv_a_s - olshanii_constant(trap)
    return data.inv_V_p - 12.0 * hurwitz_zeta(-0.5, zeta_energy_arg(trap)) / trap.d ** 3


def find_cir_fields(model: TransmissionModel, channel: str, B_grid: Sequence[float]) -> List[float]:
    """
    Поля, где |η| = π/2 в выбранном канале: нули знаменателя формулы фазы.

    Окно CIR может быть уже шага сетки, поэтому ищется смена знака знаменателя,
    а не перескок η; смена знака через бесконечность (a = 0 или V_p = 0) отбрасывается.
    """
    if channel not in ("s", "p"):
        raise UnsupportedError(f"Поиск CIR поддерживается для каналов s и p, получено {channel!r}")
    if channel not in model.trap.partial_waves:
        raise ConfigError(f"Канал {channel} не включён в trap.partial_waves", key="trap.partial_waves")
    denominator = partial(_cir_denominator, model, channel)
    B_grid = [float(B) for B in B_grid]
    values = [denominator(B) for B in B_grid]
    fields = []
    for (B_lo, f_lo), (B_hi, f_hi) in zip(zip(B_grid, values), zip(B_grid[1:], values[1:])):
        if not (math.isfinite(f_lo) and math.isfinite(f_hi)) or f_lo * f_hi > 0:
            continue
        if f_lo == 0:
            fields.append(B_lo)
            continue
        if f_hi == 0:
            continue
        root = optimize.brentq(denominator, B_lo, B_hi, xtol=1e-15)
        residual = denominator(root)
        if not math.isfinite(residual) or abs(residual) > 1e-3 * max(abs(f_lo), abs(f_hi)):
            logger.debug(f"Интервал [{B_lo!r}, {B_hi!r}]: знаменатель меняет знак через бесконечность")
            continue
        fields.append(root)
    return fields


def find_cir_field(model: TransmissionModel, channel: str, B_lo: float, B_hi: float, points: int = 201) -> float:
    fields = find_cir_fields(model, channel, np.linspace(B_lo, B_hi, points))
    if not fields:
        raise BracketingError(f"CIR канала {channel} не найден в [{B_lo!r}, {B_hi!r}]")
    logger.info(f"CIR канала {channel}: B = {fields[0]:.10g}")
    return fields[0]


def resonance_width(
    model: TransmissionModel,
    channel: str,
    B_cir: float,
    first_step: float = 1e-9,
    max_span: float = 1.0,
) -> float:
    """Полуширина по B окна |η| > π/4 вокруг CIR."""
    def excess(B: float) -> float:
        return abs(_channel_phase(model, channel, B)) - math.pi / 4

    edges = []
    for direction in (-1.0, 1.0):
        inner, step = B_cir, first_step
        while True:
            outer = B_cir + direction * step
            if excess(outer) < 0:
                break
            inner = outer
            step *= 2.0
            if step > max_span:
                raise BracketingError(f"Край окна CIR не найден в пределах {max_span!r} от B = {B_cir!r}")
        edges.append(optimize.brentq(excess, min(inner, outer), max(inner, outer), xtol=1e-16))
    return (edges[1] - edges[0]) / 2.0
