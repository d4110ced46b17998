"""
Трёхмерное радиальное рассеяние на потенциале -C6/r^6 с жёсткой стенкой r_core.

Внутренние единицы: ħ = m_eff = ā = 1. Положение стенки задаёт короткодействующую
фазу и тем самым длину рассеяния; магнитное поле сдвигает стенку так, чтобы
нулевая энергия давала a(B) из формулы резонанса Фешбаха.
"""
import bisect
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import constants, optimize, special

from physics.specfun import gamma_fn, riccati_bessel
from service.errors import BracketingError, DomainError, PoleError, ResolutionError
from service.logger import logger
from service.settings import VDW_SETTINGS

CHANNELS = ("s", "p", "d")

_RESCALE_LIMIT = 1.0e150


@dataclass(frozen=True)
class FeshbachResonance:
    B_res: float
    Delta: float
    a_bg: float

    def __post_init__(self):
        if self.Delta == 0:
            raise DomainError("Ширина резонанса Δ не может быть нулевой")
        if self.a_bg == 0:
            raise DomainError("Фоновая длина рассеяния a_bg не может быть нулевой")


@dataclass(frozen=True)
class VdwModel:
    r_core: Optional[float] = None
    abar: float = 1.0
    core_branch: int = VDW_SETTINGS["core_branch"]
    steps_per_wavelength: int = VDW_SETTINGS["steps_per_wavelength"]
    r_max_floor: float = VDW_SETTINGS["r_max_floor"]
    r_max_factor: float = VDW_SETTINGS["r_max_k_factor"]
    c6_scale: float = VDW_SETTINGS["c6_scale"]
    a_cap: float = VDW_SETTINGS["a_cap"]

    def __post_init__(self):
        if self.r_core is not None and not self.r_core > 0:
            raise DomainError(f"r_core должен быть положительным, получено {self.r_core!r}")
        if self.abar <= 0 or self.c6_scale < 0:
            raise DomainError("ā > 0 и c6_scale >= 0 обязательны")
        if self.core_branch < 0:
            raise DomainError("Номер ветви core_branch должен быть неотрицательным")

    def with_core(self, r_core: float) -> "VdwModel":
        return replace(self, r_core=r_core)

    def r_max(self, k: float) -> float:
        if k <= 0:
            return self.r_max_floor
        return max(self.r_max_floor, self.r_max_factor / k)


@dataclass(frozen=True)
class ScatteringData:
    B: float
    k: float
    a_s: float
    V_p: float
    a_d: float
    mass_factor: float
    inv_a_s: float
    inv_V_p: float
    inv_a_d: float
    deltas: Tuple[Optional[float], Optional[float], Optional[float]]
    r_core: float
    poles: FrozenSet[str] = field(default_factory=frozenset)


def vdw_length(C6: float, mu: float, hbar: float = 1.0) -> float:
    """ā = 2π (2μC6/ħ²)^{1/4} / Γ(1/4)²."""
    if not C6 > 0 or not mu > 0:
        raise DomainError(f"C6 и μ должны быть положительными: C6={C6!r}, mu={mu!r}")
    return 2 * math.pi * (2 * mu * C6 / hbar ** 2) ** 0.25 / gamma_fn(0.25) ** 2


def abar_nm(c6_au: float, reduced_mass_amu: float) -> float:
    """ā в нм по C6 в атомных единицах и приведённой массе в а.е.м."""
    mu_au = reduced_mass_amu * constants.physical_constants["atomic mass constant"][0] / constants.m_e
    bohr_nm = constants.physical_constants["Bohr radius"][0] * 1e9
    return vdw_length(c6_au, mu_au) * bohr_nm


def beta6(model: VdwModel) -> float:
    """β6 = (2μC6/ħ²)^{1/4} в единицах модели."""
    return gamma_fn(0.25) ** 2 * model.abar * model.c6_scale ** 0.25 / (2 * math.pi)


def a_of_B(res: FeshbachResonance, B: float) -> float:
    if B == res.B_res:
        raise PoleError(f"Поле B={B!r} совпадает с положением резонанса")
    return res.a_bg * (1 - res.Delta / (B - res.B_res))


def inverse_scattering_length(res: FeshbachResonance, B: float) -> float:
    """1/a(B); конечна в B_res, бесконечна там, где a(B) = 0."""
    shift = B - res.B_res
    denom = res.a_bg * (shift - res.Delta)
    if denom == 0:
        return math.inf
    return shift / denom


def field_for_length(res: FeshbachResonance, a: float) -> float:
    """Поле, при котором a(B) = a."""
    if a == res.a_bg:
        raise DomainError("a = a_bg достигается только при |B| → ∞")
    return res.B_res + res.Delta / (1 - a / res.a_bg)


@lru_cache(maxsize=256)
def _bessel_quarter_zero(n: int) -> float:
    guess = (n + 7 / 8) * math.pi
    return optimize.brentq(lambda x: special.jv(0.25, x), guess - 0.4, guess + 0.4, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def _branch_x(model: VdwModel) -> Tuple[float, float]:
    return _bessel_quarter_zero(model.core_branch), _bessel_quarter_zero(model.core_branch + 1)


def _x_of_r(model: VdwModel, r: float) -> float:
    return beta6(model) ** 2 / (2 * r * r)


def _r_of_x(model: VdwModel, x: float) -> float:
    return beta6(model) / math.sqrt(2 * x)


def core_branch(model: VdwModel) -> Tuple[float, float]:
    """(r_inner, r_outer) интервала узлов, на котором a пробегает от -∞ до +∞."""
    x_lo, x_hi = _branch_x(model)
    return _r_of_x(model, x_hi), _r_of_x(model, x_lo)


def zero_energy_length(model: VdwModel, r_core: Optional[float] = None) -> float:
    """Длина рассеяния при нулевой энергии: a = K J_{-1/4}(x)/J_{1/4}(x), K = β6 Γ(3/4)/(2Γ(5/4))."""
    r_core = model.r_core if r_core is None else r_core
    if r_core is None:
        raise DomainError("Модель не настроена: r_core не задан")
    if model.c6_scale == 0:
        return r_core
    beta = beta6(model)
    x = _x_of_r(model, r_core)
    jp = special.jv(0.25, x)
    if jp == 0:
        return math.inf
    scale = beta * gamma_fn(0.75) / (2 * gamma_fn(1.25))
    return float(scale * special.jv(-0.25, x) / jp)


def tune_core_inverse(model: VdwModel, inv_a: float) -> float:
    """r_core на выбранной ветви по обратной длине рассеяния (допускает 1/a = 0)."""
    if model.c6_scale == 0:
        if inv_a > 0 and math.isfinite(inv_a):
            return 1.0 / inv_a
        raise BracketingError("Без ван-дер-ваальсова хвоста достижимы только a > 0")

    x_lo, x_hi = _branch_x(model)
    # края ветви - нули J_{1/4}: там a = ±∞
    if inv_a == 0:
        return _r_of_x(model, x_lo)

    beta = beta6(model)
    scale = beta * gamma_fn(0.75) / (2 * gamma_fn(1.25))
    alpha = math.atan2(1.0, inv_a)
    cos_a, sin_a = math.cos(alpha), math.sin(alpha)
    # на краях J_{1/4} = 0 точно, иначе остаток нуля спорит со знаком при малых 1/a
    edges = {x: cos_a * scale * float(special.jv(-0.25, x)) for x in (x_lo, x_hi)}

    def mismatch(x: float) -> float:
        if x in edges:
            return edges[x]
        return cos_a * scale * special.jv(-0.25, x) - sin_a * special.jv(0.25, x)

    f_lo, f_hi = edges[x_lo], edges[x_hi]
    if f_lo * f_hi > 0:
        raise BracketingError(f"Ветвь {model.core_branch} не содержит 1/a={inv_a!r}")
    x = optimize.brentq(mismatch, x_lo, x_hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
    return _r_of_x(model, x)


def tune_core(model: VdwModel, a_target: float) -> float:
    if math.isfinite(a_target) and abs(a_target) >= model.a_cap:
        raise BracketingError(f"|a|={abs(a_target)!r} вне допустимого диапазона (a_cap={model.a_cap!r})")
    inv = 0.0 if math.isinf(a_target) else (math.inf if a_target == 0 else 1.0 / a_target)
    return tune_core_inverse(model, inv)


def wrap_half_pi(angle: float) -> float:
    """Приведение по модулю π к (-π/2, π/2]."""
    return math.pi / 2 - math.fmod(math.fmod(math.pi / 2 - angle, math.pi) + math.pi, math.pi)


@dataclass
class _Grid:
    offsets: List[float]
    back: List[int]
    match_index: int


class RadialSolver:
    """
    Контекст решателя: хранит только сетки смещений от стенки (по ключу ℓ, k),
    поэтому его можно разделять между потоками или копировать в процессы.
    """

    def __init__(self, model: VdwModel):
        self.model = replace(model, r_core=None)
        self._beta4 = beta6(model) ** 4
        self._grids: Dict[Tuple[int, float, float, float], _Grid] = {}
        self._reference = core_branch(model)[0] if model.c6_scale > 0 else None

    def reference_radius(self, r_core: float) -> float:
        if self._reference is None:
            return r_core
        return min(self._reference, r_core)

    def _local_step(self, ell: int, k: float, r: float) -> float:
        k_local = math.sqrt(k * k + self._beta4 / r ** 6 + (ell * (ell + 1) + 1) / (r * r))
        return 2 * math.pi / (k_local * self.model.steps_per_wavelength)

    def _build_grid(self, ell: int, k: float, r_ref: float, r_max: float) -> _Grid:
        span = r_max - r_ref
        if span <= 0:
            raise DomainError(f"r_core={r_ref!r} не меньше r_max={r_max!r}")

        offsets = [0.0]
        back = [0]
        h = self._local_step(ell, k, r_ref)
        since = 0
        limit = VDW_SETTINGS["max_grid_points"]
        while offsets[-1] < span:
            pos = offsets[-1]
            if since >= 2 and self._local_step(ell, k, r_ref + pos) >= 2 * h:
                h *= 2
                back.append(len(offsets) - 3)
                since = 0
            else:
                back.append(len(offsets) - 2)
            offsets.append(pos + h)
            since += 1
            if len(offsets) > limit:
                raise ResolutionError(f"Сетка превышает {limit} точек (ℓ={ell}, k={k!r})")

        if k > 0:
            target = offsets[-1] - math.pi / (2 * k)
        else:
            target = offsets[-2]
        match_index = min(max(bisect.bisect_left(offsets, target), 1), len(offsets) - 2)
        logger.debug(f"Сетка Нумерова: ℓ={ell}, k={k:.6g}, точек={len(offsets)}, r_ref={r_ref:.6g}")
        return _Grid(offsets, back, match_index)

    def grid(self, ell: int, k: float, r_core: float, r_max: Optional[float] = None) -> _Grid:
        if self.model.steps_per_wavelength < VDW_SETTINGS["min_steps_per_wavelength"]:
            raise ResolutionError(
                f"steps_per_wavelength={self.model.steps_per_wavelength} меньше "
                f"{VDW_SETTINGS['min_steps_per_wavelength']}"
            )
        r_ref = self.reference_radius(r_core)
        r_max = self.model.r_max(k) if r_max is None else r_max
        key = (ell, k, r_ref, r_max)
        if key not in self._grids:
            self._grids[key] = self._build_grid(ell, k, r_ref, r_max)
        return self._grids[key]

    def integrate(
        self, ell: int, k: float, r_core: float, r_max: Optional[float] = None
    ) -> Tuple[np.ndarray, List[float], _Grid]:
        """Численное решение u(r) с u(r_core) = 0."""
        grid = self.grid(ell, k, r_core, r_max)
        offsets = np.asarray(grid.offsets)
        r = r_core + offsets
        f = (ell * (ell + 1) / r ** 2 - self._beta4 / r ** 6 - k * k).tolist()
        off = grid.offsets
        back = grid.back

        n_points = len(off)
        u = [0.0] * n_points
        u[1] = 1e-8
        for i in range(2, n_points):
            b = back[i]
            c = i - 1
            h2 = (off[i] - off[c]) ** 2 / 12.0
            u[i] = (2.0 * u[c] * (1.0 + 5.0 * h2 * f[c]) - u[b] * (1.0 - h2 * f[b])) / (1.0 - h2 * f[i])
            if abs(u[i]) > _RESCALE_LIMIT:
                u = [value / _RESCALE_LIMIT for value in u]
        return r, u, grid

    def phase_shift(self, ell: int, k: float, r_core: float) -> float:
        """δ_ℓ(k) mod π в (-π/2, π/2]."""
        if not k > 0:
            raise DomainError(f"Волновое число должно быть положительным, получено k={k!r}")
        r, u, grid = self.integrate(ell, k, r_core)
        j = grid.match_index
        n = len(u) - 1
        rb1 = riccati_bessel(ell, k * r[j])
        rb2 = riccati_bessel(ell, k * r[n])
        num = u[n] * rb1.j - u[j] * rb2.j
        den = u[n] * rb1.n - u[j] * rb2.n
        return wrap_half_pi(math.atan2(num, den))

    def zero_energy_length(self, r_core: float) -> float:
        """Длина рассеяния из решения при E = 0 (численный оракул)."""
        r_max = max(self.model.r_max_floor, VDW_SETTINGS["zero_energy_r_max"])
        r, u, _ = self.integrate(0, 0.0, r_core, r_max)
        du = u[-1] - u[-2]
        if du == 0:
            return math.inf
        return float(r[-1] - u[-1] * (r[-1] - r[-2]) / du)

    def scattering_quantities(
        self,
        res: FeshbachResonance,
        B: float,
        k: float,
        mass_factor: float = 1.0,
        waves: Iterable[int] = (0, 1, 2),
    ) -> ScatteringData:
        inv_a = inverse_scattering_length(res, B)
        r_core = tune_core_inverse(self.model, inv_a)
        if inv_a != 0 and abs(1.0 / inv_a) >= self.model.a_cap:
            logger.debug(f"B={B!r}: |a(B)| выше a_cap, точка вблизи полюса резонанса")

        waves = set(waves)
        deltas: List[Optional[float]] = [None, None, None]
        values = [math.nan, math.nan, math.nan]
        inverses = [math.nan, math.nan, math.nan]
        poles = set()
        scales = (-mass_factor / k, -mass_factor / k ** 3, mass_factor / k)
        threshold = VDW_SETTINGS["pole_cos_threshold"]

        for ell in sorted(waves):
            delta = self.phase_shift(ell, k, r_core)
            deltas[ell] = delta
            sin_d, cos_d = math.sin(delta), math.cos(delta)
            scale = scales[ell]
            if abs(cos_d) < threshold:
                values[ell] = math.copysign(math.inf, scale * sin_d)
                poles.add(CHANNELS[ell])
            else:
                values[ell] = scale * sin_d / cos_d
            inverses[ell] = math.copysign(math.inf, cos_d / scale) if sin_d == 0 else cos_d / (sin_d * scale)

        return ScatteringData(
            B=B,
            k=k,
            a_s=values[0],
            V_p=values[1],
            a_d=values[2],
            mass_factor=mass_factor,
            inv_a_s=inverses[0],
            inv_V_p=inverses[1],
            inv_a_d=inverses[2],
            deltas=tuple(deltas),
            r_core=r_core,
            poles=frozenset(poles),
        )


@lru_cache(maxsize=32)
def _solver_for(model: VdwModel) -> RadialSolver:
    return RadialSolver(model)


def solver_for(model: VdwModel) -> RadialSolver:
    return _solver_for(replace(model, r_core=None))


def solve_phase_shift(model: VdwModel, ell: int, k: float) -> float:
    if model.r_core is None:
        raise DomainError("Модель не настроена: r_core не задан")
    return solver_for(model).phase_shift(ell, k, model.r_core)


def zero_energy_length_numerov(model: VdwModel, r_core: Optional[float] = None) -> float:
    r_core = model.r_core if r_core is None else r_core
    if r_core is None:
        raise DomainError("Модель не настроена: r_core не задан")
    return solver_for(model).zero_energy_length(r_core)


def scattering_quantities(
    model: VdwModel,
    res: FeshbachResonance,
    B: float,
    k: float,
    mass_factor: float = 1.0,
    waves: Iterable[int] = (0, 1, 2),
) -> ScatteringData:
    if not k > 0:
        raise DomainError(f"Волновое число должно быть положительным, получено k={k!r}")
    return solver_for(model).scattering_quantities(res, B, k, mass_factor, tuple(waves))


def _inverse(data: ScatteringData, ell: int) -> float:
    return (data.inv_a_s, data.inv_V_p, data.inv_a_d)[ell]


def find_pole_brackets(points: Sequence[ScatteringData], ell: int) -> List[Tuple[float, float]]:
    """
    Интервалы по B, где обратная величина канала ℓ (1/a_s, 1/V_p, 1/a_d) меняет знак.

    Сама δ_ℓ у порога проходит π/2 в узком окне и может проскочить между узлами,
    а обратная величина гладкая. Смена знака через бесконечность отсеивается в refine_pole.
    """
    brackets = []
    for left, right in zip(points, points[1:]):
        lo, hi = _inverse(left, ell), _inverse(right, ell)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            continue
        if lo == 0:
            brackets.append((left.B, left.B))
        elif lo * hi < 0:
            brackets.append((left.B, right.B))
    return brackets


def refine_pole(
    model: VdwModel,
    res: FeshbachResonance,
    k: float,
    ell: int,
    B_lo: float,
    B_hi: float,
    mass_factor: float = 1.0,
) -> float:
    """Положение полюса канала ℓ: корень обратной величины методом Брента."""
    solver = solver_for(model)

    def inverse(B: float) -> float:
        return _inverse(solver.scattering_quantities(res, B, k, mass_factor, (ell,)), ell)

    if B_lo == B_hi:
        return B_lo
    f_lo, f_hi = inverse(B_lo), inverse(B_hi)
    try:
        root = optimize.brentq(inverse, B_lo, B_hi, xtol=1e-14 * max(1.0, abs(B_lo)), maxiter=200)
    except ValueError as error:
        raise BracketingError(f"Полюс канала ℓ={ell} не локализован в [{B_lo!r}, {B_hi!r}]: {error}")

    residual = inverse(root)
    if not math.isfinite(residual) or abs(residual) > 1e-3 * max(abs(f_lo), abs(f_hi)):
        raise BracketingError(f"В [{B_lo!r}, {B_hi!r}] канал ℓ={ell} меняет знак через бесконечность, а не через ноль")
    return root


def find_pole_fields(
    model: VdwModel,
    res: FeshbachResonance,
    k: float,
    B_grid: Sequence[float],
    ells: Iterable[int] = (1, 2),
    mass_factor: float = 1.0,
) -> Dict[int, List[float]]:
    solver = solver_for(model)
    waves = tuple(sorted(set(ells)))
    points = [solver.scattering_quantities(res, B, k, mass_factor, waves) for B in B_grid]
    found = {}
    for ell in waves:
        found[ell] = []
        for lo, hi in find_pole_brackets(points, ell):
            try:
                found[ell].append(refine_pole(model, res, k, ell, lo, hi, mass_factor))
            except BracketingError as error:
                logger.debug(f"Интервал [{lo!r}, {hi!r}] отброшен: {error}")
        logger.info(f"Канал ℓ={ell}: найдено полюсов {len(found[ell])}")
    return found
