"""
Информация Фишера одной трубки и массива трубок, границы Крамера-Рао
для (B₀, Bₓ, B_y) и карты неопределённости по (B₀, Bₓ).

Поля в Гауссах, координаты трубок в мм, градиенты в Гс/мм.
"""
import itertools
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from physics.cir import TransmissionModel
from physics.radial import wrap_half_pi
from service.errors import DerivativeError, DomainError, EstimabilityError, NumericError, SingularFisherError
from service.logger import logger
from service.settings import ESTIMATION_SETTINGS, FLAGS, PARAMETER_NAMES
from service.workers import parallel_map

CLAMP_EPS = ESTIMATION_SETTINGS["clamp_eps"]

OK, SATURATED, SINGULAR, POLE = FLAGS

PhaseFunction = Callable[[float], float]


class DerivativeEstimate(NamedTuple):
    value: float
    error: float


@dataclass(frozen=True)
class TubeArray:
    positions: np.ndarray
    spacing_L: float
    counts: Tuple[int, int]

    def __post_init__(self):
        positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "positions", positions)
        if len(positions) < 1:
            raise DomainError("Массив должен содержать хотя бы одну трубку")
        if len(np.unique(positions, axis=0)) != len(positions):
            raise DomainError("Координаты трубок должны быть различными")

    @classmethod
    def grid(cls, Mx: int, My: int, L_nm: float) -> "TubeArray":
        """Прямоугольная решётка Mx×My с шагом L, центрированная в начале координат."""
        if Mx < 1 or My < 1:
            raise DomainError(f"Размеры решётки должны быть положительными: Mx={Mx}, My={My}")
        if not L_nm > 0:
            raise DomainError(f"Шаг решётки должен быть положительным, получено {L_nm!r}")
        L_mm = L_nm * 1e-6
        xs = (np.arange(Mx) - (Mx - 1) / 2.0) * L_mm
        ys = (np.arange(My) - (My - 1) / 2.0) * L_mm
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        return cls(np.column_stack([X.ravel(), Y.ravel()]), L_mm, (Mx, My))

    @property
    def size(self) -> int:
        return len(self.positions)

    @property
    def x(self) -> np.ndarray:
        return self.positions[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.positions[:, 1]

    def design(self) -> np.ndarray:
        """Строки (1, x_i, y_i)."""
        return np.column_stack([np.ones(self.size), self.x, self.y])

    def distinct_rows(self) -> int:
        return len(np.unique(self.y))


@dataclass(frozen=True)
class FieldModel:
    B0: float
    Bx: float = 0.0
    By: float = 0.0

    def local_fields(self, array: TubeArray) -> np.ndarray:
        fields = self.B0 + self.Bx * array.x + self.By * array.y
        if not np.all(np.isfinite(fields)):
            raise DomainError("Локальное поле не конечно хотя бы в одной трубке")
        return fields

    def as_vector(self) -> np.ndarray:
        return np.array([self.B0, self.Bx, self.By])

    @classmethod
    def from_vector(cls, values: Sequence[float]) -> "FieldModel":
        values = list(values) + [0.0] * (3 - len(values))
        return cls(float(values[0]), float(values[1]), float(values[2]))


@dataclass(frozen=True)
class FisherMatrix:
    entries: np.ndarray
    params: Tuple[str, ...] = PARAMETER_NAMES
    saturated: int = 0

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        if entries.shape != (len(self.params), len(self.params)):
            raise DomainError(f"Размер матрицы {entries.shape} не соответствует параметрам {self.params}")
        scale = max(float(np.max(np.abs(entries))), 1e-300)
        if not np.allclose(entries, entries.T, rtol=0.0, atol=1e-12 * scale):
            raise NumericError("Матрица Фишера несимметрична")
        object.__setattr__(self, "entries", (entries + entries.T) / 2.0)

    def __add__(self, other: "FisherMatrix") -> "FisherMatrix":
        if self.params != other.params:
            raise DomainError("Складывать можно только матрицы по одним и тем же параметрам")
        return FisherMatrix(self.entries + other.entries, self.params, self.saturated + other.saturated)

    def submatrix(self, params: Iterable[str]) -> "FisherMatrix":
        params = tuple(params)
        missing = set(params) - set(self.params)
        if missing:
            raise DomainError(f"Неизвестные параметры: {sorted(missing)}")
        index = [self.params.index(name) for name in params]
        return FisherMatrix(self.entries[np.ix_(index, index)], params, self.saturated)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def numerical_rank(self, rtol: float = 1e-12) -> int:
        values = self.eigenvalues()
        top = float(np.max(np.abs(values))) if values.size else 0.0
        return int(np.sum(values > rtol * top)) if top > 0 else 0

    def is_psd(self) -> bool:
        trace = float(np.trace(self.entries))
        return bool(np.min(self.eigenvalues()) >= -1e-12 * max(trace, 0.0))

    def condition_number(self) -> float:
        """Число обусловленности после масштабирования на диагональ."""
        scaled, _ = _diagonal_scaling(self.entries)
        if scaled is None:
            return math.inf
        values = np.linalg.eigvalsh(scaled)
        if values[0] <= 0:
            return math.inf
        return float(values[-1] / values[0])


@dataclass(frozen=True)
class CrlbResult:
    params: Tuple[str, ...]
    uncertainties: np.ndarray
    inverse: np.ndarray
    condition: float

    def __getitem__(self, name: str) -> float:
        return float(self.uncertainties[self.params.index(name)])


def richardson_derivative(
    fn: Callable[[float], float],
    B: float,
    h0: float,
    rtol: float = ESTIMATION_SETTINGS["derivative_rtol"],
    wrap: bool = False,
) -> DerivativeEstimate:
    """
    Центральная разность с шагами h0 и h0/2 и экстраполяцией Ричардсона.
    wrap=True приводит разности к (-π/2, π/2] для фаз, заданных по модулю π.
    """
    if not h0 > 0:
        raise DomainError(f"Шаг h0 должен быть положительным, получено {h0!r}")

    def central(h: float) -> float:
        diff = fn(B + h) - fn(B - h)
        if wrap:
            diff = wrap_half_pi(diff)
        return diff / (2.0 * h)

    coarse = central(h0)
    fine = central(h0 / 2.0)
    value = (4.0 * fine - coarse) / 3.0
    error = abs(fine - coarse)
    floor = 1e3 * np.finfo(float).eps / h0
    if not math.isfinite(value) or error > rtol * abs(value) + floor:
        raise DerivativeError(
            f"Разностная производная не сходится при B={B!r}: D(h)={coarse!r}, D(h/2)={fine!r}",
            bracket=(B - h0, B + h0),
        )
    return DerivativeEstimate(value, error)


def dT_dB(
    curve: Callable[[float], float],
    B: float,
    h0: float,
    rtol: float = ESTIMATION_SETTINGS["derivative_rtol"],
) -> DerivativeEstimate:
    return richardson_derivative(curve, B, h0, rtol)


class PhaseResponse:
    """Точный отклик трубки: T = cos² φ(B), производная фазы по Ричардсону в каждой точке."""

    def __init__(self, phase_fn: PhaseFunction, h0: float, rtol: float = ESTIMATION_SETTINGS["derivative_rtol"]):
        self.phase_fn = phase_fn
        self.h0 = h0
        self.rtol = rtol

    @classmethod
    def for_model(cls, model: TransmissionModel, h0: Optional[float] = None) -> "PhaseResponse":
        if h0 is None:
            h0 = ESTIMATION_SETTINGS["h0_factor"] * abs(model.resonance.Delta)
        return cls(model.phase, h0)

    def phase_slope(self, B: float) -> Tuple[float, float]:
        phase = self.phase_fn(B)
        slope = richardson_derivative(self.phase_fn, B, self.h0, self.rtol, wrap=True).value
        return phase, slope

    def evaluate(self, fields: Sequence[float]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        unique, inverse = np.unique(np.atleast_1d(np.asarray(fields, dtype=float)), return_inverse=True)
        pairs = np.array([self.phase_slope(float(B)) for B in unique]).reshape(-1, 2)
        return _response_from_phase(pairs[inverse.ravel(), 0], pairs[inverse.ravel(), 1])


class TabulatedResponse:
    """
    Отклик по запомненной развёрнутой фазе на равномерной сетке и кубическому сплайну.
    Сетка строится один раз и дальше используется только для чтения.
    """

    def __init__(self, fields: Sequence[float], phases: Sequence[float]):
        fields = np.asarray(fields, dtype=float)
        if fields.size < 4 or np.any(np.diff(fields) <= 0):
            raise DomainError("Для сплайна нужна строго возрастающая сетка из хотя бы 4 точек")
        unwrapped = np.unwrap(np.asarray(phases, dtype=float), period=math.pi)
        self.B_min = float(fields[0])
        self.B_max = float(fields[-1])
        self.spline = CubicSpline(fields, unwrapped)
        self.slope = self.spline.derivative()

    @classmethod
    def build(
        cls,
        phase_fn: PhaseFunction,
        B_min: float,
        B_max: float,
        step: float,
        threads: int = 1,
    ) -> "TabulatedResponse":
        if not B_max > B_min or not step > 0:
            raise DomainError(f"Некорректный диапазон таблицы: [{B_min!r}, {B_max!r}], шаг {step!r}")
        count = int(math.ceil((B_max - B_min) / step)) + 1
        fields = np.linspace(B_min, B_max, max(count, 4))
        logger.info(f"Таблица фазы: {len(fields)} точек на [{B_min:.6g}, {B_max:.6g}] Гс")
        phases = parallel_map(phase_fn, fields.tolist(), threads)
        return cls(fields, phases)

    @classmethod
    def for_model(
        cls,
        model: TransmissionModel,
        B_min: float,
        B_max: float,
        step: Optional[float] = None,
        threads: int = 1,
    ) -> "TabulatedResponse":
        delta = abs(model.resonance.Delta)
        if step is None:
            step = ESTIMATION_SETTINGS["memo_step_factor"] * delta
        padding = ESTIMATION_SETTINGS["memo_padding_factor"] * delta
        return cls.build(model.phase, B_min - padding, B_max + padding, step, threads)

    def evaluate(self, fields: Sequence[float]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        fields = np.atleast_1d(np.asarray(fields, dtype=float))
        if np.any(fields < self.B_min) or np.any(fields > self.B_max):
            raise DomainError(f"Поле вне диапазона таблицы [{self.B_min!r}, {self.B_max!r}]")
        return _response_from_phase(self.spline(fields), self.slope(fields))


def _response_from_phase(phase: np.ndarray, slope: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    T = np.cos(phase) ** 2
    R = np.sin(phase) ** 2
    dT = -np.sin(2.0 * phase) * slope
    return T, dT, R


def saturated(T, R=None):
    R = 1.0 - np.asarray(T) if R is None else np.asarray(R)
    return (np.asarray(T) <= CLAMP_EPS) | (R <= CLAMP_EPS)


def fisher_single(T, dTdB, R=None):
    """F = T'²/(T(1-T)) с ограничением T и 1-T снизу величиной ε."""
    T = np.asarray(T, dtype=float)
    R = 1.0 - T if R is None else np.asarray(R, dtype=float)
    value = np.asarray(dTdB, dtype=float) ** 2 / (np.maximum(T, CLAMP_EPS) * np.maximum(R, CLAMP_EPS))
    return float(value) if value.ndim == 0 else value


def fisher_two_outcome(T: float, dTdB: float) -> float:
    """Сумма по исходам ξ ∈ {прошёл, отражён}: Σ (∂p_ξ)²/p_ξ."""
    return dTdB ** 2 / T + (-dTdB) ** 2 / (1.0 - T)


def fisher_from_phase(dphase_dB):
    """F = 4 (dφ/dB)² для T = cos² φ."""
    value = 4.0 * np.asarray(dphase_dB, dtype=float) ** 2
    return float(value) if value.ndim == 0 else value


@dataclass(frozen=True)
class FisherPoint:
    B: float
    T: float
    dTdB: float
    F: float
    dB: float
    flag: str


def _fisher_point(response, B: float) -> FisherPoint:
    try:
        T, dT, R = (float(v[0]) for v in response.evaluate([B]))
    except DerivativeError as error:
        logger.warning(f"B={B!r}: {error}")
        return FisherPoint(B, math.nan, math.nan, math.nan, math.nan, POLE)
    F = fisher_single(T, dT, R)
    flag = SATURATED if bool(saturated(T, R)) else OK
    dB = 1.0 / math.sqrt(F) if F > 0 else math.inf
    return FisherPoint(B, T, dT, F, dB, flag)


def single_tube_uncertainty(response, B_grid: Sequence[float], threads: int = 1) -> List[FisherPoint]:
    """ΔB = F^{-1/2} без множителя 1/√N."""
    points = parallel_map(partial(_fisher_point, response), [float(B) for B in B_grid], threads)
    finite = [point.dB for point in points if math.isfinite(point.dB)]
    if finite:
        logger.info(f"Скан Фишера: {len(points)} точек, min ΔB = {min(finite):.4e} Гс")
    return points


def fim_tube(T: float, dT: float, x: float, y: float, R: Optional[float] = None) -> FisherMatrix:
    v = np.array([1.0, x, y])
    return FisherMatrix(fisher_single(T, dT, R) * np.outer(v, v), PARAMETER_NAMES, int(saturated(T, R)))


def fim_array(array: TubeArray, field_model: FieldModel, response) -> FisherMatrix:
    """Σ_i F_i (1, x_i, y_i)ᵀ(1, x_i, y_i) по всем трубкам."""
    T, dT, R = response.evaluate(field_model.local_fields(array))
    weights = fisher_single(T, dT, R)
    flagged = saturated(T, R)
    if np.all(flagged):
        raise SingularFisherError(f"Все {array.size} трубок в насыщении при {field_model}")
    design = array.design()
    entries = np.einsum("i,ij,ik->jk", np.atleast_1d(weights), design, design)
    return FisherMatrix(entries, PARAMETER_NAMES, int(np.sum(flagged)))


def fim_from_outcomes(T: Sequence[float], dT: Sequence[float], positions: Sequence[Sequence[float]]) -> FisherMatrix:
    """Прямая сумма по всем 2^M векторам исходов; для проверки разложения F = Σ F_i."""
    T = np.asarray(T, dtype=float)
    dT = np.asarray(dT, dtype=float)
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    M = len(T)
    if M > 16:
        raise DomainError(f"Перебор 2^M исходов допустим только при M ≤ 16, получено M={M}")
    design = np.column_stack([np.ones(M), positions])
    gradients = dT[:, None] * design

    outcomes = np.array(list(itertools.product((0, 1), repeat=M)), dtype=float)
    probability = np.prod(np.where(outcomes == 1, T, 1.0 - T), axis=1)
    score_terms = outcomes / T - (1.0 - outcomes) / (1.0 - T)
    scores = score_terms @ gradients
    entries = np.einsum("n,nj,nk->jk", probability, scores, scores)
    return FisherMatrix(entries, PARAMETER_NAMES)


def _diagonal_scaling(entries: np.ndarray):
    diagonal = np.diag(entries)
    if np.any(diagonal <= 0):
        return None, diagonal
    scale = 1.0 / np.sqrt(diagonal)
    return entries * np.outer(scale, scale), scale


def _adjugate_inverse(matrix: np.ndarray) -> np.ndarray:
    n = matrix.shape[0]
    if n == 1:
        return np.array([[1.0 / matrix[0, 0]]])
    if n == 2:
        (a, b), (c, d) = matrix
        return np.array([[d, -b], [-c, a]]) / (a * d - b * c)
    if n == 3:
        r0, r1, r2 = matrix
        adjugate = np.column_stack([np.cross(r1, r2), np.cross(r2, r0), np.cross(r0, r1)])
        return adjugate / float(np.dot(r0, np.cross(r1, r2)))
    raise DomainError(f"Обращение поддерживается для матриц 1×1..3×3, получено {n}×{n}")


def crlb(F: FisherMatrix, N: int = 1, params: Optional[Iterable[str]] = None) -> CrlbResult:
    """Δγ_i ≥ √([F⁻¹]_ii / N) для выбранных параметров."""
    if N < 1:
        raise DomainError(f"Число выстрелов N должно быть ≥ 1, получено {N}")
    sub = F.submatrix(params) if params is not None else F
    scaled, scale = _diagonal_scaling(sub.entries)
    if scaled is None:
        index = int(np.argmin(scale))
        null = np.zeros(len(sub.params))
        null[index] = 1.0
        raise EstimabilityError(f"Параметр {sub.params[index]} не несёт информации Фишера", null)

    values, vectors = np.linalg.eigh(scaled)
    condition = math.inf if values[0] <= 0 else float(values[-1] / values[0])
    if condition > ESTIMATION_SETTINGS["singular_cond"]:
        null = vectors[:, 0] * scale
        null /= np.linalg.norm(null)
        raise EstimabilityError(
            f"Матрица Фишера по {sub.params} вырождена (cond = {condition:.3e}), направление {np.round(null, 6)}",
            null,
        )
    inverse = _adjugate_inverse(scaled) * np.outer(scale, scale)
    return CrlbResult(sub.params, np.sqrt(np.diag(inverse) / N), inverse, condition)


@dataclass(frozen=True)
class MapPoint:
    B0: float
    Bx: float
    dB0: float
    dBx: float
    flag: str
    saturated_tubes: int = field(default=0)


def _map_point(array: TubeArray, response, point: Tuple[float, float]) -> MapPoint:
    B0, Bx = point
    try:
        fim = fim_array(array, FieldModel(B0, Bx, 0.0), response)
        bound = crlb(fim, 1, ("B0", "Bx"))
    except (EstimabilityError, SingularFisherError) as error:
        logger.debug(f"B0={B0!r}, Bx={Bx!r}: {error}")
        return MapPoint(B0, Bx, math.nan, math.nan, SINGULAR, array.size)
    except DerivativeError as error:
        logger.warning(f"B0={B0!r}, Bx={Bx!r}: {error}")
        return MapPoint(B0, Bx, math.nan, math.nan, POLE)
    flag = SATURATED if fim.saturated else OK
    return MapPoint(B0, Bx, bound["B0"], bound["Bx"], flag, fim.saturated)


def uncertainty_map(
    array: TubeArray,
    response,
    B0_grid: Sequence[float],
    Bx_grid: Sequence[float],
    threads: int = 1,
) -> List[MapPoint]:
    """Карта (ΔB₀, ΔBₓ) при B_y = 0 по блоку 2×2 матрицы Фишера; порядок: Bx внешний, B0 внутренний."""
    grid = [(float(B0), float(Bx)) for Bx in Bx_grid for B0 in B0_grid]
    points = parallel_map(partial(_map_point, array, response), grid, threads)
    singular = sum(1 for point in points if point.flag == SINGULAR)
    logger.info(f"Карта неопределённости: {len(points)} точек, вырожденных {singular}")
    return points


def map_field_range(array: TubeArray, B0_grid: Sequence[float], Bx_grid: Sequence[float]) -> Tuple[float, float]:
    """Диапазон локальных полей, который должна покрывать таблица отклика."""
    x_max = float(np.max(np.abs(array.x)))
    Bx_max = float(np.max(np.abs(Bx_grid)))
    return float(np.min(B0_grid)) - Bx_max * x_max, float(np.max(B0_grid)) + Bx_max * x_max
