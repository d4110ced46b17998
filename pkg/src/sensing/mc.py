"""
Моделирование выстрелов по массиву трубок, оценка максимального правдоподобия
и проверка насыщения границы Крамера-Рао.

Случайные потоки: Philox-4x64 с ключом seed, сдвинутый jumped(i) для i-го испытания.
"""
import itertools
import math
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize, stats
from scipy.special import xlogy

from sensing.estimation import CLAMP_EPS, CrlbResult, FieldModel, TubeArray, crlb, fim_array
from service.errors import DomainError, EstimabilityError
from service.logger import logger
from service.settings import ESTIMATION_SETTINGS, MC_DEFAULTS, PARAMETER_NAMES
from service.workers import parallel_map


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed).jumped(stream))


@dataclass(frozen=True)
class ShotRecord:
    counts: np.ndarray
    N: int
    rng_seed: int
    stream: int = 0

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "counts", counts)
        if self.N < 0 or np.any(counts < 0) or np.any(counts > self.N):
            raise DomainError(f"Счёт прошедших атомов вне диапазона 0..{self.N}")


@dataclass(frozen=True)
class EstimateResult:
    gamma_hat: FieldModel
    loglik: float
    params: Tuple[str, ...]
    converged: bool
    simplex_diameter: float
    empirical_cov: Optional[np.ndarray] = None
    crlb_ref: Optional[CrlbResult] = None


def simulate_shots(array: TubeArray, field_model: FieldModel, response, N: int, seed: int, stream: int = 0) -> ShotRecord:
    """n_i ~ Binomial(N, T(B(r_i)))."""
    if N < 1:
        raise DomainError(f"Число выстрелов N должно быть ≥ 1, получено {N}")
    T, _, _ = response.evaluate(field_model.local_fields(array))
    counts = make_rng(seed, stream).binomial(N, np.clip(T, 0.0, 1.0))
    return ShotRecord(counts, N, seed, stream)


def log_likelihood(record: ShotRecord, array: TubeArray, gamma: FieldModel, response) -> float:
    """Σ n_i ln T_i + (N - n_i) ln(1 - T_i), T_i и 1 - T_i ограничены снизу ε."""
    if record.N == 0:
        return 0.0
    T, _, R = response.evaluate(gamma.local_fields(array))
    transmitted = xlogy(record.counts, np.maximum(T, CLAMP_EPS))
    reflected = xlogy(record.N - record.counts, np.maximum(R, CLAMP_EPS))
    return math.fsum(transmitted) + math.fsum(reflected)


def _field_from(values: Sequence[float], params: Tuple[str, ...], fixed: FieldModel) -> FieldModel:
    vector = fixed.as_vector()
    for name, value in zip(params, values):
        vector[PARAMETER_NAMES.index(name)] = value
    return FieldModel.from_vector(vector)


def _simplex_diameter(simplex: np.ndarray) -> float:
    return max((float(np.linalg.norm(a - b)) for a, b in itertools.combinations(simplex, 2)), default=0.0)


def mle(
    record: ShotRecord,
    array: TubeArray,
    response,
    init: FieldModel,
    bounds: Sequence[Tuple[float, float]],
    params: Tuple[str, ...] = ("B0", "Bx"),
    grid_points: int = MC_DEFAULTS["grid_points"],
) -> EstimateResult:
    """
    Грубый перебор grid_points^n узлов в границах, затем Нелдер-Мид
    в нормированных координатах куба [0, 1]^n.
    """
    if len(bounds) != len(params):
        raise DomainError(f"Число границ {len(bounds)} не совпадает с числом параметров {len(params)}")
    lower = np.array([lo for lo, _ in bounds], dtype=float)
    span = np.array([hi - lo for lo, hi in bounds], dtype=float)
    if np.any(span <= 0):
        raise DomainError(f"Пустые границы поиска: {bounds}")

    def negative(unit: np.ndarray) -> float:
        gamma = _field_from(lower + np.asarray(unit) * span, params, init)
        try:
            return -log_likelihood(record, array, gamma, response)
        except DomainError:
            return math.inf

    axis = np.linspace(0.0, 1.0, grid_points)
    best_unit, best_value = None, math.inf
    for node in itertools.product(axis, repeat=len(params)):
        value = negative(np.array(node))
        if value < best_value:
            best_unit, best_value = np.array(node), value
    if best_unit is None:
        best_unit = np.full(len(params), 0.5)

    tol = ESTIMATION_SETTINGS["simplex_tol"]
    result = optimize.minimize(
        negative,
        best_unit,
        method="Nelder-Mead",
        bounds=[(0.0, 1.0)] * len(params),
        options={"xatol": tol / 4, "fatol": 1e-10, "maxiter": ESTIMATION_SETTINGS["max_nm_iterations"]},
    )
    unit = result.x if result.fun <= best_value else best_unit
    diameter = _simplex_diameter(result.final_simplex[0])
    converged = bool(result.success) and diameter < tol and math.isfinite(result.fun)
    if not converged:
        logger.debug(f"Нелдер-Мид не сошёлся: {result.message}, диаметр симплекса {diameter:.3e}")

    gamma_hat = _field_from(lower + unit * span, params, init)
    return EstimateResult(gamma_hat, -min(result.fun, best_value), params, converged, diameter)


def estimable_parameters(array: TubeArray, fim) -> Tuple[str, ...]:
    """B₀ всегда; Bₓ и B_y только при ≥ 2 различных столбцах/строках и невырожденной подматрице."""
    candidates = ["B0"]
    if len(np.unique(array.x)) >= 2:
        candidates.append("Bx")
    if array.distinct_rows() >= 2:
        candidates.append("By")
    while candidates:
        try:
            crlb(fim, 1, candidates)
            return tuple(candidates)
        except EstimabilityError as error:
            dropped = candidates.pop()
            logger.info(f"Параметр {dropped} исключён из оценки: {error}")
    raise EstimabilityError("Ни один параметр поля не оценивается по данному массиву")


def _covariance(samples: np.ndarray) -> np.ndarray:
    count, dim = samples.shape
    means = [math.fsum(samples[:, j]) / count for j in range(dim)]
    cov = np.zeros((dim, dim))
    for a in range(dim):
        for b in range(a, dim):
            value = math.fsum((samples[:, a] - means[a]) * (samples[:, b] - means[b])) / (count - 1)
            cov[a, b] = cov[b, a] = value
    return cov


@dataclass(frozen=True)
class StudyRow:
    N: int
    trial_count: int
    param: str
    empirical_var: float
    crlb: float
    ratio: float
    ci_lo: float
    ci_hi: float
    bias: float
    lr_median: float
    converged: int


@dataclass
class SaturationStudy:
    params: Tuple[str, ...]
    rows: List[StudyRow] = field(default_factory=list)
    covariances: Dict[int, np.ndarray] = field(default_factory=dict)
    estimates: Dict[int, List[EstimateResult]] = field(default_factory=dict)


def _run_trial(
    array: TubeArray,
    truth: FieldModel,
    response,
    params: Tuple[str, ...],
    bounds: Sequence[Tuple[float, float]],
    N: int,
    seed: int,
    grid_points: int,
    stream: int,
) -> Tuple[EstimateResult, float]:
    record = simulate_shots(array, truth, response, N, seed, stream)
    estimate = mle(record, array, response, truth, bounds, params, grid_points)
    ratio = estimate.loglik - log_likelihood(record, array, truth, response)
    return estimate, ratio


def _bootstrap_ratio(values: np.ndarray, bound: float, seed: int, stream: int, resamples: int) -> Tuple[float, float]:
    if len(values) < 2 or resamples < 1:
        return math.nan, math.nan

    def statistic(sample, axis=-1):
        return np.var(sample, ddof=1, axis=axis) / bound

    result = stats.bootstrap(
        (values,),
        statistic,
        n_resamples=resamples,
        method="percentile",
        random_state=make_rng(seed, stream),
    )
    return float(result.confidence_interval.low), float(result.confidence_interval.high)


def crlb_saturation_study(
    array: TubeArray,
    truth: FieldModel,
    response,
    N_list: Sequence[int] = MC_DEFAULTS["N"],
    trials: int = MC_DEFAULTS["trials"],
    seed: int = MC_DEFAULTS["seed"],
    params: Optional[Tuple[str, ...]] = None,
    bound_sigmas: float = MC_DEFAULTS["bound_sigmas"],
    grid_points: int = MC_DEFAULTS["grid_points"],
    bootstrap: int = MC_DEFAULTS["bootstrap"],
    threads: int = 1,
) -> SaturationStudy:
    """Эмпирическая дисперсия МП-оценок против [F⁻¹]_ii/N для каждого N."""
    if trials < 2:
        raise DomainError(f"Для дисперсии нужно хотя бы 2 испытания, получено {trials}")
    fim = fim_array(array, truth, response)
    if params is None:
        params = estimable_parameters(array, fim)
    per_shot = crlb(fim, 1, params)
    truth_vector = np.array([truth.as_vector()[PARAMETER_NAMES.index(name)] for name in params])
    study = SaturationStudy(params)

    for n_index, N in enumerate(N_list):
        sigmas = per_shot.uncertainties / math.sqrt(N)
        bounds = [(t - bound_sigmas * s, t + bound_sigmas * s) for t, s in zip(truth_vector, sigmas)]
        run = partial(_run_trial, array, truth, response, params, bounds, N, seed, grid_points)
        streams = [n_index * trials + t for t in range(trials)]
        outcomes = parallel_map(run, streams, threads)

        estimates = [estimate for estimate, _ in outcomes]
        samples = np.array([[estimate.gamma_hat.as_vector()[PARAMETER_NAMES.index(name)] for name in params] for estimate in estimates])
        cov = _covariance(samples)
        lr_median = float(np.median([ratio for _, ratio in outcomes]))
        converged = sum(1 for estimate in estimates if estimate.converged)
        reference = crlb(fim, N, params)
        study.covariances[N] = cov
        study.estimates[N] = [replace(estimate, empirical_cov=cov, crlb_ref=reference) for estimate in estimates]

        for j, name in enumerate(params):
            bound = float(per_shot.inverse[j, j] / N)
            ci_lo, ci_hi = _bootstrap_ratio(
                samples[:, j], bound, seed, len(N_list) * trials + n_index * len(params) + j, bootstrap
            )
            bias = math.fsum(samples[:, j] - truth_vector[j]) / trials
            study.rows.append(
                StudyRow(N, trials, name, float(cov[j, j]), bound, float(cov[j, j]) / bound, ci_lo, ci_hi, bias, lr_median, converged)
            )
        logger.info(
            f"N={N}: отношение Var/CRLB = "
            + ", ".join(f"{row.param}: {row.ratio:.3f}" for row in study.rows[-len(params):])
            + f", сошлось {converged}/{trials}"
        )
    return study
