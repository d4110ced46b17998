"""
Реализация команд CLI: каждая команда собирает модель из RunConfig,
выполняет расчёт и пишет артефакты через ArtifactWriter.
"""
import math
from functools import partial
from typing import Callable, Dict, List, Optional

import numpy as np

from app.config import RunConfig
from physics.cir import find_cir_field, transmission_vs_B
from physics.radial import (
    FeshbachResonance,
    ScatteringData,
    VdwModel,
    a_of_B,
    field_for_length,
    find_pole_brackets,
    refine_pole,
    solver_for,
)
from report.writer import ArtifactWriter
from sensing.estimation import (
    FieldModel,
    PhaseResponse,
    TabulatedResponse,
    crlb,
    fim_array,
    map_field_range,
    single_tube_uncertainty,
    uncertainty_map,
)
from sensing.mc import crlb_saturation_study, estimable_parameters
from service.errors import BracketingError, DomainError, PoleError
from service.logger import logger
from service.settings import ESTIMATION_SETTINGS, FLAGS
from service.workers import parallel_map

# Универсальные длины полюсов: p-волна при a = 2ā, d-волна при a = ā
UNIVERSAL_POLE_LENGTHS = {1: 2.0, 2: 1.0}

OK, POLE = FLAGS[0], FLAGS[3]


def _writer(config: RunConfig, command: str, out_dir: Optional[str]) -> ArtifactWriter:
    return ArtifactWriter(
        out_dir or config["output.dir"],
        command,
        config.to_lines(),
        config["output.format"],
        config["output.gnuplot"],
    )


def _flags(data: ScatteringData) -> str:
    return POLE if data.poles else OK


def _scattering_point(vdw: VdwModel, res: FeshbachResonance, k: float, mass_factor: float, B: float) -> Optional[ScatteringData]:
    try:
        return solver_for(vdw).scattering_quantities(res, B, k, mass_factor, (0, 1, 2))
    except (PoleError, BracketingError) as error:
        logger.warning(f"B={B!r}: точка пропущена ({error})")
        return None


def cmd_scattering_scan(config: RunConfig, out_dir: Optional[str] = None, threads: int = 1) -> List[str]:
    res = config.resonance()
    vdw = config.vdw()
    model = config.transmission_model()
    k = model.k
    grid = config.scan_grid().tolist()
    logger.info(f"scattering-scan: {len(grid)} точек, k = {k:.6g} ā⁻¹")

    results = parallel_map(partial(_scattering_point, vdw, res, k, model.mass_factor), grid, threads)
    rows = []
    for B, data in zip(grid, results):
        if data is None:
            rows.append((B, math.nan, math.nan, math.nan, POLE))
        else:
            rows.append((B, data.a_s, data.inv_V_p, data.inv_a_d, _flags(data)))

    points = [data for data in results if data is not None]
    pole_rows = []
    for ell, length in UNIVERSAL_POLE_LENGTHS.items():
        try:
            expected = field_for_length(res, length)
        except DomainError:
            expected = math.nan
        for lo, hi in find_pole_brackets(points, ell):
            try:
                B_pole = refine_pole(vdw, res, k, ell, lo, hi, model.mass_factor)
            except BracketingError as error:
                logger.debug(f"Интервал [{lo!r}, {hi!r}] канала ℓ={ell} отброшен: {error}")
                continue
            pole_rows.append((ell, B_pole, a_of_B(res, B_pole), expected, B_pole - expected))
            logger.info(f"Полюс ℓ={ell}: B = {B_pole:.10g}, a(B) = {a_of_B(res, B_pole):.6g} ā")

    writer = _writer(config, "scattering-scan", out_dir)
    writer.emit("scattering_scan", ("B_gauss", "a_s", "inv_V_p", "inv_a_d", "flags"), rows)
    writer.emit("scattering_poles", ("ell", "B_gauss", "a_of_B", "B_universal", "dB"), pole_rows)
    return writer.written


def cmd_transmission_scan(config: RunConfig, out_dir: Optional[str] = None, threads: int = 1) -> List[str]:
    model = config.transmission_model()
    curve = transmission_vs_B(
        model.trap, model.vdw, model.resonance, config.scan_grid(), model.mass_factor, model.d_wave, threads
    )
    rows = [(point.B, point.T, point.eta_plus, point.eta_minus, point.flags) for point in curve]
    writer = _writer(config, "transmission-scan", out_dir)
    writer.emit("transmission_scan", ("B_gauss", "T", "eta_plus", "eta_minus", "flags"), rows)
    return writer.written


def _fisher_grid(config: RunConfig) -> np.ndarray:
    center = config["scan.center"]
    if center == "none":
        return config.scan_grid()
    model = config.transmission_model()
    channel = center.split("-")[0]
    grid = config.scan_grid()
    B_cir = find_cir_field(model, channel, float(grid[0]), float(grid[-1]), max(len(grid), 2))
    half = config["scan.window"] / 2.0
    return B_cir + np.linspace(-half, half, config["scan.points"])


def fisher_step(config: RunConfig) -> float:
    """h0 из конфигурации; иначе доля ширины окна (или Δ для скана без центровки)."""
    if config["scan.h0"] is not None:
        return config["scan.h0"]
    scale = abs(config["resonance.Delta"]) if config["scan.center"] == "none" else config["scan.window"]
    return ESTIMATION_SETTINGS["h0_factor"] * scale


def cmd_fisher_scan(config: RunConfig, out_dir: Optional[str] = None, threads: int = 1) -> List[str]:
    model = config.transmission_model()
    grid = _fisher_grid(config)
    response = PhaseResponse.for_model(model, fisher_step(config))
    points = single_tube_uncertainty(response, grid, threads)
    rows = [(point.B, point.T, point.dTdB, point.F, point.dB, point.flag) for point in points]
    writer = _writer(config, "fisher-scan", out_dir)
    writer.emit("fisher_scan", ("B_gauss", "T", "dTdB", "F", "dB", "flags"), rows)
    return writer.written


def _array_response(config: RunConfig, B_min: float, B_max: float, threads: int):
    model = config.transmission_model()
    if config["map.exact"]:
        return PhaseResponse.for_model(model)
    return TabulatedResponse.for_model(model, B_min, B_max, threads=threads)


def cmd_gradiometer_map(config: RunConfig, out_dir: Optional[str] = None, threads: int = 1) -> List[str]:
    array = config.tube_array()
    B0_grid, Bx_grid = config.map_grids()
    B_min, B_max = map_field_range(array, B0_grid, Bx_grid)
    logger.info(
        f"gradiometer-map: {array.counts[0]}×{array.counts[1]} трубок, d = {config.trap_width_nm():.4g} нм, "
        f"{len(B0_grid)}×{len(Bx_grid)} точек"
    )
    response = _array_response(config, B_min, B_max, threads)
    points = uncertainty_map(array, response, B0_grid, Bx_grid, threads)
    rows = [(point.B0, point.Bx, point.dB0, point.dBx, point.flag) for point in points]
    writer = _writer(config, "gradiometer-map", out_dir)
    writer.emit("map", ("B0_gauss", "Bx_gauss_per_mm", "dB0", "dBx", "flags"), rows)
    return writer.written


def cmd_mc_study(config: RunConfig, out_dir: Optional[str] = None, threads: int = 1) -> List[str]:
    array = config.tube_array()
    model = config.transmission_model()
    truth = FieldModel(config["resonance.B_res"] + config["mc.B0"], config["mc.Bx"], config["mc.By"])
    params = None if config["mc.params"] == ("auto",) else tuple(config["mc.params"])

    # Границы поиска МП на самом малом N задают диапазон таблицы отклика
    exact_fim = fim_array(array, truth, PhaseResponse.for_model(model))
    if params is None:
        params = estimable_parameters(array, exact_fim)
    reference = crlb(exact_fim, 1, params)
    sigmas = dict(zip(reference.params, reference.uncertainties / math.sqrt(min(config["mc.N"]))))
    reach = config["mc.bound_sigmas"]
    B0_span = reach * sigmas.get("B0", 0.0)
    Bx_span = reach * sigmas.get("Bx", 0.0)
    By_span = reach * sigmas.get("By", 0.0)
    x_max = float(np.max(np.abs(array.x)))
    y_max = float(np.max(np.abs(array.y)))
    spread = (abs(truth.Bx) + Bx_span) * x_max + (abs(truth.By) + By_span) * y_max
    response = _array_response(config, truth.B0 - B0_span - spread, truth.B0 + B0_span + spread, threads)

    study = crlb_saturation_study(
        array,
        truth,
        response,
        config["mc.N"],
        config["mc.trials"],
        config["mc.seed"],
        params,
        config["mc.bound_sigmas"],
        config["mc.grid_points"],
        config["mc.bootstrap"],
        threads,
    )
    columns = ("N", "trial_count", "param", "empirical_var", "crlb", "ratio", "ci_lo", "ci_hi", "bias", "lr_median", "converged")
    rows = [
        (row.N, row.trial_count, row.param, row.empirical_var, row.crlb, row.ratio, row.ci_lo, row.ci_hi, row.bias, row.lr_median, row.converged)
        for row in study.rows
    ]
    writer = _writer(config, "mc-study", out_dir)
    writer.emit("mc_study", columns, rows)
    return writer.written


COMMANDS: Dict[str, Callable[..., List[str]]] = {
    "scattering-scan": cmd_scattering_scan,
    "transmission-scan": cmd_transmission_scan,
    "fisher-scan": cmd_fisher_scan,
    "gradiometer-map": cmd_gradiometer_map,
    "mc-study": cmd_mc_study,
}
