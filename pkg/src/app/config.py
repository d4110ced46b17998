"""
Конфигурация запуска: плоский файл строк `section.key = value`.

Файл читается через python-dotenv (без подстановки переменных), значения
приводятся к типам по значениям по умолчанию из service.settings.
"""
import io
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np
from dotenv import dotenv_values

from physics.cir import FixedDWaveCoefficients, TransmissionModel, TrapConfig
from physics.radial import FeshbachResonance, VdwModel
from sensing.estimation import TubeArray
from service.errors import ConfigError, DomainError, NumericError
from service.settings import (
    ARRAY_DEFAULTS,
    MAP_DEFAULTS,
    MC_DEFAULTS,
    OUTPUT_DEFAULTS,
    RESONANCE_DEFAULTS,
    SCAN_DEFAULTS,
    TRAP_DEFAULTS,
    VDW_CONFIG_KEYS,
    VDW_SETTINGS,
)

SECTIONS = {
    "resonance": RESONANCE_DEFAULTS,
    "trap": TRAP_DEFAULTS,
    "vdw": {key: VDW_SETTINGS[key] for key in VDW_CONFIG_KEYS},
    "array": ARRAY_DEFAULTS,
    "scan": SCAN_DEFAULTS,
    "map": MAP_DEFAULTS,
    "mc": MC_DEFAULTS,
    "output": OUTPUT_DEFAULTS,
}

DEFAULTS: Dict[str, Any] = {
    f"{section}.{key}": value for section, values in SECTIONS.items() for key, value in values.items()
}

# Ключи без значения по умолчанию принимают числа или none
OPTIONAL_FLOAT_KEYS = {key for key, value in DEFAULTS.items() if value is None}

SCAN_CENTERS = ("none", "s-cir", "p-cir")
OUTPUT_FORMATS = ("csv", "json")


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"ожидалось логическое значение, получено {text!r}")


def _parse_value(key: str, text: str) -> Any:
    default = DEFAULTS[key]
    text = text.strip()
    if key in OPTIONAL_FLOAT_KEYS:
        return None if text.lower() in ("", "none") else float(text)
    if isinstance(default, bool):
        return _parse_bool(text)
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, tuple):
        items = [item.strip() for item in text.split(",") if item.strip()]
        if default and isinstance(default[0], int):
            return tuple(int(item) for item in items)
        return tuple(items)
    return text


def format_value(value: Any) -> str:
    """Текстовое представление, которое _parse_value читает обратно без потерь."""
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(str(item) for item in value)
    return str(value)


def _line_numbers(text: str) -> Dict[str, int]:
    lines = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#") or "=" not in stripped:
            continue
        key = stripped.split("=", 1)[0].strip()
        if key.startswith("export "):
            key = key[len("export "):].strip()
        lines.setdefault(key, number)
    return lines


@dataclass
class RunConfig:
    values: Dict[str, Any] = field(default_factory=lambda: dict(DEFAULTS))
    source: Optional[str] = None

    @classmethod
    def from_text(cls, text: str, source: Optional[str] = None) -> "RunConfig":
        raw = dotenv_values(stream=io.StringIO(text), interpolate=False)
        lines = _line_numbers(text)
        values = dict(DEFAULTS)
        for key, value in raw.items():
            line = lines.get(key)
            if key not in DEFAULTS:
                raise ConfigError("неизвестный ключ", key=key, line=line)
            if value is None:
                raise ConfigError("ключ без значения", key=key, line=line)
            try:
                values[key] = _parse_value(key, value)
            except ValueError as error:
                raise ConfigError(f"не удалось разобрать значение {value!r}: {error}", key=key, line=line)
        config = cls(values, source)
        config.validate(lines)
        return config

    @classmethod
    def load(cls, path: Optional[str]) -> "RunConfig":
        if path is None:
            config = cls()
            config.validate({})
            return config
        try:
            with open(path, encoding="utf-8") as handle:
                text = handle.read()
        except OSError as error:
            raise ConfigError(f"не удалось прочитать файл конфигурации {path}: {error}")
        return cls.from_text(text, source=path)

    @classmethod
    def from_header(cls, lines: Iterable[str]) -> "RunConfig":
        """Восстановление конфигурации из заголовка артефакта (строки `# key = value`)."""
        body = []
        for line in lines:
            if not line.startswith("#"):
                break
            content = line[1:].strip()
            key = content.split("=", 1)[0].strip()
            if key in DEFAULTS:
                body.append(content)
        return cls.from_text("\n".join(body) + "\n")

    def with_overrides(self, overrides: Dict[str, Any]) -> "RunConfig":
        values = dict(self.values)
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in DEFAULTS:
                raise ConfigError("неизвестный ключ", key=key)
            values[key] = value
        config = RunConfig(values, self.source)
        config.validate({})
        return config

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def section(self, name: str) -> Dict[str, Any]:
        prefix = f"{name}."
        return {key[len(prefix):]: value for key, value in self.values.items() if key.startswith(prefix)}

    def to_lines(self) -> List[str]:
        return [f"{key} = {format_value(value)}" for key, value in self.values.items()]

    def to_text(self) -> str:
        return "\n".join(self.to_lines()) + "\n"

    def validate(self, lines: Dict[str, int]) -> None:
        """Повторная проверка инвариантов всех оборачиваемых типов."""
        checks = (
            ("resonance.Delta", self.resonance),
            ("trap.d", self.trap),
            ("vdw.core_branch", self.vdw),
            ("trap.partial_waves", self.transmission_model),
            ("array.L_nm", self.tube_array),
        )
        for key, build in checks:
            try:
                build()
            except ConfigError as error:
                raise ConfigError(error.detail, key=error.key or key, line=lines.get(error.key or key))
            except (DomainError, NumericError) as error:
                raise ConfigError(str(error), key=key, line=lines.get(key))

        def require(condition: bool, key: str, message: str) -> None:
            if not condition:
                raise ConfigError(message, key=key, line=lines.get(key))

        require(self["array.abar_nm"] > 0, "array.abar_nm", "ā в нм должна быть положительной")
        require(self["scan.points"] >= 1, "scan.points", "пустая сетка по B")
        require(self["scan.dB_max"] >= self["scan.dB_min"], "scan.dB_max", "dB_max меньше dB_min")
        require(self["scan.center"] in SCAN_CENTERS, "scan.center", f"допустимые значения: {SCAN_CENTERS}")
        require(self["scan.window"] > 0, "scan.window", "ширина окна должна быть положительной")
        require(self["scan.h0"] is None or self["scan.h0"] > 0, "scan.h0", "шаг h0 должен быть положительным")
        require(self["map.B0_points"] >= 1 and self["map.Bx_points"] >= 1, "map.B0_points", "пустая сетка карты")
        require(len(self["mc.N"]) >= 1 and min(self["mc.N"]) >= 1, "mc.N", "нужны значения N ≥ 1")
        require(self["mc.trials"] >= 2, "mc.trials", "нужно хотя бы 2 испытания")
        require(0 <= self["mc.seed"] < 2 ** 64, "mc.seed", "seed должен быть в диапазоне 0..2^64-1")
        require(self["mc.grid_points"] >= 2, "mc.grid_points", "нужно хотя бы 2 узла сетки")
        require(
            self["mc.params"] == ("auto",) or (len(self["mc.params"]) >= 1 and set(self["mc.params"]) <= {"B0", "Bx", "By"}),
            "mc.params",
            "допустимы auto или подмножество B0,Bx,By",
        )
        require(self["output.format"] in OUTPUT_FORMATS, "output.format", f"допустимые значения: {OUTPUT_FORMATS}")

    def resonance(self) -> FeshbachResonance:
        return FeshbachResonance(**self.section("resonance"))

    def trap(self) -> TrapConfig:
        values = self.section("trap")
        return TrapConfig(values["d"], values["p"], frozenset(values["partial_waves"]), values["eq6_reading"])

    def vdw(self) -> VdwModel:
        values = self.section("vdw")
        return VdwModel(
            core_branch=values["core_branch"],
            steps_per_wavelength=values["steps_per_wavelength"],
            r_max_floor=values["r_max_floor"],
            r_max_factor=values["r_max_k_factor"],
            a_cap=values["a_cap"],
            c6_scale=values["c6_scale"],
        )

    def d_wave(self) -> Optional[FixedDWaveCoefficients]:
        coeffs = [self[f"trap.{name}"] for name in ("c2", "c3", "c4")]
        if any(value is None for value in coeffs):
            return None
        return FixedDWaveCoefficients(*coeffs)

    def transmission_model(self) -> TransmissionModel:
        return TransmissionModel(self.trap(), self.vdw(), self.resonance(), self["trap.mass_factor"], self.d_wave())

    def tube_array(self) -> TubeArray:
        return TubeArray.grid(self["array.Mx"], self["array.My"], self["array.L_nm"])

    def scan_grid(self) -> np.ndarray:
        """Сетка полей B_res + [dB_min, dB_max]."""
        return self["resonance.B_res"] + np.linspace(self["scan.dB_min"], self["scan.dB_max"], self["scan.points"])

    def map_grids(self) -> Tuple[np.ndarray, np.ndarray]:
        B0 = self["resonance.B_res"] + np.linspace(self["map.B0_min"], self["map.B0_max"], self["map.B0_points"])
        Bx = np.linspace(self["map.Bx_min"], self["map.Bx_max"], self["map.Bx_points"])
        return B0, Bx

    def trap_width_nm(self) -> float:
        return self["trap.d"] * self["array.abar_nm"]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RunConfig):
            return NotImplemented
        return self.values == other.values
