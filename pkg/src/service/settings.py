import os
from dotenv import load_dotenv

load_dotenv()

DEBUG = os.getenv('DEBUG', '0').lower() in ('1', 'true', 'yes')

SERVICE_DIR = os.path.dirname(os.path.abspath(__file__))
BASE_DIR = os.path.dirname(SERVICE_DIR)
LOG_DIR = os.getenv('LOG_DIR', os.path.join(BASE_DIR, 'service', 'logs'))

TOOLKIT_NAME = "collision-gradiometer"
TOOLKIT_VERSION = "1.0.0"

DEFAULT_THREADS = int(os.getenv('GRADIOMETER_THREADS', '1'))

# 🧲 Резонанс Фешбаха (Гаусс, длины в единицах ā)
RESONANCE_DEFAULTS = {
    "B_res": 0.0,
    "Delta": 0.1,
    "a_bg": 9.76,
}

# 🚇 Волновод: d в ā, p в ā⁻¹
TRAP_DEFAULTS = {
    "d": 20.0,
    "p": 0.01,
    "partial_waves": ("s",),
    "mass_factor": 1.0,
    "eq6_reading": "reduced",
    "c2": None,
    "c3": None,
    "c4": None,
}

# ⚛️ Модель ван-дер-Ваальса с жёсткой стенкой
VDW_SETTINGS = {
    "core_branch": 16,
    "steps_per_wavelength": 100,
    "min_steps_per_wavelength": 20,
    "r_max_floor": 50.0,
    "r_max_k_factor": 10.0,
    "a_cap": 1.0e3,
    "zero_energy_r_max": 1.0e3,
    "max_grid_points": 2_000_000,
    "pole_cos_threshold": 1.0e-12,
    "c6_scale": 1.0,
}

# Ключи vdw.*, доступные в конфигурации запуска
VDW_CONFIG_KEYS = ("core_branch", "steps_per_wavelength", "r_max_floor", "r_max_k_factor", "a_cap", "c6_scale")

# 🔢 Специальные функции
SPECFUN_SETTINGS = {
    "head_terms": 25,
    "series_switch": 1.0,
    "series_terms": 14,
}

# 🧮 Сетка трубок: L и ā в нм
# ā для Cs (C6 = 6890 а.е., μ = m_Cs/2) ≈ 5.1 нм
ARRAY_DEFAULTS = {
    "Mx": 51,
    "My": 51,
    "L_nm": 523.0,
    "abar_nm": 5.1,
}

# 📈 Скан по полю: сдвиги B - B_res в Гауссах
SCAN_DEFAULTS = {
    "dB_min": -0.5,
    "dB_max": 0.3,
    "points": 801,
    "center": "none",
    "window": 1.0e-5,
    "h0": None,
}

# 🗺 Карта неопределённостей (B0 - B_res в Гс, Bx в Гс/мм)
MAP_DEFAULTS = {
    "B0_min": 0.05,
    "B0_max": 0.3,
    "B0_points": 101,
    "Bx_min": 0.0,
    "Bx_max": 1.0,
    "Bx_points": 21,
    "exact": False,
}

# 🎲 Монте-Карло
MC_DEFAULTS = {
    "N": (100, 1000, 10000),
    "trials": 200,
    "seed": 20180101,
    "B0": 0.15,
    "Bx": 0.0,
    "By": 0.0,
    "grid_points": 21,
    "bound_sigmas": 8.0,
    "bootstrap": 500,
    "params": ("B0", "Bx"),
}

ESTIMATION_SETTINGS = {
    "clamp_eps": 1.0e-30,
    "singular_cond": 1.0e12,
    "h0_factor": 1.0e-4,
    "memo_step_factor": 1.0e-3,
    "memo_padding_factor": 0.05,
    "derivative_rtol": 1.0e-2,
    "simplex_tol": 1.0e-6,
    "max_nm_iterations": 4000,
}

OUTPUT_DEFAULTS = {
    "dir": "output",
    "format": "csv",
    "gnuplot": False,
}

FLAGS = ("OK", "SATURATED", "SINGULAR", "POLE")

EXIT_CODES = {
    "ok": 0,
    "config": 2,
    "numeric": 3,
}

CSV_FLOAT_FORMAT = ".16e"

PARAMETER_NAMES = ("B0", "Bx", "By")
