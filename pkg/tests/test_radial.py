import math

import pytest

from physics.radial import (
    FeshbachResonance,
    RadialSolver,
    VdwModel,
    a_of_B,
    abar_nm,
    beta6,
    core_branch,
    field_for_length,
    find_pole_fields,
    inverse_scattering_length,
    scattering_quantities,
    solve_phase_shift,
    tune_core,
    tune_core_inverse,
    vdw_length,
    wrap_half_pi,
    zero_energy_length,
    zero_energy_length_numerov,
)
from physics.specfun import riccati_bessel
from service.errors import BracketingError, DomainError, PoleError, ResolutionError

RES = FeshbachResonance(B_res=0.0, Delta=0.1, a_bg=9.76)


def test_resonance_rejects_degenerate_parameters():
    with pytest.raises(DomainError):
        FeshbachResonance(0.0, 0.0, 9.76)
    with pytest.raises(DomainError):
        FeshbachResonance(0.0, 0.1, 0.0)


def test_scattering_length_of_field():
    assert a_of_B(RES, RES.B_res + RES.Delta) == pytest.approx(0.0, abs=1e-15)
    assert a_of_B(RES, 1e6) == pytest.approx(RES.a_bg, rel=1e-6)
    with pytest.raises(PoleError):
        a_of_B(RES, RES.B_res)


def test_inverse_length_is_regular_at_resonance():
    assert inverse_scattering_length(RES, RES.B_res) == 0.0
    assert math.isinf(inverse_scattering_length(RES, RES.B_res + RES.Delta))
    assert inverse_scattering_length(RES, 0.2) == pytest.approx(1.0 / a_of_B(RES, 0.2), rel=1e-14)


@pytest.mark.parametrize("a", [-30.0, 0.5, 1.0, 2.0, 50.0])
def test_field_for_length_inverts_resonance_formula(a):
    assert a_of_B(RES, field_for_length(RES, a)) == pytest.approx(a, rel=1e-12)


def test_field_for_background_length_is_out_of_domain():
    with pytest.raises(DomainError):
        field_for_length(RES, RES.a_bg)


def test_vdw_length_scaling_and_cesium_value():
    assert vdw_length(16.0, 1.0) == pytest.approx(2.0 * vdw_length(1.0, 1.0), rel=1e-14)
    # Cs: C6 = 6890 а.е., μ = m/2
    assert abar_nm(6890.0, 132.905 / 2) == pytest.approx(5.1, rel=0.02)
    with pytest.raises(DomainError):
        vdw_length(-1.0, 1.0)


def test_beta6_relation_to_abar():
    model = VdwModel()
    assert beta6(model) == pytest.approx(2.0921, rel=1e-4)


def test_core_branch_is_short_range():
    r_inner, r_outer = core_branch(VdwModel())
    assert 0.15 < r_inner < r_outer < 0.25


@pytest.mark.parametrize("target", [-50.0, -3.0, 0.0, 0.5, 2.0, 9.76, 100.0])
def test_tune_core_round_trip(target):
    model = VdwModel()
    r_core = tune_core(model, target)
    r_inner, r_outer = core_branch(model)
    assert r_inner <= r_core <= r_outer
    assert zero_energy_length(model, r_core) == pytest.approx(target, rel=1e-8, abs=1e-10)


def test_tune_core_reaches_unitarity():
    model = VdwModel()
    assert abs(zero_energy_length(model, tune_core(model, math.inf))) > 1e10


@pytest.mark.parametrize("inv_a", [0.0, -0.0, 1e-18, -1e-18])
def test_tune_core_inverse_at_resonance_centre(inv_a):
    model = VdwModel()
    r_core = tune_core_inverse(model, inv_a)
    r_inner, r_outer = core_branch(model)
    assert r_inner <= r_core <= r_outer
    assert abs(zero_energy_length(model, r_core)) > 1e10


def test_tune_core_respects_cap():
    with pytest.raises(BracketingError):
        tune_core(VdwModel(a_cap=1000.0), 2000.0)


def test_zero_energy_length_requires_core():
    with pytest.raises(DomainError):
        zero_energy_length(VdwModel())


def test_hard_sphere_limit_without_tail():
    model = VdwModel(c6_scale=0.0)
    assert tune_core(model, 1.5) == pytest.approx(1.5)
    assert zero_energy_length(model, 1.5) == 1.5
    with pytest.raises(BracketingError):
        tune_core(model, -1.0)


@pytest.mark.parametrize(
    "angle, expected",
    [(0.3, 0.3), (math.pi / 2, math.pi / 2), (-math.pi / 2, math.pi / 2), (math.pi + 0.2, 0.2), (-2.0, math.pi - 2.0)],
)
def test_wrap_half_pi(angle, expected):
    assert wrap_half_pi(angle) == pytest.approx(expected, abs=1e-14)


def test_solver_rejects_coarse_grid():
    solver = RadialSolver(VdwModel(steps_per_wavelength=10))
    with pytest.raises(ResolutionError):
        solver.grid(0, 0.07, 0.2)


def test_phase_shift_requires_positive_k():
    model = VdwModel()
    with pytest.raises(DomainError):
        solve_phase_shift(model.with_core(tune_core(model, 1.0)), 0, 0.0)


@pytest.mark.slow
@pytest.mark.parametrize("target", [-5.0, 1.0, 3.0])
def test_numerov_zero_energy_matches_bessel_solution(target):
    model = VdwModel()
    r_core = tune_core(model, target)
    assert zero_energy_length_numerov(model, r_core) == pytest.approx(target, rel=1e-4, abs=1e-4)


@pytest.mark.slow
def test_low_energy_s_wave_approaches_scattering_length():
    model = VdwModel()
    res = FeshbachResonance(0.0, 0.1, 9.76)
    B = field_for_length(res, 3.0)
    data = scattering_quantities(model, res, B, 1e-3, waves=(0,))
    assert data.a_s == pytest.approx(3.0, rel=1e-3)
    assert data.inv_a_s == pytest.approx(1.0 / data.a_s, rel=1e-10)


@pytest.mark.slow
def test_p_wave_threshold_law():
    model = VdwModel(steps_per_wavelength=400)
    res = FeshbachResonance(0.0, 0.1, 9.76)
    B = field_for_length(res, -3.0)
    low = scattering_quantities(model, res, B, 0.005, waves=(1,))
    high = scattering_quantities(model, res, B, 0.01, waves=(1,))
    assert low.V_p == pytest.approx(high.V_p, rel=0.05)


@pytest.mark.slow
def test_d_wave_threshold_is_tail_dominated():
    model = VdwModel(steps_per_wavelength=400)
    res = FeshbachResonance(0.0, 0.1, 9.76)
    B = field_for_length(res, -3.0)
    low = scattering_quantities(model, res, B, 0.01, waves=(2,))
    high = scattering_quantities(model, res, B, 0.02, waves=(2,))
    ratio = math.tan(high.deltas[2]) / math.tan(low.deltas[2])
    assert 14.0 < ratio < 18.5


@pytest.mark.slow
def test_partial_wave_poles_follow_universal_lengths():
    model = VdwModel()
    res = FeshbachResonance(0.0, 0.1, 9.76)
    grid = [0.105 + 0.095 * i / 59 for i in range(60)]
    poles = find_pole_fields(model, res, math.sqrt(0.01 ** 2 + 2 / 20.0 ** 2), grid, (1, 2))
    assert len(poles[1]) == 1
    assert len(poles[2]) == 1
    assert poles[1][0] == pytest.approx(field_for_length(res, 2.0), abs=0.02 * res.Delta)
    assert poles[2][0] == pytest.approx(field_for_length(res, 1.0), abs=0.02 * res.Delta)


@pytest.mark.parametrize("ell", [0, 1, 2])
def test_hard_sphere_phase_shift(ell):
    model = VdwModel(c6_scale=0.0).with_core(1.5)
    k = 0.07
    rb = riccati_bessel(ell, k * 1.5)
    # u(R) = 0: tg δ = ĵ(kR)/n̂(kR)
    expected = math.atan(rb.j / rb.n)
    assert wrap_half_pi(solve_phase_shift(model, ell, k) - expected) == pytest.approx(0.0, abs=1e-6)


def test_hard_sphere_s_wave_phase_is_minus_kr():
    model = VdwModel(c6_scale=0.0).with_core(1.5)
    assert solve_phase_shift(model, 0, 0.07) == pytest.approx(-0.105, abs=1e-6)


@pytest.mark.slow
def test_phase_shift_converges_with_grid():
    coarse = VdwModel(steps_per_wavelength=100)
    fine = VdwModel(steps_per_wavelength=200)
    r_core = tune_core(coarse, 3.0)
    delta_coarse = solve_phase_shift(coarse.with_core(r_core), 0, 0.07)
    delta_fine = solve_phase_shift(fine.with_core(r_core), 0, 0.07)
    assert abs(wrap_half_pi(delta_fine - delta_coarse)) < 2e-6
