import math
import warnings

import numpy as np
import pytest

from excitonqed.algebra import FockSpace, coherent_vector, derive_coefficients
from excitonqed.analytic import DensityBlock, analytic_block, initial_block, total_density
from excitonqed.errors import DimensionMismatch, InvalidParams, StepTooLarge, TruncationLeak
from excitonqed.oracle import (
    IntegratorConfig,
    Superop,
    _InteractionStepper,
    block_derivative,
    generator_coefficients,
    integrate,
    integrate_from_params,
)

from conftest import make_params, random_state


def _blocks_from_total(rho, dim, t=0.0):
    return DensityBlock(rho[:dim, :dim], rho[:dim, dim:], rho[dim:, :dim], rho[dim:, dim:], t)


def test_superoperator_algebra():
    rng = np.random.default_rng(7)
    for _ in range(5):
        rho = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
        M, P, J = (lambda r, s=s: s.apply(r) for s in (Superop.M, Superop.P, Superop.J))
        np.testing.assert_allclose(J(M(rho)) - M(J(rho)), J(rho), atol=1e-12)
        np.testing.assert_allclose(J(P(rho)) - P(J(rho)), J(rho), atol=1e-12)
        np.testing.assert_allclose(M(P(rho)) - P(M(rho)), 0, atol=1e-12)


def test_vacuum_is_stationary():
    p = make_params(k=0.0, kp=0.0)
    c = derive_coefficients(p)
    z = np.zeros((6, 6), complex)
    vac = z.copy()
    vac[0, 0] = 1
    d = block_derivative(DensityBlock(z, z, z, vac), p, c)
    assert np.abs(d.as_stack()).max() == 0.0


def test_probability_flow_between_branches():
    p = make_params(k=0.0, kp=0.05)
    c = derive_coefficients(p)
    space = FockSpace(21)
    v = coherent_vector(1.0, space)
    z = np.zeros((21, 21), complex)
    ee = 0.5 * np.outer(v, v.conj())
    d = block_derivative(DensityBlock(ee, z, z, z), p, c)
    rate = 2 * c.B_squared * p.k_mol
    assert np.trace(d.rho_ee) == pytest.approx(-rate * np.trace(ee), abs=1e-14)
    assert np.trace(d.rho_gg) == pytest.approx(rate * np.trace(ee), abs=1e-14)
    assert abs(np.trace(d.rho_ee) + np.trace(d.rho_gg)) < 1e-14


@pytest.mark.parametrize("t", [0.0, 0.5])
def test_derivative_matches_finite_difference(fig1a, space25, t):
    p, c = fig1a
    h = 1e-6
    fd = (analytic_block(p, c, space25, t + h).as_stack() - analytic_block(p, c, space25, t - h).as_stack()) / (2 * h)
    d = block_derivative(analytic_block(p, c, space25, t), p, c).as_stack()
    assert np.abs(d - fd).max() <= 1e-5


def test_generator_table_hermitian_pairs(fig1a):
    p, c = fig1a
    gen = generator_coefficients(p, c)
    for a, b in zip(gen["eg"], gen["ge"]):
        assert np.conj(a) == pytest.approx(b)


def test_dimension_mismatch(fig1a):
    p, c = fig1a
    z4, z5 = np.zeros((4, 4), complex), np.zeros((5, 5), complex)
    with pytest.raises(DimensionMismatch):
        block_derivative(DensityBlock(z4, z4, z4, z5), p, c)
    with pytest.raises(DimensionMismatch):
        integrate(DensityBlock(z4, z4, z4, z4), p, c, IntegratorConfig(fock_dim=5))


def test_config_validation():
    with pytest.raises(InvalidParams):
        IntegratorConfig(step=0.0)
    with pytest.raises(InvalidParams):
        IntegratorConfig(method="euler")
    with pytest.raises(InvalidParams):
        IntegratorConfig(frame="rotating")


def test_fused_step_matches_reference(fig1a):
    p, c = fig1a
    stepper = _InteractionStepper(p, c, 21, 1e-3)
    rng = np.random.default_rng(3)
    s = rng.normal(size=(4, 21, 21)) + 1j * rng.normal(size=(4, 21, 21))
    np.testing.assert_allclose(stepper.step(s), stepper.step_reference(s), atol=1e-14)


def test_fig1a_trace_and_agreement(fig1a, space25):
    p, c = fig1a
    res = integrate(initial_block(p, space25), p, c, IntegratorConfig(t_max=3.0, n_out=30))
    assert res.certificate.passed and res.certificate.max_deviation < 1e-9
    for blk in res.blocks:
        rho = total_density(blk)
        assert abs(np.trace(rho) - 1) <= 1e-8
        assert np.abs(rho - rho.conj().T).max() <= 1e-8
        assert np.abs(blk.as_stack() - analytic_block(p, c, space25, blk.time).as_stack()).max() <= 1e-6


def test_coherence_magnitude_and_phase_at_one(fig1a, space25):
    # |Tr rho_eg| and its phase follow exp(Gamma + i Theta) times the branch overlap
    p, c = fig1a
    res = integrate(initial_block(p, space25), p, c, IntegratorConfig(t_max=1.0, n_out=1, certify=False))
    ref = analytic_block(p, c, space25, 1.0)
    tr_o, tr_a = np.trace(res.blocks[-1].rho_eg), np.trace(ref.rho_eg)
    assert abs(abs(tr_o) - abs(tr_a)) < 1e-9
    assert abs(np.angle(tr_o / tr_a)) < 1e-8


def test_single_molecule_revival():
    p = make_params(N=1, n=1, k=0.0, kp=0.0)
    c = derive_coefficients(p)
    space = FockSpace(21)
    init = initial_block(p, space)
    res = integrate(init, p, c, IntegratorConfig(t_max=2 * math.pi, n_out=1))
    # Theta(2 pi) = -2 pi, so the coherence block returns to its initial value
    np.testing.assert_allclose(res.blocks[-1].rho_eg, init.rho_eg, atol=1e-9)


def test_linearity(fig1a):
    p, c = fig1a
    dim = 16
    rng = np.random.default_rng(11)
    r1 = _blocks_from_total(random_state(rng, dim), dim)
    r2 = _blocks_from_total(random_state(rng, dim), dim)
    cfg = IntegratorConfig(t_max=0.2, n_out=4, certify=False, leak_tolerance=np.inf)
    c1, c2 = 0.3 - 0.2j, 1.7
    combo = integrate(c1 * r1 + c2 * r2, p, c, cfg).blocks[-1].as_stack()
    parts = c1 * integrate(r1, p, c, cfg).blocks[-1].as_stack() + c2 * integrate(r2, p, c, cfg).blocks[-1].as_stack()
    assert np.abs(combo - parts).max() <= 1e-8


def test_hermiticity_and_trace_propagate():
    p = make_params(k=0.1, kp=0.08)
    c = derive_coefficients(p)
    dim = 16
    init = _blocks_from_total(random_state(np.random.default_rng(5), dim), dim)
    res = integrate(init, p, c, IntegratorConfig(t_max=0.5, n_out=5, certify=False, leak_tolerance=np.inf))
    for blk in res.blocks:
        rho = total_density(blk)
        assert np.abs(rho - rho.conj().T).max() <= 1e-8
        assert abs(np.trace(rho) - 1) <= 1e-8


def test_lab_frame_agrees(fig1a):
    p, c = fig1a
    space = FockSpace(21)
    init = initial_block(p, space)
    cfg = IntegratorConfig(step=1e-4, t_max=0.05, n_out=5, frame="lab", certify=False)
    lab = integrate(init, p, c, cfg)
    ia = integrate(init, p, c, IntegratorConfig(t_max=0.05, n_out=5, certify=False))
    assert np.abs(lab.blocks[-1].as_stack() - ia.blocks[-1].as_stack()).max() < 1e-8


def test_lab_frame_step_warning(fig1a):
    p, c = fig1a
    init = initial_block(p, FockSpace(21))
    with pytest.warns(RuntimeWarning, match="lab-frame step"):
        res = integrate(init, p, c, IntegratorConfig(step=1e-3, t_max=0.002, frame="lab", certify=False))
    assert res.warnings
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        integrate(init, p, c, IntegratorConfig(step=1e-3, t_max=0.002, certify=False))


def test_truncation_leak(fig1a):
    p, c = fig1a
    with pytest.raises(TruncationLeak) as info:
        integrate_from_params(p, c, IntegratorConfig(fock_dim=5, t_max=0.1, n_out=1))
    assert info.value.dim == 5


def test_step_too_large_carries_result(fig1a):
    p, c = fig1a
    with pytest.raises(StepTooLarge) as info:
        integrate_from_params(p, c, IntegratorConfig(step=0.1, t_max=1.0, n_out=10))
    cert = info.value.certificate
    assert not cert.passed and cert.max_deviation > 1e-6
    assert len(info.value.result.blocks) == 11
    assert "--step 0.05" in str(info.value)


def test_grid_refines_step_to_divide_spacing(fig1a):
    p, c = fig1a
    res = integrate_from_params(p, c, IntegratorConfig(step=1e-3, t_max=0.01, n_out=3, certify=False))
    assert res.step <= 1e-3
    np.testing.assert_allclose(res.times, np.linspace(0, 0.01, 4), atol=1e-15)
