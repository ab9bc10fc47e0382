import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from excitonqed.algebra import FockSpace, coherent_vector, derive_coefficients
from excitonqed.analytic import analytic_block, reduced_field
from excitonqed.errors import NotAState
from excitonqed.observables import (
    AUDIT_TARGETS,
    SERIES_COLUMNS,
    audit_closed_forms,
    compute_series,
    dipole_Fy_closed_form,
    dipole_Fy_generic,
    entropy_closed_forms,
    linear_entropy,
    mean_photon_number,
    quadrature_s1_closed_form,
    quadrature_s1_generic,
    resolved_Fy_minimum,
    state_diagnostics,
)

from conftest import make_params


def _proj(v):
    return np.outer(v, v.conj())


def test_entropy_examples():
    assert linear_entropy(_proj(np.array([0.6, 0.8j]))) == pytest.approx(0.0, abs=1e-15)
    assert linear_entropy(0.5 * np.eye(2)) == pytest.approx(0.5)


@pytest.mark.parametrize(
    "rho",
    [np.eye(2), np.array([[0.5, 0.1], [0.3, 0.5]])],
    ids=["trace-two", "non-hermitian"],
)
def test_not_a_state(rho):
    with pytest.raises(NotAState):
        linear_entropy(rho)
    with pytest.raises(NotAState):
        dipole_Fy_generic(rho, 0.0, 1.0, 1.0)


@settings(max_examples=60)
@given(st.integers(2, 8), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_state_bounds(dim, rank, seed):
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = psi @ psi.conj().T
    rho /= np.trace(rho).real
    s = linear_entropy(rho)
    assert -1e-10 <= s < 1.0
    assert mean_photon_number(rho) >= -1e-12
    assert quadrature_s1_generic(rho, rng.uniform(0, 5), 10.0) >= -1 - 1e-10
    if dim == 2:
        assert dipole_Fy_generic(rho, rng.uniform(0, 5), 110.0, rng.uniform(0.5, 3)) <= 1.0 + 1e-12


@settings(max_examples=30)
@given(st.floats(0, 2), st.floats(0, 2 * math.pi), st.floats(0, 3))
def test_coherent_state_minimum_uncertainty(r, phi, t):
    space = FockSpace(30)
    rho = _proj(coherent_vector(r * np.exp(1j * phi), space))
    assert abs(quadrature_s1_generic(rho, t, 10.0)) <= 1e-10


def test_vacuum_values():
    vac = np.zeros((5, 5), complex)
    vac[0, 0] = 1
    assert quadrature_s1_generic(vac, 0.3, 10.0) == 0.0
    assert mean_photon_number(vac) == 0.0


def test_coherent_photon_number():
    assert mean_photon_number(_proj(coherent_vector(1.0, FockSpace(25)))) == pytest.approx(1.0, abs=1e-12)


def test_dipole_examples():
    assert dipole_Fy_generic(0.5 * np.ones((2, 2)), 0.0, 110.0, math.sqrt(3)) == pytest.approx(1.0)
    ground = np.diag([0.0, 1.0]).astype(complex)
    assert dipole_Fy_generic(ground, 2.0, 110.0, math.sqrt(3)) == pytest.approx(0.0)
    assert dipole_Fy_generic(ground, 2.0, 110.0, math.sqrt(3), include_sigma_z=False) == pytest.approx(1.0)


def test_photon_law_fig1a(fig1a, space25):
    p, c = fig1a
    for t in np.linspace(0, 3, 7):
        n = mean_photon_number(reduced_field(analytic_block(p, c, space25, t)))
        assert abs(n - math.exp(-2 * p.k_field * t)) <= 1e-8


def test_closed_forms_at_zero(fig1a):
    p, c = fig1a
    d = dipole_Fy_closed_form(p, c, 0.0)
    assert d.printed == 1.0 and d.printed_with_sigma_z == 1.0
    # the printed entropy of the total state evaluates to the purity, so 1 at t = 0
    s_total, _, s_mol = entropy_closed_forms(p, c, 0.0)
    assert s_total == pytest.approx(1.0, abs=1e-12)
    assert s_mol == pytest.approx(1.0, abs=1e-12)


def test_printed_squeezing_nonzero_for_coherent_state():
    # with no damping the field stays coherent, so s1 = 0; the printed expression disagrees
    p = make_params(k=0.0, kp=0.0)
    c = derive_coefficients(p)
    assert abs(quadrature_s1_closed_form(p, c, 0.0)) > 1e-6


def test_closed_form_decays_at_late_times(fig1a):
    p, c = fig1a
    assert abs(quadrature_s1_closed_form(p, c, 400.0)) < 1e-12


def test_compute_series_columns_and_subset(fig1a, space25):
    p, c = fig1a
    blocks = [analytic_block(p, c, space25, t) for t in (0.0, 0.5)]
    s = compute_series(blocks, p, c, "analytic", observables=("n_photon",))
    assert set(s.columns) == set(SERIES_COLUMNS[1:-1])
    assert np.isnan(s.columns["s1"]).all()
    assert np.isfinite(s.columns["n_photon"]).all()
    rows = list(s.rows())
    assert rows[0]["engine"] == "analytic" and len(s) == 2


def test_generic_dipole_at_zero_both_variants(fig1a, space25):
    p, c = fig1a
    s = compute_series([analytic_block(p, c, space25, 0.0)], p, c, "analytic")
    assert s.columns["Fy_eq30"][0] == pytest.approx(1.0, abs=1e-10)
    assert s.columns["Fy_eq31"][0] == pytest.approx(1.0, abs=1e-10)


def test_state_diagnostics_initial(fig1a, space25):
    p, c = fig1a
    d = state_diagnostics(analytic_block(p, c, space25, 0.0))
    assert d["trace_err"] < 1e-12 and d["hermiticity"] == 0.0
    assert d["purity_total"] == pytest.approx(1.0, abs=1e-10)
    assert d["min_eig"] > -1e-12


def test_audit_records_every_equation(fig1a, space25):
    p, c = fig1a
    times = np.linspace(0, 0.5, 26)
    s = compute_series([analytic_block(p, c, space25, t) for t in times], p, c, "analytic")
    entries = audit_closed_forms(s, p, c)
    assert [e.equation for e in entries] == list(AUDIT_TARGETS)
    for e in entries:
        if e.status == "discrepancy":
            assert e.max_abs_dev > 1e-6 and e.first_divergent_omega_t is not None
        else:
            assert e.max_abs_dev <= 1e-6 and e.first_divergent_omega_t is None
    by_eq = {e.equation: e for e in entries}
    assert "one_minus" in by_eq["eq22"].matched_readings
    assert "overlap_sign_flipped" in by_eq["eq31"].matched_readings


def test_undamped_dipole_squeezing_negative():
    # N = 10, k = k' = 0: B^2 = 3 drives F_y below zero near sin^2 = 1
    p = make_params(k=0.0, kp=0.0)
    c = derive_coefficients(p)
    val, where = resolved_Fy_minimum(p, c, FockSpace(21), 3.0)
    assert val < -1.0 and 0 <= where <= 3.0


def test_resolved_minimum_not_above_grid_minimum(fig1a):
    p, c = fig1a
    space = FockSpace(21)
    times = np.linspace(0, 3, 301)
    s = compute_series([analytic_block(p, c, space, t) for t in times], p, c, "analytic", ("fy",))
    val, _ = resolved_Fy_minimum(p, c, space, 3.0)
    assert val <= s.columns["Fy_eq30"].min() + 1e-12
