"""Entropies, squeezing parameters and diagnostics.

Every quantity is computed generically from density blocks. The printed
closed-form expressions are transcribed literally in the ``*_closed_form``
functions and audited against the generic values by :func:`audit_closed_forms`;
the generic pipeline is always authoritative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .algebra import DerivedCoefficients, FockSpace, SystemParams
from .analytic import (
    DensityBlock,
    gamma_of_t,
    molecular_traces,
    reduced_field,
    reduced_molecular,
    theta_of_t,
    total_density,
)
from .errors import NotAState

STATE_TOLERANCE = 1e-8
MATCH_TOLERANCE = 1e-6
POISSON_CUTOFF = 1e-16

SERIES_COLUMNS = (
    "omega_t",
    "s_total",
    "s_field",
    "s_mol",
    "s1",
    "Fy_eq30",
    "Fy_eq31",
    "n_photon",
    "trace_err",
    "purity_total",
    "engine",
)


def _check_state(rho: np.ndarray, tol: float = STATE_TOLERANCE):
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise NotAState(f"expected a square matrix, got shape {rho.shape}")
    tr = np.trace(rho)
    if abs(tr - 1.0) > tol:
        raise NotAState(f"trace {tr:.12g} differs from 1 by more than {tol:g}")
    herm = float(np.abs(rho - rho.conj().T).max())
    if herm > tol:
        raise NotAState(f"Hermiticity residue {herm:.3e} exceeds {tol:g}")


def linear_entropy(rho: np.ndarray) -> float:
    """``1 - Tr(rho^2)`` for a density matrix."""
    _check_state(rho)
    purity = np.einsum("ij,ji->", rho, rho)
    if abs(purity.imag) > 1e-10:
        raise NotAState(f"Tr(rho^2) has imaginary part {purity.imag:.3e}")
    return float(1.0 - purity.real)


def mean_photon_number(rho_f: np.ndarray) -> float:
    _check_state(rho_f)
    n = np.arange(rho_f.shape[0])
    return float(np.real(np.diagonal(rho_f) @ n))


def _field_moments(rho_f: np.ndarray):
    dim = rho_f.shape[0]
    sq = np.sqrt(np.arange(1, dim))
    # <a> = sum_j sqrt(j) rho[j, j-1];  <a^2> = sum_j sqrt(j (j-1)) rho[j, j-2]
    a1 = np.sum(sq * np.diagonal(rho_f, -1))
    a2 = np.sum(sq[1:] * sq[:-1] * np.diagonal(rho_f, -2))
    n = np.real(np.diagonal(rho_f) @ np.arange(dim))
    return a1, a2, n


def quadrature_s1_generic(rho_f: np.ndarray, t: float, omega_0: float) -> float:
    """``4 <(dX1)^2> - 1`` for ``X1 = (a e^{i w0 t} + a^dag e^{-i w0 t}) / 2``.

    Uses ``a a^dag = a^dag a + 1`` analytically, so the truncation edge of
    the Fock basis does not enter. Negative values signal squeezing.
    """
    _check_state(rho_f)
    a1, a2, n = _field_moments(rho_f)
    ph = np.exp(1j * omega_0 * t)
    mean_x = np.real(a1 * ph)
    return float(2.0 * n + 2.0 * np.real(a2 * ph * ph) - 4.0 * mean_x**2)


def dipole_Fy_generic(
    rho_m: np.ndarray,
    t: float,
    omega_eg: float,
    B: float,
    include_sigma_z: bool = True,
) -> float:
    """Dipole-squeezing indicator ``1 - 4 <sigma_y>^2 - |<sigma_z>|``.

    On the two-state subspace ``b_q -> B |g><e|`` and
    ``sigma_z = |e><e| - |g><g|``. With ``include_sigma_z=False`` the
    ``|<sigma_z>|`` term is dropped.
    """
    _check_state(rho_m)
    return float(dipole_Fy_series(rho_m[None], np.array([t]), omega_eg, B, include_sigma_z)[0])


def dipole_Fy_series(rho_m: np.ndarray, times: np.ndarray, omega_eg: float, B: float, include_sigma_z: bool = True):
    """Vectorised :func:`dipole_Fy_generic` over a ``(T, 2, 2)`` stack (no state checks)."""
    # <b_q> = B <e|rho|g>; <sigma_y> = (conj(z) - z)/(2i) = -Im z with z = <b_q> e^{i w_eg t}
    z = B * rho_m[:, 0, 1] * np.exp(1j * omega_eg * np.asarray(times, dtype=float))
    val = 1.0 - 4.0 * z.imag**2
    if include_sigma_z:
        val = val - np.abs(np.real(rho_m[:, 0, 0] - rho_m[:, 1, 1]))
    return val


def resolved_Fy_minimum(
    params: SystemParams,
    coeffs: DerivedCoefficients,
    space: FockSpace,
    t_max: float,
    include_sigma_z: bool = True,
    samples_per_period: int = 32,
    n_polish: int = 16,
    chunk: int = 100_000,
) -> tuple[float, float]:
    """Minimum of the generic ``F_y`` over ``[0, t_max]`` and the ``omega t`` where it occurs.

    A scan with ``samples_per_period`` points per period of the fastest
    oscillation (``2 A w`` from the revivals, ``w_eg + A w`` from the dipole
    phase) locates candidates; the ``n_polish`` lowest grid minima are then
    refined with bounded Brent searches. A coarse output grid can step over
    revival windows of width ``~1/(A w)`` and miss the deepest squeezing.
    """
    Aw = coeffs.A_coeff * params.omega_disp
    fastest = max(2.0 * Aw, abs(params.omega_eg) + Aw)
    n = max(2, math.ceil(t_max * fastest * samples_per_period / (2 * math.pi)))
    dt = t_max / n

    def fy(t):
        t = np.atleast_1d(t)
        rho = molecular_traces(params, coeffs, space, t)
        return dipole_Fy_series(rho, t, params.omega_eg, coeffs.B_coeff, include_sigma_z)

    cand_t, cand_v = [], []
    for start in range(0, n + 1, chunk):
        idx = np.arange(start, min(start + chunk, n + 1))
        vals = fy(idx * dt)
        keep = np.argsort(vals)[:n_polish]
        cand_t.extend(idx[keep] * dt)
        cand_v.extend(vals[keep])
    order = np.argsort(cand_v)[:n_polish]
    best_v, best_t = float(cand_v[order[0]]), float(cand_t[order[0]])
    for i in order:
        lo, hi = max(0.0, cand_t[i] - dt), min(t_max, cand_t[i] + dt)
        res = minimize_scalar(lambda x: float(fy(x)[0]), bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        if res.fun < best_v:
            best_v, best_t = float(res.fun), float(res.x)
    return best_v, best_t * params.omega_disp


def state_diagnostics(block: DensityBlock, eigen: bool = True) -> dict:
    rho = total_density(block)
    out = {
        "trace_err": float(abs(np.trace(rho) - 1.0)),
        "hermiticity": float(np.abs(rho - rho.conj().T).max()),
        "purity_total": float(np.real(np.einsum("ij,ji->", rho, rho))),
    }
    if eigen:
        out["min_eig"] = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
    return out


@dataclass
class ObservableSeries:
    """Column-oriented time series; missing observables are ``nan``."""

    omega_t: np.ndarray
    columns: dict[str, np.ndarray]
    source: str

    def rows(self):
        for i, wt in enumerate(self.omega_t):
            row = {"omega_t": float(wt)}
            for name in SERIES_COLUMNS[1:-1]:
                row[name] = float(self.columns[name][i])
            row["engine"] = self.source
            yield row

    def __len__(self):
        return len(self.omega_t)


OBSERVABLE_GROUPS = {
    "entropy": ("s_total", "s_field", "s_mol"),
    "s1": ("s1",),
    "fy": ("Fy_eq30", "Fy_eq31"),
    "n_photon": ("n_photon",),
}


def compute_series(
    blocks: list[DensityBlock],
    params: SystemParams,
    coeffs: DerivedCoefficients,
    source: str,
    observables=tuple(OBSERVABLE_GROUPS),
) -> ObservableSeries:
    """Evaluate the generic observables on each block."""
    n = len(blocks)
    cols = {name: np.full(n, np.nan) for name in SERIES_COLUMNS[1:-1]}
    wanted = set(observables)
    for i, blk in enumerate(blocks):
        rho_f = reduced_field(blk)
        rho_m = reduced_molecular(blk)
        diag = state_diagnostics(blk, eigen=False)
        cols["trace_err"][i] = diag["trace_err"]
        cols["purity_total"][i] = diag["purity_total"]
        if "entropy" in wanted:
            cols["s_total"][i] = 1.0 - diag["purity_total"]
            cols["s_field"][i] = linear_entropy(rho_f)
            cols["s_mol"][i] = linear_entropy(rho_m)
        if "s1" in wanted:
            cols["s1"][i] = quadrature_s1_generic(rho_f, blk.time, params.omega_0)
        if "fy" in wanted:
            cols["Fy_eq30"][i] = dipole_Fy_generic(rho_m, blk.time, params.omega_eg, coeffs.B_coeff, True)
            cols["Fy_eq31"][i] = dipole_Fy_generic(rho_m, blk.time, params.omega_eg, coeffs.B_coeff, False)
        if "n_photon" in wanted:
            cols["n_photon"][i] = mean_photon_number(rho_f)
    omega_t = np.array([b.time for b in blocks]) * params.omega_disp
    return ObservableSeries(omega_t, cols, source)


# ---------------------------------------------------------------------------
# Literal transcriptions of the printed closed forms. Photon summation indices
# are j, jp; x = |alpha|^2 e^{-2kt}; kap = 2 B^2 k'; E = e^{-2 B^2 k' t}.


def _poisson_weights(x: float) -> np.ndarray:
    """``x^j / j!`` up to the first term below ``POISSON_CUTOFF`` of the running total."""
    w = [1.0]
    total = 1.0
    j = 0
    while True:
        j += 1
        nxt = w[-1] * x / j
        if j > x and nxt < POISSON_CUTOFF * total:
            break
        w.append(nxt)
        total += nxt
    return np.array(w)


def _closed_form_setup(params, coeffs, t):
    Om = coeffs.A_coeff * params.omega_disp
    k = params.k_field
    bk = coeffs.B_squared * params.k_mol
    x = params.mean_photons * math.exp(-2.0 * k * t)
    w = _poisson_weights(x)
    j = np.arange(len(w))
    d = j[:, None] - j[None, :]  # j - jp
    ww = np.outer(w, w)
    return Om, k, bk, x, ww, d


def _safe_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    # 0/0 happens only for kap = 0 and j = jp, where the limit of each summand is 0
    out = np.zeros_like(num, dtype=float)
    nz = den != 0
    out[nz] = num[nz] / den[nz]
    return out


def entropy_closed_forms(params: SystemParams, coeffs: DerivedCoefficients, t: float):
    """Printed expressions for ``(s_total, s_field, s_mol)``, taken verbatim."""
    Om, k, bk, x, ww, d = _closed_form_setup(params, coeffs, t)
    kap = 2.0 * bk
    E = math.exp(-kap * t)
    G = float(gamma_of_t(params, coeffs, t))
    pref = math.exp(-2.0 * x)
    den = kap**2 + 4.0 * Om**2 * d**2
    ph = 2.0 * Om * d * t  # 2 A w (j - jp) t
    dn = -d  # jp - j

    cross22 = _safe_ratio(-(kap**2) * (E * np.cos(ph) - 1.0) + 4.0 * Om * bk * d * E * np.sin(ph), den)
    sq22 = _safe_ratio(kap**2 * (E * E - 2.0 * E * np.cos(ph) + 1.0), den)
    s_total = 0.25 * (
        1.0
        + E * E
        + 2.0 * math.exp(2.0 * G) * E
        + 2.0 * pref * np.sum(ww * cross22)
        + pref * np.sum(ww * sq22)
    )

    phn = 2.0 * Om * dn * t
    sq23 = _safe_ratio(kap**2 * (E * E - 2.0 * E * np.cos(phn) + 1.0), den)
    cross23 = _safe_ratio(
        -(kap**2) * (E * np.cos(phn) - 1.0) + 4.0 * Om**2 * bk * dn * E * np.sin(phn), den
    )
    c2 = math.cos(2.0 * Om * t)
    s_field = (
        1.0
        + E * E
        + 2.0 * E * math.exp(2.0 * x * (c2 - 1.0))
        + pref * np.sum(ww * sq23)
        + 2.0 * (E + 1.0) * pref * np.sum(ww * cross23)
    )

    s_mol = 0.25 * (
        E * E + 2.0 * math.exp(2.0 * G) * E * math.exp(x * (2.0 * c2 - 2.0)) + 4.0 + E * E - 4.0 * E
    )
    return float(s_total), float(s_field), float(s_mol)


def quadrature_s1_closed_form(params: SystemParams, coeffs: DerivedCoefficients, t: float) -> float:
    """Printed expression for ``s1``, verbatim (``alpha`` enters linearly, not as ``|alpha|``)."""
    Om = coeffs.A_coeff * params.omega_disp
    k = params.k_field
    bk = coeffs.B_squared * params.k_mol
    kap = 2.0 * bk
    E = math.exp(-kap * t)
    w0 = params.omega_0
    x = params.mean_photons * math.exp(-2.0 * k * t)
    w = _poisson_weights(x)
    j = np.arange(len(w))
    first = 2.0 * math.exp(-2.0 * x) * float(np.sum(w * j))

    den2 = kap**2 + 4.0 * Om**2 * 4.0
    c4, s4 = math.cos(4 * Om * t), math.sin(4 * Om * t)
    second = 2.0 * (
        E * x * math.cos(2 * (w0 - Om) * t)
        + x * math.cos(2 * (w0 + Om) * t) / den2 * (-(kap**2) * (E * c4 - 1.0) + 8 * Om**2 * bk * E * s4)
        + x * math.sin(2 * (w0 + Om) * t) / den2 * (-8 * Om**2 * bk * (E * c4 - 1.0) - kap**2 * E * s4)
    )

    den1 = kap**2 + 4.0 * Om**2
    c2, s2 = math.cos(2 * Om * t), math.sin(2 * Om * t)
    amp = params.alpha * math.exp(-k * t)
    third = 4.0 * (
        E * amp * math.cos((w0 - Om) * t)
        + amp * math.cos((w0 + Om) * t) / den1 * (-(kap**2) * (E * c2 - 1.0) + 4 * Om**2 * bk * E * s2)
        + amp * math.sin((w0 + Om) * t) / den1 * (-4 * Om**2 * bk * (E * c2 - 1.0) - kap**2 * E * s2)
    ) ** 2
    return float(np.real(first + second + third))


@dataclass(frozen=True)
class DipoleClosedForm:
    printed: float
    printed_with_sigma_z: float


def dipole_Fy_closed_form(params: SystemParams, coeffs: DerivedCoefficients, t: float) -> DipoleClosedForm:
    """Printed ``F_y`` expression, with and without the ``|<sigma_z>|`` term.

    ``<sigma_z> = e^{-2 B^2 k' t} - 1`` is the closed-form population imbalance.
    """
    return DipoleClosedForm(*_dipole_readings(params, coeffs, t, sign=-1.0))


def _dipole_readings(params, coeffs, t, sign):
    Om = coeffs.A_coeff * params.omega_disp
    k = params.k_field
    bk = coeffs.B_squared * params.k_mol
    x = params.mean_photons * math.exp(-2.0 * k * t)
    G = float(gamma_of_t(params, coeffs, t))
    th = float(theta_of_t(params, coeffs, t))
    mag = 0.5 * coeffs.B_coeff * math.exp(G) * math.exp(-bk * t) * math.exp(sign * x * (math.cos(2 * Om * t) - 1.0))
    val = 1.0 - 4.0 * (mag * math.sin(params.omega_eg * t + th - x * math.sin(2 * Om * t))) ** 2
    sz = abs(math.exp(-2.0 * bk * t) - 1.0)
    return val, val - sz


# ---------------------------------------------------------------------------
# Audit


@dataclass
class AuditEntry:
    equation: str
    quantity: str
    status: str
    max_abs_dev: float
    first_divergent_omega_t: float | None
    reading_devs: dict[str, float] = field(default_factory=dict)
    matched_readings: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "equation": self.equation,
            "quantity": self.quantity,
            "status": self.status,
            "max_abs_dev": self.max_abs_dev,
            "first_divergent_omega_t": self.first_divergent_omega_t,
            "reading_devs": dict(sorted(self.reading_devs.items())),
            "matched_readings": list(self.matched_readings),
        }


def _closed_form_readings(params, coeffs, t):
    """Each printed formula and a few alternative readings, keyed by equation tag."""
    s_tot, s_f, s_m = entropy_closed_forms(params, coeffs, t)
    dip = dipole_Fy_closed_form(params, coeffs, t)
    flip, flip_sz = _dipole_readings(params, coeffs, t, sign=1.0)
    return {
        "eq22": {"literal": s_tot, "one_minus": 1.0 - s_tot, "one_minus_quarter": 1.0 - 0.25 * s_tot},
        "eq23": {"literal": s_f, "one_minus": 1.0 - s_f, "one_minus_quarter": 1.0 - 0.25 * s_f},
        "eq24": {"literal": s_m, "one_minus": 1.0 - s_m, "one_minus_quarter": 1.0 - 0.25 * s_m},
        "eq28": {"literal": quadrature_s1_closed_form(params, coeffs, t)},
        "eq31": {
            "literal": dip.printed,
            "with_sigma_z": dip.printed_with_sigma_z,
            "overlap_sign_flipped": flip,
            "overlap_sign_flipped_with_sigma_z": flip_sz,
        },
    }


# equation tag -> (generic column it is compared with, columns for alternative readings)
AUDIT_TARGETS = {
    "eq22": ("s_total", {}),
    "eq23": ("s_field", {}),
    "eq24": ("s_mol", {}),
    "eq28": ("s1", {}),
    "eq31": ("Fy_eq31", {"with_sigma_z": "Fy_eq30", "overlap_sign_flipped_with_sigma_z": "Fy_eq30"}),
}


def audit_closed_forms(
    series: ObservableSeries,
    params: SystemParams,
    coeffs: DerivedCoefficients,
    tol: float = MATCH_TOLERANCE,
) -> list[AuditEntry]:
    """Compare every printed closed form with the generic series.

    An equation has status ``"match"`` when its literal reading agrees with the
    generic column to ``tol`` at every grid point; otherwise ``"discrepancy"``
    with the first divergent ``omega t``. Alternative readings that do match are
    listed, as evidence of where a typesetting slip sits.
    """
    times = series.omega_t / params.omega_disp
    readings = [_closed_form_readings(params, coeffs, t) for t in times]
    entries = []
    for eq, (col, alt_cols) in AUDIT_TARGETS.items():
        devs = {}
        first = None
        for name in readings[0][eq]:
            target = series.columns[alt_cols.get(name, col)]
            vals = np.array([r[eq][name] for r in readings])
            diff = np.abs(vals - target)
            devs[name] = float(np.nanmax(diff))
            if name == "literal":
                bad = np.nonzero(~(diff <= tol))[0]
                first = float(series.omega_t[bad[0]]) if len(bad) else None
        status = "match" if devs["literal"] <= tol else "discrepancy"
        matched = sorted(n for n, v in devs.items() if v <= tol)
        entries.append(AuditEntry(eq, col, status, devs["literal"], first, devs, matched))
    return entries
