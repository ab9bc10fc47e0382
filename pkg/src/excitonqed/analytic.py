"""Closed-form density blocks of the dispersive exciton-cavity system.

The initial state is ``(|e> + |g>)/sqrt(2) x |alpha>`` with ``|e> = |n, m>``
and ``|g> = |n-1, m+1>``. At time ``t`` each field block is built from
coherent-state outer products in the truncated Fock basis:

* ``rho_ee`` rotates as ``|alpha e^{-kt} e^{-iA w t}>`` and decays at ``2 B^2 k'``;
* ``rho_eg`` carries the coherence factor ``exp(i Theta + Gamma)``;
* ``rho_gg`` holds the surviving ground branch plus the population fed in
  from ``rho_ee`` by molecular decay.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import DerivedCoefficients, FockSpace, SystemParams, coherent_tail_mass, coherent_vector, TAIL_TOLERANCE
from .errors import TruncationTooSmall


@dataclass
class DensityBlock:
    """Field-space blocks of the total state at one time.

    ``rho_ee = <e|rho|e>``, ``rho_eg = <e|rho|g>``, ``rho_ge = <g|rho|e>`` and
    ``rho_gg = <g|rho|g>``, each a ``dim x dim`` complex array.
    """

    rho_ee: np.ndarray
    rho_eg: np.ndarray
    rho_ge: np.ndarray
    rho_gg: np.ndarray
    time: float = 0.0

    @property
    def dim(self) -> int:
        return self.rho_ee.shape[0]

    def as_stack(self) -> np.ndarray:
        return np.stack([self.rho_ee, self.rho_eg, self.rho_ge, self.rho_gg])

    @classmethod
    def from_stack(cls, stack: np.ndarray, time: float = 0.0) -> "DensityBlock":
        return cls(stack[0].copy(), stack[1].copy(), stack[2].copy(), stack[3].copy(), float(time))

    def __add__(self, other):
        return DensityBlock.from_stack(self.as_stack() + other.as_stack(), self.time)

    def __mul__(self, c):
        return DensityBlock.from_stack(c * self.as_stack(), self.time)

    __rmul__ = __mul__


@dataclass(frozen=True)
class PhaseFunctions:
    gamma_val: float
    theta_val: float
    time: float


def _rates(params: SystemParams, coeffs: DerivedCoefficients):
    Aw = coeffs.A_coeff * params.omega_disp
    return Aw, params.k_field, coeffs.B_squared * params.k_mol


def gamma_of_t(params: SystemParams, coeffs: DerivedCoefficients, t):
    """Log-magnitude damping of the ``rho_eg`` coherence (zero when ``k = 0``)."""
    Aw, k, _ = _rates(params, coeffs)
    t = np.asarray(t, dtype=float)
    nbar = params.mean_photons
    decay = np.exp(-2.0 * k * t)
    pref = nbar * k / (k * k + Aw * Aw)
    val = -nbar * (1.0 - decay) - pref * (
        decay * (k * np.cos(2 * Aw * t) - Aw * np.sin(2 * Aw * t)) - k
    )
    return val[()] if val.ndim == 0 else val


def theta_of_t(params: SystemParams, coeffs: DerivedCoefficients, t):
    """Phase of the ``rho_eg`` coherence; ``-A w t`` exactly when ``k = 0``."""
    Aw, k, _ = _rates(params, coeffs)
    t = np.asarray(t, dtype=float)
    nbar = params.mean_photons
    decay = np.exp(-2.0 * k * t)
    pref = nbar * k / (k * k + Aw * Aw)
    val = -Aw * t + pref * (decay * (k * np.sin(2 * Aw * t) + Aw * np.cos(2 * Aw * t)) - Aw)
    return val[()] if val.ndim == 0 else val


def phase_functions(params, coeffs, t: float) -> PhaseFunctions:
    return PhaseFunctions(float(gamma_of_t(params, coeffs, t)), float(theta_of_t(params, coeffs, t)), float(t))


def feed_factor(params: SystemParams, coeffs: DerivedCoefficients, dim: int, t: float) -> np.ndarray:
    """Per-element weight of population transferred into ``rho_gg`` by time ``t``.

    Element ``(j, jp)`` is ``g/(-g + 2i A w (jp - j)) * (exp(-g t) exp(2i A w (jp - j) t) - 1)``
    with ``g = 2 B^2 k'``. Photon indices are ``j, jp`` (never ``n``, which
    counts excited molecules).
    """
    Aw, _, bk = _rates(params, coeffs)
    gain = 2.0 * bk
    d = np.arange(dim)[None, :] - np.arange(dim)[:, None]  # jp - j
    fac = np.zeros((dim, dim), dtype=complex)
    diag = d == 0
    # j == jp: the ratio is exactly 1 - exp(-gain t), which is 0 for gain == 0
    fac[diag] = -np.expm1(-gain * t)
    off = ~diag
    rate = -gain + 2j * Aw * d[off]
    fac[off] = gain / rate * np.expm1(rate * t)
    return fac


def analytic_block(
    params: SystemParams,
    coeffs: DerivedCoefficients,
    space: FockSpace,
    t: float,
    tol: float = TAIL_TOLERANCE,
) -> DensityBlock:
    Aw, k, bk = _rates(params, coeffs)
    amp = params.alpha * np.exp(-k * t)
    v_e = coherent_vector(amp * np.exp(-1j * Aw * t), space, tol)
    v_g = coherent_vector(amp * np.exp(1j * Aw * t), space, tol)
    gam = gamma_of_t(params, coeffs, t)
    th = theta_of_t(params, coeffs, t)

    rho_ee = 0.5 * np.exp(-2.0 * bk * t) * np.outer(v_e, v_e.conj())
    rho_eg = 0.5 * np.exp(-bk * t + gam + 1j * th) * np.outer(v_e, v_g.conj())
    proj_g = np.outer(v_g, v_g.conj())
    rho_gg = 0.5 * proj_g * (1.0 + feed_factor(params, coeffs, space.dim, t))
    return DensityBlock(rho_ee, rho_eg, rho_eg.conj().T.copy(), rho_gg, float(t))


def initial_block(params: SystemParams, space: FockSpace, tol: float | None = TAIL_TOLERANCE) -> DensityBlock:
    """Product state ``(|e> + |g>)/sqrt(2) x |alpha>``; ``tol=None`` skips the tail check."""
    v = coherent_vector(params.alpha, space, np.inf if tol is None else tol)
    proj = 0.5 * np.outer(v, v.conj())
    return DensityBlock(proj.copy(), proj.copy(), proj.copy(), proj.copy(), 0.0)


def total_density(block: DensityBlock) -> np.ndarray:
    """Assemble ``[[rho_ee, rho_eg], [rho_ge, rho_gg]]`` (molecular index outermost)."""
    return np.block([[block.rho_ee, block.rho_eg], [block.rho_ge, block.rho_gg]])


def reduced_field(block: DensityBlock) -> np.ndarray:
    return block.rho_ee + block.rho_gg


def reduced_molecular(block: DensityBlock) -> np.ndarray:
    return np.array(
        [
            [np.trace(block.rho_ee), np.trace(block.rho_eg)],
            [np.trace(block.rho_ge), np.trace(block.rho_gg)],
        ]
    )


def _coherent_rows(amps: np.ndarray, dim: int) -> np.ndarray:
    """Truncated coherent-state amplitudes, one row per entry of ``amps``."""
    ratios = np.empty((amps.size, dim), dtype=complex)
    ratios[:, 0] = np.exp(-0.5 * np.abs(amps) ** 2)
    ratios[:, 1:] = amps[:, None] / np.sqrt(np.arange(1, dim))[None, :]
    return np.cumprod(ratios, axis=1)


def molecular_traces(
    params: SystemParams,
    coeffs: DerivedCoefficients,
    space: FockSpace,
    times,
    tol: float = TAIL_TOLERANCE,
) -> np.ndarray:
    """Reduced molecular states at many times, shape ``(len(times), 2, 2)``.

    Same numbers as ``reduced_molecular(analytic_block(...))`` but only the
    block traces are formed, so grids fine enough to resolve the ``pi/(A w)``
    revival windows at large ``A`` stay cheap.
    """
    tail = coherent_tail_mass(params.alpha, space.dim)
    if tail > tol:
        raise TruncationTooSmall(f"tail mass {tail:.3e} beyond dim={space.dim} exceeds {tol:.1e}")
    Aw, k, bk = _rates(params, coeffs)
    t = np.atleast_1d(np.asarray(times, dtype=float))
    amp = params.alpha * np.exp(-k * t)
    v_e = _coherent_rows(amp * np.exp(-1j * Aw * t), space.dim)
    v_g = _coherent_rows(amp * np.exp(1j * Aw * t), space.dim)
    norm_e = np.sum(np.abs(v_e) ** 2, axis=1)
    norm_g = np.sum(np.abs(v_g) ** 2, axis=1)
    overlap = np.sum(v_e * v_g.conj(), axis=1)
    out = np.empty((t.size, 2, 2), dtype=complex)
    out[:, 0, 0] = 0.5 * np.exp(-2.0 * bk * t) * norm_e
    out[:, 0, 1] = 0.5 * np.exp(-bk * t + gamma_of_t(params, coeffs, t) + 1j * theta_of_t(params, coeffs, t)) * overlap
    out[:, 1, 0] = out[:, 0, 1].conj()
    # diagonal feed weight is 1 - exp(-2 B^2 k' t)
    out[:, 1, 1] = 0.5 * norm_g * (1.0 - np.expm1(-2.0 * bk * t))
    return out
