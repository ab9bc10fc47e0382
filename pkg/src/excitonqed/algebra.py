"""System parameters, q-deformed coefficients and truncated Fock-space operators.

The molecular state space is the two-state subspace spanned by
``|n, m>`` (``n`` excited molecules) and ``|n-1, m+1>``; the q-deformed
exciton operator acts on it only through the matrix element ``B``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammainc

from .errors import InvalidParams, MissingBareCouplings, TruncationTooSmall

TAIL_TOLERANCE = 1e-12
DISPERSIVE_FACTOR = 10.0


@dataclass(frozen=True)
class SystemParams:
    """Physical constants of one run.

    Rates and frequencies are absolute (angular-frequency units). ``omega_disp``
    defaults to ``g**2 / delta`` when both bare couplings are given and to 1
    otherwise; ``omega_0`` and ``omega_eg`` default to ``10 * omega_disp`` and
    ``omega_0 + 100 * omega_disp``. These two only enter oscillating phase
    factors of the quadrature and dipole operators.
    """

    N_total: int
    n_excited: int
    omega_disp: float | None = None
    k_field: float = 0.0
    k_mol: float = 0.0
    alpha: complex = 1.0
    omega_0: float | None = None
    omega_eg: float | None = None
    g_coupling: float | None = None
    delta_detuning: float | None = None

    def __post_init__(self):
        _check_counts(self.N_total, self.n_excited)
        g, delta = self.g_coupling, self.delta_detuning
        if delta is not None and delta == 0:
            raise InvalidParams("delta_detuning must be nonzero")
        omega = self.omega_disp
        if omega is None:
            omega = g**2 / delta if (g is not None and delta is not None) else 1.0
        elif g is not None and delta is not None:
            ref = g**2 / delta
            if abs(omega - ref) > 1e-12 * abs(ref):
                raise InvalidParams(
                    f"omega_disp={omega!r} inconsistent with g**2/delta={ref!r}"
                )
        if not (math.isfinite(omega) and omega > 0):
            raise InvalidParams(f"omega_disp must be positive, got {omega!r}")
        if self.k_field < 0 or self.k_mol < 0:
            raise InvalidParams("dissipation constants k_field and k_mol must be >= 0")
        omega_0 = 10.0 * omega if self.omega_0 is None else float(self.omega_0)
        omega_eg = omega_0 + 100.0 * omega if self.omega_eg is None else float(self.omega_eg)
        if omega_0 < 0 or omega_eg < 0:
            raise InvalidParams("omega_0 and omega_eg must be >= 0")
        object.__setattr__(self, "omega_disp", float(omega))
        object.__setattr__(self, "omega_0", omega_0)
        object.__setattr__(self, "omega_eg", omega_eg)
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "k_field", float(self.k_field))
        object.__setattr__(self, "k_mol", float(self.k_mol))

    @property
    def m_ground(self) -> int:
        return self.N_total - self.n_excited

    @property
    def mean_photons(self) -> float:
        return abs(self.alpha) ** 2


@dataclass(frozen=True)
class DerivedCoefficients:
    q_param: float
    A_coeff: int
    B_coeff: float

    @property
    def B_squared(self) -> float:
        return self.B_coeff**2


@dataclass(frozen=True)
class FockSpace:
    """Photon-number basis ``|0> ... |dim-1>``."""

    dim: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise InvalidParams(f"Fock dimension must be an integer >= 2, got {self.dim!r}")


@dataclass(frozen=True)
class DispersiveValidity:
    ratio: float
    bound: float
    factor: float = DISPERSIVE_FACTOR
    valid: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "valid", self.ratio >= self.factor * self.bound)


def _check_counts(N_total, n_excited):
    if int(N_total) != N_total or N_total < 1:
        raise InvalidParams(f"N_total must be a positive integer, got {N_total!r}")
    if int(n_excited) != n_excited or n_excited < 1:
        raise InvalidParams(f"n_excited must be an integer >= 1, got {n_excited!r}")
    if n_excited > N_total:
        raise InvalidParams("invalid config: n_excited > N_total")


def derive_coefficients(params: SystemParams) -> DerivedCoefficients:
    N, n = params.N_total, params.n_excited
    _check_counts(N, n)
    A = n * (N - n + 1)
    return DerivedCoefficients(q_param=1.0 - 2.0 / N, A_coeff=A, B_coeff=math.sqrt(A / N))


def default_fock_dim(alpha: complex) -> int:
    nbar = abs(alpha) ** 2
    return math.ceil(nbar + 10.0 * math.sqrt(nbar + 1.0)) + 5


def coherent_tail_mass(alpha: complex, dim: int) -> float:
    """Poisson probability of finding ``dim`` or more photons in ``|alpha>``."""
    nbar = abs(alpha) ** 2
    if nbar == 0.0:
        return 0.0
    return float(gammainc(dim, nbar))


def annihilation_operator(space: FockSpace) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, space.dim, dtype=float)), 1).astype(complex)


def number_operator(space: FockSpace) -> np.ndarray:
    return np.diag(np.arange(space.dim, dtype=float)).astype(complex)


def coherent_vector(alpha: complex, space: FockSpace, tol: float = TAIL_TOLERANCE) -> np.ndarray:
    """Fock amplitudes of the Glauber state ``|alpha>`` truncated to ``space``.

    Raises:
        TruncationTooSmall: if the discarded Poisson tail exceeds ``tol``.
    """
    tail = coherent_tail_mass(alpha, space.dim)
    if tail > tol:
        raise TruncationTooSmall(
            f"tail mass {tail:.3e} beyond dim={space.dim} exceeds {tol:.1e} for |alpha|={abs(alpha):g}"
        )
    alpha = complex(alpha)
    c = np.empty(space.dim, dtype=complex)
    c[0] = math.exp(-0.5 * abs(alpha) ** 2)
    for j in range(1, space.dim):
        c[j] = c[j - 1] * alpha / math.sqrt(j)
    return c


def check_dispersive_validity(params: SystemParams, factor: float = DISPERSIVE_FACTOR) -> DispersiveValidity:
    """Compare ``|delta|/g`` against ``sqrt(n_ph + 1)`` with ``n_ph = |alpha|^2``.

    The large-detuning condition is reported, never enforced: a violation only
    sets ``valid=False``.
    """
    g, delta = params.g_coupling, params.delta_detuning
    if g is None or delta is None:
        raise MissingBareCouplings("dispersive validity unchecked: g and delta are required")
    return DispersiveValidity(
        ratio=abs(delta) / abs(g),
        bound=math.sqrt(params.mean_photons + 1.0),
        factor=factor,
    )
