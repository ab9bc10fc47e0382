import numpy as np
import pytest

from excitonqed.algebra import FockSpace, SystemParams, derive_coefficients


def make_params(N=10, n=5, k=0.05, kp=0.05, alpha=1.0, **kw):
    return SystemParams(N_total=N, n_excited=n, k_field=k, k_mol=kp, alpha=alpha, **kw)


@pytest.fixture
def fig1a():
    p = make_params()
    return p, derive_coefficients(p)


@pytest.fixture
def space25():
    return FockSpace(25)


def random_state(rng, dim, rank=3):
    """Random density matrix on the 2*dim total space, split into field blocks."""
    psi = rng.normal(size=(2 * dim, rank)) + 1j * rng.normal(size=(2 * dim, rank))
    # keep the high Fock levels empty so truncation leak checks stay quiet
    psi[dim - 4 : dim] = 0
    psi[2 * dim - 4 :] = 0
    rho = psi @ psi.conj().T
    rho /= np.trace(rho)
    return rho
