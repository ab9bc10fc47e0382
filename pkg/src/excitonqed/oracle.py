"""Numerical integration of the four coupled field-block master equations.

Every block obeys ``d rho/dt = (c0 + cM M + cP P + 2k J) rho`` with the
superoperators ``M = a^dag a .``, ``P = . a^dag a`` and ``J = a . a^dag``;
``rho_gg`` additionally receives ``2 B^2 k' rho_ee``. The coefficient table in
:func:`generator_coefficients` is the only place these equations are written
down; both integration frames read from it.

Two fixed-step RK4 frames are available:

``"interaction"`` (default)
    Works in the Fock basis, where ``M`` and ``P`` are element-wise
    multiplications. The element-local part of the generator (``c0``, ``M``,
    ``P`` and the ee -> gg feed, a 2x2 lower-triangular system per matrix
    element) is propagated exactly with ``scipy.linalg.expm``; RK4 integrates
    only the ``J`` coupling (integrating-factor / Lawson RK4). The stiff
    ``A w (j +- j')`` phases therefore never limit the step.
``"lab"``
    Classical RK4 on :func:`block_derivative`. Needs ``step << 1/(A w dim)``.
"""

from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.linalg import expm

from .algebra import DerivedCoefficients, FockSpace, SystemParams, annihilation_operator, default_fock_dim
from .analytic import DensityBlock
from .errors import DimensionMismatch, InvalidParams, StepTooLarge, TruncationLeak

log = logging.getLogger(__name__)

BLOCKS = ("ee", "eg", "ge", "gg")
LEAK_TOLERANCE = 1e-8
STEP_TOLERANCE = 1e-6


class Superop(enum.Enum):
    """Bosonic superoperators acting on a field operator."""

    M = "M"  # left-multiply by a^dag a
    P = "P"  # right-multiply by a^dag a
    J = "J"  # sandwich a . a^dag

    def apply(self, rho: np.ndarray) -> np.ndarray:
        a = annihilation_operator(FockSpace(rho.shape[0]))
        num = a.conj().T @ a
        if self is Superop.M:
            return num @ rho
        if self is Superop.P:
            return rho @ num
        return a @ rho @ a.conj().T


@dataclass(frozen=True)
class IntegratorConfig:
    """Settings for :func:`integrate`.

    ``step`` is an upper bound: the actual step divides the output spacing
    ``t_max / n_out`` evenly. ``n_out=None`` emits a block after every step.
    """

    step: float = 1e-3
    t_max: float = 3.0
    fock_dim: int | None = None
    n_out: int | None = None
    method: str = "rk4"
    frame: str = "interaction"
    certify: bool = True
    leak_tolerance: float = LEAK_TOLERANCE
    step_tolerance: float = STEP_TOLERANCE

    def __post_init__(self):
        if not (self.step > 0 and math.isfinite(self.step)):
            raise InvalidParams(f"step must be positive, got {self.step!r}")
        if not self.t_max > 0:
            raise InvalidParams(f"t_max must be positive, got {self.t_max!r}")
        if self.method != "rk4":
            raise InvalidParams(f"unknown method {self.method!r}; only fixed-step 'rk4' is supported")
        if self.frame not in ("interaction", "lab"):
            raise InvalidParams(f"unknown frame {self.frame!r}")
        if self.n_out is not None and self.n_out < 1:
            raise InvalidParams("n_out must be >= 1")


@dataclass(frozen=True)
class ConvergenceCertificate:
    step: float
    half_step: float
    max_deviation: float
    threshold: float
    passed: bool

    def as_dict(self) -> dict:
        return {
            "step": self.step,
            "half_step": self.half_step,
            "max_deviation": self.max_deviation,
            "threshold": self.threshold,
            "passed": self.passed,
        }


@dataclass
class IntegrationResult:
    times: np.ndarray
    blocks: list[DensityBlock]
    step: float
    frame: str
    certificate: ConvergenceCertificate | None = None
    max_leak: float = 0.0
    warnings: list[str] = field(default_factory=list)


def generator_coefficients(params: SystemParams, coeffs: DerivedCoefficients) -> dict:
    """Coefficients ``(c0, cM, cP)`` of each block generator plus the feed rate.

    ee: ``i A w (P - M) - 2 B^2 k' + k (2J - M - P)``
    eg: ``-i A w (M + P + 1) - B^2 k' + k (2J - M - P)``
    ge: ``i A w (M + P + 1) - B^2 k' + k (2J - M - P)``
    gg: ``i A w (M - P) + k (2J - M - P) + 2 B^2 k' rho_ee``
    """
    iAw = 1j * coeffs.A_coeff * params.omega_disp
    k = params.k_field
    bk = coeffs.B_squared * params.k_mol
    return {
        "ee": (-2.0 * bk, -iAw - k, iAw - k),
        "eg": (-iAw - bk, -iAw - k, -iAw - k),
        "ge": (iAw - bk, iAw - k, iAw - k),
        "gg": (0.0, iAw - k, -iAw - k),
        "feed": 2.0 * bk,
        "k": k,
    }


def _check_dims(block: DensityBlock):
    shapes = {b.shape for b in (block.rho_ee, block.rho_eg, block.rho_ge, block.rho_gg)}
    if len(shapes) != 1:
        raise DimensionMismatch(f"blocks have differing shapes {sorted(shapes)}")
    (shape,) = shapes
    if len(shape) != 2 or shape[0] != shape[1]:
        raise DimensionMismatch(f"blocks must be square, got {shape}")


def block_derivative(block: DensityBlock, params: SystemParams, coeffs: DerivedCoefficients) -> DensityBlock:
    """Right-hand side of the block master equations, via matrix superoperators."""
    _check_dims(block)
    gen = generator_coefficients(params, coeffs)
    k = gen["k"]
    out = []
    for name, rho in zip(BLOCKS, (block.rho_ee, block.rho_eg, block.rho_ge, block.rho_gg)):
        c0, cM, cP = gen[name]
        d = c0 * rho + cM * Superop.M.apply(rho) + cP * Superop.P.apply(rho) + 2.0 * k * Superop.J.apply(rho)
        out.append(d)
    out[3] = out[3] + gen["feed"] * block.rho_ee
    return DensityBlock(*out, time=block.time)


class _InteractionStepper:
    """Integrating-factor RK4 for a fixed step ``h``."""

    def __init__(self, params, coeffs, dim, h):
        gen = generator_coefficients(params, coeffs)
        j = np.arange(dim)[:, None]
        jp = np.arange(dim)[None, :]
        diag = np.stack([c0 + cM * j + cP * jp for c0, cM, cP in (gen[b] for b in BLOCKS)])
        feed = gen["feed"]
        sq = np.sqrt(np.arange(1, dim, dtype=float))
        self.jw = (2.0 * gen["k"] * np.outer(sq, sq)).astype(complex)
        self.h = h
        self.half = self._propagator(diag, feed, 0.5 * h)
        self.full = self._propagator(diag, feed, h)
        self._work = None

    @staticmethod
    def _propagator(diag, feed, tau):
        # exact exp of the element-local generator; (ee, gg) form a 2x2 triangular system
        gen2 = np.zeros(diag.shape[1:] + (2, 2), dtype=complex)
        gen2[..., 0, 0] = diag[0]
        gen2[..., 1, 0] = feed
        gen2[..., 1, 1] = diag[3]
        e2 = expm(gen2 * tau)
        scale = np.exp(diag * tau)
        scale[0] = e2[..., 0, 0]
        scale[3] = e2[..., 1, 1]
        return np.ascontiguousarray(scale), np.ascontiguousarray(e2[..., 1, 0])

    @staticmethod
    def _apply(prop, s):
        scale, cross = prop
        out = scale * s
        out[3] += cross * s[0]
        return out

    def _coupling(self, s):
        out = np.zeros_like(s)
        out[:, :-1, :-1] = self.jw * s[:, 1:, 1:]
        return out

    def step_reference(self, s):
        """Plain numpy version of :meth:`step` (slow, kept for testing)."""
        h, H, F = self.h, self.half, self.full
        k1 = self._coupling(s)
        k2 = self._coupling(self._apply(H, s + 0.5 * h * k1))
        k3 = self._coupling(self._apply(H, s) + 0.5 * h * k2)
        k4 = self._coupling(self._apply(F, s) + h * self._apply(H, k3))
        return self._apply(F, s + (h / 6.0) * k1) + (h / 6.0) * (2.0 * self._apply(H, k2 + k3) + k4)

    def step(self, s):
        out = np.empty_like(s)
        if self._work is None or self._work.shape[1:] != s.shape:
            self._work = np.zeros((5,) + s.shape, dtype=complex)
        _lawson_step(s, out, self.half[0], self.half[1], self.full[0], self.full[1], self.jw, self.h, self._work)
        return out


@numba.njit(cache=True)
def _couple(src, dst, jw):
    nb, d, _ = src.shape
    for b in range(nb):
        for i in range(d - 1):
            for j in range(d - 1):
                dst[b, i, j] = jw[i, j] * src[b, i + 1, j + 1]


@numba.njit(cache=True)
def _lawson_step(s, out, hs, hc, fs, fc, jw, h, work):
    # fused form of _InteractionStepper.step_reference.
    # work[:4] holds k1..k4, whose last row and column are never written (stay 0)
    nb, d, _ = s.shape
    k1, k2, k3, k4, tmp = work[0], work[1], work[2], work[3], work[4]
    c = h / 6.0
    _couple(s, k1, jw)
    # k2 = C(H(s + h/2 k1))
    for b in range(nb):
        for i in range(d):
            for j in range(d):
                tmp[b, i, j] = hs[b, i, j] * (s[b, i, j] + 0.5 * h * k1[b, i, j])
    for i in range(d):
        for j in range(d):
            tmp[3, i, j] += hc[i, j] * (s[0, i, j] + 0.5 * h * k1[0, i, j])
    _couple(tmp, k2, jw)
    # k3 = C(H s + h/2 k2)
    for b in range(nb):
        for i in range(d):
            for j in range(d):
                tmp[b, i, j] = hs[b, i, j] * s[b, i, j] + 0.5 * h * k2[b, i, j]
    for i in range(d):
        for j in range(d):
            tmp[3, i, j] += hc[i, j] * s[0, i, j]
    _couple(tmp, k3, jw)
    # k4 = C(F s + h H k3)
    for b in range(nb):
        for i in range(d):
            for j in range(d):
                tmp[b, i, j] = fs[b, i, j] * s[b, i, j] + h * hs[b, i, j] * k3[b, i, j]
    for i in range(d):
        for j in range(d):
            tmp[3, i, j] += fc[i, j] * s[0, i, j] + h * hc[i, j] * k3[0, i, j]
    _couple(tmp, k4, jw)
    # s_new = F(s + h/6 k1) + h/6 (2 H(k2 + k3) + k4)
    for b in range(nb):
        for i in range(d):
            for j in range(d):
                out[b, i, j] = fs[b, i, j] * (s[b, i, j] + c * k1[b, i, j]) + c * (
                    2.0 * hs[b, i, j] * (k2[b, i, j] + k3[b, i, j]) + k4[b, i, j]
                )
    for i in range(d):
        for j in range(d):
            out[3, i, j] += fc[i, j] * (s[0, i, j] + c * k1[0, i, j]) + 2.0 * c * hc[i, j] * (k2[0, i, j] + k3[0, i, j])


class _LabStepper:
    """Classical RK4 on the block equations in the lab frame."""

    def __init__(self, params, coeffs, dim, h):
        gen = generator_coefficients(params, coeffs)
        self.coef = [gen[b] for b in BLOCKS]
        self.feed = gen["feed"]
        self.k = gen["k"]
        a = annihilation_operator(FockSpace(dim))
        self.a, self.ad = a, a.conj().T
        self.num = np.real(np.diag(self.ad @ a))
        self.h = h

    def rhs(self, s):
        n = self.num
        out = np.empty_like(s)
        for i, (c0, cM, cP) in enumerate(self.coef):
            r = s[i]
            out[i] = c0 * r + cM * n[:, None] * r + cP * r * n[None, :] + 2.0 * self.k * (self.a @ r @ self.ad)
        out[3] += self.feed * s[0]
        return out

    def step(self, s):
        h = self.h
        k1 = self.rhs(s)
        k2 = self.rhs(s + 0.5 * h * k1)
        k3 = self.rhs(s + 0.5 * h * k2)
        k4 = self.rhs(s + h * k3)
        return s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _top_population(s: np.ndarray) -> float:
    field_diag = np.real(np.diagonal(s[0]) + np.diagonal(s[3]))
    return float(np.abs(field_diag[-2:]).sum())


def _grid(cfg: IntegratorConfig):
    n_out = cfg.n_out if cfg.n_out is not None else max(1, round(cfg.t_max / cfg.step))
    spacing = cfg.t_max / n_out
    sub = max(1, math.ceil(spacing / cfg.step * (1 - 1e-12)))
    return n_out, sub, spacing / sub


def _run(initial: DensityBlock, params, coeffs, cfg: IntegratorConfig, n_out: int, sub: int, h: float):
    dim = initial.dim
    stepper_cls = _InteractionStepper if cfg.frame == "interaction" else _LabStepper
    stepper = stepper_cls(params, coeffs, dim, h)
    s = initial.as_stack().astype(complex)
    t0 = initial.time
    out = [s.copy()]
    max_leak = _top_population(s)
    for i in range(1, n_out + 1):
        for _ in range(sub):
            s = stepper.step(s)
        max_leak = max(max_leak, _top_population(s))
        out.append(s.copy())
        if max_leak > cfg.leak_tolerance:
            raise TruncationLeak(max_leak, dim, t0 + i * sub * h)
    times = t0 + np.arange(n_out + 1) * (sub * h)
    return times, out, max_leak


def integrate(
    initial: DensityBlock,
    params: SystemParams,
    coeffs: DerivedCoefficients,
    cfg: IntegratorConfig | None = None,
) -> IntegrationResult:
    """Propagate ``initial`` over ``[t0, t0 + t_max]`` with fixed-step RK4.

    Raises:
        TruncationLeak: top two Fock levels carry more than ``cfg.leak_tolerance``.
        StepTooLarge: a rerun at half the step deviates by more than
            ``cfg.step_tolerance`` (only when ``cfg.certify``).
    """
    cfg = cfg or IntegratorConfig()
    _check_dims(initial)
    if cfg.fock_dim is not None and cfg.fock_dim != initial.dim:
        raise DimensionMismatch(f"initial block has dim {initial.dim}, config asks for {cfg.fock_dim}")
    n_out, sub, h = _grid(cfg)
    notes = []
    if cfg.frame == "lab":
        bound = 0.01 / (coeffs.A_coeff * params.omega_disp)
        if h > bound:
            msg = f"lab-frame step {h:g} exceeds recommended 0.01/(A w) = {bound:g}"
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
            notes.append(msg)

    times, states, max_leak = _run(initial, params, coeffs, cfg, n_out, sub, h)
    result = IntegrationResult(
        times=times,
        blocks=[DensityBlock.from_stack(s, t) for s, t in zip(states, times)],
        step=h,
        frame=cfg.frame,
        max_leak=max_leak,
        warnings=notes,
    )
    if cfg.certify:
        _, fine, _ = _run(initial, params, coeffs, cfg, n_out, 2 * sub, 0.5 * h)
        dev = max(float(np.abs(a - b).max()) for a, b in zip(states, fine))
        cert = ConvergenceCertificate(h, 0.5 * h, dev, cfg.step_tolerance, dev <= cfg.step_tolerance)
        result.certificate = cert
        log.info("step-halving certificate: step=%g deviation=%.3e", h, dev)
        if not cert.passed:
            err = StepTooLarge(cert)
            err.result = result
            raise err
    return result


def integrate_from_params(params: SystemParams, coeffs: DerivedCoefficients, cfg: IntegratorConfig | None = None):
    """Integrate from the standard product initial state."""
    from .analytic import initial_block

    cfg = cfg or IntegratorConfig()
    dim = cfg.fock_dim or default_fock_dim(params.alpha)
    return integrate(initial_block(params, FockSpace(dim), tol=None), params, coeffs, cfg)
