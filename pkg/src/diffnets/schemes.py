"""Explicit, Du Fort-Frankel, FSI and implicit fixed-point diffusion schemes."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DimensionError, NumericalError
from .flux import FluxFunction, FluxKind, Penaliser
from .signal import (
    KernelBank,
    SignalBundle,
    conv,
    conv_adjoint,
    gershgorin_bound,
    spectral_norm,
)


class StabilityMode(str, enum.Enum):
    SPECTRAL = "spectral"
    GERSHGORIN = "gershgorin"


@dataclass(frozen=True)
class SchemeConfig:
    tau: float
    flux: FluxFunction = field(default_factory=lambda: FluxFunction(FluxKind.LINEAR))
    alpha: float = 1.0
    cycle_length: int = 1

    def __post_init__(self):
        if not self.tau >= 0:
            raise ConfigurationError(f"tau must be nonnegative, got {self.tau}")
        if self.cycle_length < 1:
            raise ConfigurationError("cycle length must be >= 1")
        if not self.alpha > 0:
            raise ConfigurationError("alpha must be positive")


@dataclass(frozen=True)
class StabilityReport:
    spectral_norm_sq: float
    lipschitz: float
    tau_max: float
    alpha_min: float


# --------------------------------------------------------------------------
# array level


def diffusion_term(x: np.ndarray, taps: np.ndarray, flux: FluxFunction) -> np.ndarray:
    """K^T Phi(K x)."""
    return conv_adjoint(flux.phi(conv(x, taps)), taps)


def explicit(x: np.ndarray, taps: np.ndarray, flux: FluxFunction, tau: float) -> np.ndarray:
    return x - tau * diffusion_term(x, taps, flux)


def df_weights(tau: float, alpha: float) -> tuple[float, float]:
    a = 4.0 * tau * alpha / (1.0 + 2.0 * tau * alpha)
    return a, 1.0 - a


def dufort_frankel(x, x_prev, taps, flux, tau, alpha):
    a, b = df_weights(tau, alpha)
    return a * (x - diffusion_term(x, taps, flux) / (2.0 * alpha)) + b * x_prev


def fsi_weights(cycle_length: int) -> np.ndarray:
    ell = np.arange(cycle_length, dtype=np.float64)
    return (4.0 * ell + 2.0) / (2.0 * ell + 3.0)


def fsi(x, taps, flux, tau, weights):
    prev, cur = x, x
    for w in weights:
        prev, cur = cur, w * explicit(cur, taps, flux, tau) + (1.0 - w) * prev
    return cur


def implicit(x, taps, flux, tau, cycle_length, blowup=1e6):
    limit = blowup * max(np.linalg.norm(x), np.finfo(float).tiny)
    it = x
    for _ in range(cycle_length):
        it = x - tau * diffusion_term(it, taps, flux)
        nrm = np.linalg.norm(it)
        if not np.isfinite(nrm) or nrm > limit:
            raise NumericalError(
                "fixed-point iteration diverged; tau too large for a contraction"
            )
    return it


def _finite(x: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise NumericalError(f"{what} produced non-finite values")
    return x


# --------------------------------------------------------------------------
# public operations


def _check(u: SignalBundle, K: KernelBank):
    if not K.is_square:
        raise DimensionError("symmetric schemes need a square kernel bank")
    if u.channels != K.c_in:
        raise DimensionError(f"signal has {u.channels} channels, kernel expects {K.c_in}")


def explicit_step(u: SignalBundle, K: KernelBank, cfg: SchemeConfig) -> SignalBundle:
    _check(u, K)
    out = explicit(u.data, K.taps, cfg.flux, cfg.tau)
    return SignalBundle(_finite(out, "explicit step"), u.h)


def dufort_frankel_step(
    u_k: SignalBundle, u_km1: SignalBundle, K: KernelBank, cfg: SchemeConfig
) -> SignalBundle:
    _check(u_k, K)
    if u_k.data.shape != u_km1.data.shape:
        raise DimensionError("both time levels must have the same shape")
    out = dufort_frankel(u_k.data, u_km1.data, K.taps, cfg.flux, cfg.tau, cfg.alpha)
    return SignalBundle(_finite(out, "Du Fort-Frankel step"), u_k.h)


def fsi_cycle(u: SignalBundle, K: KernelBank, cfg: SchemeConfig, weights=None) -> SignalBundle:
    """One FSI cycle; ``weights`` overrides the fixed extrapolation sequence."""
    _check(u, K)
    w = fsi_weights(cfg.cycle_length) if weights is None else np.asarray(weights, float)
    out = fsi(u.data, K.taps, cfg.flux, cfg.tau, w)
    return SignalBundle(_finite(out, "FSI cycle"), u.h)


def implicit_fixed_point(u: SignalBundle, K: KernelBank, cfg: SchemeConfig) -> SignalBundle:
    _check(u, K)
    out = implicit(u.data, K.taps, cfg.flux, cfg.tau, cfg.cycle_length)
    return SignalBundle(out, u.h)


def df_multistep_eigenvalues(gamma: float, tau: float, alpha: float) -> tuple[complex, complex]:
    """Roots of mu^2 - gamma mu - (1 - 2 tau alpha)/(1 + 2 tau alpha)."""
    if not (tau > 0 and alpha > 0):
        raise ConfigurationError("tau and alpha must be positive")
    c = (1.0 - 2.0 * tau * alpha) / (1.0 + 2.0 * tau * alpha)
    root = np.lib.scimath.sqrt(gamma * gamma / 4.0 + c)
    return complex(gamma / 2.0 + root), complex(gamma / 2.0 - root)


def df_gamma(lam, tau: float, alpha: float):
    """Eigenvalue of Q for an eigenvalue ``lam`` of A = K^T G K."""
    d = 1.0 + 2.0 * tau * alpha
    return 4.0 * tau * alpha / d - 2.0 * tau / d * np.asarray(lam)


def operator_norm_sq(K: KernelBank, n: int, mode: StabilityMode = StabilityMode.SPECTRAL) -> float:
    if StabilityMode(mode) is StabilityMode.GERSHGORIN:
        return gershgorin_bound(K) ** 2
    return spectral_norm(K, n) ** 2


def report_from(norm_sq: float, lipschitz: float) -> StabilityReport:
    rho = lipschitz * norm_sq
    tau_max = math.inf if rho == 0 else 2.0 / rho
    return StabilityReport(norm_sq, lipschitz, tau_max, rho / 4.0)


def stability_bound(
    K: KernelBank, n: int, f: FluxFunction, mode: StabilityMode = StabilityMode.SPECTRAL
) -> StabilityReport:
    return report_from(operator_norm_sq(K, n, mode), f.lipschitz)


def gershgorin_rescale(K: KernelBank) -> KernelBank:
    """Rescale so that ||K||_2 <= 1 holds for every signal length.

    Each C x C block is divided by its own row/column-sum bound and the
    bank by sqrt(C).  For C > 1 that alone does not bound the norm of the
    whole block operator, so a final pass divides by the remaining bound.
    """
    if not K.is_square:
        raise DimensionError("rescaling needs a square kernel bank")
    if not np.any(K.taps):
        return K
    c = K.c_out
    taps = np.array(K.taps)
    for o in range(c):
        for i in range(c):
            b = gershgorin_bound(KernelBank(taps[o:o + 1, i:i + 1]))
            if b > 0:
                taps[o, i] /= b
    taps /= math.sqrt(c)
    rest = gershgorin_bound(KernelBank(taps))
    if rest > 1.0:
        taps /= rest
    return KernelBank(taps, K.h)


def energy_eval(u: SignalBundle, K: KernelBank, p: Penaliser) -> float:
    """h * sum_i Psi((K u)_i^2)."""
    if u.channels != K.c_in:
        raise DimensionError("channel mismatch")
    ku = conv(u.data, K.taps)
    return float(u.h * np.sum(p(ku * ku)))


def run_scheme(
    x: np.ndarray, taps: np.ndarray, cfg: SchemeConfig, scheme: str, steps: int
) -> np.ndarray:
    """Advance a batch (..., C, N) by ``steps`` time levels (cycles for fsi/implicit).

    The Du Fort-Frankel start level is one explicit step.
    """
    if steps < 0:
        raise ConfigurationError("steps must be >= 0")
    f, tau = cfg.flux, cfg.tau
    # divergence is reported by _finite below
    with np.errstate(over="ignore", invalid="ignore"):
        if scheme == "explicit":
            for _ in range(steps):
                x = explicit(x, taps, f, tau)
        elif scheme == "dff":
            prev = x
            if steps > 0:
                x = explicit(x, taps, f, tau)
            for _ in range(steps - 1):
                prev, x = x, dufort_frankel(x, prev, taps, f, tau, cfg.alpha)
        elif scheme == "fsi":
            w = fsi_weights(cfg.cycle_length)
            for _ in range(steps):
                x = fsi(x, taps, f, tau, w)
        elif scheme == "implicit":
            for _ in range(steps):
                x = implicit(x, taps, f, tau, cfg.cycle_length)
        else:
            raise ConfigurationError(f"unknown scheme {scheme!r}")
    return _finite(x, scheme)
