"""Diffusivities, flux functions and penalisers used as activations."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedKindError

LAMBDA_MIN = 1e-4


class FluxKind(str, enum.Enum):
    LINEAR = "linear"
    CHARBONNIER = "charbonnier"
    PERONA_MALIK = "pm"
    RELU = "relu"

    @property
    def has_lambda(self) -> bool:
        return self in (FluxKind.CHARBONNIER, FluxKind.PERONA_MALIK)

    @property
    def is_diffusive(self) -> bool:
        return self is not FluxKind.RELU


@dataclass(frozen=True)
class FluxFunction:
    """Flux Phi(s) = g(s^2) s with contrast parameter ``lam``."""

    kind: FluxKind
    lam: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", FluxKind(self.kind))
        if self.kind.has_lambda and not self.lam > 0:
            raise ValueError(f"contrast parameter must be positive, got {self.lam}")

    def with_lambda(self, lam: float) -> FluxFunction:
        return FluxFunction(self.kind, lam)

    # vectorised evaluations ------------------------------------------------

    def g(self, s2):
        s2 = np.asarray(s2, dtype=np.float64)
        if self.kind is FluxKind.LINEAR:
            return np.ones_like(s2)
        if self.kind is FluxKind.CHARBONNIER:
            return 1.0 / np.sqrt(1.0 + s2 / self.lam**2)
        if self.kind is FluxKind.PERONA_MALIK:
            return 1.0 / (1.0 + s2 / self.lam**2)
        raise UnsupportedKindError("ReLU has no diffusivity")

    def phi(self, s):
        s = np.asarray(s, dtype=np.float64)
        if self.kind is FluxKind.RELU:
            return np.maximum(s, 0.0)
        if self.kind is FluxKind.LINEAR:
            return s.copy()
        return self.g(s * s) * s

    def dphi(self, s):
        """d Phi / d s."""
        s = np.asarray(s, dtype=np.float64)
        if self.kind is FluxKind.RELU:
            return (s > 0).astype(np.float64)
        if self.kind is FluxKind.LINEAR:
            return np.ones_like(s)
        q = 1.0 + s * s / self.lam**2
        if self.kind is FluxKind.CHARBONNIER:
            return q**-1.5
        return (2.0 - q) / (q * q)

    def dphi_dlam(self, s):
        """d Phi / d lambda (zero for kinds without a contrast parameter)."""
        s = np.asarray(s, dtype=np.float64)
        if not self.kind.has_lambda:
            return np.zeros_like(s)
        lam = self.lam
        s3 = s * s * s
        if self.kind is FluxKind.CHARBONNIER:
            return s3 / lam**3 * (1.0 + s * s / lam**2) ** -1.5
        return 2.0 * lam * s3 / (lam * lam + s * s) ** 2

    @property
    def lipschitz(self) -> float:
        # sup|Phi'| is attained at s = 0 for every catalog member
        return 1.0


@dataclass(frozen=True)
class Penaliser:
    """Psi with Psi' = g; Psi(0) = 0."""

    kind: FluxKind
    lam: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", FluxKind(self.kind))
        if self.kind is FluxKind.RELU:
            raise UnsupportedKindError("ReLU has no penaliser")

    def __call__(self, z):
        z = np.asarray(z, dtype=np.float64)
        if np.any(z < 0):
            raise ValueError("penaliser argument must be nonnegative")
        lam2 = self.lam**2
        if self.kind is FluxKind.LINEAR:
            return z.copy()
        if self.kind is FluxKind.CHARBONNIER:
            return 2.0 * lam2 * (np.sqrt(1.0 + z / lam2) - 1.0)
        return lam2 * np.log1p(z / lam2)


def diffusivity_eval(f: FluxFunction, s2: float) -> float:
    if s2 < 0:
        raise ValueError("s2 must be nonnegative")
    return float(f.g(s2))


def flux_eval(f: FluxFunction, s: float) -> float:
    return float(f.phi(s))


def flux_derivative(f: FluxFunction, s: float) -> float:
    return float(f.dphi(s))


def lipschitz_constant(f: FluxFunction) -> float:
    return f.lipschitz


def penaliser_eval(p: Penaliser, s2: float) -> float:
    if s2 < 0:
        raise ValueError("s2 must be nonnegative")
    return float(p(s2))
