"""Multi-channel 1D signals, width-3 convolutions with reflecting boundaries.

Array-level functions (``conv``, ``conv_adjoint``, ``kernel_grad``) work on
arrays shaped ``(..., C, N)`` so that whole batches go through one call; the
``SignalBundle``/``KernelBank`` wrappers are the validated public surface.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionError, NumericalError

KERNEL_WIDTH = 3


def _as_float64(a, name: str) -> np.ndarray:
    a = np.asarray(a)
    if a.dtype in (np.float16, np.float32):
        raise TypeError(f"{name} must be 64-bit floating point, got {a.dtype}")
    a = np.array(a, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise NumericalError(f"{name} contains non-finite entries")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SignalBundle:
    """Signal with ``C`` channels of length ``N`` sampled with spacing ``h``."""

    data: np.ndarray
    h: float = 1.0

    def __post_init__(self):
        data = _as_float64(self.data, "signal")
        if data.ndim == 1:
            data = data[None, :]
            data.setflags(write=False)
        if data.ndim != 2:
            raise DimensionError(f"signal must be (C, N), got shape {data.shape}")
        if data.shape[1] < 2 or data.shape[0] < 1:
            raise DimensionError(f"need C >= 1 and N >= 2, got {data.shape}")
        object.__setattr__(self, "data", data)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def length(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class KernelBank:
    """Bank of width-3 kernels, ``taps[o, c, t]`` couples input channel ``c``
    at offset ``t - 1`` to output channel ``o``."""

    taps: np.ndarray
    h: float = 1.0

    def __post_init__(self):
        taps = _as_float64(self.taps, "kernel taps")
        if taps.ndim == 1:
            taps = taps[None, None, :]
            taps.setflags(write=False)
        if taps.ndim != 3:
            raise DimensionError(f"taps must be (C_out, C_in, 3), got {taps.shape}")
        if taps.shape[2] != KERNEL_WIDTH:
            raise DimensionError(f"only width-3 kernels are supported, got {taps.shape[2]}")
        object.__setattr__(self, "taps", taps)

    @classmethod
    def identity(cls, channels: int = 1, h: float = 1.0) -> KernelBank:
        taps = np.zeros((channels, channels, 3))
        taps[np.arange(channels), np.arange(channels), 1] = 1.0
        return cls(taps, h)

    @property
    def c_out(self) -> int:
        return self.taps.shape[0]

    @property
    def c_in(self) -> int:
        return self.taps.shape[1]

    @property
    def is_square(self) -> bool:
        return self.c_out == self.c_in


@dataclass(frozen=True)
class Image2D:
    data: np.ndarray
    h: float = 1.0

    def __post_init__(self):
        data = _as_float64(self.data, "image")
        if data.ndim != 2 or min(data.shape) < 2:
            raise DimensionError(f"image must be 2D with both sides >= 2, got {data.shape}")
        object.__setattr__(self, "data", data)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


@dataclass(frozen=True)
class DenseOperator:
    """Matrix acting on ``vec(u) = u.reshape(-1)`` (channel-major)."""

    matrix: np.ndarray

    def __matmul__(self, other):
        return self.matrix @ other

    @property
    def T(self) -> DenseOperator:
        return DenseOperator(self.matrix.T)


# --------------------------------------------------------------------------
# array-level kernels


def mirror_pad(x: np.ndarray) -> np.ndarray:
    """Pad the last axis by one sample on each side, u[-1] = u[0], u[N] = u[N-1]."""
    return np.concatenate([x[..., :1], x, x[..., -1:]], axis=-1)


def shifted_stack(x: np.ndarray) -> np.ndarray:
    """(..., C, N) -> (..., C, 3, N) holding u[i-1], u[i], u[i+1]."""
    xp = mirror_pad(x)
    return np.stack([xp[..., :-2], xp[..., 1:-1], xp[..., 2:]], axis=-2)


def conv(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    if taps.shape[0] == 1 and taps.shape[1] == 1:
        xp = mirror_pad(x)
        t = taps[0, 0]
        return t[0] * xp[..., :-2] + t[1] * xp[..., 1:-1] + t[2] * xp[..., 2:]
    return np.einsum("oct,...ctn->...on", taps, shifted_stack(x))


def conv_adjoint(v: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Exact transpose of ``conv`` including the mirrored boundary rows."""
    n = v.shape[-1]
    if taps.shape[0] == 1 and taps.shape[1] == 1:
        t = taps[0, 0]
        w = np.zeros(v.shape[:-1] + (n + 2,))
        w[..., 0:n] += t[0] * v
        w[..., 1:n + 1] += t[1] * v
        w[..., 2:n + 2] += t[2] * v
    else:
        w = np.zeros(v.shape[:-2] + (taps.shape[1], n + 2))
        for t in range(KERNEL_WIDTH):
            w[..., t:t + n] += np.einsum("oc,...on->...cn", taps[:, :, t], v)
    out = w[..., 1:-1].copy()
    out[..., 0] += w[..., 0]
    out[..., -1] += w[..., -1]
    return out


def kernel_grad(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gradient of <y, conv(x, taps)> with respect to ``taps``, summed over batch axes."""
    s = shifted_stack(x)
    n = x.shape[-1]
    s = s.reshape((-1,) + s.shape[-3:])
    y = y.reshape(-1, y.shape[-2], n)
    return np.einsum("bon,bctn->oct", y, s)


# --------------------------------------------------------------------------
# public operations


def _check_in(u: SignalBundle, c: int, what: str):
    if u.channels != c:
        raise DimensionError(f"{what}: signal has {u.channels} channels, kernel expects {c}")


def conv_apply(u: SignalBundle, K: KernelBank) -> SignalBundle:
    _check_in(u, K.c_in, "conv_apply")
    return SignalBundle(conv(u.data, K.taps), u.h)


def conv_adjoint_apply(v: SignalBundle, K: KernelBank) -> SignalBundle:
    _check_in(v, K.c_out, "conv_adjoint_apply")
    return SignalBundle(conv_adjoint(v.data, K.taps), v.h)


def _triplets(taps: np.ndarray, n: int):
    """Channel-major (row, column, value) entries of the convolution matrix."""
    c_out, c_in, width = taps.shape
    o, c, t, i = np.meshgrid(
        np.arange(c_out), np.arange(c_in), np.arange(width), np.arange(n), indexing="ij"
    )
    j = np.clip(i + t - 1, 0, n - 1)
    return (o * n + i).ravel(), (c * n + j).ravel(), taps[o, c, t].ravel()


def dense_operator_of(K: KernelBank, n: int) -> DenseOperator:
    """Assemble the (C_out*N, C_in*N) matrix of ``conv_apply`` entry by entry."""
    if n < 2:
        raise DimensionError("N must be >= 2")
    rows, cols, vals = _triplets(K.taps, n)
    m = np.zeros((K.c_out * n, K.c_in * n))
    np.add.at(m, (rows, cols), vals)
    return DenseOperator(m)


def _row_blocks(taps: np.ndarray, n: int) -> np.ndarray:
    """(N, 3, C_out, C_in): block of row i acting on column block i + k - 1."""
    t = np.moveaxis(taps, 2, 0)
    rows = np.broadcast_to(t, (n,) + t.shape).copy()
    # mirrored boundary folds the outside taps onto the edge columns
    rows[0, 1] += rows[0, 0]
    rows[0, 0] = 0.0
    rows[-1, 1] += rows[-1, 2]
    rows[-1, 2] = 0.0
    return rows


def gram_banded(K: KernelBank, n: int) -> np.ndarray:
    """Lower banded storage of M^T M for the pixel-major (interleaved) ordering."""
    c = K.c_in
    rows = _row_blocks(K.taps, n)
    # block (i + k1 - 1, i + k2 - 1) of M^T M gains rows[i, k1]^T rows[i, k2]
    blocks = np.zeros((3, n, c, c))  # blocks[d, j] = (M^T M)[j + d, j]
    for k1 in range(3):
        for k2 in range(k1 + 1):
            d = k1 - k2
            prod = np.einsum("ior,ios->irs", rows[:, k1], rows[:, k2])
            # row i contributes to column block j = i + k2 - 1, distinct across i
            lo, hi = max(0, 1 - k2), min(n, n + 1 - k2 - d)
            blocks[d, lo + k2 - 1 : hi + k2 - 1] += prod[lo:hi]
    ab = np.zeros((3 * c, n * c))
    r, q = np.meshgrid(np.arange(c), np.arange(c), indexing="ij")
    for d in range(3):
        off = d * c + r - q
        keep = off >= 0
        jb = np.arange(n - d)[:, None]
        ab[off[keep][None, :], (jb * c + q[keep][None, :])] = blocks[d, : n - d][:, keep]
    return ab


def spectral_norm(K: KernelBank, n: int) -> float:
    """Largest singular value of the boundary-aware convolution on length ``n``.

    M^T M is block pentadiagonal in pixel-major ordering, so LAPACK's banded
    symmetric eigensolver returns its top eigenvalue directly.
    """
    if n < 2:
        raise DimensionError("N must be >= 2")
    if not np.any(K.taps):
        return 0.0
    ab = gram_banded(K, n)
    dim = ab.shape[1]
    try:
        top = scipy.linalg.eigvals_banded(
            ab, lower=True, select="i", select_range=(dim - 1, dim - 1)
        )
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"spectral norm did not converge: {exc}") from exc
    return float(np.sqrt(max(top[-1], 0.0)))


def gershgorin_bound(K: KernelBank) -> float:
    """Upper bound sqrt(||M||_1 ||M||_inf) on ||K||_2, valid for every N >= 2.

    Boundary columns pick up merged mirrored taps, so they are included
    alongside the interior row/column sums.
    """
    a = np.abs(K.taps)
    t0, t1, t2 = K.taps[..., 0], K.taps[..., 1], K.taps[..., 2]
    row = a.sum(axis=(1, 2))
    col_inner = a.sum(axis=(0, 2))
    col_first = (np.abs(t0 + t1) + np.abs(t0)).sum(axis=0)
    col_last = (np.abs(t1 + t2) + np.abs(t2)).sum(axis=0)
    r = row.max()
    c = max(col_inner.max(), col_first.max(), col_last.max())
    return float(np.sqrt(r * c))
