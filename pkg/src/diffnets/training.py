"""Benchmark data, metrics, penalties, Adam with projection, and the training loop."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DimensionError, NumericalError
from .flux import LAMBDA_MIN, FluxFunction, FluxKind
from .networks import (
    Arch,
    NetworkParams,
    NetworkSpec,
    Sharing,
    backward,
    flatten,
    forward,
    init_params,
    unflatten,
)
from .schemes import SchemeConfig, explicit, operator_norm_sq, run_scheme
from .signal import KernelBank, SignalBundle

log = logging.getLogger(__name__)

PEAK = 255.0
TAU_MIN = 1e-8
FORWARD_DIFF = np.array([[[0.0, -1.0, 1.0]]])


# --------------------------------------------------------------------------
# data


@dataclass(frozen=True)
class DatasetConfig:
    n_train: int = 10000
    n_test: int = 1000
    n_val: int = 1000
    length: int = 256
    noise_sigma: float = 10.0
    value_range: tuple[float, float] = (0.0, 255.0)
    seg_min_frac: float = 0.1
    seg_max_frac: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if min(self.n_train, self.n_test, self.n_val) < 0:
            raise ConfigurationError("split sizes must be nonnegative")
        if self.length < 2:
            raise ConfigurationError("signal length must be >= 2")
        if self.noise_sigma < 0:
            raise ConfigurationError("noise level must be nonnegative")
        if not 0 < self.seg_min_frac <= self.seg_max_frac <= 1:
            raise ConfigurationError("need 0 < seg_min_frac <= seg_max_frac <= 1")
        if self.segment_bounds[0] > self.segment_bounds[1]:
            raise ConfigurationError("segment bounds are empty at this signal length")

    @property
    def segment_bounds(self) -> tuple[int, int]:
        n = self.length
        return max(1, math.ceil(self.seg_min_frac * n)), max(1, math.floor(self.seg_max_frac * n))


@dataclass
class Dataset:
    """Noisy/clean pairs, each array shaped (count, N)."""

    train: np.ndarray
    train_clean: np.ndarray
    val: np.ndarray
    val_clean: np.ndarray
    test: np.ndarray
    test_clean: np.ndarray

    def subset(self, n_train: int) -> Dataset:
        return Dataset(self.train[:n_train], self.train_clean[:n_train], self.val,
                       self.val_clean, self.test, self.test_clean)


def segment_lengths(n: int, lo: int, hi: int, rng: np.random.Generator) -> list[int]:
    """Partition ``n`` samples into segments with every length in [lo, hi]."""
    while True:
        out, total = [], 0
        while total < n:
            out.append(int(rng.integers(lo, hi + 1)))
            total += out[-1]
        out[-1] -= total - n
        if out[-1] >= lo or len(out) == 1:
            return out


def piecewise_affine(cfg: DatasetConfig, rng: np.random.Generator) -> np.ndarray:
    lo, hi = cfg.segment_bounds
    vmin, vmax = cfg.value_range
    pieces = []
    for m in segment_lengths(cfg.length, lo, hi, rng):
        a, b = rng.uniform(vmin, vmax, 2)
        pieces.append(np.linspace(a, b, m))
    return np.concatenate(pieces)


def generate_dataset(cfg: DatasetConfig) -> Dataset:
    rng = np.random.default_rng(cfg.seed)
    parts = []
    for count in (cfg.n_train, cfg.n_val, cfg.n_test):
        clean = np.array([piecewise_affine(cfg, rng) for _ in range(count)]).reshape(count, cfg.length)
        # noise is not clipped back into the value range
        noisy = clean + cfg.noise_sigma * rng.standard_normal(clean.shape) if cfg.noise_sigma else clean.copy()
        parts += [noisy, clean]
    return Dataset(parts[0], parts[1], parts[2], parts[3], parts[4], parts[5])


# --------------------------------------------------------------------------
# metrics


def _arr(a):
    return a.data if isinstance(a, SignalBundle) else np.asarray(a, dtype=np.float64)


def mse(a, b) -> float:
    a, b = _arr(a), _arr(b)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def psnr_from_mse(m: float) -> float:
    return math.inf if m == 0 else 10.0 * math.log10(PEAK**2 / m)


def psnr(a, b) -> float:
    return psnr_from_mse(mse(a, b))


# --------------------------------------------------------------------------
# temporal regulariser


def _reg_fields(spec: NetworkSpec) -> list[str]:
    names = ["kernel"]
    if spec.arch is Arch.RESNET:
        names += ["kernel_out", "bias_in", "bias_out"]
    if spec.flux.has_lambda:
        names.append("lam")
    return names


def default_tau_ref(spec: NetworkSpec) -> float:
    return 1.0 / spec.blocks if spec.arch is Arch.RESNET else 1.0


def temporal_penalty(spec: NetworkSpec, params: NetworkParams, beta: float, tau_ref: float) -> float:
    """beta * sum_k |theta^k - theta^{k-1}|^2 / tau_ref over kernels, biases and lambda."""
    if spec.sharing is Sharing.SHARED or beta == 0:
        return 0.0
    if tau_ref <= 0:
        raise ConfigurationError("reference time step must be positive")
    total = 0.0
    for prev, cur in zip(params.blocks, params.blocks[1:]):
        for name in _reg_fields(spec):
            d = np.asarray(getattr(cur, name)) - np.asarray(getattr(prev, name))
            total += float(np.sum(d * d))
    return beta * total / tau_ref


def temporal_penalty_grad(spec, params, beta, tau_ref, grads: NetworkParams):
    """Add the penalty gradient into ``grads`` in place."""
    if spec.sharing is Sharing.SHARED or beta == 0:
        return grads
    c = 2.0 * beta / tau_ref
    blocks = params.blocks
    for k in range(1, len(blocks)):
        for name in _reg_fields(spec):
            d = np.asarray(getattr(blocks[k], name)) - np.asarray(getattr(blocks[k - 1], name))
            setattr(grads.blocks[k], name, getattr(grads.blocks[k], name) + c * d)
            setattr(grads.blocks[k - 1], name, getattr(grads.blocks[k - 1], name) - c * d)
    return grads


# --------------------------------------------------------------------------
# loss and gradient


def _chunk_loss_grad(spec, params, x, y):
    out, tape = forward(spec, params, x)
    r = out - y
    g, _ = backward(spec, params, tape, 2.0 * r)
    return float(np.sum(r * r)), flatten(spec, g)


def loss_and_grad(
    spec: NetworkSpec,
    params: NetworkParams,
    noisy: np.ndarray,
    clean: np.ndarray,
    beta: float = 0.0,
    tau_ref: float = 1.0,
    threads: int = 1,
    pool: ThreadPoolExecutor | None = None,
) -> tuple[float, NetworkParams]:
    """Mean squared error over the batch plus the temporal penalty, and its gradient.

    With several threads the batch is split into contiguous chunks whose
    results are summed in chunk order, so the result does not depend on
    scheduling.
    """
    n = noisy.shape[0] * noisy.shape[1]
    if threads > 1 and noisy.shape[0] > 1:
        idx = np.array_split(np.arange(noisy.shape[0]), min(threads, noisy.shape[0]))
        run = pool.map if pool is not None else map
        parts = list(run(lambda i: _chunk_loss_grad(spec, params, noisy[i], clean[i]), idx))
    else:
        parts = [_chunk_loss_grad(spec, params, noisy, clean)]
    sq = 0.0
    gvec = np.zeros_like(parts[0][1])
    for s, g in parts:
        sq += s
        gvec += g
    loss = sq / n + temporal_penalty(spec, params, beta, tau_ref)
    grads = unflatten(spec, gvec / n, params)
    temporal_penalty_grad(spec, params, beta, tau_ref, grads)
    return loss, grads


def predict(spec: NetworkSpec, params: NetworkParams, x: np.ndarray, batch: int = 1000) -> np.ndarray:
    return np.concatenate([forward(spec, params, x[i:i + batch])[0] for i in range(0, len(x), batch)])


# --------------------------------------------------------------------------
# optimiser


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, size: int) -> AdamState:
        return cls(np.zeros(size), np.zeros(size))


def adam_update(theta: np.ndarray, grad: np.ndarray, state: AdamState, lr: float) -> np.ndarray:
    """One bias-corrected Adam step on flat vectors; mutates ``state``."""
    if theta.shape != grad.shape or theta.shape != state.m.shape:
        raise DimensionError("parameter, gradient and optimiser state sizes differ")
    state.t += 1
    state.m = state.beta1 * state.m + (1 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1 - state.beta2) * grad * grad
    mhat = state.m / (1 - state.beta1**state.t)
    vhat = state.v / (1 - state.beta2**state.t)
    return theta - lr * mhat / (np.sqrt(vhat) + state.eps)


def adam_step(spec, params: NetworkParams, grads: NetworkParams, state: AdamState, lr: float):
    theta = adam_update(flatten(spec, params), flatten(spec, grads), state, lr)
    return unflatten(spec, theta, params), state


def project_constraints(spec: NetworkSpec, params: NetworkParams) -> NetworkParams:
    """Clamp tau to the stability bound, alpha to its DF minimum or FSI range, lambda >= 1e-4."""
    out = params.copy()
    lip = 1.0
    for bp in out.blocks:
        if spec.flux.has_lambda:
            bp.lam = max(float(bp.lam), LAMBDA_MIN)
        if not spec.arch.symmetric:
            continue
        norm_sq = operator_norm_sq(KernelBank(bp.kernel), spec.length, spec.stability_mode)
        tau_max = math.inf if norm_sq == 0 else 2.0 / (lip * norm_sq)
        bp.tau = min(max(float(bp.tau), TAU_MIN), tau_max)
        if spec.arch is Arch.DFNET:
            bp.alpha = max(float(bp.alpha), lip * norm_sq / 4.0)
    if spec.arch is Arch.FSINET:
        out.extrapolation = np.clip(out.extrapolation, 0.0, 2.0)
    return out


# --------------------------------------------------------------------------
# training loop


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    max_epochs: int = 2000
    beta: float = 10.0
    batch_size: int = 32
    kernel_range: float = 0.1
    lam0: float = 15.0
    tau0: float = 1.0
    alpha0: float = 1.0
    restarts: int = 3
    patience: int = 100
    seed: int = 0
    threads: int = 1
    tau_ref: float | None = None

    def __post_init__(self):
        if not self.lr >= 0:
            raise ConfigurationError("learning rate must be nonnegative")
        if self.beta < 0:
            raise ConfigurationError("beta must be nonnegative")
        if self.batch_size < 1 or self.restarts < 1 or self.max_epochs < 0:
            raise ConfigurationError("batch size and restarts must be >= 1, epochs >= 0")


@dataclass
class TrainResult:
    params: NetworkParams
    val_psnr: float
    restart: int
    log: list[tuple[int, float, float]] = field(default_factory=list)
    failed: list[int] = field(default_factory=list)


def _run_restart(spec, data: Dataset, cfg: TrainConfig, restart: int, pool, on_epoch=None):
    rng = np.random.default_rng([cfg.seed, restart])
    params = project_constraints(spec, init_params(
        spec, rng, cfg.kernel_range, cfg.lam0, cfg.tau0, cfg.alpha0))
    tau_ref = cfg.tau_ref if cfg.tau_ref is not None else default_tau_ref(spec)
    state = AdamState.zeros(flatten(spec, params).size)
    best = (psnr(predict(spec, params, data.val), data.val_clean), params.copy())
    rows, stale = [], 0
    n = data.train.shape[0]
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        sq, seen = 0.0, 0
        for s in range(0, n, cfg.batch_size):
            idx = order[s:s + cfg.batch_size]
            loss, grads = loss_and_grad(spec, params, data.train[idx], data.train_clean[idx],
                                        cfg.beta, tau_ref, cfg.threads, pool)
            if not np.isfinite(loss):
                raise NumericalError(f"loss became {loss} in epoch {epoch}")
            params, state = adam_step(spec, params, grads, state, cfg.lr)
            params = project_constraints(spec, params)
            sq += loss * len(idx)
            seen += len(idx)
        val = psnr(predict(spec, params, data.val), data.val_clean)
        rows.append((epoch, sq / max(seen, 1), val))
        if on_epoch is not None:
            on_epoch(restart, *rows[-1])
        if val > best[0]:
            best, stale = (val, params.copy()), 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    return best, rows


def train(spec: NetworkSpec, data: Dataset, cfg: TrainConfig, on_epoch=None) -> TrainResult:
    """Adam on MSE + temporal penalty; keeps the best restart by validation PSNR.

    ``on_epoch(restart, epoch, train_mse, val_psnr)`` is called after each epoch.
    A restart whose loss turns non-finite is abandoned and listed in ``failed``.
    """
    result = None
    failed = []
    pool = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None
    try:
        for r in range(cfg.restarts):
            try:
                (val, params), rows = _run_restart(spec, data, cfg, r, pool, on_epoch)
            except NumericalError as exc:
                log.warning("restart %d aborted: %s", r, exc)
                failed.append(r)
                continue
            log.info("restart %d: best validation PSNR %.4f dB", r, val)
            if result is None or val > result.val_psnr:
                result = TrainResult(params, val, r, rows)
    finally:
        if pool is not None:
            pool.shutdown()
    if result is None:
        raise NumericalError(f"all {cfg.restarts} restarts diverged")
    result.failed = failed
    return result


def write_metric_log(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,train_mse,val_psnr\n")
        fh.writelines(f"{epoch},{m!r},{p!r}\n" for epoch, m, p in rows)


# --------------------------------------------------------------------------
# classical baselines


@dataclass(frozen=True)
class BaselineResult:
    kind: FluxKind
    lam: float
    tau: float
    steps: int
    val_psnr: float
    test_psnr: float


DEFAULT_LAMBDAS = tuple(np.round(np.geomspace(1.0, 60.0, 25), 6))


def classical_baselines(
    data: Dataset,
    kind: FluxKind | str,
    lambdas=DEFAULT_LAMBDAS,
    max_time: float = 100.0,
    tau: float | None = None,
    patience: int = 20,
) -> BaselineResult:
    """Explicit diffusion with the forward-difference kernel, grid-searched on validation.

    Every step count up to ``max_time / tau`` is a grid point on the time
    axis.  The scan for one lambda stops once validation PSNR has not
    improved for ``patience`` steps.
    """
    kind = FluxKind(kind)
    if kind is FluxKind.RELU:
        raise ConfigurationError("ReLU has no classical diffusion baseline")
    n = data.val.shape[1]
    tau_max = 2.0 / operator_norm_sq(KernelBank(FORWARD_DIFF), n)
    tau = 0.25 * tau_max if tau is None else tau
    if not 0 < tau <= tau_max:
        raise ConfigurationError(f"tau must lie in (0, {tau_max}], got {tau}")
    steps_max = int(math.ceil(max_time / tau))
    best = (-math.inf, None, 0)
    for lam in (lambdas if kind.has_lambda else (1.0,)):
        f = FluxFunction(kind, lam)
        u = data.val[:, None, :]
        top, since = -math.inf, 0
        for step in range(1, steps_max + 1):
            u = explicit(u, FORWARD_DIFF, f, tau)
            p = psnr(u[:, 0], data.val_clean)
            if p > best[0]:
                best = (p, float(lam), step)
            top, since = (p, 0) if p > top else (top, since + 1)
            if since >= patience:
                break
    val, lam, steps = best
    f = FluxFunction(kind, lam)
    out = run_scheme(data.test[:, None, :], FORWARD_DIFF, SchemeConfig(tau, f), "explicit", steps)
    return BaselineResult(kind, lam, tau, steps, val, psnr(out[:, 0], data.test_clean))
