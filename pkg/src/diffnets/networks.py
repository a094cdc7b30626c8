"""Residual networks built from diffusion blocks, with exact reverse mode.

Arrays inside the network are shaped (batch, C, N).  Network inputs and
outputs are single-channel batches (batch, N): the input is copied into C
channels and the output is the channel average.
"""
from __future__ import annotations

import copy
import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, FormatError, NumericalError
from .flux import FluxFunction, FluxKind
from .schemes import StabilityMode
from .signal import SignalBundle, conv, conv_adjoint, kernel_grad


class Arch(str, enum.Enum):
    RESNET = "resnet"
    SYMRESNET = "symresnet"
    DFNET = "dfnet"
    FSINET = "fsinet"

    @property
    def symmetric(self) -> bool:
        return self is not Arch.RESNET


class Sharing(str, enum.Enum):
    SHARED = "shared"
    TIME_DYNAMIC = "time-dynamic"


@dataclass(frozen=True)
class NetworkSpec:
    arch: Arch
    blocks: int
    channels: int = 1
    sharing: Sharing = Sharing.SHARED
    flux: FluxKind = FluxKind.PERONA_MALIK
    stability_mode: StabilityMode = StabilityMode.SPECTRAL
    length: int = 256

    def __post_init__(self):
        object.__setattr__(self, "arch", Arch(self.arch))
        object.__setattr__(self, "sharing", Sharing(self.sharing))
        object.__setattr__(self, "flux", FluxKind(self.flux))
        object.__setattr__(self, "stability_mode", StabilityMode(self.stability_mode))
        if self.blocks < 1 or self.channels < 1:
            raise ConfigurationError("need blocks >= 1 and channels >= 1")
        if self.length < 2:
            raise ConfigurationError("signal length must be >= 2")

    @property
    def n_param_blocks(self) -> int:
        return 1 if self.sharing is Sharing.SHARED else self.blocks

    @property
    def n_extrapolation(self) -> int:
        # the first block of DF/FSI networks is a plain explicit step
        return self.blocks - 1 if self.arch is Arch.FSINET else 0


@dataclass
class BlockParams:
    kernel: np.ndarray
    lam: float = 15.0
    tau: float = 1.0
    alpha: float = 1.0
    kernel_out: np.ndarray | None = None
    bias_in: np.ndarray | None = None
    bias_out: np.ndarray | None = None


@dataclass
class NetworkParams:
    blocks: list[BlockParams]
    extrapolation: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def copy(self) -> NetworkParams:
        return copy.deepcopy(self)


@dataclass
class ForwardTape:
    states: list[np.ndarray]
    pre_activations: list[np.ndarray]


# --------------------------------------------------------------------------
# parameter layout


def param_fields(spec: NetworkSpec) -> list[tuple[str, tuple[int, ...]]]:
    """Trainable fields of one block and their shapes."""
    c = spec.channels
    fields = [("kernel", (c, c, 3))]
    if spec.arch is Arch.RESNET:
        fields += [("kernel_out", (c, c, 3)), ("bias_in", (c,)), ("bias_out", (c,))]
    if spec.flux.has_lambda:
        fields.append(("lam", ()))
    if spec.arch.symmetric:
        fields.append(("tau", ()))
    if spec.arch is Arch.DFNET:
        fields.append(("alpha", ()))
    return fields


def flatten(spec: NetworkSpec, params: NetworkParams) -> np.ndarray:
    parts = []
    for bp in params.blocks:
        for name, _ in param_fields(spec):
            parts.append(np.ravel(np.asarray(getattr(bp, name), dtype=np.float64)))
    parts.append(np.asarray(params.extrapolation, dtype=np.float64).ravel())
    return np.concatenate(parts)


def unflatten(spec: NetworkSpec, vec: np.ndarray, template: NetworkParams) -> NetworkParams:
    out = template.copy()
    pos = 0
    for bp in out.blocks:
        for name, shape in param_fields(spec):
            size = int(np.prod(shape))
            chunk = vec[pos:pos + size]
            setattr(bp, name, float(chunk[0]) if shape == () else chunk.reshape(shape).copy())
            pos += size
    out.extrapolation = vec[pos:pos + spec.n_extrapolation].copy()
    pos += spec.n_extrapolation
    if pos != vec.size:
        raise ConfigurationError("parameter vector length does not match the spec")
    return out


def count_parameters(spec: NetworkSpec, params: NetworkParams | None = None) -> int:
    per_block = sum(int(np.prod(s)) for _, s in param_fields(spec))
    return per_block * spec.n_param_blocks + spec.n_extrapolation


def init_params(
    spec: NetworkSpec,
    rng: np.random.Generator,
    kernel_range: float = 0.1,
    lam: float = 15.0,
    tau: float = 1.0,
    alpha: float = 1.0,
) -> NetworkParams:
    c = spec.channels
    blocks = []
    for _ in range(spec.n_param_blocks):
        bp = BlockParams(
            kernel=rng.uniform(-kernel_range, kernel_range, (c, c, 3)),
            lam=lam, tau=tau, alpha=alpha,
        )
        if spec.arch is Arch.RESNET:
            bp.kernel_out = rng.uniform(-kernel_range, kernel_range, (c, c, 3))
            bp.bias_in = np.zeros(c)
            bp.bias_out = np.zeros(c)
        blocks.append(bp)
    return NetworkParams(blocks, np.full(spec.n_extrapolation, alpha))


def check_params(spec: NetworkSpec, params: NetworkParams):
    if len(params.blocks) != spec.n_param_blocks:
        raise ConfigurationError(
            f"{spec.sharing.value} network with {spec.blocks} blocks needs "
            f"{spec.n_param_blocks} parameter blocks, got {len(params.blocks)}"
        )
    if len(params.extrapolation) != spec.n_extrapolation:
        raise ConfigurationError("wrong number of FSI extrapolation weights")
    for bp in params.blocks:
        if np.shape(bp.kernel) != (spec.channels, spec.channels, 3):
            raise ConfigurationError("kernel shape does not match channel count")
        if spec.arch is Arch.RESNET and (
            bp.kernel_out is None or bp.bias_in is None or bp.bias_out is None
        ):
            raise ConfigurationError("standard ResNet blocks need kernel_out and biases")


# --------------------------------------------------------------------------
# blocks


def _flux(spec: NetworkSpec, bp: BlockParams) -> FluxFunction:
    return FluxFunction(spec.flux, bp.lam if spec.flux.has_lambda else 1.0)


def diffusion_block(u: np.ndarray, bp: BlockParams, f: FluxFunction):
    """u - tau K^T Phi(K u); returns (output, pre-activation K u)."""
    z = conv(u, bp.kernel)
    return u - bp.tau * conv_adjoint(f.phi(z), bp.kernel), z


def standard_block(u: np.ndarray, bp: BlockParams, f: FluxFunction):
    """u + W2 Phi(W1 u + b1) + b2 with W2 realised as a transposed convolution."""
    z = conv(u, bp.kernel) + bp.bias_in[:, None]
    return u + conv_adjoint(f.phi(z), bp.kernel_out) + bp.bias_out[:, None], z


def diffusion_block_forward(u: SignalBundle, p: BlockParams, f: FluxFunction):
    out, z = diffusion_block(u.data, p, f)
    return SignalBundle(out, u.h), z


def standard_resblock_forward(u: SignalBundle, p: BlockParams, f: FluxFunction):
    out, z = standard_block(u.data, p, f)
    return SignalBundle(out, u.h), z


# --------------------------------------------------------------------------
# network


def _lift(spec: NetworkSpec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    return np.repeat(x[:, None, :], spec.channels, axis=1)


def forward(spec: NetworkSpec, params: NetworkParams, x: np.ndarray):
    """Batch forward pass, x: (batch, N) -> (batch, N), plus the tape."""
    check_params(spec, params)
    u = _lift(spec, x)
    states, pre = [u], []
    shared = spec.sharing is Sharing.SHARED
    for k in range(spec.blocks):
        bp = params.blocks[0 if shared else k]
        f = _flux(spec, bp)
        if spec.arch is Arch.RESNET:
            out, z = standard_block(u, bp, f)
        else:
            z = conv(u, bp.kernel)
            d = conv_adjoint(f.phi(z), bp.kernel)
            if spec.arch is Arch.SYMRESNET or k == 0:
                out = u - bp.tau * d
            elif spec.arch is Arch.DFNET:
                a = 4.0 * bp.tau * bp.alpha / (1.0 + 2.0 * bp.tau * bp.alpha)
                out = a * (u - d / (2.0 * bp.alpha)) + (1.0 - a) * states[-2]
            else:
                w = params.extrapolation[k - 1]
                out = w * (u - bp.tau * d) + (1.0 - w) * states[-2]
        pre.append(z)
        states.append(out)
        u = out
    y = u.mean(axis=1)
    if not np.all(np.isfinite(y)):
        raise NumericalError("network output is not finite")
    return y, ForwardTape(states, pre)


def network_forward(spec: NetworkSpec, params: NetworkParams, u0: SignalBundle):
    if u0.channels != 1:
        raise ConfigurationError("network input is a single-channel signal")
    y, tape = forward(spec, params, u0.data)
    return SignalBundle(y, u0.h), tape


def zero_like(params: NetworkParams) -> NetworkParams:
    g = params.copy()
    for bp in g.blocks:
        bp.kernel = np.zeros_like(bp.kernel)
        bp.lam = bp.tau = bp.alpha = 0.0
        if bp.kernel_out is not None:
            bp.kernel_out = np.zeros_like(bp.kernel_out)
            bp.bias_in = np.zeros_like(bp.bias_in)
            bp.bias_out = np.zeros_like(bp.bias_out)
    g.extrapolation = np.zeros_like(params.extrapolation, dtype=np.float64)
    return g


def backward(spec: NetworkSpec, params: NetworkParams, tape: ForwardTape, grad_out: np.ndarray):
    """Reverse mode through the unrolled network.

    ``grad_out`` is dLoss/dy with the shape of the forward output.  Returns
    (parameter gradients as a NetworkParams, gradient w.r.t. the input).
    """
    check_params(spec, params)
    if len(tape.states) != spec.blocks + 1:
        raise ConfigurationError("tape does not match the network depth")
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if grad_out.ndim == 1:
        grad_out = grad_out[None, :]
    if grad_out.shape != tape.states[-1][:, 0, :].shape:
        raise ConfigurationError("upstream gradient shape does not match the tape")
    grads = zero_like(params)
    shared = spec.sharing is Sharing.SHARED
    adj = [np.zeros_like(s) for s in tape.states]
    adj[-1] = np.repeat(grad_out[:, None, :] / spec.channels, spec.channels, axis=1)

    for k in reversed(range(spec.blocks)):
        ub = adj[k + 1]
        u = tape.states[k]
        z = tape.pre_activations[k]
        bp = params.blocks[0 if shared else k]
        gb = grads.blocks[0 if shared else k]
        f = _flux(spec, bp)
        phi = f.phi(z)

        if spec.arch is Arch.RESNET:
            wphi = conv(ub, bp.kernel_out)
            wz = f.dphi(z) * wphi
            adj[k] += ub + conv_adjoint(wz, bp.kernel)
            gb.kernel += kernel_grad(u, wz)
            gb.kernel_out += kernel_grad(ub, phi)
            gb.bias_in += wz.sum(axis=(0, 2))
            gb.bias_out += ub.sum(axis=(0, 2))
            gb.lam += float(np.sum(f.dphi_dlam(z) * wphi))
            continue

        d = conv_adjoint(phi, bp.kernel)
        coef_prev = 0.0
        if spec.arch is Arch.SYMRESNET or k == 0:
            coef_u, coef_d = 1.0, -bp.tau
            gb.tau += -float(np.sum(ub * d))
        elif spec.arch is Arch.DFNET:
            tau, alpha = bp.tau, bp.alpha
            den = 1.0 + 2.0 * tau * alpha
            a, s = 4.0 * tau * alpha / den, 1.0 / (2.0 * alpha)
            prev = tape.states[k - 1]
            g_a = float(np.sum(ub * (u - s * d - prev)))
            g_s = float(np.sum(ub * (-a * d)))
            gb.tau += g_a * 4.0 * alpha / den**2
            gb.alpha += g_a * 4.0 * tau / den**2 - g_s / (2.0 * alpha**2)
            coef_u, coef_d, coef_prev = a, -a * s, 1.0 - a
        else:
            w = params.extrapolation[k - 1]
            prev = tape.states[k - 1]
            grads.extrapolation[k - 1] += float(np.sum(ub * (u - bp.tau * d - prev)))
            gb.tau += -w * float(np.sum(ub * d))
            coef_u, coef_d, coef_prev = w, -w * bp.tau, 1.0 - w

        wd = coef_d * ub
        wphi = conv(wd, bp.kernel)
        wz = f.dphi(z) * wphi
        adj[k] += coef_u * ub + conv_adjoint(wz, bp.kernel)
        if coef_prev != 0.0:
            adj[k - 1] += coef_prev * ub
        gb.kernel += kernel_grad(u, wz) + kernel_grad(wd, phi)
        gb.lam += float(np.sum(f.dphi_dlam(z) * wphi))

    for gb in grads.blocks:
        if not spec.flux.has_lambda:
            gb.lam = 0.0
        if not spec.arch.symmetric:
            gb.tau = 0.0
        if spec.arch is not Arch.DFNET:
            gb.alpha = 0.0
    return grads, adj[0].sum(axis=1)


# --------------------------------------------------------------------------
# model files


def _fmt(x) -> str:
    return " ".join("%.17g" % v for v in np.ravel(x))


def save_model(path, spec: NetworkSpec, params: NetworkParams):
    lines = [
        f"# diffnets model arch={spec.arch.value} blocks={spec.blocks} "
        f"channels={spec.channels} flux={spec.flux.value} sharing={spec.sharing.value} "
        f"stability={spec.stability_mode.value} length={spec.length}"
    ]
    for i, bp in enumerate(params.blocks):
        for name in ("kernel", "kernel_out", "bias_in", "bias_out", "lam", "tau", "alpha"):
            val = getattr(bp, name)
            if val is not None:
                lines.append(f"block.{i}.{name} = {_fmt(val)}")
    lines.append(f"extrapolation = {_fmt(params.extrapolation)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path) -> tuple[NetworkSpec, NetworkParams]:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or not text[0].startswith("# diffnets model"):
        raise FormatError(f"{path}: missing model header line")
    try:
        header = dict(kv.split("=", 1) for kv in text[0].split()[3:])
        spec = NetworkSpec(
            arch=header["arch"], blocks=int(header["blocks"]),
            channels=int(header["channels"]), flux=header["flux"],
            sharing=header["sharing"], stability_mode=header["stability"],
            length=int(header["length"]),
        )
        values = {}
        for line in text[1:]:
            if not line.strip():
                continue
            key, _, rhs = line.partition("=")
            values[key.strip()] = np.array([float(v) for v in rhs.split()])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: malformed model file ({exc})") from exc

    c = spec.channels
    blocks = []
    for i in range(spec.n_param_blocks):
        def get(name, shape=None, key=f"block.{i}."):
            v = values.get(key + name)
            if v is None:
                return None
            return float(v[0]) if shape is None else v.reshape(shape)
        blocks.append(BlockParams(
            kernel=get("kernel", (c, c, 3)), lam=get("lam"), tau=get("tau"),
            alpha=get("alpha"), kernel_out=get("kernel_out", (c, c, 3)),
            bias_in=get("bias_in", (c,)), bias_out=get("bias_out", (c,)),
        ))
    params = NetworkParams(blocks, values.get("extrapolation", np.zeros(0)))
    check_params(spec, params)
    return spec, params
