"""Edge-enhancing diffusion inpainting: operator, smoother, FAS multigrid and a CG reference.

Discretisation
--------------
With c the binary mask and h the grid spacing the operator is

    A(u) = c u + (1 - c) L_D(u) / h^2,     A(u) = c f  on the finest grid,

where L_D is minus the divergence term.  L_D is the gradient of a quadratic
energy summed over 2x2 pixel cells.  Each cell contributes the average of
v^T D v over its four one-sided gradient estimates v (x-difference from the
top or bottom row, y-difference from the left or right column), with D the
mean of the four pixel tensors.  The resulting 3x3 stencil is symmetric,
positive semidefinite, and annihilates constants.  Unlike the single
averaged-gradient cell stencil, it does not annihilate the checkerboard.
Axis 0 is y (rows), axis 1 is x (columns).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.ndimage import gaussian_filter

from .errors import ConfigurationError, DimensionError, NumericalError, SolverError

log = logging.getLogger(__name__)

OMEGA = 0.8
COARSE_SWEEPS = 50
FMG_SCHEDULE = (2, 1, 2, 1, 0, 1, 2, 1, 2, 1, 0)


# --------------------------------------------------------------------------
# data model


@dataclass(frozen=True)
class TensorField:
    """Per-pixel symmetric 2x2 tensors [[a, b], [b, c]] with a = D_xx, c = D_yy."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    @classmethod
    def identity(cls, shape) -> TensorField:
        return cls(np.ones(shape), np.zeros(shape), np.ones(shape))

    @property
    def shape(self):
        return self.a.shape

    def eigenvalues(self) -> tuple[np.ndarray, np.ndarray]:
        mean = 0.5 * (self.a + self.c)
        rad = np.hypot(0.5 * (self.a - self.c), self.b)
        return mean - rad, mean + rad

    def restrict(self) -> TensorField:
        return TensorField(restrict_image(self.a), restrict_image(self.b), restrict_image(self.c))


@dataclass(frozen=True)
class InpaintingProblem:
    """Known data ``f`` on mask ``c == 1``; ``tensor`` freezes D and makes the problem linear."""

    f: np.ndarray
    mask: np.ndarray
    lam: float = 0.93
    sigma: float = 0.97
    h: float = 1.0
    tensor: TensorField | None = None

    def __post_init__(self):
        f = np.asarray(self.f, dtype=np.float64)
        m = np.asarray(self.mask, dtype=np.float64)
        if f.ndim != 2 or min(f.shape) < 2:
            raise DimensionError(f"image must be 2D with both sides >= 2, got {f.shape}")
        if m.shape != f.shape:
            raise DimensionError(f"mask shape {m.shape} differs from image shape {f.shape}")
        if not np.all(np.isfinite(f)):
            raise NumericalError("image contains non-finite values")
        if not np.all((m == 0) | (m == 1)):
            raise ConfigurationError("mask entries must be 0 or 1")
        if not m.any():
            raise ConfigurationError("mask has no known pixels")
        if not (self.lam > 0 and self.sigma >= 0 and self.h > 0):
            raise ConfigurationError("need lambda > 0, sigma >= 0 and h > 0")
        if self.tensor is not None and self.tensor.shape != f.shape:
            raise DimensionError("frozen tensor shape differs from image shape")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "mask", m)

    @property
    def shape(self):
        return self.f.shape

    @property
    def rhs(self) -> np.ndarray:
        return self.mask * self.f

    def coarsen(self) -> InpaintingProblem:
        """Rediscretised problem on the grid of twice the spacing."""
        m = restrict_mask(self.mask)
        known = restrict_image(self.mask)
        avg = restrict_image(self.mask * self.f)
        f = np.divide(avg, known, out=np.zeros_like(avg), where=known > 0)
        tensor = self.tensor.restrict() if self.tensor is not None else None
        return replace(self, f=f, mask=m, h=2.0 * self.h, tensor=tensor)

    def initial_guess(self) -> np.ndarray:
        return np.where(self.mask > 0, self.f, self.f[self.mask > 0].mean())


@dataclass
class SolverState:
    """FAS channels: iterate x, nonlinear right-hand side y, linear right-hand side b, residual r."""

    x: np.ndarray
    y: np.ndarray
    b: np.ndarray
    r: np.ndarray

    @classmethod
    def for_problem(cls, prob: InpaintingProblem, x0=None) -> SolverState:
        x = prob.initial_guess() if x0 is None else np.array(x0, dtype=np.float64)
        if x.shape != prob.shape:
            raise DimensionError("initial guess has the wrong shape")
        z = np.zeros(prob.shape)
        state = cls(x, z, prob.rhs, z.copy())
        state.r = eed_residual(x, prob, state.y, state.b)
        return state

    def copy(self) -> SolverState:
        return SolverState(self.x.copy(), self.y.copy(), self.b.copy(), self.r.copy())


@dataclass
class GridHierarchy:
    problems: list[InpaintingProblem]

    @classmethod
    def build(cls, prob: InpaintingProblem, levels: int = 3) -> GridHierarchy:
        if levels < 1:
            raise ConfigurationError("need at least one grid level")
        probs = [prob]
        for _ in range(levels - 1):
            if min(probs[-1].shape) < 4:
                raise ConfigurationError(f"grid {probs[-1].shape} too small to coarsen further")
            probs.append(probs[-1].coarsen())
        return cls(probs)

    @property
    def levels(self) -> int:
        return len(self.problems)


@dataclass
class WorkMeter:
    """Smoothing work in fine-grid sweep equivalents (a sweep on level l costs 4**-l)."""

    units: float = 0.0

    def add(self, sweeps: int, level: int):
        self.units += sweeps * 4.0 ** (-level)


# --------------------------------------------------------------------------
# grid transfer


def _halve(n: int) -> int:
    return (n + 1) // 2


def restrict_image(fine: np.ndarray) -> np.ndarray:
    """Mean over each 2x2 cell; trailing odd rows/columns average what exists."""
    fine = np.asarray(fine, dtype=np.float64)
    r = np.arange(0, fine.shape[0], 2)
    c = np.arange(0, fine.shape[1], 2)
    sums = np.add.reduceat(np.add.reduceat(fine, r, axis=0), c, axis=1)
    rows = np.minimum(2, fine.shape[0] - r)[:, None]
    cols = np.minimum(2, fine.shape[1] - c)[None, :]
    return sums / (rows * cols)


def restrict_mask(fine: np.ndarray) -> np.ndarray:
    """A coarse pixel is known if any pixel of its 2x2 cell is known."""
    fine = np.asarray(fine, dtype=np.float64)
    r = np.arange(0, fine.shape[0], 2)
    c = np.arange(0, fine.shape[1], 2)
    return np.maximum.reduceat(np.maximum.reduceat(fine, r, axis=0), c, axis=1)


def prolong(coarse: np.ndarray, fine_shape) -> np.ndarray:
    """Nearest-neighbour (pixel replication) interpolation."""
    coarse = np.asarray(coarse, dtype=np.float64)
    if coarse.shape != (_halve(fine_shape[0]), _halve(fine_shape[1])):
        raise DimensionError(f"coarse shape {coarse.shape} does not match fine shape {fine_shape}")
    out = np.repeat(np.repeat(coarse, 2, axis=0), 2, axis=1)
    return out[: fine_shape[0], : fine_shape[1]]


# --------------------------------------------------------------------------
# operator


def charbonnier(s2, lam):
    return 1.0 / np.sqrt(1.0 + s2 / (lam * lam))


def eed_tensor(u: np.ndarray, sigma: float, lam: float, h: float = 1.0) -> TensorField:
    """D = g(grad u_s grad u_s^T): eigenvalue g(|grad u_s|^2) across, 1 along structures.

    ``sigma`` is in the same length unit as ``h``; 0 disables presmoothing.
    """
    u = np.asarray(u, dtype=np.float64)
    if sigma < 0:
        raise ConfigurationError("sigma must be nonnegative")
    us = gaussian_filter(u, sigma / h, mode="reflect", truncate=3.0) if sigma > 0 else u
    gy, gx = np.gradient(us, h)
    s2 = gx * gx + gy * gy
    scale = np.divide(charbonnier(s2, lam) - 1.0, s2, out=np.zeros_like(s2), where=s2 > 0)
    return TensorField(1.0 + scale * gx * gx, scale * gx * gy, 1.0 + scale * gy * gy)


def _cells(t: np.ndarray) -> np.ndarray:
    return 0.25 * (t[:-1, :-1] + t[:-1, 1:] + t[1:, :-1] + t[1:, 1:])


def diffusion_apply(u: np.ndarray, t: TensorField) -> np.ndarray:
    """L_D u (no 1/h^2 factor)."""
    a, b, c = _cells(t.a), _cells(t.b), _cells(t.c)
    dxt = u[:-1, 1:] - u[:-1, :-1]
    dxb = u[1:, 1:] - u[1:, :-1]
    dyl = u[1:, :-1] - u[:-1, :-1]
    dyr = u[1:, 1:] - u[:-1, 1:]
    mx = 0.5 * (dxt + dxb)
    my = 0.5 * (dyl + dyr)
    jxt = 0.5 * (a * dxt + b * my)
    jxb = 0.5 * (a * dxb + b * my)
    jyl = 0.5 * (c * dyl + b * mx)
    jyr = 0.5 * (c * dyr + b * mx)
    out = np.zeros_like(u)
    out[:-1, :-1] -= jxt + jyl
    out[:-1, 1:] += jxt - jyr
    out[1:, :-1] += jyl - jxb
    out[1:, 1:] += jxb + jyr
    return out


def diffusion_diagonal(t: TensorField) -> np.ndarray:
    a, b, c = _cells(t.a), _cells(t.b), _cells(t.c)
    plus, minus = 0.5 * (a + c + b), 0.5 * (a + c - b)
    n = t.shape
    d = np.zeros(n)
    d[:-1, :-1] += plus
    d[1:, 1:] += plus
    d[:-1, 1:] += minus
    d[1:, :-1] += minus
    return d


# corners ordered (top-left, top-right, bottom-left, bottom-right)
_DXT = np.array([-1.0, 1.0, 0.0, 0.0])
_DXB = np.array([0.0, 0.0, -1.0, 1.0])
_DYL = np.array([-1.0, 0.0, 1.0, 0.0])
_DYR = np.array([0.0, -1.0, 0.0, 1.0])
_MX, _MY = 0.5 * (_DXT + _DXB), 0.5 * (_DYL + _DYR)
_HA = 0.5 * (np.outer(_DXT, _DXT) + np.outer(_DXB, _DXB))
_HC = 0.5 * (np.outer(_DYL, _DYL) + np.outer(_DYR, _DYR))
_HB = np.outer(_MX, _MY) + np.outer(_MY, _MX)


def diffusion_matrix(t: TensorField) -> sp.csr_matrix:
    """Sparse L_D on row-major pixel numbering, assembled cell by cell."""
    ny, nx = t.shape
    a, b, c = (_cells(v).ravel() for v in (t.a, t.b, t.c))
    idx = np.arange(ny * nx).reshape(ny, nx)
    corners = np.stack(
        [idx[:-1, :-1].ravel(), idx[:-1, 1:].ravel(), idx[1:, :-1].ravel(), idx[1:, 1:].ravel()]
    )
    rows, cols, vals = [], [], []
    for p in range(4):
        for q in range(4):
            v = _HA[p, q] * a + _HB[p, q] * b + _HC[p, q] * c
            rows.append(corners[p])
            cols.append(corners[q])
            vals.append(v)
    n = ny * nx
    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()


def _tensor(prob: InpaintingProblem, u: np.ndarray) -> TensorField:
    if prob.tensor is not None:
        return prob.tensor
    return eed_tensor(u, prob.sigma, prob.lam, prob.h)


def apply_operator(u: np.ndarray, prob: InpaintingProblem, t: TensorField | None = None):
    t = _tensor(prob, u) if t is None else t
    c = prob.mask
    return c * u + (1.0 - c) * diffusion_apply(u, t) / prob.h**2


def eed_residual(u, prob: InpaintingProblem, y=None, b=None) -> np.ndarray:
    """(A(y) + b) - A(u); defaults y = 0 and b = c f give the plain equation residual."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape != prob.shape:
        raise DimensionError("iterate shape differs from the problem")
    b = prob.rhs if b is None else b
    rhs = b if y is None or not np.any(y) else apply_operator(y, prob) + b
    return rhs - apply_operator(u, prob)


def residual_norm(r) -> float:
    """Mean absolute value."""
    return float(np.mean(np.abs(np.asarray(r, dtype=np.float64))))


# --------------------------------------------------------------------------
# smoothing and multigrid


def smooth(state: SolverState, prob: InpaintingProblem, sweeps: int, omega: float = OMEGA,
           work: WorkMeter | None = None, level: int = 0) -> SolverState:
    """Nonlinear Jacobi on A(x) = A(y) + b with D refreshed from x every sweep.

    Known pixels have diagonal rows and are solved exactly; unknown pixels are
    damped with ``omega``.
    """
    if sweeps < 0:
        raise ConfigurationError("sweeps must be >= 0")
    rhs = state.b if not np.any(state.y) else apply_operator(state.y, prob) + state.b
    c = prob.mask
    x = state.x.copy()
    for _ in range(sweeps):
        t = _tensor(prob, x)
        diag = c + (1.0 - c) * diffusion_diagonal(t) / prob.h**2
        if np.any(diag <= 0):
            raise SolverError("zero diagonal entry in the Jacobi smoother")
        r = rhs - (c * x + (1.0 - c) * diffusion_apply(x, t) / prob.h**2)
        x = x + np.where(c > 0, 1.0, omega) * r / diag
    if work is not None:
        work.add(sweeps, level)
    out = SolverState(x, state.y, state.b, rhs - apply_operator(x, prob))
    if not np.all(np.isfinite(out.r)):
        raise NumericalError("smoother produced non-finite values")
    return out


def fas_two_grid(
    state_h: SolverState,
    prob_h: InpaintingProblem,
    prob_H: InpaintingProblem,
    pre_sweeps: int = 3,
    post_sweeps: int = 3,
    coarse_solve=None,
    coarse_init: str = "restricted",
    work: WorkMeter | None = None,
    level: int = 0,
) -> SolverState:
    """Presmooth, restrict (y_H = R x, b_H = R r), coarse solve, correct with P(x_H - y_H), postsmooth.

    ``coarse_init`` picks the coarse starting iterate: ``"restricted"`` (x_H = y_H)
    or ``"zero"``.  ``coarse_solve(state_H)`` defaults to extended smoothing.
    """
    s = smooth(state_h, prob_h, pre_sweeps, work=work, level=level)
    y_H = restrict_image(s.x)
    b_H = restrict_image(s.r)
    if coarse_init == "restricted":
        x_H = y_H.copy()
    elif coarse_init == "zero":
        x_H = np.zeros_like(y_H)
    else:
        raise ConfigurationError(f"unknown coarse initialisation {coarse_init!r}")
    coarse = SolverState(x_H, y_H, b_H, np.zeros_like(y_H))
    if coarse_solve is None:
        coarse = smooth(coarse, prob_H, COARSE_SWEEPS, work=work, level=level + 1)
    else:
        coarse = coarse_solve(coarse)
    x = s.x + prolong(coarse.x, prob_h.shape) - prolong(coarse.y, prob_h.shape)
    return smooth(SolverState(x, s.y, s.b, s.r), prob_h, post_sweeps, work=work, level=level)


def v_cycle(hier: GridHierarchy, state: SolverState, depth: int | None = None, sweeps: int = 3,
            level: int = 0, coarse_sweeps: int = COARSE_SWEEPS, work: WorkMeter | None = None,
            coarse_init: str = "restricted") -> SolverState:
    """Recursive FAS; ``depth`` counts grids used from ``level`` down (1 = smoothing only)."""
    depth = hier.levels - level if depth is None else depth
    if depth < 1 or level + depth > hier.levels:
        raise ConfigurationError(f"depth {depth} not available below level {level}")
    prob = hier.problems[level]
    if depth == 1:
        return smooth(state, prob, coarse_sweeps, work=work, level=level)
    return fas_two_grid(
        state, prob, hier.problems[level + 1], sweeps, sweeps,
        coarse_solve=lambda s: v_cycle(hier, s, depth - 1, sweeps, level + 1, coarse_sweeps,
                                       work, coarse_init),
        coarse_init=coarse_init, work=work, level=level,
    )


@dataclass
class SolveResult:
    u: np.ndarray
    residual: float
    converged: bool
    log: list[tuple[int, int, float]] = field(default_factory=list)
    work: list[float] = field(default_factory=list)
    iterations: int = 0

    def work_to_reach(self, tol: float) -> float:
        """Fine-grid sweep equivalents spent until the finest residual first fell to ``tol``."""
        for (_, level, res), w in zip(self.log, self.work):
            if level == 0 and res <= tol:
                return w
        return math.inf


def fmg_solve(prob: InpaintingProblem, tol: float, schedule=FMG_SCHEDULE, sweeps: int = 3,
              coarse_sweeps: int = COARSE_SWEEPS, max_cycles: int = 1000) -> SolveResult:
    """Full multigrid over ``schedule`` (grid levels, 0 finest), then fine V-cycles until ``tol``.

    Going down a level starts a FAS coarse problem from the current fine
    state; going up either corrects the pending finer state or, on the
    first arrival at that level, starts its own problem from the
    prolongated coarse iterate.  The coarsest grid is smoothed with
    ``coarse_sweeps``, every other visit with ``sweeps``.
    """
    if not tol > 0:
        raise ConfigurationError("tolerance must be positive")
    schedule = list(schedule)
    if not schedule or schedule[-1] != 0:
        raise ConfigurationError("schedule must end on the finest grid")
    hier = GridHierarchy.build(prob, max(schedule) + 1)
    coarsest = hier.levels - 1
    work = WorkMeter()
    result = SolveResult(prob.initial_guess(), math.inf, False)

    def record(level, state):
        res = residual_norm(state.r)
        result.log.append((len(result.log), level, res))
        result.work.append(work.units)
        return res

    states: dict[int, SolverState] = {}
    prev = None
    for level in schedule:
        if prev is None:
            p = hier.problems[level]
            states[level] = SolverState.for_problem(p)
        elif level > prev:
            for lv in range(prev + 1, level + 1):
                fine = states[lv - 1]
                y = restrict_image(fine.x)
                states[lv] = SolverState(y.copy(), y, restrict_image(fine.r), np.zeros_like(y))
        elif level < prev:
            for lv in range(prev - 1, level - 1, -1):
                coarse = states.pop(lv + 1)
                p = hier.problems[lv]
                if lv in states:
                    s = states[lv]
                    x = s.x + prolong(coarse.x, p.shape) - prolong(coarse.y, p.shape)
                    states[lv] = SolverState(x, s.y, s.b, s.r)
                else:
                    states[lv] = SolverState.for_problem(p, prolong(coarse.x, p.shape))
        n = coarse_sweeps if level == coarsest else sweeps
        states[level] = smooth(states[level], hier.problems[level], n, work=work, level=level)
        res = record(level, states[level])
        prev = level
        if level == 0 and res <= tol and len(states) == 1:
            break

    state = states[0]
    res = residual_norm(state.r)
    cycles = 0
    while res > tol and cycles < max_cycles:
        state = v_cycle(hier, state, sweeps=sweeps, coarse_sweeps=coarse_sweeps, work=work)
        res = record(0, state)
        cycles += 1
    if res > tol:
        log.warning("fmg_solve stopped at residual %.3e after %d V-cycles", res, cycles)
    result.u, result.residual, result.converged, result.iterations = state.x, res, res <= tol, cycles
    return result


def iterate_solve(prob: InpaintingProblem, tol: float, method: str = "vcycle", levels: int = 3,
                  sweeps: int = 3, coarse_sweeps: int = COARSE_SWEEPS, max_iter: int = 1000) -> SolveResult:
    """Repeat V-cycles (``vcycle``), two-grid cycles (``twogrid``) or single sweeps (``singlegrid``)."""
    if not tol > 0:
        raise ConfigurationError("tolerance must be positive")
    depth = {"vcycle": levels, "twogrid": 2, "singlegrid": 1}.get(method)
    if depth is None:
        raise ConfigurationError(f"unknown iterative method {method!r}")
    hier = GridHierarchy.build(prob, depth)
    work = WorkMeter()
    state = SolverState.for_problem(prob)
    result = SolveResult(state.x, residual_norm(state.r), False)
    res = result.residual
    for it in range(1, max_iter + 1):
        if res <= tol:
            break
        if depth == 1:
            state = smooth(state, prob, 1, work=work)
        else:
            state = v_cycle(hier, state, depth, sweeps, coarse_sweeps=coarse_sweeps, work=work)
        res = residual_norm(state.r)
        result.log.append((it, 0, res))
        result.work.append(work.units)
        result.iterations = it
    result.u, result.residual, result.converged = state.x, res, res <= tol
    return result


# --------------------------------------------------------------------------
# reference solver


def frozen_solve(prob: InpaintingProblem, t: TensorField, x0: np.ndarray, rtol: float = 1e-12,
                 maxiter: int | None = None) -> np.ndarray:
    """Solve the linear problem with tensor ``t`` on the unknown pixels by conjugate gradients."""
    m = diffusion_matrix(t)
    known = prob.mask.ravel() > 0
    unknown = ~known
    u = np.array(x0, dtype=np.float64).ravel()
    u[known] = prob.f.ravel()[known]
    if not unknown.any():
        return u.reshape(prob.shape)
    a_uu = m[unknown][:, unknown]
    rhs = -(m[unknown][:, known] @ u[known])
    diag = a_uu.diagonal()
    if np.any(diag <= 0):
        raise SolverError("operator restricted to unknown pixels has a nonpositive diagonal")
    pre = sp.diags(1.0 / diag)
    sol, info = spla.cg(a_uu, rhs, x0=u[unknown], rtol=rtol, atol=0.0, M=pre,
                        maxiter=maxiter or 10 * unknown.sum())
    if info < 0:
        raise SolverError(f"conjugate gradients broke down (info={info})")
    if info > 0:
        err = np.linalg.norm(a_uu @ sol - rhs) / max(np.linalg.norm(rhs), 1e-300)
        log.warning("CG did not reach rtol=%g after %d iterations (relative residual %.2e)",
                    rtol, info, err)
    u[unknown] = sol
    return u.reshape(prob.shape)


def cg_reference_solve(prob: InpaintingProblem, tol: float, max_outer: int = 500,
                       x0=None) -> SolveResult:
    """Lagged diffusivity: freeze D at the current iterate, solve the linear system, repeat."""
    if not tol > 0:
        raise ConfigurationError("tolerance must be positive")
    u = prob.initial_guess() if x0 is None else np.asarray(x0, dtype=np.float64)
    result = SolveResult(u, math.inf, False)
    for it in range(max_outer + 1):
        t = _tensor(prob, u)
        res = residual_norm(prob.rhs - apply_operator(u, prob, t))
        result.log.append((it, 0, res))
        if res <= tol:
            break
        if it == max_outer:
            break
        u = frozen_solve(prob, t, u, rtol=1e-13)
        if prob.tensor is not None:
            res = residual_norm(eed_residual(u, prob))
            result.log.append((it + 1, 0, res))
            break
    result.u, result.residual, result.converged, result.iterations = u, res, res <= tol, it
    if not result.converged:
        log.warning("lagged-diffusivity iteration stopped at residual %.3e", res)
    return result


# --------------------------------------------------------------------------
# benchmark data


def benchmark_image(n: int = 256, seed: int = 0) -> np.ndarray:
    """Deterministic gray-value test scene: smooth shading, discs, bars and a ramp, in [0, 255]."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:n, 0:n] / n
    img = 90.0 + 60.0 * np.sin(2.5 * xx + 1.0) * np.cos(1.7 * yy)
    for _ in range(6):
        cx, cy, r = rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85), rng.uniform(0.05, 0.18)
        img[(xx - cx) ** 2 + (yy - cy) ** 2 < r * r] = rng.uniform(0, 255)
    for _ in range(4):
        x0, y0 = rng.uniform(0, 0.8, 2)
        w, hgt = rng.uniform(0.05, 0.3, 2)
        sel = (xx > x0) & (xx < x0 + w) & (yy > y0) & (yy < y0 + hgt)
        img[sel] = rng.uniform(0, 255) + 40.0 * (xx[sel] - x0) / w
    return np.clip(img, 0.0, 255.0)


def random_mask(shape, density: float, seed: int = 0) -> np.ndarray:
    if not 0 < density <= 1:
        raise ConfigurationError("density must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    n = int(np.prod(shape))
    k = max(1, int(round(density * n)))
    m = np.zeros(n)
    m[rng.choice(n, size=k, replace=False)] = 1.0
    return m.reshape(shape)
