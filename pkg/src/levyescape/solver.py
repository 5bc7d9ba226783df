"""Finite-difference solver for the nonlocal exterior-value problems.

The generator of

    dv = f1 dt + sigma1 dL1,    dw = f2 dt + sigma2 dL2

is discretized on a rectangle ``D = (a, b) x (c, d)`` after the affine map
``v = (b-a)/2 s + (a+b)/2``, ``w = (d-c)/2 k + (c+d)/2`` onto ``(-1, 1)**2``.
Each axis contributes

* an upwind (or central) drift difference,
* a killing term for the jump mass that leaves ``D`` along that axis,
* the truncated principal-value integral over the rest of ``(-1, 1)``:
  trapezoidal sum on grid points, with the singular near field handled by
  the zeta-function correction ``-zeta(alpha-1) h**(2-alpha) m_ss``.

Along each axis the nonlocal part is the same dense kernel for every grid
line, so the operator is applied matrix-free with two BLAS products. The
exterior values sit on a one-node ring around the interior grid; known ring
values and the far exterior integral over the target strip are moved to the
right-hand side.

At ``alpha = 2`` the axis operator is the 3-point second difference with
coefficient ``sigma**2 / 2``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, asdict

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import zeta

from .errors import (ConfigError, GeometryError, LinearSolveFailure,
                     NonFiniteSolution, OutOfDomain, OutOfRegion)
from .model import describe_drift
from .noise import NoiseSpec, jump_constant

S_STAR = (-2.7277, 1.2436)


@dataclass(frozen=True)
class Region:
    a: float = -5.9277
    b: float = 1.0723
    c: float = -1.7564
    d: float = 5.2436

    def __post_init__(self):
        if not (self.a < self.b and self.c < self.d):
            raise ConfigError("region requires a < b and c < d")

    @property
    def half_widths(self):
        return (self.b - self.a) / 2.0, (self.d - self.c) / 2.0

    @property
    def center(self):
        return (self.a + self.b) / 2.0, (self.c + self.d) / 2.0

    @property
    def area(self):
        return (self.b - self.a) * (self.d - self.c)

    def contains(self, v, w):
        return (v > self.a) & (v < self.b) & (w > self.c) & (w < self.d)

    @property
    def box(self):
        return (self.a, self.b, self.c, self.d)


@dataclass(frozen=True)
class TargetStrip:
    """``E = [a_p, b_p) x [c, d]`` to the right of the region."""

    a_p: float = 1.0723
    b_p: float = float("inf")

    def __post_init__(self):
        if not self.a_p < self.b_p:
            raise ConfigError("target strip requires a_p < b_p")

    def validate(self, region: Region):
        if self.a_p < region.b:
            raise GeometryError(f"target strip starts at {self.a_p} < region.b = {region.b}")

    def contains(self, v, w, region: Region):
        return (v >= self.a_p) & (v < self.b_p) & (w >= region.c) & (w <= region.d)


@dataclass(frozen=True)
class Grid:
    """Interior nodes ``s_j = -1 + j h`` with ``h = 2 / (n + 1)``, ``j = 1..n``."""

    n_v: int
    n_w: int

    def __post_init__(self):
        if self.n_v < 1 or self.n_w < 1:
            raise ConfigError("grid sizes must be positive")

    @property
    def h_s(self):
        return 2.0 / (self.n_v + 1)

    @property
    def h_k(self):
        return 2.0 / (self.n_w + 1)

    @property
    def s(self):
        return -1.0 + self.h_s * np.arange(1, self.n_v + 1)

    @property
    def k(self):
        return -1.0 + self.h_k * np.arange(1, self.n_w + 1)

    @property
    def size(self):
        return self.n_v * self.n_w

    def coordinates(self, region: Region):
        """Unscaled node coordinates ``(v, w)`` along each axis."""
        return unscale(region, self.s, self.k)


@dataclass(frozen=True)
class SolverConfig:
    n_v: int = 209
    n_w: int = 209
    drift_scheme: str = "upwind"
    quadrature: str = "zeta"
    jump_convention: str = "exact"
    rtol: float = 1e-10
    max_iter: int | None = None
    restart: int = 60

    def __post_init__(self):
        if self.n_v < 1 or self.n_w < 1:
            raise ConfigError("solver.n_v and solver.n_w must be positive")
        if self.drift_scheme not in ("upwind", "central"):
            raise ConfigError("solver.drift_scheme must be 'upwind' or 'central'")
        if self.quadrature not in ("zeta", "taylor"):
            raise ConfigError("solver.quadrature must be 'zeta' or 'taylor'")
        if self.jump_convention not in ("exact", "halved"):
            raise ConfigError("solver.jump_convention must be 'exact' or 'halved'")
        if not 0.0 < self.rtol <= 1e-6:
            raise ConfigError("solver.rtol must lie in (0, 1e-6]")

    @property
    def grid(self):
        return Grid(self.n_v, self.n_w)


def rescale(region: Region, v, w):
    """Map ``(v, w)`` in the closed region to ``(s, k)`` in ``[-1, 1]**2``."""
    lv, lw = region.half_widths
    cv, cw = region.center
    s = (np.asarray(v, dtype=float) - cv) / lv
    k = (np.asarray(w, dtype=float) - cw) / lw
    eps = 1e-12
    if np.any(np.abs(s) > 1 + eps) or np.any(np.abs(k) > 1 + eps):
        raise OutOfRegion("point lies outside the region")
    return s, k


def unscale(region: Region, s, k):
    lv, lw = region.half_widths
    cv, cw = region.center
    return lv * np.asarray(s, dtype=float) + cv, lw * np.asarray(k, dtype=float) + cw


def axis_kernel(n, alpha, quadrature="zeta"):
    """Dense ``(n+2, n)`` matrix of the 1D jump operator on ``(-1, 1)``.

    Column ``j`` holds the weights applied to the extended vector (ring node,
    n interior nodes, ring node) to produce the operator at interior node j,
    before multiplication by ``sigma**alpha * C * L**(-alpha)``. At
    ``alpha = 2`` it is the second difference scaled by 1/2.
    """
    h = 2.0 / (n + 1)
    cols = np.arange(n)
    T = np.zeros((n + 2, n))
    if alpha == 2.0:
        c2 = 0.5 / h ** 2
        T[cols, cols] = c2
        T[cols + 2, cols] = c2
        T[cols + 1, cols] = -2.0 * c2
        return T
    s = -1.0 + h * (cols + 1)
    src = np.arange(n + 2)
    dist = np.abs(src[:, None] - (cols[None, :] + 1)).astype(float)
    with np.errstate(divide="ignore"):
        W = np.where(dist > 0, h ** (-alpha) / dist ** (1.0 + alpha), 0.0)
    W[0, :] *= 0.5
    W[-1, :] *= 0.5
    if quadrature == "zeta":
        c2 = -zeta(alpha - 1.0) * h ** (-alpha)
    else:
        c2 = h ** (-alpha) / (2.0 - alpha)
    T += W
    T[cols, cols] += c2
    T[cols + 2, cols] += c2
    kill = ((1.0 + s) ** (-alpha) + (1.0 - s) ** (-alpha)) / alpha
    T[cols + 1, cols] = -W.sum(axis=0) - 2.0 * c2 - kill
    return T


def axis_exit_rate(n, alpha):
    """Unscaled jump mass leaving ``(-1, 1)`` from each interior node."""
    h = 2.0 / (n + 1)
    s = -1.0 + h * np.arange(1, n + 1)
    return ((1.0 + s) ** (-alpha) + (1.0 - s) ** (-alpha)) / alpha


class GeneratorOperator:
    """Discrete generator on the interior grid, applied matrix-free.

    Immutable after construction; share freely between solves.
    """

    def __init__(self, drift, spec: NoiseSpec, region: Region, cfg: SolverConfig):
        if not 0.0 < spec.alpha <= 2.0:
            raise OutOfDomain(f"alpha must lie in (0,2], got {spec.alpha}")
        self.drift, self.spec, self.region, self.cfg = drift, spec, region, cfg
        self.grid = grid = cfg.grid
        alpha = spec.alpha
        lv, lw = region.half_widths
        if spec.brownian:
            self.kappa = (spec.sigma1 ** 2 / lv ** 2, spec.sigma2 ** 2 / lw ** 2)
        else:
            C = jump_constant(alpha, cfg.jump_convention)
            self.kappa = (spec.sigma1 ** alpha * C * lv ** (-alpha),
                          spec.sigma2 ** alpha * C * lw ** (-alpha))
        self.Tv = axis_kernel(grid.n_v, alpha, cfg.quadrature)
        self.Tw = axis_kernel(grid.n_w, alpha, cfg.quadrature)
        self.TwT = np.ascontiguousarray(self.Tw.T)
        v, w = grid.coordinates(region)
        V, W = np.meshgrid(v, w)
        f1, f2 = drift(V, W)
        self.f1 = np.broadcast_to(np.asarray(f1, dtype=float), V.shape).copy()
        self.f2 = np.broadcast_to(np.asarray(f2, dtype=float), V.shape).copy()
        b1 = self.f1 / lv / grid.h_s
        b2 = self.f2 / lw / grid.h_k
        if cfg.drift_scheme == "upwind":
            # coefficients on (next - centre) and (centre - previous)
            self._d1 = (np.maximum(b1, 0.0), np.minimum(b1, 0.0))
            self._d2 = (np.maximum(b2, 0.0), np.minimum(b2, 0.0))
        else:
            self._d1 = (0.5 * b1, 0.5 * b1)
            self._d2 = (0.5 * b2, 0.5 * b2)
        self.shape = (grid.n_w, grid.n_v)
        self.n = grid.size

    # -- application ---------------------------------------------------------
    def apply_extended(self, M):
        """Operator at interior nodes given values on the ringed grid ``(n_w+2, n_v+2)``."""
        k1, k2 = self.kappa
        C = M[1:-1, 1:-1]
        out = np.zeros(self.shape)
        if k1:
            out += k1 * (M[1:-1, :] @ self.Tv)
        if k2:
            out += k2 * (self.TwT @ M[:, 1:-1])
        p1, m1 = self._d1
        p2, m2 = self._d2
        out += p1 * (M[1:-1, 2:] - C) + m1 * (C - M[1:-1, :-2])
        out += p2 * (M[2:, 1:-1] - C) + m2 * (C - M[:-2, 1:-1])
        return out

    def matvec(self, x):
        M = np.zeros((self.grid.n_w + 2, self.grid.n_v + 2))
        M[1:-1, 1:-1] = np.reshape(x, self.shape)
        return self.apply_extended(M).ravel()

    def linear_operator(self):
        return spla.LinearOperator((self.n, self.n), matvec=self.matvec, dtype=float)

    def boundary_contribution(self, ring):
        """Operator applied to the ring values alone (interior set to zero)."""
        M = np.array(ring, dtype=float, copy=True)
        M[1:-1, 1:-1] = 0.0
        return self.apply_extended(M)

    def exit_rate(self):
        """Total rate of jumps from each node that land outside the region."""
        if self.spec.brownian:
            return np.zeros(self.shape)
        alpha = self.spec.alpha
        k1, k2 = self.kappa
        rv = axis_exit_rate(self.grid.n_v, alpha)
        rw = axis_exit_rate(self.grid.n_w, alpha)
        return k1 * rv[None, :] + k2 * rw[:, None]

    # -- sparse forms --------------------------------------------------------
    def diagonal(self):
        k1, k2 = self.kappa
        dv = np.diag(self.Tv[1:-1, :])
        dw = np.diag(self.Tw[1:-1, :])
        p1, m1 = self._d1
        p2, m2 = self._d2
        return k1 * dv[None, :] + k2 * dw[:, None] - p1 + m1 - p2 + m2

    def local_matrix(self):
        """Sparse 5-point part: full diagonal plus nearest-neighbour couplings."""
        nv, nw = self.grid.n_v, self.grid.n_w
        k1, k2 = self.kappa
        idx = np.arange(self.n).reshape(self.shape)
        p1, m1 = self._d1
        p2, m2 = self._d2
        j = np.arange(nv)
        i = np.arange(nw)
        east = k1 * self.Tv[j + 2, j][None, :] + p1
        west = k1 * self.Tv[j, j][None, :] - m1
        north = k2 * self.Tw[i + 2, i][:, None] + p2
        south = k2 * self.Tw[i, i][:, None] - m2
        rows = [idx.ravel(), idx[:, :-1].ravel(), idx[:, 1:].ravel(),
                idx[:-1, :].ravel(), idx[1:, :].ravel()]
        cols = [idx.ravel(), idx[:, 1:].ravel(), idx[:, :-1].ravel(),
                idx[1:, :].ravel(), idx[:-1, :].ravel()]
        vals = [self.diagonal().ravel(), east[:, :-1].ravel(), west[:, 1:].ravel(),
                north[:-1, :].ravel(), south[1:, :].ravel()]
        return sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(self.n, self.n))

    def to_sparse(self):
        """Full assembled matrix; dense rows, intended for small grids and tests."""
        nv, nw = self.grid.n_v, self.grid.n_w
        k1, k2 = self.kappa
        Kv = sp.csr_matrix(self.Tv[1:-1, :].T)
        Kw = sp.csr_matrix(self.Tw[1:-1, :].T)
        A = k1 * sp.kron(sp.eye(nw), Kv) + k2 * sp.kron(Kw, sp.eye(nv))
        # drift and diagonal corrections from the local part
        L = self.local_matrix()
        near = (k1 * sp.kron(sp.eye(nw), _tri(Kv)) + k2 * sp.kron(_tri(Kw), sp.eye(nv)))
        return (A - near + L).tocsr()


def _tri(K):
    K = sp.csr_matrix(K)
    return sp.triu(sp.tril(K, 1), -1)


def assemble(drift, spec: NoiseSpec, region: Region = Region(), cfg: SolverConfig = SolverConfig()):
    """Build the discrete generator; deterministic in its inputs."""
    return GeneratorOperator(drift, spec, region, cfg)


def fep_source(spec: NoiseSpec, region: Region, target: TargetStrip, grid: Grid, convention="exact"):
    """Far-exterior contribution of jumps landing in the target strip, with sign moved to the RHS.

    ``psi = -(sigma1**alpha C / alpha) [(a' - v)**-alpha - (b' - v)**-alpha]``;
    zero at ``alpha = 2`` where the target enters through the ring instead.
    """
    target.validate(region)
    shape = (grid.n_w, grid.n_v)
    if spec.brownian or spec.sigma1 == 0.0:
        return np.zeros(shape)
    alpha = spec.alpha
    v, _ = grid.coordinates(region)
    coef = spec.sigma1 ** alpha * jump_constant(alpha, convention) / alpha
    far = (target.a_p - v) ** (-alpha)
    if np.isfinite(target.b_p):
        far = far - (target.b_p - v) ** (-alpha)
    return np.broadcast_to(-coef * far, shape).copy()


@dataclass
class ScalarField:
    """Solution values on the interior nodes plus exterior semantics."""

    kind: str
    region: Region
    grid: Grid
    values: np.ndarray
    ring: np.ndarray
    target: TargetStrip | None = None
    meta: dict = field(default_factory=dict)

    @property
    def v(self):
        return self.grid.coordinates(self.region)[0]

    @property
    def w(self):
        return self.grid.coordinates(self.region)[1]

    def exterior(self, v, w):
        if self.kind == "fep" and self.target is not None:
            return np.where(self.target.contains(v, w, self.region), 1.0, 0.0)
        return np.zeros(np.broadcast(v, w).shape)

    def at(self, v, w):
        """Evaluate by bilinear interpolation inside, exterior data outside."""
        v = np.asarray(v, dtype=float)
        w = np.asarray(w, dtype=float)
        inside = self.region.contains(v, w)
        out = self.exterior(v, w).astype(float)
        if np.any(inside):
            s, k = rescale(self.region, np.where(inside, v, self.region.center[0]),
                           np.where(inside, w, self.region.center[1]))
            ext = self.ring.copy()
            ext[1:-1, 1:-1] = self.values
            x = (s + 1.0) / self.grid.h_s
            y = (k + 1.0) / self.grid.h_k
            j = np.clip(np.floor(x).astype(int), 0, self.grid.n_v)
            i = np.clip(np.floor(y).astype(int), 0, self.grid.n_w)
            tx, ty = x - j, y - i
            val = ((1 - tx) * (1 - ty) * ext[i, j] + tx * (1 - ty) * ext[i, j + 1]
                   + (1 - tx) * ty * ext[i + 1, j] + tx * ty * ext[i + 1, j + 1])
            out = np.where(inside, val, out)
        return out[()] if out.ndim == 0 else out

    def max(self):
        return float(self.values.max())

    def min(self):
        return float(self.values.min())


def _ring(kind, region, grid, target):
    ring = np.zeros((grid.n_w + 2, grid.n_v + 2))
    if kind == "fep" and target.a_p <= region.b:
        # right edge v = b belongs to E (closed on the left)
        ring[:, -1] = 1.0
    return ring


def _solve(op: GeneratorOperator, rhs):
    cfg = op.cfg
    b = rhs.ravel()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(op.shape), 0.0, 0
    lu = spla.splu(op.local_matrix().tocsc(), permc_spec="COLAMD")
    M = spla.LinearOperator((op.n, op.n), matvec=lu.solve, dtype=float)
    A = op.linear_operator()
    max_iter = cfg.max_iter or 10 * op.n
    x = lu.solve(b)
    iterations = 0
    res = np.linalg.norm(b - A.matvec(x)) / bnorm
    while res > cfg.rtol and iterations < max_iter:
        count = [0]

        def cb(_):
            count[0] += 1

        x, _ = spla.gmres(A, b, x0=x, M=M, rtol=cfg.rtol * 0.5, atol=0.0,
                          restart=cfg.restart, maxiter=max(1, (max_iter - iterations) // cfg.restart + 1),
                          callback=cb, callback_type="pr_norm")
        iterations += max(count[0], 1)
        new_res = np.linalg.norm(b - A.matvec(x)) / bnorm
        if new_res >= res and new_res > cfg.rtol:
            res = new_res
            break
        res = new_res
    if res > cfg.rtol:
        raise LinearSolveFailure(f"relative residual {res:.3e} above {cfg.rtol:.1e} "
                                 f"after {iterations} iterations", residual=res)
    return x.reshape(op.shape), res, iterations


def _metadata(op, kind, target, residual, iterations, wall):
    meta = {
        "kind": kind,
        "region": asdict(op.region),
        "alpha": op.spec.alpha,
        "sigma1": op.spec.sigma1,
        "sigma2": op.spec.sigma2,
        "grid": [op.grid.n_v, op.grid.n_w],
        "scheme": {"drift": op.cfg.drift_scheme, "quadrature": op.cfg.quadrature,
                   "jump_convention": op.cfg.jump_convention},
        "tolerance": op.cfg.rtol,
        "residual": residual,
        "iterations": iterations,
        "wall_time": wall,
        "drift": describe_drift(op.drift),
    }
    if target is not None:
        meta["target"] = asdict(target)
    return meta


def solve_fep(drift, spec: NoiseSpec, region: Region = Region(), target: TargetStrip = TargetStrip(),
              cfg: SolverConfig = SolverConfig(), operator: GeneratorOperator | None = None):
    """First escape probability into ``target`` for every interior node."""
    t0 = time.perf_counter()
    target.validate(region)
    spec.require_noise()
    if not spec.brownian and spec.sigma1 == 0.0:
        raise ConfigError("FEP with sigma1 = 0 and alpha < 2 is unsupported")
    op = operator or assemble(drift, spec, region, cfg)
    ring = _ring("fep", region, op.grid, target)
    rhs = fep_source(spec, region, target, op.grid, op.cfg.jump_convention) - op.boundary_contribution(ring)
    values, res, its = _solve(op, rhs)
    slack = 10 * op.cfg.rtol
    if values.min() < -slack or values.max() > 1 + slack:
        raise NonFiniteSolution(f"FEP outside [0,1]: [{values.min():.3e}, {values.max():.6f}]")
    meta = _metadata(op, "fep", target, res, its, time.perf_counter() - t0)
    return ScalarField("fep", region, op.grid, values, ring, target, meta)


def solve_mfet(drift, spec: NoiseSpec, region: Region = Region(), cfg: SolverConfig = SolverConfig(),
               operator: GeneratorOperator | None = None):
    """Mean first exit time from ``region`` for every interior node."""
    t0 = time.perf_counter()
    spec.require_noise()
    op = operator or assemble(drift, spec, region, cfg)
    ring = _ring("mfet", region, op.grid, None)
    rhs = -np.ones(op.shape)
    values, res, its = _solve(op, rhs)
    if values.min() < -10 * op.cfg.rtol * max(1.0, values.max()):
        raise NonFiniteSolution(f"negative MFET {values.min():.3e}")
    meta = _metadata(op, "mfet", None, res, its, time.perf_counter() - t0)
    return ScalarField("mfet", region, op.grid, values, ring, None, meta)


@dataclass
class ConvergenceTable:
    grids: list
    h: list
    max_deltas: list
    max_orders: list
    point: tuple | None = None
    point_values: list = field(default_factory=list)
    point_deltas: list = field(default_factory=list)
    point_orders: list = field(default_factory=list)

    def rows(self):
        out = []
        for i, g in enumerate(self.grids):
            out.append({
                "n_v": g[0], "n_w": g[1], "h": self.h[i],
                "max_delta": self.max_deltas[i - 1] if i else None,
                "max_order": self.max_orders[i - 2] if i > 1 else None,
                "point_value": self.point_values[i] if self.point_values else None,
            })
        return out


def _order(d0, d1):
    if d0 > 0 and d1 > 0:
        return float(np.log2(d0 / d1))
    return float("nan")


def convergence_study(solve, grids, point=None):
    """Successive-refinement study.

    ``solve(n_v, n_w)`` returns a :class:`ScalarField`. Each grid must nest
    in the previous one (``n -> 2 n + 1`` interior nodes per refined axis;
    an axis may also stay fixed). Deltas are max-norm differences at common
    nodes; orders are ``log2`` of successive delta ratios.
    """
    grids = [tuple(g) if np.ndim(g) else (int(g), int(g)) for g in grids]
    if len(grids) < 3:
        raise ConfigError("convergence study needs at least three grids")
    for (nv0, nw0), (nv1, nw1) in zip(grids, grids[1:]):
        if nv1 != 2 * nv0 + 1 or nw1 not in (nw0, 2 * nw0 + 1):
            raise ConfigError("grids must refine by 2x (n -> 2n+1 interior nodes)")
    fields = [solve(nv, nw) for nv, nw in grids]
    deltas = []
    for coarse, fine in zip(fields, fields[1:]):
        si = slice(1, None, 2)
        wi = si if fine.grid.n_w != coarse.grid.n_w else slice(None)
        deltas.append(float(np.max(np.abs(fine.values[wi, si] - coarse.values))))
    orders = [_order(d0, d1) for d0, d1 in zip(deltas, deltas[1:])]
    table = ConvergenceTable(grids, [f.grid.h_s for f in fields], deltas, orders, point)
    if point is not None:
        table.point_values = [float(f.at(*point)) for f in fields]
        table.point_deltas = [abs(b - a) for a, b in zip(table.point_values, table.point_values[1:])]
        table.point_orders = [_order(d0, d1) for d0, d1 in zip(table.point_deltas,
                                                                table.point_deltas[1:])]
    return table
