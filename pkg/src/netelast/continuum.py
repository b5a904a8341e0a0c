"""Grid solver for the homogenized nonlocal elastodynamics equation.

The limit model couples an anisotropic second-order operator, built
from the effective elasticity tensor, with a nonlocal convolution
against the pair kernel:

    rho u_tt = -(L u + N u),   u = 0 on the box boundary,

where (L u)_r = -sum a_npqr d_q d_p u_n and N u integrates
G(x - y) (u(x) - u(y)) over the box.  Both operators act on fields
stored node-wise on a uniform grid, L by central differences and N by
FFT convolution with the same split into a multiplicative part and a
cross-correlation that the discrete long-range coupling uses.  Time
stepping is leapfrog (velocity Verlet), sharing the trajectory record
and compensated-energy bookkeeping of the particle integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.fft import irfftn, next_fast_len, rfftn

from .dynamics import Trajectory
from .errors import ConfigurationError, SolverError
from .interaction import _COMP_INDEX, _COMP_PAIRS, KProfile
from .lattice import DomainBox
from .meso import SymTensor4


@dataclass(frozen=True)
class ContinuumGrid:
    """Uniform node grid over the box with Dirichlet boundary nodes."""

    box: DomainBox
    cells: int

    def __post_init__(self):
        if self.cells < 2:
            raise ConfigurationError("grid needs at least two cells per side")

    @property
    def spacing(self) -> float:
        return self.box.side / self.cells

    @property
    def n_nodes(self) -> int:
        return self.cells + 1

    @property
    def shape(self) -> tuple[int, int, int, int]:
        m = self.n_nodes
        return (m, m, m, 3)

    def nodes(self) -> np.ndarray:
        m = self.n_nodes
        out = np.empty(self.shape)
        for a in range(3):
            axis = self.box.lo[a] + self.spacing * np.arange(m)
            out[..., a] = axis.reshape([m if b == a else 1 for b in range(3)])
        return out

    def interior(self) -> np.ndarray:
        m = self.n_nodes
        mask = np.zeros((m, m, m), dtype=bool)
        mask[1:-1, 1:-1, 1:-1] = True
        return mask

    def zero_boundary(self, field: np.ndarray) -> np.ndarray:
        out = np.array(field, dtype=float, copy=True)
        out[0, :, :] = out[-1, :, :] = 0.0
        out[:, 0, :] = out[:, -1, :] = 0.0
        out[:, :, 0] = out[:, :, -1] = 0.0
        return out

    def sample(self, fn) -> np.ndarray:
        """Evaluate a callable of (Q, 3) points and clamp the boundary."""
        pts = self.nodes().reshape(-1, 3)
        vals = np.asarray(fn(pts), dtype=float).reshape(self.shape)
        return self.zero_boundary(vals)

    def inner(self, u: np.ndarray, w: np.ndarray) -> float:
        return self.spacing**3 * float(np.vdot(u, w))

    def interpolate(self, field: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Trilinear interpolation of a node field at arbitrary points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        rel = (pts - self.box.lo) / self.spacing
        cell = np.clip(np.floor(rel).astype(int), 0, self.cells - 1)
        t = rel - cell
        out = np.zeros((len(pts), field.shape[-1]))
        for dx in (0, 1):
            wx = np.where(dx == 1, t[:, 0], 1.0 - t[:, 0])
            for dy in (0, 1):
                wy = np.where(dy == 1, t[:, 1], 1.0 - t[:, 1])
                for dz in (0, 1):
                    wz = np.where(dz == 1, t[:, 2], 1.0 - t[:, 2])
                    w = wx * wy * wz
                    out += w[:, None] * field[
                        cell[:, 0] + dx, cell[:, 1] + dy, cell[:, 2] + dz
                    ]
        return out


def _d2(f: np.ndarray, axis: int, dx: float) -> np.ndarray:
    return (np.roll(f, -1, axis) - 2.0 * f + np.roll(f, 1, axis)) / (dx * dx)


def _cross(f: np.ndarray, a1: int, a2: int, dx: float) -> np.ndarray:
    fwd = np.roll(f, -1, a1)
    bwd = np.roll(f, 1, a1)
    return (
        np.roll(fwd, -1, a2) - np.roll(fwd, 1, a2) - np.roll(bwd, -1, a2) + np.roll(bwd, 1, a2)
    ) / (4.0 * dx * dx)


class LocalOperator:
    """Divergence-form anisotropic operator on the Dirichlet grid.

    The wrap-around of the rolled stencils only pollutes boundary rows,
    which are zeroed, so the interior sees plain central differences
    and the operator stays exactly symmetric.
    """

    def __init__(self, tensor: SymTensor4, grid: ContinuumGrid):
        self.grid = grid
        self.tensor = tensor
        terms = []
        for n in range(3):
            for p in range(3):
                for q in range(3):
                    for r in range(3):
                        c = tensor.component(n, p, q, r)
                        if c != 0.0:
                            terms.append((n, p, q, r, c))
        self._terms = terms

    def apply(self, field: np.ndarray) -> np.ndarray:
        dx = self.grid.spacing
        u = field
        out = np.zeros_like(u)
        for n, p, q, r, c in self._terms:
            if p == q:
                out[..., r] -= c * _d2(u[..., n], p, dx)
            else:
                out[..., r] -= c * _cross(u[..., n], p, q, dx)
        return self.grid.zero_boundary(out)


class NonlocalOperator:
    """Convolution against the limit pair kernel, midpoint weights.

    The node sum splits as D(x) u(x) - (G * u)(x) with D the kernel row
    sums; both pieces reuse one cached set of FFT images, and the cube
    volume of a node carries the quadrature weight.
    """

    def __init__(self, grid: ContinuumGrid, profile: KProfile, modulus: int):
        if modulus < 1:
            raise ConfigurationError("modulus must be a positive integer")
        self.grid = grid
        self.profile = profile
        self.modulus = modulus
        self._build()

    def _build(self):
        m = self.grid.n_nodes
        dx = self.grid.spacing
        offs = dx * np.arange(-(m - 1), m)
        dvec = np.empty((2 * m - 1, 2 * m - 1, 2 * m - 1, 3))
        dvec[..., 0] = offs[:, None, None]
        dvec[..., 1] = offs[None, :, None]
        dvec[..., 2] = offs[None, None, :]
        r2 = np.sum(dvec * dvec, axis=-1)
        center = (m - 1, m - 1, m - 1)
        r2[center] = 1.0  # keep the division quiet; weight is zeroed below
        # kernel block G(delta) = K(|delta|)/modulus^3 * dir dir^T, and
        # the node quadrature weight dx^3 is folded in once here
        weight = self.profile(np.sqrt(r2)) / (self.modulus**3 * r2) * dx**3
        weight[center] = 0.0
        comps = np.empty((6,) + r2.shape)
        for c, (k, l) in enumerate(_COMP_PAIRS):
            comps[c] = weight * dvec[..., k] * dvec[..., l]
        fshape = [next_fast_len(3 * m - 2)] * 3
        self._fshape = fshape
        self._slice = tuple([slice(m - 1, 2 * m - 1)] * 3)
        self._kernel_f = [rfftn(comps[c], fshape) for c in range(6)]
        ones_f = rfftn(np.ones((m, m, m)), fshape)
        self._diag = np.stack(
            [irfftn(self._kernel_f[c] * ones_f, fshape)[self._slice] for c in range(6)],
            axis=-1,
        )

    def apply(self, field: np.ndarray) -> np.ndarray:
        u = field
        uf = [rfftn(u[..., k], self._fshape) for k in range(3)]
        out = np.empty_like(u)
        for k in range(3):
            acc_f = 0.0
            diag_part = 0.0
            for l in range(3):
                c = _COMP_INDEX[k][l]
                acc_f = acc_f + self._kernel_f[c] * uf[l]
                diag_part = diag_part + self._diag[..., c] * u[..., l]
            conv = irfftn(acc_f, self._fshape)[self._slice]
            out[..., k] = diag_part - conv
        return self.grid.zero_boundary(out)


def apply_nonlocal_dense(
    grid: ContinuumGrid, profile: KProfile, modulus: int, field: np.ndarray
) -> np.ndarray:
    """Direct pair sum over all node pairs; cross-check for small grids."""
    pts = grid.nodes().reshape(-1, 3)
    u = field.reshape(-1, 3)
    out = np.zeros_like(u)
    dx3 = grid.spacing**3
    for a in range(len(pts)):
        d = pts[a] - pts
        r2 = np.sum(d * d, axis=1)
        r2[a] = 1.0
        w = profile(np.sqrt(r2)) / (modulus**3 * r2) * dx3
        w[a] = 0.0
        proj = np.sum(d * (u[a] - u), axis=1)
        out[a] = (w * proj) @ d
    return grid.zero_boundary(out.reshape(field.shape))


@dataclass
class ContinuumProblem:
    """Tensor, kernel and initial data for one grid run."""

    grid: ContinuumGrid
    tensor: SymTensor4
    profile: KProfile
    modulus: int = 2
    rho: float = 1.0
    a: np.ndarray | None = None  # initial displacement field
    b: np.ndarray | None = None  # initial velocity field

    def __post_init__(self):
        if self.rho <= 0.0:
            raise ConfigurationError("density must be positive")
        self._local = LocalOperator(self.tensor, self.grid)
        self._nonlocal = (
            None if self.profile.kind == "zero" else NonlocalOperator(self.grid, self.profile, self.modulus)
        )
        for name in ("a", "b"):
            f = getattr(self, name)
            if f is None:
                setattr(self, name, np.zeros(self.grid.shape))
            elif f.shape != self.grid.shape:
                raise ConfigurationError(f"initial field {name} has shape {f.shape}")
            elif np.abs(f - self.grid.zero_boundary(f)).max() != 0.0:
                raise ConfigurationError(f"initial field {name} must vanish on the boundary")

    def operator(self, u: np.ndarray) -> np.ndarray:
        out = self._local.apply(u)
        if self._nonlocal is not None:
            out += self._nonlocal.apply(u)
        return out

    def acceleration(self, u: np.ndarray) -> np.ndarray:
        return self.operator(u) / -self.rho


def estimate_lambda_max_continuum(problem: ContinuumProblem, iters: int = 100, seed: int = 0) -> float:
    """Power iteration for the top eigenvalue of (L + N)/rho."""
    rng = np.random.default_rng(seed)
    x = problem.grid.zero_boundary(rng.standard_normal(problem.grid.shape))
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(iters):
        y = problem.operator(x) / problem.rho
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0
        lam = float(np.vdot(y, x) / np.vdot(x, x))
        x = y / norm
    return lam


def step_leapfrog(problem: ContinuumProblem, time: float, u, v, dt: float, accel=None):
    """One kick-drift-kick step; returns (time, u, v, accel at exit)."""
    if accel is None:
        accel = problem.acceleration(u)
    u_next = u + dt * v + (0.5 * dt * dt) * accel
    accel_next = problem.acceleration(u_next)
    v_next = v + (0.5 * dt) * (accel + accel_next)
    return time + dt, u_next, v_next, accel_next


def simulate_continuum(
    problem: ContinuumProblem,
    t_end: float,
    dt: float | None = None,
    sample_times=None,
    lambda_max: float | None = None,
    safety: float = 0.5,
) -> Trajectory:
    """Leapfrog integration from the problem's initial fields.

    Samples are stored flattened to (nodes, 3); the energy series uses
    the same step-compensated conserved quantity as the particle
    integrator, with rho dx^3 playing the role of the nodal mass.
    """
    if t_end <= 0.0:
        raise ConfigurationError(f"t_end must be positive, got {t_end}")
    if lambda_max is None:
        lambda_max = estimate_lambda_max_continuum(problem)
    dt_max = 2.0 / math.sqrt(lambda_max) if lambda_max > 0.0 else math.inf
    if dt is None:
        dt = safety * dt_max
        if not math.isfinite(dt):
            raise ConfigurationError("operator vanished; supply dt explicitly")
    elif dt > dt_max * (1.0 + 1e-12):
        raise ConfigurationError(f"dt = {dt:g} exceeds the stability bound {dt_max:g}")
    if dt <= 0.0:
        raise ConfigurationError(f"dt must be positive, got {dt}")

    n_steps = max(1, int(math.ceil(t_end / dt - 1e-9)))
    if sample_times is None:
        sample_times = np.array([0.0, n_steps * dt])
    sample_steps = np.unique(
        np.clip(np.round(np.asarray(sample_times, dtype=float) / dt), 0, n_steps).astype(int)
    )
    seen = set(sample_steps.tolist())

    mass = problem.rho * problem.grid.spacing**3
    u = problem.a.copy()
    v = problem.b.copy()
    accel = problem.acceleration(u)
    time = 0.0

    energies = np.empty(n_steps + 1)
    compensated = np.empty(n_steps + 1)
    samples_u, samples_v, sampled_at = [], [], []

    def record(idx, t, uu, vv, acc):
        elastic = -mass * float(np.vdot(uu, acc))
        kinetic = mass * float(np.vdot(vv, vv))
        e = 0.5 * kinetic + 0.5 * elastic
        energies[idx] = e
        compensated[idx] = e - dt * dt / 8.0 * mass * float(np.vdot(acc, acc))
        if idx in seen:
            samples_u.append(uu.reshape(-1, 3).copy())
            samples_v.append(vv.reshape(-1, 3).copy())
            sampled_at.append(t)

    record(0, time, u, v, accel)
    for n in range(1, n_steps + 1):
        time, u, v, accel = step_leapfrog(problem, time, u, v, dt, accel)
        record(n, time, u, v, accel)

    return Trajectory(
        sample_times=np.array(sampled_at),
        displacements=np.array(samples_u),
        velocities=np.array(samples_v),
        energy=energies,
        conserved_energy=compensated,
        dt=dt,
        lambda_max=lambda_max,
    )


@dataclass
class GridSolve:
    """CG solution of (L + N + lam^2 rho) u = rho (lam a + b)."""

    u: np.ndarray
    lam: float
    iterations: int
    residual: float
    converged: bool


def solve_stationary_continuum(
    problem: ContinuumProblem,
    lam: float,
    tol: float = 1e-10,
    max_iter: int | None = None,
) -> GridSolve:
    if lam <= 0.0:
        raise ConfigurationError(f"lam must be positive, got {lam}")
    grid = problem.grid
    rhs = grid.zero_boundary(problem.rho * (lam * problem.a + problem.b))
    shift = lam * lam * problem.rho

    def op(x):
        return problem.operator(x) + shift * x

    rhs_norm = math.sqrt(float(np.vdot(rhs, rhs)))
    if rhs_norm == 0.0:
        return GridSolve(np.zeros(grid.shape), lam, 0, 0.0, True)
    if max_iter is None:
        max_iter = max(200, 30 * grid.n_nodes)
    x = np.zeros(grid.shape)
    r = rhs.copy()
    d = r.copy()
    rr = float(np.vdot(r, r))
    for it in range(1, max_iter + 1):
        ad = op(d)
        alpha = rr / float(np.vdot(d, ad))
        x += alpha * d
        r -= alpha * ad
        rr_next = float(np.vdot(r, r))
        if math.sqrt(rr_next) <= tol * rhs_norm:
            return GridSolve(x, lam, it, math.sqrt(rr_next) / rhs_norm, True)
        d = r + (rr_next / rr) * d
        rr = rr_next
    raise SolverError(f"stationary grid solve stalled after {max_iter} iterations")


def stationary_value(problem: ContinuumProblem, lam: float, u: np.ndarray) -> float:
    """Quadratic functional whose minimizer is the stationary solution."""
    grid = problem.grid
    au = problem.operator(u)
    quad = 0.5 * grid.inner(u, au) + 0.5 * lam * lam * problem.rho * grid.inner(u, u)
    data = problem.rho * grid.inner(lam * problem.a + problem.b, u)
    return quad - data


@dataclass(frozen=True)
class IsotropyReport:
    isotropic: bool
    residual: float


def isotropy_gate(tensor: SymTensor4, tol: float = 1e-10) -> IsotropyReport:
    """Check the cubic-class tensor for the isotropic component relation.

    The residual compares the axial component against cross plus twice
    shear, normalized by the axial value.
    """
    axial = tensor.component(0, 0, 0, 0)
    if axial == 0.0:
        raise ConfigurationError("degenerate tensor: zero axial component")
    resid = abs(axial - 2.0 * tensor.component(0, 1, 0, 1) - tensor.component(0, 0, 1, 1)) / abs(axial)
    return IsotropyReport(bool(resid <= tol), float(resid))
