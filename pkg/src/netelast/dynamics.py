"""Time integration, stationary solves, and transform checks.

The evolution is u'' = -A u with A u = M^{-1} W u on free particles and
zero on clamped ones, W being the combined ordered pair sum of all
couplings.  Velocity Verlet integrates it; the physical energy

    E = 1/2 (v, v)_m + 1/2 <u, W u>

oscillates at relative size (w dt)^2 / 4 per mode, while the
compensated quantity E - dt^2/8 * sum m |a|^2 is conserved to roundoff
at any stable step, so drift checks gate on the latter and report the
former.  The stationary problem (W + lam^2 M) u = M (lam a + b) is the
transform of the evolution with data u(0) = a, u'(0) = b, solved here by
conjugate gradients with a 3x3 block-Jacobi preconditioner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigurationError, SolverError
from .lattice import ParticleSystem

__all__ = [
    "InitialData",
    "DiscreteState",
    "Trajectory",
    "StationarySolve",
    "apply_operator",
    "estimate_lambda_max",
    "stability_dt",
    "step_verlet",
    "simulate",
    "total_energy",
    "solve_stationary",
    "variational_value",
    "laplace_quadrature",
]


@dataclass(frozen=True)
class InitialData:
    """Displacement and velocity data, as callables of position or arrays.

    Callables receive the full (P, 3) position array and return (P, 3)
    values.  Clamped particles are zeroed after sampling either way.
    """

    displacement: Callable | np.ndarray | None = None
    velocity: Callable | np.ndarray | None = None

    def sample(self, system: ParticleSystem) -> tuple[np.ndarray, np.ndarray]:
        return (
            _sample_field(self.displacement, system),
            _sample_field(self.velocity, system),
        )


def _sample_field(spec, system: ParticleSystem) -> np.ndarray:
    if spec is None:
        return np.zeros((system.n_particles, 3))
    if callable(spec):
        values = np.asarray(spec(system.positions), dtype=float)
    else:
        values = np.array(spec, dtype=float)
    if values.shape != (system.n_particles, 3):
        raise ConfigurationError(
            f"initial data has shape {values.shape}, expected {(system.n_particles, 3)}"
        )
    values[system.fixed] = 0.0
    return values


@dataclass
class DiscreteState:
    """One snapshot of the particle system."""

    time: float
    u: np.ndarray  # (P, 3)
    v: np.ndarray  # (P, 3)


@dataclass
class Trajectory:
    """Sampled output of ``simulate`` plus per-step energy series."""

    sample_times: np.ndarray  # (S,) actual step times of the samples
    displacements: np.ndarray  # (S, P, 3)
    velocities: np.ndarray  # (S, P, 3)
    energy: np.ndarray  # (n_steps + 1,) physical energy per step
    conserved_energy: np.ndarray  # (n_steps + 1,) compensated energy
    dt: float
    lambda_max: float

    @property
    def energy_drift(self) -> float:
        """Relative span of the compensated energy over the run."""
        e = self.conserved_energy
        scale = max(abs(e[0]), 1e-300)
        return float((e.max() - e.min()) / scale)

    @property
    def energy_excursion(self) -> float:
        """Relative span of the raw physical energy, for reporting."""
        e = self.energy
        scale = max(abs(e[0]), 1e-300)
        return float((e.max() - e.min()) / scale)


def apply_operator(system: ParticleSystem, couplings, u: np.ndarray) -> np.ndarray:
    """Mass-scaled elastic operator; zero rows on clamped particles."""
    w = np.zeros_like(u, dtype=float)
    for c in couplings:
        w += c.pair_sum(u)
    out = np.zeros_like(w)
    free = system.free
    out[free] = w[free] / system.masses[free, None]
    return out


def estimate_lambda_max(system, couplings, iters: int = 100, seed: int = 0) -> float:
    """Largest operator eigenvalue by power iteration on the free set."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((system.n_particles, 3))
    x[system.fixed] = 0.0
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(iters):
        y = apply_operator(system, couplings, x)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0
        lam = float(np.sum(system.masses[:, None] * y * x) / np.sum(system.masses[:, None] * x * x))
        x = y / norm
    return lam


def stability_dt(lambda_max: float) -> float:
    """Largest stable Verlet step, 2 / sqrt(lambda_max)."""
    if lambda_max <= 0.0:
        return math.inf
    return 2.0 / math.sqrt(lambda_max)


def step_verlet(system, couplings, state: DiscreteState, dt: float, accel=None):
    """Advance one velocity Verlet step; returns (state, new acceleration).

    ``accel`` is the acceleration at the incoming state, recomputed when
    not supplied; passing the returned one along avoids doubling the
    pair-sum work.
    """
    if accel is None:
        accel = -apply_operator(system, couplings, state.u)
    u_next = state.u + dt * state.v + (0.5 * dt * dt) * accel
    accel_next = -apply_operator(system, couplings, u_next)
    v_next = state.v + (0.5 * dt) * (accel + accel_next)
    return DiscreteState(state.time + dt, u_next, v_next), accel_next


def total_energy(system, couplings, u: np.ndarray, v: np.ndarray) -> float:
    """Physical energy 1/2 (v, v)_m + 1/2 sum of coupling energies."""
    elastic = sum(c.energy(u) for c in couplings)
    kinetic = float(np.sum(system.masses[:, None] * v * v))
    return 0.5 * kinetic + 0.5 * elastic


def simulate(
    system,
    couplings,
    initial: InitialData,
    t_end: float,
    dt: float | None = None,
    sample_times=None,
    lambda_max: float | None = None,
    safety: float = 0.5,
) -> Trajectory:
    """Integrate u'' = -A u from rest data up to ``t_end``.

    The step defaults to ``safety`` times the stability bound estimated
    by power iteration; an explicit ``dt`` above the bound is refused.
    ``sample_times`` are snapped to the nearest step.
    """
    if t_end <= 0.0:
        raise ConfigurationError(f"t_end must be positive, got {t_end}")
    if lambda_max is None:
        lambda_max = estimate_lambda_max(system, couplings)
    dt_max = stability_dt(lambda_max)
    if dt is None:
        dt = safety * dt_max
        if not math.isfinite(dt):
            raise ConfigurationError("operator vanished; supply dt explicitly")
    elif dt > dt_max * (1.0 + 1e-12):
        raise ConfigurationError(
            f"dt = {dt:g} exceeds the stability bound {dt_max:g}"
        )
    if dt <= 0.0:
        raise ConfigurationError(f"dt must be positive, got {dt}")

    n_steps = max(1, int(math.ceil(t_end / dt - 1e-9)))
    if sample_times is None:
        sample_times = np.array([0.0, n_steps * dt])
    sample_steps = np.unique(
        np.clip(np.round(np.asarray(sample_times, dtype=float) / dt), 0, n_steps).astype(int)
    )

    u, v = initial.sample(system)
    state = DiscreteState(0.0, u, v)
    accel = -apply_operator(system, couplings, state.u)
    masses = system.masses[:, None]

    energies = np.empty(n_steps + 1)
    compensated = np.empty(n_steps + 1)
    samples_u, samples_v, sampled_at = [], [], []

    def record(step_index, st, acc):
        # <u, W u> = -(u, a)_m on the free set when clamped u stays zero
        elastic = -float(np.sum(masses * st.u * acc))
        kinetic = float(np.sum(masses * st.v * st.v))
        e_phys = 0.5 * kinetic + 0.5 * elastic
        energies[step_index] = e_phys
        compensated[step_index] = e_phys - dt * dt / 8.0 * float(np.sum(masses * acc * acc))
        if sample_steps.size and step_index in seen_samples:
            samples_u.append(st.u.copy())
            samples_v.append(st.v.copy())
            sampled_at.append(st.time)

    seen_samples = set(sample_steps.tolist())
    record(0, state, accel)
    for n in range(1, n_steps + 1):
        state, accel = step_verlet(system, couplings, state, dt, accel)
        record(n, state, accel)

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
class StationarySolve:
    """Solution of (W + lam^2 M) u = M (lam a + b) on the free set."""

    u: np.ndarray  # (P, 3), zero on clamped particles
    lam: float
    iterations: int
    residual: float  # final residual in the inverse-mass norm
    converged: bool


def _block_jacobi(blocks: np.ndarray) -> np.ndarray:
    """Invert a (F, 3, 3) stack of SPD blocks."""
    try:
        return np.linalg.inv(blocks)
    except np.linalg.LinAlgError as err:
        raise SolverError("singular preconditioner block") from err


def solve_stationary(
    system,
    couplings,
    initial: InitialData,
    lam: float,
    tol: float = 1e-10,
    max_iter: int | None = None,
) -> StationarySolve:
    """Preconditioned CG for the transform problem at parameter ``lam``.

    The operator is SPD for lam > 0.  Convergence is declared on the
    inverse-mass norm of the residual relative to the right-hand side,
    the natural pairing for a mass-weighted equation.
    """
    if lam <= 0.0:
        raise ConfigurationError(f"transform parameter must be positive, got {lam}")
    a, b = initial.sample(system)
    free = system.free
    m_free = system.masses[free, None]
    rhs = m_free * (lam * a[free] + b[free])

    blocks = np.zeros((system.n_particles, 3, 3))
    for c in couplings:
        blocks += c.diag_blocks()
    blocks = blocks[free]
    blocks += lam * lam * m_free[:, :, None] * np.eye(3)
    inv_blocks = _block_jacobi(blocks)

    full = np.zeros((system.n_particles, 3))

    def op(x):
        full[free] = x
        w = np.zeros_like(full)
        for c in couplings:
            w += c.pair_sum(full)
        return w[free] + lam * lam * m_free * x

    def inv_mass_norm(r):
        return math.sqrt(float(np.sum(r * r / m_free)))

    n_dof = 3 * int(np.count_nonzero(free))
    if n_dof == 0:
        raise ConfigurationError("no free particles to solve for")
    if max_iter is None:
        max_iter = max(50, int(50 * math.sqrt(n_dof)))

    x = np.zeros_like(rhs)
    r = rhs.copy()
    z = np.einsum("fab,fb->fa", inv_blocks, r)
    p = z.copy()
    rz = float(np.sum(r * z))
    target = tol * max(inv_mass_norm(rhs), 1e-300)
    iterations = 0
    residual = inv_mass_norm(r)
    while residual > target and iterations < max_iter:
        ap = op(p)
        alpha = rz / float(np.sum(p * ap))
        x += alpha * p
        r -= alpha * ap
        z = np.einsum("fab,fb->fa", inv_blocks, r)
        rz_next = float(np.sum(r * z))
        p = z + (rz_next / rz) * p
        rz = rz_next
        iterations += 1
        residual = inv_mass_norm(r)
    converged = residual <= target
    if not converged:
        raise SolverError(
            f"stationary solve stalled at residual {residual:.3e} "
            f"after {iterations} iterations"
        )
    u = np.zeros((system.n_particles, 3))
    u[free] = x
    return StationarySolve(u=u, lam=lam, iterations=iterations, residual=residual, converged=True)


def variational_value(system, couplings, initial: InitialData, lam: float, u: np.ndarray) -> float:
    """Quadratic functional minimized by the stationary solution.

    J(u) = 1/2 <u, W u> + lam^2/2 (u, u)_m - (lam a + b, u)_m.
    """
    a, b = initial.sample(system)
    elastic = sum(c.energy(u) for c in couplings)
    m = system.masses[:, None]
    quad = 0.5 * elastic + 0.5 * lam * lam * float(np.sum(m * u * u))
    data = float(np.sum(m * (lam * a + b) * u))
    return quad - data


def laplace_quadrature(times: np.ndarray, values: np.ndarray, lam: float) -> np.ndarray:
    """Trapezoid rule for the damped time integral of a sampled signal.

    ``values`` may carry any trailing shape; integration runs along axis
    0.  The caller is responsible for a horizon long enough that the
    discarded tail exp(-lam T) is negligible.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    damp = np.exp(-lam * times).reshape((len(times),) + (1,) * (values.ndim - 1))
    return np.trapezoid(damp * values, times, axis=0)
