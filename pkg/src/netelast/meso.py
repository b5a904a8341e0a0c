"""Effective elasticity tensor from a penalized cell minimization.

A probe cube of side h is carved out of the particle network.  For a
prescribed 3x3 strain S the affine data g_i = S (x_i - x_c) is imposed
softly: we minimize

    J(v) = sum_bonds K <v_i - v_j, e>^2  +  p sum_i |v_i - g_i|^2,

over all particles in the cube, with penalty weight p = h^(-2-gamma).
The minimum value H(S) is quadratic in S, and H/h^3 converges to the
quadratic form of the homogenized elasticity tensor as the spacing and
the cube shrink together.  The tensor is recovered from H by
polarization over the six symmetric unit strains and stored as a
Voigt-indexed 6x6 matrix whose entries are plain tensor components.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ProbeError, SolverError
from .interaction import BondList, InteractionModel, assemble_short_bonds
from .lattice import DomainBox, LatticeConfig, ParticleSystem, build_cubic_lattice

# Voigt pair order 11, 22, 33, 23, 13, 12 and the off-diagonal
# double-count weights that turn polarization values into components.
VOIGT_PAIRS = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))
VOIGT_WEIGHTS = np.array([1.0, 1.0, 1.0, 2.0, 2.0, 2.0])

_PAIR_TO_VOIGT = {}
for _I, (_n, _p) in enumerate(VOIGT_PAIRS):
    _PAIR_TO_VOIGT[(_n, _p)] = _I
    _PAIR_TO_VOIGT[(_p, _n)] = _I


def strain_basis() -> list[np.ndarray]:
    """The six symmetric unit strains in Voigt order.

    Diagonal entries give single unit dyads; off-diagonal entries carry
    a unit in both mirror slots, so the basis spans symmetric matrices
    with integer coordinates.
    """
    out = []
    for n, p in VOIGT_PAIRS:
        b = np.zeros((3, 3))
        b[n, p] += 1.0
        b[p, n] += 1.0
        if n == p:
            b[n, p] = 1.0
        out.append(b)
    return out


@dataclass(frozen=True)
class MesoProbe:
    """Axis-aligned probe cube: center, side h, penalty exponent gamma."""

    center: tuple[float, float, float]
    side: float
    gamma: float = 1.0

    def __post_init__(self):
        if not self.side > 0:
            raise ConfigurationError("probe side must be positive")
        if not 0.0 < self.gamma < 2.0:
            raise ConfigurationError(f"gamma must lie in (0, 2), got {self.gamma}")

    @property
    def penalty(self) -> float:
        return self.side ** (-(2.0 + self.gamma))

    def validate(self, system: ParticleSystem) -> None:
        """Reject probes that are too coarse or hang off the network.

        The cube may overhang the particle domain by less than half a
        spacing; past that it would claim particles that do not exist.
        """
        if self.side < 4.0 * system.eps:
            raise ProbeError(
                f"probe side {self.side} too small for spacing {system.eps}"
            )
        c = np.asarray(self.center, dtype=float)
        corners = c + 0.5 * self.side * np.array([[-1.0] * 3, [1.0] * 3])
        pad = 0.5 * system.eps * (1.0 + 1e-9)
        if not system.box.contains(corners, pad=pad).all():
            raise ProbeError("probe cube extends beyond the particle domain")


@dataclass(frozen=True)
class SymTensor4:
    """Rank-4 elasticity tensor with minor and major symmetries.

    Stored as a symmetric 6x6 matrix over Voigt pair indices; entries
    are the tensor components themselves (no shear doubling).
    """

    voigt: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.voigt, dtype=float)
        if m.shape != (6, 6):
            raise ConfigurationError("voigt matrix must be 6x6")
        object.__setattr__(self, "voigt", m)

    def component(self, n: int, p: int, q: int, r: int) -> float:
        return float(self.voigt[_PAIR_TO_VOIGT[(n, p)], _PAIR_TO_VOIGT[(q, r)]])

    def symmetry_defect(self) -> float:
        """Max violation of the pair-swap symmetry, relative to scale."""
        scale = np.abs(self.voigt).max()
        if scale == 0.0:
            return 0.0
        return float(np.abs(self.voigt - self.voigt.T).max() / scale)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.voigt + self.voigt.T))

    def is_psd(self, rel: float = 1e-10) -> bool:
        tr = float(np.trace(self.voigt))
        return bool(self.eigenvalues().min() >= -rel * max(tr, 1e-300))

    def quadratic(self, strain: np.ndarray) -> float:
        """Evaluate the stored form on a symmetric 3x3 strain."""
        s = np.asarray(strain, dtype=float)
        total = 0.0
        for n in range(3):
            for p in range(3):
                for q in range(3):
                    for r in range(3):
                        total += self.component(n, p, q, r) * s[n, p] * s[q, r]
        return total


def closed_form_tensor(k1: float, k2: float, k3: float) -> SymTensor4:
    """Exact homogenized tensor of the periodic cubic network.

    Axis springs contribute only to the axial component; face and body
    diagonals spread over the cross and shear classes with the weights
    of their direction cosines.
    """
    if min(k1, k2, k3) < 0:
        raise ConfigurationError("stiffness constants must be nonnegative")
    diag = k1 + 2.0 * k2 / math.sqrt(2.0) + 4.0 * k3 / (3.0 * math.sqrt(3.0))
    off = k2 / math.sqrt(2.0) + 4.0 * k3 / (3.0 * math.sqrt(3.0))
    m = np.zeros((6, 6))
    m[:3, :3] = off
    np.fill_diagonal(m[:3, :3], diag)
    m[3, 3] = m[4, 4] = m[5, 5] = off
    return SymTensor4(m)


@dataclass(frozen=True)
class CellSolve:
    """One cell minimization: minimizer, value and its two summands."""

    displacement: np.ndarray
    value: float
    short_energy: float
    penalty_term: float
    iterations: int


@dataclass(frozen=True)
class _CellSetup:
    ids: np.ndarray
    rel_positions: np.ndarray
    bonds: BondList
    penalty: float


def _restrict(probe: MesoProbe, system: ParticleSystem, bonds: BondList) -> _CellSetup:
    probe.validate(system)
    c = np.asarray(probe.center, dtype=float)
    half = 0.5 * probe.side * (1.0 + 1e-12)
    inside = (np.abs(system.positions - c) <= half).all(axis=1)
    ids = np.nonzero(inside)[0]
    if ids.size == 0:
        raise ProbeError("probe cube contains no particles")
    lookup = np.full(system.n_particles, -1, dtype=np.int64)
    lookup[ids] = np.arange(ids.size)
    keep = inside[bonds.i] & inside[bonds.j]
    local = BondList(
        i=lookup[bonds.i[keep]],
        j=lookup[bonds.j[keep]],
        stiffness=bonds.stiffness[keep],
        direction=bonds.direction[keep],
        distance=bonds.distance[keep],
        n_particles=ids.size,
    )
    return _CellSetup(ids, system.positions[ids] - c, local, probe.penalty)


def _cg(matvec, rhs: np.ndarray, tol: float, max_iter: int):
    """Plain conjugate gradients on (n, 3) arrays.

    The penalty shifts the spectrum well away from zero, so no
    preconditioner is needed; typical runs converge in a handful of
    iterations.
    """
    x = np.zeros_like(rhs)
    r = rhs.copy()
    d = r.copy()
    rr = float(np.vdot(r, r))
    bound = tol * tol * float(np.vdot(rhs, rhs))
    if rr <= bound:
        return x, 0
    for it in range(1, max_iter + 1):
        ad = matvec(d)
        alpha = rr / float(np.vdot(d, ad))
        x += alpha * d
        r -= alpha * ad
        rr_next = float(np.vdot(r, r))
        if rr_next <= bound:
            return x, it
        d = r + (rr_next / rr) * d
        rr = rr_next
    raise SolverError(f"cell solve stalled after {max_iter} iterations")


def _solve_cell(setup: _CellSetup, strain: np.ndarray, tol: float) -> CellSolve:
    strain = np.asarray(strain, dtype=float)
    g = setup.rel_positions @ strain.T
    p = setup.penalty

    def op(v):
        return setup.bonds.pair_sum(v) + p * v

    v, iters = _cg(op, p * g, tol, max_iter=200 + 20 * int(math.isqrt(g.size)))
    short = setup.bonds.energy(v)
    pen = p * float(np.vdot(v - g, v - g))
    return CellSolve(v, short + pen, short, pen, iters)


def minimize_cell_functional(
    probe: MesoProbe,
    system: ParticleSystem,
    bonds: BondList,
    strain: np.ndarray,
    tol: float = 1e-12,
) -> CellSolve:
    """Minimize the penalized cell functional for one strain matrix.

    The minimizer solves (W + p I) v = p g with W the bond pair-sum
    operator restricted to the cube and g the affine data; the value
    splits into the bond energy and the penalty remainder.
    """
    return _solve_cell(_restrict(probe, system, bonds), strain, tol)


def extract_tensor(
    probe: MesoProbe,
    system: ParticleSystem,
    bonds: BondList,
    tol: float = 1e-12,
    threads: int = 1,
) -> SymTensor4:
    """Recover the tensor from cell values by polarization.

    Six solves on the basis strains give the diagonal; each unordered
    pair adds two more on the sum and difference, for 36 in total.
    The quadratic form values are divided by the Voigt double-count
    weights and by h^3.
    """
    setup = _restrict(probe, system, bonds)
    basis = strain_basis()
    tasks: dict[tuple[int, int, int], np.ndarray] = {}
    for a in range(6):
        tasks[(a, a, 1)] = basis[a]
        for b in range(a + 1, 6):
            tasks[(a, b, 1)] = basis[a] + basis[b]
            tasks[(a, b, -1)] = basis[a] - basis[b]
    keys = list(tasks)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vals = list(pool.map(lambda k: _solve_cell(setup, tasks[k], tol).value, keys))
    else:
        vals = [_solve_cell(setup, tasks[k], tol).value for k in keys]
    value = dict(zip(keys, vals))
    quad = np.zeros((6, 6))
    for a in range(6):
        quad[a, a] = value[(a, a, 1)]
        for b in range(a + 1, 6):
            quad[a, b] = quad[b, a] = 0.25 * (value[(a, b, 1)] - value[(a, b, -1)])
    scale = np.outer(VOIGT_WEIGHTS, VOIGT_WEIGHTS) * probe.side**3
    return SymTensor4(quad / scale)


def _local_lattice(h: float, eps: float, origin_shift: float, model: InteractionModel):
    """Build the network covered by an aligned or half-step probe cube.

    With no shift the cube boundary passes through particles; shifting
    by eps/2 reproduces the particle set of a probe displaced against
    the lattice, one layer thinner per axis.
    """
    side = h - 2.0 * origin_shift
    box = DomainBox(side=side, origin=(origin_shift,) * 3)
    system = build_cubic_lattice(LatticeConfig(eps=eps, box=box))
    return system, assemble_short_bonds(system, model)


def probe_tensor(
    h: float,
    ratio: int,
    gamma: float,
    model: InteractionModel,
    offset: bool = False,
    tol: float = 1e-12,
    threads: int = 1,
) -> SymTensor4:
    """Extract the tensor from a standalone cube at spacing h/ratio."""
    if ratio < 4:
        raise ConfigurationError("cube must span at least four spacings")
    eps = h / ratio
    shift = 0.5 * eps if offset else 0.0
    system, bonds = _local_lattice(h, eps, shift, model)
    probe = MesoProbe(center=(0.5 * h,) * 3, side=h, gamma=gamma)
    return extract_tensor(probe, system, bonds, tol=tol, threads=threads)


_STUDY_COMPONENTS = {
    "1111": (0, 0, 0, 0),
    "1122": (0, 0, 1, 1),
    "1212": (0, 1, 0, 1),
}


def tensor_limit_study(
    eps_values,
    h_values,
    gammas,
    model: InteractionModel,
    tol: float = 1e-12,
    threads: int = 1,
) -> list[dict]:
    """Tabulate extracted components against the closed form.

    Only (eps, h) pairs with an integer ratio of at least 4 are run;
    the schedules are expected to be chosen that way.  Returns one row
    per component with the relative error against the closed form.
    """
    reference = closed_form_tensor(model.k1, model.k2, model.k3)
    rows = []
    for h in h_values:
        for eps in eps_values:
            ratio = h / eps
            if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 4:
                continue
            for gamma in gammas:
                tensor = probe_tensor(
                    h, int(round(ratio)), gamma, model, tol=tol, threads=threads
                )
                for name, npqr in _STUDY_COMPONENTS.items():
                    value = tensor.component(*npqr)
                    target = reference.component(*npqr)
                    rows.append(
                        {
                            "eps": eps,
                            "h": h,
                            "gamma": gamma,
                            "npqr": name,
                            "value": value,
                            "closed_form": target,
                            "rel_error": abs(value - target) / abs(target),
                        }
                    )
    return rows


def translation_check(
    h: float,
    ratio: int,
    gamma: float,
    model: InteractionModel,
    tol: float = 1e-12,
    threads: int = 1,
) -> dict:
    """Compare a lattice-aligned probe with one displaced by eps/2.

    Returns both tensors and the worst relative disagreement over the
    axial, cross and shear components.
    """
    aligned = probe_tensor(h, ratio, gamma, model, offset=False, tol=tol, threads=threads)
    shifted = probe_tensor(h, ratio, gamma, model, offset=True, tol=tol, threads=threads)
    worst = 0.0
    for npqr in _STUDY_COMPONENTS.values():
        a = aligned.component(*npqr)
        b = shifted.component(*npqr)
        worst = max(worst, abs(a - b) / abs(a))
    return {"aligned": aligned, "shifted": shifted, "rel_disagreement": worst}


@dataclass(frozen=True)
class Lemma34Report:
    """Log-log scaling of the cell value's two summands in h."""

    h_values: np.ndarray
    short_energies: np.ndarray
    penalty_terms: np.ndarray
    energy_slope: float
    penalty_slope: float
    energy_ok: bool
    penalty_ok: bool
    degenerate: bool


def lemma34_scaling_check(
    h_values,
    ratio: int,
    gamma: float,
    model: InteractionModel,
    strain: np.ndarray | None = None,
    tol: float = 1e-12,
) -> Lemma34Report:
    """Fit the growth of bond energy and penalty term over an h series.

    The bond energy should scale like the cube volume (slope near 3);
    the penalty term must not decay slower than h^(5+gamma), checked
    with half a decade of slack for the fit.
    """
    h_values = np.asarray(sorted(h_values, reverse=True), dtype=float)
    if h_values.size < 3:
        raise ConfigurationError("scaling fit needs at least three cube sides")
    if strain is None:
        strain = strain_basis()[0]
    shorts = np.empty(h_values.size)
    pens = np.empty(h_values.size)
    for n, h in enumerate(h_values):
        system, bonds = _local_lattice(h, h / ratio, 0.0, model)
        probe = MesoProbe(center=(0.5 * h,) * 3, side=h, gamma=gamma)
        cell = minimize_cell_functional(probe, system, bonds, strain, tol=tol)
        shorts[n] = cell.short_energy
        pens[n] = cell.penalty_term
    if shorts.max() == 0.0 and pens.max() == 0.0:
        return Lemma34Report(
            h_values, shorts, pens, math.nan, math.nan, False, False, True
        )
    slope_e = float(np.polyfit(np.log(h_values), np.log(shorts), 1)[0])
    slope_p = float(np.polyfit(np.log(h_values), np.log(pens), 1)[0])
    return Lemma34Report(
        h_values,
        shorts,
        pens,
        slope_e,
        slope_p,
        2.5 <= slope_e <= 3.5,
        slope_p >= 5.0 + gamma - 0.5,
        False,
    )
