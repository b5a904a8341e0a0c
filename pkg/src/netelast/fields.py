"""Particle data as spatial fields, field distances, and the rigidity quotient.

Two interpolants turn per-particle values into functions on the box: a
nearest-node lookup (piecewise constant on the grid cells around each
node, ties resolved toward the lower index) and a continuous piecewise
linear one on the staircase simplicial mesh.  ``l2_difference`` compares
any two such fields, or plain callables, by midpoint quadrature.

``korn_constant`` measures the rigidity of the mesh subgraph: the
smallest ratio of stiffness-weighted squared edge projections to a
gradient proxy built from full edge differences plus a zero-order term,
over displacements vanishing on the clamped set.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import eigsh

from .errors import ProbeError
from .interaction import assemble_short_bonds, pair_matrix
from .lattice import KUHN_OFFSETS, DomainBox, ParticleSystem

__all__ = [
    "PiecewiseConstantField",
    "SplineField",
    "midpoint_grid",
    "l2_difference",
    "korn_constant",
]


def _as_columns(values, n_particles):
    values = np.asarray(values, dtype=float)
    if values.shape[0] != n_particles:
        raise ProbeError(
            f"values carry {values.shape[0]} rows for {n_particles} particles"
        )
    return values.reshape(n_particles, -1), values.ndim == 1


class _GridField:
    def __init__(self, system: ParticleSystem, values):
        if np.any(system.grid_ids < 0):
            raise ProbeError("field interpolation needs a gap-free lattice")
        self.system = system
        self.values, self._scalar = _as_columns(values, system.n_particles)

    def _finish(self, out, squeeze_shape):
        if self._scalar:
            return out.reshape(squeeze_shape)
        return out


class PiecewiseConstantField(_GridField):
    """Nearest lattice node lookup; lower index wins on cell-face ties."""

    def evaluate(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        sysm = self.system
        n = sysm.cells_per_side
        rel = (pts - sysm.box.lo) / sysm.eps
        idx = np.ceil(rel - 0.5).astype(np.int64)
        np.clip(idx, 0, n, out=idx)
        ids = sysm.grid_ids[idx[:, 0], idx[:, 1], idx[:, 2]]
        out = self.values[ids]
        return self._finish(out, pts.shape[:1])


class SplineField(_GridField):
    """Continuous piecewise-linear interpolation on the staircase mesh.

    Inside each grid cell the containing simplex is found by sorting the
    fractional coordinates; the value is the barycentric combination of
    the four chain corners.  Reproduces affine functions exactly.
    """

    def evaluate(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        sysm = self.system
        n = sysm.cells_per_side
        rel = (pts - sysm.box.lo) / sysm.eps
        cell = np.clip(np.floor(rel), 0, n - 1).astype(np.int64)
        t = np.clip(rel - cell, 0.0, 1.0)
        order = np.argsort(-t, axis=1, kind="stable")
        ts = np.take_along_axis(t, order, axis=1)
        weights = np.stack(
            [1.0 - ts[:, 0], ts[:, 0] - ts[:, 1], ts[:, 1] - ts[:, 2], ts[:, 2]],
            axis=1,
        )
        steps = np.cumsum(np.eye(3, dtype=np.int64)[order], axis=1)  # (Q, 3, 3)
        out = weights[:, 0, None] * self.values[self._ids(cell)]
        for m in range(3):
            corner = cell + steps[:, m, :]
            out += weights[:, m + 1, None] * self.values[self._ids(corner)]
        return self._finish(out, pts.shape[:1])

    def _ids(self, triples):
        return self.system.grid_ids[triples[:, 0], triples[:, 1], triples[:, 2]]


def midpoint_grid(box: DomainBox, cells: int) -> np.ndarray:
    """Cell midpoints of a uniform cells^3 split of the box."""
    h = box.side / cells
    side = box.lo[0] + h * (np.arange(cells) + 0.5)
    axes = [side - box.lo[0] + box.lo[a] for a in range(3)]
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=1)


def _eval(field, points):
    values = field.evaluate(points) if hasattr(field, "evaluate") else field(points)
    return np.asarray(values, dtype=float).reshape(len(points), -1)


def l2_difference(first, second, box: DomainBox, cells: int = 64) -> float:
    """Midpoint-quadrature L2 distance between two fields on the box."""
    pts = midpoint_grid(box, cells)
    diff = _eval(first, pts) - _eval(second, pts)
    cell_volume = (box.side / cells) ** 3
    return float(np.sqrt(np.sum(diff * diff) * cell_volume))


def korn_constant(system: ParticleSystem, model, seed: int = 0) -> float:
    """Smallest rigidity quotient of the staircase mesh subgraph.

    Minimizes sum k <du, e>^2 over the mesh edges divided by
    eps * sum |du|^2 + eps^3 * sum |u|^2, with u = 0 on the clamped set.
    Both forms are sparse; the minimum is the smallest eigenvalue of the
    generalized pair, found by shift-invert iteration about zero.
    """
    bonds = assemble_short_bonds(system, model, offsets=KUHN_OFFSETS)
    a_mat = pair_matrix(bonds)

    p = system.n_particles
    ones = np.ones(len(bonds))
    lap = sparse.coo_matrix(
        (
            np.concatenate([ones, ones, -ones, -ones]),
            (
                np.concatenate([bonds.i, bonds.j, bonds.i, bonds.j]),
                np.concatenate([bonds.i, bonds.j, bonds.j, bonds.i]),
            ),
        ),
        shape=(p, p),
    )
    b_mat = system.eps * sparse.kron(lap, sparse.identity(3), format="csr")
    b_mat = (b_mat + system.eps**3 * sparse.identity(3 * p)).tocsr()

    ids = np.flatnonzero(system.free)
    if ids.size == 0:
        raise ProbeError("rigidity quotient needs free particles")
    dofs = (3 * ids[:, None] + np.arange(3)).ravel()
    a_ff = a_mat[dofs][:, dofs]
    b_ff = b_mat[dofs][:, dofs]
    if a_ff.shape[0] <= 2:
        # eigsh needs k < n; solve the 3x3 pencil directly
        dense_a = a_ff.toarray()
        dense_b = b_ff.toarray()
        from scipy.linalg import eigh

        return float(eigh(dense_a, dense_b, eigvals_only=True)[0])
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(a_ff.shape[0])
    vals = eigsh(
        a_ff, k=1, M=b_ff, sigma=0, which="LM", v0=v0, return_eigenvectors=False
    )
    return float(vals[0])
