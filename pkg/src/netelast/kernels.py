"""Empirical and limiting pair kernels, and their weak-convergence gaps.

The far coupling induces a two-point density on the box: on the product
of the cells of a coupled pair (i, j) it takes the value
stiffness / (vol_i vol_j) times the outer product of the unit pair
direction.  Paired against a separable test function evaluated at cell
centroids, the sum over ordered pairs decomposes per congruence class
into one-dimensional diagonal sums, one per axis and index offset, so
the full pairing costs a few small tensor contractions instead of an
all-pairs loop; ``pairing_dense`` keeps the literal enumeration as an
oracle.

The limiting kernel is profile(|x - y|) / N^3 times the same direction
outer product.  Its pairing reduces to a three-dimensional offset
integral of per-axis overlap integrals, evaluated with midpoint rules
whose nodes avoid the offset-zero kink planes.

The one-point side does the same for mass: the empirical density pairs
test functions against particle masses and is compared to the uniform
limit over the box.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ProbeError
from .interaction import InteractionModel, far_bonds_dense
from .lattice import DomainBox, ParticleSystem, voronoi_centroids, voronoi_volumes

__all__ = [
    "PairTestFunction",
    "DensityTestFunction",
    "PAIR_TESTS",
    "DENSITY_TESTS",
    "EmpiricalKernel",
    "LimitKernel",
    "empirical_density",
    "density_pairing",
    "density_convergence_rows",
    "kernel_convergence_rows",
]


@dataclass(frozen=True)
class PairTestFunction:
    """Two-point test function of separable form prod_a f_a(x_a, y_a)."""

    name: str
    factors: tuple[Callable, Callable, Callable]

    @classmethod
    def builtin(cls, name: str) -> "PairTestFunction":
        try:
            return PAIR_TESTS[name]
        except KeyError:
            raise ProbeError(
                f"unknown pair test {name!r}; have {sorted(PAIR_TESTS)}"
            ) from None

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        y = np.atleast_2d(y)
        out = np.ones(len(x))
        for a, f in enumerate(self.factors):
            out = out * f(x[:, a], y[:, a])
        return out


def _one(xa, ya):
    return np.ones_like(np.asarray(xa, dtype=float))


PAIR_TESTS = {
    "one": PairTestFunction("one", (_one, _one, _one)),
    "x1": PairTestFunction("x1", (lambda xa, ya: np.asarray(xa, float), _one, _one)),
    "y3": PairTestFunction("y3", (_one, _one, lambda xa, ya: np.asarray(ya, float))),
    "x1y1": PairTestFunction(
        "x1y1", (lambda xa, ya: np.asarray(xa) * np.asarray(ya), _one, _one)
    ),
    "gauss": PairTestFunction(
        "gauss",
        tuple(
            (lambda xa, ya: np.exp(-((np.asarray(xa) - np.asarray(ya)) ** 2)),)
            * 3
        ),
    ),
}


@dataclass(frozen=True)
class DensityTestFunction:
    """One-point test function of separable form prod_a g_a(x_a)."""

    name: str
    factors: tuple[Callable, Callable, Callable]

    @classmethod
    def builtin(cls, name: str) -> "DensityTestFunction":
        try:
            return DENSITY_TESTS[name]
        except KeyError:
            raise ProbeError(
                f"unknown density test {name!r}; have {sorted(DENSITY_TESTS)}"
            ) from None

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        out = np.ones(len(points))
        for a, g in enumerate(self.factors):
            out = out * g(points[:, a])
        return out

    def integral(self, box: DomainBox, n_axis: int = 4096) -> float:
        """Product of per-axis midpoint integrals over the box."""
        h = box.side / n_axis
        total = 1.0
        for a, g in enumerate(self.factors):
            t = box.lo[a] + h * (np.arange(n_axis) + 0.5)
            total *= float(np.sum(g(t)) * h)
        return total


def _gone(xa):
    return np.ones_like(np.asarray(xa, dtype=float))


DENSITY_TESTS = {
    "one": DensityTestFunction("one", (_gone, _gone, _gone)),
    "x1": DensityTestFunction("x1", (lambda t: np.asarray(t, float), _gone, _gone)),
    "sinprod": DensityTestFunction(
        "sinprod", tuple((lambda t: np.sin(np.pi * np.asarray(t, float)),) * 3)
    ),
}


def empirical_density(system: ParticleSystem):
    """Mass per cell volume as a nearest-node field (2 on faces, 1 inside)."""
    from .fields import PiecewiseConstantField

    return PiecewiseConstantField(system, system.masses / voronoi_volumes(system))


def density_pairing(system: ParticleSystem, test: DensityTestFunction) -> float:
    """Mass-weighted sum of the test function over particle sites."""
    return float(np.sum(system.masses * test(system.positions)))


def _offset_components(shape, step, model: InteractionModel, eps: float):
    """Stiffness-weighted direction outer products on the offset grid.

    Entry (k, l) of the returned (6, ...) stack is stiffness(|d|) times
    d_k d_l / |d|^2 at offset d = step * (integer triple), zero at the
    origin.  Order: xx, yy, zz, xy, xz, yz.
    """
    axes = [step * np.arange(-(c - 1), c, dtype=float) for c in shape]
    dx, dy, dz = np.meshgrid(*axes, indexing="ij")
    r2 = dx * dx + dy * dy + dz * dz
    center = tuple(c - 1 for c in shape)
    r2[center] = 1.0
    weight = model.far_stiffness(eps, np.sqrt(r2)) / r2
    weight[center] = 0.0
    return np.stack(
        [weight * dx * dx, weight * dy * dy, weight * dz * dz,
         weight * dx * dy, weight * dx * dz, weight * dy * dz]
    )


_COMP_PAIRS = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))


class EmpiricalKernel:
    """Two-point stiffness density of one lattice instance."""

    def __init__(self, system: ParticleSystem, model: InteractionModel):
        if np.any(system.grid_ids < 0):
            raise ProbeError("pair kernel needs a gap-free lattice")
        self.system = system
        self.model = model
        self._volumes = voronoi_volumes(system)
        self._centroids = voronoi_centroids(system)
        n = system.cells_per_side
        # Per-axis centroid coordinate of node index i.
        self._cent1d = []
        for a in range(3):
            c = system.box.lo[a] + system.eps * np.arange(n + 1, dtype=float)
            c[0] += system.eps / 4.0
            c[-1] -= system.eps / 4.0
            self._cent1d.append(c)
        big = model.modulus
        self._class_axes = []  # per class: three 1D node-index arrays
        for r in np.ndindex(big, big, big):
            idx = [np.arange(r[a], n + 1, big) for a in range(3)]
            size = idx[0].size * idx[1].size * idx[2].size
            if size > 1:
                self._class_axes.append(idx)
        self._comp_cache = {}

    def evaluate(self, x, y) -> np.ndarray:
        """Kernel value (3, 3) at one point pair."""
        sysm = self.system
        n = sysm.cells_per_side
        ids = []
        for p in (np.asarray(x, float), np.asarray(y, float)):
            rel = (p - sysm.box.lo) / sysm.eps
            idx = np.clip(np.ceil(rel - 0.5).astype(np.int64), 0, n)
            ids.append(int(sysm.grid_ids[idx[0], idx[1], idx[2]]))
        i, j = ids
        if i == j:
            return np.zeros((3, 3))
        if np.any((sysm.triples[i] - sysm.triples[j]) % self.model.modulus != 0):
            return np.zeros((3, 3))
        delta = sysm.positions[i] - sysm.positions[j]
        dist = float(np.linalg.norm(delta))
        dhat = delta / dist
        k = self.model.far_stiffness(sysm.eps, dist)
        return float(k / (self._volumes[i] * self._volumes[j])) * np.outer(dhat, dhat)

    def _components(self, shape):
        comps = self._comp_cache.get(shape)
        if comps is None:
            step = self.model.modulus * self.system.eps
            comps = _offset_components(shape, step, self.model, self.system.eps)
            self._comp_cache[shape] = comps
        return comps

    def pairing(self, test: PairTestFunction) -> np.ndarray:
        """(3, 3) pairing over ordered coupled pairs at cell centroids.

        For each class and axis, the sum of f_a over pairs at a fixed
        index offset is a diagonal sum of the factor matrix; the class
        total is the offset-grid contraction of their outer product with
        the stiffness-weighted direction tensors.
        """
        out = np.zeros(6)
        for idx in self._class_axes:
            shape = tuple(ix.size for ix in idx)
            comps = self._components(shape)
            diags = []
            for a in range(3):
                z = self._cent1d[a][idx[a]]
                c = shape[a]
                # factors of one argument only come back un-broadcast
                fmat = np.broadcast_to(
                    np.asarray(test.factors[a](z[:, None], z[None, :]), dtype=float),
                    (c, c),
                )
                diags.append(
                    np.array([np.trace(fmat, offset=-d) for d in range(-(c - 1), c)])
                )
            outer = np.einsum("i,j,k->ijk", diags[0], diags[1], diags[2])
            out += np.einsum("cijk,ijk->c", comps, outer)
        full = np.zeros((3, 3))
        for c, (k, l) in enumerate(_COMP_PAIRS):
            full[k, l] = out[c]
            full[l, k] = out[c]
        return full

    def pairing_dense(self, test: PairTestFunction) -> np.ndarray:
        """Literal ordered-pair enumeration; oracle for small systems."""
        bonds = far_bonds_dense(self.system, self.model)
        ci = self._centroids[bonds.i]
        cj = self._centroids[bonds.j]
        w = bonds.stiffness * (test(ci, cj) + test(cj, ci))
        d = bonds.direction
        return np.einsum("b,bk,bl->kl", w, d, d)


@dataclass
class LimitKernel:
    """Continuum pair kernel profile(|x - y|) / N^3 with direction dyad."""

    model: InteractionModel
    box: DomainBox

    def evaluate(self, x, y) -> np.ndarray:
        delta = np.asarray(x, float) - np.asarray(y, float)
        dist2 = float(delta @ delta)
        if dist2 == 0.0:
            return np.zeros((3, 3))
        weight = float(self.model.profile(np.sqrt(dist2))) / self.model.modulus**3
        return weight * np.outer(delta, delta) / dist2

    def _overlap_weights(self, factor, axis: int, deltas: np.ndarray, n_axis: int):
        """w(delta) = integral of f_a(y + delta, y) over the overlap."""
        lo = self.box.lo[axis]
        side = self.box.side
        out = np.empty(len(deltas))
        for m, d in enumerate(deltas):
            y0 = lo + max(0.0, -d)
            y1 = lo + side - max(0.0, d)
            if y1 <= y0:
                out[m] = 0.0
                continue
            h = (y1 - y0) / n_axis
            y = y0 + h * (np.arange(n_axis) + 0.5)
            out[m] = float(np.sum(factor(y + d, y)) * h)
        return out

    def pairing(
        self, test: PairTestFunction, m_delta: int = 160, n_axis: int = 2048
    ) -> np.ndarray:
        """(3, 3) double box integral, reduced to the offset variable.

        ``m_delta`` must be even so the midpoint nodes avoid the kink
        planes where an offset component changes sign.
        """
        if m_delta % 2 != 0:
            raise ProbeError("m_delta must be even to dodge the kink planes")
        side = self.box.side
        h = 2.0 * side / m_delta
        deltas = -side + h * (np.arange(m_delta) + 0.5)
        w = [
            self._overlap_weights(test.factors[a], a, deltas, n_axis)
            for a in range(3)
        ]
        d2, d3 = np.meshgrid(deltas, deltas, indexing="ij")
        w23 = np.outer(w[1], w[2])
        norm = 1.0 / self.model.modulus**3
        out = np.zeros(6)
        for i1, d1 in enumerate(deltas):  # slab loop keeps memory flat
            r2 = d1 * d1 + d2 * d2 + d3 * d3
            weight = norm * self.model.profile(np.sqrt(r2)) / r2 * (w[0][i1] * w23)
            out[0] += np.sum(weight * d1 * d1)
            out[1] += np.sum(weight * d2 * d2)
            out[2] += np.sum(weight * d3 * d3)
            out[3] += np.sum(weight * d1 * d2)
            out[4] += np.sum(weight * d1 * d3)
            out[5] += np.sum(weight * d2 * d3)
        full = np.zeros((3, 3))
        for c, (k, l) in enumerate(_COMP_PAIRS):
            full[k, l] = out[c] * h**3
            full[l, k] = out[c] * h**3
        return full


def kernel_convergence_rows(
    eps_values,
    model: InteractionModel,
    box: DomainBox,
    test_names=("one", "x1y1"),
    m_delta: int = 160,
):
    """Pairing gaps |empirical - limit| per test function and eps.

    Returns a list of dicts with the max-abs component gap; the builder
    for each lattice is imported lazily to keep this module light.
    """
    from .lattice import LatticeConfig, build_cubic_lattice

    limit = LimitKernel(model, box)
    rows = []
    targets = {name: limit.pairing(PAIR_TESTS[name], m_delta=m_delta) for name in test_names}
    for eps in eps_values:
        system = build_cubic_lattice(LatticeConfig(eps=eps, box=box))
        kern = EmpiricalKernel(system, model)
        for name in test_names:
            gap = np.abs(kern.pairing(PAIR_TESTS[name]) - targets[name]).max()
            rows.append({"eps": eps, "test": name, "gap": float(gap)})
    return rows


def density_convergence_rows(eps_values, box: DomainBox, test_names=("one", "x1", "sinprod")):
    """Mass pairing gaps |sum m f(x_i) - integral f| per test and eps."""
    from .lattice import LatticeConfig, build_cubic_lattice

    rows = []
    targets = {name: DENSITY_TESTS[name].integral(box) for name in test_names}
    for eps in eps_values:
        system = build_cubic_lattice(LatticeConfig(eps=eps, box=box))
        for name in test_names:
            gap = abs(density_pairing(system, DENSITY_TESTS[name]) - targets[name])
            rows.append({"eps": eps, "test": name, "gap": float(gap)})
    return rows
