"""Pair interactions: stiffness laws, bond assembly, fast far-field apply.

Two coupling families live here.  Short bonds join lattice nodes up to
sqrt(3) eps apart (axis, face and body diagonals, 26 neighbors, 13
unordered directions); their stiffness follows the pair law

    k_bond = eps**6 * C / |x_i - x_j|**5,    C in {k1, 4 k2, 9 k3},

which collapses to eps * k_m / dhat at those offsets.  Far bonds join
every pair of nodes whose index triples agree componentwise mod N; they
are O(eps**6) weak, with a radial profile evaluated at physical
distance.  The far family is dense within each congruence class, so
``LongRangeSet`` applies it through cached FFT convolutions instead of
materialized pair lists; the explicit enumeration survives as
``far_bonds_dense`` for oracle-sized systems.

Sign conventions, used everywhere downstream: the elastic energy is the
unordered sum H = sum k <u_i - u_j, e>**2, the ordered pair sum
(W u)_i = sum_j k e e^T (u_i - u_j) satisfies <u, W u> = H with no extra
factor, and the force is F = -W u, so dH/ds = -2 <F, d> along any
direction d.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft
from scipy import sparse

from .errors import ConfigurationError, DomainError
from .lattice import ParticleSystem

__all__ = [
    "SHORT_OFFSETS",
    "KProfile",
    "InteractionModel",
    "Bond",
    "BondList",
    "LongRangeSet",
    "assemble_short_bonds",
    "far_bonds_dense",
    "far_bond_count",
    "pair_matrix",
]


def _forward_offsets():
    offs = []
    for ox in (-1, 0, 1):
        for oy in (-1, 0, 1):
            for oz in (-1, 0, 1):
                if (ox, oy, oz) == (0, 0, 0) or (ox, oy, oz) < (0, 0, 0):
                    continue
                offs.append((ox, oy, oz))
    return np.array(offs, dtype=np.int64)


# One representative per unordered neighbor direction (13 of the 26).
SHORT_OFFSETS = _forward_offsets()

_PROFILE_KINDS = ("const", "exp", "gauss", "zero")


@dataclass(frozen=True)
class KProfile:
    """Radial profile of the far coupling strength.

    Kinds: ``const:c`` is the constant c, ``exp:a`` is exp(-a r),
    ``gauss:a`` is exp(-a r**2), ``zero`` switches the far family off.
    """

    kind: str
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in _PROFILE_KINDS:
            raise ConfigurationError(
                f"unknown profile kind {self.kind!r}; expected one of {_PROFILE_KINDS}"
            )
        if not np.isfinite(self.scale):
            raise ConfigurationError(f"profile scale must be finite, got {self.scale}")
        if self.kind == "const" and self.scale < 0:
            raise ConfigurationError("constant profile must be nonnegative")

    @classmethod
    def parse(cls, text: str) -> "KProfile":
        """Parse 'zero', 'const:c', 'exp:a' or 'gauss:a'."""
        name, sep, arg = text.strip().partition(":")
        if name == "zero":
            if sep:
                raise ConfigurationError("profile 'zero' takes no parameter")
            return cls("zero", 0.0)
        if name not in _PROFILE_KINDS:
            raise ConfigurationError(f"unknown profile kind {name!r}")
        if not sep or not arg:
            raise ConfigurationError(f"profile {name!r} needs a parameter, e.g. '{name}:1.0'")
        try:
            scale = float(arg)
        except ValueError as err:
            raise ConfigurationError(f"bad profile parameter {arg!r}") from err
        return cls(name, scale)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "const":
            return np.full_like(r, self.scale)
        if self.kind == "exp":
            return np.exp(-self.scale * r)
        if self.kind == "gauss":
            return np.exp(-self.scale * r * r)
        return np.zeros_like(r)


@dataclass(frozen=True)
class InteractionModel:
    """Stiffness constants of both coupling families.

    k1, k2, k3 weight the axis, face-diagonal and body-diagonal short
    bonds.  ``profile`` and ``modulus`` govern the far family: nodes
    couple at long range when their index triples agree mod ``modulus``
    on every axis.
    """

    k1: float = 1.0
    k2: float = 1.0
    k3: float = 1.0
    profile: KProfile = KProfile("zero", 0.0)
    modulus: int = 2

    def __post_init__(self):
        for name in ("k1", "k2", "k3"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ConfigurationError(f"{name} must be nonnegative, got {value}")
        if int(self.modulus) != self.modulus or self.modulus < 1:
            raise ConfigurationError(
                f"modulus must be a positive integer, got {self.modulus}"
            )

    def near_constant(self, d2units):
        """Pair-law numerator per squared index offset 1, 2, 3.

        The values k1, 4 k2, 9 k3 are the fourth power of the offset
        length times the per-direction constant.
        """
        d2 = np.asarray(d2units)
        if not np.all(np.isin(d2, (1, 2, 3))):
            raise ConfigurationError("short-range squared offsets must be 1, 2 or 3")
        table = np.array([np.nan, self.k1, 4.0 * self.k2, 9.0 * self.k3])
        return table[d2.astype(np.int64)]

    def short_stiffness(self, eps, d2units):
        """Evaluate the pair law at offset distance eps * sqrt(d2units)."""
        d2 = np.asarray(d2units)
        dist = eps * np.sqrt(d2.astype(float))
        return eps**6 * self.near_constant(d2) / dist**5

    def far_stiffness(self, eps, r):
        """Far coupling eps**6 * profile(r) at physical distance r."""
        return eps**6 * self.profile(r)


@dataclass(frozen=True)
class Bond:
    """One unordered bond, as returned by ``BondList.__getitem__``."""

    i: int
    j: int
    stiffness: float
    direction: np.ndarray
    distance: float


@dataclass
class BondList:
    """Explicit unordered bonds in struct-of-arrays form."""

    i: np.ndarray  # (B,) int
    j: np.ndarray  # (B,) int
    stiffness: np.ndarray  # (B,) float
    direction: np.ndarray  # (B, 3) unit vectors, i to j
    distance: np.ndarray  # (B,) float
    n_particles: int

    def __len__(self):
        return len(self.i)

    def __getitem__(self, b) -> Bond:
        return Bond(
            int(self.i[b]),
            int(self.j[b]),
            float(self.stiffness[b]),
            self.direction[b].copy(),
            float(self.distance[b]),
        )

    @classmethod
    def concat(cls, parts) -> "BondList":
        parts = list(parts)
        n = {p.n_particles for p in parts}
        if len(n) != 1:
            raise ValueError("cannot concatenate bonds over different systems")
        return cls(
            i=np.concatenate([p.i for p in parts]),
            j=np.concatenate([p.j for p in parts]),
            stiffness=np.concatenate([p.stiffness for p in parts]),
            direction=np.concatenate([p.direction for p in parts]),
            distance=np.concatenate([p.distance for p in parts]),
            n_particles=n.pop(),
        )

    def energy(self, u: np.ndarray) -> float:
        """Sum of k <u_i - u_j, e>**2 over bonds."""
        du = u[self.i] - u[self.j]
        proj = np.einsum("bc,bc->b", du, self.direction)
        return float(np.sum(self.stiffness * proj * proj))

    def pair_sum(self, u: np.ndarray) -> np.ndarray:
        """Ordered-pair sum (W u)_i = sum_j k e e^T (u_i - u_j)."""
        du = u[self.i] - u[self.j]
        proj = self.stiffness * np.einsum("bc,bc->b", du, self.direction)
        f = proj[:, None] * self.direction
        out = np.zeros((self.n_particles, 3))
        for c in range(3):
            out[:, c] = np.bincount(self.i, weights=f[:, c], minlength=self.n_particles)
            out[:, c] -= np.bincount(self.j, weights=f[:, c], minlength=self.n_particles)
        return out

    def diag_blocks(self) -> np.ndarray:
        """(P, 3, 3) sum of k e e^T over the bonds at each particle."""
        blocks = self.stiffness[:, None, None] * (
            self.direction[:, :, None] * self.direction[:, None, :]
        )
        flat = blocks.reshape(len(self), 9)
        out = np.zeros((self.n_particles, 9))
        for c in range(9):
            out[:, c] = np.bincount(self.i, weights=flat[:, c], minlength=self.n_particles)
            out[:, c] += np.bincount(self.j, weights=flat[:, c], minlength=self.n_particles)
        return out.reshape(self.n_particles, 3, 3)


def _offset_slices(shape, off):
    src, dst = [], []
    for size, o in zip(shape, off):
        if o >= 0:
            src.append(slice(0, size - o))
            dst.append(slice(o, size))
        else:
            src.append(slice(-o, size))
            dst.append(slice(0, size + o))
    return tuple(src), tuple(dst)


def assemble_short_bonds(
    system: ParticleSystem, model: InteractionModel, offsets: np.ndarray | None = None
) -> BondList:
    """Collect the 26-neighbor bonds of a lattice.

    Directions and distances come from actual particle positions, so the
    routine serves local sub-lattices too; pairs with a removed endpoint
    are skipped.  ``offsets`` restricts the directions, e.g. to the
    staircase-mesh subgraph.
    """
    if offsets is None:
        offsets = SHORT_OFFSETS
    g = system.grid_ids
    parts_i, parts_j, parts_d2 = [], [], []
    for off in offsets:
        src, dst = _offset_slices(g.shape, off)
        a, b = g[src], g[dst]
        keep = (a >= 0) & (b >= 0)
        parts_i.append(a[keep])
        parts_j.append(b[keep])
        parts_d2.append(np.full(int(keep.sum()), off @ off, dtype=np.int64))
    i = np.concatenate(parts_i).astype(np.int64)
    j = np.concatenate(parts_j).astype(np.int64)
    d2 = np.concatenate(parts_d2)
    delta = system.positions[j] - system.positions[i]
    dist = np.linalg.norm(delta, axis=1)
    return BondList(
        i=i,
        j=j,
        stiffness=model.short_stiffness(system.eps, d2),
        direction=delta / dist[:, None],
        distance=dist,
        n_particles=system.n_particles,
    )


def far_bond_count(system: ParticleSystem, modulus: int) -> int:
    """Number of unordered far pairs, without materializing them."""
    g = system.grid_ids
    total = 0
    for r in np.ndindex(modulus, modulus, modulus):
        m = int(np.count_nonzero(g[r[0] :: modulus, r[1] :: modulus, r[2] :: modulus] >= 0))
        total += m * (m - 1) // 2
    return total


def far_bonds_dense(
    system: ParticleSystem, model: InteractionModel, max_bonds: int = 2_000_000
) -> BondList:
    """Materialize every far pair.  Oracle-sized systems only."""
    count = far_bond_count(system, model.modulus)
    if count > max_bonds:
        raise DomainError(
            f"{count} far bonds exceed the dense cap {max_bonds}; "
            "use LongRangeSet instead"
        )
    g = system.grid_ids
    N = model.modulus
    parts_i, parts_j = [], []
    for r in np.ndindex(N, N, N):
        ids = g[r[0] :: N, r[1] :: N, r[2] :: N].ravel()
        ids = ids[ids >= 0]
        if len(ids) < 2:
            continue
        a, b = np.triu_indices(len(ids), k=1)
        parts_i.append(ids[a])
        parts_j.append(ids[b])
    if not parts_i:
        empty = np.zeros(0, dtype=np.int64)
        return BondList(
            empty, empty, np.zeros(0), np.zeros((0, 3)), np.zeros(0), system.n_particles
        )
    i = np.concatenate(parts_i).astype(np.int64)
    j = np.concatenate(parts_j).astype(np.int64)
    delta = system.positions[j] - system.positions[i]
    dist = np.linalg.norm(delta, axis=1)
    return BondList(
        i=i,
        j=j,
        stiffness=model.far_stiffness(system.eps, dist),
        direction=delta / dist[:, None],
        distance=dist,
        n_particles=system.n_particles,
    )


# Flattened position of the unordered component pair (a, b) in the
# six-entry kernel lists used by LongRangeSet.
_COMP_INDEX = np.array([[0, 3, 4], [3, 1, 5], [4, 5, 2]])
_COMP_PAIRS = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))


class LongRangeSet:
    """Far coupling applied per congruence class by FFT convolution.

    Inside one class the nodes form a regular sub-grid of spacing
    modulus * eps and the pair kernel depends on the index offset only,
    so the ordered-pair sum

        (S u)_i = sum_j B(x_i - x_j) (u_i - u_j),
        B(d) = k(|d|) dhat dhat^T,

    splits into a position-dependent diagonal D_i = sum_j B(x_i - x_j)
    and one linear convolution, both evaluated with real FFTs cached per
    class shape.  Exactly equal to the enumerated pair sum; needs a
    gap-free lattice (use ``far_bonds_dense`` for systems with holes).
    """

    def __init__(self, system: ParticleSystem, model: InteractionModel):
        if np.any(system.grid_ids < 0):
            raise DomainError("fast far-field path needs a gap-free lattice")
        self.eps = float(system.eps)
        self.model = model
        self.n_particles = system.n_particles
        N = model.modulus
        self._ids = []
        for r in np.ndindex(N, N, N):
            sub = system.grid_ids[r[0] :: N, r[1] :: N, r[2] :: N]
            if sub.size > 1:
                self._ids.append(np.ascontiguousarray(sub.astype(np.int64)))
        self._plans = {}

    def _plan(self, shape):
        plan = self._plans.get(shape)
        if plan is None:
            plan = self._build_plan(shape)
            self._plans[shape] = plan
        return plan

    def _build_plan(self, shape):
        step = self.model.modulus * self.eps
        axes = [step * np.arange(-(c - 1), c, dtype=float) for c in shape]
        dx, dy, dz = np.meshgrid(*axes, indexing="ij")
        r2 = dx * dx + dy * dy + dz * dz
        center = tuple(c - 1 for c in shape)
        r2[center] = 1.0  # dodge 0/0; the center weight is zeroed below
        weight = self.model.far_stiffness(self.eps, np.sqrt(r2)) / r2
        weight[center] = 0.0
        comps = (dx * dx, dy * dy, dz * dz, dx * dy, dx * dz, dy * dz)
        fshape = tuple(sfft.next_fast_len(3 * c - 2) for c in shape)
        kf = [sfft.rfftn(weight * comp, fshape) for comp in comps]
        sl = tuple(slice(c - 1, 2 * c - 1) for c in shape)
        ones_f = sfft.rfftn(np.ones(shape), fshape)
        diag = np.empty(shape + (3, 3))
        for (a, b), k_ab in zip(_COMP_PAIRS, kf):
            block = sfft.irfftn(k_ab * ones_f, fshape)[sl]
            diag[..., a, b] = block
            diag[..., b, a] = block
        return kf, fshape, sl, diag

    def apply(self, u: np.ndarray) -> np.ndarray:
        """Ordered-pair far sum S u for a full (P, 3) displacement."""
        out = np.zeros((self.n_particles, 3))
        if self.model.profile.kind == "zero":
            return out
        for ids in self._ids:
            kf, fshape, sl, diag = self._plan(ids.shape)
            uc = u[ids]
            uf = [sfft.rfftn(uc[..., b], fshape) for b in range(3)]
            smooth = np.empty_like(uc)
            for a in range(3):
                acc = kf[_COMP_INDEX[a, 0]] * uf[0]
                acc += kf[_COMP_INDEX[a, 1]] * uf[1]
                acc += kf[_COMP_INDEX[a, 2]] * uf[2]
                smooth[..., a] = sfft.irfftn(acc, fshape)[sl]
            out[ids] = np.einsum("...ab,...b->...a", diag, uc) - smooth
        return out

    def pair_sum(self, u: np.ndarray) -> np.ndarray:
        """Alias for ``apply``, matching the BondList interface."""
        return self.apply(u)

    def diag_blocks(self) -> np.ndarray:
        """(P, 3, 3) with D_i = sum over partners of k dhat dhat^T."""
        out = np.zeros((self.n_particles, 3, 3))
        if self.model.profile.kind == "zero":
            return out
        for ids in self._ids:
            out[ids] = self._plan(ids.shape)[3]
        return out

    def energy(self, u: np.ndarray) -> float:
        """Unordered far sum of k <u_i - u_j, dhat>**2, via <u, S u>."""
        return float(np.einsum("pc,pc->", u, self.apply(u)))

    def bond_count(self) -> int:
        return sum(s.size * (s.size - 1) // 2 for s in self._ids)

    def stiffness_extrema(self) -> tuple[float, float]:
        """(min, max) far stiffness over realized pair offsets."""
        if not self._ids or self.model.profile.kind == "zero":
            return (0.0, 0.0)
        lo, hi = np.inf, -np.inf
        step = self.model.modulus * self.eps
        for shape in {s.shape for s in self._ids}:
            axes = [step * np.arange(-(c - 1), c, dtype=float) for c in shape]
            dx, dy, dz = np.meshgrid(*axes, indexing="ij")
            r = np.sqrt(dx * dx + dy * dy + dz * dz)
            k = self.model.far_stiffness(self.eps, r).ravel()
            k = np.delete(k, k.size // 2)  # drop the self offset
            lo = min(lo, float(k.min()))
            hi = max(hi, float(k.max()))
        return lo, hi


def pair_matrix(bonds: BondList) -> sparse.csr_matrix:
    """Sparse 3P x 3P matrix W with <u, W u> = bonds.energy(u)."""
    nb = len(bonds)
    e = bonds.direction
    blocks = bonds.stiffness[:, None, None] * (e[:, :, None] * e[:, None, :])
    comp = np.arange(3)
    row_i = 3 * bonds.i[:, None, None] + comp[None, :, None]
    row_j = 3 * bonds.j[:, None, None] + comp[None, :, None]
    col_i = 3 * bonds.i[:, None, None] + comp[None, None, :]
    col_j = 3 * bonds.j[:, None, None] + comp[None, None, :]
    rows, cols, vals = [], [], []
    for r, c, sign in ((row_i, col_i, 1.0), (row_j, col_j, 1.0), (row_i, col_j, -1.0), (row_j, col_i, -1.0)):
        rows.append(np.broadcast_to(r, (nb, 3, 3)).ravel())
        cols.append(np.broadcast_to(c, (nb, 3, 3)).ravel())
        vals.append((sign * blocks).ravel())
    n3 = 3 * bonds.n_particles
    return sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n3, n3),
    ).tocsr()
