"""Cubic lattice construction and geometric quality checks.

Particles sit on the nodes of a uniform grid of spacing ``eps`` inside an
axis-aligned cube.  Nodes on the cube faces are clamped and carry boundary
data; interior nodes carry the dynamics.  The grid cells are split into
six tetrahedra each by the standard simplicial (staircase) subdivision,
and ``validate_triangulation`` measures that mesh: edge length range,
smallest simplex volume, and whether a supplied bond list covers every
mesh edge.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigurationError, DomainError

__all__ = [
    "DomainBox",
    "LatticeConfig",
    "ParticleSystem",
    "TriangulationReport",
    "KUHN_OFFSETS",
    "build_cubic_lattice",
    "kuhn_edges",
    "voronoi_volumes",
    "voronoi_centroids",
    "boundary_net_max_distance",
    "validate_triangulation",
]

# Forward index offsets of the staircase subdivision of a grid cell.
# Every edge of that subdivision joins two nodes whose index triples are
# ordered componentwise, so the difference is a nonzero 0/1 vector.
KUHN_OFFSETS = np.array(
    [
        (0, 0, 1),
        (0, 1, 0),
        (0, 1, 1),
        (1, 0, 0),
        (1, 0, 1),
        (1, 1, 0),
        (1, 1, 1),
    ],
    dtype=np.int64,
)

# Vertex chains of the six tetrahedra per cell, one chain per ordering of
# the axes: 0, e_a, e_a + e_b, e_a + e_b + e_c.
_CELL_SIMPLICES = []
for _a, _b, _c in ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)):
    _v0 = np.zeros(3, dtype=np.int64)
    _v1 = _v0.copy()
    _v1[_a] = 1
    _v2 = _v1.copy()
    _v2[_b] = 1
    _v3 = _v2.copy()
    _v3[_c] = 1
    _CELL_SIMPLICES.append(np.stack([_v0, _v1, _v2, _v3]))
_CELL_SIMPLICES = np.array(_CELL_SIMPLICES)  # (6, 4, 3)


@dataclass(frozen=True)
class DomainBox:
    """Axis-aligned cube ``[origin, origin + side]^3``."""

    side: float
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not np.isfinite(self.side) or self.side <= 0:
            raise DomainError(f"box side must be positive, got {self.side}")

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.origin, dtype=float)

    @property
    def hi(self) -> np.ndarray:
        return self.lo + self.side

    def contains(self, points: np.ndarray, pad: float = 0.0) -> np.ndarray:
        """Componentwise membership test, inclusive, widened by ``pad``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.all((pts >= self.lo - pad) & (pts <= self.hi + pad), axis=1)


@dataclass(frozen=True)
class LatticeConfig:
    """Spacing and domain of a cubic particle lattice.

    The box side must be an integer multiple of ``eps``.  Ratios below 4
    are accepted (the toy systems in the tests use 1 and 2) but leave a
    thin or empty interior, so construction emits a warning for them.
    """

    eps: float
    box: DomainBox = DomainBox(1.0)

    def __post_init__(self):
        if not np.isfinite(self.eps) or self.eps <= 0:
            raise ConfigurationError(f"eps must be positive, got {self.eps}")
        ratio = self.box.side / self.eps
        n = round(ratio)
        if n < 1 or abs(ratio - n) > 1e-9 * max(1.0, ratio):
            raise ConfigurationError(
                f"box side {self.box.side} is not an integer multiple of eps {self.eps}"
            )

    @property
    def cells_per_side(self) -> int:
        return round(self.box.side / self.eps)


@dataclass
class ParticleSystem:
    """Flat arrays describing one lattice instance.

    ``grid_ids[ix, iy, iz]`` maps an index triple to a particle id, with -1
    marking removed nodes; ``triples`` is the inverse map.  Ids follow the
    C order of the index triples, so on a gap-free lattice
    ``grid_ids.ravel()`` is ``arange(n_particles)``.
    """

    eps: float
    box: DomainBox
    positions: np.ndarray  # (P, 3) float
    masses: np.ndarray  # (P,) float, eps^3 per node
    fixed: np.ndarray  # (P,) bool, True on the box faces
    triples: np.ndarray  # (P, 3) int
    grid_ids: np.ndarray  # (n+1, n+1, n+1) int32

    @property
    def n_particles(self) -> int:
        return self.positions.shape[0]

    @property
    def free(self) -> np.ndarray:
        return ~self.fixed

    @property
    def n_free(self) -> int:
        return int(np.count_nonzero(~self.fixed))

    @property
    def cells_per_side(self) -> int:
        return self.grid_ids.shape[0] - 1

    def remove_particles(self, ids) -> "ParticleSystem":
        """Return a copy with the given particles deleted.

        Survivors are re-numbered but keep their positions and grid
        nodes; the vacated nodes become -1 gaps.
        """
        drop = np.zeros(self.n_particles, dtype=bool)
        drop[np.asarray(ids, dtype=np.int64)] = True
        keep = ~drop
        new_id = np.cumsum(keep) - 1
        grid = np.full_like(self.grid_ids, -1)
        old = self.grid_ids
        occupied = old >= 0
        kept_nodes = occupied.copy()
        kept_nodes[occupied] = keep[old[occupied]]
        grid[kept_nodes] = new_id[old[kept_nodes]].astype(np.int32)
        return ParticleSystem(
            eps=self.eps,
            box=self.box,
            positions=self.positions[keep].copy(),
            masses=self.masses[keep].copy(),
            fixed=self.fixed[keep].copy(),
            triples=self.triples[keep].copy(),
            grid_ids=grid,
        )


def build_cubic_lattice(config: LatticeConfig) -> ParticleSystem:
    """Place one particle on every grid node of the box.

    Every particle gets mass ``eps**3``, the face ones included: the
    clamped particles never enter the kinetic term, so only interior
    masses matter, and a uniform value keeps the mass matrix trivial.
    """
    n = config.cells_per_side
    if n < 4:
        warnings.warn(
            f"lattice has only {n} cell(s) per side; interior is "
            + ("empty" if n <= 1 else "thin"),
            stacklevel=2,
        )
    side_ids = np.arange(n + 1)
    triples = np.stack(
        np.meshgrid(side_ids, side_ids, side_ids, indexing="ij"), axis=-1
    ).reshape(-1, 3)
    positions = config.box.lo + config.eps * triples.astype(float)
    fixed = np.any((triples == 0) | (triples == n), axis=1)
    masses = np.full(len(triples), config.eps**3, dtype=float)
    grid_ids = np.arange(len(triples), dtype=np.int32).reshape(n + 1, n + 1, n + 1)
    return ParticleSystem(
        eps=config.eps,
        box=config.box,
        positions=positions,
        masses=masses,
        fixed=fixed,
        triples=triples,
        grid_ids=grid_ids,
    )


def kuhn_edges(system: ParticleSystem) -> np.ndarray:
    """Edges of the staircase subdivision, as an (E, 2) id array.

    Pairs touching a removed node are dropped silently; completeness is
    the triangulation report's job.
    """
    g = system.grid_ids
    pairs = []
    for ox, oy, oz in KUHN_OFFSETS:
        gx, gy, gz = g.shape
        a = g[: gx - ox, : gy - oy, : gz - oz]
        b = g[ox:, oy:, oz:]
        keep = (a >= 0) & (b >= 0)
        pairs.append(np.stack([a[keep], b[keep]], axis=1))
    return np.concatenate(pairs, axis=0).astype(np.int64)


def voronoi_volumes(system: ParticleSystem) -> np.ndarray:
    """Volume of each particle's nearest-node cell inside the box.

    Interior cells are full eps-cubes; a cell is halved once per box face
    its node sits on.  The cells tile the box, so the volumes sum to the
    box volume exactly.
    """
    n = system.cells_per_side
    widths = np.full(system.triples.shape, system.eps, dtype=float)
    widths[(system.triples == 0) | (system.triples == n)] = system.eps / 2.0
    return np.prod(widths, axis=1)


def voronoi_centroids(system: ParticleSystem) -> np.ndarray:
    """Centroid of each nearest-node cell.

    Equals the particle position in the interior; on a face axis the
    half-width cell pulls the centroid eps/4 inward.
    """
    n = system.cells_per_side
    t = system.triples
    c = system.box.lo + system.eps * t.astype(float)
    c[t == 0] += system.eps / 4.0
    c[t == n] -= system.eps / 4.0
    return c


def boundary_net_max_distance(system: ParticleSystem) -> float:
    """Covering radius of the clamped set over the box surface.

    Sampled at the face-cell centers, where the distance to the
    surrounding grid nodes peaks; a gap-free face grid gives
    ``eps / sqrt(2)`` exactly.  Grows when boundary nodes are missing.
    """
    fixed_pos = system.positions[system.fixed]
    if len(fixed_pos) == 0:
        raise DomainError("system has no clamped particles")
    n = system.cells_per_side
    lo, hi = system.box.lo, system.box.hi
    mids = lo[0] + system.eps * (np.arange(n) + 0.5)
    u, v = np.meshgrid(mids, mids, indexing="ij")
    u, v = u.ravel(), v.ravel()
    samples = []
    for axis in range(3):
        for plane in (lo[axis], hi[axis]):
            pts = np.empty((u.size, 3))
            pts[:, axis] = plane
            others = [a for a in range(3) if a != axis]
            # mids are built from lo[0]; shift per axis for off-origin boxes
            pts[:, others[0]] = u - lo[0] + lo[others[0]]
            pts[:, others[1]] = v - lo[0] + lo[others[1]]
            samples.append(pts)
    samples = np.concatenate(samples, axis=0)
    dist, _ = cKDTree(fixed_pos).query(samples)
    return float(dist.max())


@dataclass(frozen=True)
class TriangulationReport:
    """Outcome of the mesh quality check."""

    complete: bool
    n_simplices: int
    min_edge: float  # shortest mesh edge, in units of eps
    max_edge: float  # longest mesh edge, in units of eps
    min_volume_ratio: float  # smallest simplex volume over eps^3
    missing_edges: int  # mesh edges absent from the supplied bond list
    warnings: tuple[str, ...]
    passed: bool


def validate_triangulation(
    system: ParticleSystem,
    edges: np.ndarray | None = None,
    min_volume_ratio: float = 0.1,
) -> TriangulationReport:
    """Check the staircase mesh induced by the lattice.

    Measures the edge length range and the smallest simplex volume (both
    relative to eps), verifies that every grid node is populated, and,
    when ``edges`` is given, that every mesh edge appears in it.  The
    uniform lattice yields edge lengths 1 and sqrt(3) and volume ratio
    1/6, so the default floor of 0.1 only trips on genuine degradation.

    Parameters
    ----------
    system : ParticleSystem
    edges : (B, 2) int array, optional
        Bond pairs expected to cover the mesh edges, in either order.
    min_volume_ratio : float
        Smallest acceptable simplex volume over ``eps**3``.
    """
    notes = []
    complete = bool(np.all(system.grid_ids >= 0))
    if not complete:
        gaps = int(np.count_nonzero(system.grid_ids < 0))
        notes.append(f"{gaps} grid node(s) unpopulated")
    if system.n_free == 0:
        notes.append("no free particles; every node is clamped")

    mesh = kuhn_edges(system)
    if len(mesh) == 0:
        return TriangulationReport(
            complete=complete,
            n_simplices=0,
            min_edge=0.0,
            max_edge=0.0,
            min_volume_ratio=0.0,
            missing_edges=0,
            warnings=tuple(notes + ["mesh has no edges"]),
            passed=False,
        )
    delta = system.positions[mesh[:, 1]] - system.positions[mesh[:, 0]]
    lengths = np.linalg.norm(delta, axis=1) / system.eps

    missing = 0
    if edges is not None:
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        p = system.n_particles
        weights = np.array([p, 1], dtype=np.int64)
        want = np.sort(mesh, axis=1) @ weights
        if len(edges) == 0:
            missing = len(want)
        else:
            have = np.sort(np.sort(edges, axis=1) @ weights)
            idx = np.minimum(np.searchsorted(have, want), len(have) - 1)
            missing = int(np.count_nonzero(have[idx] != want))
        if missing:
            notes.append(f"{missing} mesh edge(s) not covered by bonds")

    # Simplex volumes over complete cells only; gaps already fail above.
    g = system.grid_ids
    n = system.cells_per_side
    base = g[:n, :n, :n]
    vols = []
    n_simplices = 0
    for chain in _CELL_SIMPLICES:
        ids = [g[o[0] : o[0] + n, o[1] : o[1] + n, o[2] : o[2] + n] for o in chain]
        ok = (base >= 0) & (ids[1] >= 0) & (ids[2] >= 0) & (ids[3] >= 0)
        p0 = system.positions[ids[0][ok]]
        e1 = system.positions[ids[1][ok]] - p0
        e2 = system.positions[ids[2][ok]] - p0
        e3 = system.positions[ids[3][ok]] - p0
        vol = np.abs(np.einsum("ij,ij->i", np.cross(e1, e2), e3)) / 6.0
        vols.append(vol)
        n_simplices += int(np.count_nonzero(ok))
    vols = np.concatenate(vols)
    vol_ratio = float(vols.min() / system.eps**3) if len(vols) else 0.0

    passed = (
        complete
        and missing == 0
        and n_simplices > 0
        and vol_ratio >= min_volume_ratio
    )
    return TriangulationReport(
        complete=complete,
        n_simplices=n_simplices,
        min_edge=float(lengths.min()),
        max_edge=float(lengths.max()),
        min_volume_ratio=vol_ratio,
        missing_edges=missing,
        warnings=tuple(notes),
        passed=passed,
    )
