"""Stiffness laws and bond machinery against hand-computed oracles."""

import math

import numpy as np
import pytest

from conftest import quiet_lattice
from netelast.errors import ConfigurationError, DomainError
from netelast.interaction import (
    SHORT_OFFSETS,
    BondList,
    InteractionModel,
    KProfile,
    LongRangeSet,
    assemble_short_bonds,
    far_bond_count,
    far_bonds_dense,
    pair_matrix,
)
from netelast.lattice import kuhn_edges, validate_triangulation


def test_profile_parsing():
    assert KProfile.parse("zero") == KProfile("zero", 0.0)
    assert KProfile.parse("const:2.5") == KProfile("const", 2.5)
    assert KProfile.parse("exp:1") == KProfile("exp", 1.0)
    assert KProfile.parse(" gauss:0.5 ") == KProfile("gauss", 0.5)
    for bad in ("zero:1", "exp", "exp:", "huh:1", "const:x", "const:-1"):
        with pytest.raises(ConfigurationError):
            KProfile.parse(bad)


def test_profile_values():
    r = np.array([0.0, 0.5, 2.0])
    assert np.allclose(KProfile("const", 3.0)(r), 3.0)
    assert np.allclose(KProfile("exp", 2.0)(r), np.exp(-2.0 * r))
    assert np.allclose(KProfile("gauss", 0.5)(r), np.exp(-0.5 * r * r))
    assert np.all(KProfile("zero", 0.0)(r) == 0.0)


def test_short_stiffness_frozen_values():
    # Axis bond: eps * k1 exactly.
    m = InteractionModel(k1=2.0, k2=1.0, k3=1.0)
    assert abs(m.short_stiffness(0.1, 1) - 0.2) < 1e-15
    # Face and body diagonals: eps * k / offset length.
    assert abs(m.short_stiffness(0.1, 2) - 0.1 / math.sqrt(2)) < 1e-15
    assert abs(m.short_stiffness(0.1, 3) - 0.1 / math.sqrt(3)) < 1e-15
    assert np.allclose(
        InteractionModel(k1=1.0, k2=5.0, k3=2.0).near_constant([1, 2, 3]),
        [1.0, 20.0, 18.0],
    )


def test_far_stiffness_frozen_values():
    m = InteractionModel(profile=KProfile.parse("exp:1"))
    got = m.far_stiffness(0.1, 0.2)
    assert abs(got - 8.187307530779818e-07) < 1e-18
    got_const = InteractionModel(profile=KProfile.parse("const:2")).far_stiffness(0.1, 5.0)
    assert got_const == pytest.approx(2e-6, rel=1e-12)
    g = InteractionModel(profile=KProfile.parse("gauss:0.5")).far_stiffness(0.1, 2.0)
    assert abs(g - 1e-6 * math.exp(-2.0)) < 1e-20
    assert InteractionModel().far_stiffness(0.1, 0.3) == 0.0


def test_invalid_model_rejected():
    with pytest.raises(ConfigurationError):
        InteractionModel(k2=-1.0)
    with pytest.raises(ConfigurationError):
        InteractionModel(modulus=0)
    with pytest.raises(ConfigurationError):
        InteractionModel().near_constant([1, 5])


def test_short_bonds_match_distance_scan():
    sys27 = quiet_lattice(0.5)
    bonds = assemble_short_bonds(sys27, InteractionModel())
    # Oracle: scan all pairs for squared distance in {1, 2, 3} eps^2.
    pos = sys27.positions
    d2 = np.sum((pos[:, None, :] - pos[None, :, :]) ** 2, axis=2) / 0.25
    want = {(a, b) for a in range(27) for b in range(a + 1, 27) if round(d2[a, b]) in (1, 2, 3)}
    assert len(SHORT_OFFSETS) == 13
    assert len(bonds) == len(want) == 158
    got = {tuple(sorted(p)) for p in zip(bonds.i.tolist(), bonds.j.tolist())}
    assert got == want
    assert np.allclose(np.linalg.norm(bonds.direction, axis=1), 1.0)
    assert np.allclose(bonds.distance, 0.5 * np.sqrt((bonds.direction != 0).sum(axis=1)))


def test_single_bond_energy_and_pair_sum():
    e = np.array([[1.0, 0.0, 0.0]])
    bonds = BondList(
        i=np.array([0]),
        j=np.array([1]),
        stiffness=np.array([2.0]),
        direction=e,
        distance=np.array([1.0]),
        n_particles=2,
    )
    u = np.array([[0.0, 0.0, 0.0], [0.3, 0.7, 0.0]])
    assert abs(bonds.energy(u) - 2.0 * 0.3**2) < 1e-15
    w = bonds.pair_sum(u)
    assert np.allclose(w[0], [-0.6, 0.0, 0.0])
    assert np.allclose(w[1], [0.6, 0.0, 0.0])
    assert abs(np.sum(u * w) - bonds.energy(u)) < 1e-15
    blocks = bonds.diag_blocks()
    assert np.allclose(blocks[0], 2.0 * np.outer(e[0], e[0]))
    assert np.allclose(blocks[0], blocks[1])


def test_gradient_identity(lat4):
    model = InteractionModel(k1=1.2, k2=0.7, k3=0.3, profile=KProfile.parse("exp:1"), modulus=2)
    short = assemble_short_bonds(lat4, model)
    far = far_bonds_dense(lat4, model)
    rng = np.random.default_rng(7)
    u = rng.standard_normal((lat4.n_particles, 3))
    d = rng.standard_normal((lat4.n_particles, 3))

    def total(v):
        return short.energy(v) + far.energy(v)

    force = -(short.pair_sum(u) + far.pair_sum(u))
    # The energy is exactly quadratic, so the central difference is exact
    # for any step; a large one sidesteps cancellation noise.
    h = 0.5
    slope = (total(u + h * d) - total(u - h * d)) / (2 * h)
    assert abs(slope - (-2.0 * np.sum(force * d))) < 1e-12 * max(1.0, abs(slope))


def test_far_count_closed_form(lat4):
    # Classes at modulus 2 on a 5-grid have 3 or 2 indices per axis.
    sizes = [27, 18, 18, 18, 12, 12, 12, 8]
    want = sum(m * (m - 1) // 2 for m in sizes)
    assert want == 1036
    assert far_bond_count(lat4, 2) == 1036
    # Brute-force congruence scan agrees.
    t = lat4.triples
    same = np.all((t[:, None, :] - t[None, :, :]) % 2 == 0, axis=2)
    assert np.count_nonzero(np.triu(same, k=1)) == 1036


@pytest.mark.parametrize("modulus,profile", [(2, "exp:1.3"), (3, "gauss:0.8"), (2, "const:1")])
def test_fft_far_apply_matches_dense(modulus, profile):
    system = quiet_lattice(0.2, side=1.0)
    model = InteractionModel(profile=KProfile.parse(profile), modulus=modulus)
    dense = far_bonds_dense(system, model)
    fast = LongRangeSet(system, model)
    assert fast.bond_count() == len(dense) == far_bond_count(system, modulus)
    rng = np.random.default_rng(3)
    u = rng.standard_normal((system.n_particles, 3))
    want = dense.pair_sum(u)
    got = fast.apply(u)
    assert np.allclose(got, want, rtol=1e-10, atol=1e-18)
    assert np.allclose(fast.diag_blocks(), dense.diag_blocks(), rtol=1e-10, atol=1e-18)
    assert abs(fast.energy(u) - dense.energy(u)) < 1e-10 * max(1.0, abs(dense.energy(u)))
    assert fast.energy(u) >= 0.0
    lo, hi = fast.stiffness_extrema()
    assert lo == pytest.approx(dense.stiffness.min(), rel=1e-12)
    assert hi == pytest.approx(dense.stiffness.max(), rel=1e-12)


def test_far_zero_profile_short_circuits(lat4):
    fast = LongRangeSet(lat4, InteractionModel())
    u = np.ones((lat4.n_particles, 3))
    assert np.all(fast.apply(u) == 0.0)
    assert fast.stiffness_extrema() == (0.0, 0.0)


def test_far_constants_in_kernel(lat4):
    # Uniform translation is annihilated: S u = D u - D u.
    model = InteractionModel(profile=KProfile.parse("exp:2"), modulus=2)
    fast = LongRangeSet(lat4, model)
    u = np.tile([0.4, -0.2, 1.0], (lat4.n_particles, 1))
    assert np.allclose(fast.apply(u), 0.0, atol=1e-18)


def test_far_fast_path_rejects_gaps():
    sys27 = quiet_lattice(0.5)
    gapped = sys27.remove_particles([int(sys27.grid_ids[1, 1, 1])])
    with pytest.raises(DomainError):
        LongRangeSet(gapped, InteractionModel(profile=KProfile.parse("const:1")))


def test_pair_matrix_matches_pair_sum(lat4):
    model = InteractionModel(k1=0.9, k2=1.1, k3=0.5)
    bonds = assemble_short_bonds(lat4, model)
    w = pair_matrix(bonds)
    rng = np.random.default_rng(11)
    u = rng.standard_normal((lat4.n_particles, 3))
    assert np.allclose(w @ u.ravel(), bonds.pair_sum(u).ravel(), rtol=1e-12, atol=1e-14)
    assert abs(w - w.T).max() < 1e-15
    assert u.ravel() @ (w @ u.ravel()) >= 0.0


def test_short_bonds_cover_mesh_edges(lat4):
    bonds = assemble_short_bonds(lat4, InteractionModel())
    edges = np.stack([bonds.i, bonds.j], axis=1)
    report = validate_triangulation(lat4, edges=edges)
    assert report.missing_edges == 0
    assert report.passed
    assert len(kuhn_edges(lat4)) < len(bonds)
