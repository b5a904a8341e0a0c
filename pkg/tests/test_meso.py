import numpy as np
import pytest

from netelast.errors import ConfigurationError, ProbeError
from netelast.interaction import BondList, InteractionModel, assemble_short_bonds
from netelast.lattice import DomainBox, ParticleSystem
from netelast.meso import (
    MesoProbe,
    SymTensor4,
    closed_form_tensor,
    extract_tensor,
    lemma34_scaling_check,
    minimize_cell_functional,
    probe_tensor,
    strain_basis,
    tensor_limit_study,
    translation_check,
)

AXIAL = 3.184013921292596  # k1 + 2 k2/sqrt 2 + 4 k3/(3 sqrt 3) at unit constants
CROSS = 1.4769071401060485  # k2/sqrt 2 + 4 k3/(3 sqrt 3)


def unit_model():
    return InteractionModel()


def cube_case(h=0.25, ratio=8, gamma=1.0):
    from netelast.meso import _local_lattice

    system, bonds = _local_lattice(h, h / ratio, 0.0, unit_model())
    probe = MesoProbe(center=(0.5 * h,) * 3, side=h, gamma=gamma)
    return probe, system, bonds


def test_closed_form_values():
    t = closed_form_tensor(1.0, 1.0, 1.0)
    assert t.component(0, 0, 0, 0) == pytest.approx(AXIAL, rel=1e-15)
    assert t.component(1, 1, 1, 1) == pytest.approx(AXIAL, rel=1e-15)
    assert t.component(0, 0, 1, 1) == pytest.approx(CROSS, rel=1e-15)
    assert t.component(0, 1, 0, 1) == pytest.approx(CROSS, rel=1e-15)
    assert t.component(0, 0, 0, 1) == 0.0
    assert t.component(0, 1, 0, 2) == 0.0
    # axis springs alone give a diagonal form with no coupling
    bare = closed_form_tensor(1.0, 0.0, 0.0)
    assert bare.component(0, 0, 0, 0) == 1.0
    assert bare.component(0, 0, 1, 1) == 0.0
    assert bare.component(0, 1, 0, 1) == 0.0
    with pytest.raises(ConfigurationError):
        closed_form_tensor(1.0, -0.5, 1.0)


def test_closed_form_isotropy_identity():
    # the axial component equals cross plus twice shear exactly on the
    # one-parameter family k1 = k2/sqrt 2 + 8 k3/(3 sqrt 3)
    k2, k3 = 1.3, 0.7
    k1 = k2 / np.sqrt(2.0) + 8.0 * k3 / (3.0 * np.sqrt(3.0))
    t = closed_form_tensor(k1, k2, k3)
    lhs = t.component(0, 0, 0, 0)
    rhs = 2.0 * t.component(0, 1, 0, 1) + t.component(0, 0, 1, 1)
    assert lhs == pytest.approx(rhs, rel=1e-14)


def two_particle_setup(d=0.25, K=0.7):
    box = DomainBox(side=1.0, origin=(0.0, 0.0, 0.0))
    pos = np.array([[0.5 - d / 2, 0.5, 0.5], [0.5 + d / 2, 0.5, 0.5]])
    system = ParticleSystem(
        eps=0.125,
        box=box,
        positions=pos,
        masses=np.full(2, 1.0),
        fixed=np.zeros(2, bool),
        triples=np.zeros((2, 3), np.int64),
        grid_ids=np.arange(2),
    )
    bonds = BondList(
        i=np.array([0]),
        j=np.array([1]),
        stiffness=np.array([K]),
        direction=np.array([[1.0, 0.0, 0.0]]),
        distance=np.array([d]),
        n_particles=2,
    )
    return system, bonds


def test_two_particle_cell_solve_matches_normal_equations():
    d, K = 0.25, 0.7
    system, bonds = two_particle_setup(d, K)
    probe = MesoProbe(center=(0.5, 0.5, 0.5), side=1.0, gamma=1.0)
    p = probe.penalty
    assert p == 1.0
    cell = minimize_cell_functional(probe, system, bonds, strain_basis()[0])
    # eliminating the transverse components leaves a 2x2 system in the
    # axial displacements whose value is K p d^2 / (p + 2K)
    assert cell.value == pytest.approx(K * p * d * d / (p + 2.0 * K), rel=1e-13)
    g = (system.positions - 0.5) @ strain_basis()[0].T
    shift = K * d / (2.0 * K + p)
    assert cell.displacement[0, 0] - g[0, 0] == pytest.approx(shift, rel=1e-12)
    assert cell.displacement[1, 0] - g[1, 0] == pytest.approx(-shift, rel=1e-12)
    # nothing pulls transverse: those components track the data exactly
    assert np.abs(cell.displacement[:, 1:] - g[:, 1:]).max() < 1e-14


def test_zero_strain_gives_zero():
    probe, system, bonds = cube_case()
    cell = minimize_cell_functional(probe, system, bonds, np.zeros((3, 3)))
    assert cell.value == 0.0
    assert np.abs(cell.displacement).max() == 0.0
    assert cell.iterations == 0


def test_rotation_data_costs_nothing():
    probe, system, bonds = cube_case()
    spin = np.array([[0.0, 0.3, -0.1], [-0.3, 0.0, 0.2], [0.1, -0.2, 0.0]])
    cell = minimize_cell_functional(probe, system, bonds, spin)
    g = (system.positions - 0.125) @ spin.T
    scale = probe.penalty * float(np.vdot(g, g))
    assert cell.value <= 1e-12 * scale


def test_cell_value_is_quadratic_in_strain():
    probe, system, bonds = cube_case()
    T = np.array([[0.3, 0.1, -0.2], [0.1, -0.4, 0.25], [-0.2, 0.25, 0.15]])
    base = minimize_cell_functional(probe, system, bonds, T).value
    for s in (2.0, 3.0):
        scaled = minimize_cell_functional(probe, system, bonds, s * T).value
        assert scaled == pytest.approx(s * s * base, rel=1e-10)


def test_polarization_consistency_and_psd():
    probe, system, bonds = cube_case()
    tensor = extract_tensor(probe, system, bonds)
    T = np.array([[0.3, 0.1, -0.2], [0.1, -0.4, 0.25], [-0.2, 0.25, 0.15]])
    direct = minimize_cell_functional(probe, system, bonds, T).value / probe.side**3
    assert tensor.quadratic(T) == pytest.approx(direct, rel=1e-10)
    assert tensor.symmetry_defect() <= 1e-10
    assert tensor.is_psd()
    assert tensor.eigenvalues().min() > 1.0  # comfortably positive here


def test_extraction_thread_pool_matches_serial():
    probe, system, bonds = cube_case()
    serial = extract_tensor(probe, system, bonds)
    pooled = extract_tensor(probe, system, bonds, threads=3)
    assert np.array_equal(serial.voigt, pooled.voigt)


def test_probe_tensor_against_closed_form():
    ref = closed_form_tensor(1.0, 1.0, 1.0)
    comps = ((0, 0, 0, 0), (0, 0, 1, 1), (0, 1, 0, 1))
    t8 = probe_tensor(0.25, 8, 1.0, unit_model())
    t16 = probe_tensor(0.25, 16, 1.0, unit_model())
    # frozen from this implementation; the boundary layer overshoots the
    # volume normalization by roughly one particle sheet per face
    assert t8.component(0, 0, 0, 0) == pytest.approx(3.624619, rel=1e-4)
    for npqr in comps:
        e8 = abs(t8.component(*npqr) - ref.component(*npqr)) / ref.component(*npqr)
        e16 = abs(t16.component(*npqr) - ref.component(*npqr)) / ref.component(*npqr)
        assert e8 < 0.15
        assert e16 < e8


def test_gamma_choice_barely_matters():
    ta = probe_tensor(0.25, 16, 0.5, unit_model())
    tb = probe_tensor(0.25, 16, 1.5, unit_model())
    rel = np.abs(ta.voigt - tb.voigt).max() / np.abs(ta.voigt).max()
    assert rel < 0.10
    assert rel < 0.01  # observed 2e-4; both penalties are effectively hard


def test_half_step_translation_robustness():
    report = translation_check(0.25, 32, 1.0, unit_model())
    assert report["rel_disagreement"] < 0.10  # observed 0.090
    assert report["aligned"].is_psd() and report["shifted"].is_psd()


def test_limit_study_rows_and_trend():
    rows = tensor_limit_study(
        [0.1, 0.25 / 8, 0.25 / 16], [0.25], [1.0], unit_model()
    )
    # the 0.1 spacing does not divide the cube and is skipped
    assert {r["eps"] for r in rows} == {0.25 / 8, 0.25 / 16}
    assert {r["npqr"] for r in rows} == {"1111", "1122", "1212"}
    for name in ("1111", "1122", "1212"):
        series = [r for r in rows if r["npqr"] == name]
        series.sort(key=lambda r: -r["eps"])
        assert series[1]["rel_error"] < series[0]["rel_error"]
        for r in series:
            assert r["rel_error"] == pytest.approx(
                abs(r["value"] - r["closed_form"]) / r["closed_form"]
            )


def test_lemma34_slopes():
    report = lemma34_scaling_check([0.25, 0.125, 0.0625], 8, 1.0, unit_model())
    assert report.energy_ok
    assert report.penalty_ok
    assert report.energy_slope == pytest.approx(3.0, abs=0.05)
    # penalty decays one power of h faster than the h^(5+gamma) floor
    assert report.penalty_slope == pytest.approx(7.0, abs=0.1)
    assert not report.degenerate


def test_lemma34_degenerate_and_underdetermined():
    report = lemma34_scaling_check(
        [0.25, 0.125, 0.0625], 8, 1.0, unit_model(), strain=np.zeros((3, 3))
    )
    assert report.degenerate
    assert np.isnan(report.energy_slope)
    with pytest.raises(ConfigurationError):
        lemma34_scaling_check([0.25, 0.125], 8, 1.0, unit_model())


def test_probe_validation():
    with pytest.raises(ConfigurationError):
        MesoProbe(center=(0.5, 0.5, 0.5), side=0.25, gamma=2.5)
    with pytest.raises(ConfigurationError):
        MesoProbe(center=(0.5, 0.5, 0.5), side=-1.0)
    probe, system, bonds = cube_case()
    # too coarse: fewer than four spacings across
    tiny = MesoProbe(center=(0.125, 0.125, 0.125), side=3.0 * system.eps)
    with pytest.raises(ProbeError):
        minimize_cell_functional(tiny, system, bonds, strain_basis()[0])
    # hanging past the domain by more than half a spacing
    outside = MesoProbe(center=(0.2, 0.125, 0.125), side=0.25)
    with pytest.raises(ProbeError):
        minimize_cell_functional(outside, system, bonds, strain_basis()[0])
    with pytest.raises(ConfigurationError):
        probe_tensor(0.25, 2, 1.0, unit_model())


def test_empty_cube_is_a_probe_error():
    system, _ = two_particle_setup()
    # particles sit near the center; probe a corner region away from them
    probe = MesoProbe(center=(0.125, 0.125, 0.125), side=0.5)
    empty = BondList(
        i=np.zeros(0, np.int64),
        j=np.zeros(0, np.int64),
        stiffness=np.zeros(0),
        direction=np.zeros((0, 3)),
        distance=np.zeros(0),
        n_particles=2,
    )
    with pytest.raises(ProbeError):
        minimize_cell_functional(probe, system, empty, strain_basis()[0])


def test_symtensor_shape_guard():
    with pytest.raises(ConfigurationError):
        SymTensor4(np.zeros((3, 3)))
