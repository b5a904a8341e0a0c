"""Pair-kernel and density pairings against enumeration and closed forms."""

import math

import numpy as np
import pytest

from conftest import quiet_lattice
from netelast.errors import ProbeError
from netelast.interaction import InteractionModel, KProfile
from netelast.kernels import (
    DENSITY_TESTS,
    PAIR_TESTS,
    DensityTestFunction,
    EmpiricalKernel,
    LimitKernel,
    PairTestFunction,
    density_convergence_rows,
    density_pairing,
    empirical_density,
    kernel_convergence_rows,
)
from netelast.lattice import DomainBox


def far_model(profile="const:1", modulus=2):
    return InteractionModel(profile=KProfile.parse(profile), modulus=modulus)


def test_pair_test_builtins():
    x = np.array([[2.0, 0.0, 0.0]])
    y = np.array([[3.0, 1.0, 1.0]])
    assert PAIR_TESTS["one"](x, y)[0] == 1.0
    assert PAIR_TESTS["x1"](x, y)[0] == 2.0
    assert PAIR_TESTS["y3"](x, y)[0] == 1.0
    assert PAIR_TESTS["x1y1"](x, y)[0] == 6.0
    want = math.exp(-(1.0 + 1.0 + 1.0))
    assert PAIR_TESTS["gauss"](x, y)[0] == pytest.approx(want, rel=1e-12)
    with pytest.raises(ProbeError):
        PairTestFunction.builtin("nope")


def test_density_test_builtins():
    p = np.array([[0.5, 0.25, 1.0]])
    assert DENSITY_TESTS["one"](p)[0] == 1.0
    assert DENSITY_TESTS["x1"](p)[0] == 0.5
    assert DENSITY_TESTS["sinprod"](p)[0] == pytest.approx(
        math.sin(math.pi * 0.5) * math.sin(math.pi * 0.25) * math.sin(math.pi), abs=1e-12
    )
    box = DomainBox(1.0)
    assert DENSITY_TESTS["one"].integral(box) == pytest.approx(1.0, rel=1e-12)
    assert DENSITY_TESTS["x1"].integral(box) == pytest.approx(0.5, rel=1e-9)
    assert DENSITY_TESTS["sinprod"].integral(box) == pytest.approx(
        (2.0 / math.pi) ** 3, rel=1e-7
    )
    with pytest.raises(ProbeError):
        DensityTestFunction.builtin("nope")


def test_empirical_density_values(lat4):
    rho = empirical_density(lat4)
    interior = np.array([[0.5, 0.5, 0.5]])
    face = np.array([[0.0, 0.5, 0.5]])
    corner = np.array([[0.0, 0.0, 0.0]])
    assert rho.evaluate(interior)[0] == pytest.approx(1.0)
    assert rho.evaluate(face)[0] == pytest.approx(2.0)
    assert rho.evaluate(corner)[0] == pytest.approx(8.0)


def test_density_gap_exact_for_constant():
    # sum of masses minus box volume: eps^3 ((n+1)^3 - n^3) exactly.
    for eps in (0.5, 0.25, 0.125):
        system = quiet_lattice(eps)
        gap = density_pairing(system, DENSITY_TESTS["one"]) - 1.0
        want = 3 * eps + 3 * eps**2 + eps**3
        assert gap == pytest.approx(want, rel=1e-12)
        assert gap <= 6.0 * eps


def test_density_gaps_decrease():
    rows = density_convergence_rows([0.25, 0.125, 0.0625], DomainBox(1.0))
    by_test = {}
    for row in rows:
        by_test.setdefault(row["test"], []).append(row["gap"])
    for name, gaps in by_test.items():
        assert gaps == sorted(gaps, reverse=True), name
        assert gaps[-1] < gaps[0] / 2.5


def test_limit_kernel_closed_form():
    kern = LimitKernel(far_model(), DomainBox(1.0))
    g = kern.evaluate([0.75, 0.5, 0.5], [0.25, 0.5, 0.5])
    assert g[0, 0] == pytest.approx(0.125, rel=1e-12)
    assert abs(g[1, 1]) < 1e-15 and abs(g[0, 1]) < 1e-15
    # General direction: off-diagonal a b / (a^2 + b^2) over N^3.
    g2 = kern.evaluate([0.3, 0.4, 0.0], [0.0, 0.0, 0.0])
    assert g2[0, 1] == pytest.approx(0.125 * 0.3 * 0.4 / 0.25, rel=1e-12)
    assert np.all(kern.evaluate([0.1, 0.1, 0.1], [0.1, 0.1, 0.1]) == 0.0)


def test_empirical_kernel_frozen_values(lat4):
    kern = EmpiricalKernel(lat4, far_model())
    # Interior aligned pair: stiffness eps^6 over (eps^3)^2 gives 1.
    x = lat4.positions[lat4.grid_ids[1, 1, 1]] + 0.05
    y = lat4.positions[lat4.grid_ids[3, 1, 1]] - 0.05
    g = kern.evaluate(x, y)
    assert g[0, 0] == pytest.approx(1.0, rel=1e-12)
    assert abs(g[1, 1]) < 1e-15
    # Face-to-face pair: both volumes halve, value quadruples.
    xf = lat4.positions[lat4.grid_ids[0, 1, 1]] + [0.0, 0.02, 0.02]
    yf = lat4.positions[lat4.grid_ids[0, 3, 1]] + [0.0, -0.02, 0.02]
    gf = kern.evaluate(xf, yf)
    assert gf[1, 1] == pytest.approx(4.0, rel=1e-12)
    # Same cell or mismatched congruence class: zero.
    assert np.all(kern.evaluate(x, x) == 0.0)
    z = lat4.positions[lat4.grid_ids[2, 1, 1]]
    assert np.all(kern.evaluate(x, z) == 0.0)


@pytest.mark.parametrize("name", sorted(PAIR_TESTS))
def test_fast_pairing_matches_enumeration(lat4, name):
    kern = EmpiricalKernel(lat4, far_model("exp:1", 2))
    fast = kern.pairing(PAIR_TESTS[name])
    slow = kern.pairing_dense(PAIR_TESTS[name])
    assert np.allclose(fast, slow, rtol=1e-9, atol=1e-15)
    assert np.allclose(fast, fast.T)


def test_fast_pairing_other_modulus():
    system = quiet_lattice(1.0 / 6.0)
    kern = EmpiricalKernel(system, far_model("gauss:0.7", 3))
    for name in ("one", "x1y1"):
        fast = kern.pairing(PAIR_TESTS[name])
        slow = kern.pairing_dense(PAIR_TESTS[name])
        assert np.allclose(fast, slow, rtol=1e-9, atol=1e-15)


def test_kernel_gaps_decrease():
    rows = kernel_convergence_rows(
        [0.25, 0.125, 0.0625], far_model(), DomainBox(1.0), test_names=("one", "x1y1")
    )
    by_test = {}
    for row in rows:
        by_test.setdefault(row["test"], []).append(row["gap"])
    for name, gaps in by_test.items():
        assert gaps == sorted(gaps, reverse=True), (name, gaps)


def test_limit_pairing_quadrature_stability():
    kern = LimitKernel(far_model(), DomainBox(1.0))
    coarse = kern.pairing(PAIR_TESTS["gauss"], m_delta=80, n_axis=512)
    fine = kern.pairing(PAIR_TESTS["gauss"], m_delta=160, n_axis=1024)
    assert np.allclose(coarse, fine, rtol=2e-3, atol=1e-8)
    with pytest.raises(ProbeError):
        kern.pairing(PAIR_TESTS["one"], m_delta=81)


def test_kernel_rejects_gaps():
    sys27 = quiet_lattice(0.5)
    gapped = sys27.remove_particles([0])
    with pytest.raises(ProbeError):
        EmpiricalKernel(gapped, far_model())
