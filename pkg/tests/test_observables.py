import math

import numpy as np
import pytest

from fluxlat.basis import ChargeConfig, enumerate_gauss_sector
from fluxlat.errors import ChargeValidationError, InvalidGeometryError
from fluxlat.hamiltonian import CouplingParams, build_kogut_susskind
from fluxlat.lattice import build_geometry
from fluxlat.observables import (
    POTENTIAL_HEADER,
    check_separation,
    field_map,
    flux_tube_report,
    format_number,
    pair_placement,
    static_potential,
    validity_bound_check,
    write_csv,
)
from fluxlat.solver import SolverOptions, dense_spectrum

PLAQ = build_geometry(2, 2)


def test_format_number(tmp_path):
    assert format_number(-0.0) == "0.0"
    assert format_number(3) == "3"
    assert format_number(np.int64(-2)) == "-2"
    assert format_number(0.1) == "0.1"
    assert format_number(None) == ""
    path = write_csv(tmp_path / "t.csv", ("a", "b"), [(1, 2.5)])
    assert path.read_bytes() == b"a,b\n1,2.5\n"


def test_field_map_rejects_unnormalised():
    basis = enumerate_gauss_sector(PLAQ, None, 1)
    with pytest.raises(ValueError):
        field_map(np.ones(3), basis)


def test_loop_superposition():
    basis = enumerate_gauss_sector(PLAQ, None, 1)
    psi = np.zeros(3)
    psi[basis.states[:, 0] != 0] = 1 / math.sqrt(2)
    fmap = field_map(psi, basis)
    np.testing.assert_allclose(fmap.e_mean, 0.0, atol=1e-15)
    np.testing.assert_allclose(fmap.e2_mean, 1.0, rtol=1e-15)


def test_strong_coupling_vacuum_has_no_flux():
    basis = enumerate_gauss_sector(PLAQ, None, 2)
    res = dense_spectrum(build_kogut_susskind(basis, CouplingParams.qed(100.0)))
    fmap = field_map(res.eigenvectors[:, 0], basis)
    assert np.max(np.abs(fmap.e_mean)) <= 1e-3
    report = flux_tube_report(fmap, ChargeConfig())
    assert report.links == [] and report.off_tube_max <= 1e-3


def test_field_map_invariants_and_gauss_law():
    g = build_geometry(4, 3)
    charges = ChargeConfig.pair(1, 1, 3, 1)
    basis = enumerate_gauss_sector(g, charges, 1)
    res = dense_spectrum(build_kogut_susskind(basis, CouplingParams.qed(1.0)))
    fmap = field_map(res.eigenvectors[:, 0], basis)
    assert np.all(fmap.e2_mean >= fmap.e_mean**2 - 1e-12)
    assert np.all(np.abs(fmap.e_mean) <= 1 + 1e-12)
    np.testing.assert_array_equal(fmap.delta_mean, g.link_signs() * fmap.e_mean)
    np.testing.assert_allclose(fmap.divergence(), charges.dense(g), atol=1e-10)


def test_ideal_flux_tube():
    g = build_geometry(5, 3)
    charges = ChargeConfig.pair(1, 1, 3, 1)
    basis = enumerate_gauss_sector(g, charges, 1)
    ideal = np.zeros(g.n_links, dtype=np.int64)
    ideal[[g.link_id(1, 1, 1), g.link_id(2, 1, 1)]] = 1
    psi = np.zeros(len(basis))
    psi[basis.locate(ideal[None, :])[0]] = 1.0
    report = flux_tube_report(field_map(psi, basis), charges)
    assert report.on_tube == [1.0, 1.0]
    assert report.off_tube_max == 0.0 and report.alternates


def test_flux_tube_needs_colinear_pair():
    g = build_geometry(3, 3)
    charges = ChargeConfig.pair(0, 0, 2, 2)
    basis = enumerate_gauss_sector(g, charges, 1)
    psi = np.zeros(len(basis))
    psi[0] = 1.0
    with pytest.raises(ValueError):
        flux_tube_report(field_map(psi, basis), charges)


@pytest.mark.parametrize("ratio, r, warns", [(1e5, 4, False), (20, 4, True), (40, 4, True), (41, 4, False)])
def test_validity_bound(ratio, r, warns):
    params = CouplingParams.microscopic(1.0, 1.0 / ratio, 1e-3)
    assert (validity_bound_check(params, r, 0.1) is not None) is warns


def test_pair_placement():
    g = build_geometry(5, 3)
    charges, touches = pair_placement(g, 2)
    assert charges.charges == ((1, 1, 1), (3, 1, -1)) and not touches
    charges, touches = pair_placement(g, 4)
    assert charges.charges == ((0, 1, 1), (4, 1, -1)) and touches
    with pytest.raises(InvalidGeometryError):
        pair_placement(g, 6)


def test_odd_separation_rejected():
    with pytest.raises(ChargeValidationError) as err:
        check_separation(build_geometry(5, 3), 3)
    assert "odd" in str(err.value) and "pair-parity" in str(err.value)
    with pytest.raises(ChargeValidationError):
        static_potential(build_geometry(5, 3), CouplingParams.qed(10.0), 1, [2, 3])


def test_potential_small_lattice_and_rotor_form(tmp_path):
    g = build_geometry(3, 3)
    table = static_potential(g, CouplingParams.qed(10.0), 2, [2], SolverOptions())
    row = table.rows[0]
    assert abs(row.v - 10.0) / 10.0 <= 1e-2
    assert row.v_strong == 10.0
    assert table.warnings  # R=2 spans the full width
    omega = math.sqrt(1.0 / (2.0 * 100.0))
    rotor = static_potential(g, CouplingParams.microscopic(1.0, 1.0, omega), 2, [2], SolverOptions())
    assert math.isclose(rotor.g_sq, 10.0, rel_tol=1e-14)
    assert abs(rotor.rows[0].v - row.v) <= 1e-10
    out = table.write_csv(tmp_path / "p.csv")
    assert out.read_text().splitlines()[0] == ",".join(POTENTIAL_HEADER)
