"""Measurements on eigenstates: link-field maps, flux tubes, static potential."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .basis import ChargeConfig, Convention, GaugeSectorBasis, Picture, enumerate_gauss_sector, validate_charges
from .errors import ChargeValidationError, ConvergenceError, InvalidGeometryError
from .hamiltonian import CouplingParams, build_kogut_susskind
from .lattice import X_LINK, Y_LINK, Boundary, LatticeGeometry
from .solver import SolverOptions, low_spectrum

FIELD_MAP_HEADER = ("m", "n", "k", "E_mean", "E2_mean", "delta_mean")
POTENTIAL_HEADER = ("R", "E_charged", "E_vacuum", "V", "V_strong", "rel_dev")
DEFAULT_VALIDITY_FRACTION = 0.1


def format_number(x) -> str:
    """Shortest round-trip repr; '.' decimal, no grouping, no negative zero."""
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x) + 0.0)


def write_csv(path, header, rows):
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_number(x) for x in row])
    return path


@dataclass
class FieldMap:
    geom: LatticeGeometry
    e_mean: np.ndarray
    e2_mean: np.ndarray
    delta_mean: np.ndarray
    metadata: dict = field(default_factory=dict)

    def rows(self):
        for l in range(self.geom.n_links):
            m, n, k = self.geom.link(l)
            yield m, n, k, self.e_mean[l], self.e2_mean[l], self.delta_mean[l]

    def write_csv(self, path):
        return write_csv(path, FIELD_MAP_HEADER, self.rows())

    def divergence(self) -> np.ndarray:
        return self.geom.incidence_matrix() @ self.e_mean


def field_map(state: np.ndarray, basis: GaugeSectorBasis, metadata: dict | None = None) -> FieldMap:
    """Per-link ``<E>``, ``<E^2>`` and staggered ``<delta>`` of a state.

    Only diagonal observables are formed, so the probability weights suffice.
    """
    if basis.picture is not Picture.E:
        raise ValueError("field maps are measured on an E-picture basis")
    psi = np.asarray(state, dtype=np.float64).ravel()
    if psi.shape[0] != len(basis):
        raise ValueError(f"state has {psi.shape[0]} amplitudes, basis has {len(basis)} states")
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > 1e-8:
        raise ValueError(f"state is not normalised (norm {norm:.12g})")
    prob = psi**2
    e = basis.states.astype(np.float64)
    e_mean = prob @ e
    e2_mean = prob @ (e * e)
    geom = basis.geom
    delta_mean = geom.link_signs() * e_mean if geom.bipartite else np.full(geom.n_links, np.nan)
    return FieldMap(geom, e_mean, e2_mean, delta_mean, dict(metadata or {}))


@dataclass
class FluxTubeReport:
    links: list[int]
    on_tube: list[float]
    off_tube_max: float
    alternates: bool

    def as_dict(self):
        return {
            "links": self.links,
            "on_tube": [float(x) for x in self.on_tube],
            "off_tube_max": float(self.off_tube_max),
            "alternates": bool(self.alternates),
        }


def tube_links(geom: LatticeGeometry, charges: ChargeConfig) -> tuple[list[int], int]:
    """Straight-line links from the +1 to the -1 charge and the flux orientation on them."""
    qed = charges.as_convention(Convention.QED).charges
    pos = [(m, n) for m, n, q in qed if q == 1]
    neg = [(m, n) for m, n, q in qed if q == -1]
    if len(qed) != 2 or len(pos) != 1 or len(neg) != 1:
        raise ValueError("flux-tube report needs exactly one +1 and one -1 charge")
    (m0, n0), (m1, n1) = pos[0], neg[0]
    if n0 == n1:
        lo, hi = sorted((m0, m1))
        links = [geom.link_id(m, n0, X_LINK) for m in range(lo, hi)]
        return links, (1 if m1 > m0 else -1)
    if m0 == m1:
        lo, hi = sorted((n0, n1))
        links = [geom.link_id(m0, n, Y_LINK) for n in range(lo, hi)]
        return links, (1 if n1 > n0 else -1)
    raise ValueError("flux-tube report needs the two charges on a common row or column")


def flux_tube_report(fmap: FieldMap, charges: ChargeConfig) -> FluxTubeReport:
    """On-tube flux (oriented from + to -), largest off-tube ``|<E>|``, delta alternation."""
    if not charges.charges:
        off = float(np.max(np.abs(fmap.e_mean))) if len(fmap.e_mean) else 0.0
        return FluxTubeReport([], [], off, True)
    links, orient = tube_links(fmap.geom, charges)
    on = [float(orient * fmap.e_mean[l]) for l in links]
    mask = np.ones(fmap.geom.n_links, dtype=bool)
    mask[links] = False
    off = float(np.max(np.abs(fmap.e_mean[mask]))) if mask.any() else 0.0
    delta = np.sign(fmap.delta_mean[links])
    alternates = bool(np.all(delta != 0) and np.all(delta[1:] == -delta[:-1]))
    return FluxTubeReport(links, on, off, alternates)


def validity_bound_check(params: CouplingParams, r: int, fraction: float = DEFAULT_VALIDITY_FRACTION) -> str | None:
    """Warn when a tube of length ``r`` is not short against ``lam / mu``."""
    if not params.is_microscopic:
        raise ValueError("the tube-length bound needs rotor couplings")
    limit = fraction * params.lam / params.mu
    if r >= limit:
        return (
            f"tube length R={r} is not small against lam/mu={params.lam / params.mu:.6g} "
            f"(threshold {fraction:g}*lam/mu={limit:.6g}); the Gauss-law energy may no longer confine it"
        )
    return None


@dataclass
class PotentialRow:
    r: int
    e_charged: float
    e_vacuum: float
    v: float
    v_strong: float
    rel_dev: float


@dataclass
class PotentialTable:
    g_sq: float
    rows: list[PotentialRow]
    warnings: list[str] = field(default_factory=list)
    basis_sizes: dict = field(default_factory=dict)
    convergence: dict = field(default_factory=dict)

    def write_csv(self, path):
        return write_csv(
            path, POTENTIAL_HEADER, ((r.r, r.e_charged, r.e_vacuum, r.v, r.v_strong, r.rel_dev) for r in self.rows)
        )

    def slope(self) -> float:
        """Least-squares slope of V against R."""
        rs = np.array([r.r for r in self.rows], dtype=np.float64)
        vs = np.array([r.v for r in self.rows])
        if len(rs) < 2:
            raise ValueError("slope needs at least two separations")
        rc = rs - rs.mean()
        return float(rc @ (vs - vs.mean()) / (rc @ rc))


def pair_placement(geom: LatticeGeometry, r: int, row: int | None = None) -> tuple[ChargeConfig, bool]:
    """+1/-1 pair ``r`` links apart along x, centred; flags contact with an open boundary."""
    if r < 1 or r > geom.lx - 1:
        raise InvalidGeometryError(f"separation R={r} does not fit a lattice {geom.lx} vertices wide")
    n0 = geom.ly // 2 if row is None else row
    m0 = (geom.lx - 1 - r) // 2
    touches = geom.boundary is Boundary.OPEN and (m0 == 0 or m0 + r == geom.lx - 1 or n0 in (0, geom.ly - 1))
    return ChargeConfig.pair(m0, n0, m0 + r, n0), touches


def check_separation(geom: LatticeGeometry, r: int):
    """Reject odd separations: the pair cannot be realised with sublattice-neutral Delta."""
    if int(r) != r or r < 1:
        raise ChargeValidationError([f"separation: R={r} must be an even integer >= 2"])
    if r % 2:
        charges, _ = pair_placement(geom, int(r))
        report = validate_charges(charges.converted(), geom)
        raise ChargeValidationError([f"separation: R={r} is odd"] + [str(v) for v in report.violations])


def _ground_energy(basis: GaugeSectorBasis, params: CouplingParams, opts: SolverOptions, label: str):
    h = build_kogut_susskind(basis, params)
    res = low_spectrum(h, 1, tol=opts.tol, max_iter=opts.max_iter, seed=opts.seed)
    if not res.converged:
        raise ConvergenceError(f"{label}: ground state not converged after {res.iterations} steps")
    return res


def static_potential(
    geom: LatticeGeometry,
    params: CouplingParams,
    trunc: int,
    r_list,
    opts: SolverOptions | None = None,
    row: int | None = None,
    max_states: int | None = None,
    validity_fraction: float = DEFAULT_VALIDITY_FRACTION,
) -> PotentialTable:
    """Vacuum-subtracted ground energy of a static +1/-1 pair against separation.

    Energies are in units of ``U0`` (the dimensionless Kogut-Susskind
    Hamiltonian); ``V_strong = g^2 R / 2`` is the leading strong-coupling value.
    """
    opts = opts or SolverOptions()
    kwargs = {} if max_states is None else {"max_states": max_states}
    r_list = sorted(int(r) for r in r_list)
    for r in r_list:
        check_separation(geom, r)
    g_sq = params.coupling_sq
    table = PotentialTable(g_sq, [])

    vacuum = enumerate_gauss_sector(geom, ChargeConfig.neutral(), trunc, **kwargs)
    vac = _ground_energy(vacuum, params, opts, "vacuum")
    e_vac = float(vac.eigenvalues[0])
    table.basis_sizes["vacuum"] = len(vacuum)
    table.convergence["vacuum"] = {"iterations": vac.iterations, "residual": float(vac.residuals[0])}

    for r in r_list:
        charges, touches = pair_placement(geom, r, row)
        if touches:
            table.warnings.append(f"R={r}: flux tube touches the lattice boundary")
        if params.is_microscopic:
            msg = validity_bound_check(params, r, validity_fraction)
            if msg:
                table.warnings.append(msg)
        sector = enumerate_gauss_sector(geom, charges, trunc, **kwargs)
        res = _ground_energy(sector, params, opts, f"R={r}")
        e_ch = float(res.eigenvalues[0])
        v = e_ch - e_vac
        v_strong = g_sq * r / 2.0
        table.rows.append(PotentialRow(r, e_ch, e_vac, v, v_strong, (v - v_strong) / v_strong))
        table.basis_sizes[f"R={r}"] = len(sector)
        table.convergence[f"R={r}"] = {"iterations": res.iterations, "residual": float(res.residuals[0])}
    return table
