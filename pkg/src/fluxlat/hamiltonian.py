"""Sparse assembly of the lattice Hamiltonians.

Operators are returned as ``scipy.sparse.csr_matrix`` with sorted indices and
no duplicate coordinates.  Off-diagonal parts are always emitted as ``T + T.T``
from a single transition rule, so every operator is exactly symmetric.

Two families are built here:

* the Kogut-Susskind Hamiltonian of compact U(1) on the QED-picture Gauss
  sector, ``(g^2/2) sum E^2 - (1/g^2) sum cos(curl theta)``;
* the microscopic rotor model on the unconstrained basis,
  ``lam sum_v G_v^2 + mu sum_l delta_l^2 + H_R``, where ``H_R`` hops one quantum
  between orthogonal links that share a vertex.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .basis import (
    ChargeConfig,
    Convention,
    GaugeSectorBasis,
    Picture,
    enumerate_full,
    enumerate_gauss_sector,
    validate_charges,
    DEFAULT_MAX_STATES,
)
from .errors import DegeneracyError
from .lattice import PLAQUETTE_SIGNS, LatticeGeometry

DEFAULT_REGIME_RATIO = 100.0


class RegimeWarning(UserWarning):
    pass


@dataclass(frozen=True)
class CouplingParams:
    """Either the gauge coupling ``g_sq`` or the rotor couplings ``lam, mu, omega``.

    The rotor form maps onto the gauge form through ``g^4 = lam mu / (2 omega^2)``
    with energy unit ``U0 = 2 mu / g^2 = 4 omega^2 g^2 / lam``.
    """

    g_sq: float | None = None
    lam: float | None = None
    mu: float | None = None
    omega: float | None = None

    def __post_init__(self):
        rotor = (self.lam, self.mu, self.omega)
        if self.g_sq is not None:
            if any(x is not None for x in rotor):
                raise ValueError("give either g_sq or (lam, mu, omega), not both")
            if not self.g_sq > 0:
                raise ValueError(f"g_sq must be positive, got {self.g_sq}")
        else:
            if any(x is None for x in rotor):
                raise ValueError("rotor couplings need all of lam, mu and omega")
            if not self.lam > 0:
                raise ValueError("lam must be positive")
            if self.mu < 0 or self.omega < 0:
                raise ValueError("mu and omega must be non-negative")

    @classmethod
    def qed(cls, g_sq: float) -> "CouplingParams":
        return cls(g_sq=float(g_sq))

    @classmethod
    def microscopic(cls, lam: float, mu: float, omega: float) -> "CouplingParams":
        return cls(lam=float(lam), mu=float(mu), omega=float(omega))

    @property
    def is_microscopic(self) -> bool:
        return self.g_sq is None

    @property
    def coupling_sq(self) -> float:
        """``g^2``; infinite for a rotor model without hopping."""
        if self.g_sq is not None:
            return self.g_sq
        if self.omega == 0:
            return math.inf
        return math.sqrt(self.lam * self.mu / (2.0 * self.omega**2))

    @property
    def energy_scale(self) -> float:
        """``U0``; 1 for the dimensionless gauge form."""
        if self.g_sq is not None:
            return 1.0
        return self.omega * math.sqrt(8.0 * self.mu / self.lam)

    def regime_ratios(self) -> tuple[float, float]:
        if not self.is_microscopic:
            raise ValueError("regime ratios need rotor couplings")
        r_mu = math.inf if self.mu == 0 else self.lam / self.mu
        r_omega = math.inf if self.omega == 0 else self.lam / self.omega
        return r_mu, r_omega

    def in_qed_regime(self, ratio: float = DEFAULT_REGIME_RATIO) -> bool:
        r_mu, r_omega = self.regime_ratios()
        return r_mu >= ratio and r_omega >= ratio

    def ks_coefficients(self, physical_units: bool = False) -> tuple[float, float]:
        """(electric, plaquette) prefactors of ``sum E^2`` and ``sum (P + P^dag)``.

        Dimensionless: ``g^2/2`` and ``1/(2 g^2)``.  In rotor units they become
        ``mu`` and ``2 omega^2 / lam``, finite even when ``omega = 0``.
        """
        if physical_units:
            if not self.is_microscopic:
                raise ValueError("physical units need rotor couplings")
            return self.mu, 2.0 * self.omega**2 / self.lam
        g_sq = self.coupling_sq
        if g_sq == 0 or math.isinf(g_sq):
            raise ValueError("dimensionless form needs 0 < g^2 < inf; use physical_units")
        return g_sq / 2.0, 1.0 / (2.0 * g_sq)


def _as_g_sq(params) -> float:
    return params.coupling_sq if isinstance(params, CouplingParams) else float(params)


def _diagonal(values: np.ndarray) -> sp.csr_matrix:
    return sp.diags(np.asarray(values, dtype=np.float64), 0, format="csr")


def _transitions(basis: GaugeSectorBasis, moves) -> sp.csr_matrix:
    """Symmetric 0/1 pattern ``T + T.T`` of the given moves.

    Each move is ``(link_ids, shifts)``; it maps a state to the one with
    ``shifts`` added on ``link_ids``.  Moves leaving ``[-trunc, trunc]`` or
    the basis are dropped.
    """
    n = len(basis)
    states = basis.states
    rows, cols = [], []
    for links, shifts in moves:
        links = np.asarray(links)
        new = states[:, links].astype(np.int16) + np.asarray(shifts, dtype=np.int16)
        ok = np.all(np.abs(new) <= basis.trunc, axis=1)
        src = np.flatnonzero(ok)
        if len(src) == 0:
            continue
        target = states[src].copy()
        target[:, links] = new[ok]
        dst = basis.locate(target)
        hit = dst >= 0
        rows.append(dst[hit])
        cols.append(src[hit])
    if rows:
        r, c = np.concatenate(rows), np.concatenate(cols)
    else:
        r = c = np.empty(0, dtype=np.int64)
    t = sp.coo_matrix((np.ones(len(r)), (r, c)), shape=(n, n)).tocsr()
    out = (t + t.T).tocsr()
    out.sum_duplicates()
    out.sort_indices()
    return out


def plaquette_moves(geom: LatticeGeometry):
    """Moves of the plaquette operator: lower E on +1 links, raise on -1 links."""
    shifts = -np.array(PLAQUETTE_SIGNS)
    return [(geom.plaquette_link_ids[p], shifts) for p in range(geom.n_plaquettes)]


def hopping_pairs(geom: LatticeGeometry) -> list[tuple[int, int]]:
    """(x-link, y-link) pairs coupled by the Rabi hopping.

    Around every plaquette ``(m, n)`` these are the four corner pairs
    ``(a_{m,n}, b_{m,n})``, ``(a_{m,n}, b_{m+1,n})``, ``(a_{m,n+1}, b_{m,n})``
    and ``(a_{m,n+1}, b_{m+1,n})``; together they cover each orthogonal pair
    of links meeting at a vertex exactly once.
    """
    pairs = []
    for bottom, right, top, left in geom.plaquette_link_ids:
        pairs += [(bottom, left), (bottom, right), (top, left), (top, right)]
    return [(int(a), int(b)) for a, b in pairs]


def build_electric(basis: GaugeSectorBasis, g_sq) -> sp.csr_matrix:
    if basis.picture is not Picture.E:
        raise ValueError("electric term is assembled in the E picture")
    e2 = np.sum(basis.states.astype(np.int64) ** 2, axis=1)
    return _diagonal(_as_g_sq(g_sq) / 2.0 * e2)


def build_magnetic(basis: GaugeSectorBasis, g_sq) -> sp.csr_matrix:
    """``-(1/g^2) sum_p cos(theta_p) = -(1/(2 g^2)) sum_p (P_p + P_p^dag)``."""
    if basis.picture is not Picture.E:
        raise ValueError("magnetic term is assembled in the E picture")
    return -(1.0 / (2.0 * _as_g_sq(g_sq))) * _transitions(basis, plaquette_moves(basis.geom))


def build_kogut_susskind(
    basis: GaugeSectorBasis, params: CouplingParams, physical_units: bool = False
) -> sp.csr_matrix:
    """Dimensionless Kogut-Susskind Hamiltonian, or ``U0`` times it in rotor units."""
    if basis.picture is not Picture.E:
        raise ValueError("Kogut-Susskind Hamiltonian is assembled in the E picture")
    if not isinstance(params, CouplingParams):
        params = CouplingParams.qed(params)
    e_coef, p_coef = params.ks_coefficients(physical_units)
    e2 = np.sum(basis.states.astype(np.int64) ** 2, axis=1)
    h = _diagonal(e_coef * e2)
    if p_coef != 0.0:
        h = h - p_coef * _transitions(basis, plaquette_moves(basis.geom))
    h = h.tocsr()
    h.sum_duplicates()
    h.sort_indices()
    return h


def gauss_values(basis: GaugeSectorBasis, charges: ChargeConfig) -> np.ndarray:
    """``(n_states, n_vertices)`` array of Gauss-operator eigenvalues.

    E picture: ``div E(v) - Q_v``.  Delta picture: the plain sum of incident
    ``delta`` minus ``Delta_v``.
    """
    geom = basis.geom
    d = geom.incidence_matrix()
    if basis.picture is Picture.E:
        q = charges.as_convention(Convention.QED).dense(geom)
    else:
        d = np.abs(d)
        q = charges.as_convention(Convention.DELTA).dense(geom)
    return basis.states.astype(np.int64) @ d.T - q


def gauss_operator(full_basis: GaugeSectorBasis, v: int, charges: ChargeConfig) -> sp.csr_matrix:
    return _diagonal(gauss_values(full_basis, charges)[:, v])


def _rotor_parts(basis: GaugeSectorBasis, params: CouplingParams, charges: ChargeConfig):
    """Diagonal ``H_G``, diagonal ``H_E`` and the hopping matrix, in the basis' picture."""
    if not params.is_microscopic:
        raise ValueError("the rotor model needs lam, mu, omega couplings")
    geom = basis.geom
    if not geom.bipartite:
        raise ValueError("the rotor model needs a bipartite lattice (even extents when periodic)")
    validate_charges(charges.as_convention(Convention.DELTA), geom).raise_if_invalid()

    g = gauss_values(basis, charges)
    hg = params.lam * np.sum(g**2, axis=1).astype(np.float64)
    he = params.mu * np.sum(basis.states.astype(np.int64) ** 2, axis=1).astype(np.float64)

    # a~ lowers delta on the x-link, b~^dag raises it on the y-link
    signs = geom.link_signs() if basis.picture is Picture.E else np.ones(geom.n_links, dtype=np.int64)
    moves = [((x, y), (-signs[x], signs[y])) for x, y in hopping_pairs(geom)]
    hr = params.omega * _transitions(basis, moves) if params.omega else sp.csr_matrix((len(basis),) * 2)
    return hg, he, hr.tocsr()


def _assemble_rotor(basis, params, charges) -> sp.csr_matrix:
    hg, he, hr = _rotor_parts(basis, params, charges)
    h = (_diagonal(hg + he) + hr).tocsr()
    h.sum_duplicates()
    h.sort_indices()
    return h


def build_microscopic_rotor(
    full_basis: GaugeSectorBasis, params: CouplingParams, charges: ChargeConfig
) -> sp.csr_matrix:
    """``lam sum G^2 + mu sum delta^2 + H_R`` on a delta-picture basis."""
    if full_basis.picture is not Picture.DELTA:
        raise ValueError("the microscopic rotor model is assembled in the delta picture")
    return _assemble_rotor(full_basis, params, charges)


def stagger_equivalent(
    full_basis: GaugeSectorBasis, params: CouplingParams, charges: ChargeConfig
) -> sp.csr_matrix:
    """The rotor model written directly in E variables.

    ``G_v`` becomes ``(-1)**(m+n) (div E - Q)`` and the hopping operators of
    links anchored on sublattice B swap raising and lowering.
    """
    if full_basis.picture is not Picture.E:
        raise ValueError("the staggered form is assembled in the E picture")
    return _assemble_rotor(full_basis, params, charges)


def derive_effective(
    geom: LatticeGeometry,
    trunc: int,
    params: CouplingParams,
    charges: ChargeConfig,
    max_states: int = DEFAULT_MAX_STATES,
    regime_ratio: float = DEFAULT_REGIME_RATIO,
) -> tuple[sp.csr_matrix, GaugeSectorBasis]:
    """Second-order effective Hamiltonian on the Gauss sector.

    ``H_eff = P H_E P - P H_R (1 - P) H_G^{-1} (1 - P) H_R P`` with ``P`` the
    projector onto zero Gauss energy, evaluated on the full truncated rotor
    basis.  Returns the operator and the QED-picture sector it acts on; rows
    follow the sector's ordering so it can be compared with
    :func:`build_kogut_susskind` element by element.
    """
    if not params.in_qed_regime(regime_ratio):
        r_mu, r_omega = params.regime_ratios()
        warnings.warn(
            f"outside the QED regime: lam/mu = {r_mu:.3g}, lam/omega = {r_omega:.3g} (want >= {regime_ratio:g})",
            RegimeWarning,
            stacklevel=2,
        )
    delta_charges = charges.as_convention(Convention.DELTA)
    full = enumerate_full(geom, trunc, Picture.DELTA, max_states)
    hg, he, hr = _rotor_parts(full, params, delta_charges)

    sector = enumerate_gauss_sector(geom, charges, trunc, max_states)
    p_idx = full.locate(sector.states.astype(np.int64) * geom.link_signs())
    if np.any(p_idx < 0) or np.any(hg[p_idx] != 0):
        raise DegeneracyError("Gauss sector does not coincide with the zero-energy states of H_G")
    outside = np.ones(len(full), dtype=bool)
    outside[p_idx] = False
    q_idx = np.flatnonzero(outside)
    if np.any(hg[q_idx] == 0):
        raise DegeneracyError("H_G has zero-energy states outside the projected sector; charges inconsistent")

    coupling = hr[p_idx][:, q_idx]
    second = coupling @ sp.diags(1.0 / hg[q_idx]) @ coupling.T
    heff = (_diagonal(he[p_idx]) - second).tocsr()
    heff = ((heff + heff.T) * 0.5).tocsr()
    heff.sum_duplicates()
    heff.sort_indices()
    return heff, sector


def is_symmetric(op: sp.spmatrix) -> bool:
    diff = (op - op.T).tocsr()
    diff.eliminate_zeros()
    return diff.nnz == 0


def commutator_norm(a: sp.spmatrix, b: sp.spmatrix) -> float:
    """Largest absolute entry of ``[a, b]``."""
    c = (a @ b - b @ a).tocsr()
    return float(np.max(np.abs(c.data))) if c.nnz else 0.0
