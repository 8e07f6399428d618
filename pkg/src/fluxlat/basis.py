"""Static charges and truncated link-field bases.

Every link carries an integer field value in ``[-trunc, trunc]``.  Two
pictures are used.  In the QED picture the value is the electric field ``E``
and the physical sector obeys ``div E(v) = Q_v``.  In the microscopic picture
the value is the condensate number deviation ``delta`` and the constraint is
the plain sum ``sum_{l at v} delta_l = Delta_v``.  The two are related by the
staggering sign of the link's anchor vertex, ``E_l = (-1)**(m+n) delta_l``,
and likewise ``Q_v = (-1)**(m+n) Delta_v``.

A basis stores its states as rows of a small-integer array in lexicographic
order over link ordinals, field values ascending.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, ChargeValidationError
from .lattice import LatticeGeometry, Sublattice

DEFAULT_TRUNCATION = 2
DEFAULT_MAX_STATES = 50_000_000


class Convention(str, enum.Enum):
    QED = "qed"  # Q_v
    DELTA = "delta"  # Delta_v


class Picture(str, enum.Enum):
    E = "E"
    DELTA = "delta"


@dataclass(frozen=True)
class ChargeConfig:
    """Integer static charges on vertices, sparse ``(m, n, value)`` entries."""

    charges: tuple[tuple[int, int, int], ...] = ()
    convention: Convention = Convention.QED

    def __post_init__(self):
        merged: dict[tuple[int, int], int] = {}
        for m, n, q in self.charges:
            merged[(int(m), int(n))] = merged.get((int(m), int(n)), 0) + int(q)
        entries = tuple(sorted((m, n, q) for (m, n), q in merged.items() if q != 0))
        object.__setattr__(self, "charges", entries)
        object.__setattr__(self, "convention", Convention(self.convention))

    @classmethod
    def neutral(cls, convention: Convention | str = Convention.QED) -> "ChargeConfig":
        return cls((), convention)

    @classmethod
    def pair(cls, m0: int, n0: int, m1: int, n1: int, convention=Convention.QED) -> "ChargeConfig":
        """+1 at ``(m0, n0)`` and -1 at ``(m1, n1)`` (QED values, converted if needed)."""
        cfg = cls(((m0, n0, 1), (m1, n1, -1)), Convention.QED)
        return cfg if Convention(convention) is Convention.QED else cfg.converted()

    def dense(self, geom: LatticeGeometry) -> np.ndarray:
        out = np.zeros(geom.n_vertices, dtype=np.int64)
        for m, n, q in self.charges:
            out[geom.vertex_id(m, n)] += q
        return out

    def converted(self) -> "ChargeConfig":
        """Switch convention; the map ``Q = (-1)**(m+n) Delta`` is an involution."""
        other = Convention.DELTA if self.convention is Convention.QED else Convention.QED
        return ChargeConfig(
            tuple((m, n, q if (m + n) % 2 == 0 else -q) for m, n, q in self.charges), other
        )

    def as_convention(self, convention: Convention | str) -> "ChargeConfig":
        return self if Convention(convention) is self.convention else self.converted()

    def flipped(self) -> "ChargeConfig":
        return ChargeConfig(tuple((m, n, -q) for m, n, q in self.charges), self.convention)


@dataclass(frozen=True)
class Violation:
    rule: str
    message: str

    def __str__(self):
        return f"{self.rule}: {self.message}"


@dataclass(frozen=True)
class ChargeReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def raise_if_invalid(self):
        if self.violations:
            raise ChargeValidationError(self.violations)


def validate_charges(cfg: ChargeConfig, geom: LatticeGeometry) -> ChargeReport:
    """Check the constraints static charges must satisfy.

    QED charges need only total neutrality.  Microscopic ``Delta`` charges must
    sum to zero separately on each sublattice, which is what makes a +-1 QED
    pair realisable only at even separation.
    """
    violations = []
    for m, n, _ in cfg.charges:
        if not (0 <= m < geom.lx and 0 <= n < geom.ly):
            violations.append(Violation("vertex-range", f"charge at ({m}, {n}) lies outside the lattice"))
    if violations:
        return ChargeReport(tuple(violations))

    if cfg.convention is Convention.QED:
        total = sum(q for _, _, q in cfg.charges)
        if total != 0:
            violations.append(Violation("neutrality", f"total charge is {total}, must be 0"))
        return ChargeReport(tuple(violations))

    sums = {Sublattice.A: 0, Sublattice.B: 0}
    for m, n, d in cfg.charges:
        sums[Sublattice.A if (m + n) % 2 == 0 else Sublattice.B] += d
    for sub in (Sublattice.A, Sublattice.B):
        if sums[sub] != 0:
            violations.append(
                Violation(
                    f"sublattice-{sub.value}",
                    f"Delta charges on sublattice {sub.value} sum to {sums[sub]}, must be 0",
                )
            )
    if violations:
        qed = cfg.converted()
        pair = _unit_pair(qed)
        if pair is not None:
            (m0, n0), (m1, n1) = pair
            sep = abs(m0 - m1) + abs(n0 - n1)
            if sep % 2 == 1:
                violations.append(
                    Violation(
                        "pair-parity",
                        f"a +1/-1 pair at ({m0}, {n0}) and ({m1}, {n1}) is {sep} link{'s' if sep != 1 else ''} apart; "
                        "charges on opposite sublattices have the same sign of Delta, so only "
                        "even separations are realisable",
                    )
                )
    return ChargeReport(tuple(violations))


def _unit_pair(cfg: ChargeConfig):
    """Return ``((m+, n+), (m-, n-))`` if ``cfg`` is a single +1/-1 pair, else None."""
    if len(cfg.charges) != 2:
        return None
    pos = [(m, n) for m, n, q in cfg.charges if q == 1]
    neg = [(m, n) for m, n, q in cfg.charges if q == -1]
    if len(pos) == 1 and len(neg) == 1:
        return pos[0], neg[0]
    return None


@dataclass(frozen=True)
class LinkConfig:
    values: np.ndarray
    picture: Picture = Picture.E

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.int64))
        object.__setattr__(self, "picture", Picture(self.picture))


class _StateIndex:
    """Maps configuration rows to ordinals of a lexicographically sorted array."""

    def __init__(self, states: np.ndarray, trunc: int):
        self.trunc = trunc
        n_links = states.shape[1]
        base = 2 * trunc + 1
        self._radix = None
        if base ** n_links < 2**62:
            self._radix = base ** np.arange(n_links - 1, -1, -1, dtype=np.int64)
            self.keys = self._encode(states)
        else:
            self._table = {row.tobytes(): i for i, row in enumerate(np.ascontiguousarray(states))}

    def _encode(self, rows: np.ndarray) -> np.ndarray:
        return (rows.astype(np.int64) + self.trunc) @ self._radix

    def locate(self, rows: np.ndarray) -> np.ndarray:
        """Ordinals of ``rows`` (2-d), -1 where a row is absent or out of range."""
        rows = np.atleast_2d(rows)
        inside = np.all(np.abs(rows) <= self.trunc, axis=1)
        out = np.full(len(rows), -1, dtype=np.int64)
        if self._radix is not None:
            if len(self.keys) == 0:
                return out
            keys = self._encode(np.where(inside[:, None], rows, 0))
            pos = np.minimum(np.searchsorted(self.keys, keys), len(self.keys) - 1)
            hit = inside & (self.keys[pos] == keys)
            out[hit] = pos[hit]
        else:
            rows8 = np.ascontiguousarray(rows.astype(np.int8))
            for i in np.flatnonzero(inside):
                out[i] = self._table.get(rows8[i].tobytes(), -1)
        return out


@dataclass(eq=False)
class GaugeSectorBasis:
    """An ordered set of link configurations.

    ``charges`` is None for the unconstrained product basis.
    """

    geom: LatticeGeometry
    trunc: int
    charges: ChargeConfig | None
    picture: Picture
    states: np.ndarray = field(repr=False)  # (n_states, n_links), int8
    _index: _StateIndex = field(init=False, repr=False)

    def __post_init__(self):
        self.states = np.ascontiguousarray(self.states, dtype=np.int8).reshape(-1, self.geom.n_links)
        self.states.setflags(write=False)
        self._index = _StateIndex(self.states, self.trunc)

    def __len__(self):
        return len(self.states)

    @property
    def is_projected(self) -> bool:
        return self.charges is not None

    def config(self, i: int) -> LinkConfig:
        return LinkConfig(self.states[i], self.picture)

    def locate(self, rows: np.ndarray) -> np.ndarray:
        return self._index.locate(rows)

    def zero_index(self) -> int | None:
        i = int(self.locate(np.zeros((1, self.geom.n_links), dtype=np.int64))[0])
        return None if i < 0 else i


def state_index(basis: GaugeSectorBasis, config) -> int | None:
    """Ordinal of ``config`` in ``basis`` or None when it is not a member."""
    values = config.values if isinstance(config, LinkConfig) else np.asarray(config)
    if isinstance(config, LinkConfig) and config.picture is not basis.picture:
        raise ValueError(f"config is in the {config.picture.value} picture, basis in {basis.picture.value}")
    if values.shape != (basis.geom.n_links,):
        raise ValueError(f"config has {values.shape} entries, lattice has {basis.geom.n_links} links")
    i = int(basis.locate(values[None, :])[0])
    return None if i < 0 else i


def _check_trunc(trunc: int):
    if int(trunc) != trunc or trunc < 0:
        raise ValueError(f"truncation must be a non-negative integer, got {trunc}")
    if trunc > 63:
        raise ValueError("truncation above 63 does not fit the int8 state storage")


def enumerate_full(
    geom: LatticeGeometry,
    trunc: int = DEFAULT_TRUNCATION,
    picture: Picture | str = Picture.E,
    max_states: int = DEFAULT_MAX_STATES,
) -> GaugeSectorBasis:
    """All ``(2 trunc + 1)**n_links`` configurations, unconstrained."""
    _check_trunc(trunc)
    base = 2 * trunc + 1
    total = base**geom.n_links
    if total > max_states:
        raise CapacityError(f"full basis has {total} states, cap is {max_states}")
    digits = np.empty((total, geom.n_links), dtype=np.int8)
    rest = np.arange(total, dtype=np.int64)
    for l in range(geom.n_links - 1, -1, -1):
        rest, d = np.divmod(rest, base)
        digits[:, l] = d - trunc
    return GaugeSectorBasis(geom, int(trunc), None, Picture(picture), digits)


def enumerate_gauss_sector(
    geom: LatticeGeometry,
    charges: ChargeConfig | None = None,
    trunc: int = DEFAULT_TRUNCATION,
    max_states: int = DEFAULT_MAX_STATES,
) -> GaugeSectorBasis:
    """Configurations with ``|E_l| <= trunc`` and ``div E(v) = Q_v`` everywhere.

    Links are assigned in ordinal order, all live partial configurations
    advancing one link at a time.  After each assignment the two endpoint
    vertices are checked: the charge still owed there must be reachable with
    the incident links not yet assigned.  Children are emitted in ascending
    field order, so the surviving rows come out lexicographically sorted.
    """
    _check_trunc(trunc)
    charges = ChargeConfig.neutral() if charges is None else charges
    q = charges.as_convention(Convention.QED).dense(geom)
    base = 2 * trunc + 1
    values = np.arange(-trunc, trunc + 1, dtype=np.int8)

    remaining = np.zeros(geom.n_vertices, dtype=np.int64)
    np.add.at(remaining, geom.link_ends.ravel(), 1)
    # vertices with no links can only hold zero charge
    if np.any((remaining == 0) & (q != 0)):
        return GaugeSectorBasis(geom, int(trunc), charges, Picture.E, np.empty((0, geom.n_links)))

    partial = np.zeros((1, 0), dtype=np.int8)
    owed = np.tile(q.astype(np.int16), (1, 1))  # charge not yet supplied, per vertex
    for l, (tail, head) in enumerate(geom.link_ends):
        count = len(partial)
        if count == 0:
            break
        if count * base > 4 * max_states:
            raise CapacityError(f"Gauss-sector search frontier exceeded {4 * max_states} rows at link {l}")
        col = np.tile(values, count)
        partial = np.concatenate([np.repeat(partial, base, axis=0), col[:, None]], axis=1)
        owed = np.repeat(owed, base, axis=0)
        owed[:, tail] -= col
        owed[:, head] += col
        remaining[tail] -= 1
        remaining[head] -= 1
        keep = (np.abs(owed[:, tail]) <= trunc * remaining[tail]) & (
            np.abs(owed[:, head]) <= trunc * remaining[head]
        )
        partial, owed = partial[keep], owed[keep]
    if len(partial) and partial.shape[1] != geom.n_links:
        partial = np.empty((0, geom.n_links), dtype=np.int8)
    if len(partial) > max_states:
        raise CapacityError(f"Gauss sector has {len(partial)} states, cap is {max_states}")
    return GaugeSectorBasis(geom, int(trunc), charges.as_convention(Convention.QED), Picture.E, partial)


def gauss_violation(states: np.ndarray, geom: LatticeGeometry, charges: ChargeConfig, picture=Picture.E):
    """Per-state, per-vertex constraint residual.

    E picture: ``div E(v) - Q_v``.  Delta picture: ``sum_{l at v} delta_l - Delta_v``.
    """
    picture = Picture(picture)
    d = geom.incidence_matrix()
    if picture is Picture.E:
        q = charges.as_convention(Convention.QED).dense(geom)
    else:
        d = np.abs(d)
        q = charges.as_convention(Convention.DELTA).dense(geom)
    return states.astype(np.int64) @ d.T - q


def convert_picture(obj, geom: LatticeGeometry, target: Picture | str | None = None):
    """Map a LinkConfig or basis between the E and delta pictures.

    A converted basis is re-sorted into lexicographic order and its charges
    switch convention with it.
    """
    source = obj.picture
    if target is not None and Picture(target) is source:
        raise ValueError(f"object is already in the {source.value} picture")
    if not geom.bipartite:
        raise ValueError("staggering needs a bipartite lattice (even extents when periodic)")
    other = Picture.DELTA if source is Picture.E else Picture.E
    signs = geom.link_signs().astype(np.int8)
    if isinstance(obj, LinkConfig):
        return LinkConfig(obj.values * signs, other)
    rows = obj.states * signs
    order = np.lexsort(rows.T[::-1])
    charges = None
    if obj.charges is not None:
        charges = obj.charges.as_convention(Convention.DELTA if other is Picture.DELTA else Convention.QED)
    return GaugeSectorBasis(geom, obj.trunc, charges, other, rows[order])


def filter_full_basis(full: GaugeSectorBasis, charges: ChargeConfig) -> GaugeSectorBasis:
    """Project an unconstrained E-picture basis by direct evaluation of the Gauss predicate."""
    if full.is_projected or full.picture is not Picture.E:
        raise ValueError("expected an unconstrained E-picture basis")
    ok = ~np.any(gauss_violation(full.states, full.geom, charges), axis=1)
    return GaugeSectorBasis(full.geom, full.trunc, charges.as_convention(Convention.QED), Picture.E, full.states[ok])
