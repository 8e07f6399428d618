"""Rectangular 2-d lattice geometry.

Vertices are labelled ``(m, n)`` with ``0 <= m < lx`` and ``0 <= n < ly``.
A link is labelled ``(m, n, k)``: it emanates from vertex ``(m, n)`` in the
+x direction (``k = 1``) or the +y direction (``k = 2``).  The vertex a link
emanates from is its *anchor*.  A plaquette is labelled by its lower-left
vertex and is traversed counter-clockwise::

        (m,n+1) --- top (-1) ---- (m+1,n+1)
           |                          |
       left (-1)                  right (+1)
           |                          |
         (m,n) ---- bottom (+1) --- (m+1,n)

Ordinals are dense: vertex ``v = m + lx * n``; links are numbered by walking
the vertices in ordinal order and emitting the x-link before the y-link.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidGeometryError

X_LINK = 1
Y_LINK = 2

# orientation of (bottom, right, top, left) around a plaquette
PLAQUETTE_SIGNS = (1, 1, -1, -1)


class Boundary(str, enum.Enum):
    OPEN = "open"
    PERIODIC = "periodic"


class Sublattice(str, enum.Enum):
    A = "A"  # m + n even
    B = "B"  # m + n odd


@dataclass(frozen=True, eq=False)
class LatticeGeometry:
    """Index tables of an ``lx`` x ``ly`` lattice.  Build with :func:`build_geometry`."""

    lx: int
    ly: int
    boundary: Boundary
    link_coords: np.ndarray = field(repr=False)  # (n_links, 3): m, n, k
    link_ends: np.ndarray = field(repr=False)  # (n_links, 2): tail, head vertex
    plaquette_coords: np.ndarray = field(repr=False)  # (n_plaquettes, 2)
    plaquette_link_ids: np.ndarray = field(repr=False)  # (n_plaquettes, 4)
    _link_lookup: dict = field(repr=False)

    @property
    def n_vertices(self) -> int:
        return self.lx * self.ly

    @property
    def n_links(self) -> int:
        return len(self.link_coords)

    @property
    def n_plaquettes(self) -> int:
        return len(self.plaquette_coords)

    @property
    def bipartite(self) -> bool:
        """Whether nearest neighbours always sit on opposite sublattices."""
        if self.boundary is Boundary.OPEN:
            return True
        return self.lx % 2 == 0 and self.ly % 2 == 0

    def vertex_id(self, m: int, n: int) -> int:
        if not (0 <= m < self.lx and 0 <= n < self.ly):
            raise IndexError(f"vertex ({m}, {n}) outside {self.lx}x{self.ly} lattice")
        return m + self.lx * n

    def vertex_coords(self, v: int) -> tuple[int, int]:
        if not 0 <= v < self.n_vertices:
            raise IndexError(f"vertex ordinal {v} out of range")
        return v % self.lx, v // self.lx

    def link_id(self, m: int, n: int, k: int) -> int:
        try:
            return self._link_lookup[(m, n, k)]
        except KeyError:
            raise IndexError(f"no link ({m}, {n}, k={k}) on this lattice") from None

    def has_link(self, m: int, n: int, k: int) -> bool:
        return (m, n, k) in self._link_lookup

    def link(self, l: int) -> tuple[int, int, int]:
        m, n, k = self.link_coords[l]
        return int(m), int(n), int(k)

    def plaquette_id(self, m: int, n: int) -> int:
        hits = np.flatnonzero((self.plaquette_coords[:, 0] == m) & (self.plaquette_coords[:, 1] == n))
        if len(hits) == 0:
            raise IndexError(f"no plaquette anchored at ({m}, {n})")
        return int(hits[0])

    def incidence_matrix(self) -> np.ndarray:
        """Dense ``(n_vertices, n_links)`` divergence stencil: +1 at tail, -1 at head."""
        d = np.zeros((self.n_vertices, self.n_links), dtype=np.int64)
        rows = np.arange(self.n_links)
        d[self.link_ends[:, 0], rows] += 1
        d[self.link_ends[:, 1], rows] -= 1
        return d

    def vertex_signs(self) -> np.ndarray:
        """Staggering sign ``(-1)**(m+n)`` for every vertex ordinal."""
        v = np.arange(self.n_vertices)
        return np.where(((v % self.lx) + (v // self.lx)) % 2 == 0, 1, -1)

    def link_signs(self) -> np.ndarray:
        """Staggering sign of each link's anchor vertex."""
        return self.vertex_signs()[self.link_ends[:, 0]]


def build_geometry(lx: int, ly: int, boundary: Boundary | str = Boundary.OPEN) -> LatticeGeometry:
    boundary = Boundary(boundary)
    if int(lx) != lx or int(ly) != ly or lx < 2 or ly < 2:
        raise InvalidGeometryError(f"lattice needs at least 2x2 vertices, got {lx}x{ly}")
    lx, ly = int(lx), int(ly)
    periodic = boundary is Boundary.PERIODIC

    coords, ends = [], []
    for n in range(ly):
        for m in range(lx):
            tail = m + lx * n
            if periodic or m + 1 < lx:
                coords.append((m, n, X_LINK))
                ends.append((tail, (m + 1) % lx + lx * n))
            if periodic or n + 1 < ly:
                coords.append((m, n, Y_LINK))
                ends.append((tail, m + lx * ((n + 1) % ly)))
    lookup = {c: i for i, c in enumerate(coords)}

    pcoords, plinks = [], []
    mx = lx if periodic else lx - 1
    my = ly if periodic else ly - 1
    for n in range(my):
        for m in range(mx):
            pcoords.append((m, n))
            plinks.append(
                (
                    lookup[(m, n, X_LINK)],
                    lookup[((m + 1) % lx, n, Y_LINK)],
                    lookup[(m, (n + 1) % ly, X_LINK)],
                    lookup[(m, n, Y_LINK)],
                )
            )

    return LatticeGeometry(
        lx=lx,
        ly=ly,
        boundary=boundary,
        link_coords=np.array(coords, dtype=np.int64).reshape(-1, 3),
        link_ends=np.array(ends, dtype=np.int64).reshape(-1, 2),
        plaquette_coords=np.array(pcoords, dtype=np.int64).reshape(-1, 2),
        plaquette_link_ids=np.array(plinks, dtype=np.int64).reshape(-1, 4),
        _link_lookup=lookup,
    )


def incident_links(geom: LatticeGeometry, v: int) -> list[tuple[int, int]]:
    """Links touching vertex ``v`` as ``(link, orientation)`` pairs.

    Outgoing (+x, +y) links carry +1 and incoming (from -x, -y) links carry -1,
    so that ``sum(orientation * E[link])`` is the lattice divergence at ``v``.
    """
    m, n = geom.vertex_coords(v)
    out = []
    for k in (X_LINK, Y_LINK):
        if geom.has_link(m, n, k):
            out.append((geom.link_id(m, n, k), 1))
    periodic = geom.boundary is Boundary.PERIODIC
    for k, (pm, pn) in ((X_LINK, (m - 1, n)), (Y_LINK, (m, n - 1))):
        if periodic:
            pm, pn = pm % geom.lx, pn % geom.ly
        if geom.has_link(pm, pn, k):
            out.append((geom.link_id(pm, pn, k), -1))
    return out


def plaquette_links(geom: LatticeGeometry, p: int) -> list[tuple[int, int]]:
    """(bottom, +1), (right, +1), (top, -1), (left, -1) for plaquette ``p``."""
    if not 0 <= p < geom.n_plaquettes:
        raise IndexError(f"plaquette ordinal {p} out of range")
    return [(int(l), s) for l, s in zip(geom.plaquette_link_ids[p], PLAQUETTE_SIGNS)]


def stagger_sign(geom: LatticeGeometry, v: int) -> int:
    m, n = geom.vertex_coords(v)
    return 1 if (m + n) % 2 == 0 else -1


def sublattice(geom: LatticeGeometry, v: int) -> Sublattice:
    return Sublattice.A if stagger_sign(geom, v) == 1 else Sublattice.B
