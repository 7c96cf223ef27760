"""Euclidean triangle complexes given purely by edge lengths.

Triangles reference edges by id rather than by vertex pair, so complexes with
loop edges (a torus glued from one square, say) are representable.  Side ``s``
of triangle ``(a, b, c)`` runs from corner ``s`` to corner ``s + 1``.

Text format (``.off``-like, ``#`` starts a comment)::

    OFFL
    V T E
    <V lines: vertex label>
    <T lines: a b c e0 e1 e2>     # vertex indices, then edge ids of sides ab, bc, ca
    <E lines: edge length>
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .divisor import Divisor, DivisorPoint, SurfaceSpec
from .errors import InvalidMeshError

CLAMP_SLACK = 1e-12


@dataclass(frozen=True)
class PolyhedralSurface:
    vertices: tuple[str, ...]
    triangles: tuple[tuple[int, int, int], ...]
    triangle_edges: tuple[tuple[int, int, int], ...]
    lengths: tuple[float, ...]
    geometry_tag: str = "euclidean"

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "triangles", tuple(tuple(t) for t in self.triangles))
        object.__setattr__(self, "triangle_edges", tuple(tuple(t) for t in self.triangle_edges))
        object.__setattr__(self, "lengths", tuple(float(x) for x in self.lengths))
        _validate(self)

    @classmethod
    def from_simplicial(cls, vertices: Sequence[str], triangles: Sequence[Sequence[int]],
                        lengths: Mapping[frozenset, float]) -> "PolyhedralSurface":
        """Build from vertex triples; edges are identified by their endpoint pair."""
        ids: dict[frozenset, int] = {}
        tri_edges = []
        for t in triangles:
            row = []
            for s in range(3):
                key = frozenset((t[s], t[(s + 1) % 3]))
                row.append(ids.setdefault(key, len(ids)))
            tri_edges.append(tuple(row))
        lens = [0.0] * len(ids)
        for key, i in ids.items():
            if key not in lengths:
                raise InvalidMeshError(f"no length for edge {sorted(key)}")
            lens[i] = lengths[key]
        return cls(tuple(vertices), tuple(map(tuple, triangles)), tuple(tri_edges), tuple(lens))

    @property
    def n_edges(self) -> int:
        return len(self.lengths)

    @property
    def euler_characteristic(self) -> int:
        return len(self.vertices) - self.n_edges + len(self.triangles)

    def surface(self) -> SurfaceSpec:
        chi = self.euler_characteristic
        return SurfaceSpec((2 - chi) // 2)

    def side_lengths(self, t: int) -> tuple[float, float, float]:
        e = self.triangle_edges[t]
        return self.lengths[e[0]], self.lengths[e[1]], self.lengths[e[2]]


def _validate(mesh: PolyhedralSurface) -> None:
    if mesh.geometry_tag != "euclidean":
        raise InvalidMeshError("only Euclidean polyhedra are supported")
    nv, ne = len(mesh.vertices), len(mesh.lengths)
    if len(mesh.triangles) != len(mesh.triangle_edges):
        raise InvalidMeshError("every triangle needs three edge ids")
    if any(not (x > 0 and math.isfinite(x)) for x in mesh.lengths):
        raise InvalidMeshError("edge lengths must be positive and finite")
    sides = defaultdict(list)
    for t, (tri, eds) in enumerate(zip(mesh.triangles, mesh.triangle_edges)):
        if any(not 0 <= v < nv for v in tri) or any(not 0 <= e < ne for e in eds):
            raise InvalidMeshError(f"triangle {t} references a missing vertex or edge")
        for s in range(3):
            sides[eds[s]].append((t, s))
        a, b, c = (mesh.lengths[e] for e in eds)
        if not (a < b + c and b < a + c and c < a + b):
            raise InvalidMeshError(f"triangle {t} violates the strict triangle inequality")
    for e in range(ne):
        if len(sides[e]) != 2:
            raise InvalidMeshError(f"edge {e} lies on {len(sides[e])} triangle sides, expected 2")
    # glue corners across each edge with opposite orientation; corner (t, k) sits at triangle vertex k
    link = defaultdict(set)
    for e, ((t1, s1), (t2, s2)) in sides.items():
        a1, b1 = mesh.triangles[t1][s1], mesh.triangles[t1][(s1 + 1) % 3]
        a2, b2 = mesh.triangles[t2][s2], mesh.triangles[t2][(s2 + 1) % 3]
        if (a1, b1) != (b2, a2):
            raise InvalidMeshError(f"edge {e} is glued inconsistently (surface not orientable or ill-formed)")
        # corner s1 of t1 meets corner (s2+1) of t2, corner s1+1 of t1 meets corner s2 of t2
        for c1, c2 in (((t1, s1), (t2, (s2 + 1) % 3)), ((t1, (s1 + 1) % 3), (t2, s2))):
            link[c1].add((c2, e))
            link[c2].add((c1, e))
    corners_at = defaultdict(list)
    for t, tri in enumerate(mesh.triangles):
        for k in range(3):
            corners_at[tri[k]].append((t, k))
    for v in range(nv):
        corners = corners_at.get(v)
        if not corners:
            raise InvalidMeshError(f"vertex {mesh.vertices[v]!r} has no incident triangle")
        # walk the link: each corner is adjacent to neighbours through its two incident sides
        adj = defaultdict(set)
        for c in corners:
            for other, _e in link[c]:
                adj[c].add(other)
        seen, stack = set(), [corners[0]]
        while stack:
            c = stack.pop()
            if c in seen:
                continue
            seen.add(c)
            stack.extend(adj[c] - seen)
        if len(seen) != len(corners):
            raise InvalidMeshError(f"link of vertex {mesh.vertices[v]!r} is not a single cycle")


def corner_angles(mesh: PolyhedralSurface) -> np.ndarray:
    """Array of shape (T, 3): the angle at each triangle corner, via the law of cosines."""
    out = np.empty((len(mesh.triangles), 3))
    for t in range(len(mesh.triangles)):
        sides = mesh.side_lengths(t)
        for k in range(3):
            # corner k lies between side k and side k-1; the opposite side is k+1
            b, c, a = sides[k], sides[(k - 1) % 3], sides[(k + 1) % 3]
            cos = (b * b + c * c - a * a) / (2 * b * c)
            if abs(cos) > 1 + CLAMP_SLACK:
                raise InvalidMeshError(f"degenerate corner in triangle {t} (cos = {cos!r})")
            out[t, k] = math.acos(min(1.0, max(-1.0, cos)))
    return out


def vertex_angles(mesh: PolyhedralSurface) -> np.ndarray:
    theta = np.zeros(len(mesh.vertices))
    ang = corner_angles(mesh)
    # fixed accumulation order keeps residuals reproducible
    for t, tri in enumerate(mesh.triangles):
        for k in range(3):
            theta[tri[k]] += ang[t, k]
    return theta


def angle_defects(mesh: PolyhedralSurface) -> Divisor:
    theta = vertex_angles(mesh)
    pts = tuple(DivisorPoint(label, float(th) / (2 * math.pi) - 1.0)
                for label, th in zip(mesh.vertices, theta))
    return Divisor(pts, mesh.surface())


@dataclass(frozen=True)
class DiscreteGaussBonnet:
    defect_sum: float
    expected: float
    residual: float

    def to_dict(self):
        return {"defect_sum": self.defect_sum, "expected": self.expected, "residual": self.residual}


def discrete_gauss_bonnet(mesh: PolyhedralSurface) -> DiscreteGaussBonnet:
    theta = vertex_angles(mesh)
    total = math.fsum(2 * math.pi - th for th in theta)
    expected = 2 * math.pi * mesh.euler_characteristic
    return DiscreteGaussBonnet(total, expected, abs(total - expected))


def subdivide_edge(mesh: PolyhedralSurface, edge: int) -> PolyhedralSurface:
    """Insert the midpoint of ``edge`` and split both adjacent triangles; the metric is unchanged."""
    nv, ne = len(mesh.vertices), mesh.n_edges
    mid = nv
    half = mesh.lengths[edge] / 2
    lengths = list(mesh.lengths) + [half, 0.0, 0.0]
    # edge keeps the first half, ne the second half, ne+1 / ne+2 are the two medians
    tris, tedges = [], []
    median_slot = ne + 1
    first_side_done = False
    for t, (tri, eds) in enumerate(zip(mesh.triangles, mesh.triangle_edges)):
        if edge not in eds:
            tris.append(tri)
            tedges.append(eds)
            continue
        if eds.count(edge) != 1:
            raise InvalidMeshError("cannot subdivide an edge used twice by one triangle")
        s = eds.index(edge)
        a, b, c = tri[s], tri[(s + 1) % 3], tri[(s + 2) % 3]
        e_ab, e_bc, e_ca = eds[s], eds[(s + 1) % 3], eds[(s + 2) % 3]
        la, lb, lc = mesh.lengths[e_ab], mesh.lengths[e_bc], mesh.lengths[e_ca]
        lengths[median_slot] = 0.5 * math.sqrt(max(2 * lb * lb + 2 * lc * lc - la * la, 0.0))
        # the two sides run in opposite directions, so the halves swap between them
        first, second = (ne, edge) if first_side_done else (edge, ne)
        first_side_done = True
        tris += [(a, mid, c), (mid, b, c)]
        tedges += [(first, median_slot, e_ca), (second, e_bc, median_slot)]
        median_slot += 1
    lengths[edge] = half
    return PolyhedralSurface(mesh.vertices + (f"m{edge}",), tuple(tris), tuple(tedges),
                             tuple(lengths), mesh.geometry_tag)


# ---------------------------------------------------------------------------
# file format and stock meshes


def load_mesh(path: str | Path) -> PolyhedralSurface:
    return parse_mesh(Path(path).read_text())


def parse_mesh(text: str) -> PolyhedralSurface:
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    try:
        if lines[0] != "OFFL":
            raise InvalidMeshError("mesh file must start with OFFL")
        nv, nt, ne = (int(x) for x in lines[1].split())
        body = lines[2:]
        if len(body) != nv + nt + ne:
            raise InvalidMeshError(f"expected {nv + nt + ne} body lines, found {len(body)}")
        labels = tuple(body[:nv])
        rows = [tuple(int(x) for x in ln.split()) for ln in body[nv:nv + nt]]
        if any(len(r) != 6 for r in rows):
            raise InvalidMeshError("triangle lines need three vertex indices and three edge ids")
        lengths = tuple(float(ln) for ln in body[nv + nt:])
    except (IndexError, ValueError) as exc:
        if isinstance(exc, InvalidMeshError):
            raise
        raise InvalidMeshError(f"malformed mesh file: {exc}") from exc
    return PolyhedralSurface(labels, tuple(r[:3] for r in rows), tuple(r[3:] for r in rows), lengths)


def format_mesh(mesh: PolyhedralSurface) -> str:
    out = ["OFFL", f"{len(mesh.vertices)} {len(mesh.triangles)} {mesh.n_edges}"]
    out += list(mesh.vertices)
    out += [" ".join(map(str, tri + eds)) for tri, eds in zip(mesh.triangles, mesh.triangle_edges)]
    out += [repr(x) for x in mesh.lengths]
    return "\n".join(out) + "\n"


def _from_coordinates(labels, coords, triangles) -> PolyhedralSurface:
    coords = np.asarray(coords, dtype=float)
    lengths = {}
    for t in triangles:
        for s in range(3):
            i, j = t[s], t[(s + 1) % 3]
            lengths[frozenset((i, j))] = float(np.linalg.norm(coords[i] - coords[j]))
    return PolyhedralSurface.from_simplicial(labels, triangles, lengths)


def regular_tetrahedron(edge: float = 1.0) -> PolyhedralSurface:
    tris = [(0, 1, 2), (0, 3, 1), (1, 3, 2), (2, 3, 0)]
    lengths = {frozenset(p): edge for p in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]}
    return PolyhedralSurface.from_simplicial(["a", "b", "c", "d"], tris, lengths)


def unit_cube() -> PolyhedralSurface:
    coords = [(x, y, z) for x in (0, 1) for y in (0, 1) for z in (0, 1)]
    idx = {c: i for i, c in enumerate(coords)}
    quads = [
        [(0, 0, 0), (0, 1, 0), (1, 1, 0), (1, 0, 0)],
        [(0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)],
        [(0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0, 1)],
        [(0, 1, 0), (0, 1, 1), (1, 1, 1), (1, 1, 0)],
        [(0, 0, 0), (0, 0, 1), (0, 1, 1), (0, 1, 0)],
        [(1, 0, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1)],
    ]
    tris = []
    for q in quads:
        a, b, c, d = (idx[v] for v in q)
        tris += [(a, b, c), (a, c, d)]
    labels = ["v" + "".join(map(str, c)) for c in coords]
    return _from_coordinates(labels, coords, tris)


def square_torus(side: float = 1.0) -> PolyhedralSurface:
    """Flat torus from one square: one vertex, three edges (two sides and a diagonal)."""
    # edge 0 horizontal, 1 vertical, 2 diagonal
    tris = ((0, 0, 0), (0, 0, 0))
    tedges = ((0, 1, 2), (2, 0, 1))
    return PolyhedralSurface(("o",), tris, tedges, (side, side, side * math.sqrt(2)))
