"""Structured triangulations of the square with tagged boundaries.

The solver domain is always the square (0, L)^2.  The base grid splits each
of the n x n cells along one diagonal, alternating the diagonal direction in
a checkerboard pattern, which keeps the triangulation conforming and gives
2*n^2 positively oriented triangles.  Local refinement near a tagged part of
the boundary uses red-green refinement so the result stays conforming.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np


class BoundaryTag(IntEnum):
    LEFT = 0
    RIGHT = 1
    BOTTOM = 2
    TOP = 3
    FOOT = 4   # loaded part of the top edge in the footing geometry
    REST = 5   # unloaded remainder of the top edge in the footing geometry


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation of the square (0, L)^2.

    Attributes:
        vertices: (nv, 2) vertex coordinates in meters.
        triangles: (nt, 3) vertex indices, positively oriented.
        facets: (nf, 2) vertex index pairs of boundary edges.
        facet_tags: (nf,) BoundaryTag value per boundary edge.
        side_length: side length L of the square.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    facets: np.ndarray
    facet_tags: np.ndarray
    side_length: float

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def facets_with_tag(self, tag: BoundaryTag) -> np.ndarray:
        return self.facets[self.facet_tags == int(tag)]


def unit_square_mesh(n_per_side: int, side_length: float = 1.0) -> Mesh:
    """Alternating-diagonal triangulation of (0, L)^2 with n cells per side."""
    if n_per_side < 1:
        raise ValueError("n_per_side must be a positive integer")
    if not np.isfinite(side_length) or side_length <= 0.0:
        raise ValueError("side_length must be positive and finite")

    n = int(n_per_side)
    L = float(side_length)
    coords_1d = np.linspace(0.0, L, n + 1)
    xg, yg = np.meshgrid(coords_1d, coords_1d, indexing="ij")
    vertices = np.column_stack([xg.ravel(), yg.ravel()])

    def vid(i, j):
        return i * (n + 1) + j

    triangles = []
    for i in range(n):
        for j in range(n):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            if (i + j) % 2 == 0:
                triangles.append((v00, v10, v11))
                triangles.append((v00, v11, v01))
            else:
                triangles.append((v00, v10, v01))
                triangles.append((v10, v11, v01))

    facets = []
    tags = []
    for j in range(n):  # left x=0 and right x=L
        facets.append((vid(0, j), vid(0, j + 1)))
        tags.append(BoundaryTag.LEFT)
        facets.append((vid(n, j), vid(n, j + 1)))
        tags.append(BoundaryTag.RIGHT)
    for i in range(n):  # bottom y=0 and top y=L
        facets.append((vid(i, 0), vid(i + 1, 0)))
        tags.append(BoundaryTag.BOTTOM)
        facets.append((vid(i, n), vid(i + 1, n)))
        tags.append(BoundaryTag.TOP)

    return Mesh(
        vertices=vertices,
        triangles=np.asarray(triangles, dtype=np.int64),
        facets=np.asarray(facets, dtype=np.int64),
        facet_tags=np.asarray([int(t) for t in tags], dtype=np.int64),
        side_length=L,
    )


def _edge_key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def triangle_areas(mesh: Mesh) -> np.ndarray:
    """Signed areas by the shoelace formula (positive for valid meshes)."""
    p = mesh.vertices[mesh.triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def validate(mesh: Mesh) -> None:
    """Check the mesh invariants; raises ValueError on the first violation.

    Checks positive orientation, conformity (interior edges shared by exactly
    two triangles, boundary edges by one), unique tags on boundary edges, and
    that the triangle areas sum to L^2.
    """
    areas = triangle_areas(mesh)
    if np.any(areas <= 0.0):
        raise ValueError("mesh contains a non-positively oriented triangle")

    counts: dict[tuple[int, int], int] = {}
    for tri in mesh.triangles:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = _edge_key(int(a), int(b))
            counts[key] = counts.get(key, 0) + 1

    tagged: dict[tuple[int, int], int] = {}
    for (a, b), tag in zip(mesh.facets, mesh.facet_tags):
        key = _edge_key(int(a), int(b))
        if key in tagged:
            raise ValueError(f"boundary edge {key} carries more than one tag")
        tagged[key] = int(tag)

    for key, c in counts.items():
        if c == 2:
            if key in tagged:
                raise ValueError(f"interior edge {key} is tagged as boundary")
        elif c == 1:
            if key not in tagged:
                raise ValueError(f"boundary edge {key} is untagged")
        else:
            raise ValueError(f"edge {key} is shared by {c} triangles")
    for key in tagged:
        if counts.get(key, 0) != 1:
            raise ValueError(f"tagged edge {key} is not a boundary edge")

    total = float(np.sum(areas))
    L2 = mesh.side_length**2
    if abs(total - L2) > 1e-12 * L2:
        raise ValueError(f"triangle areas sum to {total}, expected {L2}")


def refine_near(mesh: Mesh, tag: BoundaryTag, levels: int) -> Mesh:
    """Red-green refine all triangles touching a facet with the given tag.

    Each level red-refines (quadrisects) every triangle that shares a vertex
    with a tagged facet and restores conformity by a green closure.  Existing
    vertices are never moved; child boundary facets inherit the parent tag.
    """
    if levels < 0:
        raise ValueError("levels must be non-negative")
    if not np.any(mesh.facet_tags == int(tag)):
        raise ValueError(f"mesh has no facet tagged {tag!r}")
    for _ in range(levels):
        marked_vertices = set(int(v) for v in mesh.facets_with_tag(tag).ravel())
        marked = np.array(
            [any(int(v) in marked_vertices for v in tri) for tri in mesh.triangles],
            dtype=bool,
        )
        mesh = _refine(mesh, marked)
    return mesh


def _refine(mesh: Mesh, marked: np.ndarray) -> Mesh:
    marked = marked.copy()
    tris = mesh.triangles

    # Red closure: any triangle with >= 2 split edges becomes red as well.
    split_edges: set[tuple[int, int]] = set()
    for t in np.flatnonzero(marked):
        a, b, c = (int(v) for v in tris[t])
        split_edges.update((_edge_key(a, b), _edge_key(b, c), _edge_key(c, a)))
    changed = True
    while changed:
        changed = False
        for t in np.flatnonzero(~marked):
            a, b, c = (int(v) for v in tris[t])
            edges = (_edge_key(a, b), _edge_key(b, c), _edge_key(c, a))
            if sum(e in split_edges for e in edges) >= 2:
                marked[t] = True
                split_edges.update(edges)
                changed = True

    # Midpoint vertices for all split edges, in deterministic order.
    vertices = [mesh.vertices]
    midpoint: dict[tuple[int, int], int] = {}
    next_id = mesh.n_vertices
    for key in sorted(split_edges):
        midpoint[key] = next_id
        next_id += 1
        vertices.append(0.5 * (mesh.vertices[key[0]] + mesh.vertices[key[1]]))
    new_vertices = np.vstack([vertices[0], np.array(vertices[1:]).reshape(-1, 2)]) \
        if len(vertices) > 1 else mesh.vertices

    new_tris: list[tuple[int, int, int]] = []
    for t, tri in enumerate(tris):
        a, b, c = (int(v) for v in tri)
        if marked[t]:
            mab = midpoint[_edge_key(a, b)]
            mbc = midpoint[_edge_key(b, c)]
            mca = midpoint[_edge_key(c, a)]
            new_tris += [(a, mab, mca), (mab, b, mbc), (mca, mbc, c), (mab, mbc, mca)]
        else:
            in_split = [
                _edge_key(a, b) in split_edges,
                _edge_key(b, c) in split_edges,
                _edge_key(c, a) in split_edges,
            ]
            k = sum(in_split)
            if k == 0:
                new_tris.append((a, b, c))
            else:
                # green bisection of the single split edge
                if in_split[0]:
                    m = midpoint[_edge_key(a, b)]
                    new_tris += [(a, m, c), (m, b, c)]
                elif in_split[1]:
                    m = midpoint[_edge_key(b, c)]
                    new_tris += [(b, m, a), (m, c, a)]
                else:
                    m = midpoint[_edge_key(c, a)]
                    new_tris += [(c, m, b), (m, a, b)]

    new_facets: list[tuple[int, int]] = []
    new_tags: list[int] = []
    for (a, b), tg in zip(mesh.facets, mesh.facet_tags):
        key = _edge_key(int(a), int(b))
        if key in split_edges:
            m = midpoint[key]
            new_facets += [(int(a), m), (m, int(b))]
            new_tags += [int(tg), int(tg)]
        else:
            new_facets.append((int(a), int(b)))
            new_tags.append(int(tg))

    return Mesh(
        vertices=new_vertices,
        triangles=np.asarray(new_tris, dtype=np.int64),
        facets=np.asarray(new_facets, dtype=np.int64),
        facet_tags=np.asarray(new_tags, dtype=np.int64),
        side_length=mesh.side_length,
    )


def tag_footing_boundary(mesh: Mesh, lo_frac: float = 0.25, hi_frac: float = 0.75) -> Mesh:
    """Split the top edge into FOOT (within (lo, hi)) and REST facets.

    A top facet is tagged FOOT when its midpoint falls strictly inside
    (lo_frac*L, hi_frac*L); once the facets align with the interval endpoints
    (after refinement) the FOOT facets cover the loaded strip exactly.
    """
    L = mesh.side_length
    lo, hi = lo_frac * L, hi_frac * L
    tags = mesh.facet_tags.copy()
    for k, (a, b) in enumerate(mesh.facets):
        if tags[k] in (int(BoundaryTag.TOP), int(BoundaryTag.FOOT), int(BoundaryTag.REST)):
            xm = 0.5 * (mesh.vertices[a, 0] + mesh.vertices[b, 0])
            tags[k] = int(BoundaryTag.FOOT) if lo < xm < hi else int(BoundaryTag.REST)
    return Mesh(mesh.vertices, mesh.triangles, mesh.facets, tags, mesh.side_length)


def write_mesh(mesh: Mesh, path: str) -> None:
    """Plain-text mesh dump for debugging."""
    with open(path, "w") as fh:
        fh.write(f"vertices {mesh.n_vertices} triangles {mesh.n_triangles}\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"{a} {b} {c}\n")
