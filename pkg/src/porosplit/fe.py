"""Lagrange P1/P2 scalar and vector spaces on triangles.

Scalar nodes are the mesh vertices (P1) plus edge midpoints (P2), with edges
numbered by their sorted vertex pair so dof layout is deterministic.  Vector
spaces interleave the components per node: dof(node, comp) = node*nc + comp.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .mesh import BoundaryTag, Mesh


@dataclass(frozen=True)
class FeSpace:
    mesh: Mesh
    degree: int
    n_components: int
    dof_map: np.ndarray          # (nt, n_local) global dofs per triangle
    n_dofs: int
    node_coords: np.ndarray      # (n_nodes, 2) coordinates of the scalar nodes
    edges: np.ndarray            # (ne, 2) sorted vertex pairs (empty for P1)
    edge_index: dict             # sorted vertex pair -> edge number

    @property
    def n_nodes(self) -> int:
        return self.node_coords.shape[0]

    @property
    def n_local(self) -> int:
        return 3 if self.degree == 1 else 6


@dataclass(frozen=True)
class DofSet:
    """Sorted global dof indices selected by a per-component mask."""

    indices: np.ndarray
    component_mask: tuple

    def __len__(self) -> int:
        return self.indices.size


def mesh_edges(mesh: Mesh) -> tuple[np.ndarray, dict]:
    """Unique mesh edges as sorted vertex pairs, lexicographically ordered."""
    tris = mesh.triangles
    pairs = np.vstack(
        [tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]
    )
    pairs.sort(axis=1)
    edges = np.unique(pairs, axis=0)
    index = {(int(a), int(b)): k for k, (a, b) in enumerate(edges)}
    return edges, index


def build_space(mesh: Mesh, degree: int, n_components: int = 1) -> FeSpace:
    """Build a P1 or P2 Lagrange space with interleaved vector components."""
    if degree not in (1, 2):
        raise ValueError(f"unsupported polynomial degree {degree}")
    if n_components not in (1, 2):
        raise ValueError(f"unsupported component count {n_components}")

    nv = mesh.n_vertices
    if degree == 1:
        edges = np.empty((0, 2), dtype=np.int64)
        edge_index: dict = {}
        scalar_map = mesh.triangles
        node_coords = mesh.vertices
    else:
        edges, edge_index = mesh_edges(mesh)
        # local edge e_k joins the two vertices opposite local vertex k
        tris = mesh.triangles
        edge_nodes = np.empty((mesh.n_triangles, 3), dtype=np.int64)
        for t, (a, b, c) in enumerate(tris):
            edge_nodes[t, 0] = nv + edge_index[tuple(sorted((int(b), int(c))))]
            edge_nodes[t, 1] = nv + edge_index[tuple(sorted((int(a), int(c))))]
            edge_nodes[t, 2] = nv + edge_index[tuple(sorted((int(a), int(b))))]
        scalar_map = np.hstack([tris, edge_nodes])
        midpoints = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
        node_coords = np.vstack([mesh.vertices, midpoints])

    if n_components == 1:
        dof_map = scalar_map.astype(np.int64)
    else:
        nloc = scalar_map.shape[1]
        dof_map = np.empty((mesh.n_triangles, nloc * n_components), dtype=np.int64)
        for c in range(n_components):
            dof_map[:, c::n_components] = scalar_map * n_components + c

    return FeSpace(
        mesh=mesh,
        degree=degree,
        n_components=n_components,
        dof_map=dof_map,
        n_dofs=node_coords.shape[0] * n_components,
        node_coords=node_coords,
        edges=edges,
        edge_index=edge_index,
    )


def dirichlet_dofs(
    space: FeSpace,
    tags: Iterable[BoundaryTag],
    component_mask: tuple | None = None,
) -> DofSet:
    """Global dofs whose node lies on a facet with one of the given tags.

    component_mask selects components (e.g. (False, True) constrains only the
    y-component, as for sliding conditions); None selects all.
    """
    tag_values = {int(t) for t in tags}
    present = set(int(t) for t in space.mesh.facet_tags)
    missing = tag_values - present
    if missing:
        raise ValueError(f"tags {missing} not present on the mesh boundary")
    if component_mask is None:
        component_mask = (True,) * space.n_components
    if len(component_mask) != space.n_components:
        raise ValueError("component_mask length must match n_components")

    nodes: set[int] = set()
    nv = space.mesh.n_vertices
    for (a, b), tg in zip(space.mesh.facets, space.mesh.facet_tags):
        if int(tg) in tag_values:
            nodes.add(int(a))
            nodes.add(int(b))
            if space.degree == 2:
                nodes.add(nv + space.edge_index[tuple(sorted((int(a), int(b))))])

    nc = space.n_components
    dofs = [
        n * nc + c
        for n in nodes
        for c in range(nc)
        if component_mask[c]
    ]
    return DofSet(
        indices=np.array(sorted(dofs), dtype=np.int64),
        component_mask=tuple(bool(m) for m in component_mask),
    )


def evaluate_basis(degree: int, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reference-triangle basis values and gradients at the given points.

    points is (nq, 2) in the reference triangle with vertices (0,0), (1,0),
    (0,1).  Returns (values (nq, nb), gradients (nq, nb, 2)).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    x, y = pts[:, 0], pts[:, 1]
    lam = np.stack([1.0 - x - y, x, y], axis=1)            # (nq, 3)
    dlam = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])  # (3, 2)

    if degree == 1:
        values = lam
        grads = np.broadcast_to(dlam, (pts.shape[0], 3, 2)).copy()
        return values, grads
    if degree != 2:
        raise ValueError(f"unsupported polynomial degree {degree}")

    nq = pts.shape[0]
    values = np.empty((nq, 6))
    grads = np.empty((nq, 6, 2))
    for i in range(3):
        values[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
        grads[:, i, :] = (4.0 * lam[:, i] - 1.0)[:, None] * dlam[i]
    # edge function k pairs the two vertices opposite vertex k
    pairs = ((1, 2), (0, 2), (0, 1))
    for k, (i, j) in enumerate(pairs):
        values[:, 3 + k] = 4.0 * lam[:, i] * lam[:, j]
        grads[:, 3 + k, :] = 4.0 * (
            lam[:, i][:, None] * dlam[j] + lam[:, j][:, None] * dlam[i]
        )
    return values, grads


def interpolate(space: FeSpace, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Nodal interpolation of a function onto the space.

    fn maps (n, 2) coordinates to (n,) values for scalar spaces or (n, 2)
    for vector spaces.
    """
    vals = np.asarray(fn(space.node_coords), dtype=float)
    if space.n_components == 1:
        if vals.shape != (space.n_nodes,):
            raise ValueError("scalar interpolant must return shape (n_nodes,)")
        return vals.copy()
    if vals.shape != (space.n_nodes, space.n_components):
        raise ValueError("vector interpolant must return shape (n_nodes, nc)")
    return vals.ravel()  # interleaved (ux0, uy0, ux1, ...)
