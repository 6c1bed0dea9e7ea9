import numpy as np
import pytest

from porosplit.fe import (
    build_space,
    dirichlet_dofs,
    evaluate_basis,
    interpolate,
    mesh_edges,
)
from porosplit.mesh import BoundaryTag, unit_square_mesh
from porosplit.quadrature import TRI_POINTS


def test_dof_counts_one_cell(one_cell_mesh):
    assert build_space(one_cell_mesh, 1, 1).n_dofs == 4
    # P2 vector: 2 x (4 vertices + 5 edges), edges counted by brute force
    edges, _ = mesh_edges(one_cell_mesh)
    assert edges.shape[0] == 5
    assert build_space(one_cell_mesh, 2, 2).n_dofs == 2 * (4 + 5)


def test_dof_counts_swelling_triple():
    m = unit_square_mesh(10, 1e-2)
    edges, _ = mesh_edges(m)
    expected = 2 * 121 + 2 * (121 + edges.shape[0]) + 121
    total = (
        build_space(m, 1, 2).n_dofs
        + build_space(m, 2, 2).n_dofs
        + build_space(m, 1, 1).n_dofs
    )
    assert total == expected == 1245


def test_unsupported_degree(one_cell_mesh):
    with pytest.raises(ValueError):
        build_space(one_cell_mesh, 3, 1)


def test_dirichlet_bottom_scalar(one_cell_mesh):
    s = build_space(one_cell_mesh, 1, 1)
    d = dirichlet_dofs(s, {BoundaryTag.BOTTOM})
    assert len(d) == 2


def test_dirichlet_sliding_mask():
    m = unit_square_mesh(10, 1e-2)
    s = build_space(m, 1, 2)
    d = dirichlet_dofs(s, {BoundaryTag.BOTTOM}, (False, True))
    assert len(d) == 11
    # coordinate-scan oracle: y-components of nodes with y == 0
    nodes = np.flatnonzero(s.node_coords[:, 1] == 0.0)
    assert np.array_equal(d.indices, np.sort(2 * nodes + 1))


def test_dirichlet_all_sides_p2_vector():
    m = unit_square_mesh(4, 1.0)
    s = build_space(m, 2, 2)
    d = dirichlet_dofs(
        s, {BoundaryTag.LEFT, BoundaryTag.RIGHT, BoundaryTag.TOP, BoundaryTag.BOTTOM}
    )
    x, y = s.node_coords[:, 0], s.node_coords[:, 1]
    on_boundary = (x == 0.0) | (x == 1.0) | (y == 0.0) | (y == 1.0)
    expected = np.sort(
        np.concatenate([2 * np.flatnonzero(on_boundary), 2 * np.flatnonzero(on_boundary) + 1])
    )
    assert np.array_equal(d.indices, expected)


def test_dirichlet_missing_tag(one_cell_mesh):
    s = build_space(one_cell_mesh, 1, 1)
    with pytest.raises(ValueError):
        dirichlet_dofs(s, {BoundaryTag.FOOT})


def test_basis_p1_barycenter():
    vals, _ = evaluate_basis(1, np.array([[1.0 / 3.0, 1.0 / 3.0]]))
    assert np.allclose(vals, 1.0 / 3.0)


def test_basis_lagrange_property():
    nodes = np.array(
        [[0, 0], [1, 0], [0, 1], [0.5, 0.5], [0.0, 0.5], [0.5, 0.0]], dtype=float
    )
    for degree, nb in ((1, 3), (2, 6)):
        vals, _ = evaluate_basis(degree, nodes[:nb])
        assert np.allclose(vals, np.eye(nb), atol=1e-14)


def test_basis_partition_of_unity():
    rng = np.random.default_rng(11)
    pts = rng.dirichlet((1, 1, 1), size=40)[:, :2]
    for degree in (1, 2):
        vals, grads = evaluate_basis(degree, pts)
        assert np.max(np.abs(vals.sum(axis=1) - 1.0)) < 1e-14
        assert np.max(np.abs(grads.sum(axis=1))) < 1e-13


def test_linear_reproduction_at_quadrature_points():
    m = unit_square_mesh(3, 1.0)
    for degree in (1, 2):
        s = build_space(m, degree, 1)
        coeffs = interpolate(s, lambda xy: 2.0 * xy[:, 0] - 0.5 * xy[:, 1] + 0.25)
        vals, _ = evaluate_basis(degree, TRI_POINTS)
        p = m.vertices[m.triangles]
        jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)
        xq = p[:, 0][:, None, :] + np.einsum("tab,qb->tqa", jac, TRI_POINTS)
        interp = np.einsum("qi,ti->tq", vals, coeffs[s.dof_map])
        exact = 2.0 * xq[..., 0] - 0.5 * xq[..., 1] + 0.25
        assert np.max(np.abs(interp - exact)) < 1e-12


def test_vector_interpolation_interleaving(one_cell_mesh):
    s = build_space(one_cell_mesh, 1, 2)
    u = interpolate(s, lambda xy: np.column_stack([xy[:, 0], -xy[:, 1]]))
    assert np.allclose(u[0::2], s.node_coords[:, 0])
    assert np.allclose(u[1::2], -s.node_coords[:, 1])
