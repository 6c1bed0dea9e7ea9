"""Shared fixtures and independent oracles for the test suite."""

from __future__ import annotations

import math

import numpy as np
import pytest

from porosplit.mesh import Mesh, unit_square_mesh


@pytest.fixture
def one_cell_mesh():
    return unit_square_mesh(1, 1.0)


@pytest.fixture
def unit_right_triangle():
    """A single positively oriented unit right triangle."""
    return Mesh(
        vertices=np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
        triangles=np.array([[0, 1, 2]]),
        facets=np.array([[0, 1], [1, 2], [2, 0]]),
        facet_tags=np.array([2, 1, 0]),
        side_length=1.0,
    )


def monomial_integral(tri: np.ndarray, a: int, b: int) -> float:
    """Exact integral of x^a y^b over a triangle.

    Maps to barycentric coordinates and uses the closed form
    int lam0^i lam1^j lam2^k dA = 2A i! j! k! / (i+j+k+2)! after a
    multinomial expansion of the affine coordinate functions.
    """
    p0, p1, p2 = tri
    area = 0.5 * abs(
        (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0])
    )

    # x = sum_i lam_i * x_i, y = sum_i lam_i * y_i; expand the products
    from itertools import product

    total = 0.0
    xs = (p0[0], p1[0], p2[0])
    ys = (p0[1], p1[1], p2[1])
    for ix in product(range(3), repeat=a):
        for iy in product(range(3), repeat=b):
            powers = [0, 0, 0]
            coef = 1.0
            for i in ix:
                powers[i] += 1
                coef *= xs[i]
            for j in iy:
                powers[j] += 1
                coef *= ys[j]
            i, j, k = powers
            total += coef * (
                2.0 * area * math.factorial(i) * math.factorial(j)
                * math.factorial(k) / math.factorial(i + j + k + 2)
            )
    return total


def refined_quadrature(tri: np.ndarray, fn, levels: int = 4) -> float:
    """Reference integral of fn(x, y) by uniform subdivision quadrature."""
    from porosplit.quadrature import TRI_POINTS, TRI_WEIGHTS

    tris = [np.asarray(tri, dtype=float)]
    for _ in range(levels):
        nxt = []
        for t in tris:
            m01 = 0.5 * (t[0] + t[1])
            m12 = 0.5 * (t[1] + t[2])
            m20 = 0.5 * (t[2] + t[0])
            nxt += [
                np.array([t[0], m01, m20]),
                np.array([m01, t[1], m12]),
                np.array([m20, m12, t[2]]),
                np.array([m01, m12, m20]),
            ]
        tris = nxt
    total = 0.0
    for t in tris:
        jac = np.column_stack([t[1] - t[0], t[2] - t[0]])
        det = abs(np.linalg.det(jac))
        pts = t[0][None, :] + TRI_POINTS @ jac.T
        total += det * float(np.sum(TRI_WEIGHTS * fn(pts[:, 0], pts[:, 1])))
    return total


def edge_counts(mesh: Mesh) -> dict:
    """Brute-force edge multiplicity over all triangles."""
    counts: dict = {}
    for tri in mesh.triangles:
        a, b, c = (int(v) for v in tri)
        for e in ((a, b), (b, c), (c, a)):
            key = tuple(sorted(e))
            counts[key] = counts.get(key, 0) + 1
    return counts
