"""Sparse assembly of the bilinear forms and load vectors of the model.

All element loops are vectorized over triangles; coefficients are evaluated
pointwise at the quadrature nodes.  Assembled operators are scipy CSR
matrices in canonical form.  Duplicate (row, col) contributions are summed
in a fixed lexicographic order so symmetric forms assemble to exactly
symmetric matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .fe import DofSet, FeSpace, evaluate_basis
from .mesh import BoundaryTag, Mesh
from .quadrature import EDGE_POINTS, EDGE_WEIGHTS, TRI_POINTS, TRI_WEIGHTS


class Coefficient:
    """Scalar material field on the domain, with optional analytic gradient.

    Wraps either a constant or a callable (n, 2) -> (n,).  The gradient is
    required only by forms that expand a divergence by the product rule.
    """

    def __init__(self, value, grad: Callable | None = None):
        if callable(value):
            self._fn = value
            self.constant = None
        else:
            self._fn = None
            self.constant = float(value)
        self._grad = grad

    def __call__(self, xy: np.ndarray) -> np.ndarray:
        xy = np.asarray(xy, dtype=float)
        if self.constant is not None:
            return np.full(xy.shape[:-1], self.constant)
        return np.asarray(self._fn(xy), dtype=float)

    def gradient(self, xy: np.ndarray) -> np.ndarray:
        xy = np.asarray(xy, dtype=float)
        if self._grad is not None:
            return np.asarray(self._grad(xy), dtype=float)
        if self.constant is not None:
            return np.zeros(xy.shape[:-1] + (2,))
        raise ValueError("coefficient gradient required but not provided")

    def max_at(self, xy: np.ndarray) -> float:
        return float(np.max(self(xy)))

    def min_at(self, xy: np.ndarray) -> float:
        return float(np.min(self(xy)))


def as_coefficient(w) -> Coefficient:
    return w if isinstance(w, Coefficient) else Coefficient(w)


def _geometry(mesh: Mesh):
    """Affine maps of all triangles: Jacobians, inverse transposes, dets."""
    p = mesh.vertices[mesh.triangles]          # (T, 3, 2)
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)  # (T, 2, 2)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    inv_t = np.empty_like(jac)
    inv_t[:, 0, 0] = jac[:, 1, 1]
    inv_t[:, 0, 1] = -jac[:, 1, 0]
    inv_t[:, 1, 0] = -jac[:, 0, 1]
    inv_t[:, 1, 1] = jac[:, 0, 0]
    inv_t /= det[:, None, None]
    return p[:, 0], jac, inv_t, det


def _quad_data(space: FeSpace):
    """Basis values/physical gradients and physical quadrature points."""
    p0, jac, inv_t, det = _geometry(space.mesh)
    val, gref = evaluate_basis(space.degree, TRI_POINTS)          # (q, n), (q, n, 2)
    gphys = np.einsum("tab,qnb->tqna", inv_t, gref)               # (T, q, n, 2)
    xq = p0[:, None, :] + np.einsum("tab,qb->tqa", jac, TRI_POINTS)
    wq = TRI_WEIGHTS[None, :] * det[:, None]                      # (T, q)
    return val, gphys, xq, wq


def _scatter(space_row: FeSpace, space_col: FeSpace, local: np.ndarray) -> sp.csr_matrix:
    """Sum local element matrices into a global CSR matrix.

    Entries are ordered deterministically before summation so that the
    assembly of a symmetric form is exactly symmetric.
    """
    rmap, cmap = space_row.dof_map, space_col.dof_map
    nt, nr = rmap.shape
    nc = cmap.shape[1]
    rows = np.repeat(rmap, nc, axis=1).ravel()
    cols = np.tile(cmap, (1, nr)).ravel()
    vals = local.reshape(nt, nr * nc).ravel()

    order = np.lexsort((np.tile(np.arange(nt)[:, None], (1, nr * nc)).ravel(), cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    boundary = np.flatnonzero(
        np.concatenate(([True], (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])))
    )
    summed = np.add.reduceat(vals, boundary)
    mat = sp.csr_matrix(
        (summed, (rows[boundary], cols[boundary])),
        shape=(space_row.n_dofs, space_col.n_dofs),
    )
    mat.sort_indices()
    return mat


def _symmetrize(local: np.ndarray) -> np.ndarray:
    """Make element matrices bitwise symmetric (einsum rounding is not)."""
    return 0.5 * (local + np.transpose(local, (0, 2, 1)))


def _interleave_pairs(local: np.ndarray) -> np.ndarray:
    """(T, i, j, c, d) component-blocked local matrices -> (T, 2i+c, 2j+d)."""
    nt, ni, nj = local.shape[0], local.shape[1], local.shape[2]
    return np.ascontiguousarray(np.transpose(local, (0, 1, 3, 2, 4))).reshape(
        nt, 2 * ni, 2 * nj
    )


def assemble_weighted_mass(space: FeSpace, weight) -> sp.csr_matrix:
    """Mass matrix with a scalar weight: (i, j) -> integral of w phi_i . phi_j."""
    w = as_coefficient(weight)
    val, _, xq, wq = _quad_data(space)
    cw = wq * w(xq)
    scalar = _symmetrize(np.einsum("tq,qi,qj->tij", cw, val, val))
    if space.n_components == 1:
        return _scatter(space, space, scalar)
    nt, nl = scalar.shape[0], scalar.shape[1]
    local = np.zeros((nt, nl, nl, 2, 2))
    local[:, :, :, 0, 0] = scalar
    local[:, :, :, 1, 1] = scalar
    return _scatter(space, space, _interleave_pairs(local))


def assemble_weighted_mass_cross(
    space_row: FeSpace, space_col: FeSpace, weight
) -> sp.csr_matrix:
    """Rectangular weighted mass between two vector spaces on the same mesh."""
    if space_row.mesh is not space_col.mesh:
        raise ValueError("spaces must share a mesh")
    w = as_coefficient(weight)
    val_r, _, xq, wq = _quad_data(space_row)
    val_c, _ = evaluate_basis(space_col.degree, TRI_POINTS)
    cw = wq * w(xq)
    scalar = np.einsum("tq,qi,qj->tij", cw, val_r, val_c)
    nt, ni, nj = scalar.shape
    local = np.zeros((nt, ni, nj, 2, 2))
    local[:, :, :, 0, 0] = scalar
    local[:, :, :, 1, 1] = scalar
    return _scatter(space_row, space_col, _interleave_pairs(local))


def assemble_elastic_stiffness(space: FeSpace, lam: float, mu: float) -> sp.csr_matrix:
    """Linear elasticity stiffness for stress lam*tr(eps)*I + 2*mu*eps."""
    if mu <= 0.0 or lam < 0.0:
        raise ValueError("need mu > 0 and lam >= 0")
    _, g, _, wq = _quad_data(space)
    gg = np.einsum("tq,tqia,tqja->tij", wq, g, g)
    cross = np.einsum("tq,tqic,tqjd->tijcd", wq, g, g)
    local = lam * cross + mu * np.transpose(cross, (0, 1, 2, 4, 3))
    local[:, :, :, 0, 0] += mu * gg
    local[:, :, :, 1, 1] += mu * gg
    return _scatter(space, space, _symmetrize(_interleave_pairs(local)))


def assemble_weighted_symgrad(space: FeSpace, weight) -> sp.csr_matrix:
    """Weighted symmetric-gradient stiffness: integral of w eps(u):eps(u*)."""
    w = as_coefficient(weight)
    _, g, xq, wq = _quad_data(space)
    cw = wq * w(xq)
    gg = np.einsum("tq,tqia,tqja->tij", cw, g, g)
    cross = np.einsum("tq,tqic,tqjd->tijcd", cw, g, g)
    local = 0.5 * np.transpose(cross, (0, 1, 2, 4, 3))
    local[:, :, :, 0, 0] += 0.5 * gg
    local[:, :, :, 1, 1] += 0.5 * gg
    return _scatter(space, space, _symmetrize(_interleave_pairs(local)))


def _weighted_div(space: FeSpace, weight: Coefficient):
    """Per-basis divergence of w*phi at quadrature points, (T, q, 2n)."""
    val, g, xq, wq = _quad_data(space)
    wv = weight(xq)
    gw = weight.gradient(xq)
    div = wv[:, :, None, None] * g + gw[:, :, None, :] * val[None, :, :, None]
    nt, nq, nl = div.shape[0], div.shape[1], div.shape[2]
    # last two axes (node, comp) flatten to the interleaved local index 2i+c
    return div.reshape(nt, nq, nl * 2), xq, wq


def assemble_div_coupling(trial_p: FeSpace, test_vec: FeSpace, weight) -> sp.csr_matrix:
    """Pressure-to-vector coupling: (i, j) -> integral of psi_j div(w phi_i)."""
    if trial_p.n_components != 1 or test_vec.n_components != 2:
        raise ValueError("expected a scalar trial space and a vector test space")
    w = as_coefficient(weight)
    dvec, xq, wq = _weighted_div(test_vec, w)
    pval, _ = evaluate_basis(trial_p.degree, TRI_POINTS)
    local = np.einsum("tq,tqI,qj->tIj", wq, dvec, pval)
    return _scatter(test_vec, trial_p, local)


def assemble_divdiv(
    space_a: FeSpace, space_b: FeSpace, w_a, w_b, scale
) -> sp.csr_matrix:
    """Weighted div-div form: (i, j) -> integral of N div(w_a phi_i) div(w_b phi_j)."""
    sc = as_coefficient(scale)
    da, xq, wq = _weighted_div(space_a, as_coefficient(w_a))
    if space_b is space_a and (w_b is w_a or w_b == w_a):
        db = da
    else:
        db, _, _ = _weighted_div(space_b, as_coefficient(w_b))
    cw = wq * sc(xq)
    local = np.einsum("tq,tqI,tqJ->tIJ", cw, da, db)
    if db is da:
        local = _symmetrize(local)
    return _scatter(space_a, space_b, local)


def assemble_rank1_vector_mass(space: FeSpace, vec_field) -> sp.csr_matrix:
    """Rank-one weighted vector mass: integral of (g . phi_i)(g . phi_j)."""
    val, _, xq, wq = _quad_data(space)
    g = np.asarray(vec_field(xq), dtype=float)     # (T, q, 2)
    gs = np.einsum("tq,tqc,tqd->tqcd", wq, g, g)
    local = np.einsum("tqcd,qi,qj->tijcd", gs, val, val)
    return _scatter(space, space, _symmetrize(_interleave_pairs(local)))


def assemble_load(space: FeSpace, f) -> np.ndarray:
    """Volume load vector: entry i -> integral of f . phi_i."""
    val, _, xq, wq = _quad_data(space)
    fv = np.asarray(f(xq), dtype=float)
    out = np.zeros(space.n_dofs)
    if space.n_components == 1:
        contrib = np.einsum("tq,tq,qi->ti", wq, fv, val)
        np.add.at(out, space.dof_map, contrib)
    else:
        contrib = np.einsum("tq,tqc,qi->tic", wq, fv, val)
        nt, nl = contrib.shape[0], contrib.shape[1]
        np.add.at(out, space.dof_map, contrib.reshape(nt, nl * 2))
    return out


def assemble_neumann_load(
    space: FeSpace, tag: BoundaryTag, traction, weight=1.0
) -> np.ndarray:
    """Boundary traction load on tagged facets by 1D Gauss quadrature.

    traction is a constant 2-vector or a callable (n, 2) -> (n, 2); weight is
    an optional scalar coefficient multiplying the traction.
    """
    w = as_coefficient(weight)
    mesh = space.mesh
    out = np.zeros(space.n_dofs)
    facets = mesh.facets[mesh.facet_tags == int(tag)]
    if facets.size == 0:
        return out

    s = EDGE_POINTS
    if space.degree == 1:
        shape = np.stack([1.0 - s, s], axis=1)                # (q, 2)
    else:
        shape = np.stack(
            [(1.0 - s) * (1.0 - 2.0 * s), s * (2.0 * s - 1.0), 4.0 * s * (1.0 - s)],
            axis=1,
        )

    pa = mesh.vertices[facets[:, 0]]
    pb = mesh.vertices[facets[:, 1]]
    length = np.linalg.norm(pb - pa, axis=1)
    xq = pa[:, None, :] + s[None, :, None] * (pb - pa)[:, None, :]
    if callable(traction):
        tv = np.asarray(traction(xq), dtype=float)            # (F, q, 2)
    else:
        tv = np.broadcast_to(np.asarray(traction, dtype=float), xq.shape).copy()
    tv = tv * w(xq)[:, :, None]

    cw = EDGE_WEIGHTS[None, :] * length[:, None]              # (F, q)
    contrib = np.einsum("fq,fqc,qi->fic", cw, tv, shape)      # (F, nloc, 2)

    nv = mesh.n_vertices
    for k, (a, b) in enumerate(facets):
        nodes = [int(a), int(b)]
        if space.degree == 2:
            nodes.append(nv + space.edge_index[tuple(sorted((int(a), int(b))))])
        for i, node in enumerate(nodes):
            if space.n_components == 1:
                out[node] += contrib[k, i, 0]
            else:
                out[2 * node] += contrib[k, i, 0]
                out[2 * node + 1] += contrib[k, i, 1]
    return out


def zero_row_col(
    mat: sp.spmatrix,
    rows: np.ndarray | DofSet | None,
    cols: np.ndarray | DofSet | None = None,
    diag: float = 0.0,
) -> sp.csr_matrix:
    """Zero constrained rows/cols; optionally set a diagonal on zeroed rows."""
    def _idx(d):
        if d is None:
            return np.empty(0, dtype=np.int64)
        return d.indices if isinstance(d, DofSet) else np.asarray(d, dtype=np.int64)

    r = _idx(rows)
    c = _idx(cols) if cols is not None else r
    m, n = mat.shape
    rmask = np.ones(m)
    rmask[r] = 0.0
    cmask = np.ones(n)
    cmask[c] = 0.0
    out = sp.diags(rmask) @ mat.tocsr() @ sp.diags(cmask)
    if diag != 0.0:
        if m != n:
            raise ValueError("diagonal insertion requires a square matrix")
        dvec = np.zeros(m)
        dvec[r] = diag
        out = out + sp.diags(dvec)
    out = out.tocsr()
    out.sort_indices()
    return out


@dataclass
class BlockSystem:
    """Assembled operator blocks of the three-field time-step system.

    Mass and drag blocks carry their physical weights (solid mass weighted by
    rho_s(1-phi0), drag by phi0^2/k_f, pressure mass by (1-phi0)^2/kappa_s);
    B_u / B_v couple the pressure to div((1-phi0) u*) and div(phi0 v*); the
    S blocks are the N-weighted div-div forms used by the stabilized solid
    substep and the energy.
    """

    M_s: sp.csr_matrix
    K_s: sp.csr_matrix
    M_f: sp.csr_matrix
    K_f: sp.csr_matrix
    D_s: sp.csr_matrix
    D_f: sp.csr_matrix
    D_sf: sp.csr_matrix
    B_u: sp.csr_matrix
    B_v: sp.csr_matrix
    M_p: sp.csr_matrix
    S_uu: sp.csr_matrix
    S_uv: sp.csr_matrix
    S_vv: sp.csr_matrix
    f_s: np.ndarray
    f_f: np.ndarray
    f_p: np.ndarray


def apply_dirichlet(
    system: BlockSystem, dofs_u: DofSet, dofs_v: DofSet, dofs_p: DofSet
) -> BlockSystem:
    """Eliminate homogeneous Dirichlet dofs from every block.

    Constrained rows/columns are zeroed symmetrically with a unit diagonal on
    square blocks, and the corresponding load entries are zeroed; lifting of
    nonhomogeneous data is assumed to have happened in the load vectors.
    """
    u, v, p = dofs_u, dofs_v, dofs_p
    f_s = system.f_s.copy()
    f_f = system.f_f.copy()
    f_p = system.f_p.copy()
    f_s[u.indices] = 0.0
    f_f[v.indices] = 0.0
    f_p[p.indices] = 0.0
    return replace(
        system,
        M_s=zero_row_col(system.M_s, u, diag=1.0),
        K_s=zero_row_col(system.K_s, u, diag=1.0),
        M_f=zero_row_col(system.M_f, v, diag=1.0),
        K_f=zero_row_col(system.K_f, v, diag=1.0),
        D_s=zero_row_col(system.D_s, u, diag=1.0),
        D_f=zero_row_col(system.D_f, v, diag=1.0),
        D_sf=zero_row_col(system.D_sf, u, v),
        B_u=zero_row_col(system.B_u, u, p),
        B_v=zero_row_col(system.B_v, v, p),
        M_p=zero_row_col(system.M_p, p, diag=1.0),
        S_uu=zero_row_col(system.S_uu, u, u),
        S_uv=zero_row_col(system.S_uv, u, v),
        S_vv=zero_row_col(system.S_vv, v, v),
        f_s=f_s,
        f_f=f_f,
        f_p=f_p,
    )
