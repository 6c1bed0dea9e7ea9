"""Energy, error norm, contraction constant and relative-stability checks.

The time-step energy is the strongly convex quadratic that the
alternating-minimization split minimizes blockwise.  At the discrete level
the squared volumetric term is the dual norm of the mass-equation moments
(weighted by the inverse pressure mass matrix), which makes the energy
decrease and the contraction estimate exact properties of the implemented
iteration rather than only of its continuous limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import assembly as asm
from .model import Problem, StepData
from .sparse import generalized_symmetric_eig_max


def _drag_quadratic(problem: Problem, du: np.ndarray, dv: np.ndarray) -> float:
    """<phi0^2 k_f^-1 (dv - du/dt), (dv - du/dt)> via the drag blocks."""
    b = problem.blocks
    dt = problem.params.dt
    return float(
        dv @ (b.D_f @ dv)
        - 2.0 / dt * (dv @ (problem.D_fs @ du))
        + du @ (b.D_s @ du) / dt**2
    )


def energy(problem: Problem, step: StepData, u: np.ndarray, v: np.ndarray) -> float:
    """Value of the convex time-step energy at the iterate (u, v)."""
    b = problem.blocks
    dt = problem.params.dt
    m = step.b_p - problem.B_vT @ v - problem.B_uT @ u / dt
    val = (
        0.5 * (u @ (b.M_s @ u)) / dt**2
        + 0.5 * (u @ (b.K_s @ u))
        + 0.5 * (v @ (b.M_f @ v))
        + 0.5 * dt * (v @ (b.K_f @ v))
        + 0.5 * dt**2 * (m @ problem.mp_solve(m))
        + 0.5 * dt * _drag_quadratic(problem, u, v)
        - u @ step.b_s
        - dt * (v @ step.b_f)
    )
    return float(val)


def energy_gradient(
    problem: Problem, step: StepData, u: np.ndarray, v: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Partial derivatives of the energy (the two-field residuals)."""
    b = problem.blocks
    dt = problem.params.dt
    m = step.b_p - problem.B_vT @ v - problem.B_uT @ u / dt
    p = dt * problem.mp_solve(m)
    g_u = (
        b.M_s @ u / dt**2 + b.K_s @ u - b.B_u @ p
        + b.D_s @ u / dt - b.D_sf @ v - step.b_s
    )
    g_v = dt * (
        b.M_f @ v / dt + b.K_f @ v - b.B_v @ p
        + b.D_f @ v - problem.D_fs @ u / dt - step.b_f
    )
    return g_u, g_v


def error_norm(problem: Problem, du: np.ndarray, dv: np.ndarray) -> float:
    """Hessian norm of the time-step energy on an increment (du, dv)."""
    b = problem.blocks
    dt = problem.params.dt
    m = -problem.B_vT @ dv - problem.B_uT @ du / dt
    sq = (
        (du @ (b.M_s @ du)) / dt**2
        + du @ (b.K_s @ du)
        + dv @ (b.M_f @ dv)
        + dt * (dv @ (b.K_f @ dv))
        + dt**2 * (m @ problem.mp_solve(m))
        + dt * _drag_quadratic(problem, du, dv)
    )
    return math.sqrt(max(sq, 0.0))


def korn_constants(problem: Problem, tol: float = 1e-8) -> tuple[float, float]:
    """Discrete generalized Korn constants on the constrained solid space.

    C1 bounds the grad-porosity weighted mass, C2 the drag-weighted mass,
    both against the elastic energy.
    """
    pr = problem.params
    stiff = problem.blocks.K_s
    grad_phi = lambda xy: pr.phi0.gradient(xy)
    a1 = asm.zero_row_col(
        asm.assemble_rank1_vector_mass(problem.space_u, grad_phi), problem.dofs_u
    )
    a2 = asm.zero_row_col(problem.raw_blocks.D_s, problem.dofs_u)
    c1, _ = generalized_symmetric_eig_max(a1, stiff, tol=tol)
    c2, _ = generalized_symmetric_eig_max(a2, stiff, tol=tol)
    return float(c1), float(c2)


@dataclass
class GammaBreakdown:
    gamma: float
    zeta: float
    eta: float
    theta: float
    gamma1: float
    gamma2: float
    c_korn1: float
    c_korn2: float
    k_dr_phi0_min: float
    kappa_m: float
    n_modulus: float


def _inner_min(base2, a1, b1, a2, b2):
    """min over (eta, theta) in [0,1]^2 of max(a1*eta + b1*theta, gamma2).

    gamma2 = base2 + a2*(1-eta) + b2*(1-theta).  Both surfaces are linear,
    one increasing and one decreasing, so the minimum is attained at a box
    corner or where the surfaces balance along a box edge.
    """
    def g1(e, t):
        return a1 * e + b1 * t

    def g2(e, t):
        return base2 + a2 * (1.0 - e) + b2 * (1.0 - t)

    candidates = [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]
    # crossings g1 = g2 along each box edge
    for e in (0.0, 1.0):
        denom = b1 + b2
        if denom > 0.0:
            t = (base2 + a2 * (1.0 - e) + b2 - a1 * e) / denom
            if 0.0 <= t <= 1.0:
                candidates.append((e, t))
    for t in (0.0, 1.0):
        denom = a1 + a2
        if denom > 0.0:
            e = (base2 + b2 * (1.0 - t) + a2 - b1 * t) / denom
            if 0.0 <= e <= 1.0:
                candidates.append((e, t))

    best = None
    for e, t in candidates:
        val = max(g1(e, t), g2(e, t))
        if best is None or val < best[0]:
            best = (val, e, t)
    return best


def gamma(problem: Problem, korn: tuple[float, float] | None = None) -> GammaBreakdown:
    """Contraction constant of the alternating-minimization split.

    Minimizes max(gamma_1, gamma_2) over the balancing parameters
    (zeta, eta, theta) by a coarse scan plus golden-section refinement in
    log(zeta) with a closed-form inner minimization.
    """
    pr = problem.params
    xq = problem.quad_points
    phi = pr.phi0(xq)
    one_m = 1.0 - phi
    n_modulus = pr.kappa_s * float(np.max(1.0 / one_m**2))
    k_dr_phi0_min = (pr.lambda_s + pr.mu_s) / float(np.max(one_m**2))
    grad_phi = pr.phi0.gradient(xq)
    p1 = float(np.max(np.sum(grad_phi**2, axis=-1) / (pr.rho_s * one_m)))
    p2 = float(np.max(phi**2 / pr.kappa_f / (pr.rho_s * one_m)))
    c1, c2 = korn if korn is not None else korn_constants(problem)
    dt = pr.dt

    def value(log_zeta):
        z = 10.0**log_zeta
        a1 = (1.0 + 1.0 / z) * n_modulus * dt**2 * p1
        b1 = dt * p2
        base2 = (1.0 + z) * n_modulus / k_dr_phi0_min
        a2 = (1.0 + 1.0 / z) * n_modulus * c1
        b2 = c2 / dt
        return _inner_min(base2, a1, b1, a2, b2)

    grid = np.linspace(-6.0, 6.0, 49)
    vals = [value(s)[0] for s in grid]
    i = int(np.argmin(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, bb = lo, hi
    x1 = bb - invphi * (bb - a)
    x2 = a + invphi * (bb - a)
    f1, f2 = value(x1)[0], value(x2)[0]
    for _ in range(80):
        if f1 <= f2:
            bb, x2, f2 = x2, x1, f1
            x1 = bb - invphi * (bb - a)
            f1 = value(x1)[0]
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (bb - a)
            f2 = value(x2)[0]
    s_best = x1 if f1 <= f2 else x2
    g_best, eta, theta = value(s_best)
    z = 10.0**s_best

    a1 = (1.0 + 1.0 / z) * n_modulus * dt**2 * p1
    b1 = dt * p2
    g1 = a1 * eta + b1 * theta
    g2 = (
        (1.0 + z) * n_modulus / k_dr_phi0_min
        + (1.0 + 1.0 / z) * n_modulus * c1 * (1.0 - eta)
        + c2 / dt * (1.0 - theta)
    )
    return GammaBreakdown(
        gamma=float(g_best),
        zeta=float(z),
        eta=float(eta),
        theta=float(theta),
        gamma1=float(g1),
        gamma2=float(g2),
        c_korn1=c1,
        c_korn2=c2,
        k_dr_phi0_min=float(k_dr_phi0_min),
        kappa_m=pr.kappa_f,
        n_modulus=float(n_modulus),
    )


@dataclass
class StabilityLedger:
    """Per-iteration increment norms and the relative-stability bookkeeping."""

    lhs_terms: np.ndarray            # (M,) summands of the left side, k = 1..M
    rhs_at: np.ndarray               # (M,) right side evaluated at anchor m = 1..M
    margins: np.ndarray              # (M-1,) RHS(m) - sum_{k>m} LHS(k)
    delta1: float
    delta2: float
    stability_constant: float        # c with c * tail(m) <= x_m for all anchors
    ok: bool


def stability_check(
    problem: Problem,
    config,
    iterates: list[np.ndarray],
    delta1: float = 1.0,
    delta2: float = 1.0,
    rel_slack: float = 1e-9,
) -> StabilityLedger:
    """Verify the truncated relative-stability inequality of an L2S run.

    iterates must contain the warm start followed by every outer iterate of
    a single time step.  For every anchor m the partial left-side sum over
    k = m+1..M is compared against the right side at m.
    """
    if delta1 <= 0.0 or not (0.0 < delta2 < 2.0):
        raise ValueError("need delta1 > 0 and delta2 in (0, 2)")
    b = problem.blocks
    pr = problem.params
    dt = pr.dt
    c1, c2 = korn_constants(problem)
    xq = problem.quad_points
    one_m2_max = float(np.max((1.0 - pr.phi0(xq)) ** 2))
    k_dr_phi0_min = (pr.lambda_s + pr.mu_s) / one_m2_max
    cross = (math.sqrt(c1) + 1.0 / math.sqrt(k_dr_phi0_min)) ** 2

    beta_p_coef = config.beta_bar_p / (dt * pr.k_dr)
    beta_s_hat_coef = (config.beta_bar_s + 0.5) / dt     # weight of the drag mass
    beta_f_coef = config.beta_bar_f

    incs = [iterates[k] - iterates[k - 1] for k in range(1, len(iterates))]
    lhs = np.empty(len(incs))
    rhs = np.empty(len(incs))
    for k, dx in enumerate(incs):
        du, dv, dp = problem.split_fields(dx)
        lhs[k] = (
            du @ (b.M_s @ du) / dt**2
            + (1.0 - delta2 / 2.0) * (du @ (b.K_s @ du))
            + dv @ (b.M_f @ dv)
            + dt * (dv @ (b.K_f @ dv))
            + dp @ (b.M_p @ dp)
        )
        rhs[k] = (
            0.5 * beta_s_hat_coef * (du @ (b.D_s @ du))
            + 0.5 * (delta1 + delta2) * (du @ (b.K_s @ du))
            + 0.5 * dt * beta_f_coef * (dv @ (b.D_f @ dv))
            + 0.5 * dt * beta_p_coef * (dp @ (problem.M_betap @ dp))
            + 0.5 * dt * (cross / (delta1 * dt)) * (dp @ (problem.M_plain_p @ dp))
        )

    tails = np.concatenate([np.cumsum(lhs[::-1])[::-1][1:], [0.0]])
    margins = rhs[:-1] - tails[:-1]
    scale = max(float(np.max(lhs)), float(np.max(rhs)), 1e-300)
    ok = bool(np.all(margins >= -rel_slack * scale))

    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(lhs[:-1] > 0.0, tails[:-1] / lhs[:-1], 0.0)
    worst = float(np.max(ratios)) if ratios.size else 0.0
    c_stab = 1.0 / worst if worst > 0.0 else math.inf

    return StabilityLedger(
        lhs_terms=lhs,
        rhs_at=rhs,
        margins=margins,
        delta1=delta1,
        delta2=delta2,
        stability_constant=c_stab,
        ok=ok,
    )


def rlinear_subsequence(
    sequence: np.ndarray, c: float
) -> tuple[list[int], float | None]:
    """Certified r-linearly convergent subsequence from relative stability.

    For a positive sequence satisfying c * sum_{i>0} x_{k+i} <= x_k, picks
    the spacing m minimizing (1/(c m))^(1/m) and greedily extracts indices
    where the sequence drops below eps = 1/(c m) times the previous anchor.
    Returns (indices, certified rate); rate is None when no m in range gives
    eps < 1 ("no certificate").
    """
    xs = np.asarray(sequence, dtype=float)
    if c <= 0.0 or xs.size == 0:
        return [0] if xs.size else [], None
    m_max = max(len(xs), 1)
    best_m, best_rate = None, None
    for m in range(1, m_max + 1):
        if c * m <= 1.0:
            continue
        rate = (1.0 / (c * m)) ** (1.0 / m)
        if best_rate is None or rate < best_rate:
            best_m, best_rate = m, rate
    if best_m is None:
        return list(range(len(xs))), None

    eps = 1.0 / (c * best_m)
    idx = [0]
    anchor = xs[0]
    k = 0
    while k + 1 < len(xs):
        nxt = None
        for j in range(k + 1, len(xs)):
            if xs[j] <= eps * anchor:
                nxt = j
                break
        if nxt is None:
            break
        idx.append(nxt)
        anchor = xs[nxt]
        k = nxt
        if anchor == 0.0:
            break
    return idx, best_rate
