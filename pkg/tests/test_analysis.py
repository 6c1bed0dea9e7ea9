import math

import numpy as np
import pytest
import scipy.sparse.linalg as spla

from porosplit.analysis import (
    energy,
    energy_gradient,
    error_norm,
    gamma,
    korn_constants,
    rlinear_subsequence,
    stability_check,
)
from porosplit.model import advance, build_benchmark, initial_state
from porosplit.splitters import SplitConfig


@pytest.fixture(scope="module")
def swelling():
    return build_benchmark("swelling")


def loaded_step(problem, n=2):
    st = initial_state(problem)
    cfg = SplitConfig(scheme="monolithic", inner_solver="direct")
    for _ in range(n):
        st, _ = advance(problem, st, cfg)
    t = problem.case.t_start + st.n * problem.params.dt
    return st, problem.prepare_step(st, t)


def random_free(problem, rng, scale_u=1.0, scale_v=1.0):
    du = rng.standard_normal(problem.n_u) * scale_u
    dv = rng.standard_normal(problem.n_v) * scale_v
    du[problem.dofs_u.indices] = 0.0
    dv[problem.dofs_v.indices] = 0.0
    return du, dv


def test_energy_zero_at_rest(swelling):
    p = swelling
    st = initial_state(p)
    step = p.prepare_step(st, 0.0)
    assert energy(p, step, np.zeros(p.n_u), np.zeros(p.n_v)) == 0.0


def test_energy_gradient_matches_finite_differences(swelling):
    p = swelling
    _, step = loaded_step(p)
    rng = np.random.default_rng(1)
    u, v = random_free(p, rng, 1e-4, 1e-3)
    gu, gv = energy_gradient(p, step, u, v)
    du, dv = random_free(p, rng, 1e-10, 1e-9)
    fd = (energy(p, step, u + du, v + dv) - energy(p, step, u - du, v - dv)) / 2.0
    an = gu @ du + gv @ dv
    assert abs(fd - an) <= 1e-6 * abs(an)


def test_energy_minimizer(swelling):
    p = swelling
    _, step = loaded_step(p)
    xd = spla.splu(p.A_mono.tocsc()).solve(step.b_mono)
    us, vs, _ = p.split_fields(xd)
    e_star = energy(p, step, us, vs)
    rng = np.random.default_rng(2)
    for _ in range(100):
        du, dv = random_free(p, rng, 1e-6, 1e-5)
        assert energy(p, step, us + du, vs + dv) >= e_star - 1e-12 * abs(e_star)


def test_error_norm_examples(swelling):
    p = swelling
    assert error_norm(p, np.zeros(p.n_u), np.zeros(p.n_v)) == 0.0
    rng = np.random.default_rng(3)
    du, dv = random_free(p, rng)
    n1 = error_norm(p, du, dv)
    n2 = error_norm(p, 2.0 * du, 2.0 * dv)
    assert n2**2 == pytest.approx(4.0 * n1**2, rel=1e-12)


def test_norm_identity_vs_energy(swelling):
    p = swelling
    _, step = loaded_step(p)
    xd = spla.splu(p.A_mono.tocsc()).solve(step.b_mono)
    us, vs, _ = p.split_fields(xd)
    rng = np.random.default_rng(4)
    du, dv = random_free(p, rng)
    lhs = error_norm(p, du, dv) ** 2
    rhs = 2.0 * (energy(p, step, us + du, vs + dv) - energy(p, step, us, vs))
    assert rhs == pytest.approx(lhs, rel=1e-9)


def test_strong_convexity_identity(swelling):
    """J(x+d) - J(x) - <DJ(x), d> equals half the squared increment norm."""
    p = swelling
    _, step = loaded_step(p)
    rng = np.random.default_rng(5)
    u, v = random_free(p, rng, 1e-4, 1e-3)
    du, dv = random_free(p, rng, 1e-4, 1e-3)
    gu, gv = energy_gradient(p, step, u, v)
    lhs = (
        energy(p, step, u + du, v + dv) - energy(p, step, u, v)
        - (gu @ du + gv @ dv)
    )
    assert lhs == pytest.approx(0.5 * error_norm(p, du, dv) ** 2, rel=1e-9)


def test_korn_constant_phi_grad_zero(swelling):
    c1, c2 = korn_constants(swelling)
    assert c1 == 0.0
    assert c2 > 0.0


def test_korn2_dense_oracle():
    import scipy.linalg

    p = build_benchmark("swelling", {"n_per_side": 2})
    _, c2 = korn_constants(p, tol=1e-10)
    from porosplit import assembly as asm

    a2 = asm.zero_row_col(p.raw_blocks.D_s, p.dofs_u)
    dense = scipy.linalg.eigh(
        a2.toarray(), p.blocks.K_s.toarray(), eigvals_only=True
    )
    assert c2 == pytest.approx(dense.max(), rel=1e-6)


def test_korn_scaling_with_stiffness():
    p1 = build_benchmark("swelling", {"n_per_side": 2})
    p2 = build_benchmark(
        "swelling", {"n_per_side": 2, "lambda_s": 2 * 711.0, "mu_s": 2 * 4066.0}
    )
    _, c2a = korn_constants(p1)
    _, c2b = korn_constants(p2)
    assert c2b == pytest.approx(0.5 * c2a, rel=1e-6)


def test_gamma_vanishing_limits():
    p = build_benchmark(
        "swelling", {"n_per_side": 2, "kappa_s": 1e-12, "kappa_f": 1e12}
    )
    g = gamma(p)
    assert g.gamma < 1e-10


def test_gamma_matches_grid_search(swelling):
    g = gamma(swelling)
    pr = swelling.params
    xq = swelling.quad_points
    phi = pr.phi0(xq)
    om = 1.0 - phi
    n_mod = pr.kappa_s * float(np.max(1.0 / om**2))
    kinv = float(np.max(om**2)) / (pr.lambda_s + pr.mu_s)
    p2 = float(np.max(phi**2 / pr.kappa_f / (pr.rho_s * om)))
    dt = pr.dt
    c1, c2 = g.c_korn1, g.c_korn2

    zetas = np.logspace(-6, 6, 200)
    etas = np.linspace(0, 1, 200)
    thetas = np.linspace(0, 1, 200)[:, None]
    best = np.inf
    for z in zetas:
        g1 = 0.0 * etas[None, :] + thetas * dt * p2  # C_Korn,1 = 0 here
        g2 = (
            (1 + z) * n_mod * kinv
            + (1 + 1 / z) * (1 - etas[None, :]) * n_mod * c1
            + (1 - thetas) * c2 / dt
        )
        best = min(best, float(np.min(np.maximum(g1, g2))))
    assert g.gamma == pytest.approx(best, rel=1e-2)


def test_gamma_monotone_in_bulk():
    g_low = gamma(build_benchmark("swelling", {"kappa_s": 1e2, "n_per_side": 4}))
    g_high = gamma(build_benchmark("swelling", {"kappa_s": 1e4, "n_per_side": 4}))
    assert g_high.gamma > g_low.gamma


def test_gamma_deterministic(swelling):
    g1 = gamma(swelling)
    g2 = gamma(swelling)
    assert g1.gamma == g2.gamma and g1.zeta == g2.zeta


def test_gamma_heterogeneous_porosity_grid_search():
    p = build_benchmark("swelling", {"porosity_ell": 2, "n_per_side": 4})
    g = gamma(p)
    assert g.c_korn1 > 0.0
    pr = p.params
    xq = p.quad_points
    phi = pr.phi0(xq)
    om = 1.0 - phi
    n_mod = pr.kappa_s * float(np.max(1.0 / om**2))
    kinv = float(np.max(om**2)) / (pr.lambda_s + pr.mu_s)
    gp = pr.phi0.gradient(xq)
    p1 = float(np.max(np.sum(gp**2, axis=-1) / (pr.rho_s * om)))
    p2 = float(np.max(phi**2 / pr.kappa_f / (pr.rho_s * om)))
    dt = pr.dt
    c1, c2 = g.c_korn1, g.c_korn2
    best = np.inf
    etas = np.linspace(0, 1, 200)[None, :]
    thetas = np.linspace(0, 1, 200)[:, None]
    for z in np.logspace(-6, 6, 200):
        g1 = (1 + 1 / z) * etas * n_mod * dt * dt * p1 + thetas * dt * p2
        g2 = (
            (1 + z) * n_mod * kinv
            + (1 + 1 / z) * (1 - etas) * n_mod * c1
            + (1 - thetas) * c2 / dt
        )
        best = min(best, float(np.min(np.maximum(g1, g2))))
    assert g.gamma == pytest.approx(best, rel=1e-2)


def test_stability_check_converged_run(swelling):
    p = swelling
    st = initial_state(p)
    cfg = SplitConfig(scheme="l2s", beta_bar_s=0.0, record_iterates=True)
    st, _ = advance(p, st, cfg)
    st, rep = advance(p, st, cfg)
    led = stability_check(p, cfg, rep.iterates)
    assert led.ok
    assert np.all(led.margins >= -1e-9 * max(led.rhs_at.max(), 1e-300))
    assert led.stability_constant > 0.0


def test_stability_check_trivial_tail(swelling):
    p = swelling
    cfg = SplitConfig(scheme="l2s")
    zero = np.zeros(p.n_u + p.n_v + p.n_p)
    led = stability_check(p, cfg, [zero, zero, zero])
    assert led.ok


def test_stability_check_rejects_bad_tuning(swelling):
    cfg = SplitConfig(scheme="l2s")
    with pytest.raises(ValueError):
        stability_check(swelling, cfg, [np.zeros(3)] * 3, delta2=2.5)


def test_rlinear_geometric():
    rho = 0.5
    xs = rho ** np.arange(40)
    c = (1 - rho) / rho
    idx, rate = rlinear_subsequence(xs, c)
    assert rate is not None
    assert rate >= rho
    assert rate < 1.0
    # certified envelope actually bounds the subsequence
    for pos, k in enumerate(idx):
        assert xs[k] <= rate**k * xs[0] * (1.0 + 1e-12)


def test_rlinear_zero_tail():
    xs = np.array([1.0, 0.0, 0.0, 0.0])
    idx, rate = rlinear_subsequence(xs, 5.0)
    assert rate is not None and 1 in idx


def test_rlinear_no_certificate():
    xs = np.ones(5)
    idx, rate = rlinear_subsequence(xs, 1e-9)
    assert rate is None
