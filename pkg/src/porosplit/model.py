"""Problem setup: parameters, benchmark cases, block assembly, time stepping.

The governing system couples solid displacement u, fluid velocity v and
pressure p.  One implicit-Euler time step solves the three-field block
system; the history terms of the previous two steps enter the right-hand
sides.  All three benchmark cases (swelling, footing, perfusion) start from
rest, so the first step uses the same update with both displacement
histories equal to the initial displacement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import assembly as asm
from .assembly import BlockSystem, Coefficient, apply_dirichlet
from .fe import DofSet, FeSpace, build_space, dirichlet_dofs
from .mesh import BoundaryTag, Mesh, refine_near, tag_footing_boundary, unit_square_mesh

CASES = ("swelling", "footing", "perfusion")


@dataclass
class ModelParameters:
    """Material and discretization parameters (SI units)."""

    rho_s: float
    rho_f: float
    mu_f: float
    lambda_s: float
    mu_s: float
    kappa_s: float
    kappa_f: float          # scalar isotropic mobility, k_f = kappa_f * I
    phi0: Coefficient
    theta: float
    dt: float
    t_end: float

    @property
    def k_dr(self) -> float:
        """Drained bulk modulus lambda + 2 mu / d with d = 2."""
        return self.lambda_s + self.mu_s


@dataclass
class BenchmarkCase:
    name: str
    side_length: float
    n_per_side: int
    elements: tuple[int, int, int]   # degrees for (u, v, p)
    outer_tol: float
    outer_cap: int
    n_steps: int
    t_start: float                   # time of the first solve
    refine_levels: int = 0


@dataclass
class State:
    """Discrete history carried between time steps."""

    u_prev: np.ndarray
    u_prev2: np.ndarray
    v_prev: np.ndarray
    p_prev: np.ndarray
    t_now: float
    n: int


@dataclass
class StepData:
    """Right-hand sides of one time step (history terms folded in)."""

    t: float
    b_s: np.ndarray
    b_f: np.ndarray
    b_p: np.ndarray
    b_mono: np.ndarray
    x_warm: np.ndarray


def oscillatory_porosity(ell: int, side_length: float) -> Coefficient:
    """Porosity profile 0.1 + 0.5 sin^2(ell pi x / L) with analytic gradient."""
    if ell < 1:
        raise ValueError("ell must be a positive integer")
    w = ell * math.pi / side_length

    def value(xy):
        return 0.1 + 0.5 * np.sin(w * xy[..., 0]) ** 2

    def grad(xy):
        g = np.zeros(xy.shape)
        g[..., 0] = 0.5 * w * np.sin(2.0 * w * xy[..., 0])
        return g

    return Coefficient(value, grad)


def parse_elements(spec) -> tuple[int, int, int]:
    """Parse an element triple like 'P1/P2/P1' into degrees (1, 2, 1)."""
    if isinstance(spec, (tuple, list)):
        degs = tuple(int(d) for d in spec)
    else:
        parts = str(spec).strip().upper().split("/")
        if len(parts) != 3 or not all(p.startswith("P") for p in parts):
            raise ValueError(f"bad element triple {spec!r}; expected e.g. P1/P2/P1")
        degs = tuple(int(p[1:]) for p in parts)
    if len(degs) != 3 or not all(d in (1, 2) for d in degs):
        raise ValueError(f"bad element triple {spec!r}")
    return degs


def elements_label(elements: tuple[int, int, int]) -> str:
    return "/".join(f"P{d}" for d in elements)


_DEFAULTS = {
    "swelling": dict(
        rho_s=1000.0, rho_f=1000.0, mu_f=0.035,
        lambda_s=711.0, mu_s=4066.0, kappa_s=1e3, kappa_f=1e-7,
        phi0=0.1, theta=0.0, dt=0.1, t_end=1.0,
        side_length=1e-2, n_per_side=10, elements=(1, 2, 1),
        outer_tol=1e-8, outer_cap=200, n_steps=11, t_start=0.0,
        refine_levels=0,
    ),
    "footing": dict(
        rho_s=500.0, rho_f=1000.0, mu_f=1e-3,
        lambda_s=3e4 * 0.2 / (1.2 * 0.6), mu_s=3e4 / 2.4,
        kappa_s=1e6, kappa_f=1e-7,
        phi0=1e-3, theta=0.0, dt=0.01, t_end=1.0,
        side_length=64.0, n_per_side=10, elements=(1, 2, 1),
        outer_tol=1e-6, outer_cap=200, n_steps=100, t_start=0.01,
        refine_levels=2,
    ),
    "perfusion": dict(
        rho_s=1000.0, rho_f=1000.0, mu_f=0.03,
        lambda_s=5e4,
        mu_s=0.25 * (3e4 - 3 * 5e4 + math.sqrt(9e8 + 9 * 25e8 + 2 * 3e4 * 5e4)),
        kappa_s=1e6, kappa_f=1e-9,
        phi0=0.05, theta=500.0, dt=0.1, t_end=1.0,
        side_length=0.01, n_per_side=10, elements=(1, 2, 1),
        outer_tol=1e-8, outer_cap=200, n_steps=11, t_start=0.0,
        refine_levels=0,
    ),
}

_OVERRIDE_KEYS = {
    "rho_s", "rho_f", "mu_f", "lambda_s", "mu_s", "kappa_s", "kappa_f",
    "phi0", "porosity_ell", "theta", "dt", "t_end", "side_length",
    "n_per_side", "elements", "outer_tol", "outer_cap", "n_steps",
    "t_start", "refine_levels", "kdr_scale",
}


class Problem:
    """A benchmark case with assembled, Dirichlet-eliminated operators."""

    def __init__(self, params: ModelParameters, case: BenchmarkCase):
        self.params = params
        self.case = case
        self.mesh = self._build_mesh(case)
        du, dv, dp = case.elements
        self.space_u = build_space(self.mesh, du, 2)
        self.space_v = build_space(self.mesh, dv, 2)
        self.space_p = build_space(self.mesh, dp, 1)
        self.n_u = self.space_u.n_dofs
        self.n_v = self.space_v.n_dofs
        self.n_p = self.space_p.n_dofs

        self.quad_points = self._all_quad_points()
        self._validate_parameters()

        self.dofs_u, self.dofs_v, self.dofs_p = self._dirichlet_sets()
        self.raw_blocks = self._assemble_blocks()
        self.blocks = apply_dirichlet(
            self.raw_blocks, self.dofs_u, self.dofs_v, self.dofs_p
        )
        b = self.blocks
        self.D_fs = b.D_sf.T.tocsr()
        self.B_uT = b.B_u.T.tocsr()
        self.B_vT = b.B_v.T.tocsr()
        self.A_uu = (b.M_s / params.dt**2 + b.K_s + b.D_s / params.dt).tocsr()
        self.A_vv = (b.M_f / params.dt + b.K_f + b.D_f).tocsr()
        self.A_mono = sp.bmat(
            [
                [self.A_uu, -b.D_sf, -b.B_u],
                [-self.D_fs / params.dt, self.A_vv, -b.B_v],
                [self.B_uT / params.dt, self.B_vT, b.M_p / params.dt],
            ],
            format="csr",
        )
        # extra stabilization masses ((1-phi0)^2 and plain L2 on the pressure space)
        one_minus2 = Coefficient(lambda xy: (1.0 - params.phi0(xy)) ** 2)
        self.M_betap = asm.zero_row_col(
            asm.assemble_weighted_mass(self.space_p, one_minus2), self.dofs_p
        )
        self.M_plain_p = asm.zero_row_col(
            asm.assemble_weighted_mass(self.space_p, 1.0), self.dofs_p
        )
        self._load_s, self._load_f, self._load_p = self._build_loads()
        self._cache: dict = {}
        self._mp_solve = None

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def _build_mesh(case: BenchmarkCase) -> Mesh:
        mesh = unit_square_mesh(case.n_per_side, case.side_length)
        if case.name == "footing":
            mesh = tag_footing_boundary(mesh)
            if case.refine_levels:
                mesh = refine_near(mesh, BoundaryTag.FOOT, case.refine_levels)
                mesh = tag_footing_boundary(mesh)
        elif case.refine_levels:
            mesh = refine_near(mesh, BoundaryTag.TOP, case.refine_levels)
        return mesh

    def _all_quad_points(self) -> np.ndarray:
        from .quadrature import TRI_POINTS

        p0, jac, _, _ = asm._geometry(self.mesh)
        xq = p0[:, None, :] + np.einsum("tab,qb->tqa", jac, TRI_POINTS)
        return xq.reshape(-1, 2)

    def _validate_parameters(self) -> None:
        pr = self.params
        phi = pr.phi0(self.quad_points)
        if np.any(phi <= 0.0) or np.any(phi >= 1.0):
            raise ValueError("porosity must lie strictly inside (0, 1)")
        if pr.kappa_s <= 0.0 or not np.isfinite(pr.kappa_s):
            raise ValueError("kappa_s must be finite and positive")
        if pr.kappa_f <= 0.0:
            raise ValueError("kappa_f must be positive")
        if pr.dt <= 0.0:
            raise ValueError("dt must be positive")

    def _dirichlet_sets(self) -> tuple[DofSet, DofSet, DofSet]:
        name = self.case.name
        U, V, P = self.space_u, self.space_v, self.space_p
        empty_u = DofSet(np.empty(0, dtype=np.int64), (True, True))
        empty_p = DofSet(np.empty(0, dtype=np.int64), (True,))
        if name == "swelling":
            # sliding solid on bottom/left, no-slip fluid on top/bottom
            du = _merge(
                dirichlet_dofs(U, {BoundaryTag.BOTTOM}, (False, True)),
                dirichlet_dofs(U, {BoundaryTag.LEFT}, (True, False)),
            )
            dv = dirichlet_dofs(V, {BoundaryTag.TOP, BoundaryTag.BOTTOM})
            return du, dv, empty_p
        if name == "footing":
            du = dirichlet_dofs(U, {BoundaryTag.BOTTOM})
            dv = dirichlet_dofs(V, {BoundaryTag.FOOT})
            dp = dirichlet_dofs(
                P,
                {BoundaryTag.LEFT, BoundaryTag.RIGHT, BoundaryTag.BOTTOM,
                 BoundaryTag.REST},
            )
            return du, dv, dp
        if name == "perfusion":
            du = dirichlet_dofs(U, {BoundaryTag.LEFT})
            dv = dirichlet_dofs(V, {BoundaryTag.LEFT})
            return du, dv, empty_p
        raise ValueError(f"unknown case {name!r}")

    def _assemble_blocks(self) -> BlockSystem:
        pr = self.params
        U, V, P = self.space_u, self.space_v, self.space_p
        phi = pr.phi0
        one_minus = Coefficient(
            lambda xy: 1.0 - phi(xy), grad=lambda xy: -phi.gradient(xy)
        )
        phi_c = Coefficient(lambda xy: phi(xy), grad=lambda xy: phi.gradient(xy))
        drag = Coefficient(lambda xy: phi(xy) ** 2 / pr.kappa_f)
        n_field = Coefficient(lambda xy: pr.kappa_s / (1.0 - phi(xy)) ** 2)

        return BlockSystem(
            M_s=asm.assemble_weighted_mass(
                U, Coefficient(lambda xy: pr.rho_s * (1.0 - phi(xy)))
            ),
            K_s=asm.assemble_elastic_stiffness(U, pr.lambda_s, pr.mu_s),
            M_f=asm.assemble_weighted_mass(
                V, Coefficient(lambda xy: pr.rho_f * phi(xy))
            ),
            K_f=asm.assemble_weighted_symgrad(
                V, Coefficient(lambda xy: 2.0 * pr.mu_f * phi(xy))
            ),
            D_s=asm.assemble_weighted_mass(U, drag),
            D_f=asm.assemble_weighted_mass(V, drag),
            D_sf=asm.assemble_weighted_mass_cross(U, V, drag),
            B_u=asm.assemble_div_coupling(P, U, one_minus),
            B_v=asm.assemble_div_coupling(P, V, phi_c),
            M_p=asm.assemble_weighted_mass(
                P, Coefficient(lambda xy: (1.0 - phi(xy)) ** 2 / pr.kappa_s)
            ),
            S_uu=asm.assemble_divdiv(U, U, one_minus, one_minus, n_field),
            S_uv=asm.assemble_divdiv(U, V, one_minus, phi_c, n_field),
            S_vv=asm.assemble_divdiv(V, V, phi_c, phi_c, n_field),
            f_s=np.zeros(U.n_dofs),
            f_f=np.zeros(V.n_dofs),
            f_p=np.zeros(P.n_dofs),
        )

    def _build_loads(self):
        """Per-field load closures f(t) with Dirichlet entries zeroed."""
        name = self.case.name
        zero_u = np.zeros(self.n_u)
        zero_v = np.zeros(self.n_v)
        zero_p = np.zeros(self.n_p)

        if name == "swelling":
            base = asm.assemble_neumann_load(
                self.space_v, BoundaryTag.LEFT, np.array([1.0, 0.0])
            )
            base[self.dofs_v.indices] = 0.0

            def p_ext(t):
                return 1e3 * (1.0 - math.exp(4.0 * t * t))

            return (
                lambda t: zero_u,
                lambda t: p_ext(t) * base,
                lambda t: zero_p,
            )
        if name == "footing":
            base = asm.assemble_neumann_load(
                self.space_u, BoundaryTag.FOOT, np.array([0.0, -1e5])
            )
            base[self.dofs_u.indices] = 0.0
            return (
                lambda t: t * base,
                lambda t: zero_v,
                lambda t: zero_p,
            )
        if name == "perfusion":
            # volumetric mass source; the mass equation is scaled by 1/rho_f
            src = self.params.theta / self.params.rho_f
            base = asm.assemble_load(
                self.space_p, lambda xy: np.full(xy.shape[:-1], src)
            )
            base[self.dofs_p.indices] = 0.0
            return (
                lambda t: zero_u,
                lambda t: zero_v,
                lambda t: base,
            )
        raise ValueError(f"unknown case {name!r}")

    # -- per-step data ---------------------------------------------------------

    def loads(self, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self._load_s(t), self._load_f(t), self._load_p(t)

    def prepare_step(self, state: State, t: float) -> StepData:
        b = self.blocks
        dt = self.params.dt
        f_s, f_f, f_p = self.loads(t)
        b_s = f_s + b.M_s @ (2.0 * state.u_prev - state.u_prev2) / dt**2 \
            + b.D_s @ state.u_prev / dt
        b_f = f_f + b.M_f @ state.v_prev / dt - self.D_fs @ state.u_prev / dt
        b_p = f_p + b.M_p @ state.p_prev / dt + self.B_uT @ state.u_prev / dt
        x_warm = np.concatenate([state.u_prev, state.v_prev, state.p_prev])
        return StepData(
            t=t,
            b_s=b_s,
            b_f=b_f,
            b_p=b_p,
            b_mono=np.concatenate([b_s, b_f, b_p]),
            x_warm=x_warm,
        )

    def split_fields(self, x: np.ndarray):
        nu, nv = self.n_u, self.n_v
        return x[:nu], x[nu:nu + nv], x[nu + nv:]

    def mono_residual(self, step: StepData, x: np.ndarray) -> float:
        return float(np.max(np.abs(step.b_mono - self.A_mono @ x)))

    def mp_solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._mp_solve is None:
            self._mp_solve = spla.splu(self.blocks.M_p.tocsc()).solve
        return self._mp_solve(rhs)

    def operator(self, key, builder):
        """Cached assembled operator + preconditioner/factorization."""
        if key not in self._cache:
            self._cache[key] = builder()
        return self._cache[key]


def _merge(*dofsets: DofSet) -> DofSet:
    idx = np.unique(np.concatenate([d.indices for d in dofsets]))
    return DofSet(idx, dofsets[0].component_mask)


def build_benchmark(case: str, overrides: dict | None = None) -> Problem:
    """Build one of the benchmark problems with optional parameter overrides."""
    if case not in _DEFAULTS:
        raise ValueError(f"unknown benchmark case {case!r}; pick one of {CASES}")
    cfg = dict(_DEFAULTS[case])
    overrides = dict(overrides or {})
    unknown = set(overrides) - _OVERRIDE_KEYS
    if unknown:
        raise ValueError(f"unknown override keys: {sorted(unknown)}")

    if "kdr_scale" in overrides:
        s = float(overrides.pop("kdr_scale"))
        cfg["lambda_s"] = cfg["lambda_s"] * s
        cfg["mu_s"] = cfg["mu_s"] * s
    ell = overrides.pop("porosity_ell", None)
    cfg.update(overrides)
    if "elements" in overrides:
        cfg["elements"] = parse_elements(overrides["elements"])

    phi0 = cfg["phi0"]
    if ell is not None:
        phi0 = oscillatory_porosity(int(ell), float(cfg["side_length"]))
    phi0 = phi0 if isinstance(phi0, Coefficient) else Coefficient(float(phi0))

    params = ModelParameters(
        rho_s=float(cfg["rho_s"]), rho_f=float(cfg["rho_f"]),
        mu_f=float(cfg["mu_f"]), lambda_s=float(cfg["lambda_s"]),
        mu_s=float(cfg["mu_s"]), kappa_s=float(cfg["kappa_s"]),
        kappa_f=float(cfg["kappa_f"]), phi0=phi0,
        theta=float(cfg["theta"]), dt=float(cfg["dt"]),
        t_end=float(cfg["t_end"]),
    )
    bench = BenchmarkCase(
        name=case,
        side_length=float(cfg["side_length"]),
        n_per_side=int(cfg["n_per_side"]),
        elements=parse_elements(cfg["elements"]),
        outer_tol=float(cfg["outer_tol"]),
        outer_cap=int(cfg["outer_cap"]),
        n_steps=int(cfg["n_steps"]),
        t_start=float(cfg["t_start"]),
        refine_levels=int(cfg["refine_levels"]),
    )
    return Problem(params, bench)


def initial_state(problem: Problem) -> State:
    """All benchmarks start from rest: zero fields, u^-1 = u^0."""
    return State(
        u_prev=np.zeros(problem.n_u),
        u_prev2=np.zeros(problem.n_u),
        v_prev=np.zeros(problem.n_v),
        p_prev=np.zeros(problem.n_p),
        t_now=0.0,
        n=0,
    )


def advance(problem: Problem, state: State, config):
    """Advance one time step with the configured scheme.

    Returns the new state and the iteration report of the step.
    """
    from . import splitters

    t = problem.case.t_start + state.n * problem.params.dt
    step = problem.prepare_step(state, t)
    if config.scheme == "monolithic":
        u, v, p, report = splitters.monolithic_step(problem, step, config)
    elif config.scheme == "altmin":
        u, v, p, report = splitters.altmin_step(problem, step, state, config)
    elif config.scheme == "l2s":
        u, v, p, report = splitters.l2s_step(problem, step, state, config)
    else:
        raise ValueError(f"unknown scheme {config.scheme!r}")
    new_state = State(
        u_prev=u, u_prev2=state.u_prev, v_prev=v, p_prev=p,
        t_now=t, n=state.n + 1,
    )
    return new_state, report


def run_time_loop(problem: Problem, config, n_steps: int | None = None):
    """Run the full simulation; returns the final state and all step reports."""
    state = initial_state(problem)
    reports = []
    steps = problem.case.n_steps if n_steps is None else int(n_steps)
    for _ in range(steps):
        state, report = advance(problem, state, config)
        reports.append(report)
    return state, reports


def parse_config(path: str) -> dict:
    """Parse a line-oriented `key = value` configuration file.

    Unknown keys raise; values keep their raw string form except for a few
    typed keys handled by the CLI.  Lines starting with '#' are comments.
    """
    out: dict = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out
