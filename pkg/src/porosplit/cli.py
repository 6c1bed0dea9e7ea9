"""Benchmark runner CLI: parameter sweeps, table suites, gamma, field dumps.

Subcommands:
    porosplit run <config>                 one sweep, CSV on stdout
    porosplit bench <suite> [--out dir]    regenerate a study table as CSV
    porosplit gamma <config>               contraction-constant breakdown
    porosplit dump <config> --t T --out F  vertex field table at a time

Config files are line-oriented ``key = value`` text.  Recognized keys:
    case            swelling | footing | perfusion
    scheme          monolithic | altmin | l2s
    elements        element triple, e.g. P1/P2/P1
    beta_s, beta_f, beta_p      L2S stabilization scalings (dimensionless)
    anderson_depth  AA depth m (0 = plain split)
    n_per_side, dt, t_end, n_steps
    outer_tol, outer_cap, inner_rtol
    sweep           parameter name to sweep (any override key)
    sweep_values    whitespace-separated values
    rho_s, rho_f, mu_f, lambda_s, mu_s, kappa_s, kappa_f, phi0,
    porosity_ell, theta, kdr_scale          parameter overrides

CSV schema: case,elements,scheme,param,value,avg_iters,converged,wall_time_s
with averages over the simulated steps and the literal token ``--`` in
avg_iters for runs that did not converge.  Wall times are written as 0 unless
--timing is given (or the suite measures timing), keeping output
reproducible bit-for-bit across runs.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import os
import sys

import numpy as np

from .model import (
    Problem,
    build_benchmark,
    elements_label,
    initial_state,
    parse_config,
    run_time_loop,
)
from .splitters import SplitConfig

CSV_HEADER = "case,elements,scheme,param,value,avg_iters,converged,wall_time_s"

_FLOAT_KEYS = {
    "rho_s", "rho_f", "mu_f", "lambda_s", "mu_s", "kappa_s", "kappa_f",
    "phi0", "theta", "dt", "t_end", "outer_tol", "side_length", "kdr_scale",
}
_INT_KEYS = {"n_per_side", "n_steps", "outer_cap", "porosity_ell"}


def _typed(key: str, value: str):
    if key in _FLOAT_KEYS:
        return float(value)
    if key in _INT_KEYS:
        return int(value)
    return value


def scheme_label(cfg: SplitConfig) -> str:
    if cfg.scheme == "monolithic":
        base = "Mono"
    elif cfg.scheme == "altmin":
        base = "Alt-min"
    else:
        def fmt(x):
            return "%g" % x
        # semicolons keep the label a single CSV field
        base = f"L2S({fmt(cfg.beta_bar_s)};{fmt(cfg.beta_bar_f)};{fmt(cfg.beta_bar_p)})"
    if cfg.anderson_depth > 0:
        base += f"+AA({cfg.anderson_depth})"
    return base


def run_one(
    case: str,
    overrides: dict,
    split: SplitConfig,
    param: str = "",
    value: str = "",
    n_steps: int | None = None,
    problem: Problem | None = None,
) -> dict:
    """Run one configuration and summarize it as a CSV row dict."""
    problem = problem if problem is not None else build_benchmark(case, overrides)
    _, reports = run_time_loop(problem, split, n_steps=n_steps)
    iters = [r.iterations for r in reports]
    converged = bool(reports) and all(r.converged for r in reports)
    return {
        "case": case,
        "elements": elements_label(problem.case.elements),
        "scheme": scheme_label(split),
        "param": param,
        "value": value,
        "avg_iters": float(np.mean(iters)) if iters else 0.0,
        "converged": converged,
        "wall_time_s": float(np.sum([r.wall_time for r in reports])),
    }


def format_row(row: dict, timing: bool) -> str:
    avg = "--" if not row["converged"] else f"{row['avg_iters']:.2f}"
    wt = f"{row['wall_time_s']:.3f}" if timing else "0.000"
    return ",".join(
        [
            row["case"], row["elements"], row["scheme"], str(row["param"]),
            str(row["value"]), avg, str(bool(row["converged"])).lower(), wt,
        ]
    )


def _split_from_config(cfg: dict) -> SplitConfig:
    kw = {}
    if "scheme" in cfg:
        kw["scheme"] = cfg["scheme"]
    if "beta_s" in cfg:
        kw["beta_bar_s"] = float(cfg["beta_s"])
    if "beta_f" in cfg:
        kw["beta_bar_f"] = float(cfg["beta_f"])
    if "beta_p" in cfg:
        kw["beta_bar_p"] = float(cfg["beta_p"])
    if "anderson_depth" in cfg:
        kw["anderson_depth"] = int(cfg["anderson_depth"])
    if "outer_tol" in cfg:
        kw["outer_tol"] = float(cfg["outer_tol"])
    if "outer_cap" in cfg:
        kw["outer_cap"] = int(cfg["outer_cap"])
    if "inner_rtol" in cfg:
        kw["inner_rtol"] = float(cfg["inner_rtol"])
    return SplitConfig(**kw)


def _overrides_from_config(cfg: dict) -> dict:
    skip = {
        "case", "scheme", "beta_s", "beta_f", "beta_p", "anderson_depth",
        "inner_rtol", "sweep", "sweep_values", "outer_tol", "outer_cap",
    }
    out = {}
    for key, value in cfg.items():
        if key in skip:
            continue
        out[key] = _typed(key, value)
    # outer tolerance/cap live on the case as defaults and on SplitConfig
    if "outer_tol" in cfg:
        out["outer_tol"] = float(cfg["outer_tol"])
    if "outer_cap" in cfg:
        out["outer_cap"] = int(cfg["outer_cap"])
    return out


def cmd_run(args) -> int:
    cfg = parse_config(args.config)
    case = cfg.get("case", "swelling")
    split = _split_from_config(cfg)
    overrides = _overrides_from_config(cfg)
    sweep = cfg.get("sweep")
    values = cfg.get("sweep_values", "").split() if sweep else [""]

    rows = []
    for value in values:
        ov = dict(overrides)
        param = sweep or ""
        if sweep:
            ov[sweep] = _typed(sweep, value)
        rows.append(run_one(case, ov, split, param=param, value=value))
    print(CSV_HEADER)
    for row in rows:
        print(format_row(row, args.timing))
    return 0


def _emit(path: str | None, name: str, rows: list[dict], timing: bool) -> None:
    lines = [CSV_HEADER] + [format_row(r, timing) for r in rows]
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(f"# {name}\n" + text)
    else:
        os.makedirs(path, exist_ok=True)
        with open(os.path.join(path, f"{name}.csv"), "w") as fh:
            fh.write(text)


def _parallel(jobs: int, tasks: list):
    """Run (fn, kwargs) tasks, preserving order regardless of completion."""
    if jobs <= 1:
        return [fn(**kw) for fn, kw in tasks]
    with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as ex:
        futures = [ex.submit(fn, **kw) for fn, kw in tasks]
        return [f.result() for f in futures]


L2S_VARIANTS = ((0.0, 0.0, 0.0), (0.0, 0.0, 1.0), (-0.5, 0.0, 1.0), (-1.0, 0.0, 1.0))


def bench_suite(name: str, out: str | None = None, jobs: int = 1,
                full: bool = False) -> list[dict]:
    """Regenerate one of the study tables; returns the CSV rows."""
    tasks = []

    def add(case, ov, split, param, value, n_steps=None):
        tasks.append((run_one, dict(case=case, overrides=ov, split=split,
                                    param=param, value=value, n_steps=n_steps)))

    timing = False
    if name == "table1":
        for ks in (1e2, 1e3, 1e4, 1e5):
            add("swelling", {"kappa_s": ks}, SplitConfig(scheme="altmin"),
                "kappa_s", "%g" % ks)
        for kf in (1e-9, 1e-10, 1e-11, 1e-12):
            add("swelling", {"kappa_f": kf},
                SplitConfig(scheme="altmin", outer_cap=500), "kappa_f", "%g" % kf)
        for ell in (2, 4, 6, 8):
            add("swelling", {"porosity_ell": ell}, SplitConfig(scheme="altmin"),
                "porosity_ell", str(ell))
    elif name == "table_bulk":
        for elems in ("P1/P1/P1", "P1/P2/P1"):
            for ks in (1e2, 1e4, 1e6, 1e8):
                for bs, bf, bp in L2S_VARIANTS:
                    add("swelling", {"kappa_s": ks, "elements": elems},
                        SplitConfig(scheme="l2s", beta_bar_s=bs, beta_bar_f=bf,
                                    beta_bar_p=bp), "kappa_s", "%g" % ks)
    elif name in ("table_perm", "table_perm_aa"):
        depth = 5 if name == "table_perm_aa" else 0
        for elems in ("P1/P1/P1", "P1/P2/P1"):
            for kf in (1e-7, 1e-8, 1e-9, 1e-10, 1e-11, 1e-12):
                for bs, bf, bp in L2S_VARIANTS:
                    add("swelling", {"kappa_f": kf, "elements": elems},
                        SplitConfig(scheme="l2s", beta_bar_s=bs, beta_bar_f=bf,
                                    beta_bar_p=bp, outer_cap=500,
                                    anderson_depth=depth), "kappa_f", "%g" % kf)
    elif name == "table_density":
        for rho in (1e2, 1e4, 1e6, 1e8):
            for bs, bf, bp in L2S_VARIANTS:
                add("swelling", {"rho_s": rho, "rho_f": rho,
                                 "elements": "P1/P1/P1"},
                    SplitConfig(scheme="l2s", beta_bar_s=bs, beta_bar_f=bf,
                                beta_bar_p=bp), "rho", "%g" % rho)
    elif name == "table_kdr":
        for elems in ("P1/P1/P1", "P1/P2/P1"):
            for scale in (0.01, 0.1, 1.0, 10.0):
                for bs, bf, bp in L2S_VARIANTS:
                    add("swelling", {"kdr_scale": scale, "elements": elems},
                        SplitConfig(scheme="l2s", beta_bar_s=bs, beta_bar_f=bf,
                                    beta_bar_p=bp), "kdr_scale", "%g" % scale)
    elif name == "table_swelling_cmp":
        for elems in ("P1/P2/P1", "P2/P2/P1"):
            for ks in (1e4, 1e8):
                for depth in (0, 1, 5):
                    add("swelling", {"kappa_s": ks, "elements": elems,
                                     "n_steps": 5},
                        SplitConfig(scheme="altmin", anderson_depth=depth),
                        "kappa_s", "%g" % ks)
                    add("swelling", {"kappa_s": ks, "elements": elems,
                                     "n_steps": 5},
                        SplitConfig(scheme="l2s", beta_bar_s=-0.5,
                                    anderson_depth=depth), "kappa_s", "%g" % ks)
    elif name == "table_footing_cmp":
        n_steps = None if full else 10
        for elems in ("P1/P2/P1", "P2/P2/P1"):
            for depth in (0, 1, 5):
                add("footing", {"elements": elems},
                    SplitConfig(scheme="altmin", anderson_depth=depth),
                    "depth", str(depth), n_steps=n_steps)
                add("footing", {"elements": elems},
                    SplitConfig(scheme="l2s", beta_bar_s=-0.5,
                                anderson_depth=depth), "depth", str(depth),
                    n_steps=n_steps)
    elif name == "table_perfusion_cmp":
        for elems in ("P1/P2/P1", "P2/P2/P1"):
            for depth in (0, 1, 5):
                add("perfusion", {"elements": elems},
                    SplitConfig(scheme="altmin", anderson_depth=depth),
                    "depth", str(depth))
                add("perfusion", {"elements": elems},
                    SplitConfig(scheme="l2s", beta_bar_s=-0.5,
                                anderson_depth=depth), "depth", str(depth))
    elif name == "table_walltime":
        sides = (50, 100, 150, 200, 250, 300) if full else (50, 100)
        rows = []
        for n in sides:
            problem = build_benchmark("swelling", {"n_per_side": n, "n_steps": 5})
            for split in (
                SplitConfig(scheme="l2s", beta_bar_s=-0.5,
                            inner_warm_start=True, inner_schedule="adaptive"),
                SplitConfig(scheme="monolithic"),
            ):
                # warm the factorization caches, then time the full run
                run_time_loop(problem, split, n_steps=2)
                rows.append(run_one("swelling", {}, split, "n_per_side", str(n),
                                    problem=problem))
            problem._cache.clear()
        _emit(out, name, rows, timing=True)
        return rows
    else:
        raise ValueError(f"unknown suite {name!r}")

    rows = _parallel(jobs, tasks)
    _emit(out, name, rows, timing=timing)
    return rows


def cmd_bench(args) -> int:
    bench_suite(args.suite, out=args.out, jobs=args.jobs, full=args.full)
    return 0


def cmd_gamma(args) -> int:
    from .analysis import gamma

    cfg = parse_config(args.config)
    case = cfg.get("case", "swelling")
    problem = build_benchmark(case, _overrides_from_config(cfg))
    g = gamma(problem)
    print("case,gamma,zeta,eta,theta,gamma1,gamma2,c_korn1,c_korn2,"
          "k_dr_phi0_min,kappa_m,n_modulus")
    print(
        f"{case},{g.gamma:.10g},{g.zeta:.10g},{g.eta:.10g},{g.theta:.10g},"
        f"{g.gamma1:.10g},{g.gamma2:.10g},{g.c_korn1:.10g},{g.c_korn2:.10g},"
        f"{g.k_dr_phi0_min:.10g},{g.kappa_m:.10g},{g.n_modulus:.10g}"
    )
    return 0


def dump_fields(problem: Problem, state, path: str) -> None:
    """Vertex table of the current fields: x y ux uy vx vy p."""
    mesh = problem.mesh
    nv = mesh.n_vertices
    u = state.u_prev.reshape(-1, 2)[:nv]
    v = state.v_prev.reshape(-1, 2)[:nv]
    p = state.p_prev[:nv]
    with open(path, "w") as fh:
        fh.write("# x[m] y[m] ux[m] uy[m] vx[m/s] vy[m/s] p[Pa]\n")
        for i in range(nv):
            fh.write(
                "%.17g %.17g %.17g %.17g %.17g %.17g %.17g\n"
                % (mesh.vertices[i, 0], mesh.vertices[i, 1],
                   u[i, 0], u[i, 1], v[i, 0], v[i, 1], p[i])
            )


def cmd_dump(args) -> int:
    from .model import advance

    cfg = parse_config(args.config)
    case = cfg.get("case", "swelling")
    problem = build_benchmark(case, _overrides_from_config(cfg))
    split = _split_from_config(cfg)
    state = initial_state(problem)
    dt = problem.params.dt
    t0 = problem.case.t_start
    while t0 + state.n * dt <= args.t + 1e-12 * max(dt, 1.0):
        state, _ = advance(problem, state, split)
    dump_fields(problem, state, args.out)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="porosplit",
        description="Splitting-scheme benchmarks for linearized poromechanics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a config, CSV on stdout")
    p_run.add_argument("config")
    p_run.add_argument("--timing", action="store_true",
                       help="report wall times (off by default: reproducible CSV)")
    p_run.set_defaults(fn=cmd_run)

    p_bench = sub.add_parser("bench", help="regenerate a study table")
    p_bench.add_argument("suite", choices=[
        "table1", "table_bulk", "table_perm", "table_perm_aa", "table_density",
        "table_kdr", "table_swelling_cmp", "table_footing_cmp",
        "table_perfusion_cmp", "table_walltime",
    ])
    p_bench.add_argument("--out", default=None, help="output directory")
    p_bench.add_argument("--jobs", type=int, default=1)
    p_bench.add_argument("--full", action="store_true",
                         help="full-size run (all footing steps / mesh sizes)")
    p_bench.set_defaults(fn=cmd_bench)

    p_gamma = sub.add_parser("gamma", help="contraction-constant breakdown")
    p_gamma.add_argument("config")
    p_gamma.set_defaults(fn=cmd_gamma)

    p_dump = sub.add_parser("dump", help="dump vertex fields at a time")
    p_dump.add_argument("config")
    p_dump.add_argument("--t", type=float, required=True)
    p_dump.add_argument("--out", required=True)
    p_dump.set_defaults(fn=cmd_dump)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
