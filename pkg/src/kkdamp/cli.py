"""Command-line front end.

Subcommands:

    run           scenario file(s): simulate + enabled checks (--jobs N)
    simulate      scenario file: snapshots only, checks skipped
    decay         scenario file: norm series + decay verdict
    entropy-pair  tabulate q(r) for a power entropy and a phi model
    region-check  boundary flow signs for a region Sigma
    convergence   vanishing-viscosity sweep for a scenario
    eigen         eigenstructure at a single state

Exit codes: 0 all requested checks pass, 1 a check failed or a model
error was raised, 2 usage errors. The output root is --output-dir unless
the environment variable KKD_OUTPUT_DIR is set, which takes precedence.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .entropy import flux_bound, power_entropy_pair
from .errors import KKDampError
from .model import Damping, PhiModel, State, classify_field, eigenvalues, eigenvectors
from .region import RegionSigma, boundary_flow_check
from .scenario import output_root, parse_scenario, run_scenario
from .viscous import ViscousConfig, vanishing_viscosity_sweep


def _fmt(x: float) -> str:
    return format(float(x), ".17e")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kkdamp",
        description="Damped symmetric Keyfitz-Kranzer system: solver and diagnostics.",
    )
    parser.add_argument("--version", action="version", version=f"kkdamp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_output_dir(p):
        p.add_argument(
            "--output-dir",
            default=None,
            help="output root (KKD_OUTPUT_DIR takes precedence; default ./kkd_out)",
        )

    p_run = sub.add_parser("run", help="simulate scenario(s) and run their checks")
    p_run.add_argument("scenarios", nargs="+", help="scenario file(s)")
    p_run.add_argument("--jobs", type=int, default=1, help="parallel scenario runs")
    add_output_dir(p_run)

    p_sim = sub.add_parser("simulate", help="simulate one scenario, skip checks")
    p_sim.add_argument("scenario")
    add_output_dir(p_sim)

    p_dec = sub.add_parser("decay", help="norm decay fit for one scenario")
    p_dec.add_argument("scenario")
    p_dec.add_argument("--p", default="2", help="norm order (number or 'inf')")
    p_dec.add_argument("--weighted", action="store_true", help="use the exp(-sqrt(1+x^2)) weight")
    add_output_dir(p_dec)

    p_ent = sub.add_parser("entropy-pair", help="tabulate q(r) for eta = r**m")
    p_ent.add_argument("--m", type=float, required=True)
    p_ent.add_argument("--phi", required=True, help="e.g. power:1, shifted:1,1, const:1")
    p_ent.add_argument("--r-max", type=float, default=10.0)
    p_ent.add_argument("--n", type=int, default=200, help="table rows")
    p_ent.add_argument("--out", default=None, help="output file (default under output root)")
    add_output_dir(p_ent)

    p_reg = sub.add_parser("region-check", help="boundary flow signs for Sigma")
    p_reg.add_argument("--phi", default="power:1")
    p_reg.add_argument("--a", type=float, required=True)
    p_reg.add_argument("--b", type=float, required=True)
    p_reg.add_argument("--c0", type=float, default=None, help="default phi(r_max/2)")
    p_reg.add_argument("--c1", type=float, default=0.5)
    p_reg.add_argument("--c2", type=float, default=2.0)
    p_reg.add_argument("--r-max", type=float, default=10.0)
    p_reg.add_argument("--samples", type=int, default=64)
    p_reg.add_argument(
        "--skip-lower",
        action="store_true",
        help="exclude the {Z=C1} piece from the verdict (it is outward for C1 > 0)",
    )

    p_con = sub.add_parser("convergence", help="vanishing-viscosity sweep")
    p_con.add_argument("scenario")
    p_con.add_argument(
        "--epsilons", default="0.1,0.05,0.025,0.0125", help="comma list, decreasing"
    )
    add_output_dir(p_con)

    p_eig = sub.add_parser("eigen", help="eigenstructure at one state")
    p_eig.add_argument("--phi", required=True)
    p_eig.add_argument("--state", required=True, help="u,v")
    p_eig.add_argument("--r-max", type=float, default=10.0)

    return parser


def _cmd_run(args) -> int:
    paths = [Path(p) for p in args.scenarios]
    if args.jobs > 1 and len(paths) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_one, [(str(p), args.output_dir) for p in paths]))
    else:
        results = [_run_one((str(p), args.output_dir)) for p in paths]
    all_passed = True
    for name, passed, checks, out_dir in results:
        verdict = "pass" if passed else "FAIL"
        enabled = ",".join(f"{k}={'pass' if ok else 'FAIL'}" for k, ok in checks.items())
        print(f"{name}: {verdict}" + (f" [{enabled}]" if enabled else "") + f" -> {out_dir}")
        all_passed &= passed
    return 0 if all_passed else 1


def _run_one(packed):
    path, out_dir = packed
    sc = parse_scenario(path)
    res = run_scenario(sc, out_root=out_dir)
    return res.name, res.passed, res.checks, str(res.out_dir)


def _cmd_simulate(args) -> int:
    sc = parse_scenario(args.scenario)
    for key in list(sc.entries):
        if key.startswith("check."):
            del sc.entries[key]
            sc.order.remove(key)
    res = run_scenario(sc, out_root=args.output_dir)
    print(f"{res.name}: wrote {len(res.artifacts)} files -> {res.out_dir}")
    return 0


def _cmd_decay(args) -> int:
    from .analysis import WeightFunction, decay_harness

    sc = parse_scenario(args.scenario)
    res = run_scenario(sc, out_root=args.output_dir)
    p = float("inf") if args.p.lower() == "inf" else float(args.p)
    weight = WeightFunction.default() if args.weighted else None
    rep = decay_harness(
        res.trajectory,
        p,
        sc.damping(),
        weight=weight,
        phi=sc.phi_model() if args.weighted else None,
    )
    print(f"p = {args.p} weighted = {args.weighted}")
    print(f"fitted_rate = {_fmt(rep.fitted_rate)}")
    print(f"theorem_rate = {_fmt(rep.theorem_rate)}")
    print(f"rate_band = [{_fmt(rep.rate_band[0])}, {_fmt(rep.rate_band[1])}]")
    print(f"pointwise_ok = {rep.pointwise_ok}  rate_band_ok = {rep.rate_band_ok}")
    print(f"passed = {rep.passed}")
    return 0 if rep.passed else 1


def _cmd_entropy_pair(args) -> int:
    phi = PhiModel.from_spec(args.phi, r_max=args.r_max)
    pair = power_entropy_pair(args.m, phi)
    rs = np.linspace(0.0, phi.r_max, args.n)
    qs = np.asarray(pair.q(rs), dtype=float)
    if args.out is not None:
        out_path = Path(args.out)
        out_path.parent.mkdir(parents=True, exist_ok=True)
    else:
        root = output_root(args.output_dir)
        root.mkdir(parents=True, exist_ok=True)
        safe_phi = args.phi.replace(":", "_").replace(",", "_").replace("/", "_")
        out_path = root / f"entropy_pair_m{args.m:g}_{safe_phi}.tsv"
    with open(out_path, "w") as fh:
        fh.write(f"# entropy flux table: eta = r**{args.m:g}, phi = {phi.label}\n")
        fh.write("# r\tq\n")
        for r, q in zip(rs, qs):
            fh.write(f"{_fmt(r)}\t{_fmt(q)}\n")
    m_sup = phi.sup_phi()
    bound = flux_bound(pair, m_sup, phi.r_max)
    print(f"wrote {out_path}")
    print(f"flux bound |q| <= 2 m M r^m: max ratio {bound.max_ratio:.6f} "
          f"(M = {m_sup:g}) -> {'ok' if bound.passed else 'VIOLATED'}")
    return 0 if bound.passed else 1


def _cmd_region_check(args) -> int:
    phi = PhiModel.from_spec(args.phi, r_max=args.r_max)
    c0 = args.c0 if args.c0 is not None else float(phi.phi(0.5 * phi.r_max))
    sigma = RegionSigma(c0=c0, c1=args.c1, c2=args.c2)
    d = Damping(args.a, args.b)
    rep = boundary_flow_check(sigma, phi, d, n_samples=args.samples)
    for piece in (rep.w_piece, rep.z_upper, rep.z_lower):
        state = "inward" if piece.passed else "OUTWARD"
        print(
            f"{piece.name}: {state}  (outward component max {piece.outward_max:+.3e}, "
            f"min {piece.outward_min:+.3e}, {piece.n_samples} samples)"
        )
    if not rep.z_lower.passed:
        print(
            "note: {Z=C1} with C1 > 0 is always outward under a > b; "
            "the angular drift -(a-b)Z crosses the lower edge. Use C1 = 0 "
            "for an invariant region."
        )
    ok = rep.inward_except_lower if args.skip_lower else rep.passed
    print(f"passed = {ok}")
    return 0 if ok else 1


def _cmd_convergence(args) -> int:
    sc = parse_scenario(args.scenario)
    eps_values = [float(tok) for tok in args.epsilons.split(",")]
    phi = sc.phi_model()
    d = sc.damping()
    grid = sc.grid()
    cfg = sc.solver_config()
    if not isinstance(cfg, ViscousConfig):
        cfg = ViscousConfig(
            t_end=cfg.t_end,
            output_times=cfg.output_times,
            scheme=cfg.scheme,
            splitting=cfg.splitting,
            cfl=cfg.cfl,
        )
    init = sc.initial_field(grid)
    report = vanishing_viscosity_sweep(init, phi, d, cfg, eps_values)
    root = output_root(args.output_dir) / sc.name
    root.mkdir(parents=True, exist_ok=True)
    out_path = root / f"{sc.name}_viscosity_sweep.tsv"
    with open(out_path, "w") as fh:
        fh.write("# eps\tl1_distance\tn_steps\n")
        for row in report.rows:
            fh.write(f"{_fmt(row.eps)}\t{_fmt(row.l1_distance)}\t{row.n_steps}\n")
    for row in report.rows:
        print(f"eps = {row.eps:<10g} l1_distance = {row.l1_distance:.6e}")
    print(f"strictly_decreasing = {report.strictly_decreasing}")
    print(f"wrote {out_path}")
    return 0 if report.strictly_decreasing else 1


def _cmd_eigen(args) -> int:
    phi = PhiModel.from_spec(args.phi, r_max=args.r_max)
    parts = args.state.split(",")
    if len(parts) != 2:
        print("state must be 'u,v'", file=sys.stderr)
        return 2
    s = State(float(parts[0]), float(parts[1]))
    lam1, lam2 = eigenvalues(s, phi)
    basis = eigenvectors(s)
    print(f"state: u = {_fmt(s.u)}  v = {_fmt(s.v)}  r = {_fmt(s.r)}")
    print(f"lambda_1 = {_fmt(lam1)}")
    print(f"lambda_2 = {_fmt(lam2)}")
    print(f"r1 = ({_fmt(basis.r1[0])}, {_fmt(basis.r1[1])})")
    print(f"r2 = ({_fmt(basis.r2[0])}, {_fmt(basis.r2[1])})")
    for i in (1, 2):
        c = classify_field(s, phi, i)
        print(f"field {i}: {c.kind} (indicator {_fmt(c.gn_value)})")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "simulate": _cmd_simulate,
        "decay": _cmd_decay,
        "entropy-pair": _cmd_entropy_pair,
        "region-check": _cmd_region_check,
        "convergence": _cmd_convergence,
        "eigen": _cmd_eigen,
    }
    try:
        return handlers[args.command](args)
    except KKDampError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
