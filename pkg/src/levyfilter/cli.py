"""Command-line orchestration: simulate, filter, compare, symbol, check.

All data goes to files or stdout; diagnostics go to stderr; the exit
status is zero exactly when no module raised.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .config import RunConfig, load_config
from .copulas import IndependenceCopula
from .errors import LevyFilterError
from .measures import tail_integral
from .output import FilterOutput
from .particles import run_pf
from .simulate import PathRecord, simulate_path
from .symbols import (
    estimate_bg_index,
    estimate_k,
    check_wellposedness,
    make_symbol_L0,
    symbol_Bz,
    symbol_L0,
)
from .zakai import GridConfig, run_filter


def _grid_from(cfg: RunConfig, args) -> GridConfig:
    n = args.grid_n or cfg.get("grid.n")
    lam = args.grid_l or cfg.get("grid.l")
    return GridConfig(int(n), float(lam))


def _thresholds_from(cfg: RunConfig, args):
    if args.thresholds:
        return tuple(float(x) for x in args.thresholds.split(","))
    return cfg.get("thresholds")


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    model = cfg.build_model()
    seed = args.seed if args.seed is not None else cfg.seed
    n_paths = args.paths or cfg.get("sim.paths")
    out = args.out or cfg.get("output.path")
    model.nu1.table, model.nu2.table  # warm lazily built tables once

    def one(i):
        path = simulate_path(
            model, cfg.get("sim.T"), cfg.get("sim.dt"), seed=seed + i
        )
        target = out if n_paths == 1 else out.replace(".csv", f"_{i}.csv")
        path.to_csv(target)
        return target

    if n_paths == 1:
        print(one(0))
    else:
        # per-path seeds make results independent of scheduling
        with ThreadPoolExecutor(max_workers=min(n_paths, 8)) as pool:
            for target in pool.map(one, range(n_paths)):
                print(target)
    return 0


def cmd_filter(args) -> int:
    cfg = load_config(args.config)
    model = cfg.build_model()
    path = PathRecord.from_csv(args.path)
    thresholds = _thresholds_from(cfg, args)
    out = args.out or cfg.get("output.filter")
    if args.engine == "zakai":
        result = run_filter(model, path, _grid_from(cfg, args), thresholds)
    else:
        particles = args.particles or cfg.get("pf.particles")
        seed = args.seed if args.seed is not None else cfg.seed
        result = run_pf(
            model,
            path,
            int(particles),
            seed=seed,
            thresholds=thresholds,
            resample_threshold=cfg.get("pf.resample_threshold"),
        )
    result.to_csv(out)
    print(out)
    return 0


def cmd_compare(args) -> int:
    """Both engines on one path; the particle engine runs replicate seeds
    to put empirical error bands around the comparison metrics."""
    cfg = load_config(args.config)
    model = cfg.build_model()
    seed = args.seed if args.seed is not None else cfg.seed
    if args.path:
        path = PathRecord.from_csv(args.path)
    else:
        path = simulate_path(model, cfg.get("sim.T"), cfg.get("sim.dt"), seed=seed)
    thresholds = _thresholds_from(cfg, args)
    grid = _grid_from(cfg, args)
    stride = max(1, (len(path.times) - 1) // 200)

    zk = run_filter(model, path, grid, thresholds, record_stride=stride)

    replicates = cfg.get("pf.replicates")
    particles = args.particles or cfg.get("pf.particles")
    # warm the lazily built tables before the thread fan-out
    model.nu1.table, model.nu2.table, tail_integral(model.nu2, 1.0)

    def one(r):
        return run_pf(
            model,
            path,
            int(particles),
            seed=seed + 1000 + r,
            thresholds=thresholds,
            resample_threshold=cfg.get("pf.resample_threshold"),
            record_stride=stride,
        )

    with ThreadPoolExecutor(max_workers=min(replicates, 8)) as pool:
        pfs = list(pool.map(one, range(replicates)))

    out = args.out or cfg.get("output.metrics")
    cols = ["t", "zakai_mean", "pf_mean", "pf_mean_stderr", "abs_dmean"]
    for a in thresholds:
        cols += [
            f"zakai_p_{a:g}",
            f"pf_p_{a:g}",
            f"pf_p_stderr_{a:g}",
            f"abs_dp_{a:g}",
        ]
    lines = [",".join(cols)]
    denom = max(np.sqrt(replicates - 1), 1.0) * np.sqrt(replicates)
    for i, t in enumerate(zk.t):
        pm = np.array([p.mean[i] for p in pfs])
        row = [
            t,
            zk.mean[i],
            pm.mean(),
            pm.std(ddof=1) / np.sqrt(replicates) if replicates > 1 else 0.0,
            abs(zk.mean[i] - pm.mean()),
        ]
        for a in thresholds:
            pp = np.array([p.probs[float(a)][i] for p in pfs])
            row += [
                zk.probs[float(a)][i],
                pp.mean(),
                pp.std(ddof=1) / np.sqrt(replicates) if replicates > 1 else 0.0,
                abs(zk.probs[float(a)][i] - pp.mean()),
            ]
        lines.append(",".join(f"{v:.17g}" for v in row))
    with open(out, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print(out)
    return 0


def cmd_symbol(args) -> int:
    cfg = load_config(args.config)
    model = cfg.build_model()
    xi = np.geomspace(args.xi_min, args.xi_max, args.points)
    lines = []
    if args.z:
        marks = [float(z) for z in args.z.split(",")]
        header = ["xi"]
        for z in marks:
            header += [f"re_phi_{z:g}", f"im_phi_{z:g}"]
        lines.append(",".join(header))
        cols = [xi]
        for z in marks:
            phi = symbol_Bz(model.copula, model.nu1, model.nu2, z, xi)
            cols += [phi.real, phi.imag]
        for row in zip(*cols):
            lines.append(",".join(f"{v:.17g}" for v in row))
    else:
        m0 = model.l0.measure()
        if m0 is None:
            raise LevyFilterError("model has no state-noise component")
        psi = symbol_L0(m0, xi)
        lines.append("xi,re_psi,im_psi")
        for x, p in zip(xi, psi):
            lines.append(f"{x:.17g},{p.real:.17g},{p.imag:.17g}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(args.out)
    else:
        sys.stdout.write(text)
    return 0


def cmd_check(args) -> int:
    cfg = load_config(args.config)
    model = cfg.build_model()
    m0 = model.l0.measure()
    if m0 is None:
        raise LevyFilterError("well-posedness check needs a state-noise component")
    alpha = estimate_bg_index(make_symbol_L0(m0), direction="lower").estimate

    sigma_finite = model.nu1.activity == "sigma-finite"
    if isinstance(model.copula, IndependenceCopula):
        raise LevyFilterError("independence coupling has no conditional density")
    if sigma_finite:
        beta_plus = 1.0
        z_grid = np.geomspace(1e-3, 1.0, 7)
        k_samples = estimate_k(model.copula, model.nu1, model.nu2, z_grid, beta_plus)
    else:
        beta_plus = 0.0
        k_samples = np.array([[1e-3, 0.0], [1.0, 0.0]])

    report = check_wellposedness(
        model.nu2,
        alpha0_minus=alpha,
        beta_plus=beta_plus,
        k_samples=k_samples,
        delta_g=model.sensor.delta_g,
        rho=model.rho,
        rho0=model.rho0,
    )
    print(f"lower state-noise index alpha0-: {report.alpha0_minus:.4f}")
    print(f"upper jump-operator index beta+: {report.beta_plus:.4f}")
    print(f"sensor regularity delta_g: {report.delta_g:.4f}")
    if report.p_chosen is not None:
        print(f"admissible exponent p: {report.p_chosen:.4f}")
    else:
        print("admissible exponent p: none found in (1, 2]")
    for line in report.lines():
        print(line)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="levyfilter",
        description="Nonlinear filtering with copula-coupled jump noise",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, path_arg=False):
        p.add_argument("--config", required=True, help="run configuration file")
        p.add_argument("--seed", type=int, default=None)
        if path_arg:
            p.add_argument("--grid-n", type=int, default=None)
            p.add_argument("--grid-l", type=float, default=None)
            p.add_argument("--thresholds", default=None, help="comma list, e.g. 0.5,1")
            p.add_argument("--out", default=None)

    p = sub.add_parser("simulate", help="simulate signal/observation paths")
    common(p)
    p.add_argument("--paths", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("filter", help="run one filter engine along a path")
    common(p, path_arg=True)
    p.add_argument("--path", required=True, help="path CSV from `simulate`")
    p.add_argument("--engine", choices=("zakai", "pf"), default="zakai")
    p.add_argument("--particles", type=int, default=None)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("compare", help="both engines with replicate error bands")
    common(p, path_arg=True)
    p.add_argument("--path", default=None)
    p.add_argument("--particles", type=int, default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("symbol", help="emit state-noise or jump-operator symbols")
    common(p)
    p.add_argument("--xi-min", type=float, default=1.0)
    p.add_argument("--xi-max", type=float, default=1e4)
    p.add_argument("--points", type=int, default=64)
    p.add_argument("--z", default=None, help="comma list of marks for phi_z")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_symbol)

    p = sub.add_parser("check", help="well-posedness condition report")
    common(p)
    p.set_defaults(func=cmd_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except LevyFilterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
