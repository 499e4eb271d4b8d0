"""Command-line surface.

Subcommands: gen (emit a ground-truth matrix), sketch (ensemble +
measurements from a matrix or a stream file), recover (single solve),
phase (Monte Carlo grid from a config file), rip (probe drivers),
limits (information-theoretic parameter counts).

Exit codes: 0 success, 1 usage error, 2 numeric failure.
"""

import argparse
import sys

import numpy as np

from . import bench, rip_probe, sensing, solvers, structures
from .errors import (
    ConfigError,
    CovsketchError,
    ParameterError,
    ShapeError,
    StructureError,
)

_USAGE_ERRORS = (ConfigError, ParameterError, ShapeError, StructureError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="covsketch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a structured ground-truth matrix")
    p.add_argument("--structure", required=True, choices=[
        "lowrank_psd", "toeplitz_lowrank", "sparse_psd",
        "sparse_symmetric", "sparse_rankone"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--power-law", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="matrix CSV path")
    p.add_argument("--meta", help="sidecar metadata path (default OUT.meta)")

    p = sub.add_parser("sketch", help="draw an ensemble and measure a matrix or stream")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--dist", default="gaussian",
                   choices=["gaussian", "rademacher", "uniform_scaled"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--matrix", help="CSV matrix to measure")
    p.add_argument("--stream", help="CSV stream file, one x_t per row")
    p.add_argument("--schedule-seed", type=int, default=0)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--noise-kind", default="l1_bounded",
                   choices=["l1_bounded", "l2_bounded"])
    p.add_argument("--ensemble-out", required=True, help="binary ensemble path")
    p.add_argument("--y-out", required=True, help="measurement CSV path")

    p = sub.add_parser("recover", help="run one recovery solve")
    p.add_argument("--structure", required=True,
                   choices=["lowrank", "toeplitz", "sparse", "sparse-rank1", "pocs"])
    p.add_argument("--ensemble", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--no-psd", action="store_true")
    p.add_argument("--max-iter", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="estimate CSV path")

    p = sub.add_parser("phase", help="run a Monte Carlo grid from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--timing", action="store_true",
                   help="include wall_ms (breaks byte-determinism)")

    p = sub.add_parser("rip", help="RIP / isotropy / norm-law probes")
    p.add_argument("--mode", required=True,
                   choices=["l2l1", "l2l2-toeplitz", "isotropy", "toeplitz-norm"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, default=500)
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--k", type=int, default=0, help="probe sparse class instead")
    p.add_argument("--dist", default="gaussian",
                   choices=["gaussian", "rademacher", "uniform_scaled"])
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--samples", type=int, default=100000,
                   help="Monte Carlo sample count (isotropy mode)")
    p.add_argument("--fixed-ensemble", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="per-trial CSV path")

    p = sub.add_parser("limits", help="information-theoretic parameter count")
    p.add_argument("--structure", required=True, choices=[
        "lowrank_psd", "toeplitz_lowrank", "sparse_psd",
        "sparse_symmetric", "sparse_rankone"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=int)
    p.add_argument("--k", type=int)

    return parser


def _cmd_gen(args) -> int:
    r_or_k = args.r if args.r is not None else args.k
    if r_or_k is None:
        raise ParameterError("gen requires --r or --k")
    if args.structure == "sparse_rankone":
        truth = structures.gen_sparse_rankone(
            args.n, r_or_k, args.seed, power_law=args.power_law)
    else:
        truth = bench._gen_truth(args.structure, args.n, r_or_k, args.seed)
    meta = args.meta or args.out + ".meta"
    structures.save_truth(truth, args.out, meta)
    print(f"wrote {args.out} and {meta}")
    return 0


def _cmd_sketch(args) -> int:
    ens = sensing.draw_ensemble(args.n, args.m, args.dist, args.seed)
    if (args.matrix is None) == (args.stream is None):
        raise ParameterError("sketch requires exactly one of --matrix or --stream")
    if args.matrix:
        M = sensing.load_matrix_csv(args.matrix)
        meas = sensing.measure(ens, M, sigma=args.sigma,
                               noise_kind=args.noise_kind, noise_seed=args.seed + 1)
    else:
        stream = np.loadtxt(args.stream, delimiter=",", ndmin=2)
        meas, schedule = sensing.sketch_stream(stream, ens, args.schedule_seed)
        if len(schedule.unassigned):
            print(f"warning: {len(schedule.unassigned)} sketch indices unassigned",
                  file=sys.stderr)
    sensing.save_ensemble(ens, args.ensemble_out)
    np.savetxt(args.y_out, meas.y, delimiter=",", fmt="%.17g")
    print(f"noise_kind={meas.noise_kind}")
    print(f"noise_level={meas.noise_level:.17g}")
    return 0


def _cmd_recover(args) -> int:
    ens = sensing.load_ensemble(args.ensemble)
    y = np.loadtxt(args.y, delimiter=",")
    noise_kind = "none"
    if args.epsilon > 0:
        noise_kind = "l2_bounded" if args.structure == "toeplitz" else "l1_bounded"
    meas = sensing.MeasurementSet(y=np.atleast_1d(y), noise_kind=noise_kind,
                                  noise_level=args.epsilon)
    cfg = solvers.SolverConfig(epsilon=args.epsilon, lam=args.lam,
                               psd_constraint=not args.no_psd,
                               max_iter=args.max_iter, seed=args.seed)
    if args.structure == "lowrank":
        res = solvers.recover_lowrank(meas, ens, cfg)
    elif args.structure == "toeplitz":
        res = solvers.recover_toeplitz(meas, ens, cfg)
    elif args.structure == "sparse":
        res = solvers.recover_sparse(meas, ens, cfg)
    elif args.structure == "sparse-rank1":
        res = solvers.recover_sparse_rankone(meas, ens, cfg)
    else:
        res = solvers.pocs(meas, ens, iters=args.max_iter)
    sensing.save_matrix_csv(res.estimate, args.out)
    print(f"iterations={res.iterations}")
    print(f"primal_residual={res.primal_residual:.6g}")
    print(f"dual_residual={res.dual_residual:.6g}")
    print(f"converged={int(res.converged)}")
    print(f"objective={res.objective:.17g}")
    return 0 if res.converged else 2


def _load_grid(path) -> bench.ExperimentGrid:
    try:
        import tomllib as toml_reader
    except ModuleNotFoundError:
        import tomli as toml_reader

    with open(path, "rb") as fh:
        raw = toml_reader.load(fh)
    if "r" in raw and "k" in raw:
        raise ConfigError("config sets both r and k")
    r_or_k = raw.get("r", raw.get("k"))
    if r_or_k is None:
        raise ConfigError("config needs r or k values")
    as_tuple = lambda v: tuple(v) if isinstance(v, list) else (v,)
    return bench.ExperimentGrid(
        structure=raw["structure"],
        n=int(raw["n"]),
        m_values=as_tuple(raw["m"]),
        r_or_k_values=as_tuple(r_or_k),
        sigmas=tuple(float(s) for s in as_tuple(raw.get("sigma", 0.0))),
        trials=int(raw.get("trials", 20)),
        threshold=float(raw.get("threshold", 1e-3)),
        solver=raw.get("solver", "convex"),
        dist=raw.get("dist", "gaussian"),
        base_seed=int(raw.get("seed", 0)),
        max_iter=int(raw.get("max_iter", 20000)),
        pocs_iters=int(raw.get("pocs_iters", 2000)),
    )


def _cmd_phase(args) -> int:
    grid = _load_grid(args.config)
    records = bench.run_grid(grid, workers=args.workers)
    bench.emit_csv(records, args.out, include_timing=args.timing)
    for cell, rate in sorted(bench.summarize(records).items()):
        m, rk, sigma = cell
        print(f"m={m} r_or_k={rk} sigma={sigma:g} success_rate={rate:.2f}")
    return 0


def _cmd_rip(args) -> int:
    dist = sensing.Distribution(args.dist)

    def factory(i):
        return sensing.draw_ensemble(args.n, args.m, dist, args.seed + 7919 * (i + 1))

    if args.mode == "isotropy":
        X = structures.gen_toeplitz_lowrank(args.n, 4 if args.n >= 4 else 2,
                                            args.seed).matrix
        dev = rip_probe.isotropy_deviation(dist, args.n, args.samples, X,
                                           seed=args.seed)
        print(f"deviation={dev:.6g}")
        print(f"samples={args.samples}")
        return 0
    if args.mode == "toeplitz-norm":
        max_ratio, samples = rip_probe.toeplitz_norm_stats(
            dist, args.n, args.trials, seed=args.seed)
        print(f"max_ratio={max_ratio:.6g}")
        print(f"median_ratio={np.median(samples):.6g}")
        return 0
    if args.mode == "l2l1":
        if args.k:
            sampler = rip_probe.sparse_k_sampler(args.n, args.k)
            kind = "sparse_k"
        else:
            sampler = rip_probe.rank_r_sampler(args.n, args.r)
            kind = "rank_r"
        est = rip_probe.estimate_rip(factory, sampler, args.trials,
                                     fresh_ensemble_per_trial=not args.fixed_ensemble,
                                     kind=kind)
    else:
        sampler = rip_probe.toeplitz_rank_r_sampler(args.n, args.r)
        est = rip_probe.rip_l2l2_toeplitz(factory, sampler, args.trials,
                                          fresh_ensemble_per_trial=not args.fixed_ensemble)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("class,n,m,trial,ratio,seed\n")
            for t, ratio in enumerate(est.ratios):
                fh.write(f"{est.kind},{est.n},{est.m},{t},{ratio:.17g},{args.seed}\n")
    print(f"class={est.kind}")
    print(f"n={est.n}")
    print(f"m={est.m}")
    print(f"trials={est.trials}")
    names = ("min", "q05", "median", "q95", "max")
    for name, q in zip(names, est.quantiles):
        print(f"{name}={q:.6g}")
    return 0


def _cmd_limits(args) -> int:
    r_or_k = args.r if args.r is not None else args.k
    if r_or_k is None:
        raise ParameterError("limits requires --r or --k")
    print(bench.info_limit(args.structure, args.n, r_or_k))
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "sketch": _cmd_sketch,
    "recover": _cmd_recover,
    "phase": _cmd_phase,
    "rip": _cmd_rip,
    "limits": _cmd_limits,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except _USAGE_ERRORS as exc:
        print(f"covsketch: error: {exc}", file=sys.stderr)
        return 1
    except CovsketchError as exc:
        print(f"covsketch: numeric failure: {exc}", file=sys.stderr)
        return 2
    except np.linalg.LinAlgError as exc:
        print(f"covsketch: numeric failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
