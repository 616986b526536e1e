"""Command-line interface.

Subcommands: ``cluster`` (solve an instance file), ``oracle`` (exact
optimum for small instances), ``verify`` (re-check a saved result against
its input), ``gen`` (write seeded instance files), ``bench`` (seeded
end-to-end runs with oracle ratios).

Exit codes: 0 success, 1 invariant or audit failure, 2 input error.
"""

from __future__ import annotations

import argparse
import sys

from .generators import FAMILIES, GeneratorSpec, generate
from .geometry import DistanceMode, InstanceError
from .io import FormatError, load_instance, load_result, save_points, save_plot_data, save_result
from .oracle import OracleError, audit, brute_force_opt, enumeration_tractable
from .search import min_sum_clustering

_AUTO_ORACLE_MAX_N = 10


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InstanceError, FormatError, OracleError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="minsumclust",
        description="Min-sum k-clustering with outliers: solver, oracle, verifiers.",
    )
    sub = parser.add_subparsers(required=True)

    p = sub.add_parser("cluster", help="solve an instance and write a result file")
    _instance_flags(p)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--seed", type=int, default=0, help="seed for the local-search fallback")
    p.add_argument("--output", required=True)
    p.add_argument("--emit-plot-data", metavar="PATH", default=None,
                   help="also dump x,y,label rows for external plotting")
    p.add_argument("--force-primal-dual", action="store_true",
                   help="skip the small-k fallback even when k <= 4/epsilon")
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("oracle", help="exact optimum by exhaustive search")
    _instance_flags(p)
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("verify", help="re-check a result file against its input")
    p.add_argument("--input", required=True)
    p.add_argument("--result", required=True)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("gen", help="generate an instance file")
    p.add_argument("--family", choices=FAMILIES, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--radii", default="1,5", help="rings: circle radii")
    p.add_argument("--counts", default="16,16", help="rings/gauss: points per component")
    p.add_argument("--noise", type=float, default=0.0, help="rings: radial noise")
    p.add_argument("--centers", default="0,0;4,0", help="gauss: centers, ';'-separated")
    p.add_argument("--spreads", default="0.5,0.5", help="gauss: component spreads")
    p.add_argument("--n", type=int, default=32, help="box/metric: point count")
    p.add_argument("--dims", default="1,1", help="box: side lengths")
    p.add_argument("--embed-dim", type=int, default=3, help="metric: embedding dimension")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("bench", help="seeded end-to-end runs with oracle ratios")
    p.add_argument("--suite", choices=["small"], default="small")
    p.add_argument("--seeds", type=int, default=10, metavar="M")
    p.set_defaults(func=_cmd_bench)
    return parser


def _instance_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True)
    p.add_argument("--mode", choices=[m.value for m in DistanceMode], default="sqeuclid")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--nprime", type=int, required=True)
    if not any(a.dest == "epsilon" for a in p._actions):
        p.add_argument("--epsilon", type=float, default=1.0)


def _cmd_cluster(args) -> int:
    inst = load_instance(args.input, args.mode, args.k, args.nprime, args.epsilon)
    result = min_sum_clustering(
        inst, force_primal_dual=args.force_primal_dual, seed=args.seed
    )
    opt = None
    if inst.n <= _AUTO_ORACLE_MAX_N and enumeration_tractable(inst):
        _, opt = brute_force_opt(inst)
    report = audit(inst, result, oracle_opt=opt)
    save_result(result, args.output)
    if args.emit_plot_data:
        save_plot_data(inst, result, args.emit_plot_data)
    print(f"branch {result.branch.value}  clusters {len(result.clusters)}  "
          f"outliers {len(result.outliers)}  cost {result.total_cost:.17g}")
    for line in report.lines():
        print(line)
    return 0 if report.ok else 1


def _cmd_oracle(args) -> int:
    inst = load_instance(args.input, args.mode, args.k, args.nprime, args.epsilon)
    clusters, cost = brute_force_opt(inst)
    print(f"opt_cost {cost:.17g}")
    for c in clusters:
        print("cluster " + " ".join(str(i) for i in sorted(c)))
    outliers = sorted(set(range(inst.n)) - set().union(*clusters) if clusters else set(range(inst.n)))
    print("outliers " + " ".join(str(i) for i in outliers))
    return 0


def _cmd_verify(args) -> int:
    result = load_result(args.result)
    inst = load_instance(
        args.input, result.mode, result.k, result.n_prime, result.epsilon
    )
    if inst.n != result.n:
        print(f"error: result was computed on n={result.n}, input has n={inst.n}",
              file=sys.stderr)
        return 2
    report = audit(inst, result)
    for line in report.lines():
        print(line)
    return 0 if report.ok else 1


def _cmd_gen(args) -> int:
    spec = _spec_from_args(args)
    inst = generate(spec)
    if inst.mode is DistanceMode.SQEUCLIDEAN:
        save_points(inst.points, args.output)
    else:
        save_points(inst.dist_matrix, args.output)
    print(f"wrote {inst.n} {'points' if inst.points is not None else 'matrix rows'} "
          f"to {args.output}")
    return 0


def _spec_from_args(args) -> GeneratorSpec:
    family = args.family
    if family == "rings":
        params = {
            "radii": _floats(args.radii),
            "counts": _ints(args.counts),
            "noise": args.noise,
        }
    elif family == "gauss":
        params = {
            "centers": [_floats(c) for c in args.centers.split(";") if c],
            "spreads": _floats(args.spreads),
            "counts": _ints(args.counts),
        }
    elif family == "box":
        params = {"n": args.n, "dims": _floats(args.dims)}
    else:
        params = {"n": args.n, "embed_dim": args.embed_dim}
    return GeneratorSpec(family=family, seed=args.seed, params=params)


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.replace(",", " ").split()]


def _cmd_bench(args) -> int:
    from .oracle import AuditReport  # noqa: F401  (re-exported for reports)

    failures = 0
    print("seed family   mode      n  k  n'  eps   cost          opt           ratio    ok")
    for seed in range(args.seeds):
        inst, label = _bench_instance(seed)
        result = min_sum_clustering(inst)
        _, opt = brute_force_opt(inst)
        report = audit(inst, result, oracle_opt=opt)
        ok = report.ok
        failures += 0 if ok else 1
        ratio = report.cost_ratio if report.cost_ratio is not None else float("nan")
        print(
            f"{seed:4d} {label:8s} {inst.mode.value:8s} {inst.n:3d} {inst.k:2d} "
            f"{inst.n_prime:3d} {inst.epsilon:4.2f}  {result.total_cost:<13.6g} "
            f"{opt:<13.6g} {ratio:<8.4g} {'yes' if ok else 'NO'}"
        )
    print(f"{args.seeds - failures}/{args.seeds} runs passed")
    return 0 if failures == 0 else 1


def _bench_instance(seed: int):
    """Small, varied seeded instances for the bench suite."""
    import numpy as np

    rng = np.random.default_rng(1000 + seed)
    n = int(rng.integers(6, 11))
    k = int(rng.integers(2, 4))
    n_prime = n - int(rng.integers(0, 3))
    epsilon = [0.5, 1.0][seed % 2]
    family = FAMILIES[seed % len(FAMILIES)]
    if family == "rings":
        params = {"radii": [1.0, 4.0], "counts": [n // 2, n - n // 2], "noise": 0.1}
    elif family == "gauss":
        params = {
            "centers": [[0.0, 0.0], [5.0, 1.0]],
            "spreads": [0.6, 0.6],
            "counts": [n // 2, n - n // 2],
        }
    elif family == "box":
        params = {"n": n, "dims": [2.0, 2.0]}
    else:
        params = {"n": n, "embed_dim": 3}
    spec = GeneratorSpec(
        family=family, seed=seed, params=params, k=k,
        n_prime=max(k, n_prime), epsilon=epsilon,
    )
    return generate(spec), family


if __name__ == "__main__":
    sys.exit(main())
