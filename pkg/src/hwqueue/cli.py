"""Command-line entry point.

    hwq <subcommand> --config <path> [--out <path>] [--seed <u64>] [--threads <k>]

Subcommands: run (kind taken from the config), simulate, bound, gaussian,
validate, compare, renewal (grid dump), and limits (closed-form values, no
config file).  HWQ_THREADS is the fallback for --threads.  Exit codes:
0 ok, 2 config error, 3 infeasible parameters, 4 invariant violation.
"""

from __future__ import annotations

import argparse
import io
import os
import sys

from . import __version__, experiments, queue_sim, reference_limits, renewal
from . import distributions as dists
from .experiments import EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_INVARIANT, EXIT_OK


def _common(sub):
    sub.add_argument("--config", required=True, help="JSON experiment config")
    sub.add_argument("--out", default=None, help="output CSV (default stdout)")
    sub.add_argument("--seed", type=int, default=None, help="override config seed")
    sub.add_argument("--threads", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hwq", description=__doc__)
    ap.add_argument("--version", action="version", version=f"hwq {__version__}")
    subs = ap.add_subparsers(dest="command", required=True)

    for name in ("run", "simulate", "bound", "gaussian", "compare",
                 "scaling-large-b", "scaling-small-b", "idle-tail"):
        _common(subs.add_parser(name))

    val = subs.add_parser("validate", help="run the oracle validation suite")
    val.add_argument("--config", default=None)
    val.add_argument("--out", default=None)
    val.add_argument("--seed", type=int, default=0)
    val.add_argument("--threads", type=int, default=None)

    ren = subs.add_parser("renewal", help="dump t, m(t), f(t), V[N^e(t)]")
    ren.add_argument("--config", required=True,
                     help='JSON: {"spec": {...}, "t_max": 10, "step": null}')
    ren.add_argument("--out", required=True)

    lim = subs.add_parser("limits", help="closed-form limit values")
    lim.add_argument("--model", required=True,
                     choices=["h2star", "deterministic", "mm", "mginf"])
    lim.add_argument("--B", type=float, required=True)
    lim.add_argument("--x", type=float, default=0.0)
    lim.add_argument("--p", type=float, default=1.0)
    lim.add_argument("--cA2", type=float, default=1.0)
    lim.add_argument("--cS2", type=float, default=1.0)
    lim.add_argument("--out", default=None)
    return ap


_KIND_FROM_COMMAND = {
    "simulate": "simulate",
    "bound": "bound",
    "gaussian": "gaussian",
    "compare": "compare",
    "scaling-large-b": "scaling_large_B",
    "scaling-small-b": "scaling_small_B",
    "idle-tail": "idle_tail",
}


def _run_limits(args) -> int:
    rows = []
    if args.model in ("h2star", "mm"):
        p = 1.0 if args.model == "mm" else args.p
        cA2 = 1.0 if args.model == "mm" else args.cA2
        cS2 = 1.0 if args.model == "mm" else args.cS2
        up, low = reference_limits.h2star_limits(args.B, args.x, p, cA2, cS2)
        sc = reference_limits.scaling_constants("h2star", p=p, cA2=cA2, cS2=cS2)
        rows.append(("upper_tail", up))
        rows.append(("lower_tail", low))
    elif args.model == "deterministic":
        est = reference_limits.gid_limit_mc(args.B, args.cA2, args.x)
        sc = reference_limits.scaling_constants("deterministic", cA2=args.cA2)
        rows.append(("upper_tail_mc", est.point))
        rows.append(("upper_tail_stderr", est.stderr))
    else:
        rows.append(("phi_bound", reference_limits.mginf_bound(args.B, args.x)))
        sc = None
    if sc is not None:
        rows.append(("large_B_rate", sc.large_B_rate))
        rows.append(("small_B_rate", sc.small_B_rate))
        rows.append(("idle_tail_rate", sc.idle_tail_rate))
    buf = io.StringIO()
    buf.write(f"# hwqueue_version={__version__}\n")
    buf.write("quantity,value\n")
    for k, v in rows:
        buf.write(f"{k},{v:.10g}\n")
    text = buf.getvalue()
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        print(text, end="")
    return EXIT_OK


def _run_renewal(args) -> int:
    import json

    with open(args.config) as fh:
        data = json.load(fh)
    spec = dists.from_config(data["spec"])
    renewal.dump_grid_csv(spec, float(data["t_max"]), args.out, data.get("step"))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "limits":
            return _run_limits(args)
        if args.command == "renewal":
            return _run_renewal(args)
        if args.command == "validate" and args.config is None:
            cfg = experiments.ExperimentConfig.from_dict(
                {"kind": "validate", "seed": args.seed}
            )
        else:
            cfg = experiments.ExperimentConfig.from_file(args.config)
        if getattr(args, "seed", None) is not None and args.command != "validate":
            if args.seed is not None:
                data = dict(cfg.raw)
                data["seed"] = args.seed
                cfg = experiments.ExperimentConfig.from_dict(data)
        if args.command in _KIND_FROM_COMMAND:
            want = _KIND_FROM_COMMAND[args.command]
            if cfg.kind != want:
                raise queue_sim.ConfigError(
                    f"config kind {cfg.kind!r} does not match subcommand "
                    f"({want!r}); use 'hwq run' for mixed configs"
                )
        threads = args.threads
        if threads is None:
            threads = int(os.environ.get("HWQ_THREADS", "1"))
        return experiments.run(cfg, args.out, threads)
    except (queue_sim.ConfigError, dists.DistributionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (queue_sim.FeasibilityError, queue_sim.StabilityError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (experiments.InvariantViolation, renewal.RenewalSolverError) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
