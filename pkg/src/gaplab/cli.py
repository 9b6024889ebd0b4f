"""Command-line front end.

Subcommands mirror the library surface: spectral reports, local gaps, segment
layouts, coarse-graining and detectability verifiers, the step-polynomial
scan, threshold bounds, absorption probing, model dumps, and the config
runner.  All randomized commands require --seed.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import bounds, chebyshev, coarsegrain, detectability, harness, models, spectral
from .errors import GaplabError, SchemaError
from .harness import _plain, write_csv
from .operators import assemble


def _model_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--model",
        required=True,
        choices=["heisenberg", "ferro-lattice", "mixed", "random-ff", "file"],
        help="bundled model family or 'file' for a saved model",
    )
    parser.add_argument("--n", type=int, help="chain length (heisenberg, mixed)")
    parser.add_argument("--k", type=int, help="ferromagnetic prefix length (mixed)")
    parser.add_argument("--axes", type=int, nargs="+", help="axis lengths (ferro-lattice, random-ff)")
    parser.add_argument("--boundary", default="open", choices=["open", "periodic"])
    parser.add_argument("--interaction-range", type=int, default=2, help="window side (random-ff)")
    parser.add_argument("--excluded-rank", type=int, default=1, help="projector rank (random-ff)")
    parser.add_argument("--path", help="model file path (file)")


def _build_model(args) -> "models.LatticeHamiltonian":
    if args.model == "heisenberg":
        if args.n is None:
            raise SchemaError("--model heisenberg requires --n")
        return models.heisenberg_chain(args.n, args.boundary)
    if args.model == "ferro-lattice":
        if not args.axes:
            raise SchemaError("--model ferro-lattice requires --axes")
        return models.decoupled_ferro_lattice(args.axes)
    if args.model == "mixed":
        if args.n is None or args.k is None:
            raise SchemaError("--model mixed requires --n and --k")
        return models.mixed_chain(args.n, args.k)
    if args.model == "random-ff":
        if not args.axes:
            raise SchemaError("--model random-ff requires --axes")
        if args.seed is None:
            raise SchemaError("--model random-ff requires --seed")
        return models.random_frustration_free(
            args.axes, args.interaction_range, args.excluded_rank, args.seed, args.boundary
        )
    if args.path is None:
        raise SchemaError("--model file requires --path")
    return models.LatticeHamiltonian.load(args.path)


def _emit(args, payload: dict | list) -> None:
    text = json.dumps(_plain(payload), indent=1, sort_keys=True) + "\n"
    if getattr(args, "json", None) and args.json != "-":
        with open(args.json, "w") as fh:
            fh.write(text)
        print(f"wrote {args.json}")
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaplab",
        description="Spectral-gap threshold laboratory for frustration-free lattice models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, model=True, seed_required=False):
        if model:
            _model_arguments(p)
        p.add_argument("--seed", type=int, required=seed_required, help="seed for any randomness")
        p.add_argument("--method", default="auto", choices=["auto", "dense", "krylov"])
        p.add_argument("--json", help="write the JSON report here ('-' for stdout)")

    p = sub.add_parser("gap", help="spectral report of the assembled model")
    common(p)

    p = sub.add_parser("local-gap", help="minimum gap over length-t windows")
    common(p)
    p.add_argument("--t", type=int, required=True)

    p = sub.add_parser("layout", help="segment layout for a chain of n sites")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--chain-boundary", default="open", choices=["open", "closed"])
    p.add_argument("--ascii", action="store_true", help="render the segment diagram")
    p.add_argument("--json", help="write the JSON layout here ('-' for stdout)")

    p = sub.add_parser("coarse", help="coarse-graining checks")
    coarse_sub = p.add_subparsers(dest="subcommand", required=True)
    pv = coarse_sub.add_parser("verify", help="gap link, kernel coincidence, light cone")
    common(pv)
    pv.add_argument("--t", type=int, required=True)

    p = sub.add_parser("dl", help="detectability operator checks")
    dl_sub = p.add_subparsers(dest="subcommand", required=True)
    pv = dl_sub.add_parser("verify", help="contraction bound and converse")
    common(pv)
    pv.add_argument("--constant", type=int, choices=[3, 4], help="also check the converse at this constant")

    p = sub.add_parser("cheb", help="step polynomial checks")
    cheb_sub = p.add_subparsers(dest="subcommand", required=True)
    pv = cheb_sub.add_parser("verify", help="scan the shrinking bound over an (m, nu) grid")
    pv.add_argument("--m", type=float, nargs="+", default=list(chebyshev.DEFAULT_M_GRID))
    pv.add_argument("--nu", type=float, nargs="+", default=list(chebyshev.DEFAULT_NU_GRID))
    pv.add_argument("--x-samples", type=int, default=10_000)
    pv.add_argument("--csv", help="write (m, nu, max|step|, bound, margin) rows here")
    pv.add_argument("--json", help="write the JSON report here ('-' for stdout)")

    p = sub.add_parser("bounds", help="threshold bounds")
    bounds_sub = p.add_subparsers(dest="subcommand", required=True)
    pv = bounds_sub.add_parser("verify", help="headline threshold bound plus comparisons")
    common(pv)
    pv.add_argument("--t", type=int, nargs="+", required=True)
    pv.add_argument("--sizes", type=int, nargs="+", help="hyper-rectangle sizes for lattices")
    ps = bounds_sub.add_parser("sweep", help="CSV sweep of local gaps over t")
    common(ps)
    ps.add_argument("--t", type=int, nargs="+", required=True)
    ps.add_argument("--csv", help="write sweep rows here")

    p = sub.add_parser("absorb", help="absorption identity probing")
    common(p, seed_required=True)
    p.add_argument("--s-interval", type=int, nargs=2, required=True, metavar=("LO", "HI"))
    p.add_argument("--t-interval", type=int, nargs=2, required=True, metavar=("LO", "HI"))
    p.add_argument("--q", type=int, default=1)
    p.add_argument("--probes", type=int, default=10)

    p = sub.add_parser("model", help="model utilities")
    model_sub = p.add_subparsers(dest="subcommand", required=True)
    pd = model_sub.add_parser("dump", help="write the model file (documented schema)")
    _model_arguments(pd)
    pd.add_argument("--seed", type=int, help="seed for random models")
    pd.add_argument("--out", help="output path (stdout if omitted)")

    p = sub.add_parser("run", help="execute a config of named checks")
    p.add_argument("config", nargs="?", help="config file path")
    p.add_argument("--bundled", help="name of a bundled config (e.g. verify-all-small)")
    p.add_argument("--out", default="gaplab-out", help="output directory")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except (GaplabError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    seed = getattr(args, "seed", None) or 0

    if args.command == "gap":
        lattice = _build_model(args)
        rep = spectral.spectrum(assemble(lattice), method=args.method, seed=seed)
        _emit(args, rep.to_dict())
        return 0

    if args.command == "local-gap":
        lattice = _build_model(args)
        value = bounds.local_gap_1d(lattice, args.t, method=args.method, seed=seed)
        _emit(args, {"t": args.t, "local_gap": value})
        return 0

    if args.command == "layout":
        layout = coarsegrain.segment_layout(args.n, args.t, args.chain_boundary)
        if args.ascii:
            print(layout.ascii_art())
        if args.json or not args.ascii:
            _emit(args, layout.to_dict())
        return 0

    if args.command == "coarse":
        lattice = _build_model(args)
        boundary = "closed" if lattice.boundary[0] == "periodic" else "open"
        layout = coarsegrain.segment_layout(lattice.n_sites, args.t, boundary)
        cg = coarsegrain.coarse_grain(lattice, layout, method=args.method, seed=seed)
        link = coarsegrain.gap_link_check(lattice, layout, cg=cg, method=args.method, seed=seed)
        kernel = coarsegrain.kernel_match_report(lattice, cg, method=args.method, seed=seed)
        cone = coarsegrain.lightcone_lower_check(lattice, layout, cg=cg, method=args.method, seed=seed)
        payload = {"gap_link": link, "kernel": kernel, "lightcone": cone}
        _emit(args, payload)
        return 0 if link["passed"] and kernel["passed"] and cone["passed"] else 1

    if args.command == "dl":
        lattice = _build_model(args)
        reports = [detectability.verify_detectability(lattice, method=args.method, seed=seed)]
        if args.constant:
            reports.append(
                detectability.verify_converse(lattice, args.constant, method=args.method, seed=seed)
            )
        _emit(args, reports)
        return 0 if all(r["passed"] for r in reports) else 1

    if args.command == "cheb":
        rep = chebyshev.verify_step_claim(tuple(args.m), tuple(args.nu), args.x_samples)
        if args.csv:
            write_csv(args.csv, rep.rows)
            print(f"wrote {args.csv}")
        _emit(args, rep.to_dict())
        return 0 if rep.passed else 1

    if args.command == "bounds":
        lattice = _build_model(args)
        if args.subcommand == "sweep":
            rows = bounds.sweep_local_gaps(lattice, args.t, method=args.method, seed=seed)
            if args.csv:
                write_csv(args.csv, rows)
                print(f"wrote {args.csv}")
            else:
                _emit(args, rows)
            return 0
        reports = []
        for t in args.t:
            if lattice.n_axes == 1:
                reports.append(bounds.verify_threshold_1d(lattice, t, method=args.method, seed=seed))
                reports.extend(bounds.comparison_bounds(lattice, [t], method=args.method, seed=seed))
        if args.sizes:
            reports.append(
                bounds.verify_threshold_lattice(lattice, args.sizes, method=args.method, seed=seed)
            )
        _emit(args, [r.to_dict() for r in reports])
        return 0 if all(r.holds for r in reports if r.holds is not None) else 1

    if args.command == "absorb":
        lattice = _build_model(args)
        rep = coarsegrain.absorption_check(
            lattice,
            tuple(args.s_interval),
            tuple(args.t_interval),
            args.q,
            probes=args.probes,
            seed=args.seed,
        )
        _emit(args, rep)
        return 0 if rep["passed"] else 1

    if args.command == "model":
        args.method = "auto"
        lattice = _build_model(args)
        payload = lattice.to_dict()
        if args.out:
            lattice.save(args.out)
            print(f"wrote {args.out}")
        else:
            print(json.dumps(payload, indent=1, sort_keys=True))
        return 0

    if args.command == "run":
        if bool(args.config) == bool(args.bundled):
            raise SchemaError("provide exactly one of CONFIG path or --bundled NAME")
        config = harness.bundled_config(args.bundled) if args.bundled else harness.load_config(args.config)
        return harness.run(config, args.out)

    raise SchemaError(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
