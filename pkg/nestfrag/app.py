import argparse
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import nestfrag
import nestfrag.globals as globals
import nestfrag.utils.mass_partitions.mass_partitions as mass_partitions
import nestfrag.utils.paintbox.paintbox as paintbox
import nestfrag.utils.partitions.partitions as partitions
import nestfrag.utils.rates.rates as rates
import nestfrag.utils.simulator.simulator as simulator
import nestfrag.utils.tree_export.tree_export as tree_export
import nestfrag.utils.verify.verify as verify
from nestfrag.errors import NestFragError

logger = logging.getLogger(__name__)

CHECKS = ("exchangeability", "consistency", "empirical", "binary", "lln")


@dataclass(frozen=True)
class RunConfig:
    """Echo of one invocation, embedded in every artifact header."""

    command: str
    params: str = None
    n: int = None
    initial: str = None
    horizon: float = None
    max_events: int = None
    seed: int = None
    out: str = None
    replicas: int = None
    state: str = None
    check: str = None
    m: int = None
    jumps: int = None
    trajectory: str = None
    frequencies: str = None

    def to_dict(self):
        return {k: v for k, v in asdict(self).items() if v is not None}


class _Parser(argparse.ArgumentParser):
    # usage errors become NestFragError instead of exiting
    def error(self, message):
        raise NestFragError("USAGE", message)


def build_parser():
    parser = _Parser(prog="nestfrag", description="Simulate and verify nested fragmentations")
    parser.add_argument("--config", help="YAML configuration file")
    parser.add_argument("--log-level", type=str.upper, default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    sim = sub.add_parser("simulate", help="simulate the restricted chain")
    sim.add_argument("--params", required=True)
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--initial", help="starting state as 'zeta ; xi'")
    sim.add_argument("--horizon", type=float)
    sim.add_argument("--max-events", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--out", required=True, help="output stem")
    sim.add_argument("--replicas", type=int, default=1)
    sim.add_argument("--log-null-events", action="store_true")

    rate = sub.add_parser("rates", help="exact generator row at a state")
    rate.add_argument("--params", required=True)
    rate.add_argument("--state", required=True)

    box = sub.add_parser("paintbox", help="draw one paintbox sample")
    box.add_argument("--s", help="univariate frequencies, comma separated")
    box.add_argument("--p", help="bivariate frequencies as JSON {u, u_bar, s_bar, s_rows}")
    box.add_argument("--n", type=int, required=True)
    box.add_argument("--seed", type=int)

    ver = sub.add_parser("verify", help="run oracle and statistical checks")
    ver.add_argument("--params", required=True)
    ver.add_argument("--check", choices=CHECKS + ("all",), default="all")
    ver.add_argument("--n", type=int, default=3)
    ver.add_argument("--m", type=int)
    ver.add_argument("--jumps", type=int, default=10000)
    ver.add_argument("--seed", type=int)

    tree = sub.add_parser("export-tree", help="species and gene trees of a trajectory")
    tree.add_argument("--trajectory", required=True)
    tree.add_argument("--out", required=True)

    sub.add_parser("serve", help="run the JSON API")
    return parser


def _seed(args):
    if getattr(args, "seed", None) is not None:
        return args.seed
    seed = globals.env_seed()
    return 0 if seed is None else seed


def _header(config):
    return {"version": nestfrag.__version__, "run_config": config.to_dict()}


def _emit(data):
    print(json.dumps(data, indent=2))


def simulate(args):
    params = mass_partitions.load_params(args.params)
    initial = partitions.parse_nested(args.initial) if args.initial else None
    if args.replicas < 1:
        raise NestFragError("USAGE", "--replicas must be at least 1")
    if args.horizon is not None and not math.isfinite(args.horizon):
        args.horizon = None
    seed = _seed(args)
    run_config = RunConfig("simulate", args.params, args.n, args.initial, args.horizon,
                           args.max_events, seed, args.out, args.replicas)
    config = run_config.to_dict()

    def one(replica):
        stem = args.out if args.replicas == 1 else f"{args.out}_r{replica}"
        trajectory = simulator.run(params, args.n, initial, args.horizon, args.max_events, seed,
                                   replica, args.log_null_events, dict(config, stream=replica))
        trajectory.write_jsonl(f"{stem}.jsonl")
        tree_export.write_tree_files(tree_export.export_tree(trajectory), stem, trajectory.run_config)
        return {"stem": stem, "events": len(trajectory.events), "end_time": trajectory.end_time,
                "final": partitions.format_nested(trajectory.final_state)}

    with ThreadPoolExecutor(max_workers=globals.CONFIG['replica_workers']) as pool:
        summaries = list(pool.map(one, range(args.replicas)))
    _emit({"header": _header(run_config), "runs": summaries})
    return 0


def show_rates(args):
    params = mass_partitions.load_params(args.params)
    state = partitions.parse_nested(args.state)
    header = _header(RunConfig("rates", params=args.params, state=args.state))
    _emit(dict(header=header, **rates.row_to_dict(state, rates.generator_row(state, params))))
    return 0


def sample_paintbox(args):
    if (args.s is None) == (args.p is None):
        raise NestFragError("USAGE", "give exactly one of --s and --p")
    seed = _seed(args)
    header = _header(RunConfig("paintbox", n=args.n, seed=seed, frequencies=args.s or args.p))
    rng = paintbox.RngHandle(seed).generator()
    if args.s is not None:
        try:
            raw = [float(x) for x in args.s.split(",") if x.strip()]
        except ValueError:
            raise NestFragError("PARSE", f"bad frequencies {args.s!r}")
        s = mass_partitions.validate_mass(raw)
        sample = paintbox.sample_univariate(s, args.n, rng)
        _emit({"header": header, "partition": str(sample),
               "frequencies": paintbox.empirical_frequencies(sample).to_list()})
        return 0
    try:
        raw = json.loads(args.p)
    except json.JSONDecodeError as e:
        raise NestFragError("PARSE", f"--p is not JSON: {e}")
    p = mass_partitions.canonicalize_bivariate(raw.get("u", []), raw.get("s_rows", []),
                                               raw.get("u_bar", 0.0), raw.get("s_bar", []))
    result = paintbox.sample_inner(p, range(1, args.n + 1), rng)
    _emit({
        "header": header,
        "labels": [str(label) for label in result.labels],
        "state": partitions.format_nested(result.outcome.inner),
        "star_xi_block": result.outcome.star_xi_block,
        "frequencies": paintbox.empirical_frequencies(result.outcome).to_dict(),
    })
    return 0


def run_verify(args):
    params = mass_partitions.load_params(args.params)
    checks = CHECKS if args.check == "all" else (args.check,)
    seed = _seed(args)
    reports = verify.run_checks(params, args.n, seed, checks, jumps=args.jumps, m=args.m)
    header = _header(RunConfig("verify", params=args.params, n=args.n, seed=seed, check=args.check,
                               m=args.m, jumps=args.jumps))
    _emit({"header": header, "reports": [r.to_dict() for r in reports]})
    return 0 if all(r.passed for r in reports) else 1


def export(args):
    trajectory = simulator.Trajectory.read_jsonl(args.trajectory)
    paths = tree_export.write_tree_files(tree_export.export_tree(trajectory), args.out,
                                         trajectory.run_config)
    header = _header(RunConfig("export-tree", out=args.out, trajectory=args.trajectory))
    _emit(dict(paths, header=header))
    return 0


def serve(args):
    import nestfrag.api.flask as api

    logger.info("Starting API on %s:%s", globals.CONFIG['host'], globals.CONFIG['port'])
    api.app.run(host=globals.CONFIG['host'], port=globals.CONFIG['port'])
    return 0


COMMANDS = {
    "simulate": simulate,
    "rates": show_rates,
    "paintbox": sample_paintbox,
    "verify": run_verify,
    "export-tree": export,
    "serve": serve,
}


def init(config_path=None):
    # Load configuration from YAML file
    globals.load_config(config_path)


def main(argv=None):
    """
    Command line entry point.

    Returns:
        int: 0 on success, 1 when a check fails, 2 on usage, configuration or IO errors
    """
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(stream=sys.stderr, level=args.log_level,
                            format="%(asctime)s %(name)s %(levelname)s %(message)s")
        if args.command is None:
            raise NestFragError("USAGE", f"choose a command: {', '.join(COMMANDS)}")
        init(args.config)
        return COMMANDS[args.command](args)
    except NestFragError as e:
        print(json.dumps(e.to_dict()), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
