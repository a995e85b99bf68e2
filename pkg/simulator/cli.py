"""
Command-line entry point

    python run.py validate-mixing --matrix W.txt [--adjacency A.txt]
    python run.py chain-spectra --matrix H.txt
    python run.py run --config run.cfg --out output/
    python run.py figure1 --config fig1.cfg --out output/ --jobs 4
    python run.py gradcheck --config run.cfg

Exit codes: 0 success, 1 validation or run failure, 2 usage or config error.
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
from loguru import logger

from config import settings
from config.run_config import ConfigFileError, RunConfig, describe_keys, load_run_config
from config.settings import FD_RELATIVE_TOLERANCE, MAX_JOBS, OUTPUT_DIR
from utils.matrix_io import read_matrix, write_trajectory
from utils.seeding import Purpose, derive_stream

from .exceptions import ChainError, ConfigError, GraphError, SimulatorError
from .graph_topology import CommGraph, build_graph, metropolis_weights, validate_mixing
from .markov_sampler import (
    build_explicit_chain,
    fit_deviation_constant,
    sample_path,
    tv_mixing_time,
    validate_chain,
)
from .metrics_harness import emit_csv, figure1_experiment, render_summary
from .objectives import QuadraticSum, StreamingLogistic, gradient_check
from .optimizers import build_chain, run

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


def setup_logging(verbose: bool = False) -> None:
    """Route every log record to stderr at LOG_LEVEL (DEBUG with -v)"""
    settings.configure_logging("DEBUG" if verbose else None)


def load_config(args) -> RunConfig:
    """Load --config with the --seed and --cadence flags applied on top"""
    return load_run_config(args.config, {"seed": args.seed, "cadence": args.cadence})


def _emit(text: str) -> None:
    sys.stdout.write(text + "\n")


# -- subcommands ----------------------------------------------------------------

def cmd_validate_mixing(args) -> int:
    if args.matrix:
        W = read_matrix(args.matrix)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise GraphError(f"{args.matrix}: mixing matrix must be square, got shape {W.shape}")
        if args.adjacency:
            graph = CommGraph.from_adjacency(read_matrix(args.adjacency))
        else:
            support = np.abs(W) > settings.STRUCTURAL_TOLERANCE
            np.fill_diagonal(support, False)
            try:
                graph = CommGraph.from_adjacency(support | support.T)
            except GraphError as e:
                logger.error(f"support graph of {args.matrix}: {e}")
                return EXIT_FAILED
    elif args.config:
        config = load_config(args)
        graph = build_graph(config.topology, config.nodes, seed=config.seed, edge_prob=config.edge_prob)
        W = metropolis_weights(graph).W
    else:
        raise ConfigError("validate-mixing needs --matrix or --config")

    report = validate_mixing(W, graph)
    _emit(report.render())
    if report.passed:
        eigenvalues = np.sort(np.linalg.eigvalsh(W))[::-1]
        second = max(abs(eigenvalues[1]), abs(eigenvalues[-1])) if len(eigenvalues) > 1 else 0.0
        _emit(f"lambda2: {second:.17g}")
        _emit(f"spectral_gap: {1.0 - second:.17g}")
        return EXIT_OK
    logger.error(f"mixing matrix fails: {', '.join(report.failures())}")
    return EXIT_FAILED


def cmd_chain_spectra(args) -> int:
    if args.matrix:
        H = read_matrix(args.matrix)
        report = validate_chain(H)
        _emit(report.render())
        if not report.passed:
            logger.error(f"transition matrix fails: {', '.join(report.failures())}")
            return EXIT_FAILED
        chain = build_explicit_chain(H)
    elif args.config:
        config = load_config(args)
        try:
            chain = build_chain(config)
        except ChainError as e:
            _emit(f"{e.prop or 'chain'}: FAIL ({e})")
            logger.error(str(e))
            return EXIT_FAILED
        _emit(validate_chain(chain.H).render())
    else:
        raise ConfigError("chain-spectra needs --matrix or --config")

    _emit("pi_star: " + " ".join(f"{p:.17g}" for p in chain.pi_star))
    _emit(f"lambda2_abs: {chain.lambda2_abs:.17g}")
    _emit(f"lambda_min: {chain.lambda_min:.17g}")
    _emit(f"lambda_hat: {chain.lambda_hat:.17g}")
    _emit(f"deviation_constant: {fit_deviation_constant(chain):.17g}")
    mixing = tv_mixing_time(chain)
    _emit(f"tv_mixing_time: {'none' if mixing is None else mixing}")

    if args.path_steps:
        seed = settings.resolve_seed(args.seed)
        path = sample_path(chain, 0, args.path_steps, derive_stream(seed, Purpose.CHAIN, 0))
        out = Path(args.out or OUTPUT_DIR) / "trajectory.txt"
        write_trajectory(out, path.tolist())
        logger.info(f"wrote {args.path_steps} states to {out}")
    return EXIT_OK


def _run_label(config: RunConfig) -> str:
    return f"dsgd_t{config.T}" if config.algorithm == "dsgd_t" else config.algorithm


def cmd_run(args) -> int:
    config = load_config(args)
    out_dir = Path(args.out or OUTPUT_DIR)
    record = run(config)
    path = emit_csv(record, out_dir / f"{_run_label(config)}_seed{config.seed}.csv")
    final = record.final()
    _emit(str(path))
    _emit(
        f"k={final.k} consensus_error={final.consensus_error:.6e} "
        f"grad_norm={final.grad_norm:.6e} objective_error={final.objective_error:.6e}"
    )
    return EXIT_OK


def cmd_figure1(args) -> int:
    config = load_config(args)
    out_dir = Path(args.out or OUTPUT_DIR)
    summary = figure1_experiment(config, out_dir, jobs=args.jobs or MAX_JOBS, scale=args.scale)
    _emit(render_summary(summary))
    _emit(str(out_dir / "summary.csv"))
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    config = load_config(args) if args.config else RunConfig(seed=settings.resolve_seed(args.seed))
    if config.objective == "logistic":
        objective = StreamingLogistic.build(
            config.nodes, config.dimension, config.seed,
            clip_radius=config.clip_radius, reference_samples=min(config.reference_samples, 1000),
            solve_reference=False,
        )
    else:
        objective = QuadraticSum.random(config.nodes, config.chain_states, config.dimension, config.seed, spread=config.spread)
    error = gradient_check(objective, trials=args.trials, seed=config.seed)
    passed = error <= FD_RELATIVE_TOLERANCE
    _emit(f"{config.objective}: max relative error {error:.3e} ({'PASS' if passed else 'FAIL'})")
    return EXIT_OK if passed else EXIT_FAILED


# -- parser ---------------------------------------------------------------------

def _keys_epilog() -> str:
    return "config keys (key=value lines, '#' comments):\n" + describe_keys()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dmgd-sim",
        description="Decentralized Markov-chain gradient descent simulator",
        epilog=_keys_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name: str, help_text: str, config_required: bool = False) -> argparse.ArgumentParser:
        sub = subparsers.add_parser(
            name, help=help_text, description=help_text,
            epilog=_keys_epilog(), formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        sub.add_argument("--config", required=config_required, help="run config file")
        sub.add_argument("--out", help=f"output directory (default {OUTPUT_DIR})")
        sub.add_argument("--seed", type=int, help="base seed; overrides DMGD_SIM_SEED and the config")
        sub.add_argument("--cadence", type=int, help="record a row every N rounds (run, figure1)")
        sub.add_argument("--jobs", type=int, help=f"worker cap for figure1 (default DMGD_SIM_JOBS={MAX_JOBS})")
        sub.add_argument("-v", "--verbose", action="store_true", help="debug logging")
        return sub

    sub = add("validate-mixing", "check a mixing matrix against its communication graph")
    sub.add_argument("--matrix", help="mixing matrix file (plain-text matrix format)")
    sub.add_argument("--adjacency", help="adjacency file; default: the off-diagonal support of the matrix")
    sub.set_defaults(handler=cmd_validate_mixing)

    sub = add("chain-spectra", "validate a transition matrix and report its stationary law and decay rates")
    sub.add_argument("--matrix", help="transition matrix file (plain-text matrix format)")
    sub.add_argument("--path-steps", type=int, default=0, help="also dump a trajectory of this many steps")
    sub.set_defaults(handler=cmd_chain_spectra)

    sub = add("run", "execute one configured run and write its metrics CSV", config_required=True)
    sub.set_defaults(handler=cmd_run)

    sub = add("figure1", "compare dmgd, mcgd and dsgd_t at a shared sample budget", config_required=True)
    sub.add_argument("--scale", choices=sorted(settings.EXPERIMENT_SCALES), help="override the config scale")
    sub.set_defaults(handler=cmd_figure1)

    sub = add("gradcheck", "compare analytic gradients with central differences")
    sub.add_argument("--trials", type=int, default=100, help="random (component, point) pairs")
    sub.set_defaults(handler=cmd_gradcheck)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    setup_logging(args.verbose)
    try:
        return args.handler(args)
    except (ConfigFileError, ConfigError) as e:
        logger.error(f"{args.command}: {e}")
        return EXIT_USAGE
    except SimulatorError as e:
        logger.error(f"{args.command}: {e}")
        return EXIT_FAILED
    except (OSError, ValueError) as e:
        logger.error(f"{args.command}: {e}")
        return EXIT_USAGE
