import argparse
import logging
import sys
from typing import Any, Dict, List, Optional, Sequence

from interchange_workshop import PROJECT_NAME, __version__
from interchange_workshop.errors import ConfigError
from interchange_workshop.experiment_manager import EXIT_INPUT, run_experiment
from interchange_workshop.settings_manager import SettingsManager
from interchange_workshop.specs.data_models import ExperimentCommand

logger = logging.getLogger("interchange_workshop.main")


def _int_list(text: str) -> List[int]:
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def _float_list(text: str) -> List[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def _global_flags() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    group = shared.add_argument_group("run settings")
    group.add_argument("--config", type=str, default=None, help="YAML file of settings; flags override it")
    group.add_argument("--out", type=str, default=None, help="Directory for CSV and matrix outputs (default: outputs)")
    group.add_argument("--threads", type=int, default=None, help="Worker threads for sweeps (default: 1)")
    group.add_argument("--seed", type=int, default=None, help="64-bit seed for every random stream (default: 0)")
    group.add_argument("--log-level", type=str, default=None, help="Logging level on standard error (default: INFO)")
    group.add_argument("--tol", type=float, default=None, help="Solver tolerance (default: 1e-12)")
    group.add_argument("--eps", type=float, default=None, help="Poisson truncation tolerance (default: 1e-12)")
    group.add_argument("--cap", type=float, default=None, help="Divergence cap for value iteration (default: 1e12)")
    group.add_argument("--eps-mix", type=float, default=None, help="Mixing tolerance choosing the bound horizon (default: 1e-3)")
    group.add_argument("--max-steps", type=int, default=None, help="Step budget for iterations and walks (default: 100000)")
    return shared


def _chain_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--kernel", type=str, default=None, help="Kernel as name or name:key=value,... (default: birth-death)")
    parser.add_argument("--n-list", type=_int_list, default=None, help="Truncation sizes, comma-separated (default: 10,20,40,80,160)")
    parser.add_argument("--n-ref", type=int, default=None, help="Reference truncation size (default: 2000)")
    parser.add_argument("--scheme", type=str, default=None, help="redirect[:z], proportional or self_loop (default: redirect:0)")
    parser.add_argument("--x", type=_float_list, default=None, help="Start point(s), comma-separated (default: 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="interchange-workshop",
        description=f"{PROJECT_NAME}: truncation, stationarity and interchange diagnostics for Markov chains",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    shared = _global_flags()
    commands = parser.add_subparsers(dest="command", required=True)

    def command(name: ExperimentCommand, help_text: str) -> argparse.ArgumentParser:
        sub = commands.add_parser(name.value, parents=[shared], help=help_text, description=help_text)
        sub.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
        return sub

    sweep = command(ExperimentCommand.TRUNCATE_SWEEP, "Truncate a kernel at each n and write the matrices")
    _chain_flags(sweep)

    stationary = command(ExperimentCommand.STATIONARY, "Stationary law of a matrix file by GTH, cross-checked by power iteration")
    stationary.add_argument("--matrix-file", type=str, default=None, help="Matrix in mc-matrix v1 format")
    stationary.add_argument("--x", type=_float_list, default=None, help="Start state of the power iteration (default: 0)")
    stationary.add_argument("--cesaro", action="store_true", default=None, help="Average the power iterates")

    interchange = command(ExperimentCommand.INTERCHANGE, "Sup-in-time TV and certified bound of each truncation against the reference")
    _chain_flags(interchange)
    interchange.add_argument("--horizon", type=int, default=None, help="Steps M for the finite-horizon sup (default: 1000)")
    interchange.add_argument("--bound-horizon", type=int, default=None, help="Horizon t of the certified bound (default: first m with TV to stationarity < eps-mix)")
    interchange.add_argument("--weight", type=str, default=None, help="Weight function: ones, linear or quadratic")
    interchange.add_argument("--threshold-b", type=float, default=None, help="Threshold b of the weighted bound (default: automatic)")

    fte = command(ExperimentCommand.FTE, "First-transition expectations by value iteration, linear solve and regenerative ratio")
    _chain_flags(fte)
    fte.add_argument("--matrix-file", type=str, default=None, help="Use a matrix file instead of a kernel")
    fte.add_argument("--target-set", type=_int_list, default=None, help="Stopping states, comma-separated (default: 0)")
    fte.add_argument("--alpha", type=float, default=None, help="Constant discount rate (default: 0)")
    fte.add_argument("--reward", choices=["indicator", "ones", "file"], default=None, help="Reward: 1 off the target set, 1 everywhere, or from --reward-file")
    fte.add_argument("--reward-file", type=str, default=None, help="'state value' lines; unlisted states get 0")
    fte.add_argument("--method", choices=["vi", "linear", "ratio", "all"], default=None, help="Solver(s) to run (default: all)")

    ctmc = command(ExperimentCommand.CTMC, "Transient-law comparison and certified bound for truncated generators")
    _chain_flags(ctmc)
    ctmc.add_argument("--time-horizon", type=float, default=None, help="End of the time grid (default: 20)")
    ctmc.add_argument("--time-step", type=float, default=None, help="Spacing of the time grid (default: 0.1)")
    ctmc.add_argument("--skeleton-step", type=float, default=None, help="Step of the skeleton chain (default: 1)")
    ctmc.add_argument("--bound-horizon", type=int, default=None, help="Skeleton horizon t (default: automatic)")
    ctmc.add_argument("--rates-file", type=str, default=None, help="Generator in mc-rates v1 format instead of a kernel")
    ctmc.add_argument("--initial-file", type=str, default=None, help="'state mass' initial law; with --rates-file, writes its law at --time-horizon")
    ctmc.add_argument("--target-set", type=_int_list, default=None, help="States ending the reward integral (default: 0)")
    ctmc.add_argument("--alpha", type=float, default=None, help="Constant discount rate (default: 0)")
    ctmc.add_argument("--reward", choices=["indicator", "ones", "file"], default=None, help="Reward rate: 1 off the target set, 1 everywhere, or from --reward-file")
    ctmc.add_argument("--reward-file", type=str, default=None, help="'state value' lines; unlisted states get 0")

    counterexample = command(ExperimentCommand.COUNTEREXAMPLE, "Halving chain: mass at 1 after the jump and W1 distance of pi_n to delta_0")
    counterexample.add_argument("--n-list", type=_int_list, default=None, help="Levels n, comma-separated")
    counterexample.add_argument("--x", type=_float_list, default=None, help="Start point(s) in (0, 1]")

    lindley = command(ExperimentCommand.LINDLEY, "Coupled distance of waiting-time chains to their limit")
    lindley.add_argument("--drift-family", type=str, default=None, help="uniform-shift, two-point or deterministic")
    lindley.add_argument("--n-list", type=_int_list, default=None, help="Family members n, comma-separated")
    lindley.add_argument("--horizon", type=int, default=None, help="Steps of each coupled path")
    lindley.add_argument("--samples", type=int, default=None, help="Coupled paths (at least 100)")
    lindley.add_argument("--streams", type=int, default=None, help="Independent random streams (default: 1)")
    lindley.add_argument("--x", type=_float_list, default=None, help="Start point (default: 0)")

    ifs = command(ExperimentCommand.IFS, "Backward iteration of random contractions against its tail bound")
    ifs.add_argument("--ifs-family", type=str, default=None, help="random-affine or deterministic-affine")
    ifs.add_argument("--depth-list", type=_int_list, default=None, help="Depths k, comma-separated (default: 1,5,10)")
    ifs.add_argument("--samples", type=int, default=None, help="Backward compositions per depth")
    ifs.add_argument("--x", type=_float_list, default=None, help="Start point (default: 0)")
    return parser


_TOLERANCE_FLAGS = {"tol": "tol", "eps": "eps", "cap": "cap", "eps_mix": "eps_mix"}
_NON_CONFIG_FLAGS = {"command", "config", "log_level", *_TOLERANCE_FLAGS}


def _flags_from(args: argparse.Namespace) -> Dict[str, Any]:
    values = vars(args)
    flags = {key: value for key, value in values.items() if key not in _NON_CONFIG_FLAGS}
    tolerances = {
        field: values[flag] for flag, field in _TOLERANCE_FLAGS.items() if values.get(flag) is not None
    }
    if tolerances:
        flags["tolerances"] = tolerances
    return flags


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = (args.log_level or SettingsManager.log_level()).upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        config = SettingsManager().build(args.command, _flags_from(args), args.config)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_INPUT
    return run_experiment(config)


if __name__ == "__main__":
    sys.exit(main())
