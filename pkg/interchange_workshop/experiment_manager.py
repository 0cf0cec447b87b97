"""
experiment_manager.py - The Office of the Experiment Manager (Orchestrator)

This module houses the ExperimentManager, which turns one validated
ExperimentConfig into CSV files. Each CLI subcommand has a runner here that
builds the chains it needs, hands them to the departments (truncation,
stationary, interchange, fte, jump, constructions) and writes the rows in n
order. Every CSV starts with a comment line recording the workshop version
and the configuration apart from threads and out, so a rerun with the same
settings gives the same bytes for any thread count and output directory.
"""

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from interchange_workshop import __version__
from interchange_workshop.chain_core import stationarity_residual, tv_between_vectors, tv_distance
from interchange_workshop.constructions import (
    build_generator,
    build_kernel,
    check_ifs_contraction,
    counterexample_chain,
    counterexample_report,
    drift_family,
    ifs_backward,
    ifs_family,
    ifs_tail_gap,
    lindley_coupled_sup_distance,
    lindley_stationary_sample,
)
from interchange_workshop.constructions.lindley import check_drift
from interchange_workshop.errors import (
    ConfigError,
    DimensionError,
    FormatError,
    IllPosedError,
    InterchangeError,
    NonConvergenceError,
    PreconditionError,
    StructureError,
)
from interchange_workshop.fte import (
    linear_solve_fte,
    minimal_solution,
    regenerative_ratio,
    stationary_weighted_mean,
)
from interchange_workshop.interchange import (
    auto_mixing_horizon,
    auto_threshold_b,
    certified_uniform_bound,
    diagonal_probe,
    sup_tv_horizon,
    weighted_uniform_bound,
)
from interchange_workshop.jump import (
    ctmc_certified_uniform_bound,
    ctmc_fte,
    extend_generator,
    skeleton_matrix,
    transient_from,
)
from interchange_workshop.matrix_io import (
    read_distribution,
    read_matrix,
    read_rates,
    read_state_values,
    write_distribution,
    write_matrix,
)
from interchange_workshop.specs.data_models import (
    ExperimentCommand,
    ExperimentConfig,
    ProbDist,
    RateMatrix,
    RewardSpec,
    StochasticMatrix,
    WeightFunction,
)
from interchange_workshop.stationary import ctmc_stationary, gth, power_iteration
from interchange_workshop.truncation import extend_to, truncate, truncation_sweep

logger = logging.getLogger(__name__)

CSV_TAG = "interchange-workshop"
AGREEMENT_TOLERANCE = 1e-8
IFS_REFERENCE_DEPTH = 40

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NUMERICAL = 2
INPUT_ERRORS = (ConfigError, FormatError, DimensionError, PreconditionError)


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _agree(values: Sequence[float]) -> bool:
    for i, u in enumerate(values):
        for v in values[i + 1 :]:
            if math.isinf(u) or math.isinf(v):
                if u != v:
                    return False
            elif abs(u - v) > AGREEMENT_TOLERANCE * max(1.0, abs(u), abs(v)):
                return False
    return True


class ExperimentManager:
    """Runs one subcommand for one configuration and writes its CSV files."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.out_dir = Path(config.out)
        self.written: List[Path] = []
        self._runners: Dict[ExperimentCommand, Callable[[], None]] = {
            ExperimentCommand.TRUNCATE_SWEEP: self._run_truncate_sweep,
            ExperimentCommand.STATIONARY: self._run_stationary,
            ExperimentCommand.INTERCHANGE: self._run_interchange,
            ExperimentCommand.FTE: self._run_fte,
            ExperimentCommand.CTMC: self._run_ctmc,
            ExperimentCommand.COUNTEREXAMPLE: self._run_counterexample,
            ExperimentCommand.LINDLEY: self._run_lindley,
            ExperimentCommand.IFS: self._run_ifs,
        }

    # --- Output ---------------------------------------------------------------------

    def config_line(self) -> str:
        """Provenance comment; threads and out do not change results and are left out."""
        settings = self.config.model_dump(mode="json", exclude={"threads", "out"})
        settings["scheme"] = str(self.config.scheme)
        settings["kernel"] = str(self.config.kernel)
        return f"# {CSV_TAG} {__version__} config={json.dumps(settings, sort_keys=True, separators=(',', ':'))}"

    def write_csv(self, name: str, fields: Sequence[str], rows: Sequence[Dict[str, Any]]) -> Path:
        path = self.out_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(self.config_line() + "\n")
            writer = csv.DictWriter(handle, fieldnames=list(fields), lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({key: _cell(row.get(key)) for key in fields})
        logger.info(f"Experiment Manager: wrote {len(rows)} row(s) to {path}")
        self.written.append(path)
        return path

    def _csv_name(self, base: str, start: Any, starts: Sequence[Any]) -> str:
        if len(starts) == 1:
            return f"{base}.csv"
        return f"{base}_x{start}.csv"

    def _map(self, fn: Callable[[Any], Any], items: Sequence[Any]) -> List[Any]:
        """fn over items, on a thread pool when threads > 1; results keep item order."""
        if self.config.threads <= 1:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=self.config.threads) as pool:
            return list(pool.map(fn, items))

    def _states(self) -> List[int]:
        try:
            return self.config.state_list()
        except ValueError as e:
            raise ConfigError(str(e), "run_experiment") from e

    # --- Entry point ----------------------------------------------------------------

    def run(self) -> List[Path]:
        """Run the configured subcommand; errors propagate."""
        command = ExperimentCommand(self.config.command)
        logger.info(f"===== Experiment '{command.value}' (seed {self.config.seed}) =====")
        self._runners[command]()
        return list(self.written)

    def run_experiment(self) -> int:
        """Run and map the outcome onto an exit code: 0 ok, 1 bad input, 2 numerical failure."""
        try:
            self.run()
        except INPUT_ERRORS as e:
            logger.error(f"Experiment Manager: input rejected by {e.operation}: {e}")
            return EXIT_INPUT
        except InterchangeError as e:
            logger.error(f"Experiment Manager: numerical failure in {e.operation}: {e}")
            return EXIT_NUMERICAL
        logger.info(f"Experiment Manager: finished, {len(self.written)} file(s) written")
        return EXIT_OK

    # --- truncate-sweep ------------------------------------------------------------

    def _run_truncate_sweep(self) -> None:
        config = self.config
        kernel = build_kernel(config.kernel)
        chains = truncation_sweep(kernel, sorted(config.n_list), config.scheme, config.threads)
        rows = []
        for chain in chains:
            write_matrix(chain.matrix, self.out_dir / f"truncation_n{chain.n}.txt")
            rows.append({"n": chain.n, "scheme": str(chain.scheme), "max_lost_mass": chain.max_lost_mass})
        self.write_csv("truncate_sweep.csv", ["n", "scheme", "max_lost_mass"], rows)

    # --- stationary ----------------------------------------------------------------

    def _run_stationary(self) -> None:
        config = self.config
        if config.matrix_file is None:
            raise ConfigError("the stationary command needs matrix_file", "stationary")
        matrix = read_matrix(config.matrix_file)
        pi = gth(matrix)
        residual = stationarity_residual(pi, matrix)
        logger.info(f"stationary: gth residual |pi M - pi| = {residual:.3e}")
        if residual >= config.tolerances.stationarity:
            logger.warning(
                f"stationary: residual {residual:.3e} exceeds {config.tolerances.stationarity:.1e}"
            )
        write_distribution(pi, self.out_dir / "stationary.txt")
        rows = [{"solver": "gth", "steps": None, "residual": residual, "tv_to_gth": 0.0}]

        start = self._states()[0]
        try:
            result = power_iteration(
                matrix,
                start,
                tol=max(config.tolerances.tol, 1e-10),
                max_steps=config.max_steps,
                cesaro=config.cesaro,
            )
        except NonConvergenceError as e:
            logger.warning(f"stationary: power iteration cross-check skipped: {e}")
        else:
            rows.append({
                "solver": "power_cesaro" if config.cesaro else "power",
                "steps": result.steps,
                "residual": stationarity_residual(result.distribution, matrix),
                "tv_to_gth": tv_distance(result.distribution, pi),
            })
        self.write_csv("stationary.csv", ["solver", "steps", "residual", "tv_to_gth"], rows)

    # --- interchange ---------------------------------------------------------------

    def _run_interchange(self) -> None:
        config = self.config
        kernel = build_kernel(config.kernel)
        states = self._states()
        reference = truncate(kernel, config.n_ref, config.scheme).matrix
        pi_ref = gth(reference)
        chains = truncation_sweep(kernel, sorted(config.n_list), config.scheme, config.threads)
        stationary_laws = self._map(lambda chain: gth(chain.matrix), chains)
        extended = [extend_to(chain, config.n_ref) for chain in chains]
        weight = WeightFunction.by_name(config.weight) if config.weight else None

        for x in states:
            t = config.bound_horizon
            if t is None:
                t = auto_mixing_horizon(
                    reference, pi_ref, x, config.tolerances.eps_mix, config.max_steps
                )
                logger.info(f"interchange: bound horizon t={t} from eps_mix={config.tolerances.eps_mix}")

            def compare(index: int) -> Dict[str, Any]:
                matrix, pi_n = extended[index], stationary_laws[index]
                profile = sup_tv_horizon(matrix, reference, x, config.horizon)
                report = certified_uniform_bound(matrix, reference, pi_n, pi_ref, x, t)
                row = {
                    "n": chains[index].n,
                    "m_argmax": profile.argmax,
                    "sup_tv": profile.max_tv,
                    "bound_total": report.total,
                    "bound_transient": report.term_transient,
                    "bound_stationary": report.term_stationary,
                    "bound_mixing": report.term_mixing,
                }
                logger.info(f"interchange n={row['n']} x={x}: sup TV {profile.max_tv:.4e}, bound {report.total:.4e}")
                if weight is not None:
                    b = config.threshold_b
                    if b is None:
                        b = auto_threshold_b(report.total, pi_n, pi_ref, x, weight)
                    row["threshold_b"] = b
                    row["weighted_bound"] = weighted_uniform_bound(
                        matrix, reference, pi_n, pi_ref, x, t, weight, b, report=report
                    )
                    row["weighted_mean"] = stationary_weighted_mean(pi_n, weight)
                return row

            rows = self._map(compare, range(len(chains)))
            self.write_csv(
                self._csv_name("interchange", x, states),
                ["n", "m_argmax", "sup_tv", "bound_total", "bound_transient",
                 "bound_stationary", "bound_mixing"],
                rows,
            )
            if weight is not None:
                self.write_csv(
                    self._csv_name("interchange_weighted", x, states),
                    ["n", "threshold_b", "weighted_bound", "weighted_mean"],
                    rows,
                )

    # --- fte -----------------------------------------------------------------------

    def _reward_spec(self, dimension: int, operation: str = "fte") -> RewardSpec:
        config = self.config
        targets = set(config.target_set)
        outside = [y for y in targets if y >= dimension]
        if outside:
            raise DimensionError(f"target states {outside} outside dimension {dimension}", operation)
        region = frozenset(range(dimension)) - targets
        if config.reward == "indicator":
            values = {y: 1.0 for y in region}
        elif config.reward == "ones":
            values = {y: 1.0 for y in range(dimension)}
        else:
            values = read_state_values(config.reward_file)
        alpha = config.alpha

        def reward(y: int) -> float:
            return values.get(y, 0.0)

        def discount(y: int) -> float:
            return alpha

        return RewardSpec(continue_region=region, reward=reward, discount_rate=discount)

    def _fte_values(self, matrix: StochasticMatrix, states: Sequence[int]) -> List[Dict[str, Any]]:
        config = self.config
        tol, cap = config.tolerances.tol, config.tolerances.cap
        spec = self._reward_spec(matrix.dimension)
        for x in states:
            matrix.check_state(x, "fte")
        methods = ("vi", "linear", "ratio") if config.method == "all" else (config.method,)

        by_method: Dict[str, Optional[Callable[[int], float]]] = {}
        if "vi" in methods:
            by_method["vi"] = minimal_solution(matrix, spec, tol, cap).value
        if "linear" in methods:
            try:
                by_method["linear"] = linear_solve_fte(matrix, spec).value
            except IllPosedError as e:
                logger.warning(f"fte: linear solve skipped: {e}")
                by_method["linear"] = None
        if "ratio" in methods:
            reward = spec.reward_vector(matrix.dimension)

            def ratio(x: int) -> float:
                if x not in spec.continue_region:
                    return float(reward[x])
                return regenerative_ratio(matrix, spec, x, tol, cap)

            by_method["ratio"] = ratio

        rows = []
        for x in states:
            row: Dict[str, Any] = {"x": x}
            computed = []
            for name in ("vi", "linear", "ratio"):
                solver = by_method.get(name)
                value = solver(x) if solver is not None else None
                row[f"u_{name}"] = value
                if value is not None:
                    computed.append(value)
            row["agree"] = _agree(computed)
            if not row["agree"]:
                logger.warning(f"fte: solvers disagree at x={x}: {computed}")
            rows.append(row)
        return rows

    def _run_fte(self) -> None:
        config = self.config
        states = self._states()
        fields = ["x", "u_vi", "u_linear", "u_ratio", "agree"]
        if config.matrix_file is not None:
            self.write_csv("fte.csv", fields, self._fte_values(read_matrix(config.matrix_file), states))
            return

        kernel = build_kernel(config.kernel)
        reference = truncate(kernel, config.n_ref, config.scheme).matrix
        self.write_csv("fte.csv", fields, self._fte_values(reference, states))

        tol, cap = config.tolerances.tol, config.tolerances.cap
        reference_solution = minimal_solution(reference, self._reward_spec(reference.dimension), tol, cap)
        chains = truncation_sweep(kernel, sorted(config.n_list), config.scheme, config.threads)

        def sweep_row(chain: Any) -> List[Dict[str, Any]]:
            solution = minimal_solution(chain.matrix, self._reward_spec(chain.n), tol, cap)
            return [
                {
                    "n": chain.n,
                    "x": x,
                    "u_n": solution.value(x),
                    "u_ref": reference_solution.value(x),
                    "abs_diff": abs(solution.value(x) - reference_solution.value(x)),
                }
                for x in states
                if x < chain.n
            ]

        rows = [row for block in self._map(sweep_row, chains) for row in block]
        self.write_csv("fte_sweep.csv", ["n", "x", "u_n", "u_ref", "abs_diff"], rows)

    # --- ctmc ----------------------------------------------------------------------

    def _grid_sup(self, q_a: Any, q_b: Any, x: int) -> Dict[str, float]:
        config = self.config
        steps = int(round(config.time_horizon / config.time_step))
        law_a = law_b = ProbDist.point_mass(x)
        best, best_time = 0.0, 0.0
        for i in range(1, steps + 1):
            law_a = transient_from(q_a, law_a, config.time_step, config.tolerances.eps)
            law_b = transient_from(q_b, law_b, config.time_step, config.tolerances.eps)
            gap = tv_between_vectors(law_a.to_dense(q_a.dimension), law_b.to_dense(q_b.dimension))
            if gap > best:
                best, best_time = gap, i * config.time_step
        return {"t_argmax": best_time, "sup_tv": best}

    def _ctmc_fte_value(self, generator: RateMatrix, spec: RewardSpec, x: int) -> float:
        if x not in spec.continue_region:
            return 0.0
        tol, cap = self.config.tolerances.tol, self.config.tolerances.cap
        return ctmc_fte(generator, spec, x, tol, cap)

    def _ctmc_fte_rows(self, generator: RateMatrix, states: Sequence[int]) -> List[Dict[str, Any]]:
        spec = self._reward_spec(generator.dimension, "ctmc")
        for x in states:
            generator.check_state(x, "ctmc")
        return [{"x": x, "u": self._ctmc_fte_value(generator, spec, x)} for x in states]

    def _run_ctmc_file(self, states: Sequence[int]) -> None:
        config = self.config
        generator = read_rates(config.rates_file)
        try:
            write_distribution(ctmc_stationary(generator), self.out_dir / "ctmc_stationary.txt")
        except StructureError as e:
            logger.warning(f"ctmc: stationary law skipped: {e}")
        if config.initial_file is not None:
            initial = read_distribution(config.initial_file)
            law = transient_from(generator, initial, config.time_horizon, config.tolerances.eps)
            write_distribution(law, self.out_dir / "ctmc_transient.txt")
        self.write_csv("ctmc_fte.csv", ["x", "u"], self._ctmc_fte_rows(generator, states))

    def _run_ctmc(self) -> None:
        config = self.config
        eps = config.tolerances.eps
        states = self._states()
        if config.rates_file is not None:
            self._run_ctmc_file(states)
            return
        q_ref = build_generator(config.kernel, config.n_ref)
        pi_ref = ctmc_stationary(q_ref)
        sizes = sorted(config.n_list)
        generators = [build_generator(config.kernel, n) for n in sizes]
        stationary_laws = [ctmc_stationary(q) for q in generators]
        extended = [extend_generator(q, config.n_ref) for q in generators]

        for x in states:
            t = config.bound_horizon
            if t is None:
                skeleton = skeleton_matrix(q_ref, config.skeleton_step, eps, config.threads)
                t = auto_mixing_horizon(skeleton, pi_ref, x, config.tolerances.eps_mix, config.max_steps)
                logger.info(f"ctmc: skeleton horizon t={t}")
            rows = []
            for n, q_n, pi_n in zip(sizes, extended, stationary_laws):
                row: Dict[str, Any] = {"n": n, **self._grid_sup(q_n, q_ref, x)}
                report = ctmc_certified_uniform_bound(
                    q_n, q_ref, pi_n, pi_ref, x, t, eps, config.skeleton_step, config.threads
                )
                row.update(
                    bound_total=report.total,
                    bound_transient=report.term_transient,
                    bound_stationary=report.term_stationary,
                    bound_mixing=report.term_mixing,
                    skeleton_slack=report.skeleton_slack,
                )
                logger.info(f"ctmc n={n} x={x}: grid sup {row['sup_tv']:.4e}, bound {report.total:.4e}")
                rows.append(row)
            self.write_csv(
                self._csv_name("ctmc", x, states),
                ["n", "t_argmax", "sup_tv", "bound_total", "bound_transient",
                 "bound_stationary", "bound_mixing", "skeleton_slack"],
                rows,
            )

        reference_rows = self._ctmc_fte_rows(q_ref, states)
        self.write_csv("ctmc_fte.csv", ["x", "u"], reference_rows)
        u_ref = {row["x"]: row["u"] for row in reference_rows}

        def fte_sweep_row(n: int) -> List[Dict[str, Any]]:
            generator = build_generator(config.kernel, n)
            spec = self._reward_spec(n, "ctmc")
            rows = []
            for x in states:
                if x >= n:
                    continue
                u_n = self._ctmc_fte_value(generator, spec, x)
                rows.append({"n": n, "x": x, "u_n": u_n, "u_ref": u_ref[x], "abs_diff": abs(u_n - u_ref[x])})
            return rows

        sweep = [row for block in self._map(fte_sweep_row, sizes) for row in block]
        self.write_csv("ctmc_fte_sweep.csv", ["n", "x", "u_n", "u_ref", "abs_diff"], sweep)

    # --- counterexample ------------------------------------------------------------

    def _run_counterexample(self) -> None:
        config = self.config
        sizes = sorted(config.n_list)
        for x in config.x:
            rows = []
            for n in sizes:
                report = counterexample_report(n, x)
                rows.append({
                    "n": n,
                    "m_hit": report.m_hit,
                    "probe_mass_at_1": report.probe_mass_at_1,
                    "w1_pi_to_delta0": report.w1_pi_n_to_delta0,
                })
            self.write_csv(
                self._csv_name("counterexample", x, config.x),
                ["n", "m_hit", "probe_mass_at_1", "w1_pi_to_delta0"],
                rows,
            )

        # From location 1 (state 0) the n-th chain returns to 1 at step n + 1,
        # while the halving limit sits at 0 from step depth + 1 on.
        depth = sizes[-1] + 1
        family = {n: counterexample_chain(n, depth) for n in sizes}
        probe = diagonal_probe(family, lambda n: n + 1, 0, ProbDist.point_mass(depth + 1))
        self.write_csv(
            "counterexample_diagonal.csv",
            ["n", "m_n", "tv"],
            [row.model_dump() for row in probe],
        )

    # --- lindley -------------------------------------------------------------------

    def _run_lindley(self) -> None:
        config = self.config
        family = drift_family(config.drift_family)
        limit = family(None)
        start = config.x[0]
        sizes = sorted(config.n_list)
        check_drift(limit, config.seed)

        def estimate(n: int) -> Dict[str, Any]:
            spec = family(n)
            check_drift(spec, config.seed)
            result = lindley_coupled_sup_distance(
                spec, limit, start, config.horizon, config.samples, config.seed, config.streams
            )
            logger.info(f"lindley n={n}: coupled sup {result.sup_estimate:.4e} +- {result.stderr:.1e}")
            return {
                "n": n,
                "m_argmax": result.m_argmax,
                "sup_coupling_estimate": result.sup_estimate,
                "stderr": result.stderr,
            }

        self.write_csv(
            "lindley.csv",
            ["n", "m_argmax", "sup_coupling_estimate", "stderr"],
            self._map(estimate, sizes),
        )

        def stationary_row(n: Optional[int]) -> Dict[str, Any]:
            sample = lindley_stationary_sample(family(n), config.samples, config.seed, max_steps=config.max_steps)
            return {
                "n": "inf" if n is None else n,
                "mean": sample.measure.mean(),
                "mass_above_zero": sample.measure.mass_above(0.0),
                "barrier": sample.barrier,
                "tail_bound": sample.tail_bound,
            }

        self.write_csv(
            "lindley_stationary.csv",
            ["n", "mean", "mass_above_zero", "barrier", "tail_bound"],
            self._map(stationary_row, [*sizes, None]),
        )

    # --- ifs -----------------------------------------------------------------------

    def _run_ifs(self) -> None:
        config = self.config
        spec = ifs_family(config.ifs_family)
        check_ifs_contraction(spec, config.samples, config.seed)
        depths = sorted(config.depth_list)
        k_ref = depths[-1] + IFS_REFERENCE_DEPTH
        start = config.x[0]

        def depth_row(k: int) -> Dict[str, Any]:
            result = ifs_backward(spec, k, start, config.samples, config.seed)
            mean_gap, stderr = ifs_tail_gap(spec, k, k_ref, start, config.samples, config.seed)
            within = mean_gap <= result.tail_bound + 3.0 * stderr + 1e-12
            if not within:
                logger.warning(f"ifs k={k}: gap {mean_gap:.4e} above tail bound {result.tail_bound:.4e}")
            return {
                "k": k,
                "tail_bound": result.tail_bound,
                "mean_gap": mean_gap,
                "stderr": stderr,
                "within_bound": within,
            }

        self.write_csv(
            "ifs.csv",
            ["k", "tail_bound", "mean_gap", "stderr", "within_bound"],
            self._map(depth_row, depths),
        )


def run_experiment(config: ExperimentConfig) -> int:
    """Run one configured experiment and return its exit code."""
    return ExperimentManager(config).run_experiment()
