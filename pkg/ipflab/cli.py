#
# ipflab
#
# A numerical laboratory for the intersection of past and future of multivariate stationary processes.
#
# Copyright (c) 2025-2026 Thomas Kuhlmann
#
# Licensed under the MIT License. See LICENSE file in the project root for license information.
#

import argparse
import csv
import json
import math
import os
import shlex
import shutil
import sys
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, NoReturn, Optional, no_type_check

import numpy as np

from ipflab import conditions, factorization, quadrature, subspaces, toeplitz
from ipflab.common import VERSION, Cache, ComplexArray, ConcurrencyError, ConfigError, ConfigNamespace, IntegrityCheckFailedError, IpfLabError, LogLevel, Logger, TaskFailedError
from ipflab.conditions import Verdict, check_condition_a, classify
from ipflab.config import ExperimentConfig, apply_overrides, build_config, load_raw, validate
from ipflab.factorization import FactorStatus, OuterFactor, TrigPolynomial, factorize, factorize_sharp, innovation_coeffs, phase_profile, random_trig_polynomial, verify_isometry_G, verify_outer
from ipflab.models import MAFactor, autocovariance_sequence
from ipflab.quadrature import GRID_MAX_EXPONENT, GRID_MIN_EXPONENT
from ipflab.subspaces import CheckVerdict, IndexSet, alternating_projections, cnd_profile, finite_predictor, future, generator_row, ipf_finite_check, past, principal_angles
from ipflab.toeplitz import AutocovSeq, block_toeplitz


LOCK_FILE_NAME: str = ".ipflab.lock"

REPORT_FILE_NAME: str = "report.json"

TIMINGS_FILE_NAME: str = "timings.json"


# Output helpers


def _matrix(matrix: ComplexArray) -> list[list[list[float]]]:
    # same [re, im] encoding as the config
    return [[[float(v.real), float(v.imag)] for v in row] for row in np.asarray(matrix, dtype=complex)]


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        number = float(value)
        return number if math.isfinite(number) else str(number)  # JSON has no inf / nan
    if isinstance(value, (complex, np.complexfloating)):
        return [_jsonable(float(value.real)), _jsonable(float(value.imag))]
    return value


def _dumps(value: Any) -> str:
    return json.dumps(_jsonable(value), indent=2, ensure_ascii=False, allow_nan=False) + "\n"


@dataclass(frozen=True)
class Table:
    header: tuple[str, ...]
    rows: list[tuple[Any, ...]]

    def write(self, path: Path) -> None:
        with path.open("w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(self.header)
            writer.writerows(tuple("" if v is None else v for v in row) for row in self.rows)


def _coefficient_table(coeffs: ComplexArray) -> Table:
    return Table(("n", "row", "col", "re", "im"), [(n, r, c, float(coeffs[n, r, c].real), float(coeffs[n, r, c].imag)) for n in range(coeffs.shape[0]) for r in range(coeffs.shape[1]) for c in range(coeffs.shape[2])])


def numeric_constants() -> dict[str, Any]:
    # fmt: off
    return {
        "grid_min_exponent": quadrature.GRID_MIN_EXPONENT, "grid_max_exponent": quadrature.GRID_MAX_EXPONENT, "hermitian_rtol": quadrature.HERMITIAN_RTOL,
        "probe_rtol": quadrature.PROBE_RTOL, "probe_geometric_ratio": quadrature.PROBE_GEOMETRIC_RATIO,
        "probe_divergent_ratio": quadrature.PROBE_DIVERGENT_RATIO, "probe_ratio_spread": quadrature.PROBE_RATIO_SPREAD, "probe_min_refinements": quadrature.PROBE_MIN_REFINEMENTS,
        "gram_pd_rtol": toeplitz.GRAM_PD_RTOL,
        "mr_grid_exponent": conditions.MR_GRID_EXPONENT, "mr_eig_floor": conditions.MR_EIG_FLOOR, "mr_zero_eig": conditions.MR_ZERO_EIG,
        "mr_zero_fraction": conditions.MR_ZERO_FRACTION, "probe_exponents": list(conditions.PROBE_EXPONENTS),
        "order_cap": factorization.ORDER_CAP, "residual_grid_exponent": factorization.RESIDUAL_GRID_EXPONENT, "outer_grid_exponent": factorization.OUTER_GRID_EXPONENT,
        "outer_tol": factorization.OUTER_TOL, "outer_max_excluded_fraction": factorization.OUTER_MAX_EXCLUDED_FRACTION,
        "phase_refinements": list(factorization.PHASE_REFINEMENTS),
        "rank_rtol": subspaces.RANK_RTOL, "rank_stability_band": subspaces.RANK_STABILITY_BAND, "cosine_one": subspaces.COSINE_ONE, "coincidence_tol": subspaces.COINCIDENCE_TOL,
    }
    # fmt: on


# Tasks


@dataclass
class TaskOutput:
    result: dict[str, Any]
    tables: dict[str, Table] = field(default_factory=dict)
    findings: list[tuple[LogLevel, str, Optional[str]]] = field(default_factory=list)

    def add_finding(self, level: LogLevel, message: str, debug: Optional[str] = None) -> None:
        self.findings.append((level, message, debug))


@dataclass(frozen=True)
class TaskOutcome:
    name: str
    seconds: float
    output: Optional[TaskOutput] = None
    error: Optional[dict[str, str]] = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    def to_dict(self) -> dict[str, Any]:
        if self.error is not None:
            return {"status": "error", "error": self.error}
        assert self.output is not None  # noqa: S101
        return {"status": "ok", "result": self.output.result}


class RunContext:
    # shared between tasks running in parallel, everything expensive is cached
    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config
        self._autocov: Cache[int, AutocovSeq] = Cache()
        self._factors: Cache[str, OuterFactor] = Cache()

    def autocov(self, K: int) -> AutocovSeq:
        return self._autocov.compute_if_absent(K, lambda k: autocovariance_sequence(self.config.model, k))

    def factor(self, kind: str) -> OuterFactor:
        p = self.config.params["factorize"]
        compute = factorize if kind == "h" else factorize_sharp
        return self._factors.compute_if_absent(kind, lambda _: compute(self.config.model, p.order, p.tol, p.cap))


def _error_dict(e: BaseException) -> dict[str, str]:
    if isinstance(e, IpfLabError):
        code = e.code
    elif isinstance(e, np.linalg.LinAlgError):
        code = "LINALG"
    else:
        code = "INVALID_VALUE"
    return {"code": code, "message": str(e)}


def task_autocov(context: RunContext) -> TaskOutput:
    p = context.config.params["autocov"]
    seq = autocovariance_sequence(context.config.model, p.K, p.source, context.config.m)
    min_eig = float(np.linalg.eigvalsh(block_toeplitz(seq, range(p.K + 1))).min())
    q = seq.q
    rows = [(k, r, c, float(seq.at(k)[r, c].real), float(seq.at(k)[r, c].imag)) for k in range(-p.K, p.K + 1) for r in range(q) for c in range(q)]
    output = TaskOutput({"K": p.K, "source": seq.source, "gamma_0": _matrix(seq.at(0)), "gamma_1": _matrix(seq.at(1)) if p.K >= 1 else None, "block_toeplitz_min_eigenvalue": min_eig})
    output.tables["autocov.csv"] = Table(("k", "row", "col", "re", "im"), rows)
    output.add_finding(LogLevel.INFO, f"{2 * p.K + 1} autocovariance blocks ({seq.source}), block Toeplitz min eigenvalue {min_eig:.3e}")
    return output


def _factor_summary(factor: OuterFactor) -> dict[str, Any]:
    outer = verify_outer(factor)
    return {**factor.to_dict(), "c0": _matrix(factor.coeffs[0]), "outer_check": outer.to_dict()}


def task_factorize(context: RunContext) -> TaskOutput:
    model = context.config.model
    h, h_sharp = context.factor("h"), context.factor("sharp")
    innovation = innovation_coeffs(h)
    result: dict[str, Any] = {
        "h": _factor_summary(h),
        "h_sharp": _factor_summary(h_sharp),
        "innovation_covariance": _matrix(innovation.error_covariance),
        "det_innovation_covariance": float(np.linalg.det(innovation.error_covariance).real),
    }
    output = TaskOutput(result)
    if isinstance(model, MAFactor):
        moduli = model.determinant_zero_moduli()
        result["ma_zero_moduli"] = [float(v) for v in moduli]
        if not model.is_candidate_outer():
            output.add_finding(LogLevel.WARN, f"Given MA factor is not outer (det θ(z) has a zero of modulus {moduli.min():.6g} <= 1), the computed outer factor differs from it")
    output.tables["factor_h.csv"] = _coefficient_table(h.coeffs)
    output.tables["factor_sharp.csv"] = _coefficient_table(h_sharp.coeffs)
    slow = FactorStatus.SLOW_CONVERGENCE in (h.status, h_sharp.status)
    headline = f"h {h.status.value} at order {h.order} (residual {h.residual:.3e}), h♯ {h_sharp.status.value} at order {h_sharp.order} (residual {h_sharp.residual:.3e})"
    output.findings.insert(0, (LogLevel.WARN if slow else LogLevel.INFO, headline, None))
    output.add_finding(LogLevel.DEBUG, f"outer check on h: {result['h']['outer_check']['verdict']}", f"residual {result['h']['outer_check']['residual']}")
    return output


def task_conditions(context: RunContext) -> TaskOutput:
    report = classify(context.config.model)
    output = TaskOutput(report.to_dict())
    headline = (
        f"MR {report.mr.verdict.value}, condition (A) {report.condition_a.verdict.value}, minimality {report.minimality.outcome.value}"
        f" => CND {report.implied_cnd.verdict.value}, IPF {report.implied_ipf.verdict.value}"
    )
    output.add_finding(LogLevel.INFO, headline)
    output.add_finding(LogLevel.DEBUG, f"CND: {report.implied_cnd.rule}")
    output.add_finding(LogLevel.DEBUG, f"IPF: {report.implied_ipf.rule}")
    return output


def task_angles(context: RunContext) -> TaskOutput:
    p = context.config.params["angles"]
    rows = cnd_profile(context.config.model, p.N_list, p.tol, context.autocov(2 * p.N_list[-1]))
    output = TaskOutput({"tol": p.tol, "rows": [row.to_dict() for row in rows]})
    output.tables["angles.csv"] = Table(("N", "n", "cos_1", "cos_2", "dim", "residual"), [(r.N, r.n, r.cos_1, r.cos_2, r.dim, r.residual) for r in rows])
    output.add_finding(LogLevel.INFO, f"intersection dims {[r.dim for r in rows]} for N in {list(p.N_list)}, largest cosine at N={rows[-1].N}: {rows[-1].cos_1:.12f}")
    return output


def task_intersect(context: RunContext) -> TaskOutput:
    p = context.config.params["intersect"]
    autocov = context.autocov(2 * p.N_list[-1])
    checks = [ipf_finite_check(context.config.model, n, N, p.tol, autocov=autocov) for n in p.n_list for N in p.N_list if N > n]
    output = TaskOutput({"tol": p.tol, "checks": [c.to_dict() for c in checks]})
    # fmt: off
    output.tables["ipf.csv"] = Table(("N", "n", "cos_1", "cos_2", "dim", "residual", "verdict", "reason"),
        [(c.N, c.n, c.cosines[0] if c.cosines else 0.0, c.cosines[1] if len(c.cosines) > 1 else 0.0, c.dim, c.residual, c.verdict.value, c.reason) for c in checks])
    # fmt: on
    failed = [c for c in checks if c.verdict is CheckVerdict.FAIL]
    output.add_finding(LogLevel.WARN if failed else LogLevel.INFO, f"{len(checks) - len(failed)} of {len(checks)} finite IPF checks PASS")
    for c in failed:
        output.add_finding(LogLevel.DEBUG, f"n={c.n}, N={c.N}: {c.reason}", f"dim {c.dim}, expected {c.expected_dim}, union rank {c.union_rank} of {c.union_size}")
    return output


def task_predictor(context: RunContext) -> TaskOutput:
    N = context.config.params["predictor"].N
    predictor = finite_predictor(context.autocov(N), N)
    det_trace = predictor.det_trace()
    result: dict[str, Any] = {
        "N": N,
        "error_covariance": _matrix(predictor.error_covariance),
        "det_error_covariance": float(det_trace[-1]),
        "loewner_violation": predictor.loewner_violation(),
    }
    condition_a = check_condition_a(context.config.model)
    if condition_a.verdict is Verdict.HOLDS:
        limit = math.exp(condition_a.evidence["szego_integral"])
        result["szego_limit"] = limit
        result["szego_discrepancy"] = abs(float(det_trace[-1]) - limit)
    else:
        result["szego_limit"] = None
        result["condition_a"] = condition_a.verdict.value
    output = TaskOutput(result)
    output.tables["predictor.csv"] = Table(("N", "det_V"), [(k, float(v)) for k, v in enumerate(det_trace)])
    limit_text = f", Szegő limit {result['szego_limit']:.9g}" if result["szego_limit"] is not None else ""
    output.add_finding(LogLevel.INFO, f"det V_{N} = {det_trace[-1]:.9g}{limit_text}", f"Loewner violation {result['loewner_violation']:.3e}")
    return output


def _isometry(context: RunContext, h_sharp: OuterFactor) -> dict[str, Any]:
    config = context.config
    p = config.params["report"]
    rng = np.random.default_rng(config.seed)
    polynomials = [random_trig_polynomial(config.model.q, p.degree, rng) for _ in range(p.polynomials)]
    if p.isometry_rows is not None:
        # explicit polynomial, row i is the coefficient of e(i)
        rows = np.array([[complex(*v) if isinstance(v, list) else complex(v) for v in row] for row in p.isometry_rows], dtype=complex)
        polynomials.append(TrigPolynomial(tuple(range(len(rows))), rows))
    discrepancies = [verify_isometry_G(config.model, h_sharp, f, config.m).discrepancy for f in polynomials]
    return {"seed": config.seed, "polynomials": len(polynomials), "degree": p.degree, "max_discrepancy": max(discrepancies), "discrepancies": discrepancies}


def task_report(context: RunContext) -> TaskOutput:
    config = context.config
    p = config.params["report"]
    result: dict[str, Any] = {}
    output = TaskOutput(result)
    try:
        h, h_sharp = context.factor("h"), context.factor("sharp")
        result["outer"] = verify_outer(h).to_dict()
        phases = phase_profile(h, h_sharp, p.phase_m)
        result["phase"] = phases[0].to_dict()
        result["phase_refinement"] = [r.to_dict() for r in phases[1:]]
        output.add_finding(LogLevel.DEBUG, "phase deviation " + ", ".join(f"{r.constancy + r.unitarity:.3e} at m={r.m}" for r in phases))
        result["isometry"] = _isometry(context, h_sharp)
        output.add_finding(LogLevel.DEBUG, f"outer check {result['outer']['verdict']}, isometry max discrepancy {result['isometry']['max_discrepancy']:.3e}")
    except IpfLabError as e:
        # degenerate models have no outer factor, the projection diagnostics still apply
        result["factor"] = {"status": "error", "error": _error_dict(e)}
        output.add_finding(LogLevel.DEBUG, f"factor diagnostics skipped: {e.code}")

    A, B = past(p.window), future(p.window)
    union: IndexSet = A.union(B)
    autocov = context.autocov(2 * p.window)
    start = generator_row(union, config.model.q, p.start["lag"], p.start["component"])
    trace = alternating_projections(A, B, autocov, start, p.iterations)
    largest = principal_angles(A, B, autocov).largest
    result["alternating_projections"] = {"past": str(A), "future": str(B), "start": dict(p.start), **trace.to_dict(), "largest_cosine_squared": largest**2}
    headline = f"alternating projections decay ratio {trace.decay_ratio:.9f} (largest cosine squared {largest**2:.9f}), limit norm {trace.limit_norm:.6g}"
    output.findings.insert(0, (LogLevel.INFO, headline, None))
    return output


TASK_RUNNERS: dict[str, Callable[[RunContext], TaskOutput]] = {
    "autocov": task_autocov,
    "factorize": task_factorize,
    "conditions": task_conditions,
    "angles": task_angles,
    "intersect": task_intersect,
    "predictor": task_predictor,
    "report": task_report,
}


def run_task(name: str, context: RunContext) -> TaskOutcome:
    started = time.perf_counter()
    try:
        output = TASK_RUNNERS[name](context)
    except IntegrityCheckFailedError:
        raise
    except (IpfLabError, ValueError, np.linalg.LinAlgError) as e:
        return TaskOutcome(name, time.perf_counter() - started, error=_error_dict(e))
    return TaskOutcome(name, time.perf_counter() - started, output=output)


@dataclass(frozen=True)
class RunReport:
    config: ExperimentConfig
    outcomes: tuple[TaskOutcome, ...]

    @property
    def failed(self) -> list[str]:
        return [o.name for o in self.outcomes if o.failed]

    def to_dict(self) -> dict[str, Any]:
        return {
            "version": VERSION,
            "config": {k: v for k, v in self.config.raw.items() if k != "output_dir"},  # without output_dir
            "constants": numeric_constants(),
            "tasks": {o.name: o.to_dict() for o in self.outcomes},
            "status": "partial_failure" if self.failed else "ok",
            "failed_tasks": self.failed,
        }

    def timings(self) -> dict[str, float]:
        return {o.name: o.seconds for o in self.outcomes}

    def write(self, output_dir: Path) -> list[Path]:
        output_dir.mkdir(parents=True, exist_ok=True)
        written = [output_dir / REPORT_FILE_NAME, output_dir / TIMINGS_FILE_NAME]
        written[0].write_text(_dumps(self.to_dict()), encoding="utf-8")
        written[1].write_text(_dumps(self.timings()), encoding="utf-8")
        for outcome in self.outcomes:
            if outcome.output is None:
                continue
            for file_name, table in outcome.output.tables.items():
                table.write(output_dir / file_name)
                written.append(output_dir / file_name)
        return written


def run_experiment(config: ExperimentConfig, logger: Logger, serial: bool = False) -> RunReport:
    context = RunContext(config)
    if serial or len(config.tasks) == 1:
        outcomes = tuple(run_task(name, context) for name in config.tasks)
    else:
        with ThreadPoolExecutor(max_workers=min(len(config.tasks), os.cpu_count() or 1)) as pool:
            futures = [pool.submit(run_task, name, context) for name in config.tasks]
            outcomes = tuple(f.result() for f in futures)

    # single writer, declared order
    for outcome in outcomes:
        logger.verbose(LogLevel.DEBUG, f"Task '{outcome.name}' finished in {outcome.seconds:.3f} s")
        if outcome.error is not None:
            logger.add_finding(LogLevel.ERROR, outcome.name, f"{outcome.error['code']}: {outcome.error['message']}")
            continue
        assert outcome.output is not None  # noqa: S101
        for level, message, debug in outcome.output.findings:
            logger.add_finding(level, outcome.name, message, debug)
    return RunReport(config, outcomes)


# Command line


class ModernHelpFormatter(argparse.HelpFormatter):
    @no_type_check
    def __init__(self, *a, **kw) -> None:  # noqa: ANN002, ANN003
        width = shutil.get_terminal_size(fallback=(80, 24)).columns
        max_pos = min(50, max(24, width // 2))
        super().__init__(*a, max_help_position=max_pos, width=width, **kw)

    @no_type_check
    def start_section(self, heading) -> None:  # noqa: ANN001
        super().start_section(heading.capitalize())

    @no_type_check
    def format_help(self) -> str:
        return f"ipflab {VERSION}\n\n" + "Numerical laboratory for the intersection of past and future of multivariate stationary processes\n\n" + super().format_help()


class ExitOnlyVersion(argparse.Action):
    @no_type_check
    def __call__(self, parser, namespace, values, option_string=None):  # noqa: ARG002,ANN001,ANN204
        print(f"ipflab {VERSION}")
        parser.exit(0)


class ModernStrictArgumentParser(argparse.ArgumentParser):
    @no_type_check
    def __init__(self, *a, **kw) -> None:  # noqa: ANN002, ANN003
        super().__init__(*a, **kw)
        self._errors: list[str] = []

    def add_error(self, msg: str) -> None:
        if msg not in self._errors:
            self._errors.append(msg)

    def error(self, message: str) -> NoReturn:
        self.print_usage()
        print("\nError(s):", file=sys.stderr)
        for line in message.split("\n"):
            print(f"  • {line}", file=sys.stderr)
        print("\nHint: Try '--help' for more information (or the README.md).")
        sys.exit(2)

    # Argument type helpers
    def grid_exponent_argument(self, value: str) -> int:
        try:
            int_value = int(value)
            if not GRID_MIN_EXPONENT <= int_value <= GRID_MAX_EXPONENT:
                raise ValueError
        except ValueError:
            raise argparse.ArgumentTypeError(f"Invalid grid exponent '{value}': must be an integer in {GRID_MIN_EXPONENT}..{GRID_MAX_EXPONENT}")
        return int_value

    def verbose_argument(self, value: str) -> LogLevel:
        try:
            return LogLevel.from_name_or_number(value)
        except ValueError:
            raise argparse.ArgumentTypeError(f"Invalid verbose value '{value}' (use ERROR, WARN, INFO, DEBUG or 0, 1, 2, 3)")

    # Internal helper methods
    def _suggest(self, argument: str) -> list[str]:
        opts = [o for a in self._actions for o in a.option_strings if o.startswith("--")]
        cand = [o for o in opts if abs(len(o) - len(argument)) <= 2 and sum(a != b for a, b in zip(o, argument)) <= 2]
        return cand[:1]

    @no_type_check
    def _collect_raw_args(self, args):  # noqa: ANN202, ANN001
        if args is not None:
            return list(args)
        return sys.argv[1:]

    @no_type_check
    def _detect_duplicate_flags(self, raw_args) -> None:  # noqa: ANN001
        alias = {opt: action.option_strings[0] for action in self._actions for opt in action.option_strings}
        seen = set()
        for tok in raw_args:
            if not tok.startswith("-") or tok == "-":
                continue
            opt = tok.split("=", 1)[0]
            # Handle -m12 → -m
            if len(opt) > 2 and not opt.startswith("--"):
                opt = opt[:2]
            key = alias.get(opt, opt)
            if key in seen:
                self.add_error(f"Duplicate flag: {key}")
            seen.add(key)

    @no_type_check
    def _validate_arguments(self, ns) -> None:  # noqa: ANN001
        try:
            if ns.config is not None and not Path(ns.config).is_file():
                self.add_error(f"Config file {ns.config} does not exist or is not a file")
            if ns.output_dir is not None and not ns.output_dir.strip():
                self.add_error("--output-dir must not be empty")

            # Default verbosity, if none given
            if ns.verbose is None:
                ns.verbose = LogLevel.ERROR
        except BaseException as e:
            self.add_error(str(e))

    # Main hook
    @no_type_check
    def parse_known_args(self, args=None, namespace=None) -> tuple[argparse.Namespace, list[str]]:  # noqa: ANN001
        self._errors = []
        raw_args = self._collect_raw_args(args)
        self._detect_duplicate_flags(raw_args)

        ns, unknown = super().parse_known_args(raw_args, namespace or argparse.Namespace())

        if unknown:
            sug = self._suggest(unknown[0])
            if sug:
                self.add_error(f"Unknown option: {unknown[0]} (did you mean {sug[0]}?)")
            else:
                self.add_error(f"Unknown option: {unknown[0]}")

        self._validate_arguments(ns)

        if self._errors:
            self.error("\n".join(self._errors))

        return ns, unknown


def create_parser() -> ModernStrictArgumentParser:
    parser: ModernStrictArgumentParser = ModernStrictArgumentParser(
        usage=("ipflab {run,validate} config [options]\n\nExample:\n  ipflab run configs/ma1.json --output-dir out/ma1 --serial"),
        epilog="Results are written to the output directory: report.json, timings.json and one CSV per tabular task.",
        formatter_class=ModernHelpFormatter,
        add_help=False,
    )

    g_main = parser.add_argument_group("Main arguments")
    g_run = parser.add_argument_group("Run options")
    g_developers = parser.add_argument_group("Developers options")
    g_common = parser.add_argument_group("Common arguments")

    # positional arguments
    g_main.add_argument("command", choices=["run", "validate"], help="run: execute the configured tasks, validate: check the config without executing anything")
    g_main.add_argument("config", help="experiment configuration (JSON)")

    # run options
    # fmt: off
    g_run.add_argument("--serial", "-S", action="store_true", help="Run tasks sequentially (default: tasks run in parallel threads, output is identical)")
    g_run.add_argument("--output-dir", "-o", type=str, default=None, metavar="dir", help="Override output_dir of the config")
    g_run.add_argument("--m", "-m", type=parser.grid_exponent_argument, default=None, metavar="exponent", dest="m",
        help=f"Override the grid exponent m of the config (G = 2^m nodes, {GRID_MIN_EXPONENT}..{GRID_MAX_EXPONENT})")
    g_run.add_argument("--verbose", "-V", "-v", type=parser.verbose_argument, default=None, nargs="?", const=LogLevel.INFO, metavar="lev",
        help="Verbosity level: 0 = error, 1 = warn, 2 = info, 3 = debug (default: 'info', if specified without value; 'error' otherwise; use numbers or names)")
    # fmt: on

    # developers options
    g_developers.add_argument("--stacktrace", action="store_true", help="Add output of stacktrace in case of errors")

    # common options
    g_common.add_argument("--version", "-R", nargs=0, action=ExitOnlyVersion, help="show version and exit")
    g_common.add_argument("--help", "-H", action="help", help="Show this help message and exit")

    return parser


def parse_arguments(argv: Optional[list[str]] = None) -> ConfigNamespace:
    parser = create_parser()
    args = parser.parse_args(argv)
    return ConfigNamespace(**vars(args))


def handle_exception(exception: Exception, exit_code: int, stacktrace: bool, prefix: str = "") -> NoReturn:
    if stacktrace:
        traceback.print_exc()
    print(f"[{prefix or LogLevel.ERROR.name}] {exception}", file=sys.stderr)
    sys.exit(exit_code)


def main(argv: Optional[list[str]] = None) -> None:
    args: Optional[ConfigNamespace] = None
    lock_file: Optional[Path] = None
    created_lock_file = False

    try:
        args = parse_arguments(argv)
        logger = Logger(args.verbose)

        logger.verbose(LogLevel.INFO, "Command line: " + " ".join(shlex.quote(arg) for arg in (argv if argv is not None else sys.argv[1:])))
        logger.verbose(LogLevel.DEBUG, f"Parsed arguments: {args}")

        raw = apply_overrides(load_raw(Path(args.config)), args.output_dir, args.m)

        if args.command == "validate":
            diagnostics = validate(raw)
            if diagnostics:
                raise ConfigError(diagnostics)
            print(f"Configuration {args.config} is valid")
            return

        config = build_config(raw)
        logger.verbose(LogLevel.INFO, f"Model '{config.model.variant}' (q={config.model.q}), tasks: {', '.join(config.tasks)}, grid exponent m={config.m}")

        config.output_dir.mkdir(parents=True, exist_ok=True)
        lock_file = (config.output_dir / LOCK_FILE_NAME).resolve()
        if lock_file.exists():
            raise ConcurrencyError(f"A run is already writing to {config.output_dir} (or there is a stale lockfile)")
        lock_file.touch()
        created_lock_file = True

        report = run_experiment(config, logger, serial=args.serial)
        written = report.write(config.output_dir)

        logger.print_findings()
        logger.verbose(LogLevel.INFO, f"Wrote {len(written)} file(s) to {config.output_dir}")
        logger.verbose(LogLevel.DEBUG, "Files: " + ", ".join(p.name for p in written))

        if report.failed:
            raise TaskFailedError(f"{len(report.failed)} of {len(config.tasks)} task(s) failed: {', '.join(report.failed)} (see {config.output_dir / REPORT_FILE_NAME})")

    except OSError as e:
        handle_exception(e, 1, args.stacktrace if args is not None else True)
    except (ValueError, argparse.ArgumentTypeError) as e:
        handle_exception(e, 2, args.stacktrace if args is not None else False)
    except TaskFailedError as e:
        handle_exception(e, 4, args.stacktrace if args is not None else False)
    except ConcurrencyError as e:
        handle_exception(e, 5, args.stacktrace if args is not None else True)
    except IpfLabError as e:
        handle_exception(e, 7, args.stacktrace if args is not None else True)
    except Exception as e:
        handle_exception(e, 9, args.stacktrace if args is not None else True, prefix="UNEXPECTED ERROR")
    finally:
        if created_lock_file and lock_file is not None:
            lock_file.unlink(missing_ok=True)


if __name__ == "__main__":
    main()
