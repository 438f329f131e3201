"""Command-line entrypoint: rescurve <eigen|curve|asymptotic|check>."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Literal

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from pydantic import BaseModel, ConfigDict, Field, ValidationError  # noqa: E402

from asym import AsymptoticCurve, AsymptoticFormula, asymptotic_curve  # noqa: E402
from checks import SUITES, run_suite  # noqa: E402
from config import get_settings  # noqa: E402
from continuation import (  # noqa: E402
    ContinuationConfig,
    ContinuationError,
    EigenMode,
    LinearUpdate,
    PredictorMode,
    SolutionCurve,
    trace_curve,
)
from problems import UnknownProblemError, builtin, nonlinearity_by_id  # noqa: E402
from specfun import DomainSpec, eigenpair_for, omega_n  # noqa: E402

LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_USAGE = 2

CURVE_COLUMNS = (
    "xi",
    "mu_computed",
    "mu_asymptotic",
    "newton_iters",
    "pde_residual",
    "projection_error",
    "min_u",
    "max_u",
)


class UsageError(ValueError):
    """Invalid command-line or config-file input."""


class RunConfig(BaseModel):
    """One CLI invocation; JSON config files use the same field names."""

    model_config = ConfigDict(extra="forbid")

    command: Literal["eigen", "curve", "asymptotic", "check"]
    problem: str = "disk-usinu-xy"
    domain: str = "disk2d"
    formula: AsymptoticFormula = AsymptoticFormula.DISK_POWER_SIN
    nonlinearity: str = "sqrtsinlog"
    suite: str | None = None
    p: float | None = Field(default=None, ge=0.0, le=1.0)
    dims: list[float] | None = None

    xi_start: float | None = None
    xi_end: float | None = None
    dxi: float | None = Field(default=None, gt=0)
    points: int = Field(default=1000, ge=2)
    log_grid: bool = False

    newton_rel_tol: float = Field(default=1e-8, gt=0)
    mu_floor: float = Field(default=1e-12, gt=0)
    mu_stall_tol: float = Field(default=1e-9, gt=0)
    max_newton_iters: int = Field(default=25, ge=1)
    residual_tol: float = Field(default=1e-6, gt=0)
    mesh: list[int] | None = None
    eigen_mode: EigenMode = EigenMode.DISCRETE
    predictor: PredictorMode = PredictorMode.SECANT
    linear_update: LinearUpdate = LinearUpdate.BORDERED

    out: str | None = None
    plot: bool = False
    signed_log: bool = False
    filter_small: float | None = Field(default=None, ge=0)

    def output_dir(self) -> Path:
        path = Path(self.out or get_settings().output_dir)
        path.mkdir(parents=True, exist_ok=True)
        return path

    def continuation_config(self, default_range: tuple[float, float], default_dxi: float) -> ContinuationConfig:
        return ContinuationConfig(
            xi_start=default_range[0] if self.xi_start is None else self.xi_start,
            xi_end=default_range[1] if self.xi_end is None else self.xi_end,
            dxi=default_dxi if self.dxi is None else self.dxi,
            newton_rel_tol=self.newton_rel_tol,
            mu_floor=self.mu_floor,
            mu_stall_tol=self.mu_stall_tol,
            max_newton_iters=self.max_newton_iters,
            residual_tol=self.residual_tol,
            mesh_resolution=tuple(self.mesh) if self.mesh else None,
            eigen_mode=self.eigen_mode,
            predictor=self.predictor,
            linear_update=self.linear_update,
        )


def _parse_args(argv: Sequence[str] | None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="rescurve",
        description="Solution curves of resonant semilinear Dirichlet problems and their asymptotics.",
    )
    parser.add_argument("command", choices=("eigen", "curve", "asymptotic", "check"))
    parser.add_argument("--config", help="JSON file with RunConfig fields; flags override it.")
    parser.add_argument("--out", help="Output directory (default RESCURVE_OUTPUT_DIR).")
    parser.add_argument("--plot", action="store_true", default=None, help="Also write an SVG plot.")
    parser.add_argument(
        "--signed-log",
        action="store_true",
        default=None,
        help="Add (log xi, sign(mu) log(1 + |mu|)) columns.",
    )
    parser.add_argument("--filter-small", type=float, metavar="MU", help="Drop rows with |mu| < MU.")
    parser.add_argument("--problem", help="Catalog problem id for `curve`.")
    parser.add_argument("--domain", help='Domain for `eigen`: "disk2d", "ball 3", "rect 1 2", "rectnd 1 1 1".')
    parser.add_argument("--formula", help="Asymptotic formula id for `asymptotic`.")
    parser.add_argument("--nonlinearity", help="Nonlinearity id for the projection formula.")
    parser.add_argument("--p", type=float, help="Exponent p of u^p sin u.")
    parser.add_argument("--dims", type=float, nargs="+", help="Box side lengths.")
    parser.add_argument("--suite", help=f"Check suite: {', '.join(SUITES)}.")
    parser.add_argument("--xi-start", type=float)
    parser.add_argument("--xi-end", type=float)
    parser.add_argument("--dxi", type=float)
    parser.add_argument("--points", type=int, help="Number of xi samples for `asymptotic`.")
    parser.add_argument("--log-grid", action="store_true", default=None, help="Log-spaced xi samples.")
    parser.add_argument("--mesh", type=int, nargs="+", help="Mesh node counts (per axis / rings angles).")
    parser.add_argument("--predictor", choices=[mode.value for mode in PredictorMode])
    parser.add_argument("--eigen-mode", choices=[mode.value for mode in EigenMode])
    parser.add_argument("--linear-update", choices=[mode.value for mode in LinearUpdate])
    return parser.parse_args(argv)


def build_run_config(args: argparse.Namespace) -> RunConfig:
    data: dict[str, object] = {}
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"Cannot read config file {args.config}: {exc}") from exc
        data = json.loads(text)
        if not isinstance(data, dict):
            raise UsageError(f"Config file {args.config} must hold a JSON object.")
    overrides = {
        key: value
        for key, value in vars(args).items()
        if key != "config" and value is not None
    }
    data.update(overrides)
    return RunConfig.model_validate(data)


def _fmt(value: float | int | str | None) -> str:
    if value is None:
        return "nan"
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[float | int | str | None]]) -> None:
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(value) for value in row])
    LOGGER.info("Wrote %s (%d rows).", path, len(rows))


def write_svg(
    path: Path,
    xi: np.ndarray,
    computed: np.ndarray,
    asymptotic: np.ndarray | None,
    *,
    title: str,
    xlabel: str = "xi",
    ylabel: str = "mu",
    markers: bool = False,
) -> None:
    figure, axis = plt.subplots(figsize=(7.0, 4.5))
    style = "." if markers else "-"
    axis.plot(xi, computed, style, color="black", linewidth=1.4, markersize=2, label="computed")
    if asymptotic is not None and np.any(np.isfinite(asymptotic)):
        axis.plot(xi, asymptotic, "--", color="tab:red", linewidth=1.2, label="asymptotic")
        axis.legend(loc="best")
    axis.axhline(0.0, color="grey", linewidth=0.5)
    axis.set_xlabel(xlabel)
    axis.set_ylabel(ylabel)
    axis.set_title(title)
    figure.tight_layout()
    figure.savefig(path, format="svg")
    plt.close(figure)
    LOGGER.info("Wrote %s.", path)


def signed_log(xi: np.ndarray, mu: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(log xi, sign(mu) log(1 + |mu|)) for plots spanning many decades."""

    return np.log(xi), np.sign(mu) * np.log1p(np.abs(mu))


def _asymptotic_values(curve: AsymptoticCurve | None, xi: np.ndarray) -> np.ndarray:
    values = np.full(xi.shape, np.nan)
    if curve is None:
        return values
    positive = xi > 0
    if np.any(positive):
        values[positive] = curve(xi[positive])
    return values


def curve_rows(curve: SolutionCurve, asymptotic: AsymptoticCurve | None) -> list[list[float | int]]:
    predicted = _asymptotic_values(asymptotic, curve.xi)
    return [
        [
            point.xi,
            point.mu,
            float(expected),
            point.newton_iters,
            point.pde_residual,
            point.projection_error,
            point.u.min(),
            point.u.max(),
        ]
        for point, expected in zip(curve.points, predicted)
    ]


def cmd_eigen(config: RunConfig) -> int:
    domain = DomainSpec.parse(config.domain)
    pair = eigenpair_for(domain)
    report: dict[str, float] = {"lambda1": pair.lambda1}
    if pair.lambda2 is not None:
        report["lambda2"] = pair.lambda2
    if domain.is_ball:
        report["nu1"] = float(pair.nu1)
        report["c0"] = float(pair.c0)
        report["omega_n"] = omega_n(domain.dimension)
        report["phi1_origin"] = pair.phi1_at_origin
    else:
        centre = [length / 2 for length in domain.lengths]
        report["phi1_center"] = float(pair.phi1(*centre))
    report["measure"] = domain.measure

    print(f"domain = {domain.label()}")
    for name, value in report.items():
        print(f"{name} = {value:.10g}")
    write_csv(
        config.output_dir() / f"eigen-{domain.label()}.csv",
        ("quantity", "value"),
        [[name, value] for name, value in report.items()],
    )
    return EXIT_OK


def cmd_curve(config: RunConfig) -> int:
    problem = builtin(config.problem)
    cfg = config.continuation_config(problem.xi_range, problem.dxi)
    out_dir = config.output_dir()
    csv_path = out_dir / f"{problem.id}.csv"
    status = EXIT_OK
    try:
        curve = trace_curve(problem, cfg)
    except ContinuationError as exc:
        LOGGER.error("Continuation of %s failed at xi=%g: %s", problem.id, exc.xi, exc)
        curve = exc.curve
        status = EXIT_NUMERICAL

    write_csv(csv_path, CURVE_COLUMNS, curve_rows(curve, problem.asymptotic))
    if config.plot and curve.points:
        write_svg(
            out_dir / f"{problem.id}.svg",
            curve.xi,
            curve.mu,
            _asymptotic_values(problem.asymptotic, curve.xi),
            title=problem.description or problem.id,
        )
    return status


def _xi_grid(config: RunConfig) -> np.ndarray:
    start = 1.0 if config.xi_start is None else config.xi_start
    end = 100.0 if config.xi_end is None else config.xi_end
    if start <= 0 or end <= start:
        raise UsageError(f"asymptotic needs 0 < xi_start < xi_end, got [{start}, {end}].")
    if config.log_grid:
        return np.geomspace(start, end, config.points)
    return np.linspace(start, end, config.points)


def cmd_asymptotic(config: RunConfig) -> int:
    nonlinearity = nonlinearity_by_id(config.nonlinearity) if config.formula is AsymptoticFormula.PROJECTION else None
    p = config.p
    if config.formula is AsymptoticFormula.DISK_POWER_SIN and p is None:
        p = 1.0
    try:
        curve = asymptotic_curve(config.formula, p=p, dims=config.dims, nonlinearity=nonlinearity)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    xi = _xi_grid(config)

    with ThreadPoolExecutor(max_workers=get_settings().threads) as executor:
        mu = np.array(list(executor.map(lambda x: curve(float(x)), xi)))

    keep = np.ones(xi.shape, dtype=bool)
    if config.filter_small is not None:
        keep = np.abs(mu) >= config.filter_small
    header: list[str] = ["xi", "mu"]
    columns = [xi[keep], mu[keep]]
    if config.signed_log:
        log_xi, log_mu = signed_log(xi[keep], mu[keep])
        header += ["log_xi", "signed_log_mu"]
        columns += [log_xi, log_mu]

    out_dir = config.output_dir()
    name = f"asymptotic-{config.formula.value}"
    write_csv(out_dir / f"{name}.csv", header, list(zip(*columns)))
    if config.plot:
        if config.signed_log:
            write_svg(
                out_dir / f"{name}.svg",
                columns[2],
                columns[3],
                None,
                title=curve.describe(),
                xlabel="log xi",
                ylabel="sign(mu) log(1 + |mu|)",
                markers=True,
            )
        else:
            write_svg(out_dir / f"{name}.svg", columns[0], columns[1], None, title=curve.describe())
    return EXIT_OK


def cmd_check(config: RunConfig) -> int:
    if config.suite not in SUITES:
        raise UsageError(f"Unknown check suite {config.suite!r}; known: {', '.join(SUITES)}.")
    try:
        results = run_suite(config.suite)
    except ValueError:
        LOGGER.exception("Suite %s could not evaluate its criteria.", config.suite)
        return EXIT_NUMERICAL
    for result in results:
        print(result.model_dump_json())
    failed = [result.criterion for result in results if not result.passed]
    if failed:
        LOGGER.error("Suite %s failed: %s", config.suite, ", ".join(failed))
        return EXIT_NUMERICAL
    LOGGER.info("Suite %s passed (%d criteria).", config.suite, len(results))
    return EXIT_OK


COMMANDS = {
    "eigen": cmd_eigen,
    "curve": cmd_curve,
    "asymptotic": cmd_asymptotic,
    "check": cmd_check,
}


def main(argv: Sequence[str] | None = None) -> int:
    settings = get_settings()
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s - %(message)s",
    )
    args = _parse_args(argv)

    try:
        config = build_run_config(args)
        return COMMANDS[config.command](config)
    except (UsageError, UnknownProblemError, ValidationError, json.JSONDecodeError) as exc:
        print(f"rescurve: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        # DomainSpec.parse and pydantic models report bad user input as ValueError
        print(f"rescurve: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RuntimeError, ArithmeticError):
        LOGGER.exception("Numerical failure during %s.", args.command)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
