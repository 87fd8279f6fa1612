"""
Command-line interface.

    floquet analyze  --config mathieu-stable
    floquet perturb  --config mathieu-stable --out-csv psi.csv --out-json report.json
    floquet scan     --system mathieu --grid a=1:20:40 --grid b=0:6:13 --out-csv map.csv
    floquet verify   --config coupled-triple-a --seed 1

Exit status: 0 success, 1 unstable system (analyze) or failed invariant (verify),
2 invalid input, 3 numerical failure.
"""

import argparse
import asyncio
import functools
import itertools
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Callable, Dict, Final, List, Mapping, Optional, Sequence, TextIO, Tuple

from . import __version__
from .checks import run_checks
from .config import (
    RunConfig,
    ScanAxis,
    SystemSpec,
    load_run_config,
    parse_floats,
    parse_param,
    preset_names,
)
from .errors import ConfigError, ExitStatus, FloquetError
from .export import (
    SCAN_SCHEMA,
    ScanRow,
    psi_paths,
    report_to_dict,
    write_json,
    write_psi_csv,
    write_scan_csv,
    write_trajectory_csv,
)
from .integrator import Method, PropagationConfig, monodromy
from .lab import PerturbationExperiment, neighborhood_scan
from .spectral import (
    SpectralTolerances,
    StabilityVerdict,
    encode_float,
    strong_stability_verdict,
    verdict_to_dict,
)
from .systems import FAMILIES, build_system

__all__ = ["cmd_analyze", "cmd_perturb", "cmd_scan", "cmd_verify", "main"]

LOG: Final = logging.getLogger("floquet.cli")
HANDLER_NAME: Final[str] = "floquet-cli"


def n_or_greater(n: int) -> Callable[[str], int]:
    """argparse ``type=`` for integers no smaller than ``n``."""

    def convert(argument: str) -> int:
        try:
            value = int(argument)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not an integer: {argument!r}") from None
        if value < n:
            raise argparse.ArgumentTypeError(f"must be at least {n}, got {value}")
        return value

    return convert


def float_list(argument: str) -> Tuple[float, ...]:
    return parse_floats(argument)


def param(argument: str) -> Tuple[str, object]:
    return parse_param(argument)


def grid_axis(argument: str) -> ScanAxis:
    return ScanAxis.parse(argument)


def _options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config", metavar="PATH|PRESET", help=f"run file or bundled preset ({', '.join(preset_names())})"
    )
    common.add_argument("--system", choices=list(FAMILIES), help="system family")
    common.add_argument(
        "--param", type=param, action="append", default=[], metavar="K=V", help="system parameter (repeatable)"
    )
    common.add_argument("--u", type=float_list, metavar="V1,V2,...", help="perturbation vector u")
    common.add_argument("--scales", type=float_list, metavar="S1,S2,...", help="multiples of u to test")
    common.add_argument("--periods", type=n_or_greater(1), help="periods covered by ψ(t)")
    common.add_argument("--steps", type=n_or_greater(16), help="integration steps per period")
    common.add_argument("--method", type=Method.convert, metavar="{gauss4,gauss6,rk4}")
    common.add_argument("--out-json", metavar="PATH")
    common.add_argument("--out-csv", metavar="PATH")
    common.add_argument("--seed", type=int, help="seed for randomised checks")
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _options()
    parser = argparse.ArgumentParser(
        prog="floquet", description="Stability of linear periodic Hamiltonian systems under rank-one perturbations."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    commands.add_parser("analyze", parents=[common], help="multipliers and the strong-stability verdict")
    commands.add_parser("perturb", parents=[common], help="ψ(t) and stability across scaled perturbations")
    scan = commands.add_parser("scan", parents=[common], help="stability map over a parameter grid")
    scan.add_argument(
        "--grid", type=grid_axis, action="append", default=[], metavar="NAME=START:STOP:COUNT",
        help="grid axis (repeatable, at most two)",
    )
    scan.add_argument("--workers", type=n_or_greater(1), help="worker processes")
    commands.add_parser("verify", parents=[common], help="run the invariant suite on the configured system")
    return parser


def apply_overrides(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    """Command-line flags win over the run file."""
    params = dict(args.param)
    if args.system is not None and args.system != config.system.family:
        system = SystemSpec(args.system, params)
    else:
        system = config.system.with_params(params)
    propagation = config.propagation
    if args.steps is not None:
        propagation = replace(propagation, steps_per_period=args.steps)
    if args.method is not None:
        propagation = replace(propagation, method=args.method)
    changes: Dict[str, object] = {"system": system, "propagation": propagation}
    for name in ("u", "scales", "periods", "seed", "out_json", "out_csv"):
        value = getattr(args, name)
        if value is not None:
            changes[name] = value
    if getattr(args, "grid", None):
        changes["grid"] = tuple(args.grid)
    if getattr(args, "workers", None) is not None:
        changes["workers"] = args.workers
    return replace(config, **changes)


def _format_verdict(verdict: StabilityVerdict) -> List[str]:
    lines = [f"{'multiplier':>34}  {'modulus':>14}  {'kind':>10}  {'color':>10}  {'(iJx,x)':>11}  {'(S0x,x)':>11}"]
    for r in verdict.records:
        value = f"{r.value.real:+.12f}{r.value.imag:+.12f}i"
        lines.append(
            f"{value:>34}  {r.modulus:>14.12f}  {r.kind.value:>10}  {r.color.value:>10}  "
            f"{r.kind_form:>+11.3e}  {r.color_form:>+11.3e}"
        )
    lines.append("")
    lines.append(f"delta_kgl     {verdict.delta_kgl:.12g}")
    lines.append(f"delta_color   {verdict.delta_color:.12g}")
    lines.append(f"max modulus   {verdict.max_modulus:.17g}")
    for c in verdict.criteria:
        value = "n/a" if c.value is None else f"{c.value:.6g}"
        lines.append(f"  [{'pass' if c.passed else 'FAIL'}] {c.name:<16} {value:>12}  {c.detail}")
    lines.append(f"stable          {str(verdict.stable).lower()}")
    lines.append(f"strongly stable {str(verdict.strongly_stable).lower()}")
    return lines


def cmd_analyze(config: RunConfig, out: TextIO = sys.stdout) -> ExitStatus:
    base = config.system.build()
    result = monodromy(base, config.propagation)
    verdict = strong_stability_verdict(result, base.J, config.tolerances, label=base.label)
    print(f"{base!r}", file=out)
    print("\n".join(_format_verdict(verdict)), file=out)
    if result.degraded:
        print(f"warning: symplecticity residual {result.residual:.3g} exceeds the alarm", file=out)
    if config.out_json:
        write_json(verdict_to_dict(verdict), config.out_json)
    if config.out_csv and result.trajectory is not None:
        write_trajectory_csv(result.trajectory, config.out_csv)
    return ExitStatus.SUCCESS if verdict.stable else ExitStatus.UNSTABLE


def cmd_perturb(config: RunConfig, out: TextIO = sys.stdout) -> ExitStatus:
    if config.u is None:
        raise ConfigError("perturb needs a perturbation vector: --u or [perturbation] u")
    base = config.system.build()
    update = config.update()
    scales = config.scales
    if update.is_zero:
        LOG.info("u = 0: a single series")
        scales = (1.0,)
    experiment = PerturbationExperiment(
        base, update, scales, config.propagation, config.tolerances, config.periods
    )
    report = neighborhood_scan(experiment)
    print(f"{base!r}  u={list(update.u)}", file=out)
    print(
        f"{'scale':>8}  {'max|E|':>11}  {'int|E|':>11}  {'|uuJW|':>11}  {'psi_max':>11}  "
        f"{'stable':>6}  {'strong':>6}  {'delta_color':>11}",
        file=out,
    )
    for row in report.rows:
        if row.error is not None:
            print(f"{row.scale:>8g}  failed: {row.error}", file=out)
            continue
        print(
            f"{row.scale:>8g}  {row.e_norm_max:>11.4e}  {row.e_integral:>11.4e}  {row.coupling_norm:>11.4e}  "
            f"{row.psi_max:>11.4e}  {str(row.stable).lower():>6}  {str(row.strongly_stable).lower():>6}  "
            f"{row.delta_color:>11.4g}",
            file=out,
        )
    print(f"largest stable scale: {report.largest_stable_scale}", file=out)
    if config.out_csv:
        series = [row.series for row in report.rows if row.series is not None]
        for path, one in zip(psi_paths(config.out_csv, series), series):
            write_psi_csv(one, path)
    if config.out_json:
        write_json(report_to_dict(report), config.out_json)
    return ExitStatus.SUCCESS if report.completed else ExitStatus.NUMERICAL_FAILURE


def _scan_point(
    family: str,
    params: Mapping[str, object],
    names: Sequence[str],
    values: Sequence[float],
    propagation: PropagationConfig,
    tolerances: SpectralTolerances,
) -> ScanRow:
    point = tuple(float(v) for v in values)
    try:
        base = build_system(family, {**params, **dict(zip(names, point))})
        verdict = strong_stability_verdict(monodromy(base, propagation), base.J, tolerances)
    except FloquetError as e:
        LOG.warning("scan point %s failed: %s", dict(zip(names, point)), e)
        return ScanRow(point, error=f"{type(e).__name__}: {e}")
    return ScanRow(point, verdict.stable, verdict.strongly_stable, verdict.delta_color, verdict.max_modulus)


async def _scan_pool(
    jobs: List[Callable[[], ScanRow]], workers: Optional[int]
) -> List[ScanRow]:
    loop = asyncio.get_running_loop()
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(await asyncio.gather(*(loop.run_in_executor(pool, job) for job in jobs)))


def cmd_scan(config: RunConfig, out: TextIO = sys.stdout) -> ExitStatus:
    if not config.grid:
        raise ConfigError("scan needs at least one --grid NAME=START:STOP:COUNT axis")
    names = [axis.name for axis in config.grid]
    points = list(itertools.product(*(axis.values() for axis in config.grid)))
    # fail fast on parameters the family does not take
    config.system.with_params(dict(zip(names, map(float, points[0])))).build()
    jobs = [
        functools.partial(
            _scan_point, config.system.family, config.system.params, names, values,
            config.propagation, config.tolerances,
        )
        for values in points
    ]
    LOG.info("scanning %d point(s) over %s", len(jobs), ", ".join(names))
    if config.workers == 1 or len(jobs) == 1:
        rows = [job() for job in jobs]
    else:
        rows = asyncio.run(_scan_pool(jobs, config.workers))
    if config.out_csv:
        write_scan_csv(names, rows, config.out_csv)
    else:
        write_scan_csv(names, rows, out)
    if config.out_json:
        write_json(
            {
                "schema": SCAN_SCHEMA,
                "system": config.system.family,
                "params": dict(config.system.params),
                "axes": [str(axis) for axis in config.grid],
                "rows": [
                    {
                        **dict(zip(names, row.values)),
                        "stable": row.stable,
                        "strongly_stable": row.strongly_stable,
                        "delta_color": encode_float(row.delta_color),
                        "max_modulus": row.max_modulus,
                        "error": row.error,
                    }
                    for row in rows
                ],
            },
            config.out_json,
        )
    return ExitStatus.SUCCESS


def cmd_verify(config: RunConfig, out: TextIO = sys.stdout) -> ExitStatus:
    base = config.system.build()
    update = config.update() if config.u is not None else None
    results = run_checks(base, config.propagation, config.tolerances, update, config.seed)
    print(f"{base!r}", file=out)
    print(f"{'invariant':<26} {'measured':>12} {'bound':>12}  result", file=out)
    for result in results:
        print(
            f"{result.name:<26} {result.value:>12.4e} {result.bound:>12.4e}  {'pass' if result.passed else 'FAIL'}",
            file=out,
        )
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"failed: {', '.join(failed)}", file=out)
    if config.out_json:
        write_json(
            {
                "schema": "floquet.verify/1",
                "system": base.label,
                "checks": [
                    {"name": r.name, "value": encode_float(r.value), "bound": r.bound, "passed": r.passed}
                    for r in results
                ],
            },
            config.out_json,
        )
    return ExitStatus.CHECK_FAILED if failed else ExitStatus.SUCCESS


COMMANDS: Final[Dict[str, Callable[[RunConfig, TextIO], ExitStatus]]] = {
    "analyze": cmd_analyze,
    "perturb": cmd_perturb,
    "scan": cmd_scan,
    "verify": cmd_verify,
}


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    root = logging.getLogger("floquet")
    for handler in [h for h in root.handlers if h.get_name() == HANDLER_NAME]:
        root.removeHandler(handler)
    # rebind to the current sys.stderr
    handler = logging.StreamHandler(sys.stderr)
    handler.set_name(HANDLER_NAME)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root.addHandler(handler)
    root.setLevel(level)


def main(argv: Optional[Sequence[str]] = None, out: Optional[TextIO] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    out = out or sys.stdout
    try:
        config = apply_overrides(load_run_config(args.config), args)
        return int(COMMANDS[args.command](config, out))
    except FloquetError as e:
        print(f"floquet: error: {e}", file=sys.stderr)
        return int(e.exit_status)
    except OSError as e:
        print(f"floquet: error: {e}", file=sys.stderr)
        return int(ExitStatus.INVALID_INPUT)


def main_entry() -> None:
    sys.exit(main())
