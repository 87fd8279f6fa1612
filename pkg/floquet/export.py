"""
CSV and JSON writers. CSV numbers carry 17 significant digits; JSON floats use the
shortest repr that round-trips, with infinities spelled ``"inf"``.
"""

import csv
import json
import logging
from contextlib import nullcontext
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Final, Iterable, List, Mapping, Optional, Sequence, TextIO, Tuple, Union

import numpy as np

from .errors import ConfigError
from .integrator import Trajectory
from .lab import NeighborhoodReport, PsiSeries
from .spectral import encode_float, verdict_to_dict

__all__ = [
    "REPORT_SCHEMA",
    "SCAN_SCHEMA",
    "ScanRow",
    "format_number",
    "psi_paths",
    "read_trajectory_csv",
    "report_to_dict",
    "write_json",
    "write_psi_csv",
    "write_scan_csv",
    "write_trajectory_csv",
]

LOG: Final = logging.getLogger("floquet.export")
REPORT_SCHEMA: Final[str] = "floquet.neighborhood/1"
SCAN_SCHEMA: Final[str] = "floquet.scan/1"

PathLike = Union[str, Path]


@dataclass(frozen=True)
class ScanRow:
    values: Tuple[float, ...]
    stable: Optional[bool] = None
    strongly_stable: Optional[bool] = None
    delta_color: Optional[float] = None
    max_modulus: Optional[float] = None
    error: Optional[str] = None


def format_number(value: Optional[float]) -> str:
    if value is None:
        return ""
    return format(float(value), ".17g")


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating, int, np.integer)):
        return format_number(value)
    return str(value)


def _writer(file) -> Any:
    return csv.writer(file, lineterminator="\n")


def _open(path: PathLike):
    try:
        return open(path, "w", newline="", encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot write {path}: {e}") from e


def write_trajectory_csv(trajectory: Trajectory, path: PathLike) -> None:
    """
    One row per grid point: ``t, vec(X) row-major, residual``, after a ``#`` line
    recording label, method and step count.
    """
    dimension = trajectory.J.dimension
    header = ["t"]
    header += [f"x{i + 1}_{j + 1}" for i in range(dimension) for j in range(dimension)]
    header.append("residual")
    config = trajectory.config
    with _open(path) as file:
        file.write(
            f"# floquet trajectory label={trajectory.label} method={config.method.value} "
            f"steps_per_period={config.steps_per_period} period={format_number(trajectory.period)}\n"
        )
        writer = _writer(file)
        writer.writerow(header)
        for t, matrix, residual in zip(trajectory.times, trajectory.matrices, trajectory.residuals):
            writer.writerow([format_number(t), *map(format_number, matrix.ravel()), format_number(residual)])
    LOG.debug("wrote %d trajectory rows to %s", len(trajectory), path)


def read_trajectory_csv(path: PathLike) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(times, matrices, residuals) from a file written by :func:`write_trajectory_csv`."""
    try:
        with open(path, newline="", encoding="utf-8") as file:
            reader = csv.reader(row for row in file if not row.startswith("#"))
            header = next(reader)
            rows = [[float(x) for x in record] for record in reader if record]
    except (OSError, StopIteration, ValueError) as e:
        raise ConfigError(f"cannot read trajectory from {path}: {e}") from e
    dimension = int(round((len(header) - 2) ** 0.5))
    if header[0] != "t" or header[-1] != "residual" or dimension ** 2 != len(header) - 2:
        raise ConfigError(f"{path} does not have the trajectory layout")
    data = np.array(rows).reshape(len(rows), len(header))
    return data[:, 0], data[:, 1:-1].reshape(-1, dimension, dimension), data[:, -1]


def write_psi_csv(series: PsiSeries, path: PathLike) -> None:
    with _open(path) as file:
        writer = _writer(file)
        writer.writerow(["t", "psi"])
        writer.writerows((format_number(t), format_number(p)) for t, p in zip(series.times, series.psi))


def psi_paths(path: PathLike, series: Sequence[PsiSeries]) -> List[Path]:
    """``path`` for a single series, else one ``<stem>.scale-<s><suffix>`` per series."""
    path = Path(path)
    if len(series) == 1:
        return [path]
    return [path.with_name(f"{path.stem}.scale-{s.scale:g}{path.suffix or '.csv'}") for s in series]


def write_scan_csv(axes: Sequence[str], rows: Iterable[ScanRow], target: Union[PathLike, TextIO]) -> None:
    """Write to a path, or to an already open text stream."""
    with (nullcontext(target) if hasattr(target, "write") else _open(target)) as file:
        writer = _writer(file)
        writer.writerow([*axes, "stable", "strongly_stable", "delta_color", "max_modulus", "error"])
        for row in rows:
            writer.writerow(
                [
                    *map(_cell, row.values),
                    *map(_cell, (row.stable, row.strongly_stable, row.delta_color, row.max_modulus, row.error)),
                ]
            )


def report_to_dict(report: NeighborhoodReport) -> Dict[str, Any]:
    rows = []
    for row in report.rows:
        rows.append(
            {
                "scale": row.scale,
                "e_norm_max": encode_float(row.e_norm_max) if row.error is None else None,
                "e_integral": encode_float(row.e_integral) if row.error is None else None,
                "coupling_norm": encode_float(row.coupling_norm) if row.error is None else None,
                "stable": row.stable,
                "strongly_stable": row.strongly_stable,
                "delta_color": encode_float(row.delta_color),
                "psi_max": encode_float(row.psi_max) if row.error is None else None,
                "color_margin": encode_float(row.color_margin) if row.error is None else None,
                "matrix_stable": None if row.matrix_verdict is None else row.matrix_verdict.stable,
                "matrix_strongly_stable": (
                    None if row.matrix_verdict is None else row.matrix_verdict.strongly_stable
                ),
                "error": row.error,
            }
        )
    return {
        "schema": REPORT_SCHEMA,
        "label": report.label,
        "u": list(report.u),
        "largest_stable_scale": report.largest_stable_scale,
        "unperturbed": verdict_to_dict(report.unperturbed),
        "rows": rows,
    }


def write_json(document: Mapping[str, Any], path: Optional[PathLike] = None) -> str:
    """Serialise ``document``; also write it to ``path`` when given."""
    text = json.dumps(document, indent=2, allow_nan=False) + "\n"
    if path is not None:
        with _open(path) as file:
            file.write(text)
        LOG.debug("wrote %s", path)
    return text
