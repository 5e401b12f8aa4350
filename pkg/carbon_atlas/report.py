"""
Serialization of studies to versioned JSON documents and flat CSV tables.

Every writer follows the same contract: parent directories are created,
an existing file is only replaced with ``overwrite=True``, and output is
byte-stable (sorted keys, fixed float format, ``\\n`` line endings).
"""

import enum
import io
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Union

import numpy as np
import pandas as pd

from carbon_atlas.intensity import Metric
from carbon_atlas.workflow import (
    ALL_METRICS,
    AccountingStudy,
    DeltaHistogram,
    StudyResult,
    daily_delta_distribution,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"
FLOAT_FORMAT = "%.10g"
ACCOUNTING_KIND = "accounting"
STUDY_KIND = "shifting_study"


def _clean(value: Any) -> Any:
    """Convert numpy and enum values to plain JSON types; NaN becomes None."""
    if isinstance(value, Mapping):
        return {str(_clean(k)): _clean(v) for k, v in value.items()}
    if isinstance(value, np.ndarray):
        return [_clean(v) for v in value.tolist()]
    if isinstance(value, (list, tuple, set, frozenset)):
        items = sorted(value) if isinstance(value, (set, frozenset)) else value
        return [_clean(v) for v in items]
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return None if math.isnan(value) or math.isinf(value) else value
    return value


def to_json(document: Mapping[str, Any]) -> str:
    return json.dumps(_clean(document), indent=2, sort_keys=True, allow_nan=False) + "\n"


def frame_to_csv(frame: pd.DataFrame) -> str:
    buffer = io.StringIO()
    frame.to_csv(buffer, float_format=FLOAT_FORMAT, lineterminator="\n", na_rep="")
    return buffer.getvalue()


def write_text(path: Union[str, Path], text: str, overwrite: bool = False) -> Path:
    """Write ``text`` to ``path``.

    Raises:
        FileExistsError: If the file exists and overwrite is False
        IOError: If the file cannot be written
    """
    filepath = Path(path)
    if filepath.exists() and not overwrite:
        raise FileExistsError(f"File already exists: {filepath}")
    filepath.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(filepath, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except Exception as e:
        raise IOError(f"Failed to write {filepath}: {e}") from e
    logger.info("Wrote %s", filepath)
    return filepath


# ---- Accounting study ----


def intensity_frame(study: AccountingStudy, metric: Metric) -> pd.DataFrame:
    """Rows are timesteps, columns are bus ids; not-available values are blank."""
    rows = {
        step.t: [step.intensities[metric][bus] for bus in study.bus_ids]
        for step in study.timesteps
    }
    frame = pd.DataFrame.from_dict(
        rows, orient="index", columns=[str(bus) for bus in study.bus_ids]
    )
    frame.index.name = "t"
    return frame


def accounting_to_dict(study: AccountingStudy) -> Dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": ACCOUNTING_KIND,
        "bus_ids": study.bus_ids,
        "datacenter_loads": study.datacenter_loads,
        "true_system_total": study.true_system_total,
        "timesteps": [
            {
                "t": step.t,
                "true_emissions": step.true_emissions,
                "lmce_fallback": step.lmce_fallback,
                "reports": {
                    metric.value: step.reports[metric].to_dict() for metric in ALL_METRICS
                },
            }
            for step in study.timesteps
        ],
        "failures": [{"t": t, "reason": reason} for t, reason in study.failures],
        "lmce_fallback_timesteps": study.fallback_timesteps,
        "intensity_table": study.intensity_table().to_dict(orient="index"),
        "accounting_table": study.accounting_table().to_dict(orient="index"),
        "bus_means": {
            metric.value: values for metric, values in study.bus_means().items()
        },
    }


def write_metrics_outputs(
    study: AccountingStudy,
    out_dir: Union[str, Path],
    metrics: Iterable[Metric] = ALL_METRICS,
    formats: Iterable[str] = ("json", "csv"),
    overwrite: bool = False,
) -> List[Path]:
    """Per-metric intensity CSVs, the summary tables and one JSON report."""
    out = Path(out_dir)
    formats = set(formats)
    written = []
    if "csv" in formats:
        for metric in metrics:
            written.append(
                write_text(
                    out / f"intensity_{metric.value}.csv",
                    frame_to_csv(intensity_frame(study, metric)),
                    overwrite,
                )
            )
        written.append(
            write_text(
                out / "intensity_table.csv", frame_to_csv(study.intensity_table()), overwrite
            )
        )
        written.append(
            write_text(
                out / "accounting_table.csv",
                frame_to_csv(study.accounting_table()),
                overwrite,
            )
        )
    if "json" in formats:
        written.append(
            write_text(out / "accounting.json", to_json(accounting_to_dict(study)), overwrite)
        )
    return written


# ---- Shifting study ----


def study_to_dict(
    study: StudyResult, histogram: Optional[DeltaHistogram] = None
) -> Dict[str, Any]:
    """Versioned JSON document of one shifting study.

    The histogram is computed when omitted and the study has valid days.
    """
    if histogram is None and study.days:
        histogram = daily_delta_distribution(study)
    config = study.config
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": STUDY_KIND,
        "shift_metric": study.shift_metric.value,
        "digest": study.digest,
        "config": {
            "datacenter_buses": config.datacenter_buses,
            "nominal_load": config.nominal_load,
            "flexibility": config.flexibility,
            "horizon": config.horizon,
        },
        "summary": study.summary(),
        "days": [
            {
                "index": day.index,
                "timesteps": day.timesteps,
                "true_pre": day.true_pre,
                "true_post": day.true_post,
                "true_delta": day.true_delta,
                "estimated_dc": day.estimated_dc,
                "pre_dc": {m.value: day.pre(m) for m in ALL_METRICS},
                "realized_dc": {m.value: day.post(m) for m in ALL_METRICS},
                "pre_system": {m.value: day.pre(m, "system_total") for m in ALL_METRICS},
                "realized_system": {
                    m.value: day.post(m, "system_total") for m in ALL_METRICS
                },
                "plan": day.plan.d,
                "plan_objective": day.plan.objective,
                "lmce_fallback_timesteps": day.fallback_timesteps,
            }
            for day in study.days
        ],
        "dc_delta": {m.value: study.dc_delta(m) for m in ALL_METRICS},
        "failed_days": [
            {"index": index, "reason": reason} for index, reason in study.failed_days
        ],
        "skipped_timesteps": study.skipped_timesteps,
        "metadata": study.metadata,
        "bus_means": {m.value: values for m, values in study.bus_means().items()},
        "histogram": histogram.to_dict() if histogram is not None else None,
    }


def write_study_json(
    study: StudyResult, path: Union[str, Path], overwrite: bool = False
) -> Path:
    return write_text(path, to_json(study_to_dict(study)), overwrite)


def read_study_json(path: Union[str, Path]) -> Dict[str, Any]:
    """Load a study document written by :func:`write_study_json`.

    Raises:
        FileNotFoundError: If the file does not exist
        ValueError: If the file is not a study document of this schema version
        IOError: If the file cannot be read
    """
    load_path = Path(path)
    if not load_path.exists():
        raise FileNotFoundError(f"Study file not found: {load_path}")
    try:
        with open(load_path, "r", encoding="utf-8") as f:
            document = json.load(f)
    except json.JSONDecodeError as e:
        raise ValueError(f"Invalid JSON in study file {load_path}: {e}") from e
    except Exception as e:
        raise IOError(f"Failed to read study file {load_path}: {e}") from e

    if not isinstance(document, dict) or document.get("kind") != STUDY_KIND:
        raise ValueError(f"{load_path} is not a shifting study document.")
    if document.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(
            f"{load_path} has schema version {document.get('schema_version')!r}, "
            f"expected {SCHEMA_VERSION!r}."
        )
    return document


def summary_frame(study: StudyResult) -> pd.DataFrame:
    return pd.DataFrame([study.summary()]).set_index("shift_metric")


def plans_frame(study: StudyResult) -> pd.DataFrame:
    """Long format: one row per (day, datacenter bus, timestep)."""
    rows = []
    for day in study.days:
        for i, bus in enumerate(day.plan.buses):
            for k, t in enumerate(day.timesteps):
                rows.append({"day": day.index + 1, "bus": bus, "t": t, "mw": day.plan.d[i, k]})
    return pd.DataFrame(rows, columns=["day", "bus", "t", "mw"]).set_index(["day", "bus", "t"])


def histogram_frame(histogram: DeltaHistogram) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "bin_left": histogram.edges[:-1],
            "bin_right": histogram.edges[1:],
            "count": histogram.counts,
        }
    ).rename_axis("bin")


def write_study_tables(
    study: StudyResult, out_dir: Union[str, Path], overwrite: bool = False
) -> List[Path]:
    """Shifting-results summary, plans and, with valid days, the histogram CSV."""
    out = Path(out_dir)
    name = study.shift_metric.value
    written = [
        write_text(out / f"shifting_results_{name}.csv", frame_to_csv(summary_frame(study)), overwrite),
        write_text(out / f"plans_{name}.csv", frame_to_csv(plans_frame(study)), overwrite),
    ]
    if study.days:
        written.append(
            write_text(
                out / f"histogram_{name}.csv",
                frame_to_csv(histogram_frame(daily_delta_distribution(study))),
                overwrite,
            )
        )
    return written


def write_cross_metric(
    matrix: pd.DataFrame, path: Union[str, Path], overwrite: bool = False
) -> Path:
    return write_text(path, frame_to_csv(matrix), overwrite)


__all__ = [
    "SCHEMA_VERSION",
    "to_json",
    "frame_to_csv",
    "write_text",
    "intensity_frame",
    "accounting_to_dict",
    "write_metrics_outputs",
    "study_to_dict",
    "write_study_json",
    "read_study_json",
    "summary_frame",
    "plans_frame",
    "histogram_frame",
    "write_study_tables",
    "write_cross_metric",
]
