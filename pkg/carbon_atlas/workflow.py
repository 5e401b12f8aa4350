"""
Study harness: per-timestep accounting over a scenario series and the
three-step shifting workflow (pre-shift metrics, shifting, re-dispatch and
realized accounting), plus the cross-metric and daily-delta analyses.
"""

import hashlib
import logging
import math
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from carbon_atlas.data import serialize_case
from carbon_atlas.dcopf import DispatchError, DispatchResult
from carbon_atlas.grid import Network, ScenarioSeries, apply_timestep
from carbon_atlas.intensity import IntensityVector, Metric
from carbon_atlas.lp import LpSolver
from carbon_atlas.metrics import AccountingReport, account_all, compute_all_metrics
from carbon_atlas.shifting import ShiftConfig, ShiftPlan, estimated_accounting, solve_shift, split_days

logger = logging.getLogger(__name__)

ALL_METRICS = (Metric.ACE, Metric.LMCE, Metric.ALMCE, Metric.LACE)
DEFAULT_BINS = 20


# ---- Accounting study ----


@dataclass(frozen=True, eq=False)
class TimestepAccounting:
    t: int
    intensities: Mapping[Metric, IntensityVector]
    reports: Mapping[Metric, AccountingReport]
    true_emissions: float
    lmce_fallback: bool = False


@dataclass(frozen=True, eq=False)
class AccountingStudy:
    """Per-timestep metrics and accounting over a scenario series.

    ``datacenter_loads`` maps each data-center bus to its load id.
    Failed timesteps are listed in ``failures`` and excluded from every
    aggregate.
    """

    bus_ids: Tuple[int, ...]
    datacenter_loads: Mapping[int, int]
    timesteps: Tuple[TimestepAccounting, ...]
    failures: Tuple[Tuple[int, str], ...] = ()

    @property
    def datacenter_buses(self) -> Tuple[int, ...]:
        return tuple(self.datacenter_loads)

    @property
    def true_system_total(self) -> float:
        return math.fsum(step.true_emissions for step in self.timesteps)

    @property
    def fallback_timesteps(self) -> Tuple[int, ...]:
        return tuple(step.t for step in self.timesteps if step.lmce_fallback)

    def accounted_total(self, metric: Metric, subset: str = "system") -> float:
        """Sum over timesteps of the system, datacenter or non_datacenter total."""
        attribute = {
            "system": "system_total",
            "datacenter": "datacenter_total",
            "non_datacenter": "non_datacenter_total",
        }[subset]
        return math.fsum(getattr(step.reports[metric], attribute) for step in self.timesteps)

    def datacenter_accounted(self, metric: Metric, bus: int) -> float:
        load_id = self.datacenter_loads[bus]
        values = [step.reports[metric].per_load[load_id] for step in self.timesteps]
        return math.fsum(v for v in values if not math.isnan(v))

    def intensity_series(self, metric: Metric, bus: int) -> np.ndarray:
        return np.array([step.intensities[metric][bus] for step in self.timesteps], dtype=float)

    def bus_means(self) -> Dict[Metric, Dict[int, float]]:
        """Mean intensity of every bus over all valid timesteps, per metric."""
        means = {}
        for metric in ALL_METRICS:
            means[metric] = {}
            for bus in self.bus_ids:
                values = self.intensity_series(metric, bus)
                values = values[~np.isnan(values)]
                means[metric][bus] = float(values.mean()) if values.size else math.nan
        return means

    def intensity_table(self) -> pd.DataFrame:
        """Mean and SD (population) per metric, whole system and per data center.

        The whole-system statistics pool every bus at every timestep.
        """
        rows = []
        for metric in ALL_METRICS:
            pooled = np.array(
                [v for step in self.timesteps for v in step.intensities[metric].values.values()],
                dtype=float,
            )
            pooled = pooled[~np.isnan(pooled)]
            row = {
                "metric": metric.value,
                "system_mean": float(pooled.mean()) if pooled.size else math.nan,
                "system_sd": float(pooled.std()) if pooled.size else math.nan,
            }
            for bus in self.datacenter_buses:
                values = self.intensity_series(metric, bus)
                values = values[~np.isnan(values)]
                row[f"dc_{bus}_mean"] = float(values.mean()) if values.size else math.nan
                row[f"dc_{bus}_sd"] = float(values.std()) if values.size else math.nan
            rows.append(row)
        return pd.DataFrame(rows).set_index("metric")

    def accounting_table(self) -> pd.DataFrame:
        """Accounted totals (tCO2) per metric next to the true system total."""
        rows = []
        for metric in ALL_METRICS:
            row = {
                "metric": metric.value,
                "true_system": self.true_system_total,
                "system_accounted": self.accounted_total(metric),
                "datacenter_accounted": self.accounted_total(metric, "datacenter"),
            }
            for bus in self.datacenter_buses:
                row[f"dc_{bus}"] = self.datacenter_accounted(metric, bus)
            rows.append(row)
        return pd.DataFrame(rows).set_index("metric")


def _progress(iterable: Iterable, total: int, enabled: bool, desc: str) -> Iterable:
    return tqdm(iterable, total=total, disable=not enabled, desc=desc, unit="step")


def _map_ordered(func: Callable, tasks: List[Any], jobs: int, progress: bool, desc: str) -> List[Any]:
    """Run ``func`` over ``tasks``, in a process pool when ``jobs > 1``; keep order."""
    if jobs > 1 and len(tasks) > 1:
        with Pool(processes=min(jobs, len(tasks))) as pool:
            return list(_progress(pool.imap(func, tasks), len(tasks), progress, desc))
    return [func(task) for task in _progress(tasks, len(tasks), progress, desc)]


def _account_chunk(task) -> List[Any]:
    network, series, steps, solver = task
    results = []
    hint: Optional[DispatchResult] = None
    for t in steps:
        try:
            hour = apply_timestep(network, series, t)
            bundle = compute_all_metrics(hour, t=t, solver=solver, hint=hint)
            hint = bundle.dispatch
            reports = account_all(bundle, hour)
            results.append(
                TimestepAccounting(
                    t=t,
                    intensities=dict(bundle.items()),
                    reports=reports,
                    true_emissions=reports[Metric.ACE].true_system_emissions,
                    lmce_fallback=bundle.lmce_fallback,
                )
            )
        except (DispatchError, ValueError) as e:
            results.append((t, str(e)))
    return results


def _chunks(steps: Sequence[int], size: int) -> List[Sequence[int]]:
    return [steps[i : i + size] for i in range(0, len(steps), size)]


def run_accounting_study(
    network: Network,
    series: Optional[ScenarioSeries] = None,
    solver: Optional[LpSolver] = None,
    jobs: int = 1,
    progress: bool = False,
    chunk_size: int = 24,
) -> AccountingStudy:
    """Dispatch every timestep and account it under all four metrics.

    Args:
        network: Base network; its datacenter loads define the DC subsets
        series: Scenario series; a single identity step when omitted
        solver: LP engine, the bundled simplex by default
        jobs: Worker processes; timesteps are split into chunks of
            ``chunk_size`` and results are folded back in timestep order
        progress: Show a progress bar on standard error

    Returns:
        An AccountingStudy; failing timesteps are recorded, not raised
    """
    if series is None:
        series = ScenarioSeries.identity(network, 1)
    series.check_against(network)
    steps = list(range(1, series.timesteps + 1))
    tasks = [(network, series, chunk, solver) for chunk in _chunks(steps, chunk_size)]

    timesteps, failures = [], []
    for chunk_results in _map_ordered(_account_chunk, tasks, jobs, progress, "accounting"):
        for item in chunk_results:
            if isinstance(item, TimestepAccounting):
                timesteps.append(item)
            else:
                failures.append(item)
                logger.warning("Timestep %d excluded: %s", item[0], item[1])
    if failures:
        logger.warning("%d of %d timesteps failed", len(failures), len(steps))

    datacenter_loads = {load.bus: load.id for load in network.loads if load.is_datacenter}
    return AccountingStudy(
        bus_ids=network.bus_ids,
        datacenter_loads=dict(sorted(datacenter_loads.items())),
        timesteps=tuple(timesteps),
        failures=tuple(failures),
    )


# ---- Shifting study ----


@dataclass(frozen=True, eq=False)
class DayRecord:
    """One shifting day: hourly reports before and after, and the plan."""

    index: int
    timesteps: Tuple[int, ...]
    pre_reports: Tuple[Mapping[Metric, AccountingReport], ...]
    pre_intensities: Tuple[Mapping[Metric, IntensityVector], ...]
    plan: ShiftPlan
    estimated_dc: float
    post_reports: Tuple[Mapping[Metric, AccountingReport], ...]
    fallback_timesteps: Tuple[int, ...] = ()

    def _total(self, reports, metric: Metric, attribute: str) -> float:
        return math.fsum(getattr(hour[metric], attribute) for hour in reports)

    def pre(self, metric: Metric, attribute: str = "datacenter_total") -> float:
        return self._total(self.pre_reports, metric, attribute)

    def post(self, metric: Metric, attribute: str = "datacenter_total") -> float:
        return self._total(self.post_reports, metric, attribute)

    @property
    def true_pre(self) -> float:
        return self.pre(Metric.ACE, "true_system_emissions")

    @property
    def true_post(self) -> float:
        return self.post(Metric.ACE, "true_system_emissions")

    @property
    def true_delta(self) -> float:
        return self.true_post - self.true_pre


@dataclass(frozen=True, eq=False)
class StudyResult:
    """Outcome of shifting on one metric, day by day.

    ``digest`` identifies the inputs (case, series and shift parameters)
    so that studies on different metrics can be checked for comparability.
    """

    shift_metric: Metric
    config: ShiftConfig
    days: Tuple[DayRecord, ...]
    failed_days: Tuple[Tuple[int, str], ...] = ()
    skipped_timesteps: int = 0
    digest: str = ""
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def _days(self, days: Optional[Iterable[int]]) -> List[DayRecord]:
        if days is None:
            return list(self.days)
        wanted = set(days)
        return [day for day in self.days if day.index in wanted]

    def pre_dc(self, metric: Metric, days: Optional[Iterable[int]] = None) -> float:
        return math.fsum(day.pre(metric) for day in self._days(days))

    def realized_dc(self, metric: Metric, days: Optional[Iterable[int]] = None) -> float:
        return math.fsum(day.post(metric) for day in self._days(days))

    def pre_system(self, metric: Metric) -> float:
        return math.fsum(day.pre(metric, "system_total") for day in self.days)

    def realized_system(self, metric: Metric) -> float:
        return math.fsum(day.post(metric, "system_total") for day in self.days)

    @property
    def estimated_dc(self) -> float:
        return math.fsum(day.estimated_dc for day in self.days)

    @property
    def true_pre(self) -> float:
        return math.fsum(day.true_pre for day in self.days)

    @property
    def true_post(self) -> float:
        return math.fsum(day.true_post for day in self.days)

    def dc_delta(self, metric: Metric, days: Optional[Iterable[int]] = None) -> float:
        """Realized minus pre-shift data-center emissions accounted by ``metric``."""
        return self.realized_dc(metric, days) - self.pre_dc(metric, days)

    def system_delta(self, metric: Metric) -> float:
        return self.realized_system(metric) - self.pre_system(metric)

    def non_dc_delta(self, metric: Metric) -> float:
        """Responsibility moved onto other loads: system delta minus DC delta."""
        return self.system_delta(metric) - self.dc_delta(metric)

    def daily_true_deltas(self) -> np.ndarray:
        return np.array([day.true_delta for day in self.days], dtype=float)

    def bus_means(self) -> Dict[Metric, Dict[int, float]]:
        """Mean pre-shift intensity per bus over every valid hour, per metric."""
        hours = [vectors for day in self.days for vectors in day.pre_intensities]
        means: Dict[Metric, Dict[int, float]] = {}
        for metric in ALL_METRICS:
            bus_ids = hours[0][metric].bus_ids if hours else ()
            means[metric] = {}
            for bus in bus_ids:
                values = np.array([vectors[metric][bus] for vectors in hours], dtype=float)
                values = values[~np.isnan(values)]
                means[metric][bus] = float(values.mean()) if values.size else math.nan
        return means

    def summary(self) -> Dict[str, Any]:
        """Headline figures for the shift metric, in tCO2 with percent changes."""
        metric = self.shift_metric
        pre_dc = self.pre_dc(metric)
        pre_system = self.pre_system(metric)

        def pct(new: float, old: float) -> Optional[float]:
            return None if old == 0 else 100.0 * (new - old) / old

        estimated = self.estimated_dc
        realized = self.realized_dc(metric)
        return {
            "shift_metric": metric.value,
            "valid_days": len(self.days),
            "failed_days": len(self.failed_days),
            "pre_shift_dc": pre_dc,
            "estimated_dc": estimated,
            "estimated_dc_pct": pct(estimated, pre_dc),
            "realized_dc": realized,
            "realized_dc_pct": pct(realized, pre_dc),
            "estimated_vs_realized_gap": realized - estimated,
            "pre_shift_non_dc": pre_system - pre_dc,
            "realized_non_dc": self.realized_system(metric) - realized,
            "non_dc_delta": self.non_dc_delta(metric),
            "pre_shift_system": pre_system,
            "realized_system": self.realized_system(metric),
            "true_system_pre": self.true_pre,
            "true_system_post": self.true_post,
            "true_system_pct": pct(self.true_post, self.true_pre),
        }


def study_digest(network: Network, series: ScenarioSeries, config: ShiftConfig) -> str:
    """SHA-256 over the canonical case text, the series arrays and the shift parameters."""
    digest = hashlib.sha256()
    digest.update(serialize_case(network).encode("utf-8"))
    digest.update(repr((series.load_ids, series.gen_ids, series.timesteps)).encode("utf-8"))
    digest.update(np.ascontiguousarray(series.load_multipliers).tobytes())
    digest.update(np.ascontiguousarray(series.gen_pmax).tobytes())
    digest.update(
        repr(
            (config.datacenter_buses, config.nominal_load, config.flexibility, config.horizon)
        ).encode("utf-8")
    )
    return digest.hexdigest()


def _hour_network(base: Network, series: ScenarioSeries, t: int, config: ShiftConfig) -> Network:
    """Timestep ``t`` of ``base`` with every data center back at D_nom."""
    return apply_timestep(base, series, t).with_datacenter_loads(
        config.datacenter_buses, config.nominal_load
    )


def _with_plan_column(network: Network, plan: ShiftPlan, k: int) -> Network:
    for bus, p in zip(plan.buses, plan.d[:, k]):
        network = network.with_datacenter_loads([bus], float(p))
    return network


def _run_day(task) -> Any:
    base, series, index, steps, shift_metric, config, solver = task
    try:
        hours = [_hour_network(base, series, t, config) for t in steps]
        pre_reports, pre_intensities, fallback = [], [], []
        hint = None
        for t, hour in zip(steps, hours):
            bundle = compute_all_metrics(hour, t=t, solver=solver, hint=hint)
            hint = bundle.dispatch
            pre_reports.append(account_all(bundle, hour))
            pre_intensities.append(dict(bundle.items()))
            if bundle.lmce_fallback:
                fallback.append(t)

        pre_vectors = [vectors[shift_metric] for vectors in pre_intensities]
        plan = solve_shift(pre_vectors, config)
        estimated = estimated_accounting(pre_vectors, plan, config)

        post_reports = []
        hint = None
        for k, (t, hour) in enumerate(zip(steps, hours)):
            shifted = _with_plan_column(hour, plan, k)
            bundle = compute_all_metrics(shifted, t=t, solver=solver, hint=hint)
            hint = bundle.dispatch
            post_reports.append(account_all(bundle, shifted))
            if bundle.lmce_fallback and t not in fallback:
                fallback.append(t)
    except (DispatchError, ValueError) as e:
        return (index, str(e))
    return DayRecord(
        index=index,
        timesteps=tuple(steps),
        pre_reports=tuple(pre_reports),
        pre_intensities=tuple(pre_intensities),
        plan=plan,
        estimated_dc=estimated,
        post_reports=tuple(post_reports),
        fallback_timesteps=tuple(sorted(fallback)),
    )


def run_shifting_study(
    network: Network,
    series: ScenarioSeries,
    shift_metric: Metric,
    config: ShiftConfig,
    solver: Optional[LpSolver] = None,
    jobs: int = 1,
    progress: bool = False,
) -> StudyResult:
    """Shift data-center load day by day on ``shift_metric`` and re-dispatch.

    Every hour the data centers start from ``config.nominal_load``; other
    loads follow the series and stay fixed through re-dispatch. Days where
    any hour fails to dispatch are excluded and counted. Pre-shift
    intensities are recomputed here rather than reused from an accounting
    study.

    Raises:
        ValueError: If the datacenter buses are not in ``network`` or the
            series is shorter than one horizon
    """
    config.check_network(network)
    series.check_against(network)
    base = network.with_datacenter_loads(config.datacenter_buses, config.nominal_load)
    days = split_days(series.timesteps, config.horizon)
    if not days:
        raise ValueError(
            f"Series has {series.timesteps} timesteps, fewer than one {config.horizon}-step day."
        )

    tasks = [
        (base, series, index, list(day), shift_metric, config, solver)
        for index, day in enumerate(days)
    ]
    records, failed = [], []
    for item in _map_ordered(_run_day, tasks, jobs, progress, f"shift {shift_metric.value}"):
        if isinstance(item, DayRecord):
            records.append(item)
        else:
            failed.append(item)
            logger.warning("Day %d excluded: %s", item[0] + 1, item[1])

    fallback = [t for record in records for t in record.fallback_timesteps]
    if fallback:
        logger.warning("LMCE used finite differences at %d timestep(s)", len(fallback))
    return StudyResult(
        shift_metric=shift_metric,
        config=config,
        days=tuple(records),
        failed_days=tuple(failed),
        skipped_timesteps=series.timesteps - len(days) * config.horizon,
        digest=study_digest(network, series, config),
        metadata={"lmce_fallback_timesteps": fallback},
    )


# ---- Cross-study analyses ----


def cross_metric_matrix(studies: Mapping[Metric, StudyResult]) -> pd.DataFrame:
    """Data-center emission change for every (shift metric, accounting metric).

    Entries are post-shift minus pre-shift DC emissions, summed over the
    days that are valid in every study.

    Raises:
        ValueError: If the studies were run on different inputs
    """
    if not studies:
        raise ValueError("No studies to compare.")
    digests = {study.digest for study in studies.values()}
    if len(digests) != 1:
        raise ValueError("Studies were run on different inputs and cannot be compared.")
    common = set.intersection(*({day.index for day in study.days} for study in studies.values()))

    shift_metrics = [metric for metric in ALL_METRICS if metric in studies]
    matrix = pd.DataFrame(
        [
            [studies[shift].dc_delta(account, common) for account in ALL_METRICS]
            for shift in shift_metrics
        ],
        index=pd.Index([m.value for m in shift_metrics], name="shift_metric"),
        columns=pd.Index([m.value for m in ALL_METRICS], name="account_metric"),
    )
    return matrix


@dataclass(frozen=True, eq=False)
class DeltaHistogram:
    """Fixed-width histogram of per-day true-emission changes (tCO2)."""

    edges: np.ndarray
    counts: np.ndarray
    deltas: np.ndarray
    mean: float
    median: float
    p10: float
    p90: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "edges": [float(v) for v in self.edges],
            "counts": [int(v) for v in self.counts],
            "mean": self.mean,
            "median": self.median,
            "p10": self.p10,
            "p90": self.p90,
        }


def daily_delta_distribution(study: StudyResult, bins: int = DEFAULT_BINS) -> DeltaHistogram:
    """Histogram and summary statistics of the per-day true-emission deltas.

    Percentiles interpolate linearly between order statistics.

    Raises:
        ValueError: If the study has no valid days
    """
    deltas = study.daily_true_deltas()
    if deltas.size == 0:
        raise ValueError("Study has no valid days.")
    counts, edges = np.histogram(deltas, bins=bins)
    p10, median, p90 = np.percentile(deltas, [10, 50, 90])
    return DeltaHistogram(
        edges=edges,
        counts=counts,
        deltas=deltas,
        mean=float(deltas.mean()),
        median=float(median),
        p10=float(p10),
        p90=float(p90),
    )


__all__ = [
    "ALL_METRICS",
    "TimestepAccounting",
    "AccountingStudy",
    "DayRecord",
    "StudyResult",
    "DeltaHistogram",
    "run_accounting_study",
    "run_shifting_study",
    "study_digest",
    "cross_metric_matrix",
    "daily_delta_distribution",
]
