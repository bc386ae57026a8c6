import logging
from pathlib import Path
from typing import Optional, Sequence, Union

from app.config import settings
from app.exceptions import AcceptanceError, UsageError
from app.models.simulation import Axis, VarianceConvention
from app.models.system import LinkMode, LinkModel
from app.schemas.results import ResultMetadata, ResultTable
from app.services.montecarlo_service import MonteCarloService
from app.services.outage_service import OutageService
from app.services.scenario_service import ScenarioService
from app.services.storage_service import StorageService
from app.tasks.episode_tasks import EpisodeRunner

logger = logging.getLogger(__name__)

ANALYZE_COLUMNS = ["age", "sigma_g_sq", "p_out", "regime"]
SIMULATE_COLUMNS = ["age", "count", "outages", "p_sim", "ci_half_width", "p_model"]
COMPARE_COLUMNS = ["noise_scale", "age", "p_sim", "ci_half_width", "p_model", "within_ci", "var_sim", "var_model"]
INFLECTION_COLUMNS = ["axis", "paper_value", "numeric_value", "closed_form"]

PathLike = Union[str, Path, None]
AUTO = "auto"


def _emit(table: ResultTable, output_path: PathLike, default_path: Optional[str], output_format: Optional[str]) -> None:
    StorageService(output_format).store(table, output_path if output_path is not None else default_path)


def _require_grid(values: Optional[Sequence], fallback: Sequence, name: str) -> list:
    grid = list(fallback if values is None else values)
    if not grid:
        raise UsageError(f"{name} must not be empty")
    return grid


def cmd_analyze(
    scenario_path: PathLike,
    ages: Optional[Sequence[int]] = None,
    output_path: PathLike = None,
    convention: Optional[VarianceConvention] = None,
    axis: Optional[Axis] = None,
    noise_scale: float = 1.0,
    output_format: Optional[str] = None,
) -> ResultTable:
    """Tabulate sigma_G^2, p_out and the regime for each age; no simulation."""
    scenario_file = ScenarioService.load(scenario_path)
    scenario = ScenarioService.to_domain(scenario_file, noise_scale=noise_scale, convention=convention)
    ages = _require_grid(ages, scenario_file.analysis.ages, "ages")
    axis = axis or scenario_file.analysis.axis or settings.default_axis
    model = scenario.model

    points = OutageService.outage_curve(model, ages, scenario.convention, axis)
    table = ResultTable(
        metadata=ResultMetadata(
            command="analyze",
            scenario_hash=ScenarioService.scenario_hash(scenario_file),
            scenario_name=scenario_file.name,
            convention=scenario.convention.value,
            extra={
                "axis": axis.value,
                "delta_g": model.delta_g,
                "g_band": list(model.g_band),
                "noise_scale": noise_scale,
                "inflection_variance_axis": OutageService.regime_threshold(model.delta_g, Axis.VARIANCE),
                "inflection_std_dev_axis": OutageService.regime_threshold(model.delta_g, Axis.STD_DEV),
            },
        ),
        columns=ANALYZE_COLUMNS,
        rows=[[point.age, point.sigma_g_sq, point.p_out, point.regime] for point in points],
    )
    _emit(table, output_path, scenario_file.output.path, output_format or scenario_file.output.format)
    return table


def cmd_simulate(
    scenario_path: PathLike,
    output_path: PathLike = None,
    seed: Optional[int] = None,
    threads: Optional[int] = None,
    executor: Optional[str] = None,
    noise_scale: float = 1.0,
    fixed_age: Optional[int] = None,
    episodes: Optional[int] = None,
    horizon: Optional[int] = None,
    convention: Optional[VarianceConvention] = None,
    confidence: Optional[float] = None,
    output_format: Optional[str] = None,
) -> ResultTable:
    """Run the Monte-Carlo loop and write per-age empirical rates plus an `all` summary row."""
    scenario_file = ScenarioService.load(scenario_path)
    link = LinkModel.fixed_age(fixed_age) if fixed_age is not None else None
    scenario = ScenarioService.to_domain(
        scenario_file,
        noise_scale=noise_scale,
        link=link,
        convention=convention,
        horizon=horizon,
        episodes=episodes,
        seed=seed,
    )
    confidence = confidence or settings.confidence
    logger.info(f"Simulating scenario '{scenario_file.name}' with seed {scenario.base_seed}")

    with EpisodeRunner(threads, executor) as runner:
        stats = runner(scenario)

    rows = [
        [row["age"], row["counted_steps"], row["outage_steps"], row["p_sim"], row["ci_half_width"], row["p_model"]]
        for row in MonteCarloService.age_breakdown(stats, scenario, confidence)
    ]
    overall = MonteCarloService.estimate_rate(stats, confidence)
    model = scenario.model
    p_model = None
    if scenario.link.mode == LinkMode.FIXED_AGE:
        _, p_model = OutageService.model_probability(model, scenario.link.age, scenario.convention)
    elif scenario.link.mode == LinkMode.BERNOULLI:
        p_model = OutageService.stationary_outage_probability(model, scenario.link.p, scenario.convention)
    rows.append(["all", stats.counted_steps, stats.outage_steps, overall.p_sim, overall.ci_half_width, p_model])

    table = ResultTable(
        metadata=ResultMetadata(
            command="simulate",
            scenario_hash=ScenarioService.scenario_hash(scenario_file),
            scenario_name=scenario_file.name,
            seed=scenario.base_seed,
            convention=scenario.convention.value,
            extra={
                "link": str(scenario.link),
                "noise_scale": noise_scale,
                "horizon": scenario.horizon,
                "warmup": scenario.warmup,
                "episodes": stats.episodes,
                "sample_stride": scenario.sample_stride,
                "confidence": confidence,
                "error_mean": stats.error_mean,
                "error_variance": stats.empirical_variance,
            },
        ),
        columns=SIMULATE_COLUMNS,
        rows=rows,
    )
    _emit(table, output_path, scenario_file.output.path, output_format or scenario_file.output.format)
    return table


def cmd_compare(
    scenario_path: PathLike,
    noise_grid: Optional[Sequence[float]] = None,
    age_grid: Optional[Sequence[int]] = None,
    output_path: PathLike = None,
    convention: Union[VarianceConvention, str, None] = None,
    seed: Optional[int] = None,
    threads: Optional[int] = None,
    executor: Optional[str] = None,
    episodes: Optional[int] = None,
    horizon: Optional[int] = None,
    confidence: Optional[float] = None,
    acceptance: bool = False,
    include_stationary: bool = False,
    output_format: Optional[str] = None,
) -> ResultTable:
    """Model-vs-simulation grid. `convention="auto"` picks it with a calibration run.

    In acceptance mode the table is written first, then AcceptanceError is raised
    when fewer than settings.acceptance_fraction of the cells are within their CI.
    """
    scenario_file = ScenarioService.load(scenario_path)
    noise_grid = _require_grid(noise_grid, scenario_file.analysis.noise_grid, "noise grid")
    age_grid = _require_grid(age_grid, scenario_file.analysis.age_grid, "age grid")
    calibrate = convention == AUTO
    scenario = ScenarioService.to_domain(
        scenario_file,
        convention=None if calibrate else convention,
        horizon=horizon,
        episodes=episodes,
        seed=seed,
    )
    confidence = confidence or settings.confidence
    extra = {"confidence": confidence, "noise_grid": noise_grid, "age_grid": age_grid}

    with EpisodeRunner(threads, executor) as runner:
        if calibrate:
            best, candidates, empirical = MonteCarloService.calibrate_convention(
                scenario, age=min(age_grid), noise_scale=max(noise_grid), runner=runner
            )
            scenario = scenario.with_changes(convention=best)
            extra["calibration_variance"] = empirical
            extra["calibration_candidates"] = {c.value: v for c, v in candidates.items()}
        rows = MonteCarloService.compare(
            scenario,
            noise_grid,
            age_grid,
            confidence=confidence,
            runner=runner,
            rare_event_threshold=settings.rare_event_threshold,
            include_stationary=include_stationary,
        )

    fraction = MonteCarloService.within_ci_fraction(rows)
    extra["within_ci_fraction"] = fraction
    table = ResultTable(
        metadata=ResultMetadata(
            command="compare",
            scenario_hash=ScenarioService.scenario_hash(scenario_file),
            scenario_name=scenario_file.name,
            seed=scenario.base_seed,
            convention=scenario.convention.value,
            extra=extra,
        ),
        columns=COMPARE_COLUMNS,
        rows=[
            [row.noise_scale, row.age, row.p_sim, row.ci_half_width, row.p_model, row.within_ci, row.var_sim, row.var_model]
            for row in rows
        ],
    )
    _emit(table, output_path, scenario_file.output.path, output_format or scenario_file.output.format)
    logger.info(f"{fraction:.1%} of {len(rows)} cells within their {confidence:.0%} interval")

    if acceptance and fraction < settings.acceptance_fraction:
        raise AcceptanceError(
            f"only {fraction:.1%} of cells within CI, need {settings.acceptance_fraction:.0%}"
        )
    return table


def cmd_inflection(
    delta_g: float,
    axis: Optional[Axis] = None,
    output_path: PathLike = None,
    output_format: Optional[str] = None,
) -> ResultTable:
    """Inflection of p_out in variance units; both axes unless one is given."""
    if not delta_g > 0:
        raise UsageError(f"delta_g must be positive, got {delta_g}")
    axes = [axis] if axis is not None else [Axis.VARIANCE, Axis.STD_DEV]
    points = [OutageService.inflection_variance(delta_g, a) for a in axes]
    table = ResultTable(
        metadata=ResultMetadata(command="inflection", extra={"delta_g": delta_g}),
        columns=INFLECTION_COLUMNS,
        rows=[[point.axis, point.paper_value, point.numeric_value, point.closed_form] for point in points],
    )
    _emit(table, output_path, None, output_format)
    return table
