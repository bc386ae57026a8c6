import logging
import math
from collections import Counter
from typing import Callable, Iterable, Optional, Sequence

from scipy import stats as sps

from app.models.simulation import (
    STATIONARY,
    ComparisonRow,
    RateEstimate,
    RunStats,
    Scenario,
    VarianceConvention,
)
from app.models.system import LinkMode, LinkModel
from app.services.aoi_service import AoiService
from app.services.control_service import ControlLoopService
from app.services.outage_service import OutageService
from app.utils.streams import EpisodeStreams

logger = logging.getLogger(__name__)

# maps a scenario to its pooled statistics; the tasks layer provides pooled versions
ScenarioRunner = Callable[[Scenario], RunStats]


class MonteCarloService:
    """Randomized closed-loop episodes and their comparison against the outage model."""

    @staticmethod
    def run_episode(scenario: Scenario, episode_index: int) -> RunStats:
        """Simulate one episode; its random streams depend only on (base_seed, episode_index)."""
        model = scenario.model
        link = scenario.link
        streams = EpisodeStreams.for_episode(scenario.base_seed, episode_index)
        state = ControlLoopService.initial_state(model, scenario.x0, link)

        g_aim = model.g_aim
        delta_g = model.delta_g
        warmup = scenario.warmup
        stride = scenario.sample_stride

        counted = 0
        outages = 0
        ages: Counter = Counter()
        outage_ages: Counter = Counter()
        error_sum = 0.0
        error_sq_sum = 0.0

        for k in range(scenario.horizon):
            state = ControlLoopService.closed_loop_step(model, state, link, streams)
            if k < warmup or (k - warmup) % stride:
                continue
            deviation = model.cost(state.x) - g_aim
            age = state.aoi.age
            counted += 1
            ages[age] += 1
            error_sum += deviation
            error_sq_sum += deviation * deviation
            if abs(deviation) > delta_g:
                outages += 1
                outage_ages[age] += 1

        return RunStats(
            counted_steps=counted,
            outage_steps=outages,
            age_histogram=dict(sorted(ages.items())),
            outage_by_age=dict(sorted(outage_ages.items())),
            error_sum=error_sum,
            error_sq_sum=error_sq_sum,
            seed=scenario.base_seed,
        )

    @staticmethod
    def aggregate(stats: Sequence[RunStats]) -> RunStats:
        """Pool episode statistics.

        Float sums are combined with math.fsum, which is exactly rounded, so
        the result does not depend on the order of `stats`.
        """
        stats = list(stats)
        if not stats:
            raise ValueError("cannot aggregate an empty list of run statistics")
        if len(stats) == 1:
            return stats[0]
        ages: Counter = Counter()
        outage_ages: Counter = Counter()
        for item in stats:
            ages.update(item.age_histogram)
            outage_ages.update(item.outage_by_age)
        return RunStats(
            counted_steps=sum(item.counted_steps for item in stats),
            outage_steps=sum(item.outage_steps for item in stats),
            age_histogram=dict(sorted(ages.items())),
            outage_by_age=dict(sorted(outage_ages.items())),
            error_sum=math.fsum(item.error_sum for item in stats),
            error_sq_sum=math.fsum(item.error_sq_sum for item in stats),
            seed=min(item.seed for item in stats),
            episodes=sum(item.episodes for item in stats),
        )

    @staticmethod
    def simulate(scenario: Scenario, map_fn: Callable = map) -> RunStats:
        """Run every episode of `scenario` through `map_fn` and pool the results."""
        indices = range(scenario.episodes)
        results = map_fn(MonteCarloService.run_episode, [scenario] * scenario.episodes, indices)
        return MonteCarloService.aggregate(list(results))

    @staticmethod
    def wilson_interval(successes: int, total: int, confidence: float) -> RateEstimate:
        if total <= 0:
            raise ValueError("no counted steps to estimate a rate from")
        if not 0.0 < confidence < 1.0:
            raise ValueError(f"confidence must be in (0, 1), got {confidence}")
        z = float(sps.norm.ppf(1.0 - (1.0 - confidence) / 2.0))
        p_hat = successes / total
        z2n = z * z / total
        centre = (p_hat + z2n / 2.0) / (1.0 + z2n)
        half = z / (1.0 + z2n) * math.sqrt(p_hat * (1.0 - p_hat) / total + z2n / (4.0 * total))
        return RateEstimate(
            p_sim=p_hat,
            ci_half_width=half,
            lower=max(0.0, centre - half),
            upper=min(1.0, centre + half),
            confidence=confidence,
        )

    @staticmethod
    def estimate_rate(stats: RunStats, confidence: float = 0.95) -> RateEstimate:
        """Outage rate of pooled statistics with its Wilson score interval."""
        return MonteCarloService.wilson_interval(stats.outage_steps, stats.counted_steps, confidence)

    @staticmethod
    def age_breakdown(
        stats: RunStats,
        scenario: Scenario,
        confidence: float = 0.95,
    ) -> list[dict]:
        """Per-age empirical outage rates next to the model value for that age.

        Age 0 (the controller still holding x(0)) has no model value.
        """
        rows = []
        for age, count in stats.age_histogram.items():
            outages = stats.outage_by_age.get(age, 0)
            rate = MonteCarloService.wilson_interval(outages, count, confidence)
            p_model = None
            if age >= 1:
                _, p_model = OutageService.model_probability(scenario.model, age, scenario.convention)
            rows.append({
                "age": age,
                "counted_steps": count,
                "outage_steps": outages,
                "p_sim": rate.p_sim,
                "ci_half_width": rate.ci_half_width,
                "p_model": p_model,
            })
        return rows

    @staticmethod
    def fixed_age_cell(scenario: Scenario, age: int, noise_scale: float, sample_stride: Optional[int]) -> Scenario:
        """The scenario conditioned on one age and one noise level."""
        link = LinkModel.fixed_age(age)
        warmup = max(scenario.warmup, AoiService.default_warmup(link, scenario.model.history_depth))
        horizon = max(scenario.horizon, warmup + 1)
        return scenario.with_changes(
            model=scenario.model.with_noise_scale(noise_scale),
            link=link,
            warmup=warmup,
            horizon=horizon,
            sample_stride=sample_stride or age + 1,
        )

    @staticmethod
    def compare(
        scenario: Scenario,
        noise_grid: Iterable[float],
        age_grid: Iterable[int],
        confidence: float = 0.99,
        runner: Optional[ScenarioRunner] = None,
        sample_stride: Optional[int] = None,
        rare_event_threshold: float = 1e-7,
        include_stationary: bool = False,
    ) -> list[ComparisonRow]:
        """Simulated vs modelled outage rate for every (noise scale, age) cell.

        Each cell runs the scenario under a fixed-age link with sigma scaled by
        noise_scale^2. When the model rate is below rare_event_threshold only
        the upper Wilson bound is checked.
        """
        noise_grid = list(noise_grid)
        age_grid = list(age_grid)
        if not noise_grid or not age_grid:
            raise ValueError("noise and age grids must not be empty")
        if any(age < 1 for age in age_grid):
            raise ValueError("ages must be >= 1")
        runner = runner or MonteCarloService.simulate
        convention = scenario.convention

        rows = []
        for noise_scale in noise_grid:
            for age in age_grid:
                cell = MonteCarloService.fixed_age_cell(scenario, age, noise_scale, sample_stride)
                stats = runner(cell)
                rate = MonteCarloService.estimate_rate(stats, confidence)
                var_model, p_model = OutageService.model_probability(cell.model, age, convention)
                row = ComparisonRow(
                    noise_scale=noise_scale,
                    age=age,
                    p_sim=rate.p_sim,
                    ci_half_width=rate.ci_half_width,
                    p_model=p_model,
                    within_ci=rate.contains(p_model, rare_event_threshold),
                    var_sim=stats.empirical_variance,
                    var_model=var_model,
                    counted_steps=stats.counted_steps,
                    convention=convention,
                )
                logger.info(
                    f"noise={noise_scale:g} age={age}: p_sim={row.p_sim:.4g} "
                    f"+/-{row.ci_half_width:.2g} p_model={row.p_model:.4g} within_ci={row.within_ci}"
                )
                rows.append(row)

            if include_stationary and scenario.link.mode == LinkMode.BERNOULLI:
                rows.append(MonteCarloService._stationary_row(
                    scenario, noise_scale, confidence, runner, rare_event_threshold
                ))
        return rows

    @staticmethod
    def _stationary_row(
        scenario: Scenario,
        noise_scale: float,
        confidence: float,
        runner: ScenarioRunner,
        rare_event_threshold: float,
    ) -> ComparisonRow:
        """Unconditioned comparison under the scenario's own bernoulli link."""
        model = scenario.model.with_noise_scale(noise_scale)
        p = scenario.link.p
        cell = scenario.with_changes(model=model)
        stats = runner(cell)
        rate = MonteCarloService.estimate_rate(stats, confidence)
        p_model = OutageService.stationary_outage_probability(model, p, scenario.convention)
        ages, weights = AoiService.stationary_pmf_table(p)
        keep = ages <= model.history_depth
        var_model = math.fsum(
            float(weight) * OutageService.error_variance(model, int(age), scenario.convention)
            for age, weight in zip(ages[keep], weights[keep])
        )
        return ComparisonRow(
            noise_scale=noise_scale,
            age=STATIONARY,
            p_sim=rate.p_sim,
            ci_half_width=rate.ci_half_width,
            p_model=p_model,
            within_ci=rate.contains(p_model, rare_event_threshold),
            var_sim=stats.empirical_variance,
            var_model=var_model,
            counted_steps=stats.counted_steps,
            convention=scenario.convention,
        )

    @staticmethod
    def within_ci_fraction(rows: Sequence[ComparisonRow]) -> float:
        return sum(row.within_ci for row in rows) / len(rows) if rows else 0.0

    @staticmethod
    def calibrate_convention(
        scenario: Scenario,
        age: int = 1,
        noise_scale: float = 1.0,
        runner: Optional[ScenarioRunner] = None,
    ) -> tuple[VarianceConvention, dict[VarianceConvention, float], float]:
        """Pick the convention whose sigma_G^2 is closest to a fixed-age simulation.

        Returns (best convention, candidate variances, empirical variance).
        """
        runner = runner or MonteCarloService.simulate
        cell = MonteCarloService.fixed_age_cell(scenario, age, noise_scale, sample_stride=1)
        empirical = runner(cell).empirical_variance
        candidates = {
            convention: OutageService.error_variance(cell.model, age, convention)
            for convention in OutageService.conventions_for(cell.model)
        }
        if not empirical > 0:
            logger.info("Calibration run saw no noise; keeping the scenario convention")
            return scenario.convention, candidates, empirical
        best = min(candidates, key=lambda convention: abs(candidates[convention] - empirical) / empirical)
        logger.info(
            f"Calibration at age {age}: empirical variance {empirical:.5g}, "
            + ", ".join(f"{c.value}={v:.5g}" for c, v in candidates.items())
            + f" -> {best.value}"
        )
        return best, candidates, empirical
