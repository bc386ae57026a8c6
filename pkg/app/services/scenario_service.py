import hashlib
import json
import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np
from pydantic import ValidationError

from app.config import settings
from app.exceptions import ScenarioParseError
from app.models.simulation import Scenario, VarianceConvention
from app.models.system import LinkMode, LinkModel, SystemModel
from app.schemas.scenario import AnalysisSpec, LinkSpec, ScenarioFile, SimulationSpec, SystemSpec
from app.services.aoi_service import AoiService

logger = logging.getLogger(__name__)


class ScenarioService:
    """Reading, writing and converting scenario files."""

    @staticmethod
    def load(path: Union[str, Path]) -> ScenarioFile:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ScenarioParseError(f"cannot read scenario file: {e.strerror or e}", str(path)) from e
        scenario_file = ScenarioService.parse(text, source=str(path))
        logger.info(f"Loaded scenario '{scenario_file.name}' from {path}")
        return scenario_file

    @staticmethod
    def parse(text: str, source: Optional[str] = None) -> ScenarioFile:
        """Parse scenario JSON; errors carry the line/column or the dotted field path."""
        prefix = f"{source}:" if source else ""
        try:
            document = json.loads(text)
        except json.JSONDecodeError as e:
            raise ScenarioParseError(e.msg, f"{prefix}line {e.lineno} column {e.colno}") from e
        try:
            return ScenarioFile.model_validate(document)
        except ValidationError as e:
            first = e.errors()[0]
            field_path = ".".join(str(part) for part in first["loc"]) or "<root>"
            raise ScenarioParseError(first["msg"], f"{prefix}{field_path}") from e

    @staticmethod
    def dumps(scenario_file: ScenarioFile) -> str:
        return json.dumps(scenario_file.model_dump(mode="json"), indent=2) + "\n"

    @staticmethod
    def save(scenario_file: ScenarioFile, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(ScenarioService.dumps(scenario_file), encoding="utf-8")
        return path

    @staticmethod
    def scenario_hash(scenario_file: ScenarioFile) -> str:
        """sha256 of the canonical JSON form (sorted keys, no whitespace)."""
        canonical = json.dumps(scenario_file.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    @staticmethod
    def build_link(spec: LinkSpec) -> LinkModel:
        if spec.mode == LinkMode.FIXED_AGE:
            return LinkModel.fixed_age(spec.age)
        if spec.mode == LinkMode.PERIODIC:
            return LinkModel.periodic(spec.period)
        return LinkModel.bernoulli(spec.p)

    @staticmethod
    def build_model(spec: SystemSpec, history_depth: Optional[int] = None) -> SystemModel:
        return SystemModel(
            A=np.array(spec.A, dtype=float),
            B=np.array(spec.B, dtype=float),
            sigma=np.array(spec.sigma, dtype=float),
            g=np.array(spec.g, dtype=float),
            x_aim=np.array(spec.x_aim, dtype=float),
            delta_g=spec.delta_g,
            history_depth=history_depth or spec.history_depth or settings.history_depth,
        )

    @staticmethod
    def to_domain(
        scenario_file: ScenarioFile,
        noise_scale: float = 1.0,
        link: Optional[LinkModel] = None,
        convention: Optional[VarianceConvention] = None,
        horizon: Optional[int] = None,
        episodes: Optional[int] = None,
        seed: Optional[int] = None,
    ) -> Scenario:
        """Build the immutable Scenario; keyword arguments override the file's values."""
        model = ScenarioService.build_model(scenario_file.system)
        if noise_scale != 1.0:
            model = model.with_noise_scale(noise_scale)
        link = link or ScenarioService.build_link(scenario_file.link)
        simulation = scenario_file.simulation
        warmup = simulation.warmup
        if warmup is None:
            warmup = AoiService.default_warmup(link, model.history_depth)
        x0 = scenario_file.x0 if scenario_file.x0 is not None else scenario_file.system.x_aim
        return Scenario(
            model=model,
            link=link,
            x0=np.array(x0, dtype=float),
            horizon=horizon or simulation.horizon,
            episodes=episodes or simulation.episodes,
            warmup=warmup,
            base_seed=simulation.seed if seed is None else seed,
            convention=convention or scenario_file.analysis.convention or settings.default_convention,
            sample_stride=simulation.sample_stride,
        )

    @staticmethod
    def from_domain(scenario: Scenario, name: str = "scenario", base: Optional[ScenarioFile] = None) -> ScenarioFile:
        """Serializable form of `scenario`; grids and output settings come from `base`."""
        model = scenario.model
        link = scenario.link
        updates = {
            "name": name,
            "system": SystemSpec(
                A=model.A.tolist(),
                B=model.B.tolist(),
                sigma=model.sigma.tolist(),
                g=model.g[0].tolist(),
                x_aim=model.x_aim.tolist(),
                delta_g=model.delta_g,
                history_depth=model.history_depth,
            ),
            "link": LinkSpec(mode=link.mode, p=link.p, age=link.age, period=link.period),
            "x0": scenario.x0.tolist(),
            "simulation": SimulationSpec(
                horizon=scenario.horizon,
                episodes=scenario.episodes,
                warmup=scenario.warmup,
                seed=scenario.base_seed,
                sample_stride=scenario.sample_stride,
            ),
        }
        if base is None:
            return ScenarioFile(**updates, analysis=AnalysisSpec(convention=scenario.convention))
        analysis = base.analysis.model_copy(update={"convention": scenario.convention})
        return base.model_copy(update={**updates, "analysis": analysis})

    @staticmethod
    def same_scenario(a: Scenario, b: Scenario) -> bool:
        """Field-by-field equality, arrays compared exactly."""
        ma, mb = a.model, b.model
        arrays = [(ma.A, mb.A), (ma.B, mb.B), (ma.sigma, mb.sigma), (ma.g, mb.g), (ma.x_aim, mb.x_aim), (a.x0, b.x0)]
        return (
            all(np.array_equal(x, y) for x, y in arrays)
            and ma.delta_g == mb.delta_g
            and ma.history_depth == mb.history_depth
            and a.link == b.link
            and (a.horizon, a.episodes, a.warmup, a.base_seed, a.sample_stride)
            == (b.horizon, b.episodes, b.warmup, b.base_seed, b.sample_stride)
            and a.convention == b.convention
        )
