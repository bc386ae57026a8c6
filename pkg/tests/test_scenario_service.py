import json

import numpy as np
import pytest

from app.exceptions import NumericalError, ScenarioParseError
from app.models import LinkMode, LinkModel, VarianceConvention
from app.services.scenario_service import ScenarioService


def test_load_platoon_preset(platoon_path):
    scenario_file = ScenarioService.load(platoon_path)
    scenario = ScenarioService.to_domain(scenario_file)
    assert scenario_file.name == "platoon"
    assert np.array_equal(scenario.model.A, [[1, 1, 0], [0, 1, 0], [0, 0, 1]])
    assert scenario.model.B.shape == (3, 1)
    assert scenario.model.delta_g == 12.5
    assert np.array_equal(scenario.x0, [-90.0, 0.0, 25.0])
    assert scenario.link == LinkModel.bernoulli(0.5)
    # default warmup: ten times the largest planned age
    assert scenario.warmup == 300
    assert scenario.convention == VarianceConvention.PAPER_SHIFTED


def test_overrides_replace_file_values(platoon_path):
    scenario = ScenarioService.to_domain(
        ScenarioService.load(platoon_path),
        noise_scale=2.0,
        link=LinkModel.fixed_age(2),
        horizon=1_000,
        episodes=3,
        seed=5,
    )
    assert scenario.model.sigma[1, 1] == 4.0
    assert scenario.link.mode == LinkMode.FIXED_AGE
    assert scenario.warmup == 20
    assert (scenario.horizon, scenario.episodes, scenario.base_seed) == (1_000, 3, 5)


def test_round_trip_keeps_the_scenario(platoon_path):
    original = ScenarioService.load(platoon_path)
    reparsed = ScenarioService.parse(ScenarioService.dumps(original))
    assert reparsed == original
    assert ScenarioService.same_scenario(ScenarioService.to_domain(original), ScenarioService.to_domain(reparsed))


def test_domain_round_trip(platoon_path, tmp_path):
    original = ScenarioService.load(platoon_path)
    scenario = ScenarioService.to_domain(original)
    saved = ScenarioService.save(ScenarioService.from_domain(scenario, original.name, base=original), tmp_path / "s.json")
    assert ScenarioService.same_scenario(ScenarioService.to_domain(ScenarioService.load(saved)), scenario)


def test_hash_is_stable_and_sensitive(platoon_path):
    scenario_file = ScenarioService.load(platoon_path)
    first = ScenarioService.scenario_hash(scenario_file)
    assert first == ScenarioService.scenario_hash(ScenarioService.load(platoon_path))
    assert len(first) == 64
    changed = scenario_file.model_copy(update={"name": "other"})
    assert ScenarioService.scenario_hash(changed) != first


def test_syntax_error_reports_line():
    with pytest.raises(ScenarioParseError) as excinfo:
        ScenarioService.parse('{\n  "name": "x",\n  "system": \n}')
    assert "line 4" in excinfo.value.location


def test_validation_error_reports_field_path(write_scenario):
    with pytest.raises(ScenarioParseError) as excinfo:
        ScenarioService.load(write_scenario(system__delta_g=-1.0))
    assert excinfo.value.location.endswith("system.delta_g")


def test_link_needs_its_parameter(write_scenario):
    with pytest.raises(ScenarioParseError) as excinfo:
        ScenarioService.load(write_scenario(link={"mode": "fixed_age"}))
    assert excinfo.value.location.endswith("link")
    assert "age" in str(excinfo.value)


def test_non_square_system_matrix_is_rejected(write_scenario):
    with pytest.raises(ScenarioParseError) as excinfo:
        ScenarioService.load(write_scenario(system__A=[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))
    assert excinfo.value.location.endswith("system")


def test_unknown_fields_are_rejected(write_scenario):
    with pytest.raises(ScenarioParseError) as excinfo:
        ScenarioService.load(write_scenario(system__extra_gain=3.0))
    assert "system.extra_gain" in excinfo.value.location


def test_missing_file(tmp_path):
    with pytest.raises(ScenarioParseError):
        ScenarioService.load(tmp_path / "absent.json")


def test_non_psd_covariance_is_a_numerical_error(write_scenario):
    sigma = [[0.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 0.0]]
    scenario_file = ScenarioService.load(write_scenario(system__sigma=sigma))
    with pytest.raises(NumericalError):
        ScenarioService.to_domain(scenario_file)


def test_x0_defaults_to_target(write_scenario):
    scenario = ScenarioService.to_domain(ScenarioService.load(write_scenario(x0=None)))
    assert np.array_equal(scenario.x0, [-90.0, 0.0, 25.0])


def test_preset_files_are_plain_json(platoon_path, noiseless_path):
    for path in (platoon_path, noiseless_path):
        document = json.loads(path.read_text())
        assert set(document) >= {"system", "link", "simulation", "analysis"}
    assert not np.any(ScenarioService.to_domain(ScenarioService.load(noiseless_path)).model.sigma)
