import json
from pathlib import Path

import numpy as np
import pytest

from app.models import LinkModel, Scenario, SystemModel, VarianceConvention

PROJECT_ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = PROJECT_ROOT / "scenarios"

PLATOON_A = [[1.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
PLATOON_B = [[0.5], [0.5], [0.0]]
PLATOON_X_AIM = [-90.0, 0.0, 25.0]
DELTA_G = 12.5


def platoon_sigma(sigma2: float = 1.0) -> np.ndarray:
    return np.diag([0.0, sigma2 ** 2, 0.0])


def make_platoon(sigma2: float = 1.0, B=PLATOON_B, g=(1.0, 0.0, 0.0), history_depth: int = 64) -> SystemModel:
    return SystemModel(
        A=np.array(PLATOON_A),
        B=np.array(B),
        sigma=platoon_sigma(sigma2),
        g=np.array(g),
        x_aim=np.array(PLATOON_X_AIM),
        delta_g=DELTA_G,
        history_depth=history_depth,
    )


@pytest.fixture
def platoon_model() -> SystemModel:
    """Platoon model with sigma_2 = 1 and the gap as cost."""
    return make_platoon()


@pytest.fixture
def full_rank_model() -> SystemModel:
    """Platoon dynamics with a fully actuated input (B = I)."""
    return make_platoon(B=np.eye(3))


@pytest.fixture
def make_scenario():
    def build(model: SystemModel, link: LinkModel, horizon: int = 2_000, episodes: int = 1, warmup: int = 20,
              seed: int = 7, convention=VarianceConvention.PAPER_SHIFTED, sample_stride: int = 1) -> Scenario:
        return Scenario(
            model=model,
            link=link,
            x0=model.x_aim.copy(),
            horizon=horizon,
            episodes=episodes,
            warmup=warmup,
            base_seed=seed,
            convention=convention,
            sample_stride=sample_stride,
        )
    return build


@pytest.fixture
def platoon_path() -> Path:
    return SCENARIOS / "platoon.json"


@pytest.fixture
def noiseless_path() -> Path:
    return SCENARIOS / "platoon_noiseless.json"


@pytest.fixture
def write_scenario(tmp_path):
    """Write a variant of the platoon preset to a temporary file."""
    def write(name: str = "scenario.json", **overrides) -> Path:
        document = json.loads((SCENARIOS / "platoon.json").read_text())
        for dotted, value in overrides.items():
            node = document
            *parents, leaf = dotted.split("__")
            for key in parents:
                node = node[key]
            node[leaf] = value
        path = tmp_path / name
        path.write_text(json.dumps(document))
        return path
    return write
