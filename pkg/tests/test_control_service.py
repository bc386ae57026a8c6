import warnings

import numpy as np
import pytest
from scipy import linalg as sla

from app.exceptions import HistoryError
from app.models import LinkModel, SystemModel
from app.models.loop import ControllerMemory
from app.services.control_service import ControlLoopService
from app.utils.streams import EpisodeStreams
from tests.conftest import make_platoon


def _run(model: SystemModel, link: LinkModel, steps: int, noises=None, seed: int = 3, controls=None):
    streams = EpisodeStreams.for_episode(seed, 0)
    state = ControlLoopService.initial_state(model, model.x_aim, link)
    states = [state]
    for k in range(steps):
        noise = None if noises is None else noises[k]
        state = ControlLoopService.closed_loop_step(model, state, link, streams, noise=noise)
        if controls is not None:
            controls.append(state.mem.recent_controls(1)[0].copy())
        states.append(state)
    return states


def test_estimate_with_age_zero_is_last_state(platoon_model):
    memory = ControllerMemory(np.array([1.0, 2.0, 3.0]), 0, depth=8, control_dim=1)
    assert np.array_equal(ControlLoopService.estimate_state(platoon_model, memory, 0), [1.0, 2.0, 3.0])


def test_estimate_rolls_state_forward_with_controls(platoon_model):
    memory = ControllerMemory(np.array([0.0, 1.0, 0.0]), 0, depth=8, control_dim=1)
    memory.push_control(np.array([2.0]))  # u(t-2)
    memory.push_control(np.array([4.0]))  # u(t-1)
    # A^2 x + A B u(t-2) + B u(t-1)
    expected = np.array([2.0, 1.0, 0.0]) + np.array([2.0, 1.0, 0.0]) + np.array([2.0, 2.0, 0.0])
    assert np.allclose(ControlLoopService.estimate_state(platoon_model, memory, 2), expected)


def test_estimate_without_enough_history_fails(platoon_model):
    memory = ControllerMemory(np.zeros(3), 0, depth=4, control_dim=1)
    memory.push_control(np.array([1.0]))
    with pytest.raises(HistoryError):
        ControlLoopService.estimate_state(platoon_model, memory, 2)
    with pytest.raises(HistoryError):
        ControlLoopService.estimate_state(platoon_model, memory, 100)


def test_control_signal_uses_pseudo_inverse(platoon_model):
    # x_aim - A x_hat = [d1, d2, d3] gives u = d1 + d2
    x_hat = np.linalg.solve(platoon_model.A, platoon_model.x_aim - np.array([3.0, 4.0, 5.0]))
    assert np.allclose(ControlLoopService.control_signal(platoon_model, x_hat), [7.0])


def test_plant_step_at_rest():
    model = make_platoon()
    x = np.array([-90.0, 0.0, 25.0])
    assert np.array_equal(ControlLoopService.plant_step(model, x, np.zeros(1), np.zeros(3)), x)


def test_noiseless_loop_stays_at_target():
    model = make_platoon(sigma2=0.0)
    for state in _run(model, LinkModel.bernoulli(0.4), 200):
        assert np.allclose(state.x, model.x_aim, atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_fully_actuated_loop_reaches_target_in_one_step(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    A = rng.normal(size=(n, n))
    B = rng.normal(size=(n, n + 1))
    model = SystemModel(A=A, B=B, sigma=np.zeros((n, n)), g=np.eye(1, n), x_aim=rng.normal(size=n),
                        delta_g=1.0, history_depth=8)
    streams = EpisodeStreams.for_episode(seed, 0)
    start = ControlLoopService.initial_state(model, rng.normal(size=n) * 10, LinkModel.bernoulli(1.0))
    after = ControlLoopService.closed_loop_step(model, start, LinkModel.bernoulli(1.0), streams)
    assert np.allclose(after.x, model.x_aim, atol=1e-9 * (1 + np.abs(start.x).max()))


@pytest.mark.parametrize("link", [LinkModel.bernoulli(0.3), LinkModel.fixed_age(3), LinkModel.periodic(4)])
def test_fully_actuated_error_is_accumulated_noise(link):
    """x(t+1) - x_aim = sum_{tau=0..age} A^tau w(t - tau) when B has full row rank."""
    model = make_platoon(B=np.eye(3))
    rng = np.random.default_rng(11)
    noises = rng.normal(size=(50, 3))
    states = _run(model, link, 50, noises=noises)
    for t in range(5, 50):
        age = states[t + 1].aoi.age
        expected = sum(model.powers.power(tau) @ noises[t - tau] for tau in range(age + 1))
        assert np.allclose(states[t + 1].x - model.x_aim, expected, atol=1e-9)


def test_estimation_error_at_fixed_age_two():
    """x_hat(t) - x(t) = -sum_{tau=1..2} A^(tau-1) w(t - tau)."""
    model = make_platoon()
    rng = np.random.default_rng(5)
    noises = rng.normal(size=(30, 3))
    controls = []
    states = _run(model, LinkModel.fixed_age(2), 30, noises=noises, controls=controls)
    A, B = model.A, model.B
    for t in range(4, 30):
        x_hat = A @ A @ states[t - 2].x + B @ controls[t - 1] + A @ B @ controls[t - 2]
        expected = -(noises[t - 1] + A @ noises[t - 2])
        assert np.allclose(x_hat - states[t].x, expected, atol=1e-10)


def test_loop_is_reproducible_for_a_seed():
    model = make_platoon(sigma2=2.0)
    first = _run(model, LinkModel.bernoulli(0.5), 300, seed=9)
    second = _run(model, LinkModel.bernoulli(0.5), 300, seed=9)
    assert all(np.array_equal(a.x, b.x) for a, b in zip(first, second))
    assert [s.aoi.age for s in first] == [s.aoi.age for s in second]


@pytest.mark.parametrize("seed", range(6))
def test_applied_control_is_projection_onto_input_range(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(2, 6))
    m = int(rng.integers(1, n + 2))
    rank = int(rng.integers(1, min(n, m) + 1))
    B = rng.normal(size=(n, rank)) @ rng.normal(size=(rank, m))
    model = SystemModel(A=rng.normal(size=(n, n)), B=B, sigma=np.zeros((n, n)), g=np.eye(1, n),
                        x_aim=rng.normal(size=n), delta_g=1.0, history_depth=4)
    x_hat = rng.normal(size=n)
    basis = sla.orth(B)
    demand = model.x_aim - model.A @ x_hat
    applied = B @ ControlLoopService.control_signal(model, x_hat)
    assert np.allclose(applied, basis @ basis.T @ demand, atol=1e-9 * (1.0 + np.abs(demand).max()))


def test_controller_acts_only_on_past_information():
    model = make_platoon(sigma2=3.0)
    link = LinkModel.bernoulli(0.4)
    rng = np.random.default_rng(21)
    steps = 60
    noises = rng.normal(size=(steps, 3))
    streams = EpisodeStreams.for_episode(4, 0)
    state = ControlLoopService.initial_state(model, model.x_aim, link)
    trajectory = [state.x.copy()]
    for t in range(steps):
        state = ControlLoopService.closed_loop_step(model, state, link, streams, noise=noises[t])
        trajectory.append(state.x.copy())
        # the control u(t) was built from a state sensed no later than t - 1
        if t >= 1:
            assert state.mem.last_state_time <= t - 1
            assert state.mem.last_state_time == t - state.aoi.age
            assert np.array_equal(state.mem.last_state, trajectory[state.mem.last_state_time])


@pytest.mark.parametrize("link", [LinkModel.bernoulli(0.5), LinkModel.fixed_age(2), LinkModel.periodic(3)])
def test_changing_future_noise_leaves_earlier_controls_unchanged(link):
    model = make_platoon(sigma2=2.0)
    rng = np.random.default_rng(8)
    noises = rng.normal(size=(40, 3))
    changed = noises.copy()
    changed[20:] += 5.0
    first, second = [], []
    _run(model, link, 40, noises=noises, controls=first)
    _run(model, link, 40, noises=changed, controls=second)
    # w(20) first reaches the plant in x(21), which u(21) cannot see yet
    for t in range(22):
        assert np.array_equal(first[t], second[t])
    assert any(not np.array_equal(a, b) for a, b in zip(first[22:], second[22:]))


def test_cost_band_is_centred_on_target_cost():
    model = make_platoon()
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        g_aim = model.g_aim
        band = model.g_band
    assert type(g_aim) is float
    assert g_aim == -90.0
    assert band == (-102.5, -77.5)
    assert model.cost(model.x_aim) == g_aim
