import numpy as np
import pytest

from microgoals.agents import default_population
from microgoals.core import Environment, GoalSpec
from microgoals.envfile import (default_environment_path, load_environment,
                                subgoals_from_file)


@pytest.fixture(scope="session")
def farm():
    return load_environment(default_environment_path())


@pytest.fixture(scope="session")
def farm_subgoals(farm):
    path = default_environment_path().parent / "farm_subgoal.json"
    return subgoals_from_file(path)


@pytest.fixture(scope="session")
def toy():
    """Two-state/one-action task where holding the first state at an interior
    value drains the second; used by the CE-vs-grid checks."""
    env = Environment(
        state_names=("Pressure", "Reservoir"),
        action_names=("Valve",),
        A=np.array([[1.2, 0.0], [-0.4, 1.0]]),
        B=np.array([[-0.8], [0.0]]),
    )
    return {
        "env": env,
        "final": GoalSpec(dims=(0, 1), targets=np.zeros(2),
                          scale=np.ones(2), threshold=1.0),
        "s0": np.array([4.0, 8.0]),
        "T": 12,
        "pop": default_population(size=10, enable_noise=False),
    }
