"""Shared helpers: exact data generated by iterating a discrete LTV model."""

import numpy as np
import pytest

from ltvbench.dynamics import Trajectory
from ltvbench.models import LtvModel, MatrixPair


def rollout_model(model, x0, inputs):
    """Iterate the discrete model; independent of the package rollout helper."""
    inputs = np.asarray(inputs, dtype=float)
    states = np.empty((len(inputs) + 1, model.p))
    states[0] = x0
    for k in range(len(inputs)):
        states[k + 1] = model.A[k] @ states[k] + model.B[k] @ inputs[k]
    return states


def model_trajectories(model, count, seed, noise=0.0, input_std=1.0, x0_std=1.0):
    """Exact (or noise-perturbed) trajectories generated by a discrete model.

    All trajectories advance in one batched sweep so large counts stay cheap.
    """
    rng = np.random.default_rng(seed)
    n = model.n_steps
    times = np.arange(n + 1) * model.dt
    inputs = rng.normal(0.0, input_std, (count, n, model.q))
    states = np.empty((count, n + 1, model.p))
    states[:, 0] = rng.normal(0.0, x0_std, (count, model.p))
    for k in range(n):
        states[:, k + 1] = states[:, k] @ model.A[k].T + inputs[:, k] @ model.B[k].T
    if noise > 0:
        states = states + rng.normal(0.0, noise, states.shape)
    return [
        Trajectory(times=times, states=states[i], inputs=inputs[i])
        for i in range(count)
    ]


@pytest.fixture(scope="session")
def constant_model():
    A = np.array([[0.9, 0.1], [-0.2, 0.8]])
    B = np.array([[0.0], [0.5]])
    return LtvModel.from_constant(MatrixPair(A, B), n_steps=60, dt=0.02)
