"""Model rollouts and the trajectory prediction loss."""

from __future__ import annotations

import math

import numpy as np

from ..models import LtvModel
from .regression import trajectories_of


def predict_rollout(model: LtvModel, x0, inputs) -> np.ndarray:
    """Iterate x(k+1) = A(k) x(k) + B(k) u(k) from x0; returns N+1 states."""
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim == 1:
        inputs = inputs[:, None]
    n = inputs.shape[0]
    if n > model.n_steps:
        raise ValueError(f"model covers {model.n_steps} steps, got {n} inputs")
    states = np.empty((n + 1, model.p))
    states[0] = np.asarray(x0, dtype=float)
    for k in range(n):
        states[k + 1] = model.A[k] @ states[k] + model.B[k] @ inputs[k]
    return states


def per_trajectory_losses(model: LtvModel, data) -> np.ndarray:
    """Rollout RMSE per trajectory, predicting from the initial state.

    For each trajectory: sqrt of the mean over steps k = 1..N of the squared
    state residual summed over components (the component sum is not averaged).
    """
    losses = []
    for traj in trajectories_of(data):
        predicted = predict_rollout(model, traj.states[0], traj.inputs)
        residual = predicted[1:] - traj.states[1:]
        losses.append(math.sqrt(float(np.sum(residual**2)) / traj.n_steps))
    return np.array(losses)


def trajectory_prediction_loss(model: LtvModel, data) -> float:
    """Per-trajectory rollout RMSE averaged over the trajectory set."""
    return float(np.mean(per_trajectory_losses(model, data)))
