"""Regressor assembly, excitation checks, preconditioning, and least-squares fits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from ..datagen import Dataset
from ..dynamics import Trajectory
from ..exceptions import ExcitationError
from ..models import LtvModel, MatrixPair

RANK_RTOL = 1e-10


def trajectories_of(data) -> list:
    """Normalize a Dataset / Trajectory / sequence of trajectories to a list."""
    if isinstance(data, Dataset):
        return list(data.trajectories)
    if isinstance(data, Trajectory):
        return [data]
    trajs = list(data)
    if not trajs:
        raise ValueError("no trajectories supplied")
    return trajs


def _stack_all(trajs) -> tuple:
    """All regressor/target blocks at once: V (N, L, p+q) and Xnext (N, L, p)."""
    n = trajs[0].n_steps
    p, q = trajs[0].p, trajs[0].q
    for traj in trajs:
        if traj.n_steps != n or traj.p != p or traj.q != q:
            raise ValueError(
                f"ragged trajectories: expected N={n}, p={p}, q={q}, "
                f"got N={traj.n_steps}, p={traj.p}, q={traj.q}"
            )
    states = np.stack([t.states for t in trajs], axis=1)   # (N+1, L, p)
    inputs = np.stack([t.inputs for t in trajs], axis=1)   # (N, L, q)
    v = np.concatenate([states[:-1], inputs], axis=2)
    return v, states[1:]


def stack_regressors(data, k: int) -> tuple:
    """Rows of [x_l(k)^T u_l(k)^T] and the matching next states x_l(k+1)^T."""
    trajs = trajectories_of(data)
    for traj in trajs:
        if traj.n_steps < k + 1:
            raise ValueError(f"trajectory too short for step {k}")
    v, xn = _stack_all(trajs)
    return v[k], xn[k]


@dataclass(frozen=True)
class ExcitationReport:
    rank: int
    required: int
    satisfied: bool
    singular_values: tuple


def check_excitation(data, rel_tol: float = RANK_RTOL) -> ExcitationReport:
    """Rank of all stacked state/input rows; identification needs rank p+q."""
    trajs = trajectories_of(data)
    v, _ = _stack_all(trajs)
    d = v.shape[2]
    rows = v.reshape(-1, d)
    s = np.linalg.svd(rows, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        rank = 0
    else:
        rank = int(np.sum(s > rel_tol * s[0]))
    return ExcitationReport(
        rank=rank, required=d, satisfied=rank == d, singular_values=tuple(s.tolist())
    )


@dataclass(frozen=True)
class PrecondTransform:
    """Per-channel scale factors applied to the data (1 / channel std)."""

    state_scale: tuple
    input_scale: tuple
    zero_variance: tuple = ()

    @property
    def scales(self) -> np.ndarray:
        return np.array(self.state_scale + self.input_scale)


def channel_scales(trajs) -> PrecondTransform:
    """Reciprocal per-channel standard deviations over the whole collection."""
    v, _ = _stack_all(trajs)
    p = trajs[0].p
    stds = v.reshape(-1, v.shape[2]).std(axis=0)
    flagged = tuple(int(i) for i in np.flatnonzero(stds <= 0.0))
    scales = np.where(stds > 0.0, 1.0 / np.where(stds > 0.0, stds, 1.0), 1.0)
    return PrecondTransform(
        state_scale=tuple(scales[:p].tolist()),
        input_scale=tuple(scales[p:].tolist()),
        zero_variance=flagged,
    )


def precondition(data) -> tuple:
    """Scale each state/input channel by 1/std; returns (scaled data, transform).

    Zero-variance channels are left unscaled and flagged on the transform.
    """
    trajs = trajectories_of(data)
    transform = channel_scales(trajs)
    sx = np.array(transform.state_scale)
    su = np.array(transform.input_scale)
    scaled = [
        replace_arrays(t, states=t.states * sx, inputs=t.inputs * su) for t in trajs
    ]
    if isinstance(data, Dataset):
        scaled = Dataset(
            split=data.split,
            trajectories=scaled,
            scenario=data.scenario,
            excitation=data.excitation,
            noise_var=data.noise_var,
            labels=data.labels,
            master_seed=data.master_seed,
        )
    elif isinstance(data, Trajectory):
        scaled = scaled[0]
    return scaled, transform


def replace_arrays(traj: Trajectory, states=None, inputs=None) -> Trajectory:
    return Trajectory(
        times=traj.times.copy(),
        states=traj.states if states is None else states,
        inputs=traj.inputs if inputs is None else inputs,
        seed=traj.seed,
        noisy=traj.noisy,
    )


def unscale_model(model: LtvModel, transform: PrecondTransform) -> LtvModel:
    """Map a model fitted in scaled coordinates back to raw coordinates.

    With S_x, S_u the diagonal data scales, A = S_x^-1 A~ S_x and
    B = S_x^-1 B~ S_u.
    """
    sx = np.array(transform.state_scale)
    su = np.array(transform.input_scale)
    A = model.A * (sx[None, None, :] / sx[None, :, None])
    B = model.B * (su[None, None, :] / sx[None, :, None])
    return LtvModel(
        A=A,
        B=B,
        dt=model.dt,
        method=model.method,
        hyperparams=dict(model.hyperparams),
        preconditioning={
            "state_scale": list(transform.state_scale),
            "input_scale": list(transform.input_scale),
            "zero_variance": list(transform.zero_variance),
        },
        info=dict(model.info),
    )


def _qr_solve(v: np.ndarray, y: np.ndarray, context: str) -> np.ndarray:
    """Least squares via QR with a relative rank check on the triangular factor."""
    qmat, rmat = np.linalg.qr(v)
    diag = np.abs(np.diag(rmat))
    if diag.size == 0 or diag.max() == 0.0 or diag.min() < RANK_RTOL * diag.max():
        raise ExcitationError(f"rank-deficient regressors for {context}")
    return solve_triangular(rmat, qmat.T @ y)


def perstep_ls_fit(data) -> LtvModel:
    """Independent per-step least squares (the unsmoothed reference fit).

    Requires at least p+q trajectories with full-rank regressors at every step.
    """
    trajs = trajectories_of(data)
    v, xn = _stack_all(trajs)
    n, ell, d = v.shape
    p = xn.shape[2]
    if ell < d:
        raise ExcitationError(
            f"per-step fit needs at least {d} trajectories, got {ell}"
        )
    blocks = np.empty((n, d, p))
    for k in range(n):
        blocks[k] = _qr_solve(v[k], xn[k], f"time step {k}")
    dt = trajs[0].dt
    return LtvModel.from_stacked(blocks, q=trajs[0].q, dt=dt, method="perstep")


def lti_fit(data) -> MatrixPair:
    """Single (A, B) minimizing the pooled squared residuals over all steps."""
    trajs = trajectories_of(data)
    v, xn = _stack_all(trajs)
    d = v.shape[2]
    p = xn.shape[2]
    block = _qr_solve(v.reshape(-1, d), xn.reshape(-1, p), "pooled time-invariant fit")
    return MatrixPair(A=block[:p].T, B=block[p:].T)
