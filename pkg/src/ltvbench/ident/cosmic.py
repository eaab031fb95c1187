"""Closed-form smoothed LTV identification (the cosmic fit).

The fit minimizes, over the per-step parameter blocks C(k) = [A(k)^T; B(k)^T],

    f(C) = 1/(2N) * sum_k ||V(k) C(k) - X'(k)||_F^2
         + 1/2     * sum_{k=1}^{N-1} lam ||C(k) - C(k-1)||_F^2

where row l of V(k) is [x_l(k)^T u_l(k)^T] and X'(k) stacks the states at
k+1.  The objective is strictly convex whenever the stacked state/input rows
span the regressor space, and its normal equations are block tridiagonal:

    (G(k) + (lam_k + lam_{k+1}) I) C(k) - lam_k C(k-1) - lam_{k+1} C(k+1) = R(k)

with G(k) = V(k)^T V(k) / N, R(k) = V(k)^T X'(k) / N and lam_0 = lam_N = 0.
The solver runs the block Thomas elimination in O(N (p+q)^3), i.e. linear in
the number of time steps.

Ill-conditioned data is handled by an exact diagonal preconditioning: the
system is solved in per-channel standardized variables and mapped back, which
changes the arithmetic but not the minimizer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import ExcitationError
from ..models import LtvModel
from .regression import _stack_all, check_excitation, trajectories_of
from .tridiag import solve_block_tridiag


@dataclass(frozen=True)
class CosmicConfig:
    """Uniform smoothing strength and the single-trajectory switch."""

    lam: float = 1.0
    single_trajectory: bool = False

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")


def cosmic_fit(data, cfg: CosmicConfig = CosmicConfig()) -> LtvModel:
    """Exact minimizer of the smoothed identification objective.

    ``data`` is a dataset, a trajectory list, or a single trajectory; with
    ``cfg.single_trajectory`` only the first trajectory is used.  Raises
    :class:`ExcitationError` when the stacked state/input rows do not span
    the regressor space (no unique minimizer exists).
    """
    trajs = trajectories_of(data)
    if cfg.single_trajectory:
        trajs = trajs[:1]
    report = check_excitation(trajs)
    if not report.satisfied:
        raise ExcitationError(
            f"dataset spans rank {report.rank} < {report.required}; "
            "cannot identify a unique model"
        )
    v, xn = _stack_all(trajs)
    n, _, d = v.shape
    p = xn.shape[2]

    # Exact change of variables: standardize regressor channels, solve the
    # transformed (better conditioned) system, map back.  The solution is the
    # raw-objective minimizer either way.
    stds = v.reshape(-1, d).std(axis=0)
    zero_var = np.flatnonzero(stds <= 0.0)
    scales = np.where(stds > 0.0, 1.0 / np.where(stds > 0.0, stds, 1.0), 1.0)

    vs = v * scales[None, None, :]
    gram = np.einsum("kli,klj->kij", vs, vs) / n
    rhs = np.einsum("kli,klp->kip", vs, xn) / n
    lam = np.full(n + 1, float(cfg.lam))
    lam[0] = lam[-1] = 0.0
    blocks = solve_block_tridiag(gram, lam, rhs, weight=scales**2, refine=1)
    blocks = blocks * scales[:, None]

    return LtvModel.from_stacked(
        blocks,
        q=v.shape[2] - p,
        dt=trajs[0].dt,
        method="cosmic-single" if cfg.single_trajectory else "cosmic",
        hyperparams={"lam": float(cfg.lam)},
        preconditioning={
            "state_scale": scales[:p].tolist(),
            "input_scale": scales[p:].tolist(),
            "zero_variance": [int(i) for i in zero_var],
        },
        info={"excitation_rank": report.rank, "n_trajectories": len(trajs)},
    )


def cosmic_objective(model: LtvModel, data, lam: float) -> tuple:
    """(total, fidelity, smoothness) of the identification objective.

    fidelity   = 1/(2N) sum_k ||V(k) C(k) - X'(k)||_F^2
    smoothness = lam/2  sum_{k>=1} ||C(k) - C(k-1)||_F^2
    """
    trajs = trajectories_of(data)
    v, xn = _stack_all(trajs)
    n = v.shape[0]
    blocks = model.stacked()
    if blocks.shape[0] != n:
        raise ValueError(
            f"model covers {blocks.shape[0]} steps but data has {n}"
        )
    residual = np.einsum("kli,kip->klp", v, blocks) - xn
    fidelity = float(np.sum(residual**2)) / (2.0 * n)
    diffs = blocks[1:] - blocks[:-1]
    smoothness = 0.5 * float(lam) * float(np.sum(diffs**2))
    return fidelity + smoothness, fidelity, smoothness
