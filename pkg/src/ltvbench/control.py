"""Finite-horizon LQR synthesis and closed-loop reference tracking.

Gains come from the backward dynamic-programming recursion on an identified
(or ground-truth) LTV model; tracking combines error feedback with a
model-based feedforward that makes the reference an approximate equilibrium
trajectory of the model.  Pure error feedback cannot hold a nonzero setpoint
against a spring, hence the feedforward term.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dynamics import ScenarioSpec, Trajectory, _rollout
from .exceptions import DataFormatError, SynthesisError
from .models import LtvModel, _plain

GAINS_FORMAT = "gain-schedule/1"
DIVERGENCE_GUARD = 1e6


@dataclass(frozen=True)
class CostWeights:
    """Constant per-step quadratic weights: state Q >= 0, input R > 0, terminal H >= 0."""

    Q: np.ndarray
    R: np.ndarray
    H: np.ndarray

    def __post_init__(self):
        for name, m in (("Q", self.Q), ("R", self.R), ("H", self.H)):
            arr = np.asarray(m, dtype=float)
            object.__setattr__(self, name, arr)
            if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
                raise ValueError(f"{name} must be square, got {arr.shape}")
            if not np.allclose(arr, arr.T):
                raise ValueError(f"{name} must be symmetric")
        if np.any(np.linalg.eigvalsh(self.R) <= 0):
            raise ValueError("R must be positive definite")
        for name, m in (("Q", self.Q), ("H", self.H)):
            if np.any(np.linalg.eigvalsh(m) < -1e-12):
                raise ValueError(f"{name} must be positive semidefinite")


def default_weights(position_weight: float = 1.0) -> CostWeights:
    """Design weights: velocity weight one tenth of position, input cost 1e-3
    of position, terminal cost equal to the stage state cost."""
    q = np.diag([position_weight, 0.1 * position_weight])
    return CostWeights(Q=q, R=np.array([[1e-3 * position_weight]]), H=q)


@dataclass
class GainSchedule:
    """Time-indexed feedback gains plus optional feedforward inputs."""

    K: np.ndarray                    # (N, q, p)
    u_ff: np.ndarray                 # (N, q)
    provenance: str = ""
    cost_to_go: np.ndarray | None = None   # (N+1, p, p) Riccati stack

    def __post_init__(self):
        self.K = np.asarray(self.K, dtype=float)
        self.u_ff = np.asarray(self.u_ff, dtype=float)
        if self.K.ndim != 3:
            raise ValueError(f"K must be (N, q, p), got {self.K.shape}")
        if self.u_ff.shape != (self.K.shape[0], self.K.shape[1]):
            raise ValueError("feedforward shape must match the gain schedule")
        if not np.all(np.isfinite(self.K)) or not np.all(np.isfinite(self.u_ff)):
            raise ValueError("gain schedule must be finite")

    @property
    def n_steps(self) -> int:
        return self.K.shape[0]


@dataclass(frozen=True)
class ReferenceSpec:
    """Piecewise-constant position targets (velocity reference is zero).

    ``segments`` is a sequence of (start_time, position) pairs with strictly
    increasing start times beginning at zero; each segment holds until the
    next one starts.
    """

    segments: tuple

    def __post_init__(self):
        segs = tuple((float(t), float(z)) for t, z in self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise ValueError("reference needs at least one segment")
        if abs(segs[0][0]) > 1e-12:
            raise ValueError("first reference segment must start at t=0")
        starts = [t for t, _ in segs]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("segment start times must strictly increase")

    def position_at(self, t: float) -> float:
        z = self.segments[0][1]
        for start, value in self.segments:
            if t + 1e-12 >= start:
                z = value
            else:
                break
        return z

    def state_at(self, t: float, p: int = 2) -> np.ndarray:
        """Reference state: target position, zero for the remaining components."""
        x = np.zeros(p)
        x[0] = self.position_at(t)
        return x


def default_reference(horizon: float, amplitude: float = 1.0, period: float = 2.0) -> ReferenceSpec:
    """Alternating +/-amplitude setpoints, switching every ``period`` seconds."""
    segments = []
    t = 0.0
    sign = 1.0
    while t < horizon:
        segments.append((t, sign * amplitude))
        sign = -sign
        t += period
    return ReferenceSpec(segments=tuple(segments))


def lqr_ltv(model: LtvModel, weights: CostWeights) -> GainSchedule:
    """Backward dynamic-programming recursion for the finite-horizon gains.

    P_N = H; then for k = N-1..0:
        K_k = (R + B(k)^T P_{k+1} B(k))^-1 B(k)^T P_{k+1} A(k)
        P_k = Q + K_k^T R K_k + (A(k) - B(k) K_k)^T P_{k+1} (A(k) - B(k) K_k)
    Every P_k is symmetrized; all are PSD by construction.
    """
    n, p, q = model.n_steps, model.p, model.q
    if weights.Q.shape != (p, p) or weights.R.shape != (q, q):
        raise ValueError("weight dimensions do not match the model")
    K = np.empty((n, q, p))
    P_stack = np.empty((n + 1, p, p))
    P = weights.H.copy()
    P_stack[n] = P
    for k in range(n - 1, -1, -1):
        A, B = model.A[k], model.B[k]
        BtP = B.T @ P
        try:
            K[k] = np.linalg.solve(weights.R + BtP @ B, BtP @ A)
        except np.linalg.LinAlgError as exc:
            raise SynthesisError(f"singular input-cost term at step {k}") from exc
        Acl = A - B @ K[k]
        P = weights.Q + K[k].T @ weights.R @ K[k] + Acl.T @ P @ Acl
        P = 0.5 * (P + P.T)
        P_stack[k] = P
    if not np.all(np.isfinite(K)):
        raise SynthesisError("gain recursion produced non-finite gains")
    return GainSchedule(
        K=K,
        u_ff=np.zeros((n, q)),
        provenance=model.method,
        cost_to_go=P_stack,
    )


def feedforward(model: LtvModel, ref: ReferenceSpec) -> np.ndarray:
    """Per-step least-squares input making the reference an equilibrium of the model.

    u_ff(k) = argmin_u || x_ref(k+1) - A(k) x_ref(k) - B(k) u ||_2
    """
    n = model.n_steps
    out = np.empty((n, model.q))
    for k in range(n):
        x_now = ref.state_at(k * model.dt, model.p)
        x_next = ref.state_at((k + 1) * model.dt, model.p)
        delta = x_next - model.A[k] @ x_now
        out[k] = np.linalg.lstsq(model.B[k], delta, rcond=None)[0]
    return out


def with_feedforward(sched: GainSchedule, u_ff: np.ndarray) -> GainSchedule:
    return GainSchedule(
        K=sched.K,
        u_ff=np.asarray(u_ff, dtype=float),
        provenance=sched.provenance,
        cost_to_go=sched.cost_to_go,
    )


def closed_loop(
    spec: ScenarioSpec,
    sched: GainSchedule,
    ref: ReferenceSpec,
    x0,
    seed=None,
) -> Trajectory:
    """Run u(k) = -K_k (x(k) - x_ref(k)) + u_ff(k) against the ground-truth plant.

    Raises :class:`InstabilityError` (with the partial trajectory attached)
    if the state leaves the divergence guard.
    """
    if sched.n_steps != spec.n_steps:
        raise ValueError(
            f"schedule covers {sched.n_steps} steps but scenario has {spec.n_steps}"
        )
    rng = np.random.default_rng(seed) if seed is not None else None
    p = sched.K.shape[2]

    def policy(k, t, x):
        return sched.u_ff[k, 0] - (sched.K[k] @ (x - ref.state_at(t, p)))[0]

    times, states, inputs = _rollout(spec, x0, policy, rng, guard=DIVERGENCE_GUARD)
    return Trajectory(
        times=times,
        states=states,
        inputs=inputs,
        seed=seed if isinstance(seed, int) else None,
    )


def tracking_errors(traj: Trajectory, ref: ReferenceSpec) -> np.ndarray:
    """Per-step absolute position error |x1(k) - z_ref(t_k)| for k = 0..N."""
    targets = np.array([ref.position_at(t) for t in traj.times])
    return np.abs(traj.states[:, 0] - targets)


def save_gains(sched: GainSchedule, path) -> None:
    payload = {
        "format": GAINS_FORMAT,
        "n_steps": sched.n_steps,
        "p": sched.K.shape[2],
        "q": sched.K.shape[1],
        "provenance": sched.provenance,
        "K": sched.K.tolist(),
        "u_ff": sched.u_ff.tolist(),
    }
    Path(path).write_text(json.dumps(_plain(payload), indent=1, sort_keys=True) + "\n")


def load_gains(path) -> GainSchedule:
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"gain schedule not found: {path}")
    try:
        payload = json.loads(path.read_text())
        if payload["format"] != GAINS_FORMAT:
            raise DataFormatError(f"unexpected format tag in {path}")
        return GainSchedule(
            K=np.asarray(payload["K"], dtype=float),
            u_ff=np.asarray(payload["u_ff"], dtype=float),
            provenance=payload.get("provenance", ""),
        )
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise DataFormatError(f"malformed gain schedule {path}: {exc}") from exc
