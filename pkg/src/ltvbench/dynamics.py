"""Ground-truth spring-mass-damper plants and their discrete LTV linearizations.

Five scenario kinds are built in:

* ``ltv``            -- linear plant with continuously modulated stiffness/damping,
* ``nl``             -- adds cubic damping and input saturation,
* ``nld``            -- ``nl`` plus an impulsive velocity disturbance that fires
                        near a fixed position,
* ``inst-reconfig``  -- piecewise-constant parameters over two-second frames with
                        random velocity kicks at the frame boundaries,
* ``mixed-reconfig`` -- frame-wise parameter jumps combined with the continuous
                        modulation, kicks at the boundaries.

All plants are second order (position, velocity) with a scalar force input.
Simulation is fixed-step RK4 with internal substepping; the linearized
zero-order-hold discretization of the same plant is available as
:func:`ground_truth_ltv` and doubles as the "linearization" baseline model.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import expm

from .exceptions import DataFormatError, InstabilityError, IntegrationError, NumericalError
from .models import LtvModel, MatrixPair

# Internal RK4 substeps per scenario step; keeps the ground truth clearly more
# accurate than any ZOH-discretized model of it.
RK4_SUBSTEPS = 10

# Frame parameter ranges for the reconfiguration scenarios.  Masses follow a
# two-regime distribution (mostly heavy frames with occasional drastic mass
# drops, as in payload release) so the frame sequence spans genuinely
# different dynamic regimes; spring and damping are uniform.
FRAME_HEAVY_MASS_RANGE = (0.8, 2.0)
FRAME_LIGHT_MASS_RANGE = (0.02, 0.08)
FRAME_LIGHT_PROB = 0.35
FRAME_SPRING_RANGE = (0.5, 2.0)
FRAME_DAMPING_RANGE = (0.25, 1.0)
_FRAME_TABLE_SEED = 2314607


class Kind(enum.Enum):
    """Which ground-truth plant a :class:`ScenarioSpec` describes."""

    LTV = "ltv"
    NL = "nl"
    NLD = "nld"
    INST_RECONFIG = "inst-reconfig"
    MIXED_RECONFIG = "mixed-reconfig"


_RECONFIG_KINDS = (Kind.INST_RECONFIG, Kind.MIXED_RECONFIG)
_SATURATED_KINDS = (Kind.NL, Kind.NLD)


@dataclass(frozen=True)
class ScenarioSpec:
    """Full parameterization of one ground-truth plant.

    ``frames`` holds per-frame (mass, spring, damping) triples for the
    reconfiguration kinds and must be empty otherwise.  ``param_freq`` is the
    angular frequency of the continuous stiffness/damping modulation; it is
    configured independently of any excitation-signal frequency.
    """

    kind: Kind
    mass: float = 1.0                 # kg
    spring: float = 1.0               # N/m, base stiffness
    damping: float = 0.5              # N*s/m, base damping
    cubic_damping: float = 0.1        # N*s^3/m^3, nl/nld only
    sat_limit: float = 5.0            # N, input saturation, nl/nld only
    param_freq: float = math.pi / 2   # rad/s
    dist_center: float = 2.0          # m, nld bump position
    dist_width: float = 0.25          # m, nld bump width
    dist_sigma: float = 2.0           # nld kick scale (accel units)
    kick_sigma: float = 0.5           # m/s, boundary velocity kick, reconfig only
    frame_duration: float = 2.0       # s, fixed for reconfig kinds
    frames: tuple = ()                # ((m_i, C_s_i, C_d_i), ...)
    dt: float = 0.02                  # s
    horizon: float = 10.0             # s
    name: str = ""

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError(f"mass must be positive, got {self.mass}")
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.horizon < self.dt:
            raise ValueError("horizon must cover at least one step")
        if self.kind in _RECONFIG_KINDS:
            if abs(self.frame_duration - 2.0) > 1e-12:
                raise ValueError("reconfiguration frames are fixed at 2.0 s")
            expected = math.ceil(self.horizon / self.frame_duration)
            if len(self.frames) != expected:
                raise ValueError(
                    f"need {expected} frame parameter triples, got {len(self.frames)}"
                )
            for m_i, _, _ in self.frames:
                if m_i <= 0:
                    raise ValueError("frame masses must be positive")
        elif self.frames:
            raise ValueError(f"{self.kind.value} scenarios take no frame table")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def n_frames(self) -> int:
        return len(self.frames)


@dataclass(eq=False)
class Trajectory:
    """Time-stamped state and input sequences for one experiment.

    ``states`` has one more row than ``inputs``: states run k = 0..N, inputs
    k = 0..N-1.  ``noisy`` flags stored measurement noise (training splits).
    """

    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    seed: int | None = None
    noisy: bool = False

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        self.inputs = np.asarray(self.inputs, dtype=float)
        if self.inputs.ndim == 1:
            self.inputs = self.inputs[:, None]
        if len(self.states) != len(self.inputs) + 1:
            raise ValueError(
                f"states ({len(self.states)}) must be one longer than inputs ({len(self.inputs)})"
            )
        if len(self.times) != len(self.states):
            raise ValueError("times and states must have equal length")

    @property
    def n_steps(self) -> int:
        return len(self.inputs)

    @property
    def p(self) -> int:
        return self.states.shape[1]

    @property
    def q(self) -> int:
        return self.inputs.shape[1]

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            np.array_equal(self.times, other.times)
            and np.array_equal(self.states, other.states)
            and np.array_equal(self.inputs, other.inputs)
            and self.seed == other.seed
            and self.noisy == other.noisy
        )


def _sample_frames(n: int, rng: np.random.Generator) -> tuple:
    frames = []
    for _ in range(n):
        if rng.uniform() < FRAME_LIGHT_PROB:
            lo, hi = FRAME_LIGHT_MASS_RANGE
            m_i = math.exp(rng.uniform(math.log(lo), math.log(hi)))
        else:
            m_i = rng.uniform(*FRAME_HEAVY_MASS_RANGE)
        cs_i = rng.uniform(*FRAME_SPRING_RANGE)
        cd_i = rng.uniform(*FRAME_DAMPING_RANGE)
        frames.append((m_i, cs_i, cd_i))
    return tuple(frames)


def _builtin(kind: Kind, name: str) -> ScenarioSpec:
    frames = ()
    if kind in _RECONFIG_KINDS:
        rng = np.random.default_rng(
            np.random.SeedSequence([_FRAME_TABLE_SEED, 0 if kind is Kind.INST_RECONFIG else 1])
        )
        frames = _sample_frames(math.ceil(10.0 / 2.0), rng)
    return ScenarioSpec(kind=kind, frames=frames, name=name)


BUILTIN_SCENARIOS = ("ltv", "nl", "nld", "inst-reconfig", "mixed-reconfig")


def scenario(name: str) -> ScenarioSpec:
    """Return one of the five built-in scenarios by name."""
    key = name.strip().lower().replace("_", "-")
    try:
        kind = Kind(key)
    except ValueError:
        raise ValueError(
            f"unknown scenario {name!r}; expected one of {', '.join(BUILTIN_SCENARIOS)}"
        ) from None
    return _builtin(kind, key)


def save_scenario(spec: ScenarioSpec, path) -> None:
    payload = {
        "kind": spec.kind.value,
        "mass": spec.mass,
        "spring": spec.spring,
        "damping": spec.damping,
        "cubic_damping": spec.cubic_damping,
        "sat_limit": spec.sat_limit,
        "param_freq": spec.param_freq,
        "dist_center": spec.dist_center,
        "dist_width": spec.dist_width,
        "dist_sigma": spec.dist_sigma,
        "kick_sigma": spec.kick_sigma,
        "frame_duration": spec.frame_duration,
        "frames": [list(f) for f in spec.frames],
        "dt": spec.dt,
        "horizon": spec.horizon,
        "name": spec.name,
    }
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def load_scenario(path) -> ScenarioSpec:
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"scenario file not found: {path}")
    try:
        payload = json.loads(path.read_text())
        payload["kind"] = Kind(payload["kind"])
        payload["frames"] = tuple(tuple(f) for f in payload.get("frames", ()))
        return ScenarioSpec(**payload)
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"malformed scenario file {path}: {exc}") from exc


def params_at(spec: ScenarioSpec, t: float) -> tuple:
    """Effective (mass, stiffness, damping) of the plant at time ``t``.

    Continuous kinds modulate the base constants; the reconfiguration kinds
    look up (and for mixed reconfiguration additionally modulate) the
    parameters of the two-second frame containing ``t``.
    """
    if t < -1e-12 or t > spec.horizon + 1e-9:
        raise ValueError(f"t={t} outside scenario horizon [0, {spec.horizon}]")
    w = spec.param_freq
    if spec.kind in _RECONFIG_KINDS:
        i = min(int((t + 1e-9) // spec.frame_duration), spec.n_frames - 1)
        m_i, cs_i, cd_i = spec.frames[i]
        if spec.kind is Kind.INST_RECONFIG:
            return m_i, cs_i, cd_i
        cs = math.cos(1.5 * w * t + math.pi / 4) ** 2 * cs_i
        cd = (1.5 + math.cos(w * t)) * cd_i
        return m_i, cs, cd
    cs = math.cos(1.5 * w * t + math.pi / 4) ** 2 * spec.spring
    cd = (1.5 + math.cos(w * t)) * spec.damping
    return spec.mass, cs, cd


def sat(u: float, limit: float) -> float:
    """Clamp ``u`` to [-limit, limit]."""
    if limit <= 0:
        raise ValueError(f"saturation limit must be positive, got {limit}")
    return -limit if u < -limit else (limit if u > limit else u)


def _accel(spec: ScenarioSpec, t: float, x1: float, x2: float, u: float, kick: float) -> float:
    m, cs, cd = params_at(spec, t)
    if spec.kind in _SATURATED_KINDS:
        force = sat(u, spec.sat_limit) - cs * x1 - cd * x2 - spec.cubic_damping * x2 * x2 * x2
    else:
        force = u - cs * x1 - cd * x2
    a = force / m
    if spec.kind is Kind.NLD and kick != 0.0:
        dz = x1 - spec.dist_center
        a += kick * math.exp(-dz * dz / (2.0 * spec.dist_width * spec.dist_width))
    return a


def derivative(spec: ScenarioSpec, t: float, x, u: float, kick: float = 0.0) -> np.ndarray:
    """Continuous-time state derivative of the ground-truth plant.

    ``kick`` is the per-step disturbance amplitude supplied by the caller's
    sampler (zero for the deterministic kinds); for the ``nld`` plant it
    scales a Gaussian bump centered at ``dist_center``.
    """
    x1, x2 = float(x[0]), float(x[1])
    return np.array([x2, _accel(spec, t, x1, x2, float(u), kick)])


def step_rk4(
    spec: ScenarioSpec,
    t: float,
    x,
    u: float,
    dt: float,
    rng: np.random.Generator | None = None,
    substeps: int = RK4_SUBSTEPS,
) -> np.ndarray:
    """Advance the plant by one step with classical RK4.

    The input is held constant over the step (zero-order hold) and so is any
    stochastic disturbance amplitude, which is sampled once per call.  The
    step is internally subdivided so the continuously varying parameters are
    tracked accurately.
    """
    u = float(u)
    kick = 0.0
    if spec.kind is Kind.NLD and rng is not None and spec.dist_sigma > 0:
        kick = rng.normal(0.0, spec.dist_sigma)
    x1, x2 = float(x[0]), float(x[1])
    h = dt / substeps
    for i in range(substeps):
        ti = t + i * h
        a1 = x2
        b1 = _accel(spec, ti, x1, x2, u, kick)
        a2 = x2 + 0.5 * h * b1
        b2 = _accel(spec, ti + 0.5 * h, x1 + 0.5 * h * a1, x2 + 0.5 * h * b1, u, kick)
        a3 = x2 + 0.5 * h * b2
        b3 = _accel(spec, ti + 0.5 * h, x1 + 0.5 * h * a2, x2 + 0.5 * h * b2, u, kick)
        a4 = x2 + h * b3
        b4 = _accel(spec, ti + h, x1 + h * a3, x2 + h * b3, u, kick)
        x1 += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        x2 += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
    if not (math.isfinite(x1) and math.isfinite(x2)):
        raise IntegrationError(f"non-finite state after step at t={t}")
    return np.array([x1, x2])


def _kick_step_indices(spec: ScenarioSpec) -> frozenset:
    """Step indices at which boundary velocity kicks land (reconfig kinds)."""
    if spec.kind not in _RECONFIG_KINDS:
        return frozenset()
    steps = set()
    j = 1
    while j * spec.frame_duration < spec.horizon - 1e-9:
        k = math.ceil(j * spec.frame_duration / spec.dt - 1e-9)
        if 1 <= k <= spec.n_steps:
            steps.add(k)
        j += 1
    return frozenset(steps)


def _rollout(spec, x0, control, rng, guard: float | None = None):
    """Shared integration loop: ``control(k, t, x)`` supplies the input.

    Reconfiguration velocity kicks are applied to the state exactly when a
    step lands on a frame boundary; the recorded state at that time includes
    the kick.  With ``guard`` set, a state exceeding it raises
    :class:`InstabilityError` carrying the partial trajectory.
    """
    n = spec.n_steps
    times = np.arange(n + 1) * spec.dt
    kick_steps = _kick_step_indices(spec)
    states = np.empty((n + 1, 2))
    inputs = np.empty((n, 1))
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (2,):
        raise ValueError(f"initial state must have shape (2,), got {x.shape}")
    states[0] = x
    for k in range(n):
        u = float(control(k, times[k], x))
        inputs[k, 0] = u
        x = step_rk4(spec, times[k], x, u, spec.dt, rng)
        if (k + 1) in kick_steps and rng is not None and spec.kick_sigma > 0:
            x[1] += rng.normal(0.0, spec.kick_sigma)
        states[k + 1] = x
        if guard is not None and np.max(np.abs(x)) > guard:
            raise InstabilityError(
                k + 1,
                times=times[: k + 2],
                states=states[: k + 2].copy(),
                inputs=inputs[: k + 1].copy(),
            )
    return times, states, inputs


def simulate(spec: ScenarioSpec, x0, input_signal, seed=None) -> Trajectory:
    """Integrate the plant open loop under ``input_signal(t)``.

    ``seed`` may be an int or a numpy Generator; omitted, all stochastic
    terms are zero.  Two calls with identical seeds and specs are
    bitwise-identical.
    """
    rng = np.random.default_rng(seed) if seed is not None else None
    times, states, inputs = _rollout(spec, x0, lambda k, t, x: input_signal(t), rng)
    return Trajectory(
        times=times,
        states=states,
        inputs=inputs,
        seed=seed if isinstance(seed, int) else None,
    )


def discretize(A_c: np.ndarray, B_c: np.ndarray, dt: float) -> MatrixPair:
    """Zero-order-hold discretization of (A_c, B_c) over one step.

    Computed through the augmented matrix exponential

        exp([[A_c, B_c], [0, 0]] * dt) = [[A, B], [0, I]],

    which handles singular A_c (the inverse-based closed form is the special
    case of invertible A_c).
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    A_c = np.asarray(A_c, dtype=float)
    B_c = np.asarray(B_c, dtype=float)
    p = A_c.shape[0]
    q = B_c.shape[1]
    m = np.zeros((p + q, p + q))
    m[:p, :p] = A_c
    m[:p, p:] = B_c
    e = expm(m * dt)
    if not np.all(np.isfinite(e)):
        raise NumericalError("matrix exponential produced non-finite entries")
    return MatrixPair(A=e[:p, :p], B=e[:p, p:])


def linearized_rates(spec: ScenarioSpec, t: float) -> tuple:
    """Continuous-time (A_c, B_c) of the linearized plant at time ``t``.

    Drops cubic damping and saturation for the nonlinear kinds; the
    time-varying stiffness and damping are retained.
    """
    m, cs, cd = params_at(spec, t)
    A_c = np.array([[0.0, 1.0], [-cs / m, -cd / m]])
    B_c = np.array([[0.0], [1.0 / m]])
    return A_c, B_c


def step_param_time(spec: ScenarioSpec, k: int) -> float:
    """Time at which step k's frozen parameters are evaluated (the midpoint).

    Freezing at the midpoint keeps the piecewise-constant model second-order
    accurate against the continuously varying plant; start-of-step freezing
    drifts an order of magnitude further over a full horizon.
    """
    return (k + 0.5) * spec.dt


def ground_truth_ltv(spec: ScenarioSpec) -> LtvModel:
    """Per-step ZOH discretization of the linearized plant (the L-LTV baseline)."""
    n = spec.n_steps
    A = np.empty((n, 2, 2))
    B = np.empty((n, 2, 1))
    for k in range(n):
        A_c, B_c = linearized_rates(spec, step_param_time(spec, k))
        pair = discretize(A_c, B_c, spec.dt)
        A[k] = pair.A
        B[k] = pair.B
    return LtvModel(A=A, B=B, dt=spec.dt, method="linearization", hyperparams={})
