"""Excitation signals, dataset assembly, and dataset persistence.

Training data is collected open loop under a disturbed chirp input with
measurement noise added to the stored states only (never fed back into the
simulation).  Validation and test splits are exact and carry extra
free-response trajectories (zero input, nonzero initial state).  All
randomness derives from a single master seed through per-trajectory
substreams, so adding trajectories never perturbs existing ones.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .dynamics import ScenarioSpec, Trajectory, load_scenario, save_scenario, simulate
from .exceptions import DataFormatError

MANIFEST_NAME = "manifest.json"
DATASET_FORMAT = "trajectory-dataset/1"

# Stream tags keep differently-purposed draws independent of each other.
_STREAM_CHIRP = 0
_STREAM_EXPERIMENTS = 1


class Split(Enum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"


_SPLIT_CODE = {Split.TRAIN: 0, Split.VALIDATION: 1, Split.TEST: 2}


@dataclass(frozen=True)
class ExcitationSpec:
    """Disturbed chirp parameters: frequency sweep, amplitude, phase, noise."""

    amplitude: float = 1.0
    omega0: float = 0.5        # rad/s, sweep floor
    omega1: float = 8.0        # rad/s, sweep ceiling
    duration: float = 10.0     # s, sweep horizon
    phase: float = 0.0         # rad
    noise_var: float = 0.0     # variance of the additive input disturbance

    def __post_init__(self):
        if self.amplitude <= 0:
            raise ValueError(f"amplitude must be positive, got {self.amplitude}")
        if not 0 < self.omega0 <= self.omega1:
            raise ValueError(
                f"need 0 < omega0 <= omega1, got ({self.omega0}, {self.omega1})"
            )
        if self.noise_var < 0:
            raise ValueError(f"noise variance must be >= 0, got {self.noise_var}")
        if self.duration <= 0:
            raise ValueError(f"duration must be positive, got {self.duration}")


def chirp(ex: ExcitationSpec, t: float, rng: np.random.Generator | None = None) -> float:
    """Disturbed chirp sample: A*sin(((w1-w0)/T) t^2 + w0 t + phase) + noise."""
    arg = (ex.omega1 - ex.omega0) / ex.duration * t * t + ex.omega0 * t + ex.phase
    u = ex.amplitude * math.sin(arg)
    if rng is not None and ex.noise_var > 0:
        u += rng.normal(0.0, math.sqrt(ex.noise_var))
    return u


@dataclass(eq=False)
class Dataset:
    """A labeled collection of trajectories from one scenario."""

    split: Split
    trajectories: list
    scenario: ScenarioSpec
    excitation: ExcitationSpec | None = None
    noise_var: float = 0.0
    labels: tuple = ()
    master_seed: int | None = None

    def __post_init__(self):
        if self.labels and len(self.labels) != len(self.trajectories):
            raise ValueError("labels must match trajectory count")

    def __len__(self):
        return len(self.trajectories)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.split == other.split
            and self.scenario == other.scenario
            and self.excitation == other.excitation
            and self.noise_var == other.noise_var
            and tuple(self.labels) == tuple(other.labels)
            and self.master_seed == other.master_seed
            and len(self.trajectories) == len(other.trajectories)
            and all(a == b for a, b in zip(self.trajectories, other.trajectories))
        )


def _traj_seed_seq(master_seed: int, stream: int, split_code: int, index: int):
    return np.random.SeedSequence([int(master_seed), stream, split_code, index])


def _display_seed(seq: np.random.SeedSequence) -> int:
    return int(seq.generate_state(1, dtype=np.uint32)[0])


def _chirp_trajectory(spec, ex, master_seed, split, index, noise_var, free_response):
    seq = _traj_seed_seq(master_seed, _STREAM_CHIRP, _SPLIT_CODE[split], index)
    init_rng, input_rng, process_rng, noise_rng = (
        np.random.default_rng(c) for c in seq.spawn(4)
    )
    x0 = init_rng.uniform(-1.0, 1.0, size=2)
    if free_response:
        signal = lambda t: 0.0
    else:
        ex_t = replace(ex, phase=init_rng.uniform(0.0, 2.0 * math.pi))
        signal = lambda t: chirp(ex_t, t, input_rng)
    traj = simulate(spec, x0, signal, seed=process_rng)
    traj.seed = _display_seed(seq)
    if split is Split.TRAIN:
        traj.noisy = True
        if noise_var > 0:
            traj.states = traj.states + noise_rng.normal(
                0.0, math.sqrt(noise_var), size=traj.states.shape
            )
    return traj


def build_dataset(
    spec: ScenarioSpec,
    excitations: dict,
    counts: tuple = (20, 8, 8),
    noise_var: float = 1e-6,
    master_seed: int = 0,
    n_free: int = 2,
) -> dict:
    """Build the train/validation/test datasets for one scenario.

    ``excitations`` maps each :class:`Split` to its chirp parameters (each
    split should sweep a distinct frequency band).  Training states carry
    additive measurement noise of variance ``noise_var``; validation and test
    are exact and get ``n_free`` extra free-response trajectories each.
    """
    if any(c < 1 for c in counts):
        raise ValueError("each split needs at least one trajectory")
    bands = [
        (excitations[s].omega0, excitations[s].omega1)
        for s in (Split.TRAIN, Split.VALIDATION, Split.TEST)
    ]
    if len(set(bands)) != len(bands):
        raise ValueError("splits must sweep distinct chirp frequency bands")
    out = {}
    for split, count in zip((Split.TRAIN, Split.VALIDATION, Split.TEST), counts):
        ex = excitations[split]
        trajs = []
        labels = []
        for i in range(count):
            trajs.append(
                _chirp_trajectory(spec, ex, master_seed, split, i, noise_var, False)
            )
            labels.append("chirp")
        if split is not Split.TRAIN:
            for i in range(n_free):
                trajs.append(
                    _chirp_trajectory(
                        spec, ex, master_seed, split, count + i, noise_var, True
                    )
                )
                labels.append("free")
        out[split] = Dataset(
            split=split,
            trajectories=trajs,
            scenario=spec,
            excitation=ex,
            noise_var=noise_var if split is Split.TRAIN else 0.0,
            labels=tuple(labels),
            master_seed=master_seed,
        )
    return out


def default_excitations(duration: float, noise_var: float = 0.01) -> dict:
    """Per-split chirp bands: distinct sweeps so validation/test generalize."""
    return {
        Split.TRAIN: ExcitationSpec(1.0, 0.5, 8.0, duration, 0.0, noise_var),
        Split.VALIDATION: ExcitationSpec(1.0, 0.8, 6.0, duration, 0.0, noise_var),
        Split.TEST: ExcitationSpec(1.0, 0.6, 7.0, duration, 0.0, noise_var),
    }


def tvera_experiments(
    spec: ScenarioSpec,
    n_free: int = 4,
    n_forced: int = 10,
    noise_var: float = 1e-6,
    master_seed: int = 0,
    input_std: float = 1.0,
) -> Dataset:
    """Free-response and random-input experiments for realization methods.

    Free runs start from random nonzero states with zero input; forced runs
    start at rest and receive white-noise inputs.  States carry training
    measurement noise.
    """
    trajs = []
    labels = []
    for i in range(n_free + n_forced):
        seq = _traj_seed_seq(master_seed, _STREAM_EXPERIMENTS, 0, i)
        init_rng, input_rng, process_rng, noise_rng = (
            np.random.default_rng(c) for c in seq.spawn(4)
        )
        if i < n_free:
            x0 = init_rng.uniform(-1.0, 1.0, size=2)
            signal = lambda t: 0.0
            labels.append("free")
        else:
            x0 = np.zeros(2)
            signal = lambda t: input_rng.normal(0.0, input_std)
            labels.append("random")
        traj = simulate(spec, x0, signal, seed=process_rng)
        traj.seed = _display_seed(seq)
        traj.noisy = True
        if noise_var > 0:
            traj.states = traj.states + noise_rng.normal(
                0.0, math.sqrt(noise_var), size=traj.states.shape
            )
        trajs.append(traj)
    return Dataset(
        split=Split.TRAIN,
        trajectories=trajs,
        scenario=spec,
        excitation=None,
        noise_var=noise_var,
        labels=tuple(labels),
        master_seed=master_seed,
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def save_trajectory_csv(traj: Trajectory, path) -> None:
    """Write one trajectory as CSV: t, state columns, input columns.

    The final row has empty input fields (states run one step longer).
    """
    p, q = traj.p, traj.q
    header = ["t"] + [f"x{i+1}" for i in range(p)] + [f"u{i+1}" if q > 1 else "u" for i in range(q)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(len(traj.states)):
            row = [_fmt(traj.times[k])] + [_fmt(v) for v in traj.states[k]]
            if k < traj.n_steps:
                row += [_fmt(v) for v in traj.inputs[k]]
            else:
                row += [""] * q
            writer.writerow(row)


def load_trajectory_csv(path, seed=None, noisy=False) -> Trajectory:
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"trajectory file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"empty trajectory file: {path}") from None
        p = sum(1 for name in header if name.startswith("x"))
        q = len(header) - 1 - p
        if p < 1 or q < 1:
            raise DataFormatError(f"unrecognized trajectory header in {path}: {header}")
        times, states, inputs = [], [], []
        for row in reader:
            if not row:
                continue
            try:
                times.append(float(row[0]))
                states.append([float(v) for v in row[1 : 1 + p]])
                if row[1 + p] != "":
                    inputs.append([float(v) for v in row[1 + p : 1 + p + q]])
            except (ValueError, IndexError) as exc:
                raise DataFormatError(f"bad row in {path}: {row}") from exc
    try:
        return Trajectory(
            times=np.array(times),
            states=np.array(states),
            inputs=np.array(inputs).reshape(len(inputs), q),
            seed=seed,
            noisy=noisy,
        )
    except ValueError as exc:
        raise DataFormatError(f"inconsistent trajectory in {path}: {exc}") from exc


def save_dataset(ds: Dataset, directory) -> None:
    """Persist a dataset as one manifest plus one CSV per trajectory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, traj in enumerate(ds.trajectories):
        fname = f"traj_{i:04d}.csv"
        save_trajectory_csv(traj, directory / fname)
        entries.append({"file": fname, "seed": traj.seed, "noisy": traj.noisy})
    scenario_file = "scenario.json"
    save_scenario(ds.scenario, directory / scenario_file)
    manifest = {
        "format": DATASET_FORMAT,
        "split": ds.split.value,
        "scenario_file": scenario_file,
        "noise_var": ds.noise_var,
        "labels": list(ds.labels),
        "master_seed": ds.master_seed,
        "excitation": None
        if ds.excitation is None
        else {
            "amplitude": ds.excitation.amplitude,
            "omega0": ds.excitation.omega0,
            "omega1": ds.excitation.omega1,
            "duration": ds.excitation.duration,
            "phase": ds.excitation.phase,
            "noise_var": ds.excitation.noise_var,
        },
        "trajectories": entries,
    }
    (directory / MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=1, sort_keys=True) + "\n"
    )


def load_dataset(directory) -> Dataset:
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.exists():
        raise DataFormatError(f"dataset manifest not found: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"cannot parse {manifest_path}: {exc}") from exc
    if manifest.get("format") != DATASET_FORMAT:
        raise DataFormatError(f"unexpected dataset format in {manifest_path}")
    spec = load_scenario(directory / manifest["scenario_file"])
    ex = manifest.get("excitation")
    excitation = ExcitationSpec(**ex) if ex is not None else None
    trajs = []
    for entry in manifest["trajectories"]:
        trajs.append(
            load_trajectory_csv(
                directory / entry["file"],
                seed=entry.get("seed"),
                noisy=bool(entry.get("noisy", False)),
            )
        )
    return Dataset(
        split=Split(manifest["split"]),
        trajectories=trajs,
        scenario=spec,
        excitation=excitation,
        noise_var=float(manifest["noise_var"]),
        labels=tuple(manifest.get("labels", ())),
        master_seed=manifest.get("master_seed"),
    )
