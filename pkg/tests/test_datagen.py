import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from ltvbench.datagen import (
    ExcitationSpec,
    Split,
    build_dataset,
    chirp,
    default_excitations,
    load_dataset,
    load_trajectory_csv,
    save_dataset,
    save_trajectory_csv,
    tvera_experiments,
)
from ltvbench.dynamics import scenario, step_rk4
from ltvbench.exceptions import DataFormatError


def small_splits(noise_var=1e-6, seed=42, name="ltv"):
    spec = scenario(name)
    return build_dataset(
        spec,
        default_excitations(spec.horizon),
        counts=(4, 3, 3),
        noise_var=noise_var,
        master_seed=seed,
    )


class TestChirp:
    def test_zero_phase_at_origin(self):
        ex = ExcitationSpec(amplitude=2.0, omega0=1.0, omega1=3.0, duration=10.0)
        assert chirp(ex, 0.0) == 0.0

    def test_degenerate_sweep_is_pure_sinusoid(self):
        ex = ExcitationSpec(amplitude=1.5, omega0=2.0, omega1=2.0, duration=10.0, phase=0.4)
        for t in (0.0, 0.7, 3.1):
            assert chirp(ex, t) == pytest.approx(1.5 * math.sin(2.0 * t + 0.4))

    def test_quarter_phase_hits_amplitude(self):
        ex = ExcitationSpec(amplitude=3.0, omega0=1.0, omega1=2.0, duration=10.0, phase=math.pi / 2)
        assert chirp(ex, 0.0) == pytest.approx(3.0)

    def test_noise_is_seeded(self):
        ex = ExcitationSpec(amplitude=1.0, omega0=1.0, omega1=2.0, duration=10.0, noise_var=0.04)
        a = chirp(ex, 1.0, np.random.default_rng(9))
        b = chirp(ex, 1.0, np.random.default_rng(9))
        assert a == b
        assert a != chirp(ex, 1.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            ExcitationSpec(amplitude=0.0, omega0=1.0, omega1=2.0, duration=10.0)
        with pytest.raises(ValueError):
            ExcitationSpec(amplitude=1.0, omega0=3.0, omega1=2.0, duration=10.0)


class TestBuildDataset:
    def test_noise_free_train_equals_exact_integration(self):
        # re-integrate the recorded inputs; with zero measurement noise the
        # stored states must be the raw simulation output bit for bit
        splits = small_splits(noise_var=0.0)
        spec = scenario("ltv")
        traj = splits[Split.TRAIN].trajectories[0]
        x = traj.states[0].copy()
        for k in range(traj.n_steps):
            x = step_rk4(spec, traj.times[k], x, traj.inputs[k, 0], spec.dt)
            assert np.array_equal(x, traj.states[k + 1])

    def test_measurement_noise_perturbs_train_only(self):
        exact = small_splits(noise_var=0.0)
        noisy = small_splits(noise_var=1e-4)
        assert not np.array_equal(
            exact[Split.TRAIN].trajectories[0].states,
            noisy[Split.TRAIN].trajectories[0].states,
        )
        for split in (Split.VALIDATION, Split.TEST):
            for a, b in zip(exact[split].trajectories, noisy[split].trajectories):
                assert np.array_equal(a.states, b.states)

    def test_same_master_seed_is_identical(self):
        a = small_splits(seed=7)
        b = small_splits(seed=7)
        for split in Split:
            assert a[split] == b[split]

    def test_counts_include_free_response(self):
        spec = scenario("ltv")
        splits = build_dataset(
            spec,
            default_excitations(spec.horizon),
            counts=(2, 4, 2),
            noise_var=0.0,
            master_seed=1,
            n_free=2,
        )
        val = splits[Split.VALIDATION]
        assert len(val) == 6
        assert val.labels.count("free") == 2

    def test_free_response_trajectories(self):
        splits = small_splits()
        test = splits[Split.TEST]
        for traj, label in zip(test.trajectories, test.labels):
            if label == "free":
                assert_allclose(traj.inputs, 0.0)
                assert np.any(traj.states[0] != 0.0)

    def test_split_flags(self):
        splits = small_splits()
        assert all(t.noisy for t in splits[Split.TRAIN].trajectories)
        assert not any(t.noisy for t in splits[Split.VALIDATION].trajectories)
        assert not any(t.noisy for t in splits[Split.TEST].trajectories)

    def test_length_and_time_grid_invariants(self):
        for ds in small_splits().values():
            for traj in ds.trajectories:
                assert len(traj.states) == len(traj.inputs) + 1
                assert np.allclose(np.diff(traj.times), ds.scenario.dt, rtol=0, atol=1e-12)

    def test_distinct_bands_required(self):
        spec = scenario("ltv")
        ex = default_excitations(spec.horizon)
        ex[Split.TEST] = ex[Split.TRAIN]
        with pytest.raises(ValueError):
            build_dataset(spec, ex, counts=(2, 2, 2), noise_var=0.0, master_seed=0)


class TestExperiments:
    def test_structure(self):
        ds = tvera_experiments(scenario("ltv"), n_free=3, n_forced=5, noise_var=0.0, master_seed=5)
        assert len(ds) == 8
        assert ds.labels[:3] == ("free",) * 3
        for traj, label in zip(ds.trajectories, ds.labels):
            if label == "free":
                assert_allclose(traj.inputs, 0.0)
                assert np.any(traj.states[0] != 0.0)
            else:
                assert_allclose(traj.states[0], 0.0)
                assert np.std(traj.inputs) > 0.1

    def test_deterministic(self):
        a = tvera_experiments(scenario("nld"), master_seed=2)
        b = tvera_experiments(scenario("nld"), master_seed=2)
        assert a == b


class TestPersistence:
    def test_round_trip(self, tmp_path):
        ds = small_splits()[Split.TRAIN]
        save_dataset(ds, tmp_path / "train")
        assert load_dataset(tmp_path / "train") == ds

    def test_round_trip_preserves_full_precision(self, tmp_path):
        ds = small_splits()[Split.VALIDATION]
        save_dataset(ds, tmp_path / "val")
        loaded = load_dataset(tmp_path / "val")
        for a, b in zip(ds.trajectories, loaded.trajectories):
            assert np.array_equal(a.states, b.states)
            assert np.array_equal(a.inputs, b.inputs)
            assert np.array_equal(a.times, b.times)

    def test_load_empty_dir(self, tmp_path):
        with pytest.raises(DataFormatError):
            load_dataset(tmp_path)

    def test_missing_trajectory_file(self, tmp_path):
        ds = small_splits()[Split.TEST]
        save_dataset(ds, tmp_path / "d")
        (tmp_path / "d" / "traj_0001.csv").unlink()
        with pytest.raises(DataFormatError, match="traj_0001"):
            load_dataset(tmp_path / "d")

    def test_csv_layout(self, tmp_path):
        ds = small_splits()[Split.TRAIN]
        save_trajectory_csv(ds.trajectories[0], tmp_path / "t.csv")
        lines = (tmp_path / "t.csv").read_text().strip().splitlines()
        assert lines[0] == "t,x1,x2,u"
        assert len(lines) == 1 + 501
        assert lines[-1].endswith(",")    # final row has no input

    def test_trajectory_csv_round_trip(self, tmp_path):
        ds = small_splits()[Split.TRAIN]
        save_trajectory_csv(ds.trajectories[1], tmp_path / "t.csv")
        loaded = load_trajectory_csv(tmp_path / "t.csv")
        assert np.array_equal(loaded.states, ds.trajectories[1].states)
        assert np.array_equal(loaded.inputs, ds.trajectories[1].inputs)
