import numpy as np
import pytest
from numpy.testing import assert_allclose

from ltvbench.exceptions import DataFormatError
from ltvbench.models import LtvModel, MatrixPair, load_model, save_model


def test_matrix_pair_validation():
    with pytest.raises(ValueError):
        MatrixPair(np.zeros((2, 3)), np.zeros((2, 1)))
    with pytest.raises(ValueError):
        MatrixPair(np.eye(2), np.zeros((3, 1)))
    pair = MatrixPair(np.eye(2), np.zeros((2, 1)))
    assert (pair.p, pair.q) == (2, 1)


def test_ltv_model_validation():
    with pytest.raises(ValueError):
        LtvModel(A=np.zeros((0, 2, 2)), B=np.zeros((0, 2, 1)), dt=0.1)
    with pytest.raises(ValueError):
        LtvModel(A=np.zeros((3, 2, 2)), B=np.zeros((2, 2, 1)), dt=0.1)
    with pytest.raises(ValueError):
        LtvModel(A=np.zeros((3, 2, 2)), B=np.zeros((3, 2, 1)), dt=0.0)


def test_stacked_round_trip(constant_model):
    blocks = constant_model.stacked()
    assert blocks.shape == (constant_model.n_steps, 3, 2)
    back = LtvModel.from_stacked(blocks, q=1, dt=constant_model.dt)
    assert_allclose(back.A, constant_model.A)
    assert_allclose(back.B, constant_model.B)
    # block layout is [A^T; B^T]
    assert_allclose(blocks[0][:2, :], constant_model.A[0].T)
    assert_allclose(blocks[0][2:, :], constant_model.B[0].T)


def test_model_file_round_trip(tmp_path, constant_model):
    rng = np.random.default_rng(0)
    model = LtvModel(
        A=rng.normal(size=(4, 2, 2)),
        B=rng.normal(size=(4, 2, 1)),
        dt=0.05,
        method="cosmic",
        hyperparams={"lam": 0.125},
        preconditioning={"state_scale": [1.0, 2.0], "input_scale": [0.5], "zero_variance": []},
    )
    save_model(model, tmp_path / "m.json")
    loaded = load_model(tmp_path / "m.json")
    assert np.array_equal(loaded.A, model.A)
    assert np.array_equal(loaded.B, model.B)
    assert loaded.dt == model.dt
    assert loaded.method == model.method
    assert loaded.hyperparams == model.hyperparams
    assert loaded.preconditioning == model.preconditioning


def test_load_model_errors(tmp_path):
    with pytest.raises(DataFormatError):
        load_model(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(DataFormatError):
        load_model(bad)
    wrong = tmp_path / "wrong.json"
    wrong.write_text('{"format": "something-else"}')
    with pytest.raises(DataFormatError):
        load_model(wrong)
