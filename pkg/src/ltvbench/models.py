"""Model containers shared by the simulation, identification, and control layers."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import DataFormatError

MODEL_FORMAT = "ltv-model/1"


@dataclass
class MatrixPair:
    """A single (A, B) pair: per-step state transition and input map."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.B = np.asarray(self.B, dtype=float)
        if self.A.ndim != 2 or self.A.shape[0] != self.A.shape[1]:
            raise ValueError(f"A must be square, got shape {self.A.shape}")
        if self.B.ndim != 2 or self.B.shape[0] != self.A.shape[0]:
            raise ValueError(
                f"B must have {self.A.shape[0]} rows to match A, got shape {self.B.shape}"
            )

    @property
    def p(self) -> int:
        return self.A.shape[0]

    @property
    def q(self) -> int:
        return self.B.shape[1]


@dataclass
class LtvModel:
    """Discrete LTV model x(k+1) = A(k) x(k) + B(k) u(k) for k = 0..N-1.

    ``A`` has shape (N, p, p) and ``B`` shape (N, p, q).  ``info`` holds
    solver diagnostics (iteration counts, convergence flags); it is not part
    of the persisted file format.
    """

    A: np.ndarray
    B: np.ndarray
    dt: float
    method: str = ""
    hyperparams: dict = field(default_factory=dict)
    preconditioning: dict | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.B = np.asarray(self.B, dtype=float)
        if self.A.ndim != 3 or self.A.shape[1] != self.A.shape[2]:
            raise ValueError(f"A must be (N, p, p), got shape {self.A.shape}")
        if self.B.ndim != 3 or self.B.shape[:2] != self.A.shape[:2]:
            raise ValueError(f"B must be (N, p, q), got shape {self.B.shape}")
        if self.A.shape[0] < 1:
            raise ValueError("model must cover at least one step")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")

    @property
    def n_steps(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.A.shape[1]

    @property
    def q(self) -> int:
        return self.B.shape[2]

    def pair(self, k: int) -> MatrixPair:
        return MatrixPair(self.A[k], self.B[k])

    def stacked(self) -> np.ndarray:
        """Return the per-step parameter blocks [A(k)^T; B(k)^T], shape (N, p+q, p)."""
        return np.concatenate(
            [self.A.transpose(0, 2, 1), self.B.transpose(0, 2, 1)], axis=1
        )

    @classmethod
    def from_stacked(cls, blocks: np.ndarray, q: int, dt: float, **meta) -> "LtvModel":
        blocks = np.asarray(blocks, dtype=float)
        p = blocks.shape[1] - q
        A = blocks[:, :p, :].transpose(0, 2, 1)
        B = blocks[:, p:, :].transpose(0, 2, 1)
        return cls(A=A, B=B, dt=dt, **meta)

    @classmethod
    def from_constant(cls, pair: MatrixPair, n_steps: int, dt: float, **meta) -> "LtvModel":
        A = np.repeat(pair.A[None, :, :], n_steps, axis=0)
        B = np.repeat(pair.B[None, :, :], n_steps, axis=0)
        return cls(A=A, B=B, dt=dt, **meta)


def _plain(obj):
    """Convert numpy scalars/arrays to builtin types for JSON output."""
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def save_model(model: LtvModel, path) -> None:
    """Write a model to JSON with row-major A(k)/B(k) arrays at full precision."""
    payload = {
        "format": MODEL_FORMAT,
        "p": model.p,
        "q": model.q,
        "n_steps": model.n_steps,
        "dt": model.dt,
        "method": model.method,
        "hyperparams": _plain(model.hyperparams),
        "preconditioning": _plain(model.preconditioning),
        "A": model.A.tolist(),
        "B": model.B.tolist(),
    }
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def load_model(path) -> LtvModel:
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"model file not found: {path}")
    try:
        payload = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"cannot parse model file {path}: {exc}") from exc
    try:
        if payload["format"] != MODEL_FORMAT:
            raise DataFormatError(
                f"unexpected format tag {payload['format']!r} in {path}"
            )
        model = LtvModel(
            A=np.asarray(payload["A"], dtype=float),
            B=np.asarray(payload["B"], dtype=float),
            dt=float(payload["dt"]),
            method=payload.get("method", ""),
            hyperparams=payload.get("hyperparams") or {},
            preconditioning=payload.get("preconditioning"),
        )
    except (KeyError, ValueError) as exc:
        raise DataFormatError(f"malformed model file {path}: {exc}") from exc
    if (model.p, model.q, model.n_steps) != (
        payload["p"],
        payload["q"],
        payload["n_steps"],
    ):
        raise DataFormatError(f"dimension header disagrees with arrays in {path}")
    return model
