from enum import Enum
import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

NORM_TOLERANCE = 1e-4


class ScorerKind(str, Enum):
    MAXSIM = "maxsim"
    SINGLE_VECTOR = "single-vector"

    @property
    def mode_byte(self) -> int:
        return 0 if self is ScorerKind.MAXSIM else 1

    @classmethod
    def from_mode_byte(cls, mode: int) -> "ScorerKind":
        if mode == 0:
            return cls.MAXSIM
        if mode == 1:
            return cls.SINGLE_VECTOR
        raise ValueError(f"unknown store mode {mode}")


def _unit_rows(v, ndim: int) -> np.ndarray:
    arr = np.array(v, dtype=np.float64)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("embedding must have at least one row and one dimension")
    norms = np.linalg.norm(arr, axis=-1)
    if np.any(np.abs(norms - 1.0) > NORM_TOLERANCE):
        raise ValueError("embedding rows must have unit L2 norm")
    arr.setflags(write=False)
    return arr


class TokenMatrix(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    id: str
    rows: np.ndarray

    @field_validator("rows", mode="before")
    @classmethod
    def _check_rows(cls, v):
        return _unit_rows(v, 2)

    @property
    def dim(self) -> int:
        return int(self.rows.shape[1])


class SingleVector(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    id: str
    vector: np.ndarray

    @field_validator("vector", mode="before")
    @classmethod
    def _check_vector(cls, v):
        return _unit_rows(v, 1)

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])


class PassageRef(BaseModel):
    model_config = ConfigDict(frozen=True)

    passage_id: str
    doc_id: str
    passage_index: int
