"""
DCWS - Error Bound and Constraint System Models
"""

from typing import List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class BoundVector(BaseModel):
    """Upper bounds on each weak signal's expected error over its covered examples"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    bounds: np.ndarray = Field(..., description="One non-negative bound per signal")
    defaulted: List[int] = Field(
        default_factory=list,
        description="Signals whose bound fell back to 0 because no labeled row covered them",
    )

    @field_validator("bounds", mode="before")
    @classmethod
    def _check_bounds(cls, value):
        bounds = np.array(value, dtype=float).reshape(-1)
        if not np.all(np.isfinite(bounds)):
            raise ValueError("bounds must be finite")
        if np.any(bounds < 0.0):
            raise ValueError("bounds must be non-negative")
        bounds.setflags(write=False)
        return bounds

    @classmethod
    def zeros(cls, n_signals: int) -> "BoundVector":
        """The tight default b = 0"""
        return cls(bounds=np.zeros(n_signals))

    @property
    def n_signals(self) -> int:
        return self.bounds.shape[0]


class ConstraintSystem(BaseModel):
    """
    Linear rows A and offsets b with A_i y_{k_i} <= b_i encoding each error bound.

    A_i = 1(q_i != abstain) * (1 - 2 q_i) and b_i = n_i * bound_i - sum of q_i over covered entries.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    rows: np.ndarray = Field(..., description="n_signals x n_examples matrix A")
    mask: np.ndarray = Field(..., description="n_signals x n_examples, True where the signal votes")
    offsets: np.ndarray = Field(..., description="Offset b per signal")
    signal_class: np.ndarray = Field(..., description="Class index k_i per row")
    columns: np.ndarray = Field(..., description="Label column each row constrains")
    covered_counts: np.ndarray = Field(..., description="n_i, covered examples per row")
    n_columns: int = Field(1, ge=1, description="Columns of the labelings the system applies to")

    @field_validator("rows", "offsets", mode="before")
    @classmethod
    def _as_float(cls, value):
        array = np.array(value, dtype=float)
        array.setflags(write=False)
        return array

    @field_validator("mask", mode="before")
    @classmethod
    def _as_bool(cls, value):
        array = np.array(value, dtype=bool)
        array.setflags(write=False)
        return array

    @field_validator("signal_class", "columns", "covered_counts", mode="before")
    @classmethod
    def _as_int(cls, value):
        array = np.array(value, dtype=int)
        array.setflags(write=False)
        return array

    @model_validator(mode="after")
    def _check_shapes(self):
        n_signals = self.rows.shape[0]
        for name in ("offsets", "signal_class", "columns", "covered_counts"):
            if getattr(self, name).shape != (n_signals,):
                raise ValueError(f"{name} must have one entry per row ({n_signals})")
        if self.mask.shape != self.rows.shape:
            raise ValueError("mask must match the shape of rows")
        if np.any(self.rows[~self.mask] != 0.0):
            raise ValueError("rows must be zero where the signal abstains")
        if np.any(np.abs(self.rows) > 1.0):
            raise ValueError("constraint rows must lie in [-1, 1]")
        if np.any(self.covered_counts < 1):
            raise ValueError("every row needs at least one covered example")
        if np.any((self.columns < 0) | (self.columns >= self.n_columns)):
            raise ValueError("row columns out of range")
        return self

    @property
    def n_signals(self) -> int:
        return self.rows.shape[0]

    @property
    def n_examples(self) -> int:
        return self.rows.shape[1]

    def column_selector(self) -> np.ndarray:
        """n_signals x n_columns one-hot matrix mapping each row to its label column"""
        selector = np.zeros((self.n_signals, self.n_columns))
        selector[np.arange(self.n_signals), self.columns] = 1.0
        return selector
