"""
DCWS - Solver Configuration and Training State Models
"""

import enum
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from dcws.models.network import LabelModelParams


class PriorMode(str, enum.Enum):
    MAJORITY = "majority"
    UNIFORM = "uniform"
    NONE = "none"


class SolverConfig(BaseModel):
    """Saddle-point optimisation settings and ablation switches"""

    model_config = ConfigDict(frozen=True)

    slack_penalty: float = Field(10.0, ge=0.0, description="C, linear penalty on slack")
    prior_mode: PriorMode = Field(PriorMode.MAJORITY, description="Labeling the model regresses toward")
    use_slack: bool = Field(True, description="False pins xi at 0")
    use_constraints: bool = Field(True, description="False pins lambda at 0")
    max_epochs: int = Field(1000, ge=1)
    convergence_tol: float = Field(1e-3, gt=0.0)
    convergence_window: int = Field(10, ge=1, description="Epochs over which the Lagrangian, multipliers and slacks must hold still")
    stall_patience: int = Field(200, ge=1, description="Epochs without a lower max violation before giving up")
    lr_theta: float = Field(0.01, gt=0.0)
    lr_lambda: float = Field(0.01, gt=0.0, description="Multiplier ascent rate; multipliers stay in [0, C] with slack")
    lr_xi: float = Field(1.0, gt=0.0, le=1.0, description="Share of the gap to max(0, A f - b) each slack closes per epoch")
    seed: int = Field(0)


class EpochRecord(BaseModel):
    """One line of training history"""

    model_config = ConfigDict(frozen=True)

    epoch: int = Field(..., ge=0)
    lagrangian: float
    max_violation: float
    mean_slack: float = Field(..., ge=0.0)


class TrainState(BaseModel):
    """Model parameters with the multipliers, slacks and history of one fit"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    params: Optional[LabelModelParams] = Field(None, description="None for the direct solve")
    lambdas: np.ndarray = Field(..., description="KKT multiplier per signal, >= 0")
    slacks: np.ndarray = Field(..., description="Slack per signal, >= 0")
    epoch: int = Field(0, ge=0, description="Epochs run")
    history: List[EpochRecord] = Field(default_factory=list)
    converged: bool = False
    stalled: bool = False
    diagnostic: Optional[str] = None

    @field_validator("lambdas", "slacks", mode="before")
    @classmethod
    def _non_negative(cls, value):
        array = np.array(value, dtype=float)
        if np.any(array < 0.0):
            raise ValueError("multipliers and slacks must be non-negative")
        return array

    @property
    def final_violation(self) -> Optional[float]:
        return self.history[-1].max_violation if self.history else None
