from enum import Enum
from typing import Dict, Optional
from pydantic import BaseModel, Field, model_validator

ADDITIVITY_TOLERANCE = 0.01


class Stage(str, Enum):
    TRANSLATION = "translation"
    TEXT_PROCESSING = "text_processing"
    REPRESENTATION = "representation"
    INDEX_BUILD = "index_build"


class TimingLedger(BaseModel):
    system: str
    stages: Dict[Stage, float] = Field(default_factory=lambda: {s: 0.0 for s in Stage})
    doc_count: int = Field(default=0, ge=0)
    total_seconds: Optional[float] = None
    map: Optional[float] = None

    @model_validator(mode="after")
    def _check_stages(self):
        for stage, seconds in self.stages.items():
            if seconds < 0:
                raise ValueError(f"stage {stage.value} has negative time")
        for stage in Stage:
            self.stages.setdefault(stage, 0.0)
        stage_sum = sum(self.stages.values())
        if self.total_seconds is None:
            self.total_seconds = stage_sum
        elif abs(self.total_seconds - stage_sum) > ADDITIVITY_TOLERANCE * max(self.total_seconds, stage_sum):
            raise ValueError(
                f"total {self.total_seconds:.4f}s differs from the stage sum {stage_sum:.4f}s by more than 1%"
            )
        return self

    @property
    def total(self) -> float:
        return sum(self.stages.values())

    @property
    def per_document(self) -> Optional[float]:
        if self.doc_count == 0:
            return None
        return self.total / self.doc_count
