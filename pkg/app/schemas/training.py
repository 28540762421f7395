from enum import Enum
from typing import List, Optional
from pydantic import BaseModel, ConfigDict, Field, model_validator


class MixMode(str, Enum):
    ET = "ET"
    MTT_M = "MTT-M"
    MTT_S = "MTT-S"


class Triple(BaseModel):
    model_config = ConfigDict(frozen=True)

    query_text: str = Field(min_length=1)
    positive: str = Field(min_length=1)
    negative: str = Field(min_length=1)
    lang: str = Field(min_length=2)
    # 1-based line in the per-language source file
    line: Optional[int] = None


class MixConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    mode: MixMode
    languages: List[str] = Field(min_length=1)
    batch_size: int = Field(default=32, ge=1)
    seed: int = 13
    replicas: int = Field(default=1, ge=1)
    shuffle: bool = False

    @model_validator(mode="after")
    def _check_languages(self):
        if len(set(self.languages)) != len(self.languages):
            raise ValueError("languages must be distinct")
        if self.mode is MixMode.ET and len(self.languages) != 1:
            raise ValueError("ET training uses exactly one language")
        if self.mode is not MixMode.ET and len(self.languages) < 2:
            raise ValueError(f"{self.mode.value} needs at least two languages")
        return self


class ScheduledTriple(BaseModel):
    model_config = ConfigDict(frozen=True)

    triple: Triple
    batch: int
    position: int
    replica: int = 0


class MixSchedule(BaseModel):
    config: MixConfig
    entries: List[ScheduledTriple]
    partial_batches: List[int] = Field(default_factory=list)

    def batches(self) -> List[List[Triple]]:
        out: List[List[Triple]] = []
        for e in self.entries:
            if e.batch == len(out):
                out.append([])
            out[e.batch].append(e.triple)
        return out
