from typing import Dict
from pydantic import BaseModel, ConfigDict, Field


class BM25Params(BaseModel):
    model_config = ConfigDict(frozen=True)

    k1: float = Field(default=0.9, ge=0.0)
    b: float = Field(default=0.4, ge=0.0, le=1.0)


class CollectionStats(BaseModel):
    model_config = ConfigDict(frozen=True)

    doc_count: int = Field(ge=0)
    avg_doc_len: float = Field(ge=0.0)
    doc_lens: Dict[str, int]
    df: Dict[str, int]


class LanguageProfile(BaseModel):
    lang: str
    doc_count: int
    mean_length: float
