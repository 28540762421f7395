from typing import Optional, Tuple, FrozenSet
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator


class Document(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str = Field(min_length=1)
    lang: str = Field(min_length=2)
    title: Optional[str] = None
    text: str = ""


class Query(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str = Field(min_length=1)
    lang: str = Field(min_length=2)
    title: str
    description: Optional[str] = None

    def text(self, fields: str = "title+description") -> str:
        if fields == "title" or not self.description:
            return self.title
        return f"{self.title} {self.description}"


class Passage(BaseModel):
    model_config = ConfigDict(frozen=True)

    doc_id: str
    index: int = Field(ge=0)
    tokens: Tuple[str, ...]
    # UTF-8 byte offsets into the source text
    char_span: Tuple[int, int]
    # token offsets inside the analyzed document
    token_span: Tuple[int, int]

    @property
    def id(self) -> str:
        return passage_id(self.doc_id, self.index)


def passage_id(doc_id: str, index: int) -> str:
    return f"{doc_id}#{index}"


class AnalyzerConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    lowercase: bool = True
    unicode_normalization: bool = True
    stem_languages: FrozenSet[str] = frozenset({"en"})
    stopword_list: Optional[FrozenSet[str]] = None

    @field_validator("stem_languages", mode="before")
    @classmethod
    def _lower_languages(cls, v):
        return frozenset(lang.lower() for lang in v)

    @field_serializer("stem_languages", "stopword_list")
    def _sorted_sets(self, v):
        return None if v is None else sorted(v)


class StopStructure(BaseModel):
    model_config = ConfigDict(frozen=True)

    phrases: Tuple[Tuple[str, ...], ...] = ()
    words: FrozenSet[str] = frozenset()
