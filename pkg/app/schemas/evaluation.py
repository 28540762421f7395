from typing import Dict, List, Optional
from pydantic import BaseModel, ConfigDict, Field, model_validator

ALL_LANGUAGES = "ALL"


class ScoredDocument(BaseModel):
    model_config = ConfigDict(frozen=True)

    doc_id: str
    score: float


class Run(BaseModel):
    tag: str = "mlir"
    rankings: Dict[str, List[ScoredDocument]] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_rankings(self):
        for qid, ranking in self.rankings.items():
            seen = set()
            for i, item in enumerate(ranking):
                if item.doc_id in seen:
                    raise ValueError(f"query {qid}: document {item.doc_id} retrieved twice")
                seen.add(item.doc_id)
                if i and item.score > ranking[i - 1].score:
                    raise ValueError(f"query {qid}: scores must be non-increasing with rank")
        return self

    def doc_ids(self, qid: str) -> List[str]:
        return [item.doc_id for item in self.rankings.get(qid, [])]


class MergedQrels(BaseModel):
    judgments: Dict[str, Dict[str, int]] = Field(default_factory=dict)
    doc_lang: Dict[str, str] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_judgments(self):
        for qid, docs in self.judgments.items():
            for doc_id, grade in docs.items():
                if grade < 0:
                    raise ValueError(f"query {qid}: negative relevance grade for {doc_id}")
                if doc_id not in self.doc_lang:
                    raise ValueError(f"query {qid}: judged document {doc_id} has no language")
        return self

    def relevant(self, qid: str, lang: Optional[str] = None) -> set[str]:
        docs = self.judgments.get(qid, {})
        return {
            d for d, grade in docs.items()
            if grade > 0 and (lang is None or lang == ALL_LANGUAGES or self.doc_lang.get(d) == lang)
        }

    @property
    def languages(self) -> List[str]:
        judged = {d for docs in self.judgments.values() for d in docs}
        return sorted({self.doc_lang[d] for d in judged})


class Distribution(BaseModel):
    topic_count: int
    mean: Optional[float] = None
    median: Optional[float] = None
    q1: Optional[float] = None
    q3: Optional[float] = None
    outliers: List[float] = Field(default_factory=list)


class KSResult(BaseModel):
    lang: str
    topic: str
    d: float
    p: float
    adjusted_p: float
    n_lang: int
    n_reference: int


class LanguageBias(BaseModel):
    lang: str
    recall: Distribution
    recall_by_topic: Dict[str, float] = Field(default_factory=dict)
    ks_topic_count: int = 0
    biased_topic_count: int = 0
    biased_fraction: Optional[float] = None
    mean_relevant_per_topic: Optional[float] = None


class BiasReport(BaseModel):
    tag: str
    reference_lang: str
    languages: Dict[str, LanguageBias]
    ks_tests: List[KSResult] = Field(default_factory=list)
    n_tests: int = 0
    significance_level: float = 0.05
    mean_r_precision: Optional[float] = None
    p_value_method: str = "asymptotic Kolmogorov distribution, Bonferroni-adjusted"
    warnings: List[str] = Field(default_factory=list)


class QueryMetrics(BaseModel):
    qid: str
    average_precision: float
    precision_at_10: float
    r_precision: float
    recall_by_lang: Dict[str, Optional[float]] = Field(default_factory=dict)


class SignificanceResult(BaseModel):
    metric: str
    t: float
    p: float
    adjusted_p: float
    n: int
