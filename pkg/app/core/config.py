import json
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.core.errors import ConfigurationError
from app.schemas.text import AnalyzerConfig
from app.schemas.training import MixMode

RESOURCES_DIR = Path(__file__).resolve().parent.parent / "resources"


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="MLIR_", env_file=".env", env_file_encoding="utf-8", extra="ignore")

    LOG_LEVEL: str = "INFO"
    SEED: int = 13
    THREADS: int = 1
    OUTPUT_DIR: Path = Path("output")
    DEFAULT_K: int = 1000
    WINDOW: int = 180
    STRIDE: int = 90
    BM25_K1: float = 0.9
    BM25_B: float = 0.4
    EMBED_DIM: int = 32
    STEM_LANGUAGES: List[str] = ["en"]
    STOP_STRUCTURE_PATH: Path = RESOURCES_DIR / "stopstructure.txt"
    LANGUAGES: List[str] = []
    SIGNIFICANCE_LEVEL: float = 0.05
    PROGRESS: bool = False


settings = Settings()


class RetrievalMode(str, Enum):
    BM25 = "bm25"
    MAXSIM = "maxsim"
    SINGLE_VECTOR = "single-vector"


class QueryFields(str, Enum):
    TITLE = "title"
    TITLE_DESCRIPTION = "title+description"


class LangPath(BaseModel):
    """A file optionally tagged with a language, written ``lang=path`` on the command line."""

    lang: Optional[str] = None
    path: Path

    @classmethod
    def parse(cls, value: "str | dict | LangPath") -> "LangPath":
        if isinstance(value, (LangPath, dict)):
            return cls.model_validate(value)
        lang, sep, path = str(value).partition("=")
        if sep and lang and "/" not in lang and "\\" not in lang:
            return cls(lang=lang, path=Path(path))
        return cls(path=Path(value))


class PipelineConfig(BaseModel):
    corpus: Optional[Path] = None
    topics: Optional[Path] = None
    qrels: List[LangPath] = Field(default_factory=list)
    run: Optional[Path] = None
    baseline: Optional[Path] = None
    ledgers: List[Path] = Field(default_factory=list)
    triples: List[LangPath] = Field(default_factory=list)
    index_dir: Optional[Path] = None
    stop_structure: Path = Field(default_factory=lambda: settings.STOP_STRUCTURE_PATH)
    output: Path = Field(default_factory=lambda: settings.OUTPUT_DIR)

    seed: int = Field(default_factory=lambda: settings.SEED)
    threads: int = Field(default_factory=lambda: settings.THREADS, ge=1)
    k: int = Field(default_factory=lambda: settings.DEFAULT_K, ge=1)
    window: int = Field(default_factory=lambda: settings.WINDOW)
    stride: int = Field(default_factory=lambda: settings.STRIDE)
    dim: int = Field(default_factory=lambda: settings.EMBED_DIM, ge=2)
    k1: float = Field(default_factory=lambda: settings.BM25_K1)
    b: float = Field(default_factory=lambda: settings.BM25_B)

    mode: RetrievalMode = RetrievalMode.BM25
    query_fields: QueryFields = QueryFields.TITLE_DESCRIPTION
    lowercase: bool = True
    unicode_normalization: bool = True
    stem_languages: List[str] = Field(default_factory=lambda: list(settings.STEM_LANGUAGES))
    languages: List[str] = Field(default_factory=lambda: list(settings.LANGUAGES))

    mix_mode: MixMode = MixMode.MTT_M
    batch_size: int = Field(default=32, ge=1)
    replicas: int = Field(default=1, ge=1)
    shuffle: bool = False

    reference_lang: Optional[str] = None
    bonferroni: Optional[int] = Field(default=None, ge=1)
    significance_level: float = Field(default_factory=lambda: settings.SIGNIFICANCE_LEVEL)
    run_tag: Optional[str] = None
    system: Optional[str] = None
    translation_seconds: float = Field(default=0.0, ge=0.0)
    map_values: Dict[str, float] = Field(default_factory=dict)

    @field_validator("qrels", "triples", mode="before")
    @classmethod
    def _parse_lang_paths(cls, v):
        if v is None:
            return []
        return [LangPath.parse(item) for item in v]

    @field_validator("map_values", mode="before")
    @classmethod
    def _parse_map_values(cls, v):
        if isinstance(v, (list, tuple)):
            out = {}
            for item in v:
                name, sep, value = str(item).rpartition("=")
                if not sep or not name:
                    raise ValueError(f"expected name=value, got {item!r}")
                out[name] = float(value)
            return out
        return v

    @classmethod
    def load(cls, config_path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None) -> "PipelineConfig":
        data: Dict[str, Any] = {}
        if config_path is not None:
            try:
                data = json.loads(Path(config_path).read_text(encoding="utf-8"))
            except FileNotFoundError:
                raise ConfigurationError(f"config file {config_path} does not exist")
            except UnicodeDecodeError:
                raise ConfigurationError(f"config file {config_path} is not valid UTF-8")
            except json.JSONDecodeError as e:
                raise ConfigurationError(f"config file {config_path} is not valid JSON: {e}")
            if not isinstance(data, dict):
                raise ConfigurationError(f"config file {config_path} must hold a JSON object")
        for key, value in (overrides or {}).items():
            if value is None or value == []:
                continue
            data[key] = value
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise ConfigurationError(str(e))

    def require(self, *names: str) -> None:
        for name in names:
            value = getattr(self, name)
            if value is None or value == [] or value == {}:
                raise ConfigurationError(f"option --{name.replace('_', '-')} is required for this command")
            items = value if isinstance(value, list) else [value]
            for item in items:
                path = item.path if isinstance(item, LangPath) else item
                if isinstance(path, Path) and not path.exists():
                    raise ConfigurationError(f"{name}: {path} does not exist")

    def analyzer_config(self, stopwords: Optional[frozenset] = None) -> AnalyzerConfig:
        return AnalyzerConfig(
            lowercase=self.lowercase,
            unicode_normalization=self.unicode_normalization,
            stem_languages=frozenset(self.stem_languages),
            stopword_list=stopwords,
        )
