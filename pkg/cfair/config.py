"""Experiment configuration models."""

import hashlib
import json
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from .errors import ConfigurationError
from .models import CatalogItem, Strategy

API_KEY_ENV = "CFAIR_API_KEY"

# Values left unmapped keep their neutral lists, so every family has a
# reference group to diverge from even at full strength.
DEFAULT_STEREOTYPES: Dict[str, List[str]] = {
    "Female": ["Romance"],
    "Teen": ["Animation", "Children's"],
}


class Backend(str, Enum):
    LIVE = "live"
    MOCK = "mock"


class EmptyJaccard(str, Enum):
    """What an empty-vs-empty comparison contributes to a mean."""

    ZERO = "zero"
    SKIP = "skip"


class Template(str, Enum):
    DETAILED = "detailed"
    BASIC = "basic"


class ModelParams(BaseModel):
    """Chat-completion model and transport parameters."""

    model_name: str = "gpt-3.5-turbo"
    temperature: float = Field(default=0.0, ge=0.0)
    max_tokens: int = Field(default=512, ge=256)
    endpoint_url: str = "https://api.openai.com/v1/chat/completions"
    requests_per_minute: int = Field(default=60, ge=1)
    max_in_flight: int = Field(default=4, ge=1)
    timeout_s: float = Field(default=60.0, gt=0)
    max_attempts: int = Field(default=5, ge=1)
    retry_base_s: float = Field(default=1.0, ge=0.0)


class BiasConfig(BaseModel):
    """Injected stereotype bias of the mock recommender."""

    bias_strength: float = Field(default=0.0, ge=0.0, le=1.0)
    stereotype_map: Dict[str, List[str]] = Field(
        default_factory=lambda: {k: list(v) for k, v in DEFAULT_STEREOTYPES.items()}
    )

    def genres_for(self, phrase: str) -> List[str]:
        """Stereotype genres for an attribute phrase such as ``"Teen Female"``.

        A phrase without its own entry uses the union of its words' entries.
        """
        if phrase in self.stereotype_map:
            return list(self.stereotype_map[phrase])
        genres: List[str] = []
        for word in phrase.split():
            for genre in self.stereotype_map.get(word, []):
                if genre not in genres:
                    genres.append(genre)
        return genres

    def validate_against(self, catalog: Iterable[CatalogItem]) -> None:
        vocabulary = {g for item in catalog for g in item.genres}
        unknown = sorted(
            {g for genres in self.stereotype_map.values() for g in genres} - vocabulary
        )
        if unknown:
            raise ConfigurationError(
                f"stereotype genres not in catalog vocabulary: {', '.join(unknown)}"
            )


class ExperimentConfig(BaseModel):
    """Everything needed to reproduce one audit run."""

    data_dir: Path = Path("data/ml-1m")
    out_dir: Path = Path("runs")
    run_id: Optional[str] = None
    cache_dir: Optional[Path] = None
    cohort_size: int = Field(default=150, ge=1)
    seed: int = 42
    strategies: List[Strategy] = Field(
        default_factory=lambda: [Strategy.RANDOM, Strategy.TOP_RATED, Strategy.RECENT]
    )
    scopes: List[int] = Field(default_factory=lambda: [10])
    k: int = Field(default=10, ge=1)
    backend: Backend = Backend.LIVE
    bias: BiasConfig = Field(default_factory=BiasConfig)
    model: ModelParams = Field(default_factory=ModelParams)
    resolver_threshold: float = Field(default=0.85, ge=0.0, le=1.0)
    relevance_threshold: int = Field(default=4, ge=1, le=5)
    min_test_relevant: int = Field(default=3, ge=0)
    split_fractions: Tuple[float, float, float] = (0.8, 0.1, 0.1)
    max_workers: int = Field(default=4, ge=1)
    empty_jaccard: EmptyJaccard = EmptyJaccard.ZERO
    format_clause: bool = True
    restate_attribute: bool = False
    template: Template = Template.DETAILED

    @field_validator("strategies")
    @classmethod
    def _strategies_present(cls, value: List[Strategy]) -> List[Strategy]:
        if not value:
            raise ValueError("at least one strategy is required")
        return list(dict.fromkeys(value))

    @field_validator("scopes")
    @classmethod
    def _scopes_present(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("at least one scope is required")
        if any(n < 1 for n in value):
            raise ValueError("scopes must be positive")
        return list(dict.fromkeys(value))

    @model_validator(mode="after")
    def _fractions_sum_to_one(self) -> "ExperimentConfig":
        if any(f < 0 for f in self.split_fractions) or self.split_fractions[0] <= 0:
            raise ValueError("split fractions must be non-negative, train positive")
        if abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")
        return self

    @property
    def resolved_cache_dir(self) -> Path:
        return self.cache_dir if self.cache_dir is not None else self.out_dir / "cache"

    def snapshot(self) -> Dict[str, Any]:
        """JSON-ready view of the configuration."""
        return json.loads(self.model_dump_json())

    def content_id(self) -> str:
        """Short hash over the reproducibility-relevant configuration."""
        data = self.snapshot()
        for volatile in ("run_id", "out_dir", "cache_dir", "max_workers"):
            data.pop(volatile, None)
        payload = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]

    @property
    def effective_run_id(self) -> str:
        return self.run_id or f"run-{self.content_id()}"


def load_config(
    path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None
) -> ExperimentConfig:
    """
    Build an ExperimentConfig from defaults, a JSON file and flag overrides.

    Args:
        path: Optional JSON file with configuration fields
        overrides: Field values taking precedence over the file; ``None``
            values are ignored, nested dicts are merged one level deep

    Returns:
        Validated configuration

    Raises:
        ConfigurationError: If the file is unreadable or validation fails
    """
    data: Dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError(f"cannot read config file {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigurationError(f"config file {path} must hold a JSON object")

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if isinstance(value, dict) and isinstance(data.get(key), dict):
            data[key] = {**data[key], **value}
        else:
            data[key] = value

    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"invalid configuration: {e}") from e
