"""Utility functions shared by the harness and the CLI."""

import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

from .client import ChatCompletionsClient, Gateway, RateLimiter, ResponseCache
from .config import Backend, ExperimentConfig
from .errors import ReportError
from .models import CatalogItem
from .synthetic import MockRecommender

PathLike = Union[str, Path]


def get_gateway(
    config: ExperimentConfig,
    catalog: Optional[Sequence[CatalogItem]] = None,
    api_key: Optional[str] = None,
) -> Union[Gateway, MockRecommender]:
    """
    Get a completion backend, either live or mock.

    Args:
        config: Experiment configuration selecting the backend
        catalog: Catalog the mock recommender draws from (mock backend only)
        api_key: API key. If None, read from the CFAIR_API_KEY environment
                variable (live backend only)

    Returns:
        A cached, rate-limited Gateway or a MockRecommender.

    Raises:
        ConfigurationError: If the live backend has no API key.
        ValueError: If the mock backend is requested without a catalog.
    """
    if config.backend is Backend.MOCK:
        if catalog is None:
            raise ValueError("the mock backend needs the catalog")
        return MockRecommender(catalog, config.bias, config.seed)

    params = config.model
    if api_key is None:
        return Gateway.from_params(params, config.resolved_cache_dir)
    client = ChatCompletionsClient(api_key=api_key, endpoint=params.endpoint_url)
    limiter = RateLimiter(params.requests_per_minute, params.max_in_flight)
    return Gateway(client, ResponseCache(config.resolved_cache_dir), limiter)


def write_json(data: Any, filepath: PathLike) -> Path:
    """Write one JSON document with sorted keys and a trailing newline."""
    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    with open(filepath, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")
    return filepath


def write_jsonl(rows: Iterable[Dict[str, Any]], filepath: PathLike) -> int:
    """
    Save rows as JSON lines.

    Args:
        rows: JSON-serialisable dictionaries, written in the given order
        filepath: Path to save the file

    Returns:
        Number of rows written
    """
    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(filepath, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True, ensure_ascii=False))
            f.write("\n")
            count += 1
    return count


def load_jsonl(filepath: PathLike) -> List[Dict[str, Any]]:
    """
    Load rows from a JSON-lines file.

    Raises:
        ReportError: If the file is missing or a line is not valid JSON
    """
    try:
        with open(filepath, "r", encoding="utf-8") as f:
            return [json.loads(line) for line in f if line.strip()]
    except FileNotFoundError as e:
        raise ReportError(f"missing artifact: {filepath}") from e
    except json.JSONDecodeError as e:
        raise ReportError(f"corrupt artifact {filepath}: {e}") from e


def load_json(filepath: PathLike) -> Any:
    try:
        with open(filepath, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError as e:
        raise ReportError(f"missing artifact: {filepath}") from e
    except json.JSONDecodeError as e:
        raise ReportError(f"corrupt artifact {filepath}: {e}") from e
