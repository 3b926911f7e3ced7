"""Deterministic synthetic recommender with injectable stereotype bias.

The base list depends only on the user, strategy, seed and the profile
section of the prompt, never on the declared attributes, so any divergence
between conditions comes from the injected bias.
"""

import re
import zlib
from typing import List, Optional, Sequence

import numpy as np

from .config import BiasConfig, ModelParams
from .models import (
    CatalogItem,
    PromptInstruction,
    RawResponse,
    ResponseSource,
    Strategy,
)
from .prompts import attribute_phrase

_PASSION = re.compile(
    r"The user mostly likes the genres \((?P<genres>.*?)\) "
    r"in the years \((?P<start>\d{4}) to (?P<end>\d{4})\)"
)
_STRATEGY_CODES = {s: i for i, s in enumerate(Strategy)}


def _stream(*parts: object) -> np.random.Generator:
    """Generator keyed by a tuple of values, stable across processes."""
    key = [zlib.crc32(str(p).encode("utf-8")) for p in parts]
    return np.random.default_rng(key)


def _base_pool(text: str, catalog: Sequence[CatalogItem]) -> List[CatalogItem]:
    match = _PASSION.search(text)
    if match is None:
        return list(catalog)
    genres = {g for s in match.group("genres").split(", ") for g in s.split("|") if g}
    start, end = int(match.group("start")), int(match.group("end"))
    in_taste = [i for i in catalog if genres.intersection(i.genres)]
    in_years = [i for i in in_taste if start <= i.year <= end]
    return in_years or in_taste or list(catalog)


def _draw(
    pool: Sequence[CatalogItem], k: int, rng: np.random.Generator
) -> List[CatalogItem]:
    order = rng.permutation(len(pool))
    return [pool[int(i)] for i in order[:k]]


def mock_complete(
    instruction: PromptInstruction,
    catalog: Sequence[CatalogItem],
    bias: BiasConfig,
    seed: int,
) -> RawResponse:
    """
    Answer an instruction with k catalog titles, one "Title (Year)" per line.

    Each base title is swapped, with probability ``bias.bias_strength``, for a
    title from the stereotype genres of the declared attributes. Attributes
    without stereotype genres leave the base list untouched. The swap
    decisions reuse the same uniform draws at every strength, so a higher
    strength replaces a superset of the positions a lower one does.
    """
    k = instruction.k
    pool = _base_pool(instruction.text, catalog)
    base_rng = _stream(seed, instruction.user_id, _STRATEGY_CODES[instruction.strategy])
    base = _draw(pool, k, base_rng)
    if len(base) < k:
        taken = {i.item_id for i in base}
        rest = [i for i in catalog if i.item_id not in taken]
        base += _draw(rest, k - len(base), base_rng)

    phrase = attribute_phrase(instruction.condition)
    output = list(base)
    stereotype = set(bias.genres_for(phrase)) if phrase else set()
    if stereotype and bias.bias_strength > 0:
        base_ids = {i.item_id for i in base}
        candidates = [
            i
            for i in catalog
            if stereotype.intersection(i.genres) and i.item_id not in base_ids
        ]
        bias_rng = _stream(
            seed,
            instruction.user_id,
            _STRATEGY_CODES[instruction.strategy],
            instruction.condition.key,
        )
        draws = bias_rng.random(len(base))
        replacements = _draw(candidates, len(base), bias_rng)
        for position, u in enumerate(draws):
            if u < bias.bias_strength and position < len(replacements):
                output[position] = replacements[position]

    text = "\n".join(f"{item.name} ({item.year})" for item in output)
    return RawResponse(
        instruction_fingerprint=instruction.fingerprint,
        text=text,
        source=ResponseSource.MOCK,
        latency_ms=0.0,
        retrieved_at=0.0,
    )


class MockRecommender:
    """Backend with the Gateway's ``complete`` interface, answered by mock_complete."""

    def __init__(self, catalog: Sequence[CatalogItem], bias: BiasConfig, seed: int):
        self.catalog = list(catalog)
        self.bias = bias
        self.seed = seed
        self.cache_hits = 0

    def complete(
        self, instruction: PromptInstruction, params: Optional[ModelParams] = None
    ) -> RawResponse:
        return mock_complete(instruction, self.catalog, self.bias, self.seed)
