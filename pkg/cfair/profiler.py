"""User profile sampling and passion summaries."""

from collections import Counter
from typing import Dict, List, Sequence

import numpy as np

from .models import (
    CatalogItem,
    Interaction,
    PassionSummary,
    ProfileEntry,
    ProfileSample,
    Strategy,
)

DEFAULT_PROFILE_SIZE = 10
SCOPE_SWEEP = (5, 10, 15)
PASSION_GENRES = 3


def sample_profile(
    train: Sequence[Interaction],
    catalog: Dict[int, CatalogItem],
    strategy: Strategy,
    n: int = DEFAULT_PROFILE_SIZE,
    seed: int = 0,
) -> ProfileSample:
    """
    Pick the ``n`` training interactions that represent a user in prompts.

    Args:
        train: The user's training interactions
        catalog: Catalog items by id
        strategy: Random, TopRated or Recent selection
        n: Number of items requested; shorter histories are returned whole
        seed: Seed of the Random strategy, ignored otherwise

    Returns:
        ProfileSample with items in the strategy's presentation order
    """
    if n < 1:
        raise ValueError("profile size must be at least 1")
    if not train:
        raise ValueError("cannot sample a profile from an empty history")

    # one entry per item, keeping the latest interaction
    latest: Dict[int, Interaction] = {}
    for interaction in sorted(train, key=lambda i: (i.timestamp, i.item_id)):
        latest[interaction.item_id] = interaction
    history = [i for i in latest.values() if i.item_id in catalog]
    user_id = train[0].user_id
    take = min(n, len(history))

    if strategy is Strategy.RANDOM:
        ordered = sorted(history, key=lambda i: (i.timestamp, i.item_id))
        picks = np.random.default_rng([seed, user_id]).choice(
            len(ordered), size=take, replace=False
        )
        chosen = [ordered[int(p)] for p in sorted(picks)]
    elif strategy is Strategy.TOP_RATED:
        chosen = sorted(
            history, key=lambda i: (-i.rating, -i.timestamp, i.item_id)
        )[:take]
    elif strategy is Strategy.RECENT:
        chosen = sorted(history, key=lambda i: (-i.timestamp, i.item_id))[:take]
    else:
        raise ValueError(f"unknown strategy: {strategy}")

    return ProfileSample(
        user_id=user_id,
        strategy=strategy,
        n_requested=n,
        items=[ProfileEntry(catalog[i.item_id], i.rating, i.timestamp) for i in chosen],
        seed=seed,
    )


def build_passion_summary(profile: ProfileSample) -> PassionSummary:
    """Most frequent whole genre strings and the release-year span of a profile."""
    if not profile.items:
        raise ValueError("cannot summarise an empty profile")
    counts = Counter(entry.item.genre_string for entry in profile.items)
    top: List[str] = sorted(counts, key=lambda g: (-counts[g], g))[:PASSION_GENRES]
    years = [entry.item.year for entry in profile.items]
    return PassionSummary(
        top_genre_strings=top, year_min=min(years), year_max=max(years)
    )
