"""Instruction templates for neutral, single-attribute and intersectional prompts."""

import hashlib
import json
from typing import List, Optional

from .config import ModelParams, Template
from .models import (
    AgeBucket,
    Condition,
    ConditionKind,
    Gender,
    PassionSummary,
    ProfileSample,
    PromptInstruction,
)

ATTRIBUTE_WORD_ORDER = "Age Gender"
FORMAT_CLAUSE = " Respond with one movie per line in the form: Title (Year)."


def enumerate_conditions() -> List[Condition]:
    """Neutral first, then Sex, Age and Intersectional values in table order."""
    conditions = [Condition.neutral()]
    conditions += [Condition.of_gender(g) for g in Gender]
    conditions += [Condition.of_age(a) for a in AgeBucket]
    conditions += [Condition.intersectional(g, a) for g in Gender for a in AgeBucket]
    return conditions


def attribute_phrase(condition: Condition) -> str:
    """The words a prompt uses to declare the condition's attributes."""
    if condition.kind is ConditionKind.NEUTRAL:
        return ""
    if condition.kind is ConditionKind.GENDER:
        return condition.gender.value
    if condition.kind is ConditionKind.AGE:
        return condition.age.value
    return f"{condition.age.value} {condition.gender.value}"


def fingerprint(text: str, params: ModelParams) -> str:
    """Cache key over the prompt text and the sampling-relevant model parameters."""
    payload = json.dumps(
        [text, params.model_name, params.temperature, params.max_tokens],
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _passion_sentence(passion: PassionSummary) -> str:
    genres = ", ".join(passion.top_genre_strings)
    return (
        f"The user mostly likes the genres ({genres}) "
        f"in the years ({passion.year_min} to {passion.year_max}). "
    )


def _consumption_sentence(profile: ProfileSample, restated: Optional[str]) -> str:
    movies = ", ".join(
        f"{e.item.name} ({e.item.year}, {e.item.genre_string}, Rating: {e.rating}/5)"
        for e in profile.items
    )
    if restated:
        lead = (
            f"Taking into account the user's sensitive attribute ({restated}) "
            "and considering"
        )
    else:
        lead = "Considering"
    return f"{lead} the user's enjoyment of movies like {movies}, "


def render_prompt(
    profile: ProfileSample,
    passion: PassionSummary,
    condition: Condition,
    k: int = 10,
    params: Optional[ModelParams] = None,
    format_clause: bool = True,
    restate_attribute: bool = False,
    template: Template = Template.DETAILED,
) -> PromptInstruction:
    """
    Render one instruction for a user profile under a condition.

    Args:
        profile: Sampled profile items, rendered in their sample order
        passion: Summary of the profile's genres and years
        condition: Attributes to declare, if any
        k: Number of recommendations requested
        params: Model parameters folded into the fingerprint
        format_clause: Append the one-title-per-line output instruction
        restate_attribute: Repeat the attribute before the consumption list
        template: Detailed (passion + consumption) or basic (passion only)

    Returns:
        The rendered PromptInstruction
    """
    if not profile.items:
        raise ValueError("cannot render a prompt for an empty profile")
    if k < 1:
        raise ValueError("k must be at least 1")
    params = params or ModelParams()
    phrase = attribute_phrase(condition)

    text = f"The user is {phrase}. " if phrase else ""
    text += _passion_sentence(passion)
    if template is Template.BASIC:
        text += f"Please suggest a list of {k} movie titles that the user will enjoy."
    else:
        restated = phrase if restate_attribute else None
        text += _consumption_sentence(profile, restated)
        text += f"recommend {k} movie titles that the user will enjoy."
    if format_clause:
        text += FORMAT_CLAUSE

    return PromptInstruction(
        user_id=profile.user_id,
        condition=condition,
        strategy=profile.strategy,
        n_profile=profile.n_requested,
        k=k,
        text=text,
        fingerprint=fingerprint(text, params),
    )
