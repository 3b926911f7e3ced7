"""Extraction of recommended titles from completion text and catalog resolution."""

import logging
import re
from collections import defaultdict
from difflib import SequenceMatcher
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .models import CatalogItem, RecommendationList, ResolvedItem, TitleCandidate

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.85
YEAR_WINDOW = 1

_LIST_MARKER = re.compile(r"^(?:\d{1,3}\s*(?:[.)]|-(?=\s))|[-*•·–—])\s*")
_TITLE_YEAR = re.compile(r"(.+?)\s*\((\d{4})\)")
_TRAILING_YEAR = re.compile(r"\s*\(\d{4}\)$")
_TRAILING_PAREN = re.compile(r"\s*\([^()]*\)$")
_TRAILING_ARTICLE = re.compile(r"^(.+), (the|a|an|le|la|les|il|l'|el|das|der|die)$")
_WRAPPERS = "\"“”*_` "


def extract_candidates(text: str) -> List[TitleCandidate]:
    """
    Pull ``Title (Year)`` candidates out of free-text completion output.

    List markers and bullets are removed; a line without a year becomes a
    yearless candidate; blank and one-character lines are skipped.
    """
    candidates: List[TitleCandidate] = []
    for line in text.splitlines():
        cleaned = _LIST_MARKER.sub("", line.strip(), count=1).strip(_WRAPPERS)
        if len(cleaned) < 2:
            continue
        match = _TITLE_YEAR.match(cleaned)
        if match:
            title, year = match.group(1).strip(_WRAPPERS), int(match.group(2))
        else:
            title, year = cleaned, None
        if not title:
            continue
        candidates.append(
            TitleCandidate(rank=len(candidates) + 1, raw_title=title, year=year)
        )
    return candidates


def normalize_title(title: str) -> str:
    """
    Canonical lowercase form used for matching.

    "Matrix, The (1999)" and "The Matrix" both become "the matrix"; a
    trailing alternate-title parenthetical is dropped with the year.
    """
    s = " ".join(title.lower().split())
    s = _TRAILING_YEAR.sub("", s)
    s = _TRAILING_PAREN.sub("", s).strip()
    match = _TRAILING_ARTICLE.match(s)
    if match:
        rest, article = match.groups()
        s = f"{article}{rest}" if article.endswith("'") else f"{article} {rest}"
    return s


def similarity_ratio(a: str, b: str) -> float:
    """Ratcliff/Obershelp similarity 2*M / (|a| + |b|)."""
    return SequenceMatcher(None, a, b, autojunk=False).ratio()


class CatalogIndex:
    """Normalized-title lookup structure, built once per catalog."""

    def __init__(self, catalog: Sequence[CatalogItem]):
        self.items: List[CatalogItem] = list(catalog)
        self.normalized: List[Tuple[str, CatalogItem]] = [
            (normalize_title(item.title), item) for item in self.items
        ]
        self.by_title: Dict[str, List[CatalogItem]] = defaultdict(list)
        for norm, item in self.normalized:
            self.by_title[norm].append(item)

    def __len__(self) -> int:
        return len(self.items)


def _year_rank(item: CatalogItem, year: Optional[int]) -> Tuple[int, int]:
    if year is None:
        return (0, 0)
    return (0 if item.year == year else 1, abs(item.year - year))


def _match(
    candidate: TitleCandidate, index: CatalogIndex, threshold: float
) -> Optional[Tuple[CatalogItem, float]]:
    norm = normalize_title(candidate.raw_title)
    if not norm:
        return None

    exact = index.by_title.get(norm)
    if exact:
        best = min(exact, key=lambda i: (_year_rank(i, candidate.year), i.item_id))
        return best, 1.0

    matcher = SequenceMatcher(None, autojunk=False)
    matcher.set_seq2(norm)
    scored: List[Tuple[float, CatalogItem]] = []
    for title, item in index.normalized:
        matcher.set_seq1(title)
        if matcher.real_quick_ratio() < threshold or matcher.quick_ratio() < threshold:
            continue
        score = matcher.ratio()
        if score >= threshold:
            scored.append((score, item))
    if not scored:
        return None

    if candidate.year is not None:
        windowed = [s for s in scored if abs(s[1].year - candidate.year) <= YEAR_WINDOW]
        if windowed:
            scored = windowed

    def preference(entry: Tuple[float, CatalogItem]):
        score, item = entry
        exact_year = candidate.year is not None and item.year == candidate.year
        return (-score, not exact_year, item.item_id)

    score, item = min(scored, key=preference)
    return item, score


def resolve(
    candidates: Sequence[TitleCandidate],
    catalog: Union[CatalogIndex, Sequence[CatalogItem]],
    threshold: float = DEFAULT_THRESHOLD,
    instruction_fingerprint: str = "",
) -> RecommendationList:
    """
    Map title candidates to catalog item ids.

    Args:
        candidates: Extracted candidates in response order
        catalog: A prebuilt CatalogIndex or a plain list of catalog items
        threshold: Minimum similarity for a fuzzy match
        instruction_fingerprint: Fingerprint of the prompt that produced them

    Returns:
        RecommendationList; repeated items after their first occurrence are dropped
    """
    index = catalog if isinstance(catalog, CatalogIndex) else CatalogIndex(catalog)
    result = RecommendationList(instruction_fingerprint=instruction_fingerprint)
    seen = set()
    for candidate in candidates:
        found = _match(candidate, index, threshold)
        if found is None:
            result.unresolved.append(candidate)
            continue
        item, score = found
        if item.item_id in seen:
            continue
        seen.add(item.item_id)
        result.resolved.append(ResolvedItem(item.item_id, candidate.rank, score))
    return result


def resolve_text(
    text: str,
    index: CatalogIndex,
    threshold: float = DEFAULT_THRESHOLD,
    instruction_fingerprint: str = "",
) -> RecommendationList:
    """extract_candidates followed by resolve."""
    return resolve(extract_candidates(text), index, threshold, instruction_fingerprint)
