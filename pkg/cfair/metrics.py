"""Similarity metrics between neutral and sensitive lists, and fairness aggregates."""

import statistics
from collections import defaultdict
from itertools import permutations
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .models import (
    AgeBucket,
    Condition,
    FairnessCell,
    Gender,
    PairResult,
    PragVariant,
    RankedList,
    SimilarityMode,
    Strategy,
    UserRecord,
)
from .prompts import enumerate_conditions

METRICS = ("jaccard", "prag_literal", "prag_normalized")
FAMILIES = ("Sex", "Age", "Intersectional")


def jaccard(ra: RankedList, rn: RankedList) -> float:
    """|Ra ∩ Rn| / |Ra ∪ Rn|; two empty lists score 0."""
    a, n = set(ra), set(rn)
    union = a | n
    if not union:
        return 0.0
    return len(a & n) / len(union)


def _concordant_pairs(ra: RankedList, rn: RankedList) -> int:
    count = 0
    for v1, v2 in permutations(ra, 2):
        if v1 in rn and rn.rank(v1) < rn.rank(v2) and ra.rank(v1) < ra.rank(v2):
            count += 1
    return count


def prag_star(
    ra: RankedList, rn: RankedList, k: int, variant: PragVariant = PragVariant.LITERAL
) -> float:
    """
    Pairwise ranking concordance of a sensitive list against the neutral one.

    Counts ordered pairs (v1, v2) of distinct items of ``ra`` with v1 in
    ``rn`` that both lists rank v1 ahead of v2; items missing from a list
    rank at infinity. Literal divides by K(K+1); Normalized divides by
    K(K-1)/2 so identical lists score 1.

    Raises:
        ValueError: If k < 1 or ``ra`` is longer than k
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if len(ra) > k:
        raise ValueError(f"list of length {len(ra)} exceeds request size k={k}")
    numerator = _concordant_pairs(ra, rn)
    if variant is PragVariant.LITERAL:
        return numerator / (k * (k + 1))
    pairs = k * (k - 1) / 2
    return numerator / pairs if pairs else 0.0


def filter_by_preference(ranked: RankedList, relevant: Iterable[int]) -> RankedList:
    """Keep only relevant items, preserving order and original ranks."""
    keep = set(relevant)
    items = [v for v in ranked if v in keep]
    return RankedList(items, ranks=[int(ranked.rank(v)) for v in items])


def compare_lists(
    neutral: RankedList,
    sensitive: RankedList,
    k: int,
    **identity,
) -> PairResult:
    """PairResult for one neutral/sensitive comparison; ``identity`` fills the keys."""
    return PairResult(
        jaccard=jaccard(sensitive, neutral),
        prag_literal=prag_star(sensitive, neutral, k, PragVariant.LITERAL),
        prag_normalized=prag_star(sensitive, neutral, k, PragVariant.NORMALIZED),
        defined=bool(len(neutral) or len(sensitive)),
        neutral_len=len(neutral),
        sensitive_len=len(sensitive),
        **identity,
    )


def pair_results(
    user_id: int,
    strategy: Strategy,
    n_profile: int,
    k: int,
    lists: Mapping[Condition, RankedList],
    relevant: Iterable[int],
) -> List[PairResult]:
    """
    Compare every sensitive list with the neutral one, in both modes.

    Args:
        lists: Resolved ranked list per condition, neutral included
        relevant: The user's held-out favoured items

    Returns:
        Item-similarity results followed by preference-aligned results
    """
    neutral = lists[Condition.neutral()]
    relevant = set(relevant)
    results: Dict[SimilarityMode, List[PairResult]] = {
        SimilarityMode.ITEM_SIMILARITY: [],
        SimilarityMode.PREFERENCE_ALIGNED: [],
    }
    filtered_neutral = filter_by_preference(neutral, relevant)
    for condition, ranked in lists.items():
        if condition.is_neutral:
            continue
        identity = dict(
            user_id=user_id, condition=condition, strategy=strategy, n_profile=n_profile
        )
        results[SimilarityMode.ITEM_SIMILARITY].append(
            compare_lists(
                neutral, ranked, k, mode=SimilarityMode.ITEM_SIMILARITY, **identity
            )
        )
        results[SimilarityMode.PREFERENCE_ALIGNED].append(
            compare_lists(
                filtered_neutral,
                filter_by_preference(ranked, relevant),
                k,
                mode=SimilarityMode.PREFERENCE_ALIGNED,
                **identity,
            )
        )
    return (
        results[SimilarityMode.ITEM_SIMILARITY]
        + results[SimilarityMode.PREFERENCE_ALIGNED]
    )


def aggregate(
    per_user: Sequence[PairResult],
    condition: Condition,
    metric: str = "jaccard",
    skip_undefined: bool = False,
) -> float:
    """
    Mean of one metric over users for a condition.

    Values are summed in user-id order so the result does not depend on the
    order results arrived in.

    Raises:
        ValueError: If no result matches
    """
    if metric not in METRICS:
        raise ValueError(f"unknown metric: {metric}")
    matching = sorted(
        (
            r
            for r in per_user
            if r.condition == condition and (r.defined or not skip_undefined)
        ),
        key=lambda r: r.user_id,
    )
    if not matching:
        raise ValueError(f"no results for condition {condition.key}")
    return sum(getattr(r, metric) for r in matching) / len(matching)


def snsr(values: Sequence[float]) -> float:
    """Sensitive-to-neutral similarity range: max - min."""
    if not values:
        raise ValueError("snsr needs at least one value")
    return max(values) - min(values)


def snsv(values: Sequence[float]) -> float:
    """Population standard deviation of the per-value mean similarities."""
    if not values:
        raise ValueError("snsv needs at least one value")
    return statistics.pstdev(values)


def family_conditions(family: str) -> List[Condition]:
    return [c for c in enumerate_conditions() if c.family == family]


def fairness_cells(
    pairs: Sequence[PairResult], skip_undefined: bool = False
) -> List[FairnessCell]:
    """
    Fold PairResults into one FairnessCell per
    (strategy, n_profile, mode, metric, family), in a fixed order.
    """
    grouped: Dict[Tuple[Strategy, int, SimilarityMode], List[PairResult]] = (
        defaultdict(list)
    )
    for pair in pairs:
        grouped[(pair.strategy, pair.n_profile, pair.mode)].append(pair)

    strategy_order = {s: i for i, s in enumerate(Strategy)}
    mode_order = {m: i for i, m in enumerate(SimilarityMode)}
    cells: List[FairnessCell] = []
    for strategy, n_profile, mode in sorted(
        grouped, key=lambda g: (strategy_order[g[0]], g[1], mode_order[g[2]])
    ):
        group = grouped[(strategy, n_profile, mode)]
        for metric in METRICS:
            for family in FAMILIES:
                values: Dict[str, float] = {}
                users = set()
                for condition in family_conditions(family):
                    try:
                        values[condition.key] = aggregate(
                            group, condition, metric, skip_undefined
                        )
                    except ValueError:
                        continue
                    users.update(r.user_id for r in group if r.condition == condition)
                if not values:
                    continue
                spread = list(values.values())
                cells.append(
                    FairnessCell(
                        family=family,
                        strategy=strategy,
                        n_profile=n_profile,
                        metric=metric,
                        mode=mode,
                        values=values,
                        snsr=snsr(spread),
                        snsv=snsv(spread),
                        n_users=len(users),
                    )
                )
    return cells


def _own_condition(family: str, user: UserRecord) -> Condition:
    if family == "Sex":
        return Condition.of_gender(user.gender)
    if family == "Age":
        return Condition.of_age(user.age_bucket)
    return Condition.intersectional(user.gender, user.age_bucket)


def _group_key(family: str, user: UserRecord) -> str:
    return _own_condition(family, user).key


def self_described_cells(
    pairs: Sequence[PairResult],
    users: Mapping[int, UserRecord],
    skip_undefined: bool = False,
) -> List[FairnessCell]:
    """
    Cross-effect grid: prompt each user with their own attributes, then group
    the results by the users' actual groups.

    For every prompting family the similarity used for a user is the one of
    the condition matching that user's recorded attributes; means are then
    taken per user group of each grouping family.
    """
    by_key: Dict[Tuple, PairResult] = {
        (p.strategy, p.n_profile, p.mode, p.user_id, p.condition): p for p in pairs
    }
    settings = sorted(
        {(p.strategy, p.n_profile, p.mode) for p in pairs},
        key=lambda g: (
            list(Strategy).index(g[0]), g[1], list(SimilarityMode).index(g[2])
        ),
    )
    cohort = sorted({p.user_id for p in pairs if p.user_id in users})
    group_order = {
        "Sex": [c.key for c in family_conditions("Sex")],
        "Age": [c.key for c in family_conditions("Age")],
        "Intersectional": [c.key for c in family_conditions("Intersectional")],
    }

    cells: List[FairnessCell] = []
    for strategy, n_profile, mode in settings:
        for metric in METRICS:
            for prompting in FAMILIES:
                for grouping in FAMILIES:
                    sums: Dict[str, List[float]] = defaultdict(list)
                    for user_id in cohort:
                        user = users[user_id]
                        pair: Optional[PairResult] = by_key.get(
                            (
                                strategy,
                                n_profile,
                                mode,
                                user_id,
                                _own_condition(prompting, user),
                            )
                        )
                        if pair is None or (skip_undefined and not pair.defined):
                            continue
                        sums[_group_key(grouping, user)].append(getattr(pair, metric))
                    values = {
                        g: sum(sums[g]) / len(sums[g])
                        for g in group_order[grouping]
                        if sums[g]
                    }
                    if not values:
                        continue
                    spread = list(values.values())
                    cells.append(
                        FairnessCell(
                            family=grouping,
                            prompting=prompting,
                            strategy=strategy,
                            n_profile=n_profile,
                            metric=metric,
                            mode=mode,
                            values=values,
                            snsr=snsr(spread),
                            snsv=snsv(spread),
                            n_users=sum(len(v) for v in sums.values()),
                        )
                    )
    return cells


# Column order of the fairness tables, per family.
TABLE_COLUMNS: Dict[str, List[str]] = {
    "Sex": [Condition.of_gender(g).key for g in (Gender.MALE, Gender.FEMALE)],
    "Age": [Condition.of_age(a).key for a in AgeBucket],
    "Intersectional": [
        Condition.intersectional(g, a).key for g in Gender for a in AgeBucket
    ],
}
