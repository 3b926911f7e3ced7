"""Data models for the cfair audit harness."""

import math
import re
from dataclasses import asdict, dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

_YEAR_SUFFIX = re.compile(r"\s*\((\d{4})\)\s*$")


class Gender(str, Enum):
    MALE = "Male"
    FEMALE = "Female"


class AgeBucket(str, Enum):
    TEEN = "Teen"
    YOUNG = "Young"
    ADULT = "Adult"


class Strategy(str, Enum):
    """Profile sampling strategy."""

    RANDOM = "random"
    TOP_RATED = "top_rated"
    RECENT = "recent"


class ConditionKind(str, Enum):
    NEUTRAL = "neutral"
    GENDER = "gender"
    AGE = "age"
    INTERSECTIONAL = "intersectional"


class ResponseSource(str, Enum):
    LIVE = "live"
    CACHE = "cache"
    MOCK = "mock"


class SimilarityMode(str, Enum):
    """Item similarity compares raw lists, preference-aligned filters them first."""

    ITEM_SIMILARITY = "item_similarity"
    PREFERENCE_ALIGNED = "preference_aligned"


class PragVariant(str, Enum):
    LITERAL = "literal"
    NORMALIZED = "normalized"


@dataclass(frozen=True)
class CatalogItem:
    """A single movie from the catalog."""

    item_id: int
    title: str  # as stored in the source, year suffix included
    year: int
    genres: Tuple[str, ...]
    genre_string: str

    @property
    def name(self) -> str:
        """Title without its trailing "(YYYY)"."""
        return _YEAR_SUFFIX.sub("", self.title)


@dataclass(frozen=True)
class Interaction:
    user_id: int
    item_id: int
    rating: int
    timestamp: int


@dataclass(frozen=True)
class UserRecord:
    user_id: int
    gender: Gender
    age_code: int
    age_bucket: AgeBucket
    occupation_code: int
    zip_code: str = ""


@dataclass
class SplitDataset:
    """Per-user chronological train/valid/test partition."""

    train: Dict[int, List[Interaction]]
    valid: Dict[int, List[Interaction]]
    test: Dict[int, List[Interaction]]
    split_fractions: Tuple[Fraction, Fraction, Fraction]

    def part(self, name: str) -> List[Interaction]:
        """All interactions of one part, users in id order."""
        by_user = getattr(self, name)
        return [i for uid in sorted(by_user) for i in by_user[uid]]


@dataclass
class DatasetStats:
    n_users: int
    n_items: int
    n_ratings: int
    sparsity_pct: float
    ratings_per_user: float
    ratings_per_item: float
    gini_item: float
    gini_user: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class ProfileEntry:
    item: CatalogItem
    rating: int
    timestamp: int


@dataclass
class ProfileSample:
    """The N items standing in for a user's history inside a prompt."""

    user_id: int
    strategy: Strategy
    n_requested: int
    items: List[ProfileEntry]
    seed: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "user_id": self.user_id,
            "strategy": self.strategy.value,
            "n_requested": self.n_requested,
            "seed": self.seed,
            "items": [
                {
                    "item_id": e.item.item_id,
                    "rating": e.rating,
                    "timestamp": e.timestamp,
                }
                for e in self.items
            ],
        }


@dataclass
class PassionSummary:
    top_genre_strings: List[str]
    year_min: int
    year_max: int


@dataclass(frozen=True)
class Condition:
    """Which sensitive attributes, if any, a prompt declares."""

    kind: ConditionKind
    gender: Optional[Gender] = None
    age: Optional[AgeBucket] = None

    @classmethod
    def neutral(cls) -> "Condition":
        return cls(ConditionKind.NEUTRAL)

    @classmethod
    def of_gender(cls, gender: Gender) -> "Condition":
        return cls(ConditionKind.GENDER, gender=gender)

    @classmethod
    def of_age(cls, age: AgeBucket) -> "Condition":
        return cls(ConditionKind.AGE, age=age)

    @classmethod
    def intersectional(cls, gender: Gender, age: AgeBucket) -> "Condition":
        return cls(ConditionKind.INTERSECTIONAL, gender=gender, age=age)

    def __post_init__(self):
        needs_gender = self.kind in (ConditionKind.GENDER, ConditionKind.INTERSECTIONAL)
        needs_age = self.kind in (ConditionKind.AGE, ConditionKind.INTERSECTIONAL)
        if needs_gender != (self.gender is not None) or needs_age != (
            self.age is not None
        ):
            raise ValueError(f"inconsistent condition: {self.kind.value}")

    @property
    def is_neutral(self) -> bool:
        return self.kind is ConditionKind.NEUTRAL

    @property
    def family(self) -> Optional[str]:
        """Table group this condition reports under."""
        return {
            ConditionKind.GENDER: "Sex",
            ConditionKind.AGE: "Age",
            ConditionKind.INTERSECTIONAL: "Intersectional",
        }.get(self.kind)

    @property
    def key(self) -> str:
        """Stable machine key, e.g. ``neutral``, ``female``, ``teen_female``."""
        if self.kind is ConditionKind.NEUTRAL:
            return "neutral"
        parts = []
        if self.age is not None:
            parts.append(self.age.value.lower())
        if self.gender is not None:
            parts.append(self.gender.value.lower())
        return "_".join(parts)

    @classmethod
    def from_key(cls, key: str) -> "Condition":
        if key == "neutral":
            return cls.neutral()
        genders = {g.value.lower(): g for g in Gender}
        ages = {a.value.lower(): a for a in AgeBucket}
        parts = key.split("_")
        if len(parts) == 1 and parts[0] in genders:
            return cls.of_gender(genders[parts[0]])
        if len(parts) == 1 and parts[0] in ages:
            return cls.of_age(ages[parts[0]])
        if len(parts) == 2 and parts[0] in ages and parts[1] in genders:
            return cls.intersectional(genders[parts[1]], ages[parts[0]])
        raise ValueError(f"unknown condition key: {key!r}")


@dataclass
class PromptInstruction:
    user_id: int
    condition: Condition
    strategy: Strategy
    n_profile: int
    k: int
    text: str
    fingerprint: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            "user_id": self.user_id,
            "condition": self.condition.key,
            "strategy": self.strategy.value,
            "n_profile": self.n_profile,
            "k": self.k,
            "text": self.text,
            "fingerprint": self.fingerprint,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PromptInstruction":
        return cls(
            user_id=data["user_id"],
            condition=Condition.from_key(data["condition"]),
            strategy=Strategy(data["strategy"]),
            n_profile=data["n_profile"],
            k=data["k"],
            text=data["text"],
            fingerprint=data["fingerprint"],
        )


@dataclass(frozen=True)
class RawResponse:
    instruction_fingerprint: str
    text: str
    source: ResponseSource
    latency_ms: float
    retrieved_at: float  # seconds since epoch

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["source"] = self.source.value
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RawResponse":
        return cls(
            instruction_fingerprint=data["instruction_fingerprint"],
            text=data["text"],
            source=ResponseSource(data["source"]),
            latency_ms=float(data["latency_ms"]),
            retrieved_at=float(data["retrieved_at"]),
        )


@dataclass(frozen=True)
class TitleCandidate:
    """A title pulled out of completion text, before catalog lookup."""

    rank: int
    raw_title: str
    year: Optional[int] = None


@dataclass(frozen=True)
class ResolvedItem:
    item_id: int
    rank: int
    match_score: float


@dataclass
class RecommendationList:
    instruction_fingerprint: str
    resolved: List[ResolvedItem] = field(default_factory=list)
    unresolved: List[TitleCandidate] = field(default_factory=list)

    @property
    def match_rate(self) -> float:
        total = len(self.resolved) + len(self.unresolved)
        return len(self.resolved) / total if total else 0.0

    @property
    def item_ids(self) -> List[int]:
        return [r.item_id for r in self.resolved]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "fingerprint": self.instruction_fingerprint,
            "match_rate": self.match_rate,
            "resolved": [asdict(r) for r in self.resolved],
            "unresolved": [asdict(c) for c in self.unresolved],
        }


class RankedList:
    """An ordered, duplicate-free list of item ids with 1-based ranks.

    Ranks default to list positions; a filtered list keeps the ranks its
    items had before filtering.
    """

    def __init__(self, items: Sequence[int], ranks: Optional[Sequence[int]] = None):
        self.items: Tuple[int, ...] = tuple(items)
        if len(set(self.items)) != len(self.items):
            raise ValueError("ranked list contains duplicate items")
        if ranks is None:
            ranks = range(1, len(self.items) + 1)
        self._ranks: Dict[int, int] = dict(zip(self.items, ranks))
        if len(self._ranks) != len(self.items):
            raise ValueError("ranks and items differ in length")

    def rank(self, item_id: int) -> float:
        return self._ranks.get(item_id, math.inf)

    def __contains__(self, item_id: object) -> bool:
        return item_id in self._ranks

    def __iter__(self) -> Iterator[int]:
        return iter(self.items)

    def __len__(self) -> int:
        return len(self.items)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RankedList):
            return NotImplemented
        return self.items == other.items and self._ranks == other._ranks

    def __repr__(self) -> str:
        return f"RankedList({list(self.items)!r})"


@dataclass
class PairResult:
    """Similarity of one sensitive list to its neutral counterpart."""

    user_id: int
    condition: Condition
    strategy: Strategy
    n_profile: int
    mode: SimilarityMode
    jaccard: float
    prag_literal: float
    prag_normalized: float
    defined: bool = True  # False when both compared lists are empty
    neutral_len: int = 0
    sensitive_len: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "user_id": self.user_id,
            "condition": self.condition.key,
            "strategy": self.strategy.value,
            "n_profile": self.n_profile,
            "mode": self.mode.value,
            "jaccard": self.jaccard,
            "prag_literal": self.prag_literal,
            "prag_normalized": self.prag_normalized,
            "defined": self.defined,
            "neutral_len": self.neutral_len,
            "sensitive_len": self.sensitive_len,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PairResult":
        return cls(
            user_id=data["user_id"],
            condition=Condition.from_key(data["condition"]),
            strategy=Strategy(data["strategy"]),
            n_profile=data["n_profile"],
            mode=SimilarityMode(data["mode"]),
            jaccard=data["jaccard"],
            prag_literal=data["prag_literal"],
            prag_normalized=data["prag_normalized"],
            defined=data.get("defined", True),
            neutral_len=data.get("neutral_len", 0),
            sensitive_len=data.get("sensitive_len", 0),
        )


@dataclass
class FairnessCell:
    """Per-value mean similarities of one attribute family and their spread."""

    family: str
    strategy: Strategy
    n_profile: int
    metric: str
    mode: SimilarityMode
    values: Dict[str, float]
    snsr: float
    snsv: float
    n_users: int
    prompting: Optional[str] = None  # set on self-described grouping cells

    def to_dict(self) -> Dict[str, Any]:
        return {
            "family": self.family,
            "prompting": self.prompting,
            "strategy": self.strategy.value,
            "n_profile": self.n_profile,
            "metric": self.metric,
            "mode": self.mode.value,
            "values": dict(self.values),
            "snsr": self.snsr,
            "snsv": self.snsv,
            "n_users": self.n_users,
        }
