"""MovieLens-1M ingestion, chronological splitting, cohort selection and statistics."""

import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import DataError, IngestError
from .models import (
    AgeBucket,
    CatalogItem,
    DatasetStats,
    Gender,
    Interaction,
    SplitDataset,
    UserRecord,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

SOURCE_ENCODING = "latin-1"
DELIMITER = "::"

MOVIE_COLUMNS = ["item_id", "title", "genre_string"]
RATING_COLUMNS = ["user_id", "item_id", "rating", "timestamp"]
USER_COLUMNS = ["user_id", "gender", "age_code", "occupation_code", "zip_code"]

AGE_BUCKETS: Dict[int, AgeBucket] = {
    1: AgeBucket.TEEN,
    18: AgeBucket.YOUNG,
    25: AgeBucket.YOUNG,
    35: AgeBucket.ADULT,
    45: AgeBucket.ADULT,
    50: AgeBucket.ADULT,
    56: AgeBucket.ADULT,
}

_GENDERS = {"M": Gender.MALE, "F": Gender.FEMALE}
_TITLE_YEAR = r"\((\d{4})\)\s*$"
_OVERFLOW = "overflow"


@dataclass
class SkipEntry:
    file: str
    line_no: int
    reason: str


@dataclass
class SkipReport:
    """Input lines that were dropped during parsing."""

    entries: List[SkipEntry] = field(default_factory=list)

    def add(self, file: PathLike, line_no: int, reason: str) -> None:
        self.entries.append(SkipEntry(str(file), line_no, reason))

    def __len__(self) -> int:
        return len(self.entries)

    def write(self, path: PathLike) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for entry in self.entries:
                f.write(
                    json.dumps(
                        {
                            "file": entry.file,
                            "line_no": entry.line_no,
                            "reason": entry.reason,
                        }
                    )
                    + "\n"
                )


@dataclass
class MovieLens:
    """The three parsed ML-1M files."""

    catalog: List[CatalogItem]
    ratings: List[Interaction]
    users: List[UserRecord]
    skips: SkipReport

    @property
    def catalog_by_id(self) -> Dict[int, CatalogItem]:
        return {item.item_id: item for item in self.catalog}

    @property
    def users_by_id(self) -> Dict[int, UserRecord]:
        return {user.user_id: user for user in self.users}


def _read_table(path: PathLike, columns: List[str]) -> pd.DataFrame:
    """
    Read a ``::``-separated file as strings, one row per non-blank line.

    The index holds 1-based line numbers. Missing fields are NA, and the extra
    ``overflow`` column is set only on lines with more fields than ``columns``.
    """
    names = columns + [_OVERFLOW]
    try:
        with warnings.catch_warnings():
            # fields past ``names`` are dropped; the overflow column flags the line
            warnings.simplefilter("ignore", pd.errors.ParserWarning)
            frame = pd.read_csv(
                path,
                sep=DELIMITER,
                engine="python",
                header=None,
                names=names,
                index_col=False,
                dtype=str,
                keep_default_na=False,
                encoding=SOURCE_ENCODING,
                encoding_errors="backslashreplace",
                skip_blank_lines=False,
            )
    except pd.errors.EmptyDataError:
        frame = pd.DataFrame(columns=names, dtype=object)
    except (OSError, pd.errors.ParserError) as e:
        raise IngestError(f"cannot read {path}: {e}") from e
    frame.index = pd.RangeIndex(1, len(frame) + 1)
    first = frame[columns[0]].fillna("").str.strip()
    blank = first.eq("") & frame[names[1:]].isna().all(axis=1)
    return frame[~blank]


def _wrong_width(frame: pd.DataFrame, columns: List[str]) -> pd.Series:
    return frame[columns].isna().any(axis=1) | frame[_OVERFLOW].notna()


def _integers(column: pd.Series) -> pd.Series:
    """Whole numbers as nullable Int64; anything else becomes NA."""
    numbers = pd.to_numeric(column, errors="coerce")
    whole = numbers.notna() & (numbers % 1 == 0)
    return numbers.where(whole).astype("Int64")


class _Rejections:
    """The first failed check of every row, in the order the checks ran."""

    def __init__(self, index: pd.Index):
        self.reasons = pd.Series(None, index=index, dtype=object)

    @property
    def valid(self) -> pd.Series:
        return self.reasons.isna()

    def flag(self, mask: pd.Series, reason: Union[str, pd.Series]) -> None:
        mask = mask.astype(bool) & self.valid
        if isinstance(reason, str):
            self.reasons[mask] = reason
        else:
            self.reasons[mask] = reason[mask]

    def report(self, path: PathLike, skips: SkipReport) -> None:
        rejected = self.reasons.dropna()
        for line_no, reason in rejected.items():
            skips.add(path, int(line_no), reason)
        if len(rejected):
            logger.warning("Skipped %d malformed lines in %s", len(rejected), path)


def parse_movies(
    path: PathLike, skips: Optional[SkipReport] = None
) -> List[CatalogItem]:
    """
    Parse a ``MovieID::Title::Genres`` file.

    Args:
        path: Path to movies.dat
        skips: Report collecting malformed lines; a private one is used if omitted

    Returns:
        One CatalogItem per parseable line, in file order

    Raises:
        IngestError: If the file cannot be read
    """
    skips = skips if skips is not None else SkipReport()
    frame = _read_table(path, MOVIE_COLUMNS)
    rejections = _Rejections(frame.index)
    rejections.flag(_wrong_width(frame, MOVIE_COLUMNS), "expected 3 fields")

    raw_id = frame["item_id"].fillna("")
    item_id = _integers(raw_id).fillna(0).astype("int64")
    rejections.flag(item_id < 1, "invalid movie id " + raw_id.map(repr))

    title = frame["title"].fillna("")
    year = _integers(title.str.extract(_TITLE_YEAR, expand=False))
    rejections.flag(year.isna(), "title has no (YYYY) suffix")
    year = year.fillna(0).astype("int64")
    rejections.flag(
        (year < 1900) | (year > 2100), "year " + year.astype(str) + " out of range"
    )

    genre_string = frame["genre_string"].fillna("")
    genres = genre_string.str.split("|").map(lambda parts: tuple(g for g in parts if g))
    rejections.flag(genres.map(len) == 0, "no genres")

    duplicate = item_id.where(rejections.valid).duplicated(keep="first")
    rejections.flag(duplicate, "duplicate movie id " + item_id.astype(str))

    rejections.report(path, skips)
    valid = rejections.valid
    items = [
        CatalogItem(int(i), t, int(y), g, s)
        for i, t, y, g, s in zip(
            item_id[valid].tolist(),
            title[valid].tolist(),
            year[valid].tolist(),
            genres[valid].tolist(),
            genre_string[valid].tolist(),
        )
    ]
    logger.info("Parsed %d movies from %s", len(items), path)
    return items


def parse_ratings(
    path: PathLike,
    skips: Optional[SkipReport] = None,
    catalog_ids: Optional[Iterable[int]] = None,
) -> List[Interaction]:
    """
    Parse a ``UserID::MovieID::Rating::Timestamp`` file.

    Args:
        path: Path to ratings.dat
        skips: Report collecting malformed lines
        catalog_ids: When given, ratings of unknown items are skipped

    Returns:
        One Interaction per valid line, in file order
    """
    skips = skips if skips is not None else SkipReport()
    frame = _read_table(path, RATING_COLUMNS)
    rejections = _Rejections(frame.index)
    rejections.flag(_wrong_width(frame, RATING_COLUMNS), "expected 4 fields")

    parsed = pd.concat({c: _integers(frame[c]) for c in RATING_COLUMNS}, axis=1)
    rejections.flag(parsed.isna().any(axis=1), "non-integer field")
    values = parsed.fillna(0).astype("int64")

    rating = values["rating"]
    rejections.flag(
        (rating < 1) | (rating > 5), "rating " + rating.astype(str) + " outside [1, 5]"
    )
    rejections.flag(
        (values["user_id"] < 1) | (values["item_id"] < 1) | (values["timestamp"] <= 0),
        "non-positive id or timestamp",
    )
    if catalog_ids is not None:
        unknown = ~values["item_id"].isin(list(catalog_ids))
        rejections.flag(
            unknown, "movie " + values["item_id"].astype(str) + " not in catalog"
        )

    rejections.report(path, skips)
    kept = values[rejections.valid]
    interactions = [
        Interaction(int(u), int(i), int(r), int(t))
        for u, i, r, t in zip(*(kept[c].tolist() for c in RATING_COLUMNS))
    ]
    logger.info("Parsed %d ratings from %s", len(interactions), path)
    return interactions


def parse_users(path: PathLike, skips: Optional[SkipReport] = None) -> List[UserRecord]:
    """Parse a ``UserID::Gender::Age::Occupation::Zip`` file."""
    skips = skips if skips is not None else SkipReport()
    frame = _read_table(path, USER_COLUMNS)
    rejections = _Rejections(frame.index)
    rejections.flag(_wrong_width(frame, USER_COLUMNS), "expected 5 fields")

    numeric = ["user_id", "age_code", "occupation_code"]
    parsed = pd.concat({c: _integers(frame[c]) for c in numeric}, axis=1)
    rejections.flag(parsed.isna().any(axis=1), "non-integer field")
    values = parsed.fillna(0).astype("int64")

    raw_gender = frame["gender"].fillna("")
    rejections.flag(
        ~raw_gender.isin(list(_GENDERS)), "unknown gender " + raw_gender.map(repr)
    )
    age_code = values["age_code"]
    rejections.flag(
        ~age_code.isin(list(AGE_BUCKETS)), "unknown age code " + age_code.astype(str)
    )

    rejections.report(path, skips)
    valid = rejections.valid
    users = [
        UserRecord(int(u), _GENDERS[g], int(a), AGE_BUCKETS[int(a)], int(o), z)
        for u, g, a, o, z in zip(
            values.loc[valid, "user_id"].tolist(),
            raw_gender[valid].tolist(),
            age_code[valid].tolist(),
            values.loc[valid, "occupation_code"].tolist(),
            frame.loc[valid, "zip_code"].tolist(),
        )
    ]
    logger.info("Parsed %d users from %s", len(users), path)
    return users


def format_movie_line(item: CatalogItem) -> str:
    return DELIMITER.join([str(item.item_id), item.title, item.genre_string])


def format_rating_line(interaction: Interaction) -> str:
    return DELIMITER.join(
        str(v)
        for v in (
            interaction.user_id,
            interaction.item_id,
            interaction.rating,
            interaction.timestamp,
        )
    )


def format_user_line(user: UserRecord) -> str:
    gender = "M" if user.gender is Gender.MALE else "F"
    return DELIMITER.join(
        [
            str(user.user_id),
            gender,
            str(user.age_code),
            str(user.occupation_code),
            user.zip_code,
        ]
    )


def load_movielens(data_dir: PathLike) -> MovieLens:
    """Parse movies.dat, ratings.dat and users.dat from one directory."""
    data_dir = Path(data_dir)
    skips = SkipReport()
    catalog = parse_movies(data_dir / "movies.dat", skips)
    ratings = parse_ratings(
        data_dir / "ratings.dat", skips, catalog_ids=[item.item_id for item in catalog]
    )
    users = parse_users(data_dir / "users.dat", skips)
    return MovieLens(catalog=catalog, ratings=ratings, users=users, skips=skips)


def _as_fractions(fractions: Sequence[float]) -> Tuple[Fraction, Fraction, Fraction]:
    if len(fractions) != 3:
        raise ValueError("exactly three split fractions are required")
    parts = tuple(Fraction(str(f)) for f in fractions)
    if any(p < 0 for p in parts) or parts[0] <= 0 or sum(parts) != 1:
        raise ValueError(
            f"split fractions must be non-negative and sum to 1: {fractions}"
        )
    return parts  # type: ignore[return-value]


def _interaction_frame(interactions: Sequence[Interaction]) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "user_id": [i.user_id for i in interactions],
            "item_id": [i.item_id for i in interactions],
            "timestamp": [i.timestamp for i in interactions],
        },
        dtype="int64",
    )


def split_chronological(
    interactions: Iterable[Interaction],
    fractions: Sequence[float] = (0.8, 0.1, 0.1),
) -> SplitDataset:
    """
    Split every user's history by time into train, valid and test parts.

    Each user's interactions are ordered by (timestamp, item_id); the first
    ceil(f_train * n) go to train, the next ceil(f_valid * n), capped at what
    remains, to valid, and the rest to test.
    """
    train_f, valid_f, _ = parts = _as_fractions(fractions)
    history = list(interactions)
    ordered = _interaction_frame(history).sort_values(
        ["timestamp", "item_id"], kind="stable"
    )

    train, valid, test = {}, {}, {}
    for user_id, group in ordered.groupby("user_id", sort=True):
        rows = [history[p] for p in group.index]
        n = len(rows)
        n_train = min(n, math.ceil(train_f * n))
        n_valid = min(n - n_train, math.ceil(valid_f * n))
        user_id = int(user_id)
        train[user_id] = rows[:n_train]
        valid[user_id] = rows[n_train : n_train + n_valid]
        test[user_id] = rows[n_train + n_valid :]
    split = SplitDataset(train=train, valid=valid, test=test, split_fractions=parts)
    logger.info(
        "Split %d users into %d/%d/%d interactions",
        len(train),
        sum(len(v) for v in train.values()),
        sum(len(v) for v in valid.values()),
        sum(len(v) for v in test.values()),
    )
    return split


def relevant_items(split: SplitDataset, user_id: int, threshold: int = 4) -> set:
    """Test-split items the user rated at or above ``threshold``."""
    return {i.item_id for i in split.test.get(user_id, []) if i.rating >= threshold}


@dataclass
class CohortReport:
    """How the cohort draw was distributed over (gender, age) cells."""

    eligible: int = 0
    targets: Dict[str, int] = field(default_factory=dict)
    selected: Dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "eligible": self.eligible,
            "targets": self.targets,
            "selected": self.selected,
        }


def _cell_key(user: UserRecord) -> str:
    return f"{user.gender.value}/{user.age_bucket.value}"


def _largest_remainder(sizes: Dict[str, int], total: int) -> Dict[str, int]:
    population = sum(sizes.values())
    quotas = {cell: Fraction(size * total, population) for cell, size in sizes.items()}
    counts = {cell: math.floor(q) for cell, q in quotas.items()}
    leftover = total - sum(counts.values())
    by_remainder = sorted(quotas, key=lambda c: (-(quotas[c] - counts[c]), c))
    for cell in by_remainder[:leftover]:
        counts[cell] += 1
    return counts


def select_cohort(
    users: Iterable[UserRecord],
    split: SplitDataset,
    cohort_size: int = 150,
    seed: int = 0,
    min_test_relevant: int = 3,
    min_train: int = 10,
    relevance_threshold: int = 4,
    report: Optional[CohortReport] = None,
) -> List[int]:
    """
    Draw a seeded cohort stratified by (gender, age bucket).

    Eligible users have at least ``min_test_relevant`` relevant test ratings
    and at least ``min_train`` training interactions. Cell targets are
    proportional to the eligible population with largest-remainder rounding,
    so no target exceeds the eligible users of its cell.

    Returns:
        Sorted user ids

    Raises:
        DataError: If fewer users are eligible than ``cohort_size``
    """
    report = report if report is not None else CohortReport()
    cells: Dict[str, List[int]] = {}
    for user in sorted(users, key=lambda u: u.user_id):
        train = split.train.get(user.user_id, [])
        relevant = relevant_items(split, user.user_id, relevance_threshold)
        if len(train) >= min_train and len(relevant) >= min_test_relevant:
            cells.setdefault(_cell_key(user), []).append(user.user_id)

    eligible = sum(len(v) for v in cells.values())
    report.eligible = eligible
    if cohort_size > eligible:
        raise DataError(
            f"cohort of {cohort_size} requested but only {eligible} users are eligible"
        )

    rng = np.random.default_rng(seed)
    targets = _largest_remainder({c: len(v) for c, v in cells.items()}, cohort_size)
    chosen: List[int] = []
    for cell in sorted(cells):
        members = cells[cell]
        take = targets[cell]
        picked = rng.choice(len(members), size=take, replace=False) if take else []
        chosen.extend(members[i] for i in sorted(int(p) for p in picked))
        report.targets[cell] = take
        report.selected[cell] = take

    logger.info("Selected cohort of %d from %d eligible users", len(chosen), eligible)
    return sorted(chosen)


def gini(counts: Sequence[float]) -> float:
    """Gini coefficient of a non-negative count vector (0 = perfectly even)."""
    x = np.sort(np.asarray(counts, dtype=np.float64))
    n = x.size
    if n == 0:
        raise ValueError("gini of an empty vector")
    if np.any(x < 0):
        raise ValueError("gini is undefined for negative counts")
    total = x.sum()
    if total == 0:
        return 0.0
    index = np.arange(1, n + 1)
    return float(np.sum((2 * index - n - 1) * x) / (n * total))


def dataset_stats(
    catalog: Iterable[CatalogItem], interactions: Sequence[Interaction]
) -> DatasetStats:
    """
    Table-style statistics over the users and items that appear in ``interactions``.

    The catalog is accepted for symmetry with the other dataset helpers;
    counts cover only items with at least one interaction.

    Raises:
        DataError: If there are no interactions
    """
    if not interactions:
        raise DataError("cannot compute statistics of an empty interaction set")
    frame = _interaction_frame(interactions)
    per_user = frame["user_id"].value_counts()
    per_item = frame["item_id"].value_counts()
    n_users, n_items, n_ratings = len(per_user), len(per_item), len(frame)
    return DatasetStats(
        n_users=n_users,
        n_items=n_items,
        n_ratings=n_ratings,
        sparsity_pct=100.0 * (1.0 - n_ratings / (n_users * n_items)),
        ratings_per_user=n_ratings / n_users,
        ratings_per_item=n_ratings / n_items,
        gini_item=gini(per_item.to_numpy()),
        gini_user=gini(per_user.to_numpy()),
    )


STATS_COLUMNS = [
    ("|U|", "n_users", "{:d}"),
    ("|I|", "n_items", "{:d}"),
    ("|R|", "n_ratings", "{:d}"),
    ("Sparsity (%)", "sparsity_pct", "{:.4f}"),
    ("R/U", "ratings_per_user", "{:.2f}"),
    ("R/I", "ratings_per_item", "{:.2f}"),
    ("Gini Item", "gini_item", "{:.4f}"),
    ("Gini User", "gini_user", "{:.4f}"),
]


def format_stats_table(rows: Dict[str, DatasetStats]) -> str:
    """Plain-text table, one row per named dataset part."""
    header = ["Dataset"] + [label for label, _, _ in STATS_COLUMNS]
    body = [
        [name] + [fmt.format(getattr(stats, attr)) for _, attr, fmt in STATS_COLUMNS]
        for name, stats in rows.items()
    ]
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines.extend("  ".join(cell.ljust(w) for cell, w in zip(r, widths)) for r in body)
    return "\n".join(lines) + "\n"


def write_stats(rows: Dict[str, DatasetStats], out_dir: PathLike) -> Tuple[Path, Path]:
    """Write stats.json and stats.txt; returns both paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path, text_path = out_dir / "stats.json", out_dir / "stats.txt"
    with open(json_path, "w", encoding="utf-8") as f:
        json.dump({name: s.to_dict() for name, s in rows.items()}, f, indent=2)
    with open(text_path, "w", encoding="utf-8") as f:
        f.write(format_stats_table(rows))
    return json_path, text_path


def split_stats(
    catalog: Sequence[CatalogItem],
    interactions: Sequence[Interaction],
    split: SplitDataset,
) -> Dict[str, DatasetStats]:
    """Statistics for the full data and each non-empty split part."""
    rows = {"ML-1M": dataset_stats(catalog, interactions)}
    for part in ("train", "valid", "test"):
        part_interactions = split.part(part)
        if part_interactions:
            rows[f"ML-1M ({part})"] = dataset_stats(catalog, part_interactions)
    return rows
