"""Tests for MovieLens ingestion, splitting, cohort selection and statistics."""

import itertools
import json
import os
import tempfile
import unittest
from fractions import Fraction
from pathlib import Path

import numpy as np

from cfair.dataset import (
    CohortReport,
    SkipReport,
    dataset_stats,
    format_movie_line,
    format_rating_line,
    format_stats_table,
    gini,
    load_movielens,
    parse_movies,
    parse_ratings,
    parse_users,
    relevant_items,
    select_cohort,
    split_chronological,
    split_stats,
    write_stats,
)
from cfair.errors import DataError, IngestError
from cfair.models import AgeBucket, Gender, Interaction

from .mock import make_catalog, make_ratings, make_users, write_movielens


def _pairwise_gini(values):
    """Mean absolute difference over all ordered pairs, halved and normalised."""
    n = len(values)
    total = sum(values)
    if n == 0 or total == 0:
        return 0.0
    diff = sum(abs(a - b) for a, b in itertools.product(values, repeat=2))
    return diff / (2 * n * total)


class TestParsers(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def _write(self, name, lines, encoding="latin-1"):
        path = self.dir / name
        with open(path, "w", encoding=encoding) as f:
            f.write("\n".join(lines) + "\n")
        return path

    def test_parse_movies(self):
        path = self._write(
            "movies.dat",
            [
                "1::Toy Story (1995)::Animation|Children's|Comedy",
                "2::Matrix, The (1999)::Action|Sci-Fi|Thriller",
            ],
        )
        items = parse_movies(path)
        self.assertEqual([i.item_id for i in items], [1, 2])
        self.assertEqual(items[0].year, 1995)
        self.assertEqual(items[0].genres, ("Animation", "Children's", "Comedy"))
        self.assertEqual(items[0].genre_string, "Animation|Children's|Comedy")
        self.assertEqual(items[1].name, "Matrix, The")

    def test_latin1_title(self):
        path = self._write("movies.dat", ["3::Château, Le (1992)::Drama"])
        items = parse_movies(path)
        self.assertEqual(items[0].title, "Château, Le (1992)")

    def test_malformed_movie_lines_are_skipped(self):
        path = self._write(
            "movies.dat",
            [
                "1::Toy Story (1995)::Animation",
                "2::No Year::Drama",
                "x::Bad Id (1990)::Drama",
                "1::Duplicate (1990)::Drama",
                "4::Too::Many::Fields",
                "5::Empty Genres (1990)::",
            ],
        )
        skips = SkipReport()
        items = parse_movies(path, skips)
        self.assertEqual([i.item_id for i in items], [1])
        self.assertEqual(len(skips), 5)
        self.assertEqual([e.line_no for e in skips.entries], [2, 3, 4, 5, 6])

    def test_parse_ratings_rejects_out_of_range(self):
        path = self._write(
            "ratings.dat",
            ["1::1::5::978300760", "1::2::6::978300761", "1::2::0::978300762", "1::3::4::abc"],
        )
        skips = SkipReport()
        ratings = parse_ratings(path, skips)
        self.assertEqual(ratings, [Interaction(1, 1, 5, 978300760)])
        self.assertEqual(len(skips), 3)

    def test_parse_ratings_unknown_item(self):
        path = self._write("ratings.dat", ["1::1::5::978300760", "1::99::4::978300761"])
        skips = SkipReport()
        ratings = parse_ratings(path, skips, catalog_ids=[1])
        self.assertEqual(len(ratings), 1)
        self.assertIn("not in catalog", skips.entries[0].reason)

    def test_parse_users_age_buckets(self):
        path = self._write(
            "users.dat",
            [
                "1::F::1::10::48067",
                "2::M::18::16::70072",
                "3::M::25::15::55117",
                "4::F::35::7::02460",
                "5::M::56::20::70072",
                "6::X::25::1::00000",
                "7::F::30::1::00000",
            ],
        )
        skips = SkipReport()
        users = parse_users(path, skips)
        buckets = [u.age_bucket for u in users]
        self.assertEqual(
            buckets,
            [AgeBucket.TEEN, AgeBucket.YOUNG, AgeBucket.YOUNG, AgeBucket.ADULT, AgeBucket.ADULT],
        )
        self.assertEqual(users[0].gender, Gender.FEMALE)
        self.assertEqual(users[3].zip_code, "02460")
        self.assertEqual(len(skips), 2)

    def test_missing_file_raises_ingest_error(self):
        with self.assertRaises(IngestError) as ctx:
            parse_movies(self.dir / "missing.dat")
        self.assertEqual(ctx.exception.exit_code, 3)

    def test_blank_lines_are_ignored_without_shifting_line_numbers(self):
        path = self._write(
            "movies.dat",
            ["1::Good (1990)::Drama", "", "   ", "x::Bad (1991)::Drama", "2::Fine (1992)::Comedy"],
        )
        skips = SkipReport()
        items = parse_movies(path, skips)
        self.assertEqual([i.item_id for i in items], [1, 2])
        self.assertEqual([(e.line_no, e.reason) for e in skips.entries], [(4, "invalid movie id 'x'")])

    def test_quotes_in_titles_are_literal(self):
        path = self._write(
            "movies.dat",
            ['1::"Great Performances" Cats (1998)::Musical', '2::Say "Yes" (1990)::Drama'],
        )
        items = parse_movies(path)
        self.assertEqual(items[0].title, '"Great Performances" Cats (1998)')
        self.assertEqual(items[1].name, 'Say "Yes"')

    def test_too_many_fields_in_ratings_and_users(self):
        ratings = self._write("ratings.dat", ["1::1::5::978300760::9", "1::2::4::978300761"])
        skips = SkipReport()
        self.assertEqual(parse_ratings(ratings, skips), [Interaction(1, 2, 4, 978300761)])
        self.assertEqual(skips.entries[0].reason, "expected 4 fields")
        users = self._write("users.dat", ["1::F::1::10::00501::extra", "2::M::1::10::00501"])
        skips = SkipReport()
        self.assertEqual([u.user_id for u in parse_users(users, skips)], [2])
        self.assertEqual(skips.entries[0].line_no, 1)

    def test_empty_file(self):
        path = self._write("ratings.dat", [])
        self.assertEqual(parse_ratings(path), [])

    def test_skip_report_written_as_json_lines(self):
        path = self._write("movies.dat", ["1::Good (1990)::Drama", "bad line"])
        skips = SkipReport()
        parse_movies(path, skips)
        out = self.dir / "skips.jsonl"
        skips.write(out)
        rows = [json.loads(line) for line in out.read_text().splitlines()]
        self.assertEqual(len(rows), 1)
        self.assertEqual(rows[0]["line_no"], 2)
        self.assertEqual(set(rows[0]), {"file", "line_no", "reason"})

    def test_format_round_trip(self):
        catalog = make_catalog(5)
        path = self._write("movies.dat", [format_movie_line(i) for i in catalog])
        self.assertEqual(parse_movies(path), catalog)
        ratings = make_ratings(make_users(1)[:1], catalog, per_user=5)
        path = self._write("ratings.dat", [format_rating_line(r) for r in ratings])
        self.assertEqual(parse_ratings(path), ratings)

    def test_load_movielens(self):
        write_movielens(self.dir, per_cell=1, extra_lines={"ratings.dat": ["garbage"]})
        data = load_movielens(self.dir)
        self.assertEqual(len(data.users), 6)
        self.assertEqual(len(data.catalog), 60)
        self.assertEqual(len(data.ratings), 6 * 40)
        self.assertEqual(len(data.skips), 1)
        self.assertEqual(set(data.catalog_by_id), set(range(1, 61)))


class TestSplit(unittest.TestCase):
    def _history(self, n, user_id=1):
        return [Interaction(user_id, i + 1, 3, 1000 + i) for i in range(n)]

    def test_ten_interactions(self):
        split = split_chronological(self._history(10))
        self.assertEqual(len(split.train[1]), 8)
        self.assertEqual(len(split.valid[1]), 1)
        self.assertEqual(len(split.test[1]), 1)
        self.assertEqual(split.test[1][0].item_id, 10)

    def test_ceil_rounding_and_cap(self):
        split = split_chronological(self._history(3))
        # ceil(2.4) = 3 leaves nothing for valid or test
        self.assertEqual(len(split.train[1]), 3)
        self.assertEqual(split.valid[1], [])
        self.assertEqual(split.test[1], [])

    def test_single_interaction(self):
        split = split_chronological(self._history(1))
        self.assertEqual(len(split.train[1]), 1)
        self.assertEqual(split.test[1], [])

    def test_timestamp_ties_break_by_item_id(self):
        history = [Interaction(1, 9, 3, 5), Interaction(1, 2, 3, 5), Interaction(1, 4, 3, 1)]
        split = split_chronological(history, (Fraction(1, 3), Fraction(1, 3), Fraction(1, 3)))
        self.assertEqual([i.item_id for i in split.train[1]], [4])
        self.assertEqual([i.item_id for i in split.valid[1]], [2])
        self.assertEqual([i.item_id for i in split.test[1]], [9])

    def test_partition_is_complete_and_ordered(self):
        history = self._history(37)
        split = split_chronological(reversed(history))
        parts = split.train[1] + split.valid[1] + split.test[1]
        self.assertEqual(parts, history)
        latest_train = max(i.timestamp for i in split.train[1])
        self.assertTrue(all(i.timestamp >= latest_train for i in split.test[1]))

    def test_bad_fractions(self):
        with self.assertRaises(ValueError):
            split_chronological(self._history(5), (0.5, 0.3, 0.1))
        with self.assertRaises(ValueError):
            split_chronological(self._history(5), (0.0, 0.5, 0.5))

    def test_relevant_items(self):
        history = [Interaction(1, i, r, i) for i, r in enumerate([1, 2, 3, 4, 5, 4, 5, 2, 4, 5], 1)]
        split = split_chronological(history, (0.5, 0.0, 0.5))
        self.assertEqual(relevant_items(split, 1), {6, 7, 9, 10})
        self.assertEqual(relevant_items(split, 1, threshold=5), {7, 10})
        self.assertEqual(relevant_items(split, 2), set())


class TestCohort(unittest.TestCase):
    def setUp(self):
        self.catalog = make_catalog()
        self.users = make_users(per_cell=4)
        self.split = split_chronological(make_ratings(self.users, self.catalog))

    def test_stratified_and_deterministic(self):
        report = CohortReport()
        first = select_cohort(self.users, self.split, cohort_size=12, seed=7, report=report)
        second = select_cohort(self.users, self.split, cohort_size=12, seed=7)
        self.assertEqual(first, second)
        self.assertEqual(first, sorted(first))
        self.assertEqual(len(set(first)), 12)
        self.assertEqual(report.eligible, 24)
        self.assertEqual(set(report.selected.values()), {2})
        self.assertEqual(report.selected, report.targets)

    def test_seed_changes_draw(self):
        draws = {
            tuple(select_cohort(self.users, self.split, cohort_size=6, seed=s))
            for s in range(10)
        }
        self.assertGreater(len(draws), 1)

    def test_too_few_eligible(self):
        with self.assertRaises(DataError):
            select_cohort(self.users, self.split, cohort_size=25)

    def test_min_train_filters_users(self):
        with self.assertRaises(DataError):
            select_cohort(self.users, self.split, cohort_size=1, min_train=100)

    def test_uneven_cells(self):
        # only one Teen Female remains eligible
        users = [
            u
            for u in self.users
            if not (u.gender is Gender.FEMALE and u.age_bucket is AgeBucket.TEEN)
        ]
        teen_female = [
            u for u in self.users if u.gender is Gender.FEMALE and u.age_bucket is AgeBucket.TEEN
        ]
        users.append(teen_female[0])
        report = CohortReport()
        cohort = select_cohort(users, self.split, cohort_size=21, seed=1, report=report)
        self.assertEqual(cohort, sorted(u.user_id for u in users))
        self.assertEqual(report.targets["Female/Teen"], 1)
        self.assertEqual(report.selected, report.targets)

        report = CohortReport()
        cohort = select_cohort(users, self.split, cohort_size=7, seed=1, report=report)
        self.assertEqual(len(cohort), 7)
        # equal remainders go to cells in name order
        self.assertEqual(
            report.targets,
            {
                "Female/Adult": 2,
                "Female/Teen": 1,
                "Female/Young": 1,
                "Male/Adult": 1,
                "Male/Teen": 1,
                "Male/Young": 1,
            },
        )
        self.assertEqual(report.selected, report.targets)

    def test_targets_never_exceed_cell_sizes(self):
        users = self.users[:9]
        sizes = {}
        for user in users:
            key = f"{user.gender.value}/{user.age_bucket.value}"
            sizes[key] = sizes.get(key, 0) + 1
        for size in range(1, len(users) + 1):
            report = CohortReport()
            select_cohort(users, self.split, cohort_size=size, seed=3, report=report)
            self.assertEqual(sum(report.targets.values()), size)
            for cell, target in report.targets.items():
                self.assertLessEqual(target, sizes[cell])


class TestStatistics(unittest.TestCase):
    def test_gini_matches_pairwise_definition(self):
        for counts in ([1, 1, 1, 1], [0, 0, 0, 10], [3, 1, 4, 1, 5, 9, 2, 6], [7]):
            self.assertAlmostEqual(gini(counts), _pairwise_gini(counts), places=12)

    def test_gini_matches_pairwise_definition_on_random_counts(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            counts = rng.integers(0, 20, size=int(rng.integers(1, 12))).tolist()
            self.assertAlmostEqual(gini(counts), _pairwise_gini(counts), places=12)

    def test_absorbing_a_count_increases_gini(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            counts = sorted(rng.integers(1, 30, size=int(rng.integers(2, 10))).tolist())
            if counts[0] == counts[-1]:
                counts[-1] += 1
            moved = [counts[0] - 1] + counts[1:-1] + [counts[-1] + 1]
            self.assertGreater(gini(moved), gini(counts))

    def test_gini_edge_cases(self):
        self.assertEqual(gini([5, 5, 5]), 0.0)
        self.assertAlmostEqual(gini([0, 0, 0, 1]), 0.75)

    def test_dataset_stats(self):
        catalog = make_catalog(4)
        ratings = [
            Interaction(1, 1, 5, 1),
            Interaction(1, 2, 4, 2),
            Interaction(2, 1, 3, 3),
            Interaction(3, 1, 2, 4),
        ]
        stats = dataset_stats(catalog, ratings)
        self.assertEqual(stats.n_users, 3)
        self.assertEqual(stats.n_items, 2)
        self.assertEqual(stats.n_ratings, 4)
        self.assertAlmostEqual(stats.sparsity_pct, 100 * (1 - 4 / 6))
        self.assertAlmostEqual(stats.ratings_per_user, 4 / 3)
        self.assertAlmostEqual(stats.ratings_per_item, 2.0)
        self.assertAlmostEqual(stats.gini_item, _pairwise_gini([3, 1]))
        self.assertAlmostEqual(stats.gini_user, _pairwise_gini([2, 1, 1]))

    def test_empty_stats_raise(self):
        with self.assertRaises(DataError):
            dataset_stats(make_catalog(3), [])

    def test_split_stats_and_table(self):
        catalog = make_catalog()
        ratings = make_ratings(make_users(1), catalog)
        split = split_chronological(ratings)
        rows = split_stats(catalog, ratings, split)
        self.assertEqual(list(rows), ["ML-1M", "ML-1M (train)", "ML-1M (valid)", "ML-1M (test)"])
        self.assertEqual(rows["ML-1M"].n_ratings, len(ratings))
        self.assertEqual(
            sum(rows[f"ML-1M ({p})"].n_ratings for p in ("train", "valid", "test")),
            len(ratings),
        )
        table = format_stats_table(rows)
        self.assertIn("ML-1M (train)", table)
        with tempfile.TemporaryDirectory() as tmp:
            json_path, text_path = write_stats(rows, Path(tmp))
            self.assertEqual(json.loads(json_path.read_text())["ML-1M"]["n_users"], 6)
            self.assertEqual(text_path.read_text(), table)


@unittest.skipUnless(os.environ.get("CFAIR_ML1M_DIR"), "CFAIR_ML1M_DIR not set")
class TestFullMovieLens(unittest.TestCase):
    def test_published_statistics(self):
        data = load_movielens(os.environ["CFAIR_ML1M_DIR"])
        self.assertEqual(len(data.skips), 0)
        stats = dataset_stats(data.catalog, data.ratings)
        self.assertEqual(stats.n_users, 6040)
        self.assertEqual(stats.n_items, 3706)
        self.assertEqual(stats.n_ratings, 1000209)
        self.assertAlmostEqual(stats.sparsity_pct, 95.5316, delta=0.01)
        self.assertAlmostEqual(stats.gini_item, 0.6333, delta=0.01)
        self.assertAlmostEqual(stats.gini_user, 0.5283, delta=0.01)


if __name__ == "__main__":
    unittest.main()
