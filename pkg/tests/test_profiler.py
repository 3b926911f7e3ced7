"""Tests for profile sampling and passion summaries."""

import unittest

from cfair.models import CatalogItem, Interaction, ProfileEntry, ProfileSample, Strategy
from cfair.profiler import build_passion_summary, sample_profile

from .mock import make_catalog


def _item(item_id, genre_string, year):
    return CatalogItem(
        item_id, f"Film {item_id} ({year})", year, tuple(genre_string.split("|")), genre_string
    )


def _profile(items):
    return ProfileSample(
        user_id=1,
        strategy=Strategy.RECENT,
        n_requested=len(items),
        items=[ProfileEntry(item, 4, t) for t, item in enumerate(items)],
        seed=0,
    )


class TestSampleProfile(unittest.TestCase):
    def setUp(self):
        self.catalog = {item.item_id: item for item in make_catalog(60)}

    def _train(self, specs):
        """specs: (item_id, rating, timestamp) tuples."""
        return [Interaction(1, i, r, t) for i, r, t in specs]

    def test_short_history_returned_whole(self):
        train = self._train([(1, 3, 10), (2, 4, 20), (3, 5, 30)])
        for strategy in Strategy:
            profile = sample_profile(train, self.catalog, strategy, n=10, seed=1)
            self.assertEqual(len(profile.items), 3)
            self.assertEqual(profile.n_requested, 10)

    def test_top_rated_ties_prefer_later(self):
        train = self._train([(1, 5, 1), (2, 3, 2), (3, 5, 3)])
        profile = sample_profile(train, self.catalog, Strategy.TOP_RATED, n=2)
        self.assertEqual([e.item.item_id for e in profile.items], [3, 1])

    def test_recent(self):
        train = self._train([(1, 3, 10), (2, 3, 30), (3, 3, 20)])
        profile = sample_profile(train, self.catalog, Strategy.RECENT, n=2)
        self.assertEqual([e.timestamp for e in profile.items], [30, 20])

    def test_random_is_seeded_and_time_ordered(self):
        train = self._train([(i, 1 + i % 5, 100 + i) for i in range(1, 41)])
        first = sample_profile(train, self.catalog, Strategy.RANDOM, n=10, seed=3)
        second = sample_profile(train, self.catalog, Strategy.RANDOM, n=10, seed=3)
        self.assertEqual(first.items, second.items)
        timestamps = [e.timestamp for e in first.items]
        self.assertEqual(timestamps, sorted(timestamps))

    def test_random_covers_history_across_seeds(self):
        train = self._train([(i, 3, 100 + i) for i in range(1, 51)])
        seen = set()
        for seed in range(100):
            profile = sample_profile(train, self.catalog, Strategy.RANDOM, n=10, seed=seed)
            seen.update(e.item.item_id for e in profile.items)
        self.assertEqual(seen, set(range(1, 51)))

    def test_cardinality_and_subset(self):
        train = self._train([(i, 1 + i % 5, 100 + (i * 7) % 13) for i in range(1, 13)])
        train_ids = {i.item_id for i in train}
        for strategy in Strategy:
            for n in range(1, len(train) + 6):
                profile = sample_profile(train, self.catalog, strategy, n=n, seed=n)
                ids = [e.item.item_id for e in profile.items]
                self.assertEqual(len(ids), min(n, len(train)))
                self.assertEqual(len(set(ids)), len(ids))
                self.assertTrue(set(ids) <= train_ids)

    def test_orderings_are_monotone(self):
        train = self._train([(i, 1 + (i * 3) % 5, 100 + (i * 7) % 19) for i in range(1, 20)])
        top = sample_profile(train, self.catalog, Strategy.TOP_RATED, n=8)
        ratings = [e.rating for e in top.items]
        self.assertEqual(ratings, sorted(ratings, reverse=True))
        recent = sample_profile(train, self.catalog, Strategy.RECENT, n=8)
        timestamps = [e.timestamp for e in recent.items]
        self.assertEqual(timestamps, sorted(timestamps, reverse=True))

    def test_repeated_item_keeps_latest(self):
        train = self._train([(1, 5, 10), (1, 2, 50), (2, 4, 20)])
        profile = sample_profile(train, self.catalog, Strategy.RECENT, n=5)
        self.assertEqual([(e.item.item_id, e.rating) for e in profile.items], [(1, 2), (2, 4)])

    def test_invalid_arguments(self):
        with self.assertRaises(ValueError):
            sample_profile([], self.catalog, Strategy.RECENT, n=5)
        with self.assertRaises(ValueError):
            sample_profile(self._train([(1, 3, 1)]), self.catalog, Strategy.RECENT, n=0)


class TestPassionSummary(unittest.TestCase):
    def test_counts_whole_genre_strings(self):
        profile = _profile(
            [
                _item(1, "Drama|Sci-Fi", 1951),
                _item(2, "Drama", 1970),
                _item(3, "Comedy|Romance", 1997),
                _item(4, "Drama", 1980),
            ]
        )
        summary = build_passion_summary(profile)
        self.assertEqual(summary.top_genre_strings, ["Drama", "Comedy|Romance", "Drama|Sci-Fi"])
        self.assertEqual((summary.year_min, summary.year_max), (1951, 1997))

    def test_single_item(self):
        summary = build_passion_summary(_profile([_item(1, "Western", 1960)]))
        self.assertEqual(summary.top_genre_strings, ["Western"])
        self.assertEqual(summary.year_min, summary.year_max)

    def test_ties_are_alphabetical_and_capped(self):
        profile = _profile(
            [_item(i, g, 1990) for i, g in enumerate(["War", "Action", "Musical", "Crime"], 1)]
        )
        summary = build_passion_summary(profile)
        self.assertEqual(summary.top_genre_strings, ["Action", "Crime", "Musical"])

    def test_empty_profile(self):
        with self.assertRaises(ValueError):
            build_passion_summary(_profile([]))


if __name__ == "__main__":
    unittest.main()
