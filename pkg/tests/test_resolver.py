"""Tests for title extraction, normalization and catalog resolution."""

import json
import os
import random
import tempfile
import unittest
from pathlib import Path

from cfair.dataset import load_movielens, parse_movies
from cfair.models import TitleCandidate
from cfair.resolver import (
    DEFAULT_THRESHOLD,
    CatalogIndex,
    extract_candidates,
    normalize_title,
    resolve,
    resolve_text,
    similarity_ratio,
)

from .mock import make_catalog

DATA_DIR = Path(__file__).parent / "data"


def _load_adversarial():
    corpus = json.loads((DATA_DIR / "resolver_adversarial.json").read_text("utf-8"))
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "movies.dat"
        path.write_text("\n".join(corpus["catalog"]) + "\n", encoding="latin-1")
        catalog = parse_movies(path)
    return catalog, corpus["cases"]


def _delete_one(title, rng):
    i = rng.randrange(len(title))
    return title[:i] + title[i + 1 :]


class TestExtractCandidates(unittest.TestCase):
    def test_numbered_list(self):
        candidates = extract_candidates("1. The Matrix (1999)\n2. Inception (2010)")
        self.assertEqual(
            candidates,
            [
                TitleCandidate(1, "The Matrix", 1999),
                TitleCandidate(2, "Inception", 2010),
            ],
        )

    def test_bullet_without_year(self):
        self.assertEqual(extract_candidates("- Jaws"), [TitleCandidate(1, "Jaws", None)])

    def test_empty_text(self):
        self.assertEqual(extract_candidates(""), [])
        self.assertEqual(extract_candidates("\n\n  \n"), [])

    def test_markers_and_wrappers(self):
        text = '3) "Heat" (1995)\n* **Fargo (1996)**\n\nx\n10 - Casino (1995)'
        self.assertEqual(
            [(c.rank, c.raw_title, c.year) for c in extract_candidates(text)],
            [(1, "Heat", 1995), (2, "Fargo", 1996), (3, "Casino", 1995)],
        )

    def test_title_starting_with_number(self):
        (candidate,) = extract_candidates("1. 12 Angry Men (1957)")
        self.assertEqual(candidate.raw_title, "12 Angry Men")


class TestNormalizeTitle(unittest.TestCase):
    def test_examples(self):
        self.assertEqual(normalize_title("Matrix, The (1999)"), "the matrix")
        self.assertEqual(normalize_title("The Matrix"), "the matrix")
        self.assertEqual(normalize_title("  Blade   Runner "), "blade runner")
        self.assertEqual(normalize_title("Léon: The Professional"), "léon: the professional")

    def test_trailing_articles(self):
        self.assertEqual(normalize_title("Appartement, L' (1996)"), "l'appartement")
        self.assertEqual(normalize_title("Godfather: Part II, The (1974)"), "the godfather: part ii")
        self.assertEqual(normalize_title("Bug's Life, A (1998)"), "a bug's life")

    def test_alternate_title_dropped(self):
        self.assertEqual(
            normalize_title("Shall We Dance? (Shall We Dansu?) (1996)"), "shall we dance?"
        )

    def test_idempotent(self):
        for title in ("Matrix, The (1999)", "Alien³ (1992)", "  Jaws  2 "):
            once = normalize_title(title)
            self.assertEqual(normalize_title(once), once)


class TestSimilarityRatio(unittest.TestCase):
    def test_examples(self):
        self.assertAlmostEqual(similarity_ratio("abcd", "bcde"), 0.75)
        self.assertEqual(similarity_ratio("abc", "xyz"), 0.0)
        self.assertEqual(similarity_ratio("jaws", "jaws"), 1.0)

    def test_symmetric_and_bounded(self):
        rng = random.Random(4)
        for _ in range(200):
            a = "".join(rng.choice("abcde ") for _ in range(rng.randint(1, 12)))
            b = "".join(rng.choice("abcde ") for _ in range(rng.randint(1, 12)))
            ratio = similarity_ratio(a, b)
            self.assertGreaterEqual(ratio, 0.0)
            self.assertLessEqual(ratio, 1.0)


class TestResolve(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.catalog, cls.cases = _load_adversarial()
        cls.index = CatalogIndex(cls.catalog)

    def test_exact_match_after_normalization(self):
        result = resolve_text("1. The Matrix (1999)", self.index)
        self.assertEqual(result.item_ids, [14])
        self.assertEqual(result.resolved[0].match_score, 1.0)
        self.assertEqual(result.match_rate, 1.0)

    def test_abbreviated_title_below_threshold(self):
        result = resolve_text("Star Wars Episode IV (1977)", self.index)
        self.assertEqual(result.resolved, [])
        self.assertEqual(result.unresolved, [TitleCandidate(1, "Star Wars Episode IV", 1977)])
        self.assertLess(
            similarity_ratio(
                normalize_title("Star Wars Episode IV"),
                normalize_title("Star Wars: Episode IV - A New Hope (1977)"),
            ),
            DEFAULT_THRESHOLD,
        )

    def test_invented_title_is_unresolved(self):
        result = resolve_text("1. Totally Invented Film (2050)", self.index)
        self.assertEqual(result.match_rate, 0.0)
        self.assertEqual(len(result.unresolved), 1)

    def test_sequels_and_remakes_do_not_cross_resolve(self):
        for case in self.cases:
            with self.subTest(text=case["text"]):
                result = resolve_text(case["text"], self.index)
                if case["expected"] is None:
                    self.assertEqual(result.item_ids, [])
                else:
                    self.assertEqual(result.item_ids, [case["expected"]])

    def test_fuzzy_score_is_reported(self):
        result = resolve_text("Die Hrd 2 (1990)", self.index)
        self.assertEqual(result.item_ids, [12])
        self.assertAlmostEqual(result.resolved[0].match_score, 18 / 19)

    def test_duplicates_keep_first_rank(self):
        text = "1. The Matrix (1999)\n2. Jaws (1975)\n3. Matrix, The (1999)"
        result = resolve_text(text, self.index, instruction_fingerprint="abc")
        self.assertEqual(result.item_ids, [14, 23])
        self.assertEqual([r.rank for r in result.resolved], [1, 2])
        self.assertEqual(result.unresolved, [])
        self.assertEqual(result.instruction_fingerprint, "abc")

    def test_accepts_plain_catalog(self):
        result = resolve(extract_candidates("Aliens (1986)"), self.catalog)
        self.assertEqual(result.item_ids, [7])

    def test_self_resolution(self):
        for item in self.catalog:
            with self.subTest(title=item.title):
                self.assertEqual(resolve_text(item.title, self.index).item_ids, [item.item_id])

    def test_unresolved_count_grows_with_threshold(self):
        rng = random.Random(11)
        candidates = []
        for rank, item in enumerate(self.catalog, 1):
            noisy = _delete_one(_delete_one(normalize_title(item.title), rng), rng)
            candidates.append(TitleCandidate(rank, noisy, item.year))
        previous = -1
        for threshold in (0.5, 0.6, 0.7, 0.8, 0.85, 0.9, 0.95, 1.0):
            unresolved = len(resolve(candidates, self.index, threshold).unresolved)
            self.assertGreaterEqual(unresolved, previous)
            previous = unresolved


class TestDeletionRobustness(unittest.TestCase):
    def _match_rate(self, catalog, sample_size, seed):
        index = CatalogIndex(catalog)
        rng = random.Random(seed)
        items = rng.sample(catalog, min(sample_size, len(catalog)))
        resolved = 0
        for item in items:
            noisy = _delete_one(normalize_title(item.title), rng)
            result = resolve([TitleCandidate(1, noisy, item.year)], index)
            resolved += len(result.resolved)
        return resolved / len(items)

    def test_single_deletions_on_fixture_catalog(self):
        catalog, _ = _load_adversarial()
        self.assertGreaterEqual(self._match_rate(catalog, 25, seed=0), 0.95)

    def test_synthetic_titles(self):
        self.assertGreaterEqual(self._match_rate(make_catalog(200), 200, seed=1), 0.95)

    @unittest.skipUnless(os.environ.get("CFAIR_ML1M_DIR"), "CFAIR_ML1M_DIR not set")
    def test_full_catalog(self):
        catalog = load_movielens(os.environ["CFAIR_ML1M_DIR"]).catalog
        self.assertGreaterEqual(self._match_rate(catalog, 500, seed=0), 0.95)
        index = CatalogIndex(catalog)
        by_id = {item.item_id: item for item in catalog}
        for item in catalog:
            (match,) = resolve_text(item.title, index).resolved
            if match.item_id != item.item_id:
                other = by_id[match.item_id]
                self.assertEqual(normalize_title(other.title), normalize_title(item.title))


if __name__ == "__main__":
    unittest.main()
