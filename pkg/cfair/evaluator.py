"""Orchestration of a consumer-fairness audit: from raw data to report tables."""

import logging
import shutil
from concurrent.futures import ThreadPoolExecutor, as_completed
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Protocol, Sequence, Tuple

from tqdm import tqdm

from .config import Backend, EmptyJaccard, ExperimentConfig, ModelParams
from .dataset import (
    CohortReport,
    MovieLens,
    load_movielens,
    relevant_items,
    select_cohort,
    split_chronological,
)
from .errors import ReportError, StageError
from .metrics import fairness_cells, pair_results, self_described_cells
from .models import (
    AgeBucket,
    Condition,
    FairnessCell,
    Gender,
    PairResult,
    PromptInstruction,
    RankedList,
    RawResponse,
    RecommendationList,
    SimilarityMode,
    SplitDataset,
    UserRecord,
)
from .profiler import build_passion_summary, sample_profile
from .prompts import ATTRIBUTE_WORD_ORDER, enumerate_conditions, render_prompt
from .reports import (
    render_text_tables,
    write_fairness_csv,
    write_heatmap_csv,
    write_json_report,
)
from .resolver import CatalogIndex, resolve_text
from .utils import get_gateway, load_json, load_jsonl, write_json, write_jsonl

logger = logging.getLogger(__name__)

FAILED_MARKER = "FAILED"


class Backendlike(Protocol):
    cache_hits: int

    def complete(
        self, instruction: PromptInstruction, params: ModelParams
    ) -> RawResponse: ...


class ReportFormat(str, Enum):
    CSV = "csv"
    JSON = "json"
    TABLE = "table"


@dataclass
class PreparedData:
    """Ingested dataset, its split and the drawn cohort."""

    data: MovieLens
    split: SplitDataset
    cohort: List[int]
    cohort_report: CohortReport


@dataclass
class RunArtifacts:
    """Files of one run directory."""

    run_id: str
    run_dir: Path
    config: Dict[str, Any] = field(default_factory=dict)

    @property
    def config_file(self) -> Path:
        return self.run_dir / "config.json"

    @property
    def cohort_file(self) -> Path:
        return self.run_dir / "cohort.json"

    @property
    def prompts_file(self) -> Path:
        return self.run_dir / "prompts.jsonl"

    @property
    def responses_file(self) -> Path:
        return self.run_dir / "responses.jsonl"

    @property
    def resolution_file(self) -> Path:
        return self.run_dir / "resolution.jsonl"

    @property
    def pairs_file(self) -> Path:
        return self.run_dir / "pairs.jsonl"

    @property
    def tables_dir(self) -> Path:
        return self.run_dir / "tables"

    @property
    def heatmap_dir(self) -> Path:
        return self.run_dir / "heatmap"

    @property
    def failed(self) -> bool:
        return (self.run_dir / FAILED_MARKER).exists()

    @classmethod
    def load(cls, run_dir: Path) -> "RunArtifacts":
        """
        Open an existing run directory.

        Raises:
            ReportError: If config.json is missing or unreadable
        """
        run_dir = Path(run_dir)
        document = load_json(run_dir / "config.json")
        run_id = document.get("metadata", {}).get("run_id", run_dir.name)
        return cls(run_id=run_id, run_dir=run_dir, config=document.get("config", {}))

    def load_pairs(self) -> List[PairResult]:
        """
        Raises:
            ReportError: If pairs.jsonl is missing or holds no results
        """
        pairs = [PairResult.from_dict(row) for row in load_jsonl(self.pairs_file)]
        if not pairs:
            raise ReportError(f"no results in {self.pairs_file}")
        return pairs

    def load_users(self) -> Dict[int, UserRecord]:
        users = {}
        for row in load_json(self.cohort_file):
            users[row["user_id"]] = UserRecord(
                user_id=row["user_id"],
                gender=Gender(row["gender"]),
                age_code=row["age_code"],
                age_bucket=AgeBucket(row["age_bucket"]),
                occupation_code=row["occupation_code"],
                zip_code=row.get("zip_code", ""),
            )
        return users


@dataclass
class SweepArtifacts:
    sweep_dir: Path
    runs: Dict[int, RunArtifacts]
    heatmap: List[Path]


class FairnessAuditor:
    """Runs the counterfactual prompt grid for a cohort and scores it."""

    def __init__(
        self,
        config: ExperimentConfig,
        backend: Optional[Backendlike] = None,
        show_progress: bool = True,
    ):
        self.config = config
        self.backend = backend
        self.show_progress = show_progress
        self.run_dir: Optional[Path] = None

    @contextmanager
    def _stage(self, name: str) -> Iterator[None]:
        logger.info("Stage '%s' started", name)
        try:
            yield
        except StageError as e:
            self._mark_failed(e.stage, e.cause)
            raise
        except Exception as e:
            self._mark_failed(name, e)
            raise StageError(name, e) from e
        logger.info("Stage '%s' finished", name)

    def _mark_failed(self, stage: str, error: BaseException) -> None:
        if self.run_dir is None:
            return
        write_json(
            {"stage": stage, "error": type(error).__name__, "message": str(error)},
            self.run_dir / FAILED_MARKER,
        )
        logger.error("Run %s failed in stage '%s': %s", self.run_dir, stage, error)

    def prepare(self, min_train: Optional[int] = None) -> PreparedData:
        """
        Ingest the dataset, split it and draw the cohort.

        Args:
            min_train: Minimum training history of eligible users; defaults to
                the largest profile size of the configuration

        Returns:
            PreparedData shared by every (strategy, scope) of a run or sweep
        """
        config = self.config
        with self._stage("ingest"):
            data = load_movielens(config.data_dir)
            if config.backend is Backend.MOCK:
                config.bias.validate_against(data.catalog)
            logger.info(
                "Loaded %d items, %d ratings, %d users (%d lines skipped)",
                len(data.catalog),
                len(data.ratings),
                len(data.users),
                len(data.skips),
            )
        with self._stage("split"):
            split = split_chronological(data.ratings, config.split_fractions)
        with self._stage("cohort"):
            report = CohortReport()
            cohort = select_cohort(
                data.users,
                split,
                cohort_size=config.cohort_size,
                seed=config.seed,
                min_test_relevant=config.min_test_relevant,
                min_train=min_train if min_train is not None else max(config.scopes),
                relevance_threshold=config.relevance_threshold,
                report=report,
            )
        return PreparedData(data=data, split=split, cohort=cohort, cohort_report=report)

    def build_instructions(self, prepared: PreparedData) -> List[PromptInstruction]:
        """
        Render every (user, strategy, scope, condition) prompt.

        One profile is sampled per (user, strategy, scope) and shared by all
        conditions, so conditions differ only in the attribute clause.
        """
        config = self.config
        catalog = prepared.data.catalog_by_id
        conditions = enumerate_conditions()
        instructions = []
        for user_id in prepared.cohort:
            train = prepared.split.train.get(user_id, [])
            for strategy in config.strategies:
                for n in config.scopes:
                    profile = sample_profile(train, catalog, strategy, n, config.seed)
                    passion = build_passion_summary(profile)
                    for condition in conditions:
                        instruction = render_prompt(
                            profile,
                            passion,
                            condition,
                            k=config.k,
                            params=config.model,
                            format_clause=config.format_clause,
                            restate_attribute=config.restate_attribute,
                            template=config.template,
                        )
                        instructions.append(instruction)
        logger.info(
            "Rendered %d prompts for %d users", len(instructions), len(prepared.cohort)
        )
        return instructions

    def collect(
        self, instructions: Sequence[PromptInstruction], index: CatalogIndex
    ) -> List[Tuple[RawResponse, RecommendationList]]:
        """
        Complete and resolve every instruction on a bounded worker pool.

        Returns:
            (response, resolved list) per instruction, in instruction order
        """
        config = self.config

        def process(position: int, instruction: PromptInstruction):
            try:
                response = self.backend.complete(instruction, config.model)
            except Exception as e:
                raise StageError("complete", e) from e
            try:
                recommendations = resolve_text(
                    response.text,
                    index,
                    config.resolver_threshold,
                    instruction.fingerprint,
                )
            except Exception as e:
                raise StageError("resolve", e) from e
            return position, response, recommendations

        results: List[Optional[Tuple[RawResponse, RecommendationList]]] = [None] * len(
            instructions
        )
        with ThreadPoolExecutor(max_workers=config.max_workers) as executor:
            futures = [
                executor.submit(process, i, instruction)
                for i, instruction in enumerate(instructions)
            ]
            with tqdm(
                total=len(instructions),
                desc="Collecting recommendations",
                unit="prompt",
                ncols=80,
                disable=not self.show_progress,
            ) as pbar:
                try:
                    for future in as_completed(futures):
                        position, response, recommendations = future.result()
                        results[position] = (response, recommendations)
                        pbar.update(1)
                except BaseException:
                    for pending in futures:
                        pending.cancel()
                    raise
        return results  # type: ignore[return-value]

    def score(
        self,
        prepared: PreparedData,
        instructions: Sequence[PromptInstruction],
        recommendations: Sequence[RecommendationList],
    ) -> List[PairResult]:
        """Compare each sensitive list to its neutral list, in both modes."""
        config = self.config
        lists: Dict[Tuple, Dict[Condition, RankedList]] = {}
        for instruction, recs in zip(instructions, recommendations):
            group = (instruction.user_id, instruction.strategy, instruction.n_profile)
            lists.setdefault(group, {})[instruction.condition] = RankedList(
                recs.item_ids[: config.k]
            )

        pairs: List[PairResult] = []
        for (user_id, strategy, n), by_condition in lists.items():
            relevant = relevant_items(
                prepared.split, user_id, config.relevance_threshold
            )
            pairs.extend(
                pair_results(user_id, strategy, n, config.k, by_condition, relevant)
            )
        return pairs

    def run(self, prepared: Optional[PreparedData] = None) -> RunArtifacts:
        """
        Execute the full audit and persist every intermediate artifact.

        Args:
            prepared: Output of ``prepare`` to reuse, e.g. across a sweep

        Returns:
            RunArtifacts of the written run directory

        Raises:
            ConfigurationError: If the live backend has no credentials; raised
                before anything is written
            StageError: If a stage fails; the run directory keeps its partial
                artifacts and a FAILED marker
        """
        config = self.config
        if self.backend is None and config.backend is Backend.LIVE:
            self.backend = get_gateway(config)

        if prepared is None:
            prepared = self.prepare()
        if self.backend is None:
            self.backend = get_gateway(config, prepared.data.catalog)

        run_id = config.effective_run_id
        self.run_dir = Path(config.out_dir) / run_id
        self.run_dir.mkdir(parents=True, exist_ok=True)
        (self.run_dir / FAILED_MARKER).unlink(missing_ok=True)
        artifacts = RunArtifacts(
            run_id=run_id, run_dir=self.run_dir, config=config.snapshot()
        )
        logger.info("Writing run %s to %s", run_id, self.run_dir)

        metadata = self._metadata(run_id)
        users = prepared.data.users_by_id
        _write_run_config(artifacts, metadata, prepared.cohort_report)
        write_json(
            [_user_row(users[user_id]) for user_id in prepared.cohort],
            artifacts.cohort_file,
        )

        with self._stage("prompts"):
            instructions = self.build_instructions(prepared)
            write_jsonl((i.to_dict() for i in instructions), artifacts.prompts_file)

        with self._stage("complete"):
            index = CatalogIndex(prepared.data.catalog)
            collected = self.collect(instructions, index)
            responses = [response for response, _ in collected]
            recommendations = [recs for _, recs in collected]
            write_jsonl(
                (
                    {**_identity(i), **r.to_dict()}
                    for i, r in zip(instructions, responses)
                ),
                artifacts.responses_file,
            )

        with self._stage("resolve"):
            write_jsonl(
                (
                    {**_identity(i), **recs.to_dict()}
                    for i, recs in zip(instructions, recommendations)
                ),
                artifacts.resolution_file,
            )
            unresolved = sum(len(r.unresolved) for r in recommendations)
            poor = sum(1 for r in recommendations if r.match_rate < 0.5)
            if poor:
                logger.warning(
                    "%d of %d responses resolved below 50%%", poor, len(recommendations)
                )

        with self._stage("metrics"):
            pairs = self.score(prepared, instructions, recommendations)
            write_jsonl((p.to_dict() for p in pairs), artifacts.pairs_file)

        with self._stage("report"):
            for report_format in ReportFormat:
                emit_report(artifacts, report_format)

        metadata["counts"] = {
            "prompts": len(instructions),
            "responses": len(responses),
            "cache_hits": getattr(self.backend, "cache_hits", 0),
            "unresolved": unresolved,
            "pairs": len(pairs),
        }
        _write_run_config(artifacts, metadata, prepared.cohort_report)
        logger.info(
            "Run %s complete: %d prompts, %d cache hits, %d unresolved titles",
            run_id,
            len(instructions),
            metadata["counts"]["cache_hits"],
            unresolved,
        )
        return artifacts

    def _metadata(self, run_id: str) -> Dict[str, Any]:
        from . import __version__

        config = self.config
        return {
            "run_id": run_id,
            "version": __version__,
            "attribute_word_order": ATTRIBUTE_WORD_ORDER,
            "template": config.template.value,
            "format_clause": config.format_clause,
            "restate_attribute": config.restate_attribute,
            "resolver_threshold": config.resolver_threshold,
            "conditions": [c.key for c in enumerate_conditions()],
        }


def _write_run_config(
    artifacts: RunArtifacts, metadata: Dict[str, Any], cohort_report: CohortReport
) -> None:
    write_json(
        {
            "config": artifacts.config,
            "metadata": metadata,
            "cohort": cohort_report.to_dict(),
        },
        artifacts.config_file,
    )


def _identity(instruction: PromptInstruction) -> Dict[str, Any]:
    return {
        "user_id": instruction.user_id,
        "condition": instruction.condition.key,
        "strategy": instruction.strategy.value,
        "n_profile": instruction.n_profile,
    }


def _user_row(user: UserRecord) -> Dict[str, Any]:
    return {
        "user_id": user.user_id,
        "gender": user.gender.value,
        "age_code": user.age_code,
        "age_bucket": user.age_bucket.value,
        "occupation_code": user.occupation_code,
        "zip_code": user.zip_code,
    }


def run_experiment(
    config: ExperimentConfig,
    backend: Optional[Backendlike] = None,
    prepared: Optional[PreparedData] = None,
    show_progress: bool = True,
) -> RunArtifacts:
    """Run one audit; see ``FairnessAuditor.run``."""
    auditor = FairnessAuditor(config, backend=backend, show_progress=show_progress)
    return auditor.run(prepared)


def sweep_scope(
    config: ExperimentConfig,
    ns: Sequence[int] = (5, 10, 15),
    backend: Optional[Backendlike] = None,
    show_progress: bool = True,
) -> SweepArtifacts:
    """
    Run the audit once per profile size on one shared cohort.

    Per-size runs go to ``<out>/sweep-<id>/n<N>/``; the combined scope grid
    is written to ``<out>/sweep-<id>/heatmap/``.

    Raises:
        ValueError: If ``ns`` is empty
    """
    if not ns:
        raise ValueError("at least one profile size is required")
    ns = sorted(set(ns))
    sweep_config = config.model_copy(update={"scopes": list(ns)})
    sweep_id = config.run_id or f"sweep-{sweep_config.content_id()}"
    sweep_dir = Path(config.out_dir) / sweep_id

    if backend is None and config.backend is Backend.LIVE:
        backend = get_gateway(config)
    auditor = FairnessAuditor(sweep_config, show_progress=show_progress)
    prepared = auditor.prepare(min_train=max(ns))
    if backend is None:
        backend = get_gateway(config, prepared.data.catalog)

    runs: Dict[int, RunArtifacts] = {}
    cells: List[FairnessCell] = []
    for n in ns:
        logger.info("Sweeping profile size %d", n)
        run_config = config.model_copy(
            update={"scopes": [n], "run_id": f"n{n}", "out_dir": sweep_dir}
        )
        runs[n] = run_experiment(run_config, backend, prepared, show_progress)
        cells.extend(_configured_cells(runs[n], runs[n].load_pairs()))

    heatmap_dir = sweep_dir / "heatmap"
    if heatmap_dir.exists():
        shutil.rmtree(heatmap_dir)
    heatmap = write_heatmap_csv(cells, heatmap_dir)
    return SweepArtifacts(sweep_dir=sweep_dir, runs=runs, heatmap=heatmap)


def _skip_undefined(artifacts: RunArtifacts) -> bool:
    policy = artifacts.config.get("empty_jaccard", EmptyJaccard.ZERO.value)
    return policy == EmptyJaccard.SKIP.value


def _configured_cells(
    artifacts: RunArtifacts, pairs: Sequence[PairResult]
) -> List[FairnessCell]:
    return fairness_cells(pairs, skip_undefined=_skip_undefined(artifacts))


def emit_report(
    artifacts: RunArtifacts, report_format: ReportFormat = ReportFormat.CSV
) -> List[Path]:
    """
    Fold persisted pair results into report files.

    CSV writes one table per (metric, mode) under ``tables/`` plus the
    alternate empty-list policy, the self-described grid and the heatmap
    grid; JSON writes ``tables/report.json``; TABLE writes
    ``tables/fairness.txt``.

    Raises:
        ReportError: If pairs.jsonl or cohort.json is missing or empty
    """
    report_format = ReportFormat(report_format)
    pairs = artifacts.load_pairs()
    users = artifacts.load_users()
    skip = _skip_undefined(artifacts)
    cells = fairness_cells(pairs, skip_undefined=skip)
    self_cells = self_described_cells(pairs, users, skip_undefined=skip)

    tables_dir = artifacts.tables_dir
    tables_dir.mkdir(parents=True, exist_ok=True)
    if report_format is ReportFormat.CSV:
        alternate = [
            c
            for c in fairness_cells(pairs, skip_undefined=not skip)
            if c.mode is SimilarityMode.PREFERENCE_ALIGNED
        ]
        written = write_fairness_csv(cells, tables_dir)
        written += write_fairness_csv(alternate, tables_dir / "alt_empty")
        written += write_fairness_csv(self_cells, tables_dir / "self_described")
        written += write_heatmap_csv(cells, artifacts.heatmap_dir)
    elif report_format is ReportFormat.JSON:
        written = [
            write_json_report(
                artifacts.run_id,
                cells + self_cells,
                tables_dir / "report.json",
                metadata={"n_pairs": len(pairs), "n_users": len(users)},
            )
        ]
    else:
        path = tables_dir / "fairness.txt"
        render_text_tables(
            cells + self_cells,
            title=f"Consumer fairness: {artifacts.run_id}",
            output_file=path,
        )
        written = [path]
    logger.info("Wrote %d %s report files", len(written), report_format.value)
    return written


__all__ = [
    "FairnessAuditor",
    "PreparedData",
    "ReportFormat",
    "RunArtifacts",
    "SweepArtifacts",
    "emit_report",
    "run_experiment",
    "sweep_scope",
]
