"""CSV layouts of the fairness tables and heatmap grids."""

import csv
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

from ..metrics import FAMILIES, TABLE_COLUMNS
from ..models import FairnessCell, SimilarityMode, Strategy

_FLOAT = "{:.6f}"


def table_header() -> List[str]:
    header = ["strategy", "n_profile"]
    for family in FAMILIES:
        header += [f"{family}:{key}" for key in TABLE_COLUMNS[family]]
        header += [f"{family}:SNSR", f"{family}:SNSV"]
    return header


def table_rows(cells: Sequence[FairnessCell]) -> Dict[Tuple[str, str], List[List[str]]]:
    """
    Group cells into one row per (prompting, strategy, n_profile) for each
    (metric, mode), columns ordered as in ``table_header``.

    Missing values are left blank.
    """
    rows: Dict[Tuple[str, str], Dict[Tuple, Dict[str, FairnessCell]]] = (
        defaultdict(dict)
    )
    for cell in cells:
        row_key = (cell.prompting or "", cell.strategy, cell.n_profile)
        rows[(cell.metric, cell.mode.value)].setdefault(row_key, {})[cell.family] = cell

    strategy_order = {s: i for i, s in enumerate(Strategy)}
    family_order = {f: i for i, f in enumerate(FAMILIES)}
    tables: Dict[Tuple[str, str], List[List[str]]] = {}
    for table_key, by_row in rows.items():
        body = []
        for prompting, strategy, n_profile in sorted(
            by_row,
            key=lambda r: (family_order.get(r[0], -1), strategy_order[r[1]], r[2]),
        ):
            families = by_row[(prompting, strategy, n_profile)]
            line = ([prompting] if prompting else []) + [strategy.value, str(n_profile)]
            for family in FAMILIES:
                cell = families.get(family)
                for key in TABLE_COLUMNS[family]:
                    value = cell.values.get(key) if cell else None
                    line.append(_FLOAT.format(value) if value is not None else "")
                line.append(_FLOAT.format(cell.snsr) if cell else "")
                line.append(_FLOAT.format(cell.snsv) if cell else "")
            body.append(line)
        tables[table_key] = body
    return tables


def write_fairness_csv(cells: Sequence[FairnessCell], out_dir: Path) -> List[Path]:
    """
    Write one ``<metric>_<mode>.csv`` per (metric, mode).

    Rows are profile sampling strategies (prefixed by the prompting family
    for self-described grids); columns are the per-value similarities of
    each family followed by its SNSR and SNSV.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    has_prompting = any(c.prompting for c in cells)
    header = (["prompting"] if has_prompting else []) + table_header()
    written = []
    for (metric, mode), body in sorted(table_rows(cells).items()):
        path = out_dir / f"{metric}_{mode}.csv"
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(body)
        written.append(path)
    return written


def heatmap_grids(
    cells: Sequence[FairnessCell],
) -> Tuple[List[str], List[List[str]], List[str], List[List[str]]]:
    """
    Scope-by-column grids for plotting.

    Returns:
        (similarity header, similarity rows, snsr header, snsr rows); one row per
        profile size, similarity columns per strategy/mode/metric/condition and
        SNSR columns per strategy/mode/metric/family
    """
    similarity: Dict[int, Dict[str, float]] = defaultdict(dict)
    spread: Dict[int, Dict[str, float]] = defaultdict(dict)
    sim_columns: List[str] = []
    snsr_columns: List[str] = []
    for cell in cells:
        if cell.prompting:
            continue
        prefix = f"{cell.strategy.value}/{cell.mode.value}/{cell.metric}"
        for key, value in cell.values.items():
            column = f"{prefix}/{key}"
            if column not in sim_columns:
                sim_columns.append(column)
            similarity[cell.n_profile][column] = value
        column = f"{prefix}/{cell.family}"
        if column not in snsr_columns:
            snsr_columns.append(column)
        spread[cell.n_profile][column] = cell.snsr

    def grid(
        values: Dict[int, Dict[str, float]], columns: List[str]
    ) -> List[List[str]]:
        return [
            [str(n)]
            + [_FLOAT.format(values[n][c]) if c in values[n] else "" for c in columns]
            for n in sorted(values)
        ]

    return (
        ["n_profile"] + sim_columns,
        grid(similarity, sim_columns),
        ["n_profile"] + snsr_columns,
        grid(spread, snsr_columns),
    )


def write_heatmap_csv(cells: Sequence[FairnessCell], out_dir: Path) -> List[Path]:
    """Write ``similarity.csv`` and ``snsr.csv`` grids."""
    out_dir.mkdir(parents=True, exist_ok=True)
    sim_header, sim_rows, snsr_header, snsr_rows = heatmap_grids(cells)
    paths = []
    for name, header, rows in (
        ("similarity.csv", sim_header, sim_rows),
        ("snsr.csv", snsr_header, snsr_rows),
    ):
        path = out_dir / name
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
        paths.append(path)
    return paths


MODE_TITLES = {
    SimilarityMode.ITEM_SIMILARITY.value: "Item similarity",
    SimilarityMode.PREFERENCE_ALIGNED.value: "True preference alignment",
}
