from pathlib import Path
from typing import Dict, List, Optional, Sequence

from jinja2 import Environment, FileSystemLoader

from ..metrics import FAMILIES, TABLE_COLUMNS
from ..models import Condition, FairnessCell
from .tables import MODE_TITLES, table_rows

METRIC_TITLES = {
    "jaccard": "Jaccard",
    "prag_literal": "PRAG* (literal)",
    "prag_normalized": "PRAG* (normalized)",
}

_VALUE_WIDTH = 8
_LEAD_WIDTHS = {"prompting": 15, "strategy": 10, "n_profile": 3}


def _short_label(key: str) -> str:
    """Compact column label such as S_fn or S_tfn."""
    condition = Condition.from_key(key)
    letters = ""
    if condition.gender is not None:
        letters += condition.gender.value[0].lower()
    if condition.age is not None:
        letters += condition.age.value[0].lower()
    return f"S_{letters}n"


def _lead(values: List[str], grouped: bool) -> str:
    names = (["prompting"] if grouped else []) + ["strategy", "n_profile"]
    return " ".join(v.ljust(_LEAD_WIDTHS[n]) for v, n in zip(values, names))


def _family_blocks(values: List[str]) -> str:
    blocks, offset = [], 0
    for family in FAMILIES:
        width = len(TABLE_COLUMNS[family]) + 2
        chunk = values[offset : offset + width]
        blocks.append(" ".join(v.rjust(_VALUE_WIDTH) for v in chunk))
        offset += width
    return " | ".join(blocks)


def _format_table(rows: List[List[str]], grouped: bool) -> Dict[str, object]:
    lead_count = 3 if grouped else 2
    labels: List[str] = []
    for family in FAMILIES:
        labels += [_short_label(key) for key in TABLE_COLUMNS[family]]
        labels += ["SNSR", "SNSV"]
    lead_header = _lead(
        (["Prompting"] if grouped else []) + ["Strategy", "N"], grouped
    )
    header = f"{lead_header} | {_family_blocks(labels)}"
    band_blocks = []
    for family in FAMILIES:
        width = (len(TABLE_COLUMNS[family]) + 2) * (_VALUE_WIDTH + 1) - 1
        band_blocks.append(family.center(width))
    band = " " * len(lead_header) + " | " + " | ".join(band_blocks)
    lines = [
        f"{_lead(row[:lead_count], grouped)} | {_family_blocks(row[lead_count:])}"
        for row in rows
    ]
    return {"band": band.rstrip(), "header": header, "lines": lines}


def render_text_tables(
    cells: Sequence[FairnessCell],
    title: str = "Consumer fairness report",
    output_file: Optional[Path] = None,
) -> str:
    """Render fairness cells as grouped plain-text tables.

    Args:
        cells: Fairness cells of one run (counterfactual and self-described)
        title: Heading of the report
        output_file: Optional file path to write the report to

    Returns:
        The rendered report
    """
    template_dir = Path(__file__).parent / "templates"
    env = Environment(
        loader=FileSystemLoader(template_dir),
        trim_blocks=True,
        lstrip_blocks=True,
        keep_trailing_newline=True,
    )

    sections = []
    for label, subset in (
        ("Counterfactual prompts", [c for c in cells if not c.prompting]),
        ("Self-described prompts", [c for c in cells if c.prompting]),
    ):
        if not subset:
            continue
        grouped = any(c.prompting for c in subset)
        tables = []
        for (metric, mode), rows in sorted(table_rows(subset).items()):
            table = _format_table(rows, grouped)
            metric_title = METRIC_TITLES.get(metric, metric)
            table["title"] = f"{metric_title} / {MODE_TITLES[mode]}"
            tables.append(table)
        sections.append({"label": label, "tables": tables})

    template = env.get_template("fairness_tables.txt.j2")
    report = template.render(title=title, sections=sections)

    if output_file:
        with open(output_file, "w", encoding="utf-8") as f:
            f.write(report)

    return report
