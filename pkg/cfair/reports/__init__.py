from .document import build_json_report, write_json_report
from .tables import heatmap_grids, write_fairness_csv, write_heatmap_csv
from .text import render_text_tables

__all__ = [
    "build_json_report",
    "heatmap_grids",
    "render_text_tables",
    "write_fairness_csv",
    "write_heatmap_csv",
    "write_json_report",
]
