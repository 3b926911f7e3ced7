import json
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from ..models import FairnessCell


def build_json_report(
    run_id: str,
    cells: Sequence[FairnessCell],
    metadata: Optional[Dict[str, Any]] = None,
) -> Dict[str, Any]:
    """Single-document view of a run's fairness cells."""
    return {
        "run_id": run_id,
        "metadata": metadata or {},
        "cells": [c.to_dict() for c in cells if not c.prompting],
        "self_described": [c.to_dict() for c in cells if c.prompting],
    }


def write_json_report(
    run_id: str,
    cells: Sequence[FairnessCell],
    output_file: Path,
    metadata: Optional[Dict[str, Any]] = None,
) -> Path:
    with open(output_file, "w", encoding="utf-8") as f:
        json.dump(
            build_json_report(run_id, cells, metadata), f, indent=2, sort_keys=True
        )
        f.write("\n")
    return output_file
