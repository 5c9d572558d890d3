# advamp/utils/store.py
"""
Flat-file storage utilities.
This module provides functions for saving and loading JSON documents and
writing plot-ready CSV tables with a fixed column order.
"""

import csv
import json
from pathlib import Path
from typing import Any, Dict, List, Sequence


def save_json(data: Any, path: Path):
    """
    Save a JSON document.

    Args:
        data: JSON-serializable object
        path: Path where the document should be saved
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2)


def load_json(path: Path) -> Any:
    """
    Load a JSON document.

    Args:
        path: Path to the document

    Returns:
        The decoded JSON object
    """
    with open(Path(path), "r", encoding="utf-8") as f:
        return json.load(f)


def write_csv(rows: List[Dict[str, Any]], columns: Sequence[str], path: Path):
    """
    Write rows to a UTF-8 CSV file with a header row.

    Rows are written in the order given; callers sort them first when the
    output must not depend on worker completion order.

    Args:
        rows: Row dictionaries keyed by column name
        columns: Column order of the header
        path: Destination file
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(columns), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({column: row[column] for column in columns})


def read_csv(path: Path) -> List[Dict[str, str]]:
    """
    Read a CSV file written by ``write_csv``.

    Args:
        path: Path to the CSV file

    Returns:
        List of row dictionaries with string values
    """
    with open(Path(path), "r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))
