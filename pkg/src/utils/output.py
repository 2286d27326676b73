"""
Output Writers Module

CSV and JSON artifact writers shared by every subcommand. Each artifact
carries the config hash and seed so a file can always be traced back to the
run that produced it, and formatting is deterministic so that re-running a
config reproduces files byte for byte.

Formats:
    CSV:  first line "# config_hash=<h> seed=<s>", then a header row, then
          data rows; floats written with repr (shortest round-trip form)
    JSON: top-level "config_hash" and "seed" keys, sorted keys, indent=2
"""

import csv
import json
import math
import os
from typing import Any, Iterable, Sequence

import numpy as np

from src.utils.logger import logger


def artifact_header(config_hash: str, seed: int) -> str:
    return f"# config_hash={config_hash} seed={seed}"


def _format_cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


def to_jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values.

    NaN becomes null; infinities become the strings "inf"/"-inf".
    """
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def _ensure_parent(path: str):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def write_csv(
    path: str,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    config_hash: str,
    seed: int,
) -> int:
    """Write rows under a commented provenance line and a header.

    Returns:
        int: Number of data rows written
    """
    _ensure_parent(path)
    count = 0
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(artifact_header(config_hash, seed) + "\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(cell) for cell in row])
            count += 1
    logger.info(f"[Output] Wrote {count} rows to {path}")
    return count


def write_json(path: str, payload: dict, config_hash: str, seed: int) -> dict:
    """Write payload with config_hash and seed added at the top level."""
    _ensure_parent(path)
    document = to_jsonable(dict(payload))
    document["config_hash"] = config_hash
    document["seed"] = int(seed)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(document, handle, sort_keys=True, indent=2)
        handle.write("\n")
    logger.info(f"[Output] Wrote {path}")
    return document


def read_csv_provenance(path: str) -> dict:
    """Parse the "# config_hash=.. seed=.." line of a CSV artifact."""
    with open(path, "r", encoding="utf-8") as handle:
        first = handle.readline().strip()
    if not first.startswith("#"):
        raise ValueError(f"{path} has no provenance line")
    fields = dict(item.split("=", 1) for item in first[1:].split())
    return {"config_hash": fields["config_hash"], "seed": int(fields["seed"])}
