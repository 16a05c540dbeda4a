"""CSV and JSON emitters plus the per-run manifest."""

from __future__ import annotations

import hashlib
import json
import platform
import sys
from pathlib import Path

import numpy as np


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    lines = Path(path).read_text().splitlines()
    return lines[0].split(","), [ln.split(",") for ln in lines[1:] if ln]


def _plain(v):
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def write_json(path, record: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps({k: _plain(v) for k, v in record.items()}, indent=1, sort_keys=True) + "\n")
    return path


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def versions() -> dict:
    import scipy

    from . import __version__

    return {
        "python": sys.version.split()[0],
        "platform": platform.platform(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "fkripple": __version__,
    }


def write_manifest(out_dir, command: str, config_path, config_text: str, outputs, wall_time: float) -> Path:
    out_dir = Path(out_dir)
    record = {
        "command": command,
        "config": str(config_path),
        "inputs_sha256": hashlib.sha256(config_text.encode()).hexdigest(),
        "parameters": config_text,
        "versions": versions(),
        "outputs": {Path(p).name: sha256(p) for p in outputs},
        "wall_time": wall_time,
    }
    path = out_dir / f"{command}.manifest.json"
    path.write_text(json.dumps(record, indent=1, sort_keys=True) + "\n")
    return path
