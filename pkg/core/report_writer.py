"""
Serialization of run outputs: JSON reports, two-column function CSVs and the run manifest.
"""

import json
import logging
import math
from importlib import metadata
from pathlib import Path
from typing import Any

import numpy as np
import polars as pl

from .grid import GridFunction

logger = logging.getLogger(__name__)

_VERSIONED_PACKAGES = ("numpy", "scipy", "polars", "pydantic")


def _plain(value: Any) -> Any:
    """JSON に書ける値へ変換（非有限値は文字列、numpy 型は Python 型）"""
    if isinstance(value, dict):
        return {str(key): _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    if isinstance(value, np.ndarray):
        return [_plain(item) for item in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    return value


def write_json(path: str | Path, data: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_plain(data), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def write_function_csv(path: str | Path, u: GridFunction) -> Path:
    """ヘッダー "x,u" の2列 CSV"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pl.DataFrame({"x": u.grid.nodes, "u": u.values}).write_csv(path)
    return path


def write_frame(path: str | Path, frame: pl.DataFrame) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.write_csv(path)
    return path


def package_versions() -> dict[str, str]:
    versions = {}
    for name in _VERSIONED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def write_manifest(out_dir: str | Path, command: str, config_json: str, seed: int) -> Path:
    """manifest.json（コマンド名・設定・パッケージバージョン・シード。時刻は含めない）"""
    manifest = {
        "command": command,
        "seed": seed,
        "config": json.loads(config_json),
        "versions": package_versions(),
    }
    path = write_json(Path(out_dir) / "manifest.json", manifest)
    logger.debug(f"manifest written: {path}")
    return path
