"""Run artifacts: CSV tables and the reproduction manifest."""

import json
import platform
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, Mapping

import pandas as pd

from app.config import StudyConfig
from app.utils.hashing import hash_config
from app.utils.logging import get_logger

logger = get_logger(__name__)

FLOAT_FORMAT = "%.17g"
PACKAGE_NAME = "tempering-lab"
VERSIONED = ("numpy", "scipy", "pandas", "scikit-learn", "pydantic")


def _version(distribution: str) -> str:
    try:
        return metadata.version(distribution)
    except metadata.PackageNotFoundError:
        return "unknown"


def versions() -> Dict[str, str]:
    found = {"python": platform.python_version(), PACKAGE_NAME: _version(PACKAGE_NAME)}
    found.update({name: _version(name) for name in VERSIONED})
    return found


class ArtifactWriter:
    """Writes every file of one command run below its output directory."""

    def __init__(self, out_dir: Path, command: str):
        self.out_dir = Path(out_dir)
        self.command = command
        self.written: list = []

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / f"{name}.csv"
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
        self.written.append(path)
        logger.info(f"Wrote {len(frame)} rows to {path}")
        return path

    def write_manifest(self, config: StudyConfig, threads: int, extra: Mapping[str, Any] = None) -> Path:
        """manifest.json: enough to rerun the command bit-identically."""
        resolved = config.model_dump(mode="json")
        manifest = {
            "command": self.command,
            "config_hash": hash_config(resolved),
            "seed": config.seed,
            "threads": threads,
            "config": resolved,
            "versions": versions(),
            "files": [p.name for p in self.written],
        }
        if extra:
            manifest.update(extra)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / "manifest.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
        logger.debug(f"Manifest {manifest['config_hash']} written to {path}")
        return path
