"""
Run manifests: the exact inputs, code version and output checksums of one run.
"""

import logging
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from typing import Dict

from utils import __version__
from utils.harness.persistence import checksums, write_json

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class RunManifest:
    config: dict
    version: str
    timestamp: str
    master_seed: int
    checksums: Dict[str, str] = field(default_factory=dict)
    wall_clock_seconds: float = 0.0
    worker_count: int = 1

    @classmethod
    def build(cls, config: dict, master_seed: int, files, root: str, wall_clock: float, workers: int) -> "RunManifest":
        return cls(
            config=config,
            version=__version__,
            timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
            master_seed=int(master_seed),
            checksums=checksums(files, root),
            wall_clock_seconds=round(float(wall_clock), 3),
            worker_count=int(workers),
        )

    def to_dict(self) -> dict:
        return asdict(self)

    def write(self, directory: str) -> str:
        path = write_json(self.to_dict(), os.path.join(directory, MANIFEST_NAME))
        logger.info("Manifest written to %s (%d result files)", path, len(self.checksums))
        return path
