#!/usr/bin/env python3
"""
Run manifests.

Every CLI run records what produced its output: subcommand, resolved
parameters, seed, RNG algorithm, tool version and wall-clock duration. Two
manifests that agree on everything except timing describe identical outputs.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

from . import __version__
from .rng import RNG_ALGORITHM

logger = logging.getLogger(__name__)

TIMING_FIELDS = ("started_at", "duration")


@dataclass
class RunManifest:
    subcommand: str
    parameters: Dict[str, Any]
    argv: List[str]
    seed: Optional[int] = None
    rng_algorithm: str = RNG_ALGORITHM
    version: str = __version__
    started_at: Optional[str] = None
    duration: Optional[float] = None
    _start: Optional[datetime] = field(default=None, repr=False, compare=False)

    def start(self) -> None:
        self._start = datetime.now()
        self.started_at = self._start.isoformat(timespec='seconds')

    def finish(self) -> None:
        if self._start is None:
            raise RuntimeError("manifest was never started")
        self.duration = (datetime.now() - self._start).total_seconds()
        logger.info(f"{self.subcommand} finished in {self.duration:.2f}s")

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out.pop("_start")
        return out

    def identity(self) -> Dict[str, Any]:
        """Everything except timing"""
        return {k: v for k, v in self.to_dict().items() if k not in TIMING_FIELDS}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=str)

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        raw = json.loads(text)
        return cls(**{k: v for k, v in raw.items() if not k.startswith('_')})

    def save(self, path: Path) -> Path:
        path = Path(path)
        path.write_text(self.to_json() + "\n")
        logger.info(f"Manifest written to {path}")
        return path

    @classmethod
    def load(cls, path: Path) -> "RunManifest":
        return cls.from_json(Path(path).read_text())


def sidecar_path(out: Path) -> Path:
    """f.csv -> f.csv.manifest.json"""
    out = Path(out)
    return out.with_name(out.name + ".manifest.json")


def replay(manifest: RunManifest, argv_override: Optional[List[str]] = None) -> int:
    """Re-run the recorded command line through the CLI dispatcher"""
    from .cli import dispatch

    if manifest.version != __version__:
        logger.warning(f"Replaying a manifest from version {manifest.version} with {__version__}")
    return dispatch(argv_override if argv_override is not None else manifest.argv)
