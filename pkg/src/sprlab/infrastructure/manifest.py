# src/sprlab/infrastructure/manifest.py
from __future__ import annotations
import json
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List

from sprlab import __version__
from sprlab.core.config import ExperimentConfig
from sprlab.core.log import log

MANIFEST_NAME = "manifest.json"
ERROR_NAME = "error.json"


@dataclass
class RunManifest:
    command: str
    config: ExperimentConfig
    version: str = __version__
    timings: Dict[str, float] = field(default_factory=dict)
    cache_hits: List[str] = field(default_factory=list)
    outputs: List[str] = field(default_factory=list)

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = round(time.perf_counter() - t0, 6)
            log(f"etapa {name}: {self.timings[name]:.3f}s", level="DEBUG", stage=name)

    def add_output(self, path: Path) -> Path:
        self.outputs.append(path.name)
        return path

    def as_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "config_hash": self.config.config_hash(),
            "version": self.version,
            "timings": self.timings,
            "cache_hits": self.cache_hits,
            "outputs": sorted(self.outputs),
            "config": self.config.model_dump(mode="json"),
        }

    def write(self, out_dir: Path) -> Path:
        path = out_dir / MANIFEST_NAME
        path.write_text(json.dumps(self.as_dict(), indent=2, sort_keys=True,
                                   ensure_ascii=False) + "\n", encoding="utf-8")
        return path


def write_error(out_dir: Path, record: Dict[str, Any]) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / ERROR_NAME
    path.write_text(json.dumps(record, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
                    encoding="utf-8")
    return path
