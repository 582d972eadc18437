"""Loading scenes and writing result records (JSON and CSV).

Every artifact carries the package version, the seed and a digest of the
configuration that produced it, so results can be matched to inputs.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .geometry import Scene, scene_from_dict

SCHEMA_VERSION = 1
OUTPUT_ENV = "WAVETRAP_OUTPUT_DIR"
NAMED_SCENES = {"standard": Scene.standard, "wide": Scene.wide}


def _version() -> str:
    from . import __version__
    return __version__


def to_jsonable(obj):
    """Recursively convert numpy values, tuples and dataclass-like reports."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return None if np.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if hasattr(obj, "as_dict"):
        return to_jsonable(obj.as_dict())
    return obj


def config_digest(config: dict) -> str:
    blob = json.dumps(to_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def load_scene(source: str | os.PathLike | None) -> Scene:
    """A named scene (``standard``, ``wide``) or a JSON scene file.

    Parse errors are reported with line and column; missing or bad fields
    by name.
    """
    if source is None:
        return Scene.standard()
    if str(source) in NAMED_SCENES:
        return NAMED_SCENES[str(source)]()
    path = Path(source)
    if not path.exists():
        raise ConfigError(f"scene file not found: {path}")
    text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    try:
        return scene_from_dict(data)
    except KeyError as exc:
        raise ConfigError(f"{path}: missing field {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def output_dir(explicit: str | None = None) -> Path:
    d = Path(explicit or os.environ.get(OUTPUT_ENV, "wavetrap_output"))
    d.mkdir(parents=True, exist_ok=True)
    return d


@dataclass
class ResultRecord:
    command: str
    config: dict
    scalars: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)   # name -> (header, rows)
    seed: int | None = None
    wall_clock: float = 0.0

    @property
    def digest(self) -> str:
        return config_digest({"command": self.command, "config": self.config, "seed": self.seed})

    def as_dict(self) -> dict:
        return {"schema": SCHEMA_VERSION, "command": self.command, "version": _version(),
                "digest": self.digest, "seed": self.seed, "config": to_jsonable(self.config),
                "results": to_jsonable(self.scalars), "wall_clock": self.wall_clock,
                "tables": sorted(self.tables)}

    def write(self, directory: str | os.PathLike | None = None) -> list[Path]:
        """JSON summary plus one CSV per table; returns the written paths."""
        d = output_dir(directory)
        stem = self.command.replace(" ", "_")
        paths = [d / f"{stem}.json"]
        paths[0].write_text(json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n")
        for name, (header, rows) in self.tables.items():
            p = d / f"{stem}_{name}.csv"
            with p.open("w", newline="") as fh:
                fh.write(f"# version={_version()} digest={self.digest} seed={self.seed}\n")
                w = csv.writer(fh)
                w.writerow(header)
                for row in rows:
                    w.writerow([to_jsonable(v) for v in row])
            paths.append(p)
        return paths


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        return False


def write_membership(path, grid) -> Path:
    """Binary membership file: a JSON header line, then packed bits (C order)."""
    path = Path(path)
    header = json.dumps(to_jsonable(grid.header()), sort_keys=True)
    with path.open("wb") as fh:
        fh.write(header.encode() + b"\n")
        fh.write(np.packbits(np.asarray(grid.membership, dtype=bool).ravel()).tobytes())
    return path


def read_membership(path) -> tuple[dict, np.ndarray]:
    with Path(path).open("rb") as fh:
        header = json.loads(fh.readline())
        bits = np.frombuffer(fh.read(), dtype=np.uint8)
    shape = tuple(header["dims"])
    return header, np.unpackbits(bits)[: int(np.prod(shape))].reshape(shape).astype(bool)
