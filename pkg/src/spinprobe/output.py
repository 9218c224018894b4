"""Deterministic CSV, 16-bit PGM and JSON manifest writers."""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

SCHEMA_VERSION = 1
OUTPUT_DIR_ENV = "SPINPROBE_OUTPUT_DIR"
PGM_MAX = 65535


def output_dir(explicit: str | os.PathLike | None = None) -> Path:
    """Explicit argument, then the environment variable, then ./spinprobe_out."""
    path = Path(explicit) if explicit else Path(os.environ.get(OUTPUT_DIR_ENV, "spinprobe_out"))
    path.mkdir(parents=True, exist_ok=True)
    return path


def fmt(value) -> str:
    """Fixed 17-significant-digit formatting so files are byte-reproducible."""
    if isinstance(value, (int, np.integer, bool, np.bool_)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return format(float(value), ".17g")


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def write_pgm(path: Path, values: np.ndarray, window: tuple[float, float] | None = None) -> tuple[float, float]:
    """Binary 16-bit big-endian PGM; returns the (low, high) scaling window."""
    a = np.asarray(values, dtype=float)
    if a.ndim != 2:
        raise ValueError("PGM needs a 2-D array")
    lo, hi = (float(np.min(a)), float(np.max(a))) if window is None else map(float, window)
    span = hi - lo
    scaled = np.zeros(a.shape) if span <= 0 else (np.clip(a, lo, hi) - lo) / span
    pix = np.round(scaled * PGM_MAX).astype(">u2")
    # Row 0 of the array is the smallest y; PGM rows run top to bottom.
    pix = pix[::-1]
    with open(path, "wb") as fh:
        fh.write(f"P5\n{a.shape[1]} {a.shape[0]}\n{PGM_MAX}\n".encode("ascii"))
        fh.write(pix.tobytes())
    return lo, hi


def read_pgm(path: Path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h = (int(v) for v in parts[1].split())
    if int(parts[2]) != PGM_MAX:
        raise ValueError("expected 16-bit PGM")
    return np.frombuffer(parts[3], dtype=">u2").reshape(h, w)[::-1].astype(np.uint16)


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_jsonable)


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def param_hash(params: dict) -> str:
    return hashlib.sha256(canonical_json(params).encode()).hexdigest()


@dataclass
class Manifest:
    """One manifest per run, listing every file it produced."""

    mode: str
    version: str
    params: dict
    outputs: list[dict] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    results: dict = field(default_factory=dict)

    def add(self, path: Path, kind: str, **extra) -> None:
        entry = {"file": Path(path).name, "kind": kind, "sha256": sha256_file(path)}
        entry.update(extra)
        self.outputs.append(entry)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "software_version": self.version,
            "mode": self.mode,
            "params": self.params,
            "param_hash": param_hash(self.params),
            "results": self.results,
            "outputs": self.outputs,
            "warnings": self.warnings,
        }

    def write(self, directory: Path, name: str = "manifest.json") -> Path:
        path = Path(directory) / name
        path.write_text(json.dumps(self.to_dict(), sort_keys=True, indent=2, default=_jsonable) + "\n")
        return path
