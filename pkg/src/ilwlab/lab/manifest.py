"""Run manifests: configuration echo, timings, diagnostics and a checksummed
inventory of every emitted file."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from dataclasses import dataclass, field

from .. import __version__

MANIFEST_NAME = "manifest.json"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def format_value(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


def write_csv(path, columns, rows) -> None:
    """Header row then one line per row; floats with 17 significant digits."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def read_csv(path) -> tuple:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


@dataclass
class RunManifest:
    experiment: str
    config: dict
    output_dir: str
    version: str = __version__
    status: str = "running"
    error: str | None = None
    timings: dict = field(default_factory=dict)
    drifts: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)

    def path_for(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def emit_csv(self, name, columns, rows) -> str:
        path = self.path_for(name)
        write_csv(path, columns, rows)
        self.files[name] = sha256_file(path)
        return path

    def to_dict(self) -> dict:
        return _jsonable({
            "experiment": self.experiment,
            "version": self.version,
            "status": self.status,
            "error": self.error,
            "config": self.config,
            "timings": self.timings,
            "drifts": self.drifts,
            "warnings": self.warnings,
            "notes": self.notes,
            "files": dict(sorted(self.files.items())),
        })

    def write(self) -> str:
        os.makedirs(self.output_dir, exist_ok=True)
        path = self.path_for(MANIFEST_NAME)
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=False)
            fh.write("\n")
        return path


def load_manifest(directory) -> dict:
    with open(os.path.join(directory, MANIFEST_NAME)) as fh:
        return json.load(fh)


def verify_manifest(directory) -> list:
    """Problems found when re-checking the inventory; empty when every listed
    file exists with a matching checksum."""
    m = load_manifest(directory)
    problems = []
    for name, digest in m.get("files", {}).items():
        path = os.path.join(directory, name)
        if not os.path.exists(path):
            problems.append(f"missing: {name}")
        elif sha256_file(path) != digest:
            problems.append(f"checksum mismatch: {name}")
    return problems
