"""Run records: canonical JSON, a never-overwriting run cache, schema checks, replay."""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

import jsonschema
import mpmath
import numpy as np

from .arith import QuadraticSurd

SCHEMA_VERSION = "1"
CACHE_ENV = "BADAPPROX_CACHE"
DEFAULT_CACHE = "badapprox-runs"


def jsonable(x):
    """Plain JSON values; exact scalars become strings, non-finite floats "inf"/"nan"."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, (Fraction, QuadraticSurd, mpmath.mpf)):
        return str(x)
    if x is None or isinstance(x, str):
        return x
    raise TypeError(f"cannot serialize {type(x).__name__}")


def canonical_json(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def sha256(text: str | bytes) -> str:
    if isinstance(text, str):
        text = text.encode("utf-8")
    return hashlib.sha256(text).hexdigest()


def load_schema(name: str) -> dict:
    with resources.files("badapprox").joinpath("schemas", name).open("r", encoding="utf-8") as fh:
        return json.load(fh)


def validate(doc: dict, name: str) -> None:
    jsonschema.validate(doc, load_schema(name))


@dataclass
class RunConfig:
    command: str
    parameters: dict

    def to_dict(self) -> dict:
        return {"command": self.command, "parameters": jsonable(self.parameters)}

    def digest(self) -> str:
        return sha256(canonical_json(self.to_dict()))[:12]


@dataclass
class RunRecord:
    config: RunConfig
    started: str
    finished: str
    payload: dict
    artifacts: dict = field(default_factory=dict)  # name -> text
    path: Path | None = None

    def to_dict(self) -> dict:
        return {
            "version": SCHEMA_VERSION,
            "config": self.config.to_dict(),
            "started": self.started,
            "finished": self.finished,
            "payload_sha256": sha256(canonical_json(self.payload)),
            "artifacts": {k: sha256(v) for k, v in sorted(self.artifacts.items())},
        }


def now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def cache_dir(explicit: str | None = None) -> Path:
    return Path(explicit or os.environ.get(CACHE_ENV) or DEFAULT_CACHE)


def write_record(rec: RunRecord, root: Path) -> Path:
    """Store under root/<timestamp>-<config hash>/; existing directories are never reused."""
    root.mkdir(parents=True, exist_ok=True)
    stamp = rec.started.replace("-", "").replace(":", "").replace(".", "").rstrip("Z")
    base = f"{stamp}-{rec.config.digest()}"
    i = 0
    while True:
        d = root / (base if i == 0 else f"{base}-{i}")
        try:
            d.mkdir()
            break
        except FileExistsError:
            i += 1
    payload = canonical_json(rec.payload)
    validate(rec.payload, "payload.schema.json")
    doc = rec.to_dict()
    validate(doc, "run_record.schema.json")
    (d / "payload.json").write_text(payload, encoding="utf-8")
    for name, text in rec.artifacts.items():
        (d / name).write_text(text, encoding="utf-8")
    (d / "record.json").write_text(canonical_json(doc), encoding="utf-8")
    rec.path = d
    return d


def read_record(path: str | Path) -> tuple[dict, str, dict]:
    """(record doc, payload text, artifacts by name) from a run directory or its record.json."""
    p = Path(path)
    if p.is_file():
        p = p.parent
    doc = json.loads((p / "record.json").read_text(encoding="utf-8"))
    validate(doc, "run_record.schema.json")
    payload = (p / "payload.json").read_text(encoding="utf-8")
    arts = {name: (p / name).read_text(encoding="utf-8") for name in doc["artifacts"]}
    return doc, payload, arts
