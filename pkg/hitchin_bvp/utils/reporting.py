#!/usr/bin/env python3

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import ConfigError, ReportWriteError
from .logging import Log

SCHEMA = "hitchin-bvp/report"
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    seed: int = 0
    workers: int = 1
    out_dir: str = "."
    report_json: str = None
    report_csv: str = None
    params: dict = field(default_factory=dict)
    version: int = SCHEMA_VERSION

    # inclusive ranges checked by validate(); keys missing from params are skipped
    RANGES = {
        "n": (4, 64),
        "nx": (4, 64),
        "nt": (1, 64),
        "degree": (2, 10),
        "mmax": (0, 4),
        "trial_offset": (1, 6),
        "points": (1, 100000),
        "max_iter": (0, 100000),
    }

    def validate(self):
        for key, (lo, hi) in self.RANGES.items():
            value = self.params.get(key)
            if value is None:
                continue
            if not lo <= value <= hi:
                raise ConfigError(f"{key}={value} outside [{lo}, {hi}]", key=key, value=value)
        if "n" in self.params and self.params["n"] % 2:
            raise ConfigError("grid size n must be even", n=self.params["n"])
        for key in ("eps",):
            value = self.params.get(key)
            if value is not None and not 0.0 <= value < 1.0:
                raise ConfigError(f"{key}={value} outside [0, 1)", key=key, value=value)
        for key in ("rtol", "tol", "gap"):
            value = self.params.get(key)
            if value is not None and not value > 0:
                raise ConfigError(f"{key} must be positive", key=key, value=value)
        if self.workers < 1:
            raise ConfigError("workers must be >= 1", workers=self.workers)
        return self

    def to_dict(self):
        data = asdict(self)
        data["params"] = dict(sorted(self.params.items()))
        return data


def to_jsonable(obj):
    """Convert numpy arrays, fractions and complex numbers into plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, Fraction):
        return str(obj) if obj.denominator != 1 else obj.numerator
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": to_jsonable(float(obj.real)), "im": to_jsonable(float(obj.imag))}
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isfinite(value):
            return value
        return str(value)
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    return obj


def canonical_json(obj):
    return json.dumps(to_jsonable(obj), sort_keys=True, separators=(",", ":"))


def content_hash(obj):
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def build_report(config, body, inputs=None):
    report = {
        "schema": SCHEMA,
        "version": config.version,
        "subcommand": config.subcommand,
        "config": config.to_dict(),
        "input_hash": content_hash({"config": config.to_dict(), "inputs": inputs}),
    }
    report.update(to_jsonable(body))
    return report


def save_json_report(filepath, payload):
    try:
        Path(filepath).parent.mkdir(parents=True, exist_ok=True)
        with open(filepath, "w", encoding="utf-8") as f:
            json.dump(to_jsonable(payload), f, indent=2, sort_keys=True)
            f.write("\n")
        Log.info(f"JSON report saved to {filepath}")
        return True
    except OSError as e:
        raise ReportWriteError(f"cannot write JSON report {filepath}: {e}", path=str(filepath)) from e


def save_csv_report(filepath, results_list, fieldnames):
    try:
        Path(filepath).parent.mkdir(parents=True, exist_ok=True)
        with open(filepath, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=fieldnames, extrasaction="ignore")
            writer.writeheader()
            writer.writerows(to_jsonable(results_list))
        Log.info(f"CSV report saved to {filepath}")
        return True
    except OSError as e:
        raise ReportWriteError(f"cannot write CSV report {filepath}: {e}", path=str(filepath)) from e
