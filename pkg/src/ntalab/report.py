"""Machine-readable experiment reports (JSON, schema "1")."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

SCHEMA = "1"


def jsonable(v):
    """Plain JSON types; non-finite floats become strings so the output stays strict JSON."""
    if isinstance(v, dict):
        return {str(k): jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return jsonable(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if v is None or isinstance(v, str):
        return v
    if hasattr(v, "as_dict"):
        return jsonable(v.as_dict())
    raise TypeError(f"cannot serialize {type(v).__name__}")


@dataclass
class Verdict:
    """``value <comparison> tolerance``; comparisons are "<=", ">=" or "within" (|value| <= tolerance)."""

    name: str
    value: float
    tolerance: float
    comparison: str = "<="
    note: str = ""

    @property
    def passed(self):
        v, t = float(self.value), float(self.tolerance)
        if not math.isfinite(v):
            return False
        if self.comparison == "<=":
            return v <= t
        if self.comparison == ">=":
            return v >= t
        if self.comparison == "within":
            return abs(v) <= t
        raise ValueError(f"unknown comparison {self.comparison!r}")

    def as_dict(self):
        out = {"name": self.name, "value": self.value, "tolerance": self.tolerance,
               "comparison": self.comparison, "pass": self.passed}
        if self.note:
            out["note"] = self.note
        return out


@dataclass
class ReportRecord:
    experiment: str
    name: str
    inputs: dict
    outputs: dict
    verdicts: list
    seed: int
    side_files: list = field(default_factory=list)
    wall_time: Optional[float] = None

    @property
    def passed(self):
        return all(v.passed for v in self.verdicts)

    def as_dict(self):
        """The report body; wall time is kept out so repeated runs compare byte for byte."""
        return jsonable({"schema": SCHEMA, "experiment": self.experiment, "id": self.name,
                         "seed": self.seed, "inputs": self.inputs, "outputs": self.outputs,
                         "verdicts": [v.as_dict() for v in self.verdicts], "pass": self.passed,
                         "side_files": sorted(self.side_files)})

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n"

    def write(self, out_dir):
        """Write ``<id>.json`` and ``<id>.timing.json``; returns the report path."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"{self.name}.json"
        path.write_text(self.to_json())
        if self.wall_time is not None:
            (out / f"{self.name}.timing.json").write_text(
                json.dumps({"id": self.name, "wall_time_s": round(self.wall_time, 3)}, sort_keys=True) + "\n")
        return path
