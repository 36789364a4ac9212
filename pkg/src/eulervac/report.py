"""Machine-readable run reports and plot-ready CSV output.

CSV files are RFC-4180 with a mandatory header row and numbers at 17
significant digits, so identical configurations reproduce byte-identical
files.  JSON reports carry a schema_version and one record per check.
"""

from __future__ import annotations

import csv
import hashlib
import json
import numbers
from dataclasses import dataclass, field, asdict
from pathlib import Path

SCHEMA_VERSION = 1


def fmt17(x) -> str:
    """Render a number at 17 significant digits (full double precision)."""
    if isinstance(x, numbers.Integral):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path, header: list[str], rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL)
        w.writerow(header)
        for row in rows:
            w.writerow([c if isinstance(c, str) else fmt17(c) for c in row])


@dataclass
class CheckRecord:
    """One measured-vs-expected comparison inside a report."""

    name: str
    measured: float
    expected: float
    tolerance: float
    passed: bool
    detail: str = ""

    @staticmethod
    def close(name, measured, expected, tolerance, detail="") -> "CheckRecord":
        ok = abs(measured - expected) <= tolerance
        return CheckRecord(name, float(measured), float(expected), float(tolerance), bool(ok), detail)

    @staticmethod
    def bound(name, measured, bound, kind="le", detail="") -> "CheckRecord":
        ok = measured <= bound if kind == "le" else measured >= bound
        return CheckRecord(name, float(measured), float(bound), 0.0, bool(ok),
                           detail or f"require measured {'<=' if kind == 'le' else '>='} bound")


@dataclass
class RunReport:
    command: str
    config: dict
    checks: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)
    timing_s: float = 0.0
    schema_version: int = SCHEMA_VERSION

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, check: CheckRecord) -> CheckRecord:
        self.checks.append(check)
        return check

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "command": self.command,
            "config": self.config,
            "checks": [asdict(c) for c in self.checks],
            "artifacts": list(self.artifacts),
            "all_passed": self.all_passed,
            "timing_s": self.timing_s,
        }

    def write_json(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def config_hash(config: dict) -> str:
    """Deterministic short key for per-run output files."""
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]
