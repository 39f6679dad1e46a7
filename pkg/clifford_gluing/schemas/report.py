"""
Pydantic schemas for verification reports.

Every row names the claim it checks and the statement it is anchored to; rows that
only check artifact plumbing use the anchor "plumbing". Reports serialize to JSON with
sorted keys so identical runs produce identical bytes.
"""

from __future__ import annotations

import json
from typing import Any

import numpy as np
from pydantic import BaseModel, Field, field_validator


def _plain(value: Any) -> Any:
    """Convert numpy scalars and arrays (also nested) into JSON-native values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        value = float(value)
    if isinstance(value, float) and not np.isfinite(value):
        return str(value)
    return value


class VerificationReport(BaseModel):
    """One pass/fail row."""

    claim_id: str = Field(..., min_length=1)
    anchor: str = Field(..., min_length=1)
    measured: Any = None
    expected: Any = None
    passed: bool
    gating: bool = True  # experimental rows never fail a suite
    runtime: float = 0.0  # seconds; left out of the JSON unless timing is requested
    details: dict[str, Any] = Field(default_factory=dict)

    @field_validator("measured", "expected", "details", mode="before")
    @classmethod
    def to_plain(cls, value):
        return _plain(value)


class RunReport(BaseModel):
    """Envelope written by every CLI command."""

    command: str
    subject: str = ""
    seed: int = 0
    rows: list[VerificationReport] = Field(default_factory=list)
    data: dict[str, Any] = Field(default_factory=dict)

    @field_validator("data", mode="before")
    @classmethod
    def to_plain(cls, value):
        return _plain(value)

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows if row.gating)

    @property
    def error_code(self) -> int | None:
        """Highest exit code carried by a gating row that failed with an error, if any."""
        codes = [
            int(row.details["exit_code"])
            for row in self.rows
            if row.gating and not row.passed and "exit_code" in row.details
        ]
        return max(codes) if codes else None

    def add(self, row: VerificationReport) -> VerificationReport:
        self.rows.append(row)
        return row

    def to_json(self, include_timing: bool = False) -> str:
        exclude = None if include_timing else {"rows": {"__all__": {"runtime"}}}
        payload = self.model_dump(mode="json", exclude=exclude)
        payload["passed"] = self.passed
        return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


class ClaimInfo(BaseModel):
    """A registered claim as listed over HTTP."""

    claim_id: str
    anchor: str
    suites: list[str]
    gating: bool
    slow: bool
