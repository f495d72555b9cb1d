"""Request/response models of the HTTP service.

The request body of every compute endpoint is the experiment config
itself (``spadesim.config.ExperimentConfig``); these models describe what
comes back.
"""

from __future__ import annotations

from typing import List, Optional, Union

from pydantic import BaseModel

Cell = Union[float, int, str]


class TableModel(BaseModel):
    name: str
    columns: List[str]
    rows: List[List[Cell]]
    csv: str


class ManifestModel(BaseModel):
    command: str
    seed: int
    config_hash: str
    package_version: str
    git_revision: Optional[str] = None
    wall_time_s: float


class SweepResponse(BaseModel):
    tables: List[TableModel]
    manifest: ManifestModel
    config: dict


class ValidationIssue(BaseModel):
    location: str
    message: str


class ValidationResponse(BaseModel):
    valid: bool
    issues: List[ValidationIssue] = []


class HoloResponse(BaseModel):
    tables: List[TableModel]
    manifest: ManifestModel
    config: dict
    self_check_passed: bool
    max_fraction_error: float
    max_leakage: float
    j1_residual: float
    max_c1_error: float
    hologram_png_base64: str
    sidecar: dict


class HealthResponse(BaseModel):
    status: str
    version: str
