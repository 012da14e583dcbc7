"""Request and response shapes for the HTTP service.

Rows travel as JSON numbers except for non-finite values, which use the
same ``"inf"`` / ``"-inf"`` string sentinels as the JSON table format, so
a response round-trips through :func:`kerrsim.table.table_from_json_dict`.
"""

from typing import Literal, Optional, Union

from pydantic import BaseModel, Field

Cell = Union[str, float]


class RunRequest(BaseModel):
    """One run. ``config`` is the same document the CLI reads from YAML;
    ``preset`` merges underneath it. The plumbing fields are tri-state:
    ``None`` defers to the document's own keys, a value overrides them.
    """

    config: Optional[dict] = None
    preset: Optional[str] = None
    check_convergence: Optional[bool] = None
    kappa_convention: Optional[Literal["geff", "g"]] = None
    threads: Optional[int] = Field(default=None, ge=1, le=32)
    check_positivity: bool = False


class ConvergenceReport(BaseModel):
    passed: bool
    max_difference: float
    threshold: float
    columns: list[str]
    differences: list[Cell]


class RunResponse(BaseModel):
    command: str
    columns: list[str]
    rows: list[list[Cell]]
    metadata: dict
    convergence: Optional[ConvergenceReport] = None


class PresetInfo(BaseModel):
    name: str
    command: str


class HealthResponse(BaseModel):
    status: str
    version: str
