"""Schema of the JSON run summary."""

from typing import Dict, List, Optional, Union

import pydantic

Metric = Optional[Union[bool, int, float, str, List[Optional[float]]]]


class Criterion(pydantic.BaseModel):
    """One acceptance criterion of the verify harness."""

    model_config = pydantic.ConfigDict(extra="forbid")

    id: int = pydantic.Field(ge=1)
    name: str
    passed: bool
    metrics: Dict[str, Metric] = {}
    message: str = ""


class Summary(pydantic.BaseModel):
    """Summary of a curveflow run, written as summary.json."""

    model_config = pydantic.ConfigDict(extra="forbid")

    command: str
    experiment: str
    resolution: str
    settings_hash: str = pydantic.Field(pattern=r"^[0-9a-f]{8}$")
    artifacts: List[str] = []
    metrics: Dict[str, Metric] = {}
    criteria: List[Criterion] = []
    passed: Optional[bool] = None
