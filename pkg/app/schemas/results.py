from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, model_validator

from app import __version__


class ResultMetadata(BaseModel):
    """Header of every result table; enough to re-run the command exactly."""
    command: str
    artifact_version: str = __version__
    scenario_hash: Optional[str] = None
    scenario_name: Optional[str] = None
    seed: Optional[int] = None
    convention: Optional[str] = None
    created_at: str = Field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))
    extra: Dict[str, Any] = Field(default_factory=dict)

    def items(self) -> List[tuple]:
        """Flat (key, value) pairs in a stable order, skipping unset fields."""
        pairs = [
            (key, value)
            for key, value in self.model_dump(exclude={"extra"}).items()
            if value is not None
        ]
        return pairs + sorted(self.extra.items())


class ResultTable(BaseModel):
    """Rows with a fixed column set per command."""
    metadata: ResultMetadata
    columns: List[str]
    rows: List[List[Any]] = Field(default_factory=list)

    @model_validator(mode="after")
    def validate_row_width(self):
        width = len(self.columns)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise ValueError(f"row {i} has {len(row)} values, expected {width}")
        return self

    def column(self, name: str) -> List[Any]:
        index = self.columns.index(name)
        return [row[index] for row in self.rows]
