from pydantic import BaseModel, ConfigDict, Field, field_validator
from typing import Optional, Sequence, Tuple


class ColumnSpec(BaseModel):
    """A single column of the cached table."""
    name: str = Field(..., min_length=1)
    # Value used for "anything" positions when constructing intersection witnesses
    minimal: Optional[str] = "0"
    # Set for integer columns handled by the dyadic range scheme
    range_width: Optional[int] = Field(None, ge=1, le=32)

    model_config = ConfigDict(frozen=True)

    @property
    def is_range(self) -> bool:
        return self.range_width is not None


class TableSchema(BaseModel):
    """Schema of the single k-column table."""
    columns: Tuple[ColumnSpec, ...] = Field(..., min_length=1)

    model_config = ConfigDict(frozen=True)

    @field_validator("columns")
    @classmethod
    def _unique_names(cls, columns: Tuple[ColumnSpec, ...]) -> Tuple[ColumnSpec, ...]:
        names = [c.name for c in columns]
        if len(set(names)) != len(names):
            raise ValueError(f"column names must be unique: {names}")
        return columns

    @property
    def k(self) -> int:
        return len(self.columns)

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    @property
    def minimal_values(self) -> Tuple[Optional[str], ...]:
        return tuple(c.minimal for c in self.columns)

    @property
    def range_widths(self) -> dict:
        """Column index -> bit width, for dyadic columns only."""
        return {i: c.range_width for i, c in enumerate(self.columns) if c.is_range}

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown column {name!r}") from None

    @classmethod
    def from_names(cls, names: Sequence[str]) -> "TableSchema":
        return cls(columns=tuple(ColumnSpec(name=n) for n in names))

    @classmethod
    def parse(cls, text: str) -> "TableSchema":
        """
        Parse "user,game,date" or "user,score:range:8".

        Args:
            text: Comma separated column declarations

        Returns:
            TableSchema: Parsed schema
        """
        columns = []
        for item in text.split(","):
            item = item.strip()
            if not item:
                continue
            name, _, annotation = item.partition(":")
            width = None
            if annotation:
                kind, _, bits = annotation.partition(":")
                if kind != "range" or not bits.isdigit():
                    raise ValueError(f"bad column annotation {annotation!r}; expected range:<w>")
                width = int(bits)
            columns.append(ColumnSpec(name=name, range_width=width))
        return cls(columns=tuple(columns))
