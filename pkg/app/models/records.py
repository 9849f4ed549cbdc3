from sqlalchemy import Column, MetaData, String, Table, UniqueConstraint
from app.schemas.table import TableSchema


def build_records_table(schema: TableSchema, metadata: MetaData, name: str = "records") -> Table:
    """
    SQLAlchemy table holding the cached relation.

    Every column stores the serialized field value; the table is a set of
    records, so the whole row is unique.

    Args:
        schema: Table schema
        metadata: Metadata the table is registered on
        name: Table name

    Returns:
        Table: SQLAlchemy Core table
    """
    columns = [Column(c.name, String, nullable=False) for c in schema.columns]
    return Table(
        name,
        metadata,
        *columns,
        UniqueConstraint(*schema.names, name=f"uq_{name}_record"),
    )
