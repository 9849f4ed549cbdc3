from app.schemas.records import (
    DeleteRequest,
    InsertRequest,
    SelectRequest,
    SelectResponse,
    WriteResponse,
)

__all__ = [
    "SelectRequest",
    "InsertRequest",
    "DeleteRequest",
    "SelectResponse",
    "WriteResponse",
]
