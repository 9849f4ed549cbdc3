from fastapi import APIRouter, Depends, status

from app.dependencies.cachedb import get_records_service
from app.schemas.records import (
    DeleteRequest,
    InsertRequest,
    SelectRequest,
    SelectResponse,
    WriteResponse,
)
from app.services.records_service import RecordsService

router = APIRouter(prefix="/records", tags=["records"])


@router.post(
    "/select",
    response_model=SelectResponse,
    summary="Select a subspace",
    description="Rows matching the constraints, served from the local cache, the global cache or the table.",
)
async def select_records(
    body: SelectRequest,
    service: RecordsService = Depends(get_records_service),
):
    """
    Select through the caching wrapper.

    - **where**: Column name to exact value; other columns are unconstrained
    - **ranges**: Column name to inclusive integer bounds (range columns only)
    - **extra**: Opaque text distinguishing queries with equal subspaces
    """
    return await service.select(body)


@router.post(
    "/insert",
    response_model=WriteResponse,
    status_code=status.HTTP_201_CREATED,
    summary="Insert a record",
    description="Insert a record and invalidate every cached result whose subspace contains it.",
)
async def insert_record(
    body: InsertRequest,
    service: RecordsService = Depends(get_records_service),
):
    return await service.insert(body)


@router.post(
    "/delete",
    response_model=WriteResponse,
    summary="Delete a subspace",
    description="Delete every row matching the constraints and invalidate intersecting results.",
)
async def delete_records(
    body: DeleteRequest,
    service: RecordsService = Depends(get_records_service),
):
    return await service.delete(body)
