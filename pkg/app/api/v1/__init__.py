from fastapi import APIRouter
from app.api.v1 import records

api_router = APIRouter()

api_router.include_router(records.router)

__all__ = ["api_router"]
