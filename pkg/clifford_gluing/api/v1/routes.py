from fastapi import APIRouter

from clifford_gluing.api.v1.endpoints import claims

api_router = APIRouter()
api_router.include_router(claims.router, prefix="/claims", tags=["claims"])
