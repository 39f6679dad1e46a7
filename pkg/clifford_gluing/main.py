"""
Clifford Gluing - FastAPI application entry point.

Exposes the claim registry over HTTP:
- GET /health
- GET /api/v1/claims
- POST /api/v1/claims/{claim_id}/run
"""

import logging
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from clifford_gluing.api.v1.routes import api_router
from clifford_gluing.core.config import settings
from clifford_gluing.core.errors import CliffordGluingError
from clifford_gluing.core.log import configure_logging
from clifford_gluing.services.claims import claim_registry

configure_logging()
logger = logging.getLogger("clifford_gluing.api")


@asynccontextmanager
async def lifespan(app: FastAPI):
    """
    Application lifespan manager.

    Startup:
    - Log the size of the claim registry
    """
    logger.info("Starting up %s with %d claims", settings.PROJECT_NAME, len(claim_registry.get_claims()))
    yield
    logger.info("Shutdown complete")


app = FastAPI(
    title=settings.PROJECT_NAME,
    description="Construction and verification of desingularized Clifford tori in the three-sphere",
    version="0.1.0",
    openapi_url=f"{settings.API_V1_STR}/openapi.json",
    lifespan=lifespan,
)


@app.exception_handler(CliffordGluingError)
async def library_error_handler(request: Request, exc: CliffordGluingError):
    """Invalid-input errors become 400, numerical failures 500."""
    status_code = 400 if exc.exit_code == 2 else 500
    logger.warning("%s on %s: %s", type(exc).__name__, request.url.path, exc)
    return JSONResponse(status_code=status_code, content={"detail": str(exc), "error": type(exc).__name__})


@app.middleware("http")
async def catch_exceptions_middleware(request: Request, call_next):
    """
    Global exception handler to prevent internal error details leaking.

    Logs full exception for debugging, returns generic error to client.
    """
    try:
        return await call_next(request)
    except Exception:
        logger.exception("Unhandled exception during request to %s", request.url.path)
        return JSONResponse(
            status_code=500,
            content={"detail": "Internal server error"},
        )


# =============================================================================
# Routes
# =============================================================================

app.include_router(api_router, prefix=settings.API_V1_STR)


@app.get("/health")
async def health_check():
    """Health check endpoint for container orchestration."""
    return {"status": "healthy", "claims": len(claim_registry.get_claims())}
