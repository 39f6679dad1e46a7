"""
Claim endpoints: list the registry and run single claims.

Claims are CPU-bound, so the run endpoint is a plain function and FastAPI executes
it in its threadpool.
"""

import logging

from fastapi import APIRouter, Body, HTTPException, Path, Query, status

from clifford_gluing.core.config import RunConfig
from clifford_gluing.schemas.report import ClaimInfo, VerificationReport
from clifford_gluing.services.claims import SUITES, claim_registry

logger = logging.getLogger("clifford_gluing.api")

router = APIRouter()


@router.get("", response_model=list[ClaimInfo])
async def list_claims(suite: str | None = Query(None, description="Only claims in this suite")):
    """List registered claims with their anchors, optionally filtered by suite."""
    if suite is not None and suite not in SUITES:
        raise HTTPException(
            status_code=status.HTTP_400_BAD_REQUEST,
            detail=f"Unknown suite {suite!r}; expected one of {list(SUITES)}",
        )
    claims = claim_registry.suite(suite) if suite else list(claim_registry.get_claims().values())
    return [
        ClaimInfo(
            claim_id=claim.claim_id,
            anchor=claim.anchor,
            suites=list(claim.suites),
            gating=claim.gating,
            slow=claim.slow,
        )
        for claim in sorted(claims, key=lambda c: c.claim_id)
    ]


@router.post("/{claim_id}/run", response_model=VerificationReport)
def run_claim(
    claim_id: str = Path(..., description="Dotted claim id, e.g. hemisphere.quick"),
    config: RunConfig | None = Body(None),
):
    """
    Run one claim and return its report row.

    Numerical failures inside the claim come back as a failed row with the error in
    `details`; an unknown claim id is a 404.
    """
    if claim_id not in claim_registry.get_claims():
        raise HTTPException(status_code=status.HTTP_404_NOT_FOUND, detail=f"Claim {claim_id} not found")
    logger.info("Running claim %s over HTTP", claim_id)
    return claim_registry.run(claim_id, config)
