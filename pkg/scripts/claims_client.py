"""
Clifford Gluing remote claims client.

Supports:
- Listing the claims registered on a running server (optionally one suite)
- Running claims remotely with a run configuration read from a key=value file
"""

import argparse
import json
import os
import sys

import httpx
from dotenv import load_dotenv

from clifford_gluing.core.config import RunConfig

# Load environment variables from .env file
load_dotenv()

# ANSI Colors for better UX
CYAN = "\033[96m"
GREEN = "\033[92m"
YELLOW = "\033[93m"
RED = "\033[91m"
RESET = "\033[0m"
BOLD = "\033[1m"


def list_claims(client: httpx.Client, suite: str | None = None) -> list[dict]:
    """Fetch the claim registry."""
    params = {"suite": suite} if suite else None
    response = client.get("/api/v1/claims", params=params)
    response.raise_for_status()
    return response.json()


def run_claim(client: httpx.Client, claim_id: str, config: RunConfig | None = None) -> dict:
    """Run one claim on the server and return its report row."""
    payload = config.model_dump(mode="json") if config else None
    response = client.post(f"/api/v1/claims/{claim_id}/run", json=payload)
    response.raise_for_status()
    return response.json()


def print_row(row: dict) -> None:
    if row["passed"]:
        status = f"{GREEN}PASS{RESET}"
    elif not row.get("gating", True):
        status = f"{YELLOW}WARN{RESET}"
    else:
        status = f"{RED}FAIL{RESET}"
    print(f"{status} {CYAN}{row['claim_id']}{RESET} ({row['anchor']})")
    print(f"     measured: {json.dumps(row['measured'])}  expected: {json.dumps(row['expected'])}")


def main():
    """Main entry point."""
    parser = argparse.ArgumentParser(description="Clifford Gluing remote claims client")
    parser.add_argument("--url", default=os.getenv("CLIFFORD_GLUING_URL", "http://localhost:8000"), help="API Base URL")
    parser.add_argument("--suite", help="Run (or list) the claims of one suite")
    parser.add_argument("--claim", action="append", help="Claim id to run (repeatable)")
    parser.add_argument("--config", help="key=value run configuration file")
    parser.add_argument("--list", action="store_true", help="List claims and exit")
    parser.add_argument("--timeout", type=float, default=600.0, help="Per-request timeout in seconds")

    args = parser.parse_args()
    config = RunConfig.from_file(args.config) if args.config else None

    with httpx.Client(base_url=args.url, timeout=args.timeout) as client:
        try:
            claims = list_claims(client, args.suite)
        except httpx.HTTPError as exc:
            print(f"{RED}Could not reach {args.url}: {exc}{RESET}")
            sys.exit(3)

        if args.list:
            for claim in claims:
                print(f"{CYAN}{claim['claim_id']}{RESET} [{','.join(claim['suites'])}] {claim['anchor']}")
            return

        targets = args.claim or [claim["claim_id"] for claim in claims]
        failed = 0
        for claim_id in targets:
            try:
                row = run_claim(client, claim_id, config)
            except httpx.HTTPStatusError as exc:
                print(f"{RED}{claim_id}: HTTP {exc.response.status_code} {exc.response.text}{RESET}")
                failed += 1
                continue
            print_row(row)
            failed += int(not row["passed"] and row.get("gating", True))

    print(f"\n{BOLD}{len(targets) - failed}/{len(targets)} claims passed{RESET}")
    sys.exit(1 if failed else 0)


if __name__ == "__main__":
    main()
