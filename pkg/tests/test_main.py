from clifford_gluing.services.claims import claim_registry


def test_health_check(client):
    response = client.get("/health")
    assert response.status_code == 200
    data = response.json()
    assert data["status"] == "healthy"
    assert data["claims"] == len(claim_registry.get_claims())


def test_list_claims(client):
    response = client.get("/api/v1/claims")
    assert response.status_code == 200
    ids = [claim["claim_id"] for claim in response.json()]
    assert ids == sorted(claim_registry.get_claims())


def test_list_claims_by_suite(client):
    response = client.get("/api/v1/claims", params={"suite": "quick"})
    assert response.status_code == 200
    claims = response.json()
    assert claims
    assert all("quick" in claim["suites"] for claim in claims)


def test_unknown_suite_is_bad_request(client):
    response = client.get("/api/v1/claims", params={"suite": "nightly"})
    assert response.status_code == 400


def test_unknown_claim_is_not_found(client):
    response = client.post("/api/v1/claims/no.such.claim/run")
    assert response.status_code == 404


def test_run_claim(client):
    response = client.post("/api/v1/claims/clifford_torus.constants/run")
    assert response.status_code == 200
    row = response.json()
    assert row["claim_id"] == "clifford_torus.constants"
    assert row["passed"] is True
    assert row["details"]["constant_defect"] <= 1e-10


def test_run_claim_with_config(client):
    response = client.post("/api/v1/claims/hemisphere.quick/run", json={"eps": 0.001, "seed": 3})
    assert response.status_code == 200
    assert response.json()["passed"] is True


def test_invalid_config_is_rejected(client):
    response = client.post("/api/v1/claims/hemisphere.quick/run", json={"eps": 2.0})
    assert response.status_code == 422


def test_openapi_is_versioned(client):
    response = client.get("/api/v1/openapi.json")
    assert response.status_code == 200
    assert "/api/v1/claims/{claim_id}/run" in response.json()["paths"]
