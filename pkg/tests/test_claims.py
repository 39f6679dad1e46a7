"""
Tests for the claim registry and the quick claims.
"""

import pytest

from clifford_gluing.core.config import RunConfig
from clifford_gluing.core.errors import InvalidArgumentError, NearSingularError
from clifford_gluing.services import curvature_engine, surface_assembly
from clifford_gluing.services.claims import SUITES, ClaimRegistry, Outcome, claim_registry


class TestRegistry:
    """Registration, lookup and suites."""

    def test_registration(self):
        registry = ClaimRegistry()

        @registry.register("demo.ok", "plumbing", suites=("quick",))
        def ok(config):
            return Outcome(1, 1, True)

        assert registry.get("demo.ok").suites == ("quick",)
        assert [claim.claim_id for claim in registry.suite("quick")] == ["demo.ok"]
        assert registry.suite("acceptance") == []
        assert registry.anchors() == {"demo.ok": "plumbing"}

    def test_duplicate_id(self):
        registry = ClaimRegistry()
        registry.register("demo.ok", "plumbing")(lambda config: Outcome(1, 1, True))
        with pytest.raises(ValueError, match="twice"):
            registry.register("demo.ok", "plumbing")(lambda config: Outcome(1, 1, True))

    def test_unknown_suite(self):
        registry = ClaimRegistry()
        with pytest.raises(ValueError):
            registry.register("demo.ok", "plumbing", suites=("nightly",))(lambda config: Outcome(1, 1, True))
        with pytest.raises(ValueError):
            registry.suite("nightly")

    def test_unknown_claim(self):
        with pytest.raises(KeyError, match="unknown claim"):
            ClaimRegistry().get("missing")

    def test_run_wraps_outcome(self):
        registry = ClaimRegistry()
        registry.register("demo.ok", "plumbing", gating=False)(lambda config: Outcome(config.seed, 0, True, {"x": 1}))
        row = registry.run("demo.ok", RunConfig(seed=5))
        assert row.passed
        assert row.measured == 5
        assert not row.gating
        assert row.details == {"x": 1}
        assert row.runtime >= 0

    @pytest.mark.parametrize("error,exit_code", [(InvalidArgumentError, 2), (NearSingularError, 3)])
    def test_library_errors_become_failed_rows(self, error, exit_code):
        registry = ClaimRegistry()

        @registry.register("demo.broken", "plumbing")
        def broken(config):
            raise error("boom")

        row = registry.run("demo.broken")
        assert not row.passed
        assert row.details == {"error": error.__name__, "message": "boom", "exit_code": exit_code}

    def test_internal_errors_become_failed_rows(self):
        registry = ClaimRegistry()

        @registry.register("demo.bug", "plumbing")
        def bug(config):
            raise ZeroDivisionError("division by zero")

        @registry.register("demo.ok", "plumbing")
        def ok(config):
            return Outcome(1, 1, True)

        rows = [registry.run(claim_id) for claim_id in ("demo.bug", "demo.ok")]
        assert not rows[0].passed
        assert rows[0].details["error"] == "ZeroDivisionError"
        assert rows[0].details["exit_code"] == 3
        assert rows[1].passed


class TestRegisteredClaims:
    """The shipped registry."""

    def test_every_suite_has_claims(self):
        for suite in SUITES:
            assert claim_registry.suite(suite)

    def test_anchors_are_sorted_and_nonempty(self):
        anchors = claim_registry.anchors()
        assert list(anchors) == sorted(anchors)
        assert all(anchors.values())

    def test_experimental_claims_do_not_gate(self):
        assert not claim_registry.get("perturb.experimental").gating

    @pytest.mark.parametrize("claim_id", ["clifford_torus.constants", "sphere.pullback_identity", "hemisphere.quick"])
    def test_quick_claims_pass(self, claim_id):
        row = claim_registry.run(claim_id, RunConfig(seed=0))
        assert row.passed, row.details

    def test_flat_torus_claim(self):
        row = claim_registry.run("flat_torus.kernel")
        assert row.passed
        assert row.measured <= 1e-12

    @pytest.mark.slow
    def test_quick_suite(self):
        rows = [claim_registry.run(claim.claim_id) for claim in claim_registry.suite("quick")]
        assert all(row.passed for row in rows if row.gating)


class TestEstimateClaims:
    """Gating of the toral and tower estimate claims over the m sweep."""

    @pytest.fixture
    def stub_surfaces(self, monkeypatch):
        monkeypatch.setattr(surface_assembly, "assemble", lambda spec, resolution, uniform: spec.m)

    @pytest.mark.parametrize("rate, passed", [(0.95, True), (0.5, False)])
    def test_toral_claim_gates_fitted_rate(self, stub_surfaces, monkeypatch, rate, passed):
        def toral(m, b):
            m_c = 2 * m
            return {"C1": {"m_C": m_c, "interior_deviation": 2e-6, "fitted_rate": rate * m_c, "sup_weighted_A": 1.0 / m_c, "sup_weighted_H": 0.0}}

        monkeypatch.setattr(curvature_engine, "verify_toral_estimates", toral)
        row = claim_registry.run("initial_surface.toral_estimates")
        assert row.passed is passed
        assert row.details["rate_over_m_C"] == pytest.approx(rate)

    def test_toral_claim_gates_interior_deviation(self, stub_surfaces, monkeypatch):
        def toral(m, b):
            return {"C1": {"m_C": 2 * m, "interior_deviation": 5e-4, "fitted_rate": 2.0 * m, "sup_weighted_A": 0.1, "sup_weighted_H": 0.0}}

        monkeypatch.setattr(curvature_engine, "verify_toral_estimates", toral)
        assert not claim_registry.run("initial_surface.toral_estimates").passed

    @pytest.mark.parametrize("power, passed", [(-0.5, True), (1.0, False)])
    def test_tower_claim_needs_stable_constant(self, stub_surfaces, monkeypatch, power, passed):
        monkeypatch.setattr(
            curvature_engine, "verify_tower_estimates", lambda m: {"C1": {"m_C": 2 * m, "metric": m**power, "second_form": 0.0}}
        )
        row = claim_registry.run("initial_surface.tower_estimates")
        assert row.passed is passed

    @pytest.mark.slow
    @pytest.mark.parametrize("claim_id", ["initial_surface.toral_estimates", "initial_surface.tower_estimates"])
    def test_estimates_hold(self, claim_id):
        row = claim_registry.run(claim_id, RunConfig())
        assert row.passed, row.details
