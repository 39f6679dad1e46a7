import json

import numpy as np
import pytest
from pydantic import ValidationError

from clifford_gluing.schemas.report import RunReport, VerificationReport
from clifford_gluing.schemas.surface import InitialSurfaceSpec


class TestInitialSurfaceSpec:
    """Surface data, parsing and closed-form genus."""

    def test_parse_round_trip_label(self):
        for label in ("M(2,4,1,1,0)", "M(3,2,1,2,1)", "N(2,1,1,1,1,0,0)", "N(3,2,2,1,3,1,0)"):
            assert InitialSurfaceSpec.parse(label).label == label

    def test_parse_tolerates_spaces(self):
        assert InitialSurfaceSpec.parse(" M(2, 1, 1, 1, 0) ") == InitialSurfaceSpec.M(2, 1, 1, 1, 0)

    @pytest.mark.parametrize("text", ["X(2,1,1,1,0)", "M(2,1,1,1)", "N(2,1,1)", "M2,1,1,1,0", "M(a,1,1,1,0)"])
    def test_parse_rejects(self, text):
        with pytest.raises(ValueError):
            InitialSurfaceSpec.parse(text)

    def test_genus_formulas(self):
        assert InitialSurfaceSpec.M(2, 1, 1, 1, 0).expected_genus() == 5
        assert InitialSurfaceSpec.M(3, 2, 1, 2, 0).expected_genus() == 37
        assert InitialSurfaceSpec.N(2, 1, 1, 1, 1).expected_genus() == 25
        assert InitialSurfaceSpec.N(2, 1, 2, 1, 1).expected_genus() == 33
        assert InitialSurfaceSpec.N(3, 1, 1, 1, 1).expected_genus() == 61

    def test_m_needs_coprime_n(self):
        with pytest.raises(ValidationError, match="relatively prime"):
            InitialSurfaceSpec.M(2, 1, 2, 2)

    def test_n_needs_coprime_triple(self):
        with pytest.raises(ValidationError):
            InitialSurfaceSpec.N(2, 1, 2, 2, 4)
        assert InitialSurfaceSpec.N(2, 1, 2, 2, 3).label == "N(2,1,2,2,3,0,0)"

    def test_field_ranges(self):
        with pytest.raises(ValidationError):
            InitialSurfaceSpec.M(1, 1, 1, 1)
        with pytest.raises(ValidationError):
            InitialSurfaceSpec.M(2, 0, 1, 1)
        with pytest.raises(ValidationError):
            InitialSurfaceSpec.M(2, 1, 1, 1, sigma=2)

    def test_frozen(self):
        spec = InitialSurfaceSpec.M(2, 1, 1, 1)
        with pytest.raises(ValidationError):
            spec.k = 3


class TestReports:
    """Report rows and JSON envelopes."""

    def test_numpy_values_become_plain(self):
        row = VerificationReport(
            claim_id="x.y",
            anchor="plumbing",
            measured=np.float64(1.5),
            expected=np.array([1, 2]),
            passed=True,
            details={"n": np.int64(3), "bad": float("nan"), 2: (np.float32(0.5),)},
        )
        assert row.measured == 1.5
        assert row.expected == [1, 2]
        assert row.details == {"n": 3, "bad": "nan", "2": [0.5]}

    def test_empty_anchor_rejected(self):
        with pytest.raises(ValidationError):
            VerificationReport(claim_id="x", anchor="", passed=True)

    def test_passed_ignores_non_gating_rows(self):
        report = RunReport(command="verify", subject="quick")
        report.add(VerificationReport(claim_id="a", anchor="plumbing", passed=True))
        report.add(VerificationReport(claim_id="b", anchor="plumbing", passed=False, gating=False))
        assert report.passed
        report.add(VerificationReport(claim_id="c", anchor="plumbing", passed=False))
        assert not report.passed

    def test_json_is_deterministic_without_timing(self):
        def build(runtime):
            report = RunReport(command="tower", subject="k=2", seed=1, data={"b": 1, "a": np.arange(2)})
            report.add(VerificationReport(claim_id="a", anchor="plumbing", passed=True, runtime=runtime))
            return report

        first, second = build(0.1).to_json(), build(9.9).to_json()
        assert first == second
        payload = json.loads(first)
        assert "runtime" not in payload["rows"][0]
        assert payload["passed"] is True
        assert payload["data"] == {"a": [0, 1], "b": 1}

    def test_json_with_timing(self):
        report = RunReport(command="tower")
        report.add(VerificationReport(claim_id="a", anchor="plumbing", passed=True, runtime=0.25))
        assert json.loads(report.to_json(include_timing=True))["rows"][0]["runtime"] == 0.25
