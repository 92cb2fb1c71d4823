"""Verification-suite tests at reduced scale; the acceptance tests run the
same suites at their documented full scale."""

import json

import pytest

from sian.errors import ConfigError
from sian.oracle import (
    anova_suite,
    lemma_suite,
    recovery_suite,
    run_suite,
    theory_suite,
)


class TestSuites:
    def test_lemma_suite_passes(self):
        report = lemma_suite(n_functions=12, seed=0)
        assert report.passed
        (check,) = report.checks
        assert check.max_deviation < 1e-10
        assert "12 functions" in check.detail

    def test_recovery_suite_passes(self):
        report = recovery_suite(n_seeds=5, d=6, seed=0)
        assert report.passed
        assert report.checks[0].detail == "5/5 seeds exact"

    def test_anova_suite_passes(self):
        report = anova_suite(n_functions=6, seed=0)
        assert report.passed
        assert len(report.checks) == 4
        names = [c.name for c in report.checks]
        assert "components-sum-to-function" in names
        assert "worked-example-norms" in names

    def test_theory_suite_passes(self):
        report = theory_suite(seed=0)
        assert report.passed
        by_name = {c.name: c for c in report.checks}
        assert by_name["per-degree-masses-sum-to-one"].max_deviation < 1e-12
        assert by_name["monte-carlo-spectrum-ratios"].max_deviation < 0.05

    def test_report_serializes(self):
        report = theory_suite(seed=1)
        doc = report.to_json()
        text = json.dumps(doc)
        back = json.loads(text)
        assert back["suite"] == "theory"
        assert back["passed"] is True
        assert all("max_deviation" in c for c in back["checks"])

    def test_unknown_suite_rejected(self):
        with pytest.raises(ConfigError):
            run_suite("parseval")

    def test_dispatch(self):
        report = run_suite("theory", seed=2)
        assert report.suite == "theory"
        assert report.n_failures == 0
