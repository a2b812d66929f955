"""Shared fixtures: the two bundled fixture domains, loaded once per run."""

import pytest

from reflect_machine.evidence import build_evidence
from reflect_machine.fixtures import load_fixture


@pytest.fixture(scope="session")
def health():
    return load_fixture("health")


@pytest.fixture(scope="session")
def education():
    return load_fixture("education")


def bundle_for(fx, case_name="base"):
    """Run build_evidence for one named case of a fixture set."""
    return build_evidence(
        fx.model,
        fx.cases[case_name],
        datasheet=fx.datasheet,
        model_card=fx.model_card,
        background=fx.background,
        cfg=fx.cfg,
    )


@pytest.fixture(scope="session")
def health_base_bundle(health):
    return bundle_for(health, "base")


@pytest.fixture(scope="session")
def health_outlier_bundle(health):
    return bundle_for(health, "outlier")


@pytest.fixture(scope="session")
def health_incomplete_bundle(health):
    return bundle_for(health, "incomplete")


@pytest.fixture(scope="session")
def education_bundle(education):
    return bundle_for(education, "base")
