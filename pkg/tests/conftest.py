"""Shared fixtures: expensive rules and fields are built once per session."""

import numpy as np
import pytest

from sphere_blowup.ansatz import AnsatzParams, ansatz_field
from sphere_blowup.configurations import reference_config
from sphere_blowup.quadrature import build_rule

LAMBDAS = (0.1, 0.05, 0.025)

_ACCEPTANCE_LINES = []


def record_acceptance(line: str) -> None:
    _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.line(line)


@pytest.fixture(scope="session")
def tetra():
    return reference_config("tetrahedron4")


@pytest.fixture(scope="session")
def plain_rule():
    return build_rule(64)


@pytest.fixture(scope="session")
def rule_for(tetra):
    cache = {}

    def get(lam: float, level: int = 0):
        key = (lam, level)
        if key not in cache:
            cache[key] = build_rule(64, centers=tetra, lam=lam, level=level)
        return cache[key]

    return get


@pytest.fixture(scope="session")
def params_for():
    cache = {}

    def get(lam: float, eps: float = 0.0):
        key = (lam, eps)
        if key not in cache:
            cache[key] = AnsatzParams(eps=eps, lam=lam)
        return cache[key]

    return get


@pytest.fixture(scope="session")
def ansatz_for(params_for):
    cache = {}

    def get(lam: float):
        if lam not in cache:
            cache[lam] = ansatz_field(params_for(lam))
        return cache[lam]

    return get


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260821)
