"""Shared fixtures: deterministic corpora and session-scoped result caches."""

from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings

import naive
from fairdiv import (
    Allocation,
    exact_mnw,
    pipeline_additive,
    random_additive,
    budget_additive,
    xos,
)

settings.register_profile(
    "fairdiv",
    max_examples=60,
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("fairdiv")


CORPUS1_SIZE = 200
CORPUS3_SIZE = 100

# one "[criterion N] label: PASS/FAIL" line per acceptance criterion,
# appended by tests/test_acceptance.py and echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def build_corpus1():
    """200 random additive instances (n in 2..3, m in 4..7, values 0..10)
    where every agent can be given positive value simultaneously."""
    out = []
    candidate = 0
    while len(out) < CORPUS1_SIZE:
        n = 2 + candidate % 2
        m = 4 + candidate % 4
        instance = random_additive(n, m, 10, seed=candidate)
        if naive.nw_positive_possible(instance):
            out.append(instance)
        candidate += 1
    return out


def build_corpus3():
    """100 subadditive instances: 50 XOS and 50 budget-additive, n in 2..3,
    m in 4..6."""
    out = []
    for i in range(50):
        out.append(xos(2 + i % 2, 4 + i % 3, clauses=3, seed=i))
    for i in range(50):
        out.append(budget_additive(2 + i % 2, 4 + (i + 1) % 3, cap=15, seed=100 + i))
    return out


def random_complete(instance, seed: int) -> Allocation:
    """A seeded uniformly random complete allocation."""
    rng = random.Random(seed)
    masks = [0] * instance.n
    for g in range(instance.m):
        masks[rng.randrange(instance.n)] |= 1 << g
    return Allocation.from_masks(masks, instance.m)


@pytest.fixture(scope="session")
def corpus1():
    return build_corpus1()


@pytest.fixture(scope="session")
def corpus3():
    return build_corpus3()


@pytest.fixture(scope="session")
def mnw_for():
    """Session cache of exact max-product results, keyed by corpus slot."""
    cache: dict = {}

    def get(key, instance):
        if key not in cache:
            cache[key] = exact_mnw(instance)
        return cache[key]

    return get


@pytest.fixture(scope="session")
def pipeline_for():
    """Session cache of additive pipeline runs, keyed by (corpus slot, alpha)."""
    cache: dict = {}

    def get(key, instance, alpha: Fraction):
        full = (key, alpha)
        if full not in cache:
            cache[full] = pipeline_additive(instance, alpha)
        return cache[full]

    return get
