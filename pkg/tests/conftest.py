"""Shared fixtures: one generated world per test session.

Tests must treat the session store as read-only; anything that loads or
mutates data builds its own store.
"""

from __future__ import annotations

import pytest

from vesselsql.knowledge import load_knowledge
from vesselsql.schema import format_timestamp
from vesselsql.trafficgen import demo_now, generate, load_scenario


@pytest.fixture(scope="session")
def scenario():
    return load_scenario()


@pytest.fixture(scope="session")
def world(scenario):
    return generate(scenario)


@pytest.fixture(scope="session")
def store(world):
    return world[0]


@pytest.fixture(scope="session")
def truth(world):
    return world[1]


@pytest.fixture(scope="session")
def kb():
    return load_knowledge()


@pytest.fixture(scope="session")
def now(scenario):
    return demo_now(scenario)


@pytest.fixture(scope="session")
def now_text(now):
    return format_timestamp(now)
