from __future__ import annotations

import random

import pytest

from promptga import engine as ga
from promptga.schema import (
    CONTINUOUS,
    MULTI_DISCRETE,
    SINGLE_DISCRETE,
    AttributeDef,
    AttributeSchema,
    kandinsky_default,
)


@pytest.fixture
def schema() -> AttributeSchema:
    return kandinsky_default()


@pytest.fixture
def config() -> ga.GAConfig:
    return ga.GAConfig()


@pytest.fixture
def model(schema, config):
    return ga.fresh_model(schema, config)


@pytest.fixture
def rng() -> random.Random:
    return random.Random(42)


def make_random_schema(rng: random.Random) -> AttributeSchema:
    """Small valid schema with at least one attribute of every kind."""
    attrs: list[AttributeDef] = []
    counter = 0

    def token() -> str:
        nonlocal counter
        counter += 1
        return f"a{counter}"

    for _ in range(rng.randint(1, 2)):
        n_values = rng.randint(2, 5)
        attrs.append(AttributeDef(
            name=token(), kind=SINGLE_DISCRETE,
            values=tuple(f"v{counter}x{j}" for j in range(n_values))))
    for _ in range(rng.randint(1, 2)):
        n_values = rng.randint(3, 6)
        attrs.append(AttributeDef(
            name=token(), kind=MULTI_DISCRETE,
            values=tuple(f"v{counter}x{j}" for j in range(n_values)),
            select_count=rng.randint(1, n_values - 1)))
    for _ in range(rng.randint(1, 2)):
        lo = rng.uniform(-4.0, 0.0)
        hi = lo + rng.uniform(0.5, 4.0)
        attrs.append(AttributeDef(
            name=token(), kind=CONTINUOUS, range=(lo, hi),
            pole_labels=("low", "high"), lora_name=f"adapter_{counter}"))
    rng.shuffle(attrs)
    return AttributeSchema(style_keyword="teststyle", attributes=tuple(attrs))
