"""Prompt rendering and model-driven prompt sampling.

The prompt grammar (documented in docs/FORMATS.md): the style keyword,
then every discrete gene value as an ``attribute:value`` token in schema
order (multi values in domain order), then one ``<lora:NAME:WEIGHT>``
adapter tag per continuous attribute, all comma-joined. Rendering is a
pure function: the same chromosome always yields byte-identical text.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .genome import (
    Chromosome,
    Individual,
    Population,
    check_valid,
    domain_order,
    random_chromosome,
)
from .preference import PreferenceModel
from .schema import CONTINUOUS, MULTI_DISCRETE, SINGLE_DISCRETE, AttributeSchema

# Attribute modeled as one signed axis realized by two adapters; the sign
# picks the adapter and the magnitude is the weight.
DUAL_ADAPTER_ATTRIBUTE = "parallel"


@dataclass(frozen=True)
class PromptString:
    text: str
    negative_text: str = ""


def _adapter_tag(attr, value: float) -> str:
    if attr.name == DUAL_ADAPTER_ATTRIBUTE and attr.pole_labels is not None:
        lo_label, hi_label = attr.pole_labels
        suffix = lo_label if value < 0 else hi_label
        return f"<lora:{attr.lora_name}_{suffix}:{abs(value):.2f}>"
    return f"<lora:{attr.lora_name}:{value:.2f}>"


def render_prompt(schema: AttributeSchema, c: Chromosome) -> PromptString:
    """Render a valid chromosome into its deterministic prompt text."""
    check_valid(schema, c)
    parts = [schema.style_keyword]
    for attr in schema.attributes:
        if attr.kind == SINGLE_DISCRETE:
            parts.append(f"{attr.name}:{c.single[attr.name]}")
        elif attr.kind == MULTI_DISCRETE:
            for value in domain_order(attr.values, c.multi[attr.name]):
                parts.append(f"{attr.name}:{value}")
    for attr in schema.attributes:
        if attr.kind == CONTINUOUS:
            parts.append(_adapter_tag(attr, c.continuous[attr.name]))
    return PromptString(text=", ".join(parts))


def build_individual(schema: AttributeSchema, c: Chromosome, index: int) -> Individual:
    return Individual(chromosome=c, prompt=render_prompt(schema, c).text, index=index)


def build_population(schema: AttributeSchema, chromosomes: list[Chromosome],
                     generation_number: int) -> Population:
    return Population(
        generation_number=generation_number,
        individuals=tuple(
            build_individual(schema, c, i) for i, c in enumerate(chromosomes)
        ),
    )


def init_population(schema: AttributeSchema, model: PreferenceModel, n: int,
                    rng: random.Random) -> list[Chromosome]:
    """n independent model-driven draws (the initial generation)."""
    if n < 2:
        raise ValueError(f"population size must be >= 2, got {n}")
    return [random_chromosome(schema, model, rng) for _ in range(n)]


def sample_prompt(schema: AttributeSchema, model: PreferenceModel,
                  rng: random.Random) -> tuple[Chromosome, PromptString]:
    """One prompt from the (optimized) model — the prompting-free generator."""
    c = random_chromosome(schema, model, rng)
    return c, render_prompt(schema, c)
