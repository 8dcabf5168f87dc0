"""Chromosome representation: heterogeneous gene encoding of prompts.

A chromosome carries one gene per schema attribute plus a generation seed.
Gene kinds mirror the schema: a single chosen value, a fixed-size value
subset, or a real number inside the attribute's range. All genome values
are immutable; random draws always go through an explicit ``random.Random``
stream so callers own determinism.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Mapping, Sequence

from .preference import PreferenceModel
from .schema import CONTINUOUS, MULTI_DISCRETE, SINGLE_DISCRETE, AttributeSchema, Violation

if TYPE_CHECKING:
    from .generator import ImageRef

# Generation seeds live in [0, SEED_UPPER), half-open.
SEED_UPPER = 2147483647


class InvalidChromosomeError(ValueError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


@dataclass(frozen=True)
class Chromosome:
    style: str
    continuous: dict[str, float]
    single: dict[str, str]
    multi: dict[str, tuple[str, ...]]
    seed: int


@dataclass(frozen=True)
class Individual:
    chromosome: Chromosome
    prompt: str
    index: int
    image: "ImageRef | None" = None

    def with_image(self, image: "ImageRef") -> "Individual":
        return replace(self, image=image)


@dataclass(frozen=True)
class Population:
    generation_number: int
    individuals: tuple[Individual, ...]

    def __len__(self) -> int:
        return len(self.individuals)

    def chromosomes(self) -> list[Chromosome]:
        return [ind.chromosome for ind in self.individuals]


def validate_chromosome(schema: AttributeSchema, c: Chromosome) -> list[Violation]:
    """All chromosome invariants against the schema; empty list = valid."""
    out: list[Violation] = []
    if c.style != schema.style_keyword:
        out.append(Violation("", "style_mismatch",
                             f"style {c.style!r} != schema keyword {schema.style_keyword!r}"))

    expected = {
        SINGLE_DISCRETE: {a.name for a in schema.by_kind(SINGLE_DISCRETE)},
        MULTI_DISCRETE: {a.name for a in schema.by_kind(MULTI_DISCRETE)},
        CONTINUOUS: {a.name for a in schema.by_kind(CONTINUOUS)},
    }
    for kind, genes in ((SINGLE_DISCRETE, c.single), (MULTI_DISCRETE, c.multi),
                        (CONTINUOUS, c.continuous)):
        for name in sorted(set(genes) - expected[kind]):
            out.append(Violation(name, "unknown_gene", f"no {kind} attribute {name!r} in schema"))
        for name in sorted(expected[kind] - set(genes)):
            out.append(Violation(name, "missing_gene", f"{kind} gene {name!r} absent"))

    for attr in schema.attributes:
        if attr.kind == SINGLE_DISCRETE and attr.name in c.single:
            value = c.single[attr.name]
            if value not in attr.values:
                out.append(Violation(attr.name, "unknown_value",
                                     f"{value!r} not in domain"))
        elif attr.kind == MULTI_DISCRETE and attr.name in c.multi:
            values = c.multi[attr.name]
            if len(set(values)) != len(values):
                out.append(Violation(attr.name, "duplicate_value",
                                     f"gene {values!r} repeats a value"))
            unknown = [v for v in values if v not in attr.values]
            if unknown:
                out.append(Violation(attr.name, "unknown_value",
                                     f"{unknown!r} not in domain"))
            if len(set(values)) != attr.select_count and not unknown:
                out.append(Violation(attr.name, "wrong_cardinality",
                                     f"needs exactly {attr.select_count} distinct values, got {len(set(values))}"))
        elif attr.kind == CONTINUOUS and attr.name in c.continuous:
            x = c.continuous[attr.name]
            lo, hi = attr.range  # type: ignore[misc]
            if not (isinstance(x, (int, float)) and lo <= x <= hi):
                out.append(Violation(attr.name, "out_of_range",
                                     f"{x!r} outside [{lo}, {hi}]"))

    if not (isinstance(c.seed, int) and not isinstance(c.seed, bool)
            and 0 <= c.seed < SEED_UPPER):
        out.append(Violation("seed", "seed_out_of_range",
                             f"seed {c.seed!r} outside [0, {SEED_UPPER})"))
    return out


def check_valid(schema: AttributeSchema, c: Chromosome) -> None:
    violations = validate_chromosome(schema, c)
    if violations:
        raise InvalidChromosomeError(violations)


# -- weighted sampling ---------------------------------------------------

def weighted_choice(rng: random.Random, values: Sequence[str],
                    weights: Sequence[float]) -> str:
    """One draw with probability proportional to weight."""
    total = 0.0
    cumulative: list[float] = []
    for w in weights:
        total += w
        cumulative.append(total)
    r = rng.random() * total
    for value, edge in zip(values, cumulative):
        if r < edge:
            return value
    return values[-1]


def weighted_sample_without_replacement(
    rng: random.Random,
    values: Sequence[str],
    weights: Mapping[str, float],
    k: int,
) -> tuple[str, ...]:
    """Sequential weight-proportional draws among the remaining values."""
    remaining = list(values)
    picked: list[str] = []
    for _ in range(k):
        picked_value = weighted_choice(rng, remaining, [weights[v] for v in remaining])
        remaining.remove(picked_value)
        picked.append(picked_value)
    return tuple(picked)


def domain_order(attr_values: Sequence[str], chosen: Sequence[str]) -> tuple[str, ...]:
    """Reorder chosen values into the attribute's declared domain order."""
    chosen_set = set(chosen)
    ordered = tuple(v for v in attr_values if v in chosen_set)
    # Unknown values (invalid chromosomes) kept at the tail so nothing is lost.
    tail = tuple(v for v in chosen if v not in set(attr_values))
    return ordered + tail


def random_chromosome(schema: AttributeSchema, model: PreferenceModel,
                      rng: random.Random) -> Chromosome:
    """Draw one chromosome under the model's current preferences.

    Single genes are weight-proportional draws; multi genes use sequential
    weighted sampling without replacement; continuous genes come from the
    model's normal distribution clamped to the attribute range; the seed
    is uniform in [0, SEED_UPPER). Deterministic given the rng state.
    """
    model.check_covers(schema)
    single: dict[str, str] = {}
    multi: dict[str, tuple[str, ...]] = {}
    continuous: dict[str, float] = {}
    for attr in schema.attributes:
        if attr.kind == SINGLE_DISCRETE:
            table = model.weights[attr.name]
            single[attr.name] = weighted_choice(
                rng, attr.values, [table[v] for v in attr.values])
        elif attr.kind == MULTI_DISCRETE:
            drawn = weighted_sample_without_replacement(
                rng, attr.values, model.weights[attr.name], attr.select_count)
            multi[attr.name] = domain_order(attr.values, drawn)
        else:
            lo, hi = attr.range  # type: ignore[misc]
            x = rng.gauss(model.mean_of(attr.name), model.stddev_of(attr.name))
            continuous[attr.name] = min(max(x, lo), hi)
    return Chromosome(
        style=schema.style_keyword,
        continuous=continuous,
        single=single,
        multi=multi,
        seed=rng.randrange(SEED_UPPER),
    )


# -- canonical text form -------------------------------------------------

def canonical_string(schema: AttributeSchema, c: Chromosome) -> str:
    """Deterministic injective encoding, used for logging and golden tests.

    Fields joined by '|': style, then every attribute in schema order
    (multi values comma-joined in domain order, reals at 4 decimals),
    then the seed in decimal.
    """
    check_valid(schema, c)
    parts = [f"style={c.style}"]
    for attr in schema.attributes:
        if attr.kind == SINGLE_DISCRETE:
            parts.append(f"{attr.name}={c.single[attr.name]}")
        elif attr.kind == MULTI_DISCRETE:
            ordered = domain_order(attr.values, c.multi[attr.name])
            parts.append(f"{attr.name}={','.join(ordered)}")
        else:
            parts.append(f"{attr.name}={c.continuous[attr.name]:.4f}")
    parts.append(f"seed={c.seed}")
    return "|".join(parts)


# -- lossless dict form (session files, CLI render input) -----------------

def chromosome_to_dict(c: Chromosome) -> dict:
    return {
        "style": c.style,
        "continuous": {k: float(v) for k, v in c.continuous.items()},
        "single": dict(c.single),
        "multi": {k: list(v) for k, v in c.multi.items()},
        "seed": c.seed,
    }


def chromosome_from_dict(doc: dict) -> Chromosome:
    return Chromosome(
        style=str(doc["style"]),
        continuous={str(k): float(v) for k, v in doc["continuous"].items()},
        single={str(k): str(v) for k, v in doc["single"].items()},
        multi={str(k): tuple(str(x) for x in v) for k, v in doc["multi"].items()},
        seed=int(doc["seed"]),
    )
