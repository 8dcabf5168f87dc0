"""Simulated voter for headless runs and benchmarks.

The oracle holds a fixed target profile and votes for the individuals
whose genotypes sit nearest to it, standing in for a human with a
consistent aesthetic preference. The generation seed never enters the
distance: seeds have no semantic target.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from .genome import Chromosome, Population
from .schema import AttributeSchema, CONTINUOUS, MULTI_DISCRETE, SINGLE_DISCRETE


class ProfileError(ValueError):
    """The profile does not fit the schema."""


@dataclass(frozen=True)
class PreferenceProfile:
    target_single: dict[str, str] = field(default_factory=dict)
    target_multi: dict[str, tuple[str, ...]] = field(default_factory=dict)
    target_continuous: dict[str, float] = field(default_factory=dict)
    vote_budget: int = 4
    noise: float = 0.0


def validate_profile(schema: AttributeSchema, profile: PreferenceProfile) -> None:
    if profile.vote_budget < 1:
        raise ProfileError("vote_budget must be positive")
    if not (0.0 <= profile.noise <= 1.0):
        raise ProfileError("noise must be in [0, 1]")
    for name, value in profile.target_single.items():
        attr = _attr(schema, name, SINGLE_DISCRETE)
        if value not in attr.values:
            raise ProfileError(f"{name}: target {value!r} not in domain")
    for name, values in profile.target_multi.items():
        attr = _attr(schema, name, MULTI_DISCRETE)
        if len(set(values)) != attr.select_count:
            raise ProfileError(
                f"{name}: target needs {attr.select_count} distinct values")
        unknown = [v for v in values if v not in attr.values]
        if unknown:
            raise ProfileError(f"{name}: targets {unknown!r} not in domain")
    for name, x in profile.target_continuous.items():
        attr = _attr(schema, name, CONTINUOUS)
        lo, hi = attr.range  # type: ignore[misc]
        if not (lo <= x <= hi):
            raise ProfileError(f"{name}: target {x} outside [{lo}, {hi}]")


def _attr(schema: AttributeSchema, name: str, kind: str):
    try:
        attr = schema.attribute(name)
    except KeyError:
        raise ProfileError(f"schema has no attribute {name!r}") from None
    if attr.kind != kind:
        raise ProfileError(f"{name}: expected {kind}, schema says {attr.kind}")
    return attr


def distance(profile: PreferenceProfile, c: Chromosome,
             schema: AttributeSchema) -> float:
    """Genotype distance to the target: mismatch indicator per single gene,
    missing-overlap fraction per multi gene, range-normalized absolute
    difference per continuous gene. Seed-free and deterministic.
    """
    d = 0.0
    for name, target in profile.target_single.items():
        if c.single[name] != target:
            d += 1.0
    for name, target_values in profile.target_multi.items():
        attr = schema.attribute(name)
        overlap = len(set(c.multi[name]) & set(target_values))
        d += 1.0 - overlap / attr.select_count
    for name, target in profile.target_continuous.items():
        lo, hi = schema.attribute(name).range  # type: ignore[misc]
        d += abs(c.continuous[name] - target) / (hi - lo)
    return d


def oracle_votes(profile: PreferenceProfile, population: Population,
                 schema: AttributeSchema, rng: random.Random) -> tuple[int, ...]:
    """One vote to each of the vote_budget nearest individuals.

    Ties break toward the lower index. With probability `noise`, a vote is
    redirected to a uniformly random individual instead. The tally always
    totals exactly vote_budget.
    """
    n = len(population)
    if profile.vote_budget > n:
        raise ProfileError(f"vote_budget {profile.vote_budget} exceeds population size {n}")
    distances = [distance(profile, ind.chromosome, schema)
                 for ind in population.individuals]
    nearest = sorted(range(n), key=lambda i: (distances[i], i))[:profile.vote_budget]
    votes = [0] * n
    for i in nearest:
        if profile.noise > 0 and rng.random() < profile.noise:
            votes[rng.randrange(n)] += 1
        else:
            votes[i] += 1
    return tuple(votes)


# -- profile documents (CLI `simulate`) -----------------------------------

def profile_to_dict(profile: PreferenceProfile) -> dict:
    return {
        "single": dict(profile.target_single),
        "multi": {k: list(v) for k, v in profile.target_multi.items()},
        "continuous": dict(profile.target_continuous),
        "vote_budget": profile.vote_budget,
        "noise": profile.noise,
    }


def profile_from_dict(doc: dict) -> PreferenceProfile:
    return PreferenceProfile(
        target_single={str(k): str(v) for k, v in doc.get("single", {}).items()},
        target_multi={str(k): tuple(str(x) for x in v)
                      for k, v in doc.get("multi", {}).items()},
        target_continuous={str(k): float(v)
                           for k, v in doc.get("continuous", {}).items()},
        vote_budget=int(doc.get("vote_budget", 4)),
        noise=float(doc.get("noise", 0.0)),
    )


def load_profile(document: str, schema: AttributeSchema) -> PreferenceProfile:
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ProfileError(f"profile is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ProfileError("profile document must be an object")
    profile = profile_from_dict(doc)
    validate_profile(schema, profile)
    return profile
