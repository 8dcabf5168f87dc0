"""Genetic optimization core: votes to fitness, preference updates,
roulette selection, heterogeneous crossover and mutation, and the
one-generation evolution step.

The engine is a deterministic sequential state machine. States are
immutable snapshots; ``evolve`` returns a new state and never mutates its
input. All randomness flows through the caller's ``random.Random``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Sequence

from .genome import (
    SEED_UPPER,
    Chromosome,
    Population,
    check_valid,
    domain_order,
    weighted_choice,
    weighted_sample_without_replacement,
)
from .preference import ContinuousStats, PreferenceModel
from .promptgen import build_population
from .schema import CONTINUOUS, MULTI_DISCRETE, SINGLE_DISCRETE, AttributeSchema

VoteTally = tuple[int, ...]


class TallyMismatchError(ValueError):
    """The tally does not line up with the population it scores."""


@dataclass(frozen=True)
class GAConfig:
    population_size: int = 16
    crossover_gene_probability: float = 0.5
    mutation_rate: float = 0.05
    seed_range_upper: int = SEED_UPPER
    elitism_count: int = 0
    variance_floor: float = 0.01
    prior_pseudo_count: float = 4.0
    prior_mean: float = 0.0
    prior_variance: float = 0.25

    def __post_init__(self) -> None:
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if not (0.0 < self.crossover_gene_probability < 1.0):
            raise ValueError("crossover_gene_probability must be in (0, 1)")
        if not (0.0 <= self.mutation_rate < 1.0):
            raise ValueError("mutation_rate must be in [0, 1)")
        if not (0 <= self.elitism_count < self.population_size):
            raise ValueError("elitism_count must be in [0, population_size)")
        if self.seed_range_upper < 1:
            raise ValueError("seed_range_upper must be positive")
        if self.variance_floor <= 0 or self.prior_pseudo_count <= 0 or self.prior_variance <= 0:
            raise ValueError("variance_floor, prior_pseudo_count, prior_variance must be positive")


@dataclass(frozen=True)
class EngineState:
    schema: AttributeSchema
    config: GAConfig
    model: PreferenceModel
    population: Population
    history: tuple[tuple[Population, VoteTally], ...] = ()


def fresh_model(schema: AttributeSchema, config: GAConfig) -> PreferenceModel:
    return PreferenceModel.fresh(
        schema,
        prior_pseudo_count=config.prior_pseudo_count,
        prior_mean=config.prior_mean,
        prior_variance=config.prior_variance,
        variance_floor=config.variance_floor,
    )


def check_tally(votes: Sequence[int], population_size: int) -> VoteTally:
    if len(votes) != population_size:
        raise TallyMismatchError(
            f"tally length {len(votes)} != population size {population_size}")
    for v in votes:
        if not isinstance(v, int) or isinstance(v, bool) or v < 0:
            raise TallyMismatchError(f"votes must be non-negative integers, got {v!r}")
    return tuple(votes)


def fitness(tally: Sequence[int]) -> list[float]:
    """f(i) = V_i — a vote count is an individual's fitness."""
    return [float(v) for v in tally]


def selection_probabilities(fitness_values: Sequence[float]) -> list[float]:
    """P_i = F_i / sum(F); uniform when every fitness is zero."""
    for f in fitness_values:
        if f < 0:
            raise ValueError(f"fitness must be non-negative, got {f}")
    total = sum(fitness_values)
    n = len(fitness_values)
    if total == 0:
        return [1.0 / n] * n
    return [f / total for f in fitness_values]


def select_parents(probabilities: Sequence[float], rng: random.Random) -> tuple[int, int]:
    """Two independent roulette-wheel draws (self-pairing allowed)."""
    return _roulette(probabilities, rng), _roulette(probabilities, rng)


def _roulette(probabilities: Sequence[float], rng: random.Random) -> int:
    r = rng.random()
    acc = 0.0
    for i, p in enumerate(probabilities):
        acc += p
        if r < acc:
            return i
    return len(probabilities) - 1


def crossover(schema: AttributeSchema, config: GAConfig, a: Chromosome,
              b: Chromosome, rng: random.Random) -> Chromosome:
    """Per-kind recombination of two parents.

    Single genes and the seed flip a coin per gene (parent a at
    crossover_gene_probability); multi genes draw the subset uniformly
    without replacement from the union of both parents' values; continuous
    genes average the parents. Always yields a valid child.
    """
    if a.style != schema.style_keyword or b.style != schema.style_keyword:
        raise ValueError("parents do not belong to this schema")
    p = config.crossover_gene_probability
    single: dict[str, str] = {}
    multi: dict[str, tuple[str, ...]] = {}
    continuous: dict[str, float] = {}
    for attr in schema.attributes:
        if attr.kind == SINGLE_DISCRETE:
            single[attr.name] = (a.single if rng.random() < p else b.single)[attr.name]
        elif attr.kind == MULTI_DISCRETE:
            union = [v for v in attr.values
                     if v in set(a.multi[attr.name]) | set(b.multi[attr.name])]
            drawn = rng.sample(union, attr.select_count)
            multi[attr.name] = domain_order(attr.values, drawn)
        else:
            continuous[attr.name] = (a.continuous[attr.name] + b.continuous[attr.name]) / 2.0
    seed = (a if rng.random() < p else b).seed
    return Chromosome(style=schema.style_keyword, continuous=continuous,
                      single=single, multi=multi, seed=seed)


def mutate(schema: AttributeSchema, config: GAConfig, model: PreferenceModel,
           c: Chromosome, rng: random.Random) -> Chromosome:
    """Independent per-gene mutation at the configured rate.

    A mutated single gene resamples a *different* value weight-
    proportionally; each slot of a multi gene independently swaps in a
    weight-proportional value from outside the gene; the seed redraws
    uniformly; a continuous gene resamples from the model's current
    distribution, clamped to range.
    """
    model.check_covers(schema)
    p_m = config.mutation_rate
    single = dict(c.single)
    multi = dict(c.multi)
    continuous = dict(c.continuous)
    for attr in schema.attributes:
        if attr.kind == SINGLE_DISCRETE:
            if rng.random() < p_m:
                table = model.weights[attr.name]
                others = [v for v in attr.values if v != single[attr.name]]
                single[attr.name] = weighted_choice(rng, others, [table[v] for v in others])
        elif attr.kind == MULTI_DISCRETE:
            table = model.weights[attr.name]
            current = list(domain_order(attr.values, multi[attr.name]))
            for slot in range(len(current)):
                if rng.random() < p_m:
                    pool = [v for v in attr.values if v not in current]
                    replacement = weighted_choice(rng, pool, [table[v] for v in pool])
                    current[slot] = replacement
            multi[attr.name] = domain_order(attr.values, current)
        else:
            if rng.random() < p_m:
                lo, hi = attr.range  # type: ignore[misc]
                x = rng.gauss(model.mean_of(attr.name), model.stddev_of(attr.name))
                continuous[attr.name] = min(max(x, lo), hi)
    seed = c.seed
    if rng.random() < p_m:
        seed = rng.randrange(config.seed_range_upper)
    return Chromosome(style=c.style, continuous=continuous, single=single,
                      multi=multi, seed=seed)


def update_weights(model: PreferenceModel, population: Population,
                   tally: Sequence[int]) -> PreferenceModel:
    """w'_v = w_v + sum of votes over individuals whose chromosome holds v."""
    votes = check_tally(tally, len(population))
    weights = {attr: dict(table) for attr, table in model.weights.items()}
    for ind, v in zip(population.individuals, votes):
        if v == 0:
            continue
        c = ind.chromosome
        for attr_name, value in c.single.items():
            weights[attr_name][value] += v
        for attr_name, values in c.multi.items():
            for value in values:
                weights[attr_name][value] += v
    return replace(model, weights=weights)


def update_continuous(model: PreferenceModel, population: Population,
                      tally: Sequence[int], config: GAConfig) -> PreferenceModel:
    """Accumulate vote-weighted sufficient statistics for every continuous gene."""
    votes = check_tally(tally, len(population))
    continuous = dict(model.continuous)
    for attr_name in continuous:
        stats = continuous[attr_name]
        for ind, v in zip(population.individuals, votes):
            if v == 0:
                continue
            stats = stats.accumulate(float(v), ind.chromosome.continuous[attr_name])
        continuous[attr_name] = stats
    return replace(model, continuous=continuous,
                   variance_floor=config.variance_floor)


def top_voted_indices(tally: Sequence[int], count: int) -> list[int]:
    """Indices of the `count` highest-voted individuals, ties to lower index."""
    order = sorted(range(len(tally)), key=lambda i: (-tally[i], i))
    return order[:count]


def evolve(state: EngineState, tally: Sequence[int], rng: random.Random) -> EngineState:
    """One full generation step: update the model from votes, then breed.

    Fixed composition order — weights, continuous statistics, fitness,
    selection probabilities, then per offspring slot (after any elite
    copies) parent selection, crossover, mutation. Deterministic given
    the rng state and the tally.
    """
    votes = check_tally(tally, len(state.population))
    model = update_weights(state.model, state.population, votes)
    model = update_continuous(model, state.population, votes, state.config)

    probabilities = selection_probabilities(fitness(votes))
    parents = state.population.individuals
    offspring: list[Chromosome] = []
    for k in top_voted_indices(votes, state.config.elitism_count):
        offspring.append(parents[k].chromosome)
    while len(offspring) < len(parents):
        ia, ib = select_parents(probabilities, rng)
        child = crossover(state.schema, state.config,
                          parents[ia].chromosome, parents[ib].chromosome, rng)
        offspring.append(mutate(state.schema, state.config, model, child, rng))

    population = build_population(state.schema, offspring,
                                  state.population.generation_number + 1)
    return EngineState(
        schema=state.schema,
        config=state.config,
        model=model,
        population=population,
        history=state.history + ((state.population, votes),),
    )
