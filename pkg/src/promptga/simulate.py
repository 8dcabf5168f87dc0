"""Headless oracle-driven benchmark runs.

Runs R independent optimizations of G generations each against a fixed
preference profile, recording per-generation metrics. Each run derives its
engine and oracle streams from the master seed, so the whole report is a
pure function of its inputs. Images are optional (mock backend) — the
oracle judges genotypes, so the default mode never renders.
"""

from __future__ import annotations

import csv
import io
import math
import random
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import engine as ga
from .generator import ContentStore, GenerationParams, MockBackend, generate_population
from .genome import Population
from .oracle import PreferenceProfile, distance, oracle_votes
from .preference import PreferenceModel
from .promptgen import build_population, init_population
from .randomness import derive_seed, substream
from .schema import AttributeSchema, CONTINUOUS
from .session import SessionRuntime

SINGLE_MATCH_THRESHOLD = 0.75
MULTI_OVERLAP_THRESHOLD = 2.0 / 3.0


@dataclass
class SimulationReport:
    rows: list[dict]
    summary: dict
    converged: bool

    def csv_text(self, schema: AttributeSchema) -> str:
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=report_columns(schema),
                                lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow(row)
        return buffer.getvalue()


def report_columns(schema: AttributeSchema) -> list[str]:
    columns = ["run", "generation", "match_rate_single", "multi_overlap"]
    for attr in schema.continuous_attributes:
        columns.append(f"cont_mean_{attr.name}")
        columns.append(f"cont_var_{attr.name}")
    columns += ["mean_distance", "total_votes"]
    return columns


def population_metrics(schema: AttributeSchema, profile: PreferenceProfile,
                       population: Population, model: PreferenceModel) -> dict:
    """One CSV row worth of metrics (run/generation/total_votes added later)."""
    individuals = population.individuals
    n = len(individuals)

    if profile.target_single:
        rates = []
        for name, target in profile.target_single.items():
            rates.append(sum(1 for ind in individuals
                             if ind.chromosome.single[name] == target) / n)
        match_rate = statistics.mean(rates)
    else:
        match_rate = 1.0

    if profile.target_multi:
        overlaps = []
        for name, target in profile.target_multi.items():
            k = schema.attribute(name).select_count
            overlaps.append(statistics.mean(
                len(set(ind.chromosome.multi[name]) & set(target)) / k
                for ind in individuals))
        multi_overlap = statistics.mean(overlaps)
    else:
        multi_overlap = 1.0

    row: dict = {
        "match_rate_single": match_rate,
        "multi_overlap": multi_overlap,
        "mean_distance": statistics.mean(
            distance(profile, ind.chromosome, schema) for ind in individuals),
    }
    for attr in schema.continuous_attributes:
        row[f"cont_mean_{attr.name}"] = model.mean_of(attr.name)
        row[f"cont_var_{attr.name}"] = model.variance_of(attr.name)
    return row


def weight_entropies(model: PreferenceModel) -> dict[str, float]:
    out: dict[str, float] = {}
    for attr, table in model.weights.items():
        total = sum(table.values())
        out[attr] = -sum((w / total) * math.log(w / total) for w in table.values())
    return out


@dataclass
class _RunResult:
    rows: list[dict]
    final_model: PreferenceModel
    per_attr_overlap: dict[str, list[float]] = field(default_factory=dict)


def _run_once(schema: AttributeSchema, profile: PreferenceProfile,
              config: ga.GAConfig, generations: int, run_index: int,
              master_seed: int, with_images: bool,
              data_dir: str | Path | None) -> _RunResult:
    engine_seed = derive_seed(master_seed, f"run:{run_index}:engine")
    oracle_rng = substream(master_seed, f"run:{run_index}:oracle")

    runtime: SessionRuntime | None = None
    store = backend = None
    if with_images:
        assert data_dir is not None
        runtime = SessionRuntime.create(
            schema=schema, config=config, params=GenerationParams(),
            backend_id="mock", master_seed=engine_seed)
        store = ContentStore(data_dir)
        backend = MockBackend()
        _render_images(runtime, backend, store)
        population = runtime.current_population
        model = runtime.model
    else:
        rng = random.Random(engine_seed)
        model = ga.fresh_model(schema, config)
        population = build_population(
            schema, init_population(schema, model, config.population_size, rng), 0)
        state = ga.EngineState(schema=schema, config=config, model=model,
                               population=population)

    rows: list[dict] = []
    per_attr_overlap: dict[str, list[float]] = {name: [] for name in profile.target_multi}

    def emit(population: Population, model: PreferenceModel, votes_total: int) -> None:
        row = population_metrics(schema, profile, population, model)
        row["run"] = run_index
        row["generation"] = population.generation_number
        row["total_votes"] = votes_total
        rows.append(row)
        for name, target in profile.target_multi.items():
            k = schema.attribute(name).select_count
            per_attr_overlap[name].append(statistics.mean(
                len(set(ind.chromosome.multi[name]) & set(target)) / k
                for ind in population.individuals))

    for _ in range(generations):
        if runtime is not None:
            votes = oracle_votes(profile, runtime.current_population, schema, oracle_rng)
            emit(runtime.current_population, runtime.model, sum(votes))
            runtime.vote(votes)
            runtime.evolve_next()
            _render_images(runtime, backend, store)
        else:
            votes = oracle_votes(profile, state.population, schema, oracle_rng)
            emit(state.population, state.model, sum(votes))
            state = ga.evolve(state, votes, rng)

    if runtime is not None:
        emit(runtime.current_population, runtime.model, 0)
        final = runtime.model
    else:
        emit(state.population, state.model, 0)
        final = state.model
    return _RunResult(rows=rows, final_model=final, per_attr_overlap=per_attr_overlap)


def _render_images(runtime: SessionRuntime, backend, store) -> None:
    population = runtime.current_population
    result = generate_population(
        backend, store, runtime.prompt_seed_pairs(population),
        runtime.record.params, parallelism=4)
    runtime.attach_images(population.generation_number, result.refs)  # type: ignore[arg-type]


def run_simulation(schema: AttributeSchema, profile: PreferenceProfile,
                   generations: int, runs: int, master_seed: int,
                   config: ga.GAConfig | None = None, with_images: bool = False,
                   data_dir: str | Path | None = None) -> SimulationReport:
    """Full benchmark: R runs, per-generation CSV rows, convergence summary."""
    if generations < 0:
        raise ValueError("generations must be >= 0")
    if runs < 1:
        raise ValueError("runs must be >= 1")
    config = config or ga.GAConfig()
    started = time.monotonic()

    all_rows: list[dict] = []
    per_run: list[dict] = []
    for r in range(runs):
        result = _run_once(schema, profile, config, generations, r,
                           master_seed, with_images, data_dir)
        all_rows.extend(result.rows)
        matches = [row["match_rate_single"] for row in result.rows]
        overlaps = [row["multi_overlap"] for row in result.rows]
        entry = {
            "run": r,
            "final_match_rate_single": matches[-1],
            "best_match_rate_single": max(matches),
            "final_multi_overlap": overlaps[-1],
            "best_multi_overlap": max(overlaps),
            "final_continuous_mean": {
                attr.name: result.final_model.mean_of(attr.name)
                for attr in schema.continuous_attributes},
            "final_multi_overlap_by_attribute": {
                name: values[-1] for name, values in result.per_attr_overlap.items()},
            "best_multi_overlap_by_attribute": {
                name: max(values) for name, values in result.per_attr_overlap.items()},
            "weight_entropy": weight_entropies(result.final_model),
        }
        per_run.append(entry)

    median_best_match = statistics.median(
        e["best_match_rate_single"] for e in per_run)
    median_best_overlap = statistics.median(
        e["best_multi_overlap"] for e in per_run)
    converged = (median_best_match >= SINGLE_MATCH_THRESHOLD
                 and median_best_overlap >= MULTI_OVERLAP_THRESHOLD)

    summary = {
        "runs": runs,
        "generations": generations,
        "master_seed": master_seed,
        "thresholds": {
            "match_rate_single": SINGLE_MATCH_THRESHOLD,
            "multi_overlap": MULTI_OVERLAP_THRESHOLD,
        },
        "median_best_match_rate_single": median_best_match,
        "median_best_multi_overlap": median_best_overlap,
        "median_final_match_rate_single": statistics.median(
            e["final_match_rate_single"] for e in per_run),
        "median_final_multi_overlap": statistics.median(
            e["final_multi_overlap"] for e in per_run),
        "converged": converged,
        "runtime_seconds": round(time.monotonic() - started, 3),
        "per_run": per_run,
    }
    return SimulationReport(rows=all_rows, summary=summary, converged=converged)
