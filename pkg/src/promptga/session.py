"""Durable optimization-run records: persistence, resume, replay, export.

A session file is one canonical JSON document plus a trailing integrity
digest line, stored under ``{data_dir}/sessions/{session_id}.json``. It
holds everything needed to audit or reproduce a run: config, schema,
master seed, every generation's genotypes/prompts/image hashes/votes,
per-generation rng checkpoints, and one preference-model snapshot per
generation (the model that produced it).

Replaying the recorded tallies from the master seed must reproduce every
canonical chromosome string and model snapshot exactly; `replay_session`
checks that.
"""

from __future__ import annotations

import hashlib
import json
import random
import secrets
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from . import engine as ga
from .generator import (
    GenerationParams,
    ImageRef,
    MOCK_BACKEND_ID,
    MockBackend,
    params_from_dict,
    params_to_dict,
)
from .genome import (
    Chromosome,
    Population,
    canonical_string,
    chromosome_from_dict,
    chromosome_to_dict,
)
from .preference import PreferenceModel, model_from_dict, model_to_dict
from .promptgen import PromptString, build_population, init_population
from .randomness import state_from_jsonable, state_to_jsonable
from .schema import AttributeSchema, schema_from_dict, schema_to_dict

SESSION_FORMAT = "promptga-session"
SESSION_VERSION = "1.0"
MODEL_DOC_FORMAT = "promptga-personalized-model"
MODEL_DOC_VERSION = "1.0"

_DIGEST_PREFIX = "#sha256="


class SessionIOError(OSError):
    pass


class VersionMismatchError(ValueError):
    pass


class CorruptRecordError(ValueError):
    pass


class NoVotesError(RuntimeError):
    """The session has no voted generation yet."""


@dataclass
class GenerationRecord:
    generation_number: int
    chromosomes: list[str]
    genotypes: list[dict]
    prompts: list[str]
    image_hashes: list[str | None] | None
    tally: list[int] | None
    rng_checkpoint: list


@dataclass
class SessionRecord:
    session_id: str
    created_at: str
    schema: AttributeSchema
    config: ga.GAConfig
    backend_id: str
    params: GenerationParams
    master_seed: int
    generations: list[GenerationRecord] = field(default_factory=list)
    model_snapshots: list[PreferenceModel] = field(default_factory=list)

    def voted_generations(self) -> list[GenerationRecord]:
        return [g for g in self.generations if g.tally is not None]


def canonical_json(doc: object) -> str:
    """Fixed key order (builders insert canonically), minimal float form."""
    return json.dumps(doc, indent=2, ensure_ascii=False)


# -- config serialization ---------------------------------------------------

def config_to_dict(config: ga.GAConfig) -> dict:
    return {
        "population_size": config.population_size,
        "crossover_gene_probability": config.crossover_gene_probability,
        "mutation_rate": config.mutation_rate,
        "seed_range_upper": config.seed_range_upper,
        "elitism_count": config.elitism_count,
        "variance_floor": config.variance_floor,
        "prior_pseudo_count": config.prior_pseudo_count,
        "prior_mean": config.prior_mean,
        "prior_variance": config.prior_variance,
    }


def config_from_dict(doc: dict) -> ga.GAConfig:
    base = config_to_dict(ga.GAConfig())
    unknown = set(doc) - set(base)
    if unknown:
        raise ValueError(f"unknown config fields: {sorted(unknown)}")
    base.update(doc)
    return ga.GAConfig(**base)


# -- record (de)serialization ------------------------------------------------

def record_to_dict(record: SessionRecord) -> dict:
    return {
        "format": SESSION_FORMAT,
        "version": SESSION_VERSION,
        "session_id": record.session_id,
        "created_at": record.created_at,
        "master_seed": record.master_seed,
        "backend_id": record.backend_id,
        "params": params_to_dict(record.params),
        "config": config_to_dict(record.config),
        "schema": schema_to_dict(record.schema),
        "generations": [
            {
                "generation_number": g.generation_number,
                "chromosomes": list(g.chromosomes),
                "genotypes": [dict(d) for d in g.genotypes],
                "prompts": list(g.prompts),
                "image_hashes": list(g.image_hashes) if g.image_hashes is not None else None,
                "tally": list(g.tally) if g.tally is not None else None,
                "rng_checkpoint": g.rng_checkpoint,
            }
            for g in record.generations
        ],
        "model_snapshots": [model_to_dict(m) for m in record.model_snapshots],
    }


def record_from_dict(doc: dict) -> SessionRecord:
    version = str(doc.get("version", ""))
    major = version.split(".", 1)[0]
    if doc.get("format") != SESSION_FORMAT or not version:
        raise CorruptRecordError("not a session document")
    if major != SESSION_VERSION.split(".", 1)[0]:
        raise VersionMismatchError(
            f"session format version {version} not supported (expected {SESSION_VERSION})")
    generations = [
        GenerationRecord(
            generation_number=int(g["generation_number"]),
            chromosomes=[str(s) for s in g["chromosomes"]],
            genotypes=list(g["genotypes"]),
            prompts=[str(p) for p in g["prompts"]],
            image_hashes=(None if g.get("image_hashes") is None
                          else list(g["image_hashes"])),
            tally=None if g.get("tally") is None else [int(v) for v in g["tally"]],
            rng_checkpoint=g["rng_checkpoint"],
        )
        for g in doc["generations"]
    ]
    return SessionRecord(
        session_id=str(doc["session_id"]),
        created_at=str(doc["created_at"]),
        schema=schema_from_dict(doc["schema"]),
        config=config_from_dict(doc["config"]),
        backend_id=str(doc["backend_id"]),
        params=params_from_dict(doc["params"]),
        master_seed=int(doc["master_seed"]),
        generations=generations,
        model_snapshots=[model_from_dict(m) for m in doc["model_snapshots"]],
    )


def sessions_dir(data_dir: str | Path) -> Path:
    return Path(data_dir) / "sessions"


def save_session(record: SessionRecord, data_dir: str | Path) -> Path:
    directory = sessions_dir(data_dir)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        body = canonical_json(record_to_dict(record))
        digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
        path = directory / f"{record.session_id}.json"
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(f"{body}\n{_DIGEST_PREFIX}{digest}\n", encoding="utf-8")
        tmp.replace(path)
    except OSError as exc:
        raise SessionIOError(f"cannot save session: {exc}") from exc
    return path


def load_session(path: str | Path) -> SessionRecord:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SessionIOError(f"cannot read session: {exc}") from exc
    marker = f"\n{_DIGEST_PREFIX}"
    if marker not in text:
        raise CorruptRecordError("missing integrity digest line")
    body, tail = text.rsplit(marker, 1)
    digest = tail.strip()
    if hashlib.sha256(body.encode("utf-8")).hexdigest() != digest:
        raise CorruptRecordError("integrity digest mismatch (file corrupt or truncated)")
    try:
        doc = json.loads(body)
    except json.JSONDecodeError as exc:
        raise CorruptRecordError(f"session body is not valid JSON: {exc}") from exc
    return record_from_dict(doc)


# -- personalized model export ------------------------------------------------

def final_model(record: SessionRecord) -> PreferenceModel:
    """Latest model state including a pending voted-but-not-evolved tally."""
    if not record.voted_generations():
        raise NoVotesError("session has no voted generation")
    model = record.model_snapshots[-1]
    last = record.generations[-1]
    if last.tally is not None:
        population = build_population(
            record.schema,
            [chromosome_from_dict(d) for d in last.genotypes],
            last.generation_number,
        )
        model = ga.update_weights(model, population, last.tally)
        model = ga.update_continuous(model, population, last.tally, record.config)
    return model


def export_model(record: SessionRecord) -> dict:
    """Self-contained personalized prompting model document."""
    model = final_model(record)
    return {
        "format": MODEL_DOC_FORMAT,
        "version": MODEL_DOC_VERSION,
        "style_keyword": record.schema.style_keyword,
        "backend": {
            "id": record.backend_id,
            "params": params_to_dict(record.params),
        },
        "schema": schema_to_dict(record.schema),
        "model": model_to_dict(model),
    }


def dumps_model_document(doc: dict) -> str:
    return canonical_json(doc) + "\n"


@dataclass(frozen=True)
class ModelBundle:
    schema: AttributeSchema
    model: PreferenceModel
    backend_id: str
    params: GenerationParams


def load_model_document(text: str) -> ModelBundle:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptRecordError(f"model document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != MODEL_DOC_FORMAT:
        raise CorruptRecordError("not a personalized model document")
    version = str(doc.get("version", ""))
    if version.split(".", 1)[0] != MODEL_DOC_VERSION.split(".", 1)[0]:
        raise VersionMismatchError(f"model document version {version} not supported")
    return ModelBundle(
        schema=schema_from_dict(doc["schema"]),
        model=model_from_dict(doc["model"]),
        backend_id=str(doc["backend"]["id"]),
        params=params_from_dict(doc["backend"]["params"]),
    )


# -- live session runtime ------------------------------------------------------

class SessionRuntime:
    """Mutable driver for one optimization run.

    Owns the engine rng stream and keeps the SessionRecord in lockstep with
    the in-memory populations. Callers decide when images exist (the engine
    itself never touches a backend) and when to persist.
    """

    def __init__(self, record: SessionRecord, model: PreferenceModel,
                 populations: list[Population], rng: random.Random):
        self.record = record
        self.model = model
        self.populations = populations
        self.rng = rng

    # -- construction --------------------------------------------------

    @classmethod
    def create(cls, schema: AttributeSchema, config: ga.GAConfig,
               params: GenerationParams, backend_id: str,
               master_seed: int, session_id: str | None = None) -> "SessionRuntime":
        record = SessionRecord(
            session_id=session_id or secrets.token_hex(16),
            created_at=datetime.now(timezone.utc).isoformat(),
            schema=schema,
            config=config,
            backend_id=backend_id,
            params=params,
            master_seed=master_seed,
        )
        rng = random.Random(master_seed)
        model = ga.fresh_model(schema, config)
        chromosomes = init_population(schema, model, config.population_size, rng)
        population = build_population(schema, chromosomes, 0)
        runtime = cls(record, model, [population], rng)
        runtime._record_generation(population)
        return runtime

    @classmethod
    def resume(cls, record: SessionRecord) -> "SessionRuntime":
        if not record.generations:
            raise CorruptRecordError("session record has no generations")
        populations = [
            build_population(record.schema,
                             [chromosome_from_dict(d) for d in g.genotypes],
                             g.generation_number)
            for g in record.generations
        ]
        rng = random.Random()
        rng.setstate(state_from_jsonable(record.generations[-1].rng_checkpoint))
        return cls(record, record.model_snapshots[-1], populations, rng)

    # -- accessors -------------------------------------------------------

    @property
    def schema(self) -> AttributeSchema:
        return self.record.schema

    @property
    def config(self) -> ga.GAConfig:
        return self.record.config

    @property
    def current_population(self) -> Population:
        return self.populations[-1]

    @property
    def current_record(self) -> GenerationRecord:
        return self.record.generations[-1]

    def prompt_seed_pairs(self, population: Population) -> list[tuple[PromptString, int]]:
        return [(PromptString(text=ind.prompt,
                              negative_text=self.record.params.negative_prompt),
                 ind.chromosome.seed)
                for ind in population.individuals]

    # -- state transitions -------------------------------------------------

    def vote(self, votes: Sequence[int]) -> None:
        """Record (or overwrite) the tally for the current generation."""
        tally = ga.check_tally(votes, len(self.current_population))
        self.current_record.tally = list(tally)

    def evolve_next(self) -> Population:
        """Run one engine step over the recorded tally; genotype-only output."""
        tally = self.current_record.tally
        if tally is None:
            raise NoVotesError("current generation has no recorded tally")
        state = ga.EngineState(
            schema=self.schema,
            config=self.config,
            model=self.model,
            population=self.current_population,
            history=tuple(
                (pop, tuple(g.tally))
                for pop, g in zip(self.populations[:-1], self.record.generations[:-1])
                if g.tally is not None
            ),
        )
        new_state = ga.evolve(state, tally, self.rng)
        self.model = new_state.model
        self.populations.append(new_state.population)
        self._record_generation(new_state.population)
        return new_state.population

    def attach_images(self, generation_number: int, refs: Sequence[ImageRef]) -> None:
        index = self.generation_index(generation_number)
        population = self.populations[index]
        if len(refs) != len(population):
            raise ValueError("one image reference per individual required")
        individuals = tuple(ind.with_image(ref)
                            for ind, ref in zip(population.individuals, refs))
        self.populations[index] = Population(
            generation_number=population.generation_number, individuals=individuals)
        self.record.generations[index].image_hashes = [r.content_hash for r in refs]

    # -- crash safety -----------------------------------------------------

    def snapshot_state(self) -> tuple:
        return (
            self.rng.getstate(),
            self.model,
            list(self.populations),
            list(self.record.generations),
            list(self.record.model_snapshots),
        )

    def restore_state(self, snap: tuple) -> None:
        rng_state, model, populations, generations, snapshots = snap
        self.rng.setstate(rng_state)
        self.model = model
        self.populations = populations
        self.record.generations = generations
        self.record.model_snapshots = snapshots

    # -- internals -----------------------------------------------------------

    def generation_index(self, generation_number: int) -> int:
        for i, g in enumerate(self.record.generations):
            if g.generation_number == generation_number:
                return i
        raise KeyError(f"no generation {generation_number}")

    def _record_generation(self, population: Population) -> None:
        self.record.generations.append(GenerationRecord(
            generation_number=population.generation_number,
            chromosomes=[canonical_string(self.schema, c)
                         for c in population.chromosomes()],
            genotypes=[chromosome_to_dict(c) for c in population.chromosomes()],
            prompts=[ind.prompt for ind in population.individuals],
            image_hashes=None,
            tally=None,
            rng_checkpoint=state_to_jsonable(self.rng),
        ))
        self.record.model_snapshots.append(self.model)


# -- replay verification ---------------------------------------------------------

def replay_session(record: SessionRecord) -> list[str]:
    """Re-run the recorded run from the master seed; return mismatches.

    Checks every generation's canonical chromosome strings, prompts, rng
    checkpoints and model snapshots, plus mock-backend image hashes when the
    record carries them. Empty list = byte-exact replay.
    """
    mismatches: list[str] = []
    runtime = SessionRuntime.create(
        schema=record.schema,
        config=record.config,
        params=record.params,
        backend_id=record.backend_id,
        master_seed=record.master_seed,
        session_id=record.session_id,
    )
    for k, original in enumerate(record.generations):
        if k > 0:
            previous = record.generations[k - 1]
            if previous.tally is None:
                mismatches.append(f"generation {k}: predecessor has no tally, cannot replay")
                break
            runtime.vote(previous.tally)
            runtime.evolve_next()
        replayed = runtime.record.generations[k]
        _compare_generation(record, original, replayed, mismatches)
        snap_a = model_to_dict(record.model_snapshots[k])
        snap_b = model_to_dict(runtime.record.model_snapshots[k])
        if snap_a != snap_b:
            mismatches.append(f"generation {k}: model snapshot differs")
    return mismatches


def _compare_generation(record: SessionRecord, original: GenerationRecord,
                        replayed: GenerationRecord, mismatches: list[str]) -> None:
    k = original.generation_number
    if original.chromosomes != replayed.chromosomes:
        mismatches.append(f"generation {k}: chromosome strings differ")
    if original.prompts != replayed.prompts:
        mismatches.append(f"generation {k}: prompts differ")
    if original.rng_checkpoint != replayed.rng_checkpoint:
        mismatches.append(f"generation {k}: rng checkpoint differs")
    if original.image_hashes is not None and record.backend_id == MOCK_BACKEND_ID:
        backend = MockBackend()
        for i, (prompt, genotype) in enumerate(zip(original.prompts, original.genotypes)):
            expected = hashlib.sha256(backend.render_bytes(
                PromptString(text=prompt, negative_text=record.params.negative_prompt),
                int(genotype["seed"]), record.params)).hexdigest()
            if original.image_hashes[i] != expected:
                mismatches.append(f"generation {k}: image hash differs at index {i}")
