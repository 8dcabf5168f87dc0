"""HTTP facade for the voting UI and other clients.

Single-process service: sessions live in memory with write-through to the
session files. Mutation endpoints (create/vote/evolve) are mutually
exclusive per session — a second concurrent mutator gets 409 — while reads
are always served from the last committed state. Evolution works on a
detached copy and swaps it in only after image generation succeeds, so
clients never observe a generation whose images do not exist yet.
"""

from __future__ import annotations

import copy
import random
import secrets
import threading
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from . import engine as ga
from .generator import (
    Backend,
    ContentStore,
    GenerationBatchError,
    GenerationParams,
    generate_population,
    params_from_dict,
    params_to_dict,
)
from .genome import SEED_UPPER, Population
from .preference import PreferenceModel
from .promptgen import sample_prompt
from .schema import (
    AttributeSchema,
    SchemaParseError,
    SchemaValidationError,
    kandinsky_default,
    schema_from_dict,
)
from .session import (
    NoVotesError,
    final_model,
    SessionRuntime,
    config_from_dict,
    export_model,
    load_session,
    save_session,
    sessions_dir,
)

API_VERSION = "1.0"


class ApiError(Exception):
    def __init__(self, code: str, message: str, http_status: int):
        self.code = code
        self.message = message
        self.http_status = http_status
        super().__init__(f"{code}: {message}")


class ManagedSession:
    def __init__(self, runtime: SessionRuntime, backend: Backend):
        self.runtime = runtime
        self.backend = backend
        self.mutation_lock = threading.Lock()
        self.state_lock = threading.Lock()


def _clone_runtime(runtime: SessionRuntime) -> SessionRuntime:
    rng = random.Random()
    rng.setstate(runtime.rng.getstate())
    return SessionRuntime(
        record=copy.deepcopy(runtime.record),
        model=runtime.model,
        populations=list(runtime.populations),
        rng=rng,
    )


class SessionManager:
    def __init__(self, data_dir: str | Path, backends: dict[str, Backend],
                 default_schema: AttributeSchema | None = None,
                 default_backend: str = "mock", parallelism: int = 4):
        self.data_dir = Path(data_dir)
        self.backends = backends
        self.default_schema = default_schema or kandinsky_default()
        self.default_backend = default_backend
        self.parallelism = parallelism
        self.store = ContentStore(self.data_dir)
        self._sessions: dict[str, ManagedSession] = {}
        self._registry_lock = threading.Lock()

    # -- creation / lookup --------------------------------------------

    def create(self, body: dict) -> ManagedSession:
        backend_id = body.get("backend", self.default_backend)
        backend = self.backends.get(backend_id)
        if backend is None:
            raise ApiError("invalid_backend", f"unknown backend {backend_id!r}", 400)

        if "schema" in body and body["schema"] is not None:
            try:
                schema = schema_from_dict(body["schema"])
            except (SchemaParseError, SchemaValidationError) as exc:
                raise ApiError("invalid_schema", str(exc), 400) from exc
        else:
            schema = self.default_schema

        try:
            config = config_from_dict(body.get("config") or {})
        except (ValueError, TypeError) as exc:
            raise ApiError("invalid_config", str(exc), 400) from exc
        try:
            params = params_from_dict(body.get("params") or {})
        except (ValueError, TypeError) as exc:
            raise ApiError("invalid_params", str(exc), 400) from exc

        master_seed = body.get("master_seed")
        if master_seed is None:
            master_seed = secrets.randbelow(SEED_UPPER)
        if not isinstance(master_seed, int) or isinstance(master_seed, bool):
            raise ApiError("invalid_master_seed", "master_seed must be an integer", 400)

        runtime = SessionRuntime.create(
            schema=schema, config=config, params=params,
            backend_id=backend_id, master_seed=master_seed)
        self._generate_images(runtime, backend)
        save_session(runtime.record, self.data_dir)

        managed = ManagedSession(runtime, backend)
        with self._registry_lock:
            self._sessions[runtime.record.session_id] = managed
        return managed

    def get(self, session_id: str) -> ManagedSession:
        with self._registry_lock:
            managed = self._sessions.get(session_id)
            if managed is not None:
                return managed
        path = sessions_dir(self.data_dir) / f"{session_id}.json"
        if not path.is_file():
            raise ApiError("session_not_found", f"no session {session_id!r}", 404)
        record = load_session(path)
        backend = self.backends.get(record.backend_id)
        if backend is None:
            raise ApiError("invalid_backend",
                           f"session uses unconfigured backend {record.backend_id!r}", 400)
        managed = ManagedSession(SessionRuntime.resume(record), backend)
        with self._registry_lock:
            return self._sessions.setdefault(session_id, managed)

    # -- mutations --------------------------------------------------------

    def vote(self, managed: ManagedSession, votes: object) -> None:
        if (not isinstance(votes, list)
                or not all(isinstance(v, int) and not isinstance(v, bool) and v >= 0
                           for v in votes)):
            raise ApiError("invalid_votes", "votes must be non-negative integers", 400)
        if not managed.mutation_lock.acquire(blocking=False):
            raise ApiError("evolve_in_progress", "another mutation is running", 409)
        try:
            n = len(managed.runtime.current_population)
            if len(votes) != n:
                raise ApiError("invalid_votes", f"expected {n} entries, got {len(votes)}", 400)
            with managed.state_lock:
                managed.runtime.vote(votes)
            save_session(managed.runtime.record, self.data_dir)
        finally:
            managed.mutation_lock.release()

    def evolve(self, managed: ManagedSession) -> Population:
        if not managed.mutation_lock.acquire(blocking=False):
            raise ApiError("evolve_in_progress", "another mutation is running", 409)
        try:
            if managed.runtime.current_record.tally is None:
                raise ApiError("no_votes_recorded",
                               "current generation has no recorded tally", 409)
            work = _clone_runtime(managed.runtime)
            population = work.evolve_next()
            self._generate_images(work, managed.backend)
            save_session(work.record, self.data_dir)
            with managed.state_lock:
                managed.runtime = work
            return population
        finally:
            managed.mutation_lock.release()

    def _generate_images(self, runtime: SessionRuntime, backend: Backend) -> None:
        population = runtime.current_population
        try:
            result = generate_population(
                backend, self.store, runtime.prompt_seed_pairs(population),
                runtime.record.params, parallelism=self.parallelism)
        except GenerationBatchError as exc:
            raise ApiError("backend_unreachable",
                           f"image generation failed: {exc.errors}", 502) from exc
        if result.errors:
            raise ApiError("backend_error",
                           f"image generation failed for indices {sorted(result.errors)}: "
                           f"{result.errors}", 502)
        runtime.attach_images(population.generation_number, result.refs)  # type: ignore[arg-type]


# -- payload builders -----------------------------------------------------------

def model_telemetry(schema: AttributeSchema, model: PreferenceModel) -> dict:
    return {
        "weights": {attr: dict(table) for attr, table in model.weights.items()},
        "continuous": {
            attr.name: {
                "mean": model.mean_of(attr.name),
                "variance": model.variance_of(attr.name),
            }
            for attr in schema.continuous_attributes
        },
    }


def population_payload(runtime: SessionRuntime, generation_number: int) -> dict:
    index = runtime.generation_index(generation_number)
    record = runtime.record.generations[index]
    individuals = []
    for i in range(len(record.prompts)):
        image_hash = record.image_hashes[i] if record.image_hashes else None
        individuals.append({
            "index": i,
            "chromosome": record.chromosomes[i],
            "prompt": record.prompts[i],
            "image_hash": image_hash,
            "image_url": f"/images/{image_hash}.png" if image_hash else None,
        })
    return {
        "generation_number": generation_number,
        "individuals": individuals,
        "votes": list(record.tally) if record.tally is not None else None,
        "model": model_telemetry(runtime.schema,
                                 runtime.record.model_snapshots[index]),
    }


def session_summary(runtime: SessionRuntime) -> dict:
    record = runtime.record
    return {
        "session_id": record.session_id,
        "created_at": record.created_at,
        "backend_id": record.backend_id,
        "master_seed": record.master_seed,
        "style_keyword": record.schema.style_keyword,
        "population_size": record.config.population_size,
        "generation_count": len(record.generations),
        "current_generation": record.generations[-1].generation_number,
        "current_voted": record.generations[-1].tally is not None,
        "generations": [
            {
                "generation_number": g.generation_number,
                "total_votes": sum(g.tally) if g.tally is not None else None,
            }
            for g in record.generations
        ],
    }


# -- application ------------------------------------------------------------------

def create_app(data_dir: str | Path, backends: dict[str, Backend],
               default_schema: AttributeSchema | None = None,
               default_backend: str = "mock",
               ui_dir: str | Path | None = None,
               cors_origins: tuple[str, ...] = ("*",),
               parallelism: int = 4) -> FastAPI:
    manager = SessionManager(data_dir, backends, default_schema,
                             default_backend, parallelism)
    app = FastAPI(title="promptga", version=API_VERSION)
    app.state.manager = manager
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(ApiError)
    async def on_api_error(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.http_status,
            content={"error": {"code": exc.code, "message": exc.message}},
        )

    @app.get("/api/health")
    def health():
        return {"status": "ok", "version": API_VERSION}

    @app.post("/api/sessions", status_code=201)
    def create_session(body: dict):
        managed = manager.create(body or {})
        with managed.state_lock:
            return {
                "session_id": managed.runtime.record.session_id,
                "population": population_payload(managed.runtime, 0),
            }

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str):
        managed = manager.get(session_id)
        with managed.state_lock:
            return session_summary(managed.runtime)

    @app.get("/api/sessions/{session_id}/population")
    def get_population(session_id: str, generation: int | None = None):
        managed = manager.get(session_id)
        with managed.state_lock:
            runtime = managed.runtime
            k = (runtime.current_population.generation_number
                 if generation is None else generation)
            try:
                return population_payload(runtime, k)
            except KeyError:
                raise ApiError("generation_not_found", f"no generation {k}", 404) from None

    @app.post("/api/sessions/{session_id}/votes")
    def post_votes(session_id: str, body: dict):
        managed = manager.get(session_id)
        manager.vote(managed, (body or {}).get("votes"))
        return {"accepted": True}

    @app.post("/api/sessions/{session_id}/evolve")
    def post_evolve(session_id: str):
        managed = manager.get(session_id)
        population = manager.evolve(managed)
        with managed.state_lock:
            return population_payload(managed.runtime, population.generation_number)

    @app.get("/api/sessions/{session_id}/model")
    def get_model(session_id: str):
        managed = manager.get(session_id)
        with managed.state_lock:
            try:
                return export_model(managed.runtime.record)
            except NoVotesError as exc:
                raise ApiError("no_votes_yet", str(exc), 409) from exc

    @app.post("/api/sessions/{session_id}/model/sample")
    def post_sample(session_id: str, body: dict):
        managed = manager.get(session_id)
        count = (body or {}).get("count", 1)
        seed = (body or {}).get("seed")
        if not isinstance(count, int) or isinstance(count, bool) or count < 1:
            raise ApiError("invalid_count", "count must be a positive integer", 400)
        with managed.state_lock:
            record = managed.runtime.record
            try:
                model = final_model(record)
            except NoVotesError as exc:
                raise ApiError("no_votes_yet", str(exc), 409) from exc
            schema = record.schema
        rng = random.Random(seed) if seed is not None else random.Random()
        prompts = [sample_prompt(schema, model, rng)[1].text for _ in range(count)]
        return {"prompts": prompts}

    @app.get("/images/{content_hash}.png")
    def get_image(content_hash: str):
        path = manager.store.path_for(content_hash)
        if not path.is_file():
            raise ApiError("image_not_found", f"no image {content_hash}", 404)
        return FileResponse(path, media_type="image/png")

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
