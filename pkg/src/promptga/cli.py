"""Operator entry points.

Every command is deterministic given its flags and seeds; simulate and
sample never touch the network in mock / genotype-only mode.

Exit codes: 0 success, 1 convergence-threshold failure (simulate),
2 usage or validation error.
"""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

import click

from . import engine as ga
from .generator import MockBackend, RemoteBackend
from .genome import chromosome_from_dict
from .oracle import ProfileError, load_profile
from .promptgen import render_prompt, sample_prompt
from .schema import (
    AttributeSchema,
    SchemaParseError,
    SchemaValidationError,
    kandinsky_default,
    load_schema,
    validate_schema,
)
from .session import canonical_json, load_model_document
from .simulate import run_simulation


def _read_schema(path: str | None) -> AttributeSchema:
    if path is None:
        return kandinsky_default()
    try:
        return load_schema(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise click.UsageError(f"cannot read schema file: {exc}")
    except (SchemaParseError, SchemaValidationError) as exc:
        raise click.UsageError(f"invalid schema file {path}: {exc}")


@click.group()
def main() -> None:
    """Evolve text-to-image prompts from votes into a personalized model."""


@main.command()
@click.option("--data-dir", "data_dir", required=True, type=click.Path(file_okay=False))
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--backend", "backend_id", default="mock", show_default=True,
              type=click.Choice(["mock", "txt2img"]))
@click.option("--backend-url", default=None, help="txt2img server base URL.")
@click.option("--schema", "schema_path", default=None,
              type=click.Path(exists=False, dir_okay=False),
              help="Default schema file (built-in kandinsky if omitted).")
@click.option("--ui-dir", default=None, type=click.Path(file_okay=False),
              help="Static UI bundle to serve at /.")
@click.option("--cors-origin", "cors_origins", multiple=True, default=("*",),
              show_default=True)
def serve(data_dir: str, port: int, host: str, backend_id: str,
          backend_url: str | None, schema_path: str | None,
          ui_dir: str | None, cors_origins: tuple[str, ...]) -> None:
    """Run the HTTP service until interrupted."""
    import uvicorn

    from .service import create_app

    if backend_id == "txt2img" and not backend_url:
        raise click.UsageError("--backend-url is required with --backend txt2img")
    schema = _read_schema(schema_path)
    backends = {"mock": MockBackend()}
    if backend_url:
        backends["txt2img"] = RemoteBackend(backend_url)
    app = create_app(data_dir, backends, default_schema=schema,
                     default_backend=backend_id, ui_dir=ui_dir,
                     cors_origins=cors_origins)
    try:
        uvicorn.run(app, host=host, port=port)
    except OSError as exc:
        raise click.UsageError(f"cannot bind {host}:{port}: {exc}")


@main.command()
@click.option("--schema", "schema_path", default=None, type=click.Path(dir_okay=False))
@click.option("--profile", "profile_path", required=True, type=click.Path(dir_okay=False))
@click.option("--generations", "-g", default=5, show_default=True, type=int)
@click.option("--runs", "-r", default=20, show_default=True, type=int)
@click.option("--master-seed", default=1, show_default=True, type=int)
@click.option("--report", "report_path", required=True, type=click.Path(dir_okay=False))
@click.option("--no-images/--images", default=True, show_default=True,
              help="Genotype-only mode (no rendering) vs mock-backend images.")
@click.option("--data-dir", "data_dir", default=None, type=click.Path(file_okay=False),
              help="Image store location when --images is on.")
@click.option("--population-size", "-n", default=16, show_default=True, type=int)
def simulate(schema_path: str | None, profile_path: str, generations: int,
             runs: int, master_seed: int, report_path: str, no_images: bool,
             data_dir: str | None, population_size: int) -> None:
    """Headless oracle benchmark; exit 1 when convergence thresholds fail."""
    schema = _read_schema(schema_path)
    try:
        profile = load_profile(Path(profile_path).read_text(encoding="utf-8"), schema)
    except OSError as exc:
        raise click.UsageError(f"cannot read profile file: {exc}")
    except ProfileError as exc:
        raise click.UsageError(f"invalid profile {profile_path}: {exc}")
    if generations < 0 or runs < 1:
        raise click.UsageError("--generations must be >= 0 and --runs >= 1")

    import tempfile

    config = ga.GAConfig(population_size=population_size)
    if no_images:
        report = run_simulation(schema, profile, generations, runs,
                                master_seed, config, with_images=False)
    else:
        if data_dir is not None:
            report = run_simulation(schema, profile, generations, runs,
                                    master_seed, config, with_images=True,
                                    data_dir=data_dir)
        else:
            with tempfile.TemporaryDirectory(prefix="promptga-sim-") as tmp:
                report = run_simulation(schema, profile, generations, runs,
                                        master_seed, config, with_images=True,
                                        data_dir=tmp)

    out = Path(report_path)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(report.csv_text(schema), encoding="utf-8")
        summary_path = out.with_suffix(".summary.json") if out.suffix == ".csv" \
            else Path(str(out) + ".summary.json")
        summary_path.write_text(canonical_json(report.summary) + "\n", encoding="utf-8")
    except OSError as exc:
        raise click.UsageError(f"cannot write report: {exc}")

    s = report.summary
    click.echo(f"runs={s['runs']} generations={s['generations']} "
               f"median_best_match={s['median_best_match_rate_single']:.4f} "
               f"median_best_overlap={s['median_best_multi_overlap']:.4f} "
               f"converged={s['converged']} "
               f"runtime={s['runtime_seconds']}s")
    click.echo(f"report: {out}")
    click.echo(f"summary: {summary_path}")
    if not report.converged:
        sys.exit(1)


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(dir_okay=False))
@click.option("--count", "-c", default=1, show_default=True, type=int)
@click.option("--seed", default=None, type=int)
def sample(model_path: str, count: int, seed: int | None) -> None:
    """Print prompts drawn from an exported personalized model."""
    if count < 1:
        raise click.UsageError("--count must be >= 1")
    try:
        bundle = load_model_document(Path(model_path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise click.UsageError(f"cannot read model file: {exc}")
    except ValueError as exc:
        raise click.UsageError(f"invalid model document: {exc}")
    rng = random.Random(seed) if seed is not None else random.Random()
    for _ in range(count):
        _, prompt = sample_prompt(bundle.schema, bundle.model, rng)
        click.echo(prompt.text)


@main.command()
@click.option("--chromosome", "chromosome_path", required=True,
              type=click.Path(dir_okay=False),
              help="Genotype JSON file (see docs/FORMATS.md).")
@click.option("--schema", "schema_path", default=None, type=click.Path(dir_okay=False))
def render(chromosome_path: str, schema_path: str | None) -> None:
    """Print the prompt for one genotype file."""
    schema = _read_schema(schema_path)
    try:
        doc = json.loads(Path(chromosome_path).read_text(encoding="utf-8"))
        chromosome = chromosome_from_dict(doc)
    except OSError as exc:
        raise click.UsageError(f"cannot read chromosome file: {exc}")
    except (ValueError, KeyError, TypeError) as exc:
        raise click.UsageError(f"invalid chromosome file: {exc}")
    try:
        click.echo(render_prompt(schema, chromosome).text)
    except ValueError as exc:
        raise click.UsageError(f"chromosome does not fit schema: {exc}")


@main.command("validate-schema")
@click.argument("schema_file", type=click.Path(dir_okay=False))
def validate_schema_cmd(schema_file: str) -> None:
    """Validate a schema file; exit 0 when clean, 2 with violations listed."""
    try:
        text = Path(schema_file).read_text(encoding="utf-8")
    except OSError as exc:
        raise click.UsageError(f"cannot read schema file: {exc}")
    try:
        schema = load_schema(text)
    except SchemaValidationError as exc:
        for violation in exc.violations:
            click.echo(str(violation), err=True)
        sys.exit(2)
    except SchemaParseError as exc:
        click.echo(f"parse error: {exc}", err=True)
        sys.exit(2)
    violations = validate_schema(schema)
    if violations:
        for violation in violations:
            click.echo(str(violation), err=True)
        sys.exit(2)
    click.echo(f"{schema_file}: ok ({len(schema.attributes)} attributes, "
               f"style {schema.style_keyword!r})")


if __name__ == "__main__":
    main()
