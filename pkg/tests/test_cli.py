from __future__ import annotations

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from promptga.cli import main

REPO = Path(__file__).resolve().parent.parent
KANDINSKY = REPO / "schemas" / "kandinsky.json"
PROFILE = REPO / "profiles" / "kandinsky-demo.json"
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture
def runner():
    return CliRunner()


class TestValidateSchema:
    def test_shipped_kandinsky_is_clean(self, runner):
        result = runner.invoke(main, ["validate-schema", str(KANDINSKY)])
        assert result.exit_code == 0, result.output

    def test_violations_exit_two(self, runner, tmp_path):
        doc = json.loads(KANDINSKY.read_text())
        doc["attributes"][0]["select_count"] = 6
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc))
        result = runner.invoke(main, ["validate-schema", str(bad)])
        assert result.exit_code == 2
        assert "bad_select_count" in result.output

    def test_parse_error_exit_two(self, runner, tmp_path):
        bad = tmp_path / "broken.json"
        bad.write_text("{nope")
        result = runner.invoke(main, ["validate-schema", str(bad)])
        assert result.exit_code == 2


class TestRender:
    def test_golden_chromosome(self, runner):
        result = runner.invoke(main, [
            "render", "--chromosome", str(GOLDEN / "chromosome_demo.json")])
        assert result.exit_code == 0, result.output
        golden = json.loads((GOLDEN / "prompt_corpus.json").read_text())[0]
        assert result.output.strip() == golden["prompt"]

    def test_invalid_genotype_exit_two(self, runner, tmp_path):
        bad = tmp_path / "c.json"
        bad.write_text(json.dumps({"style": "kandinsky"}))
        result = runner.invoke(main, ["render", "--chromosome", str(bad)])
        assert result.exit_code == 2


class TestSample:
    @pytest.fixture
    def model_file(self, tmp_path, schema, config):
        from promptga.generator import GenerationParams
        from promptga.session import SessionRuntime, dumps_model_document, export_model

        runtime = SessionRuntime.create(
            schema=schema, config=config, params=GenerationParams(),
            backend_id="mock", master_seed=5)
        runtime.vote([2, 1] + [0] * 14)
        runtime.evolve_next()
        path = tmp_path / "model.json"
        path.write_text(dumps_model_document(export_model(runtime.record)))
        return path

    def test_seeded_sampling_is_stable(self, runner, model_file):
        args = ["sample", "--model", str(model_file), "--count", "4", "--seed", "3"]
        a = runner.invoke(main, args)
        b = runner.invoke(main, args)
        assert a.exit_code == 0, a.output
        assert a.output == b.output
        lines = a.output.strip().splitlines()
        assert len(lines) == 4
        assert all(line.startswith("kandinsky, ") for line in lines)

    def test_rejects_non_model_file(self, runner, tmp_path):
        bogus = tmp_path / "x.json"
        bogus.write_text("{}")
        result = runner.invoke(main, ["sample", "--model", str(bogus)])
        assert result.exit_code == 2


class TestSimulate:
    def test_convergent_run_exit_zero(self, runner, tmp_path):
        report = tmp_path / "report.csv"
        result = runner.invoke(main, [
            "simulate", "--profile", str(PROFILE), "--generations", "5",
            "--runs", "5", "--master-seed", "1", "--report", str(report)])
        assert result.exit_code == 0, result.output
        assert report.is_file()
        summary = json.loads((tmp_path / "report.summary.json").read_text())
        assert summary["converged"] is True
        rows = report.read_text().strip().splitlines()
        assert len(rows) == 1 + 5 * 6  # header + runs x (generations + 1)

    def test_byte_identical_reports(self, runner, tmp_path):
        args = lambda out: [
            "simulate", "--profile", str(PROFILE), "--generations", "3",
            "--runs", "3", "--master-seed", "9", "--report", str(out)]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert runner.invoke(main, args(a)).exit_code == 0
        assert runner.invoke(main, args(b)).exit_code == 0
        assert a.read_bytes() == b.read_bytes()

    def test_generation_zero_boundary(self, runner, tmp_path):
        report = tmp_path / "g0.csv"
        result = runner.invoke(main, [
            "simulate", "--profile", str(PROFILE), "--generations", "0",
            "--runs", "2", "--master-seed", "1", "--report", str(report)])
        rows = report.read_text().strip().splitlines()
        assert len(rows) == 1 + 2  # header + one generation-0 row per run

    def test_images_mode_matches_genotype_mode(self, runner, tmp_path):
        base = ["simulate", "--profile", str(PROFILE), "--generations", "2",
                "--runs", "2", "--master-seed", "4"]
        a, b = tmp_path / "no-img.csv", tmp_path / "img.csv"
        assert runner.invoke(main, base + ["--report", str(a)]).exit_code == 0
        assert runner.invoke(main, base + ["--report", str(b), "--images",
                                           "--data-dir", str(tmp_path / "imgs")]).exit_code == 0
        assert a.read_bytes() == b.read_bytes()
        assert any((tmp_path / "imgs" / "images").iterdir())

    def test_invalid_profile_exit_two(self, runner, tmp_path):
        bad = tmp_path / "profile.json"
        bad.write_text(json.dumps({"single": {"line": "zigzag"}}))
        result = runner.invoke(main, [
            "simulate", "--profile", str(bad), "--report", str(tmp_path / "r.csv")])
        assert result.exit_code == 2

    def test_unconverged_run_exit_one(self, runner, tmp_path):
        # pure-noise oracle cannot converge
        noisy = tmp_path / "noise.json"
        doc = json.loads(PROFILE.read_text())
        doc["noise"] = 1.0
        noisy.write_text(json.dumps(doc))
        result = runner.invoke(main, [
            "simulate", "--profile", str(noisy), "--generations", "2",
            "--runs", "3", "--master-seed", "2",
            "--report", str(tmp_path / "r.csv")])
        assert result.exit_code == 1


class TestServe:
    def test_txt2img_requires_backend_url(self, runner, tmp_path):
        result = runner.invoke(main, [
            "serve", "--data-dir", str(tmp_path), "--backend", "txt2img"])
        assert result.exit_code == 2
        assert "--backend-url" in result.output

    def test_bad_schema_file_exit_two(self, runner, tmp_path):
        bad = tmp_path / "schema.json"
        bad.write_text("{broken")
        result = runner.invoke(main, [
            "serve", "--data-dir", str(tmp_path), "--schema", str(bad)])
        assert result.exit_code == 2
