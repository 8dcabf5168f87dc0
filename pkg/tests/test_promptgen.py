from __future__ import annotations

import json
import random
import re
from dataclasses import replace
from pathlib import Path

import pytest
from scipy import stats

from promptga import engine as ga
from promptga.genome import chromosome_from_dict, random_chromosome, validate_chromosome
from promptga.preference import ContinuousStats, PreferenceModel
from promptga.promptgen import (
    PromptString,
    build_individual,
    init_population,
    render_prompt,
    sample_prompt,
)

GOLDEN = Path(__file__).parent / "golden" / "prompt_corpus.json"

WORKED_PROMPT = (
    "kandinsky, hue:red, hue:yellow, hue:orange, line:angular, "
    "elements:point, elements:square, <lora:kandinsky_brightness:0.80>, "
    "<lora:kandinsky_structure:-0.60>, <lora:kandinsky_parallel_external:0.90>"
)


def worked_chromosome():
    return chromosome_from_dict({
        "style": "kandinsky",
        "continuous": {"brightness": 0.8, "structure": -0.6, "parallel": 0.9},
        "single": {"line": "angular"},
        "multi": {"hue": ["orange", "yellow", "red"], "elements": ["point", "square"]},
        "seed": 1234567,
    })


class TestRenderPrompt:
    def test_worked_example(self, schema):
        assert render_prompt(schema, worked_chromosome()).text == WORKED_PROMPT

    def test_negative_parallel_selects_inner_adapter(self, schema):
        c = worked_chromosome()
        c = replace(c, continuous={**c.continuous, "parallel": -0.5})
        assert "<lora:kandinsky_parallel_inner:0.50>" in render_prompt(schema, c).text

    def test_deterministic_bytes(self, schema, model):
        c = random_chromosome(schema, model, random.Random(3))
        assert render_prompt(schema, c) == render_prompt(schema, c)
        assert render_prompt(schema, c).text.encode() == render_prompt(schema, c).text.encode()

    def test_text_starts_with_style_keyword(self, schema, model):
        rng = random.Random(4)
        for _ in range(50):
            prompt = render_prompt(schema, random_chromosome(schema, model, rng))
            assert prompt.text.startswith("kandinsky, ")
            assert prompt.negative_text == ""

    def test_every_gene_value_appears_exactly_once(self, schema, model):
        rng = random.Random(5)
        for _ in range(50):
            c = random_chromosome(schema, model, rng)
            tokens = render_prompt(schema, c).text.split(", ")
            discrete = [t for t in tokens if ":" in t and not t.startswith("<lora")]
            expected = {f"line:{c.single['line']}"}
            expected |= {f"hue:{v}" for v in c.multi["hue"]}
            expected |= {f"elements:{v}" for v in c.multi["elements"]}
            assert sorted(discrete) == sorted(expected)

    def test_one_adapter_tag_per_continuous_attribute(self, schema, model):
        c = random_chromosome(schema, model, random.Random(6))
        text = render_prompt(schema, c).text
        assert len(re.findall(r"<lora:[^>]+>", text)) == 3
        assert text.count("kandinsky_brightness") == 1
        assert text.count("kandinsky_structure") == 1
        assert text.count("kandinsky_parallel_") == 1

    def test_invalid_chromosome_rejected(self, schema):
        c = replace(worked_chromosome(), style="wrong")
        with pytest.raises(ValueError):
            render_prompt(schema, c)

    def test_golden_corpus(self, schema):
        from promptga.genome import canonical_string

        entries = json.loads(GOLDEN.read_text())
        assert len(entries) >= 4
        for entry in entries:
            c = chromosome_from_dict(entry["genotype"])
            assert canonical_string(schema, c) == entry["canonical"]
            assert render_prompt(schema, c).text == entry["prompt"]


class TestIndividual:
    def test_prompt_is_derived(self, schema, model):
        c = random_chromosome(schema, model, random.Random(12))
        ind = build_individual(schema, c, 5)
        assert ind.prompt == render_prompt(schema, c).text
        assert ind.index == 5
        assert ind.image is None


class TestInitPopulation:
    def test_default_sixteen(self, schema, model):
        chromosomes = init_population(schema, model, 16, random.Random(1))
        assert len(chromosomes) == 16
        assert all(validate_chromosome(schema, c) == [] for c in chromosomes)

    def test_boundary_two(self, schema, model):
        assert len(init_population(schema, model, 2, random.Random(1))) == 2

    def test_too_small_rejected(self, schema, model):
        with pytest.raises(ValueError):
            init_population(schema, model, 1, random.Random(1))

    def test_same_seed_same_population(self, schema, model):
        a = init_population(schema, model, 16, random.Random(99))
        b = init_population(schema, model, 16, random.Random(99))
        assert a == b


class TestSamplePrompt:
    def test_same_rng_state_same_output(self, schema, model):
        a = sample_prompt(schema, model, random.Random(17))
        b = sample_prompt(schema, model, random.Random(17))
        assert a == b

    def test_outputs_always_valid(self, schema, model):
        rng = random.Random(18)
        for _ in range(100):
            c, prompt = sample_prompt(schema, model, rng)
            assert validate_chromosome(schema, c) == []
            assert isinstance(prompt, PromptString)

    def test_optimized_model_marginals(self, schema, config):
        base = ga.fresh_model(schema, config)
        hue = {"red": 1000.0, "yellow": 1000.0, "orange": 1000.0,
               "blue": 1.0, "green": 1.0, "violet": 1.0}
        # brightness distribution pinned at N(0.8, 0.01)
        count = 10.0
        brightness = ContinuousStats(sum_v=count, sum_vx=count * 0.8,
                                     sum_vxx=count * (0.01 + 0.64))
        model = PreferenceModel(
            weights={**base.weights, "hue": hue},
            continuous={**base.continuous, "brightness": brightness},
            variance_floor=base.variance_floor)
        assert abs(model.mean_of("brightness") - 0.8) < 1e-12
        assert abs(model.variance_of("brightness") - 0.01) < 1e-12

        rng = random.Random(19)
        in_band = 0
        warm = 0
        n = 1_000
        for _ in range(n):
            c, prompt = sample_prompt(schema, model, rng)
            if 0.5 <= c.continuous["brightness"] <= 1.0:
                in_band += 1
            if set(c.multi["hue"]) == {"red", "yellow", "orange"}:
                warm += 1
            assert f"<lora:kandinsky_brightness:{c.continuous['brightness']:.2f}>" in prompt.text
        assert in_band / n >= 0.95
        assert warm / n > 0.9

    def test_uniform_fresh_model_marginals(self, schema, model):
        rng = random.Random(20)
        n = 10_000
        counts = {v: 0 for v in ("straight", "curve", "angular")}
        for _ in range(n):
            c, _ = sample_prompt(schema, model, rng)
            counts[c.single["line"]] += 1
        result = stats.chisquare(list(counts.values()))
        assert result.pvalue > 0.001
