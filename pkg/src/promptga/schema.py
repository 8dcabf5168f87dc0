"""Attribute-value grammar for style prompts.

A schema declares one style keyword plus an ordered list of attributes.
Each attribute is one of three kinds:

* ``single_discrete`` — exactly one value is chosen from a domain
* ``multi_discrete``  — a fixed-size subset is chosen from a domain
* ``continuous``      — a real value in a closed range, realized by a
  backend adapter (LoRA) named by the attribute

Schemas are immutable after construction and safe to share across threads.
The on-disk form is a JSON document with top-level keys ``version``,
``style_keyword`` and ``attributes``; see docs/FORMATS.md.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

SINGLE_DISCRETE = "single_discrete"
MULTI_DISCRETE = "multi_discrete"
CONTINUOUS = "continuous"
KINDS = (SINGLE_DISCRETE, MULTI_DISCRETE, CONTINUOUS)

SCHEMA_FORMAT_VERSION = "1.0"

_TOKEN_RE = re.compile(r"^[a-z0-9][a-z0-9_-]*$")


class SchemaParseError(ValueError):
    """The schema document is not well-formed."""


class SchemaValidationError(ValueError):
    """The schema document parsed but violates the grammar rules."""

    def __init__(self, violations: list["Violation"]):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


@dataclass(frozen=True)
class Violation:
    """One broken rule, attributed to an attribute ("" = schema level)."""

    attribute: str
    rule: str
    message: str

    def __str__(self) -> str:
        where = self.attribute or "<schema>"
        return f"{where}: {self.rule}: {self.message}"


@dataclass(frozen=True)
class AttributeDef:
    name: str
    kind: str
    values: tuple[str, ...] = ()
    select_count: int = 0
    range: tuple[float, float] | None = None
    pole_labels: tuple[str, str] | None = None
    lora_name: str = ""


@dataclass(frozen=True)
class AttributeSchema:
    style_keyword: str
    attributes: tuple[AttributeDef, ...]
    version: str = SCHEMA_FORMAT_VERSION

    def attribute(self, name: str) -> AttributeDef:
        for attr in self.attributes:
            if attr.name == name:
                return attr
        raise KeyError(name)

    def by_kind(self, kind: str) -> tuple[AttributeDef, ...]:
        return tuple(a for a in self.attributes if a.kind == kind)

    @property
    def discrete_attributes(self) -> tuple[AttributeDef, ...]:
        return tuple(a for a in self.attributes if a.kind != CONTINUOUS)

    @property
    def continuous_attributes(self) -> tuple[AttributeDef, ...]:
        return tuple(a for a in self.attributes if a.kind == CONTINUOUS)


def kandinsky_default() -> AttributeSchema:
    """Built-in schema for the Kandinsky Bauhaus style.

    Six primary hues of which three are picked, one line type, two of the
    four point/plane elements, and three signed adapter axes for
    brightness, structure and parallel composition.
    """
    return AttributeSchema(
        style_keyword="kandinsky",
        version=SCHEMA_FORMAT_VERSION,
        attributes=(
            AttributeDef(
                name="hue",
                kind=MULTI_DISCRETE,
                values=("red", "yellow", "blue", "orange", "green", "violet"),
                select_count=3,
            ),
            AttributeDef(
                name="line",
                kind=SINGLE_DISCRETE,
                values=("straight", "curve", "angular"),
            ),
            AttributeDef(
                name="elements",
                kind=MULTI_DISCRETE,
                values=("point", "triangle", "square", "circle"),
                select_count=2,
            ),
            AttributeDef(
                name="brightness",
                kind=CONTINUOUS,
                range=(-1.0, 1.0),
                pole_labels=("dark", "light"),
                lora_name="kandinsky_brightness",
            ),
            AttributeDef(
                name="structure",
                kind=CONTINUOUS,
                range=(-1.0, 1.0),
                pole_labels=("acentric", "centric"),
                lora_name="kandinsky_structure",
            ),
            AttributeDef(
                name="parallel",
                kind=CONTINUOUS,
                range=(-1.0, 1.0),
                pole_labels=("inner", "external"),
                lora_name="kandinsky_parallel",
            ),
        ),
    )


def _is_token(s: object) -> bool:
    return isinstance(s, str) and bool(_TOKEN_RE.match(s))


def validate_schema(schema: AttributeSchema) -> list[Violation]:
    """Return every rule violation, ordered by attribute position.

    An empty list means the schema is valid. Violations are returned,
    never raised.
    """
    out: list[Violation] = []
    if not _is_token(schema.style_keyword):
        out.append(Violation("", "bad_style_keyword",
                             f"style keyword {schema.style_keyword!r} is not a lowercase token"))
    if not schema.attributes:
        out.append(Violation("", "empty_schema", "schema declares no attributes"))

    seen: set[str] = set()
    for attr in schema.attributes:
        name = attr.name if isinstance(attr.name, str) else repr(attr.name)
        if not _is_token(attr.name):
            out.append(Violation(name, "bad_name",
                                 "attribute names must be nonempty lowercase tokens without whitespace"))
        if attr.name in seen:
            out.append(Violation(name, "duplicate_name", "attribute name already declared"))
        seen.add(attr.name)

        if attr.kind not in KINDS:
            out.append(Violation(name, "bad_kind", f"unknown kind {attr.kind!r}"))
            continue

        if attr.kind == CONTINUOUS:
            out.extend(_check_continuous(name, attr))
        else:
            out.extend(_check_discrete(name, attr))
    return out


def _check_discrete(name: str, attr: AttributeDef) -> list[Violation]:
    out: list[Violation] = []
    bad = [v for v in attr.values if not _is_token(v)]
    if bad:
        out.append(Violation(name, "bad_value", f"values {bad!r} are not lowercase tokens"))
    if len(set(attr.values)) != len(attr.values):
        out.append(Violation(name, "duplicate_value", "value domain contains duplicates"))
    if attr.kind == SINGLE_DISCRETE:
        if len(attr.values) < 2:
            out.append(Violation(name, "too_few_values",
                                 "single_discrete needs at least 2 values"))
    else:
        if attr.select_count < 1:
            out.append(Violation(name, "bad_select_count", "select_count must be >= 1"))
        elif len(attr.values) <= attr.select_count:
            out.append(Violation(name, "bad_select_count",
                                 f"domain size {len(attr.values)} must exceed select_count {attr.select_count}"))
    if attr.range is not None or attr.pole_labels is not None or attr.lora_name:
        out.append(Violation(name, "unexpected_continuous_fields",
                             "discrete attributes must not carry range/pole_labels/lora_name"))
    return out


def _check_continuous(name: str, attr: AttributeDef) -> list[Violation]:
    out: list[Violation] = []
    if attr.values:
        out.append(Violation(name, "unexpected_values",
                             "continuous attributes must not carry a values list"))
    if attr.range is None:
        out.append(Violation(name, "missing_range", "continuous attributes need a [lo, hi] range"))
    else:
        lo, hi = attr.range
        if not (lo < hi):
            out.append(Violation(name, "range_degenerate", f"range [{lo}, {hi}] needs lo < hi"))
    if attr.pole_labels is None or len(attr.pole_labels) != 2:
        out.append(Violation(name, "missing_pole_labels",
                             "continuous attributes need a pair of pole labels"))
    if not _is_token(attr.lora_name):
        out.append(Violation(name, "missing_lora_name",
                             "continuous attributes need a lora_name token"))
    return out


# -- document (de)serialization -----------------------------------------

def schema_to_dict(schema: AttributeSchema) -> dict:
    """Canonical dict form: declared attribute order, fixed key order."""
    attrs = []
    for a in schema.attributes:
        d: dict = {"name": a.name, "kind": a.kind}
        if a.kind == CONTINUOUS:
            lo, hi = a.range if a.range is not None else (0.0, 0.0)
            d["range"] = [float(lo), float(hi)]
            d["pole_labels"] = list(a.pole_labels) if a.pole_labels else []
            d["lora_name"] = a.lora_name
        else:
            d["values"] = list(a.values)
            if a.kind == MULTI_DISCRETE:
                d["select_count"] = a.select_count
        attrs.append(d)
    return {
        "version": schema.version,
        "style_keyword": schema.style_keyword,
        "attributes": attrs,
    }


def serialize_schema(schema: AttributeSchema) -> str:
    """Bit-exact canonical text form (reals in minimal decimal form)."""
    return json.dumps(schema_to_dict(schema), indent=2, ensure_ascii=False) + "\n"


def schema_from_dict(doc: object) -> AttributeSchema:
    if not isinstance(doc, dict):
        raise SchemaParseError("schema document must be an object")
    version = doc.get("version")
    if not isinstance(version, str):
        raise SchemaParseError("missing or non-string 'version'")
    style = doc.get("style_keyword")
    raw_attrs = doc.get("attributes")
    if not isinstance(raw_attrs, list):
        raise SchemaParseError("missing or non-array 'attributes'")

    attrs: list[AttributeDef] = []
    for i, raw in enumerate(raw_attrs):
        if not isinstance(raw, dict):
            raise SchemaParseError(f"attributes[{i}] is not an object")
        attrs.append(_attr_from_dict(raw, i))

    schema = AttributeSchema(
        style_keyword=style if isinstance(style, str) else "",
        attributes=tuple(attrs),
        version=version,
    )
    violations = validate_schema(schema)
    if violations:
        raise SchemaValidationError(violations)
    return schema


def _attr_from_dict(raw: dict, index: int) -> AttributeDef:
    name = raw.get("name")
    kind = raw.get("kind")
    if not isinstance(name, str):
        raise SchemaParseError(f"attributes[{index}] has no string 'name'")
    if not isinstance(kind, str):
        raise SchemaParseError(f"attribute {name!r} has no string 'kind'")

    values = raw.get("values", [])
    if not isinstance(values, list) or not all(isinstance(v, str) for v in values):
        raise SchemaParseError(f"attribute {name!r}: 'values' must be an array of strings")

    rng = raw.get("range")
    range_: tuple[float, float] | None = None
    if rng is not None:
        if (not isinstance(rng, list) or len(rng) != 2
                or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in rng)):
            raise SchemaParseError(f"attribute {name!r}: 'range' must be [lo, hi]")
        range_ = (float(rng[0]), float(rng[1]))

    poles = raw.get("pole_labels")
    pole_labels: tuple[str, str] | None = None
    if poles is not None:
        if not isinstance(poles, list) or len(poles) != 2 or not all(isinstance(p, str) for p in poles):
            raise SchemaParseError(f"attribute {name!r}: 'pole_labels' must be a pair of strings")
        pole_labels = (poles[0], poles[1])

    select_count = raw.get("select_count", 0)
    if not isinstance(select_count, int) or isinstance(select_count, bool):
        raise SchemaParseError(f"attribute {name!r}: 'select_count' must be an integer")

    lora_name = raw.get("lora_name", "")
    if not isinstance(lora_name, str):
        raise SchemaParseError(f"attribute {name!r}: 'lora_name' must be a string")

    return AttributeDef(
        name=name,
        kind=kind,
        values=tuple(values),
        select_count=select_count,
        range=range_,
        pole_labels=pole_labels,
        lora_name=lora_name,
    )


def load_schema(document: str) -> AttributeSchema:
    """Parse and validate a schema document (JSON text).

    Raises SchemaParseError for malformed documents and
    SchemaValidationError (naming attribute and rule) for invalid ones.
    """
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SchemaParseError(f"not valid JSON: {exc}") from exc
    return schema_from_dict(doc)
