"""Evolving user-preference state: value weights and continuous distributions.

The model has two halves:

* a weight table with one positive weight per (attribute, value) pair,
  initialized to 1 and only ever incremented by votes;
* per continuous attribute, vote-weighted sufficient statistics
  (count, sum, sum of squares) seeded with prior pseudo-observations,
  from which a normal distribution is derived.

Models are treated as immutable; updates produce new instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .schema import CONTINUOUS, AttributeSchema

DEFAULT_PRIOR_PSEUDO_COUNT = 4.0
DEFAULT_PRIOR_MEAN = 0.0
DEFAULT_PRIOR_VARIANCE = 0.25
DEFAULT_VARIANCE_FLOOR = 0.01


class ModelMismatchError(ValueError):
    """The model does not cover the schema it is being used with."""


@dataclass(frozen=True)
class ContinuousStats:
    """Vote-weighted sufficient statistics for one continuous attribute."""

    sum_v: float
    sum_vx: float
    sum_vxx: float

    def mean(self) -> float:
        return self.sum_vx / self.sum_v

    def variance(self, floor: float) -> float:
        m = self.mean()
        return max(self.sum_vxx / self.sum_v - m * m, floor)

    def accumulate(self, votes: float, x: float) -> "ContinuousStats":
        return ContinuousStats(
            sum_v=self.sum_v + votes,
            sum_vx=self.sum_vx + votes * x,
            sum_vxx=self.sum_vxx + votes * x * x,
        )


@dataclass(frozen=True)
class PreferenceModel:
    weights: dict[str, dict[str, float]]
    continuous: dict[str, ContinuousStats]
    variance_floor: float = DEFAULT_VARIANCE_FLOOR

    @staticmethod
    def fresh(
        schema: AttributeSchema,
        prior_pseudo_count: float = DEFAULT_PRIOR_PSEUDO_COUNT,
        prior_mean: float = DEFAULT_PRIOR_MEAN,
        prior_variance: float = DEFAULT_PRIOR_VARIANCE,
        variance_floor: float = DEFAULT_VARIANCE_FLOOR,
    ) -> "PreferenceModel":
        """All weights at 1; continuous stats hold only the prior."""
        weights = {
            a.name: {v: 1.0 for v in a.values}
            for a in schema.attributes
            if a.kind != CONTINUOUS
        }
        prior = ContinuousStats(
            sum_v=prior_pseudo_count,
            sum_vx=prior_pseudo_count * prior_mean,
            sum_vxx=prior_pseudo_count * (prior_variance + prior_mean * prior_mean),
        )
        continuous = {a.name: prior for a in schema.attributes if a.kind == CONTINUOUS}
        return PreferenceModel(weights=weights, continuous=continuous,
                               variance_floor=variance_floor)

    def weight_of(self, attribute: str, value: str) -> float:
        try:
            return self.weights[attribute][value]
        except KeyError:
            raise ModelMismatchError(f"no weight entry for {attribute}:{value}") from None

    def mean_of(self, attribute: str) -> float:
        return self._stats(attribute).mean()

    def variance_of(self, attribute: str) -> float:
        return self._stats(attribute).variance(self.variance_floor)

    def stddev_of(self, attribute: str) -> float:
        return math.sqrt(self.variance_of(attribute))

    def _stats(self, attribute: str) -> ContinuousStats:
        try:
            return self.continuous[attribute]
        except KeyError:
            raise ModelMismatchError(f"no distribution for attribute {attribute!r}") from None

    def missing_entries(self, schema: AttributeSchema) -> list[str]:
        """Entries the schema requires but the model lacks."""
        missing: list[str] = []
        for attr in schema.attributes:
            if attr.kind == CONTINUOUS:
                if attr.name not in self.continuous:
                    missing.append(attr.name)
                continue
            table = self.weights.get(attr.name)
            if table is None:
                missing.append(attr.name)
                continue
            missing.extend(f"{attr.name}:{v}" for v in attr.values if v not in table)
        return missing

    def check_covers(self, schema: AttributeSchema) -> None:
        missing = self.missing_entries(schema)
        if missing:
            raise ModelMismatchError(f"model missing entries: {', '.join(missing)}")


def model_to_dict(model: PreferenceModel) -> dict:
    """Lossless canonical dict form (weights and raw statistics)."""
    return {
        "weights": {attr: dict(table) for attr, table in model.weights.items()},
        "continuous": {
            attr: {
                "sum_v": st.sum_v,
                "sum_vx": st.sum_vx,
                "sum_vxx": st.sum_vxx,
                "mean": st.mean(),
                "variance": st.variance(model.variance_floor),
            }
            for attr, st in model.continuous.items()
        },
        "variance_floor": model.variance_floor,
    }


def model_from_dict(doc: dict) -> PreferenceModel:
    weights = {
        str(attr): {str(v): float(w) for v, w in table.items()}
        for attr, table in doc["weights"].items()
    }
    continuous = {
        str(attr): ContinuousStats(
            sum_v=float(st["sum_v"]),
            sum_vx=float(st["sum_vx"]),
            sum_vxx=float(st["sum_vxx"]),
        )
        for attr, st in doc["continuous"].items()
    }
    return PreferenceModel(
        weights=weights,
        continuous=continuous,
        variance_floor=float(doc.get("variance_floor", DEFAULT_VARIANCE_FLOOR)),
    )
