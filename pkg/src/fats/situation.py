"""Situations, weighted situation similarity, and situation risk.

A situation picks one concept per dimension.  Two situations are compared
with a weighted sum of per-dimension concept similarities; the weights are
running means of the per-dimension similarities observed at past retrievals.

Risk is a convex combination of three signals:

* concept risk: mean of the (inherited) cv annotations of the three concepts,
* semantic risk: highest similarity to any declared critical situation,
* variance risk: ``1 - min(1, 4 * var)`` of the pooled click/fail rewards.

High risk drives the freshness-exploration rate toward its lower bound.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from fats.ontology import (
    DIMENSIONS,
    Concept,
    Dimension,
    Ontology,
    OntologyError,
    concept_similarity,
    load_ontology_file,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Situation:
    location: Concept
    time: Concept
    social: Concept

    def __post_init__(self):
        for dim, c in zip(DIMENSIONS, self.concepts):
            if not isinstance(c, Concept) or c.dimension is not dim:
                raise OntologyError(f"{dim.value} slot holds {c!r}")

    @property
    def concepts(self) -> tuple[Concept, Concept, Concept]:
        return (self.location, self.time, self.social)

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.location.name, self.time.name, self.social.name)

    def __str__(self) -> str:
        return "(" + ", ".join(self.key) + ")"


@dataclass(frozen=True)
class Ontologies:
    """The three per-dimension trees a situation is interpreted against."""

    location: Ontology
    time: Ontology
    social: Ontology

    def __post_init__(self):
        for dim, o in zip(DIMENSIONS, self.trees):
            if o.dimension is not dim:
                raise OntologyError(f"{dim.value} slot holds a {o.dimension.value} ontology")

    @classmethod
    def from_files(cls, location: str | Path, time: str | Path, social: str | Path) -> "Ontologies":
        return cls(load_ontology_file(location), load_ontology_file(time), load_ontology_file(social))

    @property
    def trees(self) -> tuple[Ontology, Ontology, Ontology]:
        return (self.location, self.time, self.social)

    def __getitem__(self, dim: Dimension) -> Ontology:
        return self.trees[DIMENSIONS.index(dim)]

    def situation(self, location: str, time: str, social: str) -> Situation:
        return Situation(
            self.location.concept(location),
            self.time.concept(time),
            self.social.concept(social),
        )

    def roots(self) -> Situation:
        return self.situation(self.location.root, self.time.root, self.social.root)

    def validate(self, s: Situation) -> None:
        for o, c in zip(self.trees, s.concepts):
            if c not in o or o.nodes[c.name] != c:
                raise OntologyError(f"concept {c.name!r} is not part of the loaded {o.dimension.value} ontology")


@dataclass(frozen=True)
class DimensionWeights:
    """Running per-dimension similarity sums; weights are their normalized means.

    With no history the weights are uniform.
    """

    history_count: int = 0
    sums: tuple[float, float, float] = (0.0, 0.0, 0.0)

    @property
    def raw(self) -> tuple[float, float, float]:
        if self.history_count == 0:
            return (1 / 3, 1 / 3, 1 / 3)
        n = self.history_count
        return (self.sums[0] / n, self.sums[1] / n, self.sums[2] / n)

    @property
    def alphas(self) -> tuple[float, float, float]:
        raw = self.raw
        total = sum(raw)
        if total <= 0.0:
            return (1 / 3, 1 / 3, 1 / 3)
        return (raw[0] / total, raw[1] / total, raw[2] / total)

    @classmethod
    def fixed(cls, alphas: Sequence[float]) -> "DimensionWeights":
        """Weights pinned to ``alphas`` (as a one-observation history)."""
        if len(alphas) != 3 or any(a < 0 for a in alphas) or sum(alphas) <= 0:
            raise ValueError(f"need three nonnegative weights with positive sum, got {alphas}")
        return cls(1, tuple(float(a) for a in alphas))


def update_dimension_weights(w: DimensionWeights, y: Sequence[float]) -> DimensionWeights:
    if len(y) != 3:
        raise ValueError(f"expected one similarity per dimension, got {len(y)}")
    clamped = []
    for dim, v in zip(DIMENSIONS, y):
        c = min(1.0, max(0.0, float(v)))
        if c != v:
            log.warning("clamped %s similarity %r to %r", dim.value, v, c)
        clamped.append(c)
    sums = tuple(s + v for s, v in zip(w.sums, clamped))
    return DimensionWeights(w.history_count + 1, sums)


def dimension_similarities(s1: Situation, s2: Situation, ontologies: Ontologies) -> tuple[float, float, float]:
    return tuple(
        concept_similarity(o, a, b) for o, a, b in zip(ontologies.trees, s1.concepts, s2.concepts)
    )


def situation_similarity(
    s1: Situation, s2: Situation, w: DimensionWeights | Sequence[float], ontologies: Ontologies
) -> float:
    alphas = w.alphas if isinstance(w, DimensionWeights) else tuple(w)
    sims = dimension_similarities(s1, s2, ontologies)
    return sum(a * s for a, s in zip(alphas, sims))


@dataclass(frozen=True)
class RiskWeights:
    c: float = 1 / 3
    m: float = 1 / 3
    v: float = 1 / 3

    def __post_init__(self):
        for name in ("c", "m", "v"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"lambda {name} must lie in [0, 1], got {value}")
        if abs(self.c + self.m + self.v - 1.0) > 1e-9:
            raise ValueError(f"risk weights must sum to 1, got {self.c + self.m + self.v}")


@dataclass(frozen=True)
class ExplorationBounds:
    epsilon_min: float = 0.05
    epsilon_max: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.epsilon_min <= self.epsilon_max <= 1.0:
            raise ValueError(
                f"need 0 <= epsilon_min <= epsilon_max <= 1, got ({self.epsilon_min}, {self.epsilon_max})"
            )


def risk_concepts(s: Situation, ontologies: Ontologies) -> float:
    return sum(o.effective_cv(c) for o, c in zip(ontologies.trees, s.concepts)) / 3.0


def risk_semantic(
    s: Situation, critical: Iterable[Situation], w: DimensionWeights | Sequence[float], ontologies: Ontologies
) -> float:
    return max((situation_similarity(s, cs, w, ontologies) for cs in critical), default=0.0)


def variance_risk(successes: int, failures: int) -> float:
    """``1 - min(1, 4 * sample_variance)`` of a pooled Bernoulli sample; 0.5 below two rewards."""
    n = successes + failures
    if n < 2:
        return 0.5
    var = successes * failures / (n * (n - 1))
    return 1.0 - min(1.0, 4.0 * var)


def risk_variance(case_stats: Iterable | Mapping) -> float:
    """Variance risk of a case: rewards of all its documents are pooled."""
    if isinstance(case_stats, Mapping):
        case_stats = case_stats.values()
    successes = failures = 0
    for st in case_stats:
        successes += st.clicks
        failures += st.fails
    return variance_risk(successes, failures)


@dataclass(frozen=True)
class RiskComponents:
    concepts: float
    semantic: float
    variance: float

    def combine(self, lambdas: RiskWeights) -> float:
        r = lambdas.c * self.concepts + lambdas.m * self.semantic + lambdas.v * self.variance
        return min(1.0, max(0.0, r))


@dataclass(frozen=True)
class RiskModel:
    """Everything besides the situation itself needed to score risk."""

    ontologies: Ontologies
    critical: tuple[Situation, ...] = ()
    lambdas: RiskWeights = field(default_factory=RiskWeights)
    bounds: ExplorationBounds = field(default_factory=ExplorationBounds)

    def components(self, s: Situation, w: DimensionWeights, case_stats: Iterable | Mapping = ()) -> RiskComponents:
        return RiskComponents(
            risk_concepts(s, self.ontologies),
            risk_semantic(s, self.critical, w, self.ontologies),
            risk_variance(case_stats),
        )

    def is_critical(self, s: Situation) -> bool:
        return any(s.key == cs.key for cs in self.critical)


def situation_risk(s: Situation, model: RiskModel, w: DimensionWeights, case_stats: Iterable | Mapping = ()) -> float:
    return model.components(s, w, case_stats).combine(model.lambdas)


def exploration_rate(r: float, b: ExplorationBounds = ExplorationBounds()) -> float:
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"risk must lie in [0, 1], got {r}")
    return b.epsilon_max - r * (b.epsilon_max - b.epsilon_min)
