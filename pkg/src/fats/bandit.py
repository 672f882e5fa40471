"""Freshness-aware Thompson sampling over the documents of one case.

Each document in a case carries a Beta(clicks + 1, fails + 1) posterior on
its click probability.  A document is scored as

    index = (1 - eps) * theta - eps * retention

where ``theta`` is a posterior draw and ``retention = exp(-t / clicks)`` is
the forgetting-curve memory of the document (``t`` = sessions since its last
click; never-clicked documents have retention 0).  The ``n`` highest indices
form the slate.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from fats.casebase import Case, DocumentStats, Feedback
from fats.situation import (
    DimensionWeights,
    RiskModel,
    Situation,
    exploration_rate,
)


class Variant(enum.Enum):
    TS = ("ts", "TS", 0.0)
    FATS_0 = ("fats0", "FA-TS-0", 1.0)
    FATS_05 = ("fats05", "FA-TS-0.5", 0.5)
    FATS_1 = ("fats1", "FA-TS-1", 0.0)
    FATS = ("fats", "FA-TS", None)

    def __init__(self, key: str, label: str, epsilon: float | None):
        self.key = key
        self.label = label
        self.fixed_epsilon = epsilon

    @classmethod
    def parse(cls, value: str) -> "Variant":
        for v in cls:
            if value in (v.key, v.label, v.name):
                return v
        raise ValueError(f"unknown variant {value!r}; expected one of {[v.key for v in cls]}")

    @property
    def situation_aware(self) -> bool:
        return self is not Variant.TS


# order used for comparisons and summaries
ALL_VARIANTS = (Variant.FATS, Variant.FATS_05, Variant.FATS_1, Variant.FATS_0, Variant.TS)


@dataclass(frozen=True)
class ScoredDocument:
    doc: str
    sample: float
    retention: float
    index: float


def thompson_sample(stats: DocumentStats, rng: np.random.Generator) -> float:
    return float(rng.beta(stats.clicks + 1, stats.fails + 1))


def memory_retention(stats: DocumentStats, now: int) -> float:
    if stats.clicks == 0 or stats.last_click is None:
        return 0.0
    elapsed = now - stats.last_click
    if elapsed < 0:
        raise ValueError(f"now={now} precedes last click {stats.last_click} of {stats.doc!r}")
    return math.exp(-elapsed / stats.clicks)


def freshness_index(sample, retention, epsilon):
    """Composite selection index; works on floats and numpy arrays alike."""
    return (1.0 - epsilon) * sample - epsilon * retention


def score_document(stats: DocumentStats, now: int, epsilon: float, rng: np.random.Generator) -> ScoredDocument:
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    sample = thompson_sample(stats, rng)
    retention = memory_retention(stats, now)
    return ScoredDocument(stats.doc, sample, retention, freshness_index(sample, retention, epsilon))


def rank_documents(
    docs: Sequence[str], samples: np.ndarray, retentions: np.ndarray, epsilon: float, n: int
) -> list[ScoredDocument]:
    """Top ``n`` documents by index, descending; ties go to the smaller identifier."""
    if n < 1 or len(docs) < n:
        raise ValueError(f"cannot pick {n} documents from {len(docs)} candidates")
    index = freshness_index(samples, retentions, epsilon)
    doc_rank = np.argsort(np.argsort(np.asarray(docs)))
    order = np.lexsort((doc_rank, -index))[:n]
    return [
        ScoredDocument(docs[i], float(samples[i]), float(retentions[i]), float(index[i])) for i in order
    ]


def case_arrays(case: Case, docs: Sequence[str], now: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(clicks, fails, retention) arrays for ``docs`` as seen by ``case``."""
    k = len(docs)
    clicks = np.zeros(k)
    fails = np.zeros(k)
    elapsed = np.zeros(k)
    stats = case.stats
    for i, d in enumerate(docs):
        st = stats.get(d)
        if st is not None and st.recom:
            clicks[i] = st.clicks
            fails[i] = st.fails
            if st.clicks:
                elapsed[i] = now - st.last_click
    if np.any(elapsed < 0):
        raise ValueError("now precedes a recorded click")
    retention = np.zeros(k)
    clicked = clicks > 0
    retention[clicked] = np.exp(-elapsed[clicked] / clicks[clicked])
    return clicks, fails, retention


@dataclass(frozen=True)
class Selection:
    slate: list[ScoredDocument]
    epsilon: float
    risk: float | None = None

    @property
    def docs(self) -> list[str]:
        return [sd.doc for sd in self.slate]


def variant_epsilon(
    variant: Variant,
    s: Situation,
    case: Case,
    risk_model: RiskModel | None = None,
    weights: DimensionWeights | None = None,
) -> tuple[float, float | None]:
    """Freshness weight for this trial and, for the adaptive arm, the risk behind it."""
    if variant.fixed_epsilon is not None:
        return variant.fixed_epsilon, None
    if risk_model is None:
        raise ValueError("the adaptive variant needs a risk model")
    risk = risk_model.components(s, weights or DimensionWeights(), case.stats).combine(risk_model.lambdas)
    return exploration_rate(risk, risk_model.bounds), risk


def select_documents(
    case: Case,
    s: Situation,
    candidates: Sequence[str],
    n: int,
    variant: Variant,
    rng: np.random.Generator,
    now: int,
    risk_model: RiskModel | None = None,
    weights: DimensionWeights | None = None,
) -> Selection:
    if n < 1 or len(candidates) < n:
        raise ValueError(f"cannot pick {n} documents from {len(candidates)} candidates")
    epsilon, risk = variant_epsilon(variant, s, case, risk_model, weights)
    clicks, fails, retention = case_arrays(case, candidates, now)
    samples = rng.beta(clicks + 1.0, fails + 1.0)
    return Selection(rank_documents(candidates, samples, retention, epsilon, n), epsilon, risk)


def record_feedback(case: Case, slate: Iterable[str], outcomes: Iterable[Feedback], now: int) -> Case:
    """Apply one session's outcomes; they must cover the slate exactly."""
    slate = list(slate)
    outcomes = list(outcomes)
    extra = [fb.doc for fb in outcomes if fb.doc not in slate]
    if extra:
        raise ValueError(f"outcomes for documents not in the slate: {extra}")
    given = [fb.doc for fb in outcomes]
    if sorted(given) != sorted(slate):
        raise ValueError("outcomes must cover every slate document exactly once")
    case.record(outcomes, now)
    return case

