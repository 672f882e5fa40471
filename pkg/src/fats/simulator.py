"""Synthetic users and the multi-arm, multi-day evaluation loop.

A synthetic user clicks document ``d`` in situation ``s`` with probability

    base_affinity[s, d] * (gamma + (1 - gamma) * (1 - retention))

where ``retention`` is the user's own forgetting-curve memory of ``d``
(clicks so far as strength, sessions since the last click as time).  In a
critical situation the user is strict: the boredom floor is
``critical_boredom_floor`` instead of ``gamma`` (by default 1, i.e. a user
who needs the best documents is not put off by repeats) and any click
probability below ``critical_strictness`` drops to zero.

Every arm/user pair draws from its own RNG stream derived from the plan seed
and the arm key, so arms never influence each other.  The situation each
user faces in each session depends on the seed and user only, so all arms
see the same context sequence.
"""

from __future__ import annotations

import math
import zlib
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from fats.bandit import Variant
from fats.casebase import CaseBase, Feedback
from fats.recommender import Recommender
from fats.situation import Ontologies, RiskModel, Situation

_SITUATION_STREAM = 0x5174
_MODEL_STREAM = 0x30DE1


def document_ids(n: int) -> list[str]:
    width = max(3, len(str(n - 1)))
    return [f"d{i:0{width}d}" for i in range(n)]


def arm_key(variant: Variant) -> int:
    return zlib.crc32(variant.key.encode())


def stream(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *keys]))


@dataclass
class GroundTruthModel:
    situations: list[Situation]
    documents: list[str]
    base_affinity: np.ndarray  # shape (len(situations), len(documents))
    boredom_floor: float = 0.0
    critical_strictness: float = 0.0
    time_spent_mean: float = 1.37
    critical: frozenset[tuple[str, str, str]] = frozenset()
    critical_boredom_floor: float = 1.0

    def __post_init__(self):
        self.base_affinity = np.asarray(self.base_affinity, dtype=float)
        if self.base_affinity.shape != (len(self.situations), len(self.documents)):
            raise ValueError(
                f"base_affinity has shape {self.base_affinity.shape}, "
                f"expected {(len(self.situations), len(self.documents))}"
            )
        if np.any(self.base_affinity < 0) or np.any(self.base_affinity > 1):
            raise ValueError("base affinities must lie in [0, 1]")
        if not 0.0 <= self.boredom_floor <= 1.0:
            raise ValueError(f"boredom_floor must lie in [0, 1], got {self.boredom_floor}")
        if not 0.0 <= self.critical_boredom_floor <= 1.0:
            raise ValueError(f"critical_boredom_floor must lie in [0, 1], got {self.critical_boredom_floor}")
        if not 0.0 <= self.critical_strictness <= 1.0:
            raise ValueError(f"critical_strictness must lie in [0, 1], got {self.critical_strictness}")
        if self.time_spent_mean < 0:
            raise ValueError("time_spent_mean must be nonnegative")
        self._sit_index = {s.key: i for i, s in enumerate(self.situations)}
        self._doc_index = {d: i for i, d in enumerate(self.documents)}

    def situation_index(self, s: Situation) -> int:
        try:
            return self._sit_index[s.key]
        except KeyError:
            raise ValueError(f"situation {s} is not in the model's pool") from None

    def doc_index(self, docs: Iterable[str]) -> np.ndarray:
        return np.fromiter((self._doc_index[d] for d in docs), dtype=np.intp)

    def is_critical(self, s: Situation) -> bool:
        return s.key in self.critical


@dataclass(frozen=True)
class AffinityParams:
    """Shape of the generated base-affinity table.

    affinity = scale * (shared * quality[d] + (1 - shared) * u[s, d]) ** power
    with ``quality`` and ``u`` uniform on [0, 1].
    """

    scale: float = 0.9
    power: float = 3.0
    shared: float = 0.3


def generate_model(
    situations: Sequence[Situation],
    n_documents: int,
    seed: int,
    params: AffinityParams = AffinityParams(),
    *,
    boredom_floor: float = 0.0,
    critical_strictness: float = 0.0,
    time_spent_mean: float = 1.37,
    critical: Iterable[Situation] = (),
    critical_boredom_floor: float = 1.0,
) -> GroundTruthModel:
    rng = stream(seed, _MODEL_STREAM)
    quality = rng.random(n_documents)
    local = rng.random((len(situations), n_documents))
    mix = params.shared * quality[None, :] + (1.0 - params.shared) * local
    affinity = np.clip(params.scale * mix**params.power, 0.0, 1.0)
    return GroundTruthModel(
        list(situations),
        document_ids(n_documents),
        affinity,
        boredom_floor,
        critical_strictness,
        time_spent_mean,
        frozenset(s.key for s in critical),
        critical_boredom_floor,
    )


def click_probability(
    base: float, boredom_floor: float, retention: float, critical: bool = False, strictness: float = 0.0
) -> float:
    p = base * (boredom_floor + (1.0 - boredom_floor) * (1.0 - retention))
    if critical and p < strictness:
        return 0.0
    return p


class SyntheticUser:
    """Tracks the user's own click memory; independent of any recommender state."""

    def __init__(self, id: int, n_documents: int):
        self.id = id
        self.counts = np.zeros(n_documents)
        self.last_click = np.zeros(n_documents)

    def retention(self, idx: np.ndarray, now: int) -> np.ndarray:
        counts = self.counts[idx]
        out = np.zeros(len(idx))
        seen = counts > 0
        out[seen] = np.exp(-(now - self.last_click[idx][seen]) / counts[seen])
        return out

    def click_probabilities(self, model: GroundTruthModel, s: Situation, idx: np.ndarray, now: int) -> np.ndarray:
        base = model.base_affinity[model.situation_index(s), idx]
        critical = model.is_critical(s)
        gamma = model.critical_boredom_floor if critical else model.boredom_floor
        p = base * (gamma + (1.0 - gamma) * (1.0 - self.retention(idx, now)))
        if critical:
            p = np.where(p < model.critical_strictness, 0.0, p)
        return p

    def observe(self, idx: np.ndarray, clicked: np.ndarray, now: int) -> None:
        hit = idx[clicked]
        self.counts[hit] += 1
        self.last_click[hit] = now


@dataclass(frozen=True)
class SessionLog:
    arm: str
    user: int
    day: int
    session: int
    trial: int
    situation: tuple[str, str, str]
    critical: bool
    epsilon: float
    risk: float | None
    similarity: float | None
    slate: tuple[str, ...]
    clicked: tuple[bool, ...]
    time_spent: tuple[float, ...]

    @property
    def n_clicks(self) -> int:
        return sum(self.clicked)

    @property
    def precision(self) -> float:
        return self.n_clicks / len(self.slate)

    def to_record(self) -> dict:
        return {
            "arm": self.arm,
            "user": self.user,
            "day": self.day,
            "session": self.session,
            "trial": self.trial,
            "situation": list(self.situation),
            "critical": self.critical,
            "epsilon": self.epsilon,
            "risk": self.risk,
            "similarity": self.similarity,
            "slate": list(self.slate),
            "clicked": list(self.clicked),
            "time_spent": list(self.time_spent),
        }


def simulate_session(
    user: SyntheticUser,
    situation: Situation,
    recommender: Recommender,
    model: GroundTruthModel,
    rng: np.random.Generator,
    *,
    day: int = 1,
    session: int = 0,
) -> SessionLog:
    trial = recommender.recommend(situation, rng)
    docs = trial.selection.docs
    idx = model.doc_index(docs)
    p = user.click_probabilities(model, situation, idx, trial.now)
    clicked = rng.random(len(docs)) < p
    times = np.where(clicked, rng.exponential(model.time_spent_mean, len(docs)), 0.0)
    user.observe(idx, clicked, trial.now)
    recommender.learn(
        trial, [Feedback(d, bool(c), float(t)) for d, c, t in zip(docs, clicked, times)]
    )
    return SessionLog(
        recommender.variant.key,
        user.id,
        day,
        session,
        trial.now,
        situation.key,
        model.is_critical(situation),
        float(trial.selection.epsilon),
        trial.selection.risk,
        trial.similarity,
        tuple(docs),
        tuple(bool(c) for c in clicked),
        tuple(float(t) for t in times),
    )


@dataclass(frozen=True)
class ExperimentPlan:
    arms: tuple[Variant, ...] = (Variant.FATS, Variant.FATS_05, Variant.FATS_1, Variant.FATS_0, Variant.TS)
    users_per_arm: int = 50
    sessions_per_day: int = 2
    days: int = 28
    slate_size: int = 10
    seed: int = 0

    def __post_init__(self):
        if not self.arms:
            raise ValueError("a plan needs at least one arm")
        if self.days < 1 or self.slate_size < 1 or self.users_per_arm < 1 or self.sessions_per_day < 1:
            raise ValueError("days, slate_size, users_per_arm and sessions_per_day must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")


@dataclass(frozen=True)
class MetricsRow:
    arm: str
    day: int
    average_precision: float
    average_time_spent: float


def average_precision(sessions: Sequence[SessionLog]) -> float:
    if not sessions:
        raise ValueError("average precision of an empty session set")
    return sum(s.precision for s in sessions) / len(sessions)


def average_time_spent(sessions: Sequence[SessionLog]) -> float:
    clicks = sum(s.n_clicks for s in sessions)
    if clicks == 0:
        return 0.0
    return sum(sum(s.time_spent) for s in sessions) / clicks


@dataclass
class ExperimentResult:
    rows: list[MetricsRow]
    sessions: list[SessionLog] = field(default_factory=list)
    casebases: dict[tuple[str, int], CaseBase] = field(default_factory=dict)

    def summary(self) -> dict[str, tuple[float, float]]:
        """Per-arm mean of the daily AP and ATSD values."""
        by_arm: dict[str, list[MetricsRow]] = defaultdict(list)
        for row in self.rows:
            by_arm[row.arm].append(row)
        return {
            arm: (
                math.fsum(r.average_precision for r in rows) / len(rows),
                math.fsum(r.average_time_spent for r in rows) / len(rows),
            )
            for arm, rows in by_arm.items()
        }


def situation_stream(plan: ExperimentPlan, model: GroundTruthModel, user: int) -> list[Situation]:
    rng = stream(plan.seed, _SITUATION_STREAM, user)
    picks = rng.integers(len(model.situations), size=plan.days * plan.sessions_per_day)
    return [model.situations[i] for i in picks]


def run_arm(
    plan: ExperimentPlan,
    variant: Variant,
    model: GroundTruthModel,
    ontologies: Ontologies,
    risk_model: RiskModel | None,
    keep_sessions: bool = True,
    keep_casebases: bool = False,
) -> ExperimentResult:
    per_day: dict[int, list[SessionLog]] = defaultdict(list)
    result = ExperimentResult([])
    for u in range(plan.users_per_arm):
        rng = stream(plan.seed, arm_key(variant), u)
        user = SyntheticUser(u, len(model.documents))
        rec = Recommender(variant, ontologies, model.documents, plan.slate_size, risk_model)
        contexts = iter(situation_stream(plan, model, u))
        for day in range(1, plan.days + 1):
            for k in range(plan.sessions_per_day):
                log = simulate_session(user, next(contexts), rec, model, rng, day=day, session=k)
                per_day[day].append(log)
        if keep_casebases:
            result.casebases[(variant.key, u)] = rec.casebase
    for day in range(1, plan.days + 1):
        logs = per_day[day]
        result.rows.append(MetricsRow(variant.key, day, average_precision(logs), average_time_spent(logs)))
        if keep_sessions:
            result.sessions.extend(logs)
    return result


def run_experiment(
    plan: ExperimentPlan,
    model: GroundTruthModel,
    ontologies: Ontologies,
    risk_model: RiskModel | None = None,
    keep_sessions: bool = True,
    keep_casebases: bool = False,
) -> ExperimentResult:
    """Run every arm of ``plan``; rows are ordered by arm (plan order) then day."""
    if risk_model is None:
        risk_model = RiskModel(ontologies)
    out = ExperimentResult([])
    for variant in plan.arms:
        res = run_arm(plan, variant, model, ontologies, risk_model, keep_sessions, keep_casebases)
        out.rows.extend(res.rows)
        out.sessions.extend(res.sessions)
        out.casebases.update(res.casebases)
    return out
