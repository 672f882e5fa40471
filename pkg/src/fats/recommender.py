"""One recommender instance per user: retrieve, select, learn."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from fats.bandit import Selection, Variant, record_feedback, select_documents
from fats.casebase import Case, CaseBase, Feedback, autoimprove, retrieve_case
from fats.situation import Ontologies, RiskModel, Situation


@dataclass
class Trial:
    """State carried from :meth:`Recommender.recommend` to :meth:`Recommender.learn`."""

    situation: Situation
    case: Case
    similarity: float | None
    selection: Selection
    now: int


class Recommender:
    """Runs the retrieve / select / feedback / improve loop over a private case base.

    The plain TS variant keeps a single pseudo-case keyed on the ontology
    roots and never looks at the situation.
    """

    def __init__(
        self,
        variant: Variant,
        ontologies: Ontologies,
        candidates: Sequence[str],
        slate_size: int,
        risk_model: RiskModel | None = None,
        casebase: CaseBase | None = None,
    ):
        if slate_size < 1 or len(candidates) < slate_size:
            raise ValueError(f"cannot fill a slate of {slate_size} from {len(candidates)} candidates")
        if variant is Variant.FATS and risk_model is None:
            raise ValueError("the adaptive variant needs a risk model")
        self.variant = variant
        self.ontologies = ontologies
        self.candidates = list(candidates)
        self.slate_size = slate_size
        self.risk_model = risk_model
        self.casebase = casebase if casebase is not None else CaseBase()
        self._catalog = frozenset(self.candidates)
        if not variant.situation_aware and not self.casebase.cases:
            self.casebase.add_case(ontologies.roots())

    def recommend(self, s: Situation, rng: np.random.Generator) -> Trial:
        cb = self.casebase
        if not self.variant.situation_aware:
            case, sim = cb.cases[0], None
        else:
            found = retrieve_case(cb, s, self.ontologies)
            if found is None:
                case, sim = cb.add_case(s), 1.0
            else:
                case, sim = found
        selection = select_documents(
            case,
            s,
            self.candidates,
            self.slate_size,
            self.variant,
            rng,
            now=cb.trial_clock,
            risk_model=self.risk_model,
            weights=cb.weights,
        )
        return Trial(s, case, sim, selection, cb.trial_clock)

    def learn(self, trial: Trial, feedback: Iterable[Feedback]) -> None:
        feedback = list(feedback)
        if not self.variant.situation_aware:
            record_feedback(trial.case, trial.selection.docs, feedback, trial.now)
        else:
            autoimprove(
                self.casebase,
                trial.situation,
                trial.case,
                trial.similarity if trial.similarity is not None else 0.0,
                feedback,
                now=trial.now,
                catalog=self._catalog,
            )
        self.casebase.trial_clock += 1
