"""The user model: a case base of (situation, per-document preferences).

Retrieval is a linear scan for the most similar stored situation.  After a
session the feedback is either merged into the retrieved case (exact
situation match) or stored as a new case.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Collection, Iterable, Mapping

from fats.ontology import DIMENSIONS, OntologyError
from fats.situation import (
    DimensionWeights,
    Ontologies,
    Situation,
    dimension_similarities,
    update_dimension_weights,
)

FORMAT_VERSION = 1


# similarities closer than this count as tied (rounding in the weighted sum)
TIE_TOLERANCE = 1e-12


class CaseBaseError(ValueError):
    pass


@dataclass
class DocumentStats:
    doc: str
    clicks: int = 0
    fails: int = 0
    recom: int = 0
    time_spent: float = 0.0
    last_click: int | None = None

    def check(self) -> None:
        if min(self.clicks, self.fails, self.recom) < 0 or self.time_spent < 0:
            raise CaseBaseError(f"negative counter for document {self.doc!r}")
        if self.recom != self.clicks + self.fails:
            raise CaseBaseError(
                f"document {self.doc!r}: recom={self.recom} but clicks+fails={self.clicks + self.fails}"
            )
        if (self.last_click is not None) != (self.clicks > 0):
            raise CaseBaseError(f"document {self.doc!r}: last_click must be set exactly when clicks > 0")

    def apply(self, clicked: bool, time_spent: float, now: int) -> None:
        self.recom += 1
        if clicked:
            self.clicks += 1
            self.last_click = now
            self.time_spent += time_spent
        else:
            self.fails += 1


@dataclass(frozen=True)
class Feedback:
    """User response to one recommended document."""

    doc: str
    clicked: bool
    time_spent: float = 0.0


@dataclass
class Case:
    id: int
    situation: Situation
    stats: dict[str, DocumentStats] = field(default_factory=dict)

    def get(self, doc: str) -> DocumentStats:
        """Stats for ``doc``; an unseen document reads as all-zero."""
        st = self.stats.get(doc)
        return st if st is not None else DocumentStats(doc)

    def record(self, feedback: Iterable[Feedback], now: int) -> None:
        for fb in feedback:
            st = self.stats.get(fb.doc)
            if st is None:
                st = self.stats[fb.doc] = DocumentStats(fb.doc)
            st.apply(fb.clicked, fb.time_spent, now)


@dataclass
class CaseBase:
    cases: list[Case] = field(default_factory=list)
    weights: DimensionWeights = field(default_factory=DimensionWeights)
    trial_clock: int = 0

    def __len__(self) -> int:
        return len(self.cases)

    def find(self, s: Situation) -> Case | None:
        for case in self.cases:
            if case.situation.key == s.key:
                return case
        return None

    def add_case(self, s: Situation, stats: Mapping[str, DocumentStats] | None = None) -> Case:
        if self.find(s) is not None:
            raise CaseBaseError(f"a case for situation {s} already exists")
        next_id = max((c.id for c in self.cases), default=-1) + 1
        case = Case(next_id, s, dict(stats or {}))
        self.cases.append(case)
        return case


def retrieve_case(cb: CaseBase, s: Situation, ontologies: Ontologies) -> tuple[Case, float] | None:
    """Most similar stored case and its similarity, or ``None`` for an empty base.

    Updates ``cb.weights`` with the per-dimension similarities against the
    winning case.  Ties go to the lowest case id.
    """
    if not cb.cases:
        return None
    alphas = cb.weights.alphas
    best: Case | None = None
    best_sim = -1.0
    best_dims: tuple[float, float, float] = (0.0, 0.0, 0.0)
    for case in sorted(cb.cases, key=lambda c: c.id):
        dims = dimension_similarities(s, case.situation, ontologies)
        sim = alphas[0] * dims[0] + alphas[1] * dims[1] + alphas[2] * dims[2]
        if sim > best_sim + TIE_TOLERANCE:
            best, best_sim, best_dims = case, sim, dims
    if best.situation.key == s.key:
        best_sim = 1.0  # guard against rounding in the weighted sum
    cb.weights = update_dimension_weights(cb.weights, best_dims)
    return best, best_sim


def autoimprove(
    cb: CaseBase,
    s: Situation,
    matched: Case | None,
    similarity: float,
    feedback: Iterable[Feedback],
    now: int | None = None,
    catalog: Collection[str] | None = None,
) -> CaseBase:
    """Fold one session's feedback into the case base.

    Exact situation match merges into ``matched``; anything else appends a
    new case built from this feedback alone.  ``similarity`` is informative
    only: the merge test is concept-triple equality.
    """
    feedback = list(feedback)
    if catalog is not None:
        unknown = sorted({fb.doc for fb in feedback} - set(catalog))
        if unknown:
            raise CaseBaseError(f"feedback references unknown documents {unknown}")
    now = cb.trial_clock if now is None else now
    if matched is not None and matched.situation.key == s.key:
        target = matched
    else:
        target = cb.add_case(s)
    target.record(feedback, now)
    return cb


def save_casebase(cb: CaseBase) -> dict[str, Any]:
    return {
        "version": FORMAT_VERSION,
        "trial_clock": cb.trial_clock,
        "weights": {
            "history_count": cb.weights.history_count,
            "sums": {dim.value: v for dim, v in zip(DIMENSIONS, cb.weights.sums)},
        },
        "cases": [
            {
                "id": case.id,
                "situation": dict(zip(("location", "time", "social"), case.situation.key)),
                "stats": [
                    {
                        "doc": st.doc,
                        "clicks": st.clicks,
                        "fails": st.fails,
                        "recom": st.recom,
                        "time_spent": st.time_spent,
                        "last_click": st.last_click,
                    }
                    for st in case.stats.values()
                ],
            }
            for case in cb.cases
        ],
    }


def dumps_casebase(cb: CaseBase) -> str:
    return json.dumps(save_casebase(cb), indent=2) + "\n"


def _int(obj: Mapping, key: str, where: str) -> int:
    value = obj.get(key)
    if isinstance(value, bool) or not isinstance(value, int):
        raise CaseBaseError(f"{where}: {key!r} must be an integer")
    return value


def load_casebase(document: str | bytes | Mapping[str, Any], ontologies: Ontologies) -> CaseBase:
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise CaseBaseError(f"parse failure: {exc}") from exc
    if not isinstance(document, Mapping):
        raise CaseBaseError("case base must be a JSON object")
    if document.get("version") != FORMAT_VERSION:
        raise CaseBaseError(f"unsupported version {document.get('version')!r}")
    trial_clock = _int(document, "trial_clock", "case base")
    if trial_clock < 0:
        raise CaseBaseError("trial_clock must be >= 0")

    w = document.get("weights")
    if not isinstance(w, Mapping) or not isinstance(w.get("sums"), Mapping):
        raise CaseBaseError("weights must be an object with 'history_count' and 'sums'")
    count = _int(w, "history_count", "weights")
    try:
        sums = tuple(float(w["sums"][dim.value]) for dim in DIMENSIONS)
    except (KeyError, TypeError, ValueError) as exc:
        raise CaseBaseError(f"weights.sums needs a number per dimension: {exc}") from exc
    if count < 0 or any(v < 0 for v in sums):
        raise CaseBaseError("weights must be nonnegative")

    cb = CaseBase([], DimensionWeights(count, sums), trial_clock)
    raw_cases = document.get("cases")
    if not isinstance(raw_cases, list):
        raise CaseBaseError("'cases' must be a list")
    seen_ids: set[int] = set()
    for raw in raw_cases:
        if not isinstance(raw, Mapping):
            raise CaseBaseError("each case must be an object")
        cid = _int(raw, "id", "case")
        where = f"case {cid}"
        if cid in seen_ids:
            raise CaseBaseError(f"{where}: duplicate id")
        seen_ids.add(cid)
        sit = raw.get("situation")
        try:
            situation = ontologies.situation(sit["location"], sit["time"], sit["social"])
        except (KeyError, TypeError, OntologyError) as exc:
            raise CaseBaseError(f"{where}: bad situation: {exc}") from exc
        if cb.find(situation) is not None:
            raise CaseBaseError(f"{where}: situation {situation} duplicates another case")
        stats: dict[str, DocumentStats] = {}
        raw_stats = raw.get("stats")
        if not isinstance(raw_stats, list):
            raise CaseBaseError(f"{where}: 'stats' must be a list")
        for rs in raw_stats:
            if not isinstance(rs, Mapping) or not isinstance(rs.get("doc"), str):
                raise CaseBaseError(f"{where}: each stats entry needs a string 'doc'")
            last = rs.get("last_click")
            if last is not None and (isinstance(last, bool) or not isinstance(last, int)):
                raise CaseBaseError(f"{where}: last_click must be an integer or null")
            ts = rs.get("time_spent")
            if isinstance(ts, bool) or not isinstance(ts, (int, float)):
                raise CaseBaseError(f"{where}: time_spent must be a number")
            st = DocumentStats(
                rs["doc"],
                _int(rs, "clicks", where),
                _int(rs, "fails", where),
                _int(rs, "recom", where),
                float(ts),
                last,
            )
            if st.doc in stats:
                raise CaseBaseError(f"{where}: duplicate stats for document {st.doc!r}")
            try:
                st.check()
            except CaseBaseError as exc:
                raise CaseBaseError(f"{where}: {exc}") from None
            stats[st.doc] = st
        cb.cases.append(Case(cid, situation, stats))
    return cb
