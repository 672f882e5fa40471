"""Freshness-aware Thompson sampling for context-aware recommendation."""

from fats.bandit import Variant, memory_retention, score_document, select_documents, thompson_sample
from fats.casebase import Case, CaseBase, DocumentStats, Feedback, autoimprove, retrieve_case
from fats.ontology import Concept, Dimension, Ontology, concept_similarity, depth, lcs, load_ontology
from fats.recommender import Recommender
from fats.situation import (
    DimensionWeights,
    ExplorationBounds,
    Ontologies,
    RiskModel,
    RiskWeights,
    Situation,
    exploration_rate,
    situation_risk,
    situation_similarity,
)

__version__ = "0.1.0"
