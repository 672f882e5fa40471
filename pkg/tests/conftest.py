import numpy as np
import pytest

from fats.config import bundled_ontology
from fats.situation import Ontologies


@pytest.fixture(scope="session")
def toy() -> Ontologies:
    return Ontologies.from_files(bundled_ontology("location"), bundled_ontology("time"), bundled_ontology("social"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
