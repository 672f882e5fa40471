"""Concept trees for the Location, Time and Social context dimensions.

Each dimension has one rooted tree.  Similarity between two concepts of the
same tree is the depth-ratio measure

    sim(a, b) = 2 * depth(lcs(a, b)) / (depth(a) + depth(b))

where depth counts nodes on the path to the root (root has depth 1).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping


class OntologyError(ValueError):
    """Raised for malformed ontology documents or foreign concepts."""


class Dimension(str, enum.Enum):
    LOCATION = "Location"
    TIME = "Time"
    SOCIAL = "Social"

    @classmethod
    def parse(cls, value: str) -> "Dimension":
        for dim in cls:
            if value.lower() == dim.value.lower():
                return dim
        raise OntologyError(f"unknown dimension {value!r}")


DIMENSIONS: tuple[Dimension, ...] = (Dimension.LOCATION, Dimension.TIME, Dimension.SOCIAL)


@dataclass(frozen=True)
class Concept:
    """A node in one dimension's tree; identity is ``(dimension, name)``."""

    dimension: Dimension
    name: str
    parent: str | None = None
    cv: float | None = None

    @property
    def id(self) -> tuple[Dimension, str]:
        return (self.dimension, self.name)


@dataclass(frozen=True)
class Ontology:
    dimension: Dimension
    root: str
    nodes: Mapping[str, Concept]
    _depth: Mapping[str, int] = field(repr=False, compare=False)
    _ancestors: Mapping[str, tuple[str, ...]] = field(repr=False, compare=False)
    _risk: Mapping[str, float] = field(repr=False, compare=False)

    @classmethod
    def build(cls, dimension: Dimension, concepts: list[Concept]) -> "Ontology":
        """Validate a node list and precompute depths, ancestor chains and cv."""
        nodes: dict[str, Concept] = {}
        for c in concepts:
            if c.dimension is not dimension:
                raise OntologyError(f"concept {c.name!r} belongs to {c.dimension.value}, not {dimension.value}")
            if c.name in nodes:
                raise OntologyError(f"duplicate name {c.name!r}")
            if c.cv is not None and not 0.0 <= c.cv <= 1.0:
                raise OntologyError(f"cv out of range for {c.name!r}: {c.cv}")
            nodes[c.name] = c

        roots = [c.name for c in nodes.values() if c.parent is None]
        if len(roots) != 1:
            raise OntologyError(f"expected exactly one root, found {sorted(roots)}")
        for c in nodes.values():
            if c.parent is not None and c.parent not in nodes:
                raise OntologyError(f"unknown parent {c.parent!r} for node {c.name!r}")

        ancestors: dict[str, tuple[str, ...]] = {}
        for name in nodes:
            chain = [name]
            seen = {name}
            parent = nodes[name].parent
            while parent is not None:
                if parent in seen:
                    raise OntologyError(f"cycle detected at node {name!r}")
                seen.add(parent)
                chain.append(parent)
                parent = nodes[parent].parent
            # chain runs self -> root
            ancestors[name] = tuple(chain)

        depth = {name: len(chain) for name, chain in ancestors.items()}
        risk: dict[str, float] = {}
        for name, chain in ancestors.items():
            risk[name] = next((nodes[a].cv for a in chain if nodes[a].cv is not None), 0.0)

        return cls(dimension, roots[0], nodes, depth, ancestors, risk)

    def __contains__(self, concept: object) -> bool:
        if isinstance(concept, Concept):
            return concept.dimension is self.dimension and concept.name in self.nodes
        return isinstance(concept, str) and concept in self.nodes

    def __len__(self) -> int:
        return len(self.nodes)

    def concept(self, name: str) -> Concept:
        try:
            return self.nodes[name]
        except KeyError:
            raise OntologyError(f"unknown concept {name!r} in {self.dimension.value} ontology") from None

    def _name(self, c: Concept | str) -> str:
        if isinstance(c, Concept):
            if c.dimension is not self.dimension:
                raise OntologyError(
                    f"cannot compare {c.dimension.value} concept {c.name!r} in {self.dimension.value} ontology"
                )
            c = c.name
        if c not in self.nodes:
            raise OntologyError(f"unknown concept {c!r} in {self.dimension.value} ontology")
        return c

    def ancestors(self, c: Concept | str) -> tuple[str, ...]:
        """Names on the path from ``c`` (inclusive) up to the root."""
        return self._ancestors[self._name(c)]

    def effective_cv(self, c: Concept | str) -> float:
        """cv of ``c``, inherited from the nearest annotated ancestor (root defaults to 0)."""
        return self._risk[self._name(c)]

    def to_document(self) -> dict[str, Any]:
        out = []
        for c in self.nodes.values():
            node: dict[str, Any] = {"name": c.name}
            if c.parent is not None:
                node["parent"] = c.parent
            if c.cv is not None:
                node["cv"] = c.cv
            out.append(node)
        return {"dimension": self.dimension.value, "nodes": out}


def depth(o: Ontology, c: Concept | str) -> int:
    return o._depth[o._name(c)]


def lcs(o: Ontology, a: Concept | str, b: Concept | str) -> Concept:
    """Deepest common ancestor-or-self of ``a`` and ``b``."""
    chain_a = o.ancestors(a)
    in_b = set(o.ancestors(b))
    # chain_a is ordered deepest first, so the first hit is the deepest
    for name in chain_a:
        if name in in_b:
            return o.nodes[name]
    raise AssertionError("root must subsume every concept")


def concept_similarity(o: Ontology, a: Concept | str, b: Concept | str) -> float:
    na, nb = o._name(a), o._name(b)
    if na == nb:
        return 1.0
    common = lcs(o, na, nb)
    return 2.0 * o._depth[common.name] / (o._depth[na] + o._depth[nb])


def load_ontology(document: str | bytes | Mapping[str, Any]) -> Ontology:
    """Parse and validate an ontology document (JSON text or decoded mapping)."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise OntologyError(f"parse failure: {exc}") from exc
    if not isinstance(document, Mapping):
        raise OntologyError("parse failure: top level must be an object")
    if "dimension" not in document or "nodes" not in document:
        raise OntologyError("parse failure: 'dimension' and 'nodes' are required")
    dim = Dimension.parse(str(document["dimension"]))
    raw_nodes = document["nodes"]
    if not isinstance(raw_nodes, list):
        raise OntologyError("parse failure: 'nodes' must be a list")

    concepts = []
    for i, node in enumerate(raw_nodes):
        if not isinstance(node, Mapping) or not isinstance(node.get("name"), str):
            raise OntologyError(f"parse failure: node #{i} needs a string 'name'")
        parent = node.get("parent")
        if parent is not None and not isinstance(parent, str):
            raise OntologyError(f"parse failure: node {node['name']!r} has a non-string parent")
        cv = node.get("cv")
        if cv is not None:
            if isinstance(cv, bool) or not isinstance(cv, (int, float)):
                raise OntologyError(f"parse failure: node {node['name']!r} has a non-numeric cv")
            cv = float(cv)
        concepts.append(Concept(dim, node["name"], parent, cv))
    return Ontology.build(dim, concepts)


def load_ontology_file(path: str | Path) -> Ontology:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OntologyError(f"cannot read ontology file {path}: {exc.strerror}") from exc
    try:
        return load_ontology(text)
    except OntologyError as exc:
        raise OntologyError(f"{path}: {exc}") from exc
