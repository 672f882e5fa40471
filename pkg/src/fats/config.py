"""Experiment configuration: a single JSON file layered over built-in defaults.

Precedence is command-line flags > file > defaults.  Relative ontology paths
resolve against the directory of the config file; the defaults point at the
toy ontologies bundled with the package.
"""

from __future__ import annotations

import copy
import dataclasses
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from fats.bandit import Variant
from fats.ontology import OntologyError
from fats.simulator import AffinityParams, ExperimentPlan, GroundTruthModel, generate_model
from fats.situation import ExplorationBounds, Ontologies, RiskModel, RiskWeights, Situation


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, Any] = {
    "ontologies": {"location": None, "time": None, "social": None},
    "epsilon_min": 0.05,
    "epsilon_max": 0.5,
    "lambda": {"c": 1 / 3, "m": 1 / 3, "v": 1 / 3},
    "critical_situations": [["Meeting_Room", "Morning", "Client"]],
    "situation_pool": [
        ["Home", "Evening", "Family"],
        ["Home", "Weekend", "Friends"],
        ["Meeting_Room", "Morning", "Client"],
    ],
    "plan": {
        "arms": ["fats", "fats05", "fats1", "fats0", "ts"],
        "users_per_arm": 50,
        "sessions_per_day": 2,
        "days": 28,
        "slate_size": 10,
    },
    "model": {
        "n_documents": 100,
        "boredom_floor": 0.0,
        "critical_boredom_floor": 1.0,
        "critical_strictness": 0.7,
        "time_spent_mean": 1.37,
        "affinity": {"scale": 0.9, "power": 1.2, "shared": 0.3},
    },
    "seed": 1,
    "out": "out",
}

MAX_SEED = 2**64 - 1


def bundled_ontology(name: str) -> Path:
    return Path(str(resources.files("fats") / "data" / f"{name}.json"))


def _merge(base: dict, override: Mapping, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, Mapping):
                raise ConfigError(f"config key {where!r} must be an object")
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = value
    return out


def _number(raw: Mapping, key: str, where: str, integer: bool = False) -> Any:
    value = raw[key]
    ok = isinstance(value, int) if integer else isinstance(value, (int, float))
    if isinstance(value, bool) or not ok:
        kind = "an integer" if integer else "a number"
        raise ConfigError(f"{where}{key} must be {kind}, got {value!r}")
    return value


@dataclass(frozen=True)
class Config:
    ontologies: Ontologies
    risk_model: RiskModel
    situation_pool: tuple[Situation, ...]
    plan: ExperimentPlan
    n_documents: int
    boredom_floor: float
    critical_boredom_floor: float
    critical_strictness: float
    time_spent_mean: float
    affinity: AffinityParams
    out: Path
    raw: Mapping[str, Any]

    def model(self) -> GroundTruthModel:
        return generate_model(
            self.situation_pool,
            self.n_documents,
            self.plan.seed,
            self.affinity,
            boredom_floor=self.boredom_floor,
            critical_strictness=self.critical_strictness,
            time_spent_mean=self.time_spent_mean,
            critical=self.risk_model.critical,
            critical_boredom_floor=self.critical_boredom_floor,
        )

    def with_arms(self, arms: tuple[Variant, ...]) -> "Config":
        return dataclasses.replace(self, plan=dataclasses.replace(self.plan, arms=arms))


def _situations(raw: Any, ontologies: Ontologies, key: str) -> tuple[Situation, ...]:
    if not isinstance(raw, list):
        raise ConfigError(f"{key} must be a list of [location, time, social] triples")
    out = []
    for triple in raw:
        if not isinstance(triple, list) or len(triple) != 3 or not all(isinstance(t, str) for t in triple):
            raise ConfigError(f"{key}: expected a [location, time, social] triple, got {triple!r}")
        try:
            out.append(ontologies.situation(*triple))
        except OntologyError as exc:
            raise ConfigError(f"{key}: {exc}") from None
    return tuple(out)


def build_config(raw: Mapping[str, Any], base_dir: Path | None = None) -> Config:
    """Validate a fully merged config mapping and resolve its files."""
    base_dir = base_dir or Path.cwd()
    paths = {}
    for dim in ("location", "time", "social"):
        p = raw["ontologies"][dim]
        if p is None:
            paths[dim] = bundled_ontology(dim)
        elif isinstance(p, str):
            paths[dim] = Path(p) if Path(p).is_absolute() else base_dir / p
        else:
            raise ConfigError(f"ontologies.{dim} must be a path string")
        if not paths[dim].is_file():
            raise ConfigError(f"ontology file not found: {paths[dim]}")
    try:
        ontologies = Ontologies.from_files(paths["location"], paths["time"], paths["social"])
    except OntologyError as exc:
        raise ConfigError(str(exc)) from None

    try:
        bounds = ExplorationBounds(_number(raw, "epsilon_min", ""), _number(raw, "epsilon_max", ""))
        lam = raw["lambda"]
        lambdas = RiskWeights(_number(lam, "c", "lambda."), _number(lam, "m", "lambda."), _number(lam, "v", "lambda."))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    critical = _situations(raw["critical_situations"], ontologies, "critical_situations")
    pool = _situations(raw["situation_pool"], ontologies, "situation_pool")
    if not pool:
        raise ConfigError("situation_pool must not be empty")
    if len({s.key for s in pool}) != len(pool):
        raise ConfigError("situation_pool contains duplicate situations")
    critical_keys = {s.key for s in critical}
    if not any(s.key in critical_keys for s in pool):
        raise ConfigError("situation_pool must include at least one critical situation")

    p = raw["plan"]
    if not isinstance(p["arms"], list) or not p["arms"]:
        raise ConfigError("plan.arms must be a nonempty list")
    try:
        arms = tuple(Variant.parse(a) for a in p["arms"])
    except ValueError as exc:
        raise ConfigError(f"plan.arms: {exc}") from None
    seed = _number(raw, "seed", "", integer=True)
    if not 0 <= seed <= MAX_SEED:
        raise ConfigError(f"seed must lie in [0, 2**64), got {seed}")
    try:
        plan = ExperimentPlan(
            arms,
            _number(p, "users_per_arm", "plan.", integer=True),
            _number(p, "sessions_per_day", "plan.", integer=True),
            _number(p, "days", "plan.", integer=True),
            _number(p, "slate_size", "plan.", integer=True),
            seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    m = raw["model"]
    n_docs = _number(m, "n_documents", "model.", integer=True)
    if n_docs < plan.slate_size:
        raise ConfigError(f"model.n_documents ({n_docs}) is smaller than plan.slate_size ({plan.slate_size})")
    for key in ("boredom_floor", "critical_boredom_floor", "critical_strictness"):
        v = _number(m, key, "model.")
        if not 0.0 <= v <= 1.0:
            raise ConfigError(f"model.{key} must lie in [0, 1], got {v}")
    if _number(m, "time_spent_mean", "model.") < 0:
        raise ConfigError("model.time_spent_mean must be nonnegative")
    a = m["affinity"]
    affinity = AffinityParams(
        _number(a, "scale", "model.affinity."), _number(a, "power", "model.affinity."), _number(a, "shared", "model.affinity.")
    )
    if not (0.0 <= affinity.scale <= 1.0 and affinity.power > 0 and 0.0 <= affinity.shared <= 1.0):
        raise ConfigError("model.affinity needs scale and shared in [0, 1] and power > 0")
    if not isinstance(raw["out"], str) or not raw["out"]:
        raise ConfigError("out must be a nonempty path string")

    return Config(
        ontologies=ontologies,
        risk_model=RiskModel(ontologies, critical, lambdas, bounds),
        situation_pool=pool,
        plan=plan,
        n_documents=n_docs,
        boredom_floor=float(m["boredom_floor"]),
        critical_boredom_floor=float(m["critical_boredom_floor"]),
        critical_strictness=float(m["critical_strictness"]),
        time_spent_mean=float(m["time_spent_mean"]),
        affinity=affinity,
        out=Path(raw["out"]),
        raw=raw,
    )


def load_config(path: str | Path | None = None, overrides: Mapping[str, Any] | None = None) -> Config:
    """Read ``path`` (optional), apply ``overrides`` on top, validate."""
    raw = copy.deepcopy(DEFAULTS)
    base_dir = Path.cwd()
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(doc, Mapping):
            raise ConfigError(f"{path}: top level must be an object")
        raw = _merge(raw, doc)
        base_dir = path.resolve().parent
    if overrides:
        raw = _merge(raw, overrides)
    return build_config(raw, base_dir)
