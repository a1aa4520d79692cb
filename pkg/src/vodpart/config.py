"""JSON scenario configuration files and the shipped figure presets."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema

from vodpart.analytic import PartitionPlan
from vodpart.engine import HoldLaw, Scenario, TrafficClass
from vodpart.popularity import ZipfPopularity

PRESETS = ("fig2", "fig3", "fig4", "fig5", "fig6", "fig7")
SHIPPED = PRESETS + ("default",)
SWEEP_PARAMETERS = ("class_rate", "aggregate_rate", "offered_load", "rate_scale")


class ConfigError(Exception):
    """Base class for configuration problems; ``field`` names the culprit."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class ConfigNotFoundError(ConfigError):
    pass


class ConfigSchemaError(ConfigError):
    pass


class ConfigInvariantError(ConfigError):
    pass


@dataclass(frozen=True)
class Sweep:
    parameter: str
    values: tuple[float, ...]


@dataclass(frozen=True)
class Series:
    label: str
    plan: PartitionPlan


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: Scenario
    sweep: Sweep | None = None
    series: tuple[Series, ...] = ()
    replications: int = 30
    output_dir: str = "out"
    y: str = "blocking"
    description: str = ""
    # one class description reused for every partition, when given that way
    class_template: TrafficClass | None = field(default=None, repr=False)

    def scenario_for(self, plan: PartitionPlan) -> Scenario:
        if plan == self.scenario.plan:
            return self.scenario
        if self.class_template is None:
            if plan.k != self.scenario.plan.k:
                raise ConfigSchemaError(
                    f"classes: series with {plan.k} partitions needs {plan.k} classes; use a uniform class template",
                    "classes",
                )
            return replace(self.scenario, plan=plan)
        classes = tuple(replace(self.class_template, class_id=j) for j in range(1, plan.k + 1))
        return replace(self.scenario, plan=plan, classes=classes)

    def all_series(self) -> tuple[Series, ...]:
        return self.series or (Series(self.scenario.scenario_id, self.scenario.plan),)


@lru_cache(maxsize=1)
def config_schema() -> dict:
    return json.loads(resources.files("vodpart").joinpath("schemas/config.schema.json").read_text())


def preset_path(name: str) -> Path:
    """Location of a shipped config: a figure preset or ``default``."""
    if name not in SHIPPED:
        raise ConfigError(f"unknown preset {name!r}; choose one of {', '.join(SHIPPED)}", "preset")
    return Path(str(resources.files("vodpart").joinpath(f"presets/{name}.json")))


def _field_path(err: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in err.absolute_path]
    return ".".join(parts) if parts else "(root)"


def sweep_values(start: float, stop: float, step: float) -> tuple[float, ...]:
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return tuple(round(start + i * step, 12) for i in range(n))


def _plan(raw) -> PartitionPlan:
    if isinstance(raw, dict):
        return PartitionPlan.uniform(raw["k"], raw["ports"])
    return PartitionPlan(tuple(raw))


def _traffic_class(raw: dict, class_id: int) -> TrafficClass:
    session = raw.get("session", "steady")
    hold = raw.get("hold")
    law = None
    if hold is not None:
        max_hold = hold.get("max_hold", 120.0 if session == "steady" else 80.0)
        law = HoldLaw(hold["law"], max_hold, hold.get("mean_hold"))
    return TrafficClass(class_id, float(raw["rate"]), session, law)


def parse_config(raw: dict) -> ScenarioConfig:
    """Validate a decoded config document and build the ScenarioConfig."""
    validator = jsonschema.Draft202012Validator(config_schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = _field_path(err)
        raise ConfigSchemaError(f"{where}: {err.message}", where)

    plan = _plan(raw["partitions"])
    template = None
    if isinstance(raw["classes"], dict):
        try:
            template = _traffic_class(raw["classes"]["uniform"], 1)
        except ValueError as exc:
            raise ConfigInvariantError(f"classes: {exc}", "classes") from exc
        classes = tuple(replace(template, class_id=j) for j in range(1, plan.k + 1))
    else:
        if len(raw["classes"]) != plan.k:
            raise ConfigSchemaError(
                f"classes: {len(raw['classes'])} classes given but partitions define k = {plan.k}", "classes"
            )
        try:
            classes = tuple(_traffic_class(c, j) for j, c in enumerate(raw["classes"], start=1))
        except ValueError as exc:
            raise ConfigInvariantError(f"classes: {exc}", "classes") from exc

    popularity = None
    if "popularity" in raw:
        p = raw["popularity"]
        try:
            popularity = ZipfPopularity(p["total_titles"], p["popular_titles"], float(p["skew"]))
        except ValueError as exc:
            raise ConfigInvariantError(f"popularity: {exc}", "popularity") from exc

    try:
        scenario = Scenario(
            plan=plan,
            classes=classes,
            horizon=float(raw.get("horizon", 400.0)),
            seed=int(raw.get("seed", 0)),
            popularity=popularity,
            cascade_policy=raw.get("cascade_policy", "forward-no-wrap"),
            warmup_fraction=float(raw.get("warmup_fraction", 0.1)),
            sample_interval=raw.get("sample_interval"),
            scenario_id=raw.get("scenario_id", "scenario"),
        )
    except ValueError as exc:
        raise ConfigInvariantError(str(exc), "scenario") from exc

    sweep = None
    if "sweep" in raw:
        s = raw["sweep"]
        if "values" in s:
            values = tuple(float(v) for v in s["values"])
            if list(values) != sorted(values):
                raise ConfigInvariantError("sweep.values: must be in increasing order", "sweep.values")
        else:
            if s["start"] > s["stop"]:
                raise ConfigInvariantError(
                    f"sweep.start: start ({s['start']}) exceeds stop ({s['stop']})", "sweep.start"
                )
            values = sweep_values(s["start"], s["stop"], s["step"])
        sweep = Sweep(s["parameter"], values)

    series = tuple(Series(s["label"], _plan(s["partitions"])) for s in raw.get("series", ()))
    if len({s.label for s in series}) != len(series):
        raise ConfigInvariantError("series: labels must be unique", "series")

    cfg = ScenarioConfig(
        scenario=scenario,
        sweep=sweep,
        series=series,
        replications=int(raw.get("replications", 30)),
        output_dir=raw.get("output_dir", "out"),
        y=raw.get("y", "blocking"),
        description=raw.get("description", ""),
        class_template=template,
    )
    for s in series:
        cfg.scenario_for(s.plan)
    return cfg


def load_config(path) -> ScenarioConfig:
    """Read and validate a JSON scenario file.

    Raises ConfigNotFoundError, ConfigSchemaError (malformed document or
    shape mismatch) or ConfigInvariantError (well-formed but inconsistent
    values).
    """
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigNotFoundError(f"config file not found: {path}", "path") from None
    except OSError as exc:
        raise ConfigNotFoundError(f"cannot read config file {path}: {exc}", "path") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigSchemaError(f"{path}: invalid JSON ({exc})", "(root)") from exc
    return parse_config(raw)


def load_preset(name: str) -> ScenarioConfig:
    return load_config(preset_path(name))
