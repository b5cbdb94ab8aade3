"""Experiment configuration: JSON schema, validation, and content digests.

Configs are strict JSON: unknown keys are rejected at every level so typos
fail loudly.  The digest canonicalizes the experiment identity (tasks,
dataset paths, resolved hyperparameters) before hashing, so formatting or
execution-only flags never invalidate cached results.
"""

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from .data import METRIC_KINDS
from .shot import HyperParams, ShotError

CONFIG_VERSION = 1


class ConfigError(ValueError):
    """Raised on malformed or inconsistent experiment configs."""


def _reject_unknown(d, allowed, where):
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {unknown}")


@dataclass
class TaskSpec:
    name: str
    metric: str
    dialects: Dict[str, str]  # tag -> dataset root containing train/ and eval/

    def validate(self, base: Path):
        if self.metric not in METRIC_KINDS:
            raise ConfigError(f"task {self.name!r}: metric must be one of {METRIC_KINDS}")
        if len(self.dialects) < 2:
            raise ConfigError(f"task {self.name!r}: matrix mode needs at least two dialects")
        for tag, root in self.dialects.items():
            for part in ("train", "eval"):
                p = self.path(base, tag, part)
                if not p.is_dir():
                    raise ConfigError(
                        f"task {self.name!r}, dialect {tag!r}: missing dataset directory {p}"
                    )

    def path(self, base: Path, tag, part):
        return (base / self.dialects[tag] / part).resolve()


@dataclass
class ExperimentConfig:
    tasks: List[TaskSpec]
    hp: HyperParams
    seeds: List[int]
    reference: Optional[str] = None
    cross_task_average: bool = False
    skip_completed: bool = False
    base_dir: Path = field(default_factory=Path)

    def validate(self):
        if not self.tasks:
            raise ConfigError("config needs at least one task")
        names = [t.name for t in self.tasks]
        if len(set(names)) != len(names):
            raise ConfigError("task names must be unique")
        if not self.seeds:
            raise ConfigError("config needs at least one seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be unique")
        for task in self.tasks:
            task.validate(self.base_dir)
        if self.reference is not None:
            for task in self.tasks:
                if self.reference not in task.dialects:
                    raise ConfigError(
                        f"reference dialect {self.reference!r} missing from task {task.name!r}"
                    )
        return self

    def identity(self):
        """The digest-relevant content: experiment identity, not execution flags."""
        return {
            "version": CONFIG_VERSION,
            "tasks": [
                {
                    "name": t.name,
                    "metric": t.metric,
                    "dialects": {tag: str((self.base_dir / p).resolve()) for tag, p in t.dialects.items()},
                }
                for t in self.tasks
            ],
            "hyperparams": self.hp.to_dict(),
            "reference_dialect": self.reference,
            "cross_task_average": self.cross_task_average,
        }

    @property
    def digest(self):
        canonical = json.dumps(self.identity(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    def dialect_order(self):
        order = []
        for task in self.tasks:
            for tag in task.dialects:
                if tag not in order:
                    order.append(tag)
        return order


_TOP_KEYS = {
    "version",
    "tasks",
    "hyperparams",
    "seeds",
    "reference_dialect",
    "cross_task_average",
    "skip_completed",
}
_TASK_KEYS = {"name", "metric", "dialects"}


def parse_experiment_config(doc: dict, base_dir) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    _reject_unknown(doc, _TOP_KEYS, "config")
    if doc.get("version") != CONFIG_VERSION:
        raise ConfigError(f"config version must be {CONFIG_VERSION}")
    if "tasks" not in doc or not isinstance(doc["tasks"], list):
        raise ConfigError("config requires a tasks list")
    tasks = []
    for i, entry in enumerate(doc["tasks"]):
        if not isinstance(entry, dict):
            raise ConfigError(f"tasks[{i}] must be an object")
        _reject_unknown(entry, _TASK_KEYS, f"tasks[{i}]")
        try:
            tasks.append(
                TaskSpec(
                    name=str(entry["name"]),
                    metric=str(entry["metric"]),
                    dialects={str(k): str(v) for k, v in entry["dialects"].items()},
                )
            )
        except KeyError as exc:
            raise ConfigError(f"tasks[{i}] missing key {exc}") from exc
    try:
        hp = HyperParams.from_dict(doc.get("hyperparams", {}))
    except (ShotError, TypeError) as exc:
        raise ConfigError(f"bad hyperparams: {exc}") from exc
    seeds = doc.get("seeds", [0])
    if not isinstance(seeds, list) or not all(isinstance(s, int) and s >= 0 for s in seeds):
        raise ConfigError("seeds must be a list of non-negative integers")
    cfg = ExperimentConfig(
        tasks=tasks,
        hp=hp,
        seeds=seeds,
        reference=doc.get("reference_dialect"),
        cross_task_average=bool(doc.get("cross_task_average", False)),
        skip_completed=bool(doc.get("skip_completed", False)),
        base_dir=Path(base_dir),
    )
    return cfg.validate()


def load_experiment_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_experiment_config(doc, path.parent)


def load_hyperparams(path=None, seed=None) -> HyperParams:
    """Load a bare hyperparameter JSON object; flags may override the seed."""
    if path is None:
        hp = HyperParams()
    else:
        try:
            doc = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        try:
            hp = HyperParams.from_dict(doc)
        except (ShotError, TypeError) as exc:
            raise ConfigError(f"bad hyperparams: {exc}") from exc
    if seed is not None:
        hp = hp.with_seed(seed)
    return hp.validate()
