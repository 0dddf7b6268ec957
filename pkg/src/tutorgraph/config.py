"""Engine configuration.

One flat dataclass carries every knob the pipeline, evaluator and
server read, so a single JSON file reproduces a run. The CLI resolves
the config path from ``--config``, then the ``TUTORGRAPH_CONFIG``
environment variable, then ``tutorgraph.json`` in the working
directory.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass

ENV_CONFIG = "TUTORGRAPH_CONFIG"
DEFAULT_CONFIG_PATH = "tutorgraph.json"


@dataclass
class EngineConfig:
    # data locations
    corpus_path: str = "corpus.tsv"
    artifacts_dir: str = "artifacts"
    store_path: str | None = None
    templates_path: str | None = None
    prompts_path: str | None = None

    # embeddings
    dim: int = 128

    # clustering
    eps: float = 0.15
    min_samples: int = 2

    # relation decoder
    relation_epochs: int = 30
    relation_lr: float = 0.5
    relation_batch_size: int = 16

    # transition sampling
    samples_per_exercise: int = 2000
    random_branch_rate: float = 0.2
    split_fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)

    # transition classifier
    hidden: int = 200
    epochs: int = 2
    lr: float = 0.5
    batch_size: int = 32

    # local search
    alpha: float = 0.95
    max_iters: int = 2

    seed: int = 0

    def __post_init__(self):
        self.split_fractions = tuple(self.split_fractions)
        if self.dim <= 0:
            raise ValueError("dim must be positive")
        if not 0 < self.eps:
            raise ValueError("eps must be positive")
        if self.min_samples < 1:
            raise ValueError("min_samples must be at least 1")
        if self.samples_per_exercise <= 0 or self.samples_per_exercise % 2:
            raise ValueError("samples_per_exercise must be a positive even number")
        if not 0 <= self.random_branch_rate <= 1:
            raise ValueError("random_branch_rate must be in [0, 1]")
        if len(self.split_fractions) != 3 or abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise ValueError("split_fractions must be three numbers summing to 1")
        if self.hidden < 1:
            raise ValueError("hidden must be at least 1")
        for name in ("relation_epochs", "relation_batch_size", "epochs", "batch_size", "max_iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must be in (0, 1]")

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True, indent=2) + "\n"

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())


_FIELD_NAMES = {f.name for f in dataclasses.fields(EngineConfig)}


def config_from_dict(doc: dict) -> EngineConfig:
    if not isinstance(doc, dict):
        raise ValueError("config must be a JSON object")
    unknown = sorted(set(doc) - _FIELD_NAMES)
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    return EngineConfig(**doc)


def load_config(path: str) -> EngineConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON: {exc}") from exc
    try:
        return config_from_dict(doc)
    except (ValueError, TypeError) as exc:
        raise ValueError(f"{path}: {exc}") from exc


def resolve_config(explicit_path: str | None = None) -> EngineConfig:
    """Load config from the explicit path, the env override, or defaults.

    With no explicit path, a missing default file is not an error: the
    built-in defaults apply. An explicitly named file must exist.
    """
    if explicit_path is not None:
        return load_config(explicit_path)
    env_path = os.environ.get(ENV_CONFIG)
    if env_path:
        return load_config(env_path)
    if os.path.exists(DEFAULT_CONFIG_PATH):
        return load_config(DEFAULT_CONFIG_PATH)
    return EngineConfig()
