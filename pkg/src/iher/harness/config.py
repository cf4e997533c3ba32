"""Training configuration and its flat ``key = value`` file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

ALGOS = ("iher", "her")
ABLATIONS = ("none", "no_distinguish", "no_regen", "no_intrinsic")


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    task: str = "point-reach"
    seed: int = 0
    algo: str = "iher"
    ablation: str = "none"

    # outer loop
    epochs: int = 30
    cycles: int = 50
    batches: int = 40
    real_episodes: int = 2
    imag_episodes: int = 2
    eval_episodes: int = 50
    # stop once an evaluation reaches this success rate (0 disables)
    early_stop_success: float = 0.0

    # dynamics ensemble
    model_steps: int = 50
    ensemble_size: int = 5
    model_hidden: tuple = (128, 128)
    model_lr: float = 1e-3
    model_batch_size: int = 512
    bias: float = 2.0

    # curiosity
    intrinsic_scale: float = 0.5
    intrinsic_clip: float = 0.8
    variance_space: str = "normalized"

    # replay / imagination
    replay_k: int = 4
    real_capacity: int = 1_000_000
    imag_capacity: int = 1_000_000
    snapshot_every: int = 50
    flip_fraction: float = 0.1

    # agent
    agent_hidden: tuple = (256, 256, 256)
    gamma: float = 0.98
    polyak: float = 0.95
    actor_lr: float = 1e-3
    critic_lr: float = 1e-3
    batch_size: int = 256
    random_eps: float = 0.3
    noise_eps: float = 0.2
    action_l2: float = 1.0
    clip_obs: float = 5.0

    # environment
    episode_length: int = 50
    success_tolerance: float = 0.05

    # write 0 instead of elapsed seconds so metrics files are byte-reproducible
    record_wall_clock: bool = True

    @property
    def uses_model(self) -> bool:
        return self.algo == "iher"

    @property
    def effective_intrinsic_scale(self) -> float:
        if not self.uses_model or self.ablation == "no_intrinsic":
            return 0.0
        return self.intrinsic_scale

    @property
    def distinguish(self) -> bool:
        return self.ablation != "no_distinguish"

    @property
    def regenerate(self) -> bool:
        return self.ablation != "no_regen"

    def validate(self) -> "TrainConfig":
        """Collect every problem and raise them together."""
        from ..envs import TASKS

        problems = []
        if self.task not in TASKS:
            problems.append(f"task must be one of {sorted(TASKS)}, got {self.task!r}")
        if self.algo not in ALGOS:
            problems.append(f"algo must be one of {ALGOS}, got {self.algo!r}")
        if self.ablation not in ABLATIONS:
            problems.append(f"unknown ablation {self.ablation!r}; valid: {', '.join(ABLATIONS)}")
        for name in ("epochs", "cycles", "batches", "real_episodes", "imag_episodes", "eval_episodes",
                     "ensemble_size", "model_batch_size", "real_capacity", "imag_capacity",
                     "snapshot_every", "batch_size", "episode_length"):
            if getattr(self, name) <= 0:
                problems.append(f"{name} must be positive")
        if self.model_steps < 0:
            problems.append("model_steps must be non-negative")
        if self.replay_k < 0:
            problems.append("replay_k must be non-negative")
        if not 0.0 <= self.flip_fraction <= 1.0:
            problems.append("flip_fraction must lie in [0, 1]")
        if self.bias < 1:
            problems.append("bias must be >= 1")
        if self.intrinsic_scale < 0:
            problems.append("intrinsic_scale must be non-negative")
        if self.intrinsic_clip <= 0:
            problems.append("intrinsic_clip must be positive")
        if self.variance_space not in ("normalized", "raw"):
            problems.append("variance_space must be 'normalized' or 'raw'")
        if not 0.0 < self.gamma < 1.0:
            problems.append("gamma must lie in (0, 1)")
        if not 0.0 <= self.polyak <= 1.0:
            problems.append("polyak must lie in [0, 1]")
        for name in ("random_eps", "early_stop_success"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                problems.append(f"{name} must lie in [0, 1]")
        if self.real_capacity < self.episode_length or self.imag_capacity < self.episode_length:
            problems.append("buffer capacities must hold at least one episode")
        if problems:
            raise ConfigError("invalid config:\n  " + "\n  ".join(problems))
        return self

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(d) - set(known))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        kw = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
        return cls(**kw)


# desk-scale schedules; anything here can be overridden by the file or CLI
TASK_DEFAULTS = {
    "point-reach": dict(epochs=30, cycles=50, real_episodes=2, model_steps=50),
    "point-push": dict(epochs=50, cycles=50, real_episodes=8, model_steps=300),
    "point-slide": dict(epochs=50, cycles=50, real_episodes=8, model_steps=300),
}


def defaults_for(task: str, **overrides) -> TrainConfig:
    return dataclasses.replace(TrainConfig(task=task), **{**TASK_DEFAULTS.get(task, {}), **overrides})


def _parse_value(name, raw: str, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, tuple):
            return tuple(int(p) for p in raw.replace(",", " ").split())
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"cannot parse {name} = {raw!r}") from None


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines into typed values (``#`` starts a comment)."""
    defaults = {f.name: f.default for f in fields(TrainConfig)}
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in defaults:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = _parse_value(key, value, defaults[key])
    return out


def load_config(path=None, **overrides) -> TrainConfig:
    """Task defaults, then the file's keys, then non-None ``overrides``."""
    values = parse_config_text(Path(path).read_text()) if path else {}
    values.update({k: v for k, v in overrides.items() if v is not None})
    task = values.pop("task", TrainConfig.task)
    return defaults_for(task, **values).validate()


def format_config(cfg: TrainConfig) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ", ".join(str(x) for x in v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
