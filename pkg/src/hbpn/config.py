"""Training configuration and its flat ``key = value`` file format.

Blank lines and lines starting with ``#`` are ignored.  Keys are the field
names of :class:`TrainConfig`; unknown keys are rejected.  The batch
schedule is written as ``8x500000, 32x500000`` (batch size x iterations).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields

from .errors import ConfigError
from .network import HeadKind, ModelConfig


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_schedule(text: str) -> tuple[tuple[int, int], ...]:
    stages = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            batch, iters = chunk.lower().split("x")
            stages.append((int(batch), int(iters)))
        except ValueError as exc:
            raise ValueError(f"bad schedule stage {chunk!r}; expected BATCHxITERS") from exc
    return tuple(stages)


def format_schedule(schedule) -> str:
    return ",".join(f"{b}x{n}" for b, n in schedule)


@dataclass(frozen=True)
class TrainConfig:
    scale: int = 4
    modules: int = 3
    depth: int = 3
    base_channels: int = 64
    head_kind: str = "WR"
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-4
    batch_schedule: tuple[tuple[int, int], ...] = ((8, 500_000), (32, 500_000))
    patch_size: int = 64
    patch_stride: int = 64
    augment: bool = True
    seed: int = 0
    dataset_root: str = "data"
    out_dir: str = "runs"
    checkpoint_interval: int = 10_000
    log_interval: int = 100
    loss: str = "mse"
    deterministic: bool = True
    model_seed: int | None = field(default=None)

    def __post_init__(self):
        problems = []
        if self.scale not in (2, 4, 8):
            problems.append(f"scale must be 2, 4 or 8 (got {self.scale})")
        for name in ("modules", "depth", "base_channels", "patch_size", "patch_stride",
                     "checkpoint_interval", "log_interval"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be positive (got {getattr(self, name)})")
        if not self.batch_schedule:
            problems.append("batch_schedule is empty")
        for b, n in self.batch_schedule:
            if b < 1 or n < 1:
                problems.append(f"batch schedule counts must be positive (got {b}x{n})")
        if self.lr <= 0:
            problems.append(f"lr must be positive (got {self.lr})")
        if self.loss not in ("mse", "l1"):
            problems.append(f"loss must be mse or l1 (got {self.loss!r})")
        try:
            HeadKind(self.head_kind)
        except ValueError:
            problems.append(f"head_kind must be WR or Plain (got {self.head_kind!r})")
        need = max(2 ** self.depth, self.scale)
        if self.patch_size % need:
            problems.append(f"patch_size {self.patch_size} must be divisible by {need}")
        if self.patch_size < 2 ** (self.depth + 1):
            problems.append(f"patch_size {self.patch_size} too small for depth {self.depth} "
                            f"(minimum {2 ** (self.depth + 1)})")
        if problems:
            raise ConfigError("; ".join(problems))

    @property
    def total_steps(self) -> int:
        return sum(n for _, n in self.batch_schedule)

    def model_config(self) -> ModelConfig:
        seed = self.seed if self.model_seed is None else self.model_seed
        return ModelConfig(modules=self.modules, depth=self.depth, base_channels=self.base_channels,
                           head_kind=self.head_kind, seed=seed)

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "batch_schedule":
                value = format_schedule(value)
            elif isinstance(value, bool):
                value = str(value).lower()
            elif value is None:
                value = ""
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines)

    @classmethod
    def from_mapping(cls, values: dict[str, str], base: "TrainConfig | None" = None) -> "TrainConfig":
        base = base or cls()
        known = {f.name: f for f in fields(cls)}
        changes = {}
        for key, raw in values.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            try:
                changes[key] = _convert(key, raw, getattr(base, key))
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}") from exc
        return dataclasses.replace(base, **changes)


def _convert(key: str, raw, current):
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    if key == "batch_schedule":
        return parse_schedule(raw)
    if key == "model_seed":
        return int(raw) if raw else None
    if isinstance(current, bool):
        return _parse_bool(raw)
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    return raw


def parse_config_text(text: str) -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key = value, got {stripped!r}")
        key, value = stripped.split("=", 1)
        key = key.strip()
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = value.strip()
    return values


def load_config(path=None, overrides: dict[str, str] | None = None) -> TrainConfig:
    """Defaults, then the file (if any), then ``overrides``."""
    values = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as f:
                values = parse_config_text(f.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    values.update(overrides or {})
    return TrainConfig.from_mapping(values)
