"""Training configuration.

JSON config files use kebab-case keys mirroring the field names
(``clip-norm`` for ``clip_norm``). Unknown keys and invalid values raise
ConfigError naming the offending field.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError


@dataclass
class TrainConfig:
    # optimisation
    epochs: int = 150
    lr: float = 5e-3
    lr_min: float = 0.0
    batch: int = 16
    momentum: float = 0.9
    nesterov: bool = False
    t0: int = 10
    t_mult: int = 2
    clip_norm: float = 5.0
    dropout: float = 0.3
    l2: float = 1e-5
    seed: int = 0
    # dimensions
    d_w: int = 256
    d_h: int = 32
    depth: int = 2
    d_att: int = 0  # 0 = same width as the concatenated encoder output
    # components
    use_tree: bool = True
    use_blstm: bool = True
    use_relative: bool = True
    use_global: bool = True
    residual: bool = True
    use_pos: bool = True
    use_deprel: bool = True
    attention_order: str = "serial"
    constrain_decoding: bool = False
    # embeddings
    embedding_file: str | None = None
    freeze_embeddings: bool | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def bad(name, why):
            raise ConfigError(f"{_kebab(name)}: {why}")

        for name in ("epochs", "batch", "t0", "t_mult", "d_w", "d_h", "depth"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                bad(name, f"must be a positive integer, got {v!r}")
        for name in ("lr", "clip_norm"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
                bad(name, f"must be positive, got {v!r}")
        for name in ("lr_min", "l2"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or v < 0:
                bad(name, f"must be non-negative, got {v!r}")
        if not 0 <= self.momentum < 1:
            bad("momentum", f"must lie in [0, 1), got {self.momentum!r}")
        if not 0 <= self.dropout < 1:
            bad("dropout", f"must lie in [0, 1), got {self.dropout!r}")
        if self.lr_min > self.lr:
            bad("lr_min", "must not exceed lr")
        if self.d_w < 4 and (self.use_pos or self.use_deprel):
            bad("d_w", "tag embeddings need d_w >= 4")
        if not isinstance(self.d_att, int) or self.d_att < 0:
            bad("d_att", f"must be a non-negative integer, got {self.d_att!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            bad("seed", f"must be an integer, got {self.seed!r}")
        if self.attention_order not in ("serial", "parallel"):
            bad("attention_order", f"must be 'serial' or 'parallel', got {self.attention_order!r}")
        if not (self.use_tree or self.use_blstm):
            bad("use_tree", "at least one encoder must be enabled")

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {_kebab(f.name): getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {_kebab(f.name): f.name for f in fields(cls)}
        kwargs = {}
        for key, value in data.items():
            name = known.get(key) or (key if key in known.values() else None)
            if name is None:
                raise ConfigError(f"{key}: unknown config field")
            kwargs[name] = value
        for f in fields(cls):
            if f.name in kwargs and f.type in ("float",) and isinstance(kwargs[f.name], int) \
                    and not isinstance(kwargs[f.name], bool):
                kwargs[f.name] = float(kwargs[f.name])
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "TrainConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(data)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _kebab(name: str) -> str:
    return name.replace("_", "-")
