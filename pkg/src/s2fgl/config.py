"""Flat ``key = value`` experiment configuration."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .federation import METHODS, TrainConfig


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple:
    return tuple(float(t) for t in str(text).replace(";", ",").split(",") if t.strip())


def _ints(text: str) -> tuple:
    return tuple(int(t) for t in str(text).replace(";", ",").split(",") if t.strip())


@dataclass
class ExperimentConfig:
    experiment_id: str = "experiment"
    dataset: str = "sbm-cora-500"
    data_seed: int = -1
    sbm_blocks: tuple = (50, 50)
    sbm_p_in: tuple = (0.1,)
    sbm_p_out: float = 0.01
    sbm_dim: int = 16
    sbm_feature_scale: float = 1.0
    num_clients: int = 10
    backbone: str = "gcn"
    method: str = "s2fgl"
    lambda1: float = 10.0
    lambda2: float = 0.5
    mu: float = 0.01
    damping_alpha: float = 0.85
    k_fraction: float = 1.0 / 3.0
    k_sim: int = 10
    k_eig: int = 4
    proto_fraction: float = 0.5
    num_anchors: int = 4
    temperature: float = 1.0
    rounds: int = 100
    local_epochs: int = 3
    lr: float = 0.2
    weight_decay: float = 5e-4
    hidden: int = 64
    split: tuple = (0.6, 0.2, 0.2)
    seeds: tuple = (0,)
    output_dir: str = "runs"
    client_counts: tuple = (1, 5, 10, 20)
    bins: int = 20
    nlir_scales: tuple = (100.0, 50.0, 10.0, 1.0)
    fgma_scales: tuple = (0.01, 0.05, 0.5, 1.0)

    def validate(self) -> "ExperimentConfig":
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.backbone not in ("gcn", "acm"):
            raise ConfigError(f"backbone must be gcn or acm, got {self.backbone!r}")
        for name in ("lambda1", "lambda2", "mu", "weight_decay", "lr", "sbm_p_out", "sbm_feature_scale"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if not 0 < self.damping_alpha <= 1:
            raise ConfigError("damping_alpha must lie in (0, 1]")
        if not 0 < self.k_fraction <= 1:
            raise ConfigError("k_fraction must lie in (0, 1]")
        if not 0 < self.proto_fraction <= 1:
            raise ConfigError("proto_fraction must lie in (0, 1]")
        for name in ("num_clients", "k_sim", "k_eig", "num_anchors", "rounds", "local_epochs", "hidden", "sbm_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if self.temperature <= 0:
            raise ConfigError("temperature must be positive")
        if self.bins < 2:
            raise ConfigError("bins must be at least 2")
        if len(self.split) != 3 or abs(sum(self.split) - 1.0) > 1e-9 or min(self.split) < 0:
            raise ConfigError("split must be three non-negative ratios summing to 1")
        if not self.seeds:
            raise ConfigError("seeds must list at least one seed")
        if any(c < 1 for c in self.client_counts):
            raise ConfigError("client_counts must all be at least 1")
        if any(not 0 <= p <= 1 for p in (*self.sbm_p_in, self.sbm_p_out)):
            raise ConfigError("SBM probabilities must lie in [0, 1]")
        return self

    def train_config(self) -> TrainConfig:
        names = {f.name for f in fields(TrainConfig)}
        return TrainConfig(**{k: v for k, v in dataclasses.asdict(self).items() if k in names})

    def sbm_params(self) -> dict:
        p_in = self.sbm_p_in[0] if len(self.sbm_p_in) == 1 else list(self.sbm_p_in)
        return {
            "blocks": list(self.sbm_blocks),
            "p_in": p_in,
            "p_out": self.sbm_p_out,
            "dim": self.sbm_dim,
            "feature_scale": self.sbm_feature_scale,
        }

    def dataset_seed(self, seed: int) -> int:
        return seed if self.data_seed < 0 else self.data_seed

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


_PARSERS = {}
for _f in fields(ExperimentConfig):
    _default = _f.default if _f.default is not dataclasses.MISSING else None
    if isinstance(_default, tuple):
        _PARSERS[_f.name] = _floats if _default and isinstance(_default[0], float) else _ints
    elif isinstance(_default, bool):
        _PARSERS[_f.name] = lambda s: str(s).lower() in ("1", "true", "yes")
    elif isinstance(_default, int):
        _PARSERS[_f.name] = int
    elif isinstance(_default, float):
        _PARSERS[_f.name] = float
    else:
        _PARSERS[_f.name] = str
# ratios and probabilities are floats even when written like integers
_PARSERS["split"] = _floats
_PARSERS["sbm_p_in"] = _floats


def parse_pairs(pairs: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    cfg = dataclasses.replace(base) if base else ExperimentConfig()
    for key, raw in pairs.items():
        name = key.strip().replace("-", "_")
        if name not in _PARSERS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            setattr(cfg, name, _PARSERS[name](raw))
        except ValueError:
            raise ConfigError(f"bad value for {name}: {raw!r}") from None
    return cfg


def read_config_file(path) -> dict:
    pairs = {}
    for no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{no}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        pairs[key] = value
    return pairs


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Defaults, then the file, then command-line overrides."""
    cfg = ExperimentConfig()
    if path is not None:
        cfg = parse_pairs(read_config_file(path), cfg)
    if overrides:
        cfg = parse_pairs(overrides, cfg)
    return cfg.validate()


def overrides_from_argv(argv) -> dict:
    """``['--k', 'v', '--x=y']`` -> ``{'k': 'v', 'x': 'y'}``."""
    out = {}
    it = iter(argv)
    for tok in it:
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        tok = tok[2:]
        if "=" in tok:
            k, v = tok.split("=", 1)
        else:
            k = tok
            try:
                v = next(it)
            except StopIteration:
                raise ConfigError(f"missing value for --{k}") from None
        out[k] = v
    return out

