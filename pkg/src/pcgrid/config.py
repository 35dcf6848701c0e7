"""Flat ``key = value`` run configuration."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

from .grid_core import DomainError, check_resolution


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class NetConfig:
    """Shape of the toy completion network.

    ``mlp_dims`` lists the hidden widths of the offset head; when empty it
    is derived from the sampled feature width ``F`` as ``(F, F//4, F//16)``.
    """

    grid_res: int = 16
    channels: tuple = (8, 16)
    bottleneck: int = 256
    subsample: int = 256
    tile: int = 8
    mlp_dims: tuple = ()
    sample_bottleneck: bool = True
    leaky_slope: float = 0.2

    @property
    def output_points(self) -> int:
        return self.tile * self.subsample

    @property
    def bottleneck_res(self) -> int:
        return self.grid_res >> len(self.channels)

    @property
    def feature_channels(self) -> list[int]:
        """Channel counts of the feature maps passed to cubic sampling, coarsest first."""
        chans = list(self.channels)
        maps = chans[:-1][::-1]
        if self.sample_bottleneck:
            maps = [chans[-1]] + maps
        return maps

    @property
    def feature_width(self) -> int:
        return 8 * sum(self.feature_channels)

    @property
    def head_dims(self) -> list[int]:
        F = self.feature_width
        hidden = list(self.mlp_dims) or [F, max(F // 4, 1), max(F // 16, 1)]
        return [F, *hidden, 3 * self.tile]

    def validate(self) -> "NetConfig":
        check_resolution(self.grid_res)
        if not self.channels or min(self.channels) < 1:
            raise DomainError(f"channels must be positive, got {self.channels}")
        if self.grid_res % (2 ** len(self.channels)) or self.bottleneck_res < 2:
            raise DomainError(
                f"grid_res {self.grid_res} cannot be halved {len(self.channels)} times"
            )
        if not self.feature_channels:
            raise DomainError("no feature maps to sample; enable sample_bottleneck")
        for name in ("bottleneck", "subsample", "tile"):
            if getattr(self, name) < 1:
                raise DomainError(f"{name} must be >= 1")
        return self


@dataclass(frozen=True)
class RunConfig:
    """Everything ``train``/``eval`` read from a config file."""

    net: NetConfig = field(default_factory=NetConfig)
    loss_res: int = 32
    seed: int = 0
    lr: float = 3e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 300
    batch_size: int = 8
    lr_decay_epochs: int = 100
    lr_decay_factor: float = 0.5
    coarse_weight: float = 0.5
    final_weight: float = 1.0
    cd_weight: float = 1.0
    fscore_d: float = 0.01
    uniformity_p: float = 0.01
    uniformity_patches: int = 10

    def validate(self) -> "RunConfig":
        self.net.validate()
        check_resolution(self.loss_res)
        if self.lr < 0 or self.epochs < 0 or self.batch_size < 1 or self.lr_decay_epochs < 1:
            raise DomainError("lr, epochs must be >= 0; batch_size, lr_decay_epochs >= 1")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise DomainError("Adam betas must lie in [0, 1)")
        if min(self.coarse_weight, self.final_weight, self.cd_weight) < 0:
            raise DomainError("loss weights must be nonnegative")
        if not 0 < self.uniformity_p < 1 or self.fscore_d <= 0 or self.uniformity_patches < 1:
            raise DomainError("invalid metric parameters")
        return self


_NET_KEYS = {f.name: f for f in fields(NetConfig)}
_RUN_KEYS = {f.name: f for f in fields(RunConfig) if f.name != "net"}


def _convert(raw: str, default):
    if isinstance(default, bool):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if isinstance(default, tuple):
        return tuple(int(v) for v in raw.replace(",", " ").split())
    return type(default)(raw)


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment. Unknown keys are errors."""
    net_kw, run_kw = {}, {}
    net_defaults, run_defaults = NetConfig(), RunConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key in _NET_KEYS:
            target, default = net_kw, getattr(net_defaults, key)
        elif key in _RUN_KEYS:
            target, default = run_kw, getattr(run_defaults, key)
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            target[key] = _convert(raw, default)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    try:
        return RunConfig(net=NetConfig(**net_kw), **run_kw).validate()
    except DomainError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def net_config_text(net: NetConfig) -> str:
    return "".join(f"{k} = {_format(getattr(net, k))}\n" for k in _NET_KEYS)


def config_text(cfg: RunConfig) -> str:
    run = "".join(f"{k} = {_format(getattr(cfg, k))}\n" for k in _RUN_KEYS)
    return net_config_text(cfg.net) + run


def replace(cfg: RunConfig, **changes) -> RunConfig:
    """Copy of ``cfg`` with top-level or ``net`` fields changed."""
    net_changes = {k: v for k, v in changes.items() if k in _NET_KEYS}
    run_changes = {k: v for k, v in changes.items() if k not in _NET_KEYS}
    net = dataclasses.replace(cfg.net, **net_changes)
    return dataclasses.replace(cfg, net=net, **run_changes).validate()
