"""Pipeline configuration: defaults < TOML file < command-line flags."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Mapping

import tomli

from .errors import SchemaError, ValidationError
from .providers import DEFAULT_IN_FLIGHT, HttpCorrector, HttpEmbedder, HttpJudge, HttpRefiner, HttpService
from .reflection import DEFAULT_TAU, MAX_ROUNDS
from .scene import Vec3
from .sceneinfo import Mode
from .selection import DEFAULT_K1, DEFAULT_K2
from .spatial import ReasonerConfig, VerticalAxis

DEFAULT_TOKEN_ENV = "SCENETEXT_API_TOKEN"


@dataclass(frozen=True)
class SelectionConfig:
    k1: int = DEFAULT_K1
    k2: int = DEFAULT_K2
    rounds: int = 2

    def __post_init__(self) -> None:
        if self.rounds not in (0, 1, 2):
            raise ValidationError("selection rounds must be 0, 1 or 2")
        if self.k1 < 1 or self.k2 < 1:
            raise ValidationError("k1 and k2 must be >= 1")
        if self.rounds == 2 and self.k2 > self.k1:
            raise ValidationError("k2 must not exceed k1")


@dataclass(frozen=True)
class ReflectionConfig:
    tau: float = DEFAULT_TAU
    rounds: int = 1

    def __post_init__(self) -> None:
        if not 0.0 <= self.tau <= 1.0:
            raise ValidationError("tau must be in [0, 1]")
        if not 1 <= self.rounds <= MAX_ROUNDS:
            raise ValidationError(f"reflection rounds must be in [1, {MAX_ROUNDS}]")


@dataclass(frozen=True)
class ProviderConfig:
    caption_endpoint: str | None = None
    embedding_endpoint: str | None = None
    embedding_dimension: int = 64
    judge_endpoint: str | None = None
    corrector_endpoint: str | None = None
    token_env: str | None = DEFAULT_TOKEN_ENV
    timeout: float = 30.0
    attempts: int = 3
    max_in_flight: int = DEFAULT_IN_FLIGHT

    def _service(self, endpoint: str) -> HttpService:
        token_env = self.token_env if self.token_env and os.environ.get(self.token_env) else None
        return HttpService(endpoint, token_env=token_env, timeout=self.timeout, attempts=self.attempts)

    def refiner(self) -> HttpRefiner | None:
        return HttpRefiner(self._service(self.caption_endpoint)) if self.caption_endpoint else None

    def embedder(self) -> HttpEmbedder | None:
        if not self.embedding_endpoint:
            return None
        return HttpEmbedder(self._service(self.embedding_endpoint), self.embedding_dimension)

    def judge(self) -> HttpJudge | None:
        return HttpJudge(self._service(self.judge_endpoint)) if self.judge_endpoint else None

    def corrector(self) -> HttpCorrector | None:
        return HttpCorrector(self._service(self.corrector_endpoint)) if self.corrector_endpoint else None


@dataclass(frozen=True)
class PipelineConfig:
    reasoner: ReasonerConfig = field(default_factory=ReasonerConfig)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    reflection: ReflectionConfig = field(default_factory=ReflectionConfig)
    providers: ProviderConfig = field(default_factory=ProviderConfig)
    mode: Mode = Mode.COMPLEX

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["mode"] = self.mode.value
        out["reasoner"]["vertical_axis"] = self.reasoner.vertical_axis.value
        out["reasoner"]["world_up"] = list(self.reasoner.world_up)
        return out


_SECTIONS = {
    "reasoner": ReasonerConfig,
    "selection": SelectionConfig,
    "reflection": ReflectionConfig,
    "providers": ProviderConfig,
}


def _coerce(cls: type, values: Mapping[str, Any], where: str) -> dict[str, Any]:
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise SchemaError(f"{where}: unknown key(s) {', '.join(sorted(unknown))}")
    out = dict(values)
    if cls is ReasonerConfig:
        if "vertical_axis" in out:
            try:
                out["vertical_axis"] = VerticalAxis(out["vertical_axis"])
            except ValueError:
                raise SchemaError(f"{where}.vertical_axis: expected camera_up or world_up") from None
        if "world_up" in out:
            out["world_up"] = Vec3.of(out["world_up"])
    return out


def merge(base: PipelineConfig, overrides: Mapping[str, Any]) -> PipelineConfig:
    """Apply a nested mapping of overrides; ``None`` values are ignored."""
    cfg = base
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "mode":
            try:
                cfg = replace(cfg, mode=Mode(value))
            except ValueError:
                raise SchemaError(f"unknown mode {value!r}") from None
        elif key in _SECTIONS:
            if not isinstance(value, Mapping):
                raise SchemaError(f"[{key}] must be a table")
            present = {k: v for k, v in value.items() if v is not None}
            if present:
                section = getattr(cfg, key)
                try:
                    cfg = replace(cfg, **{key: replace(section, **_coerce(_SECTIONS[key], present, key))})
                except TypeError as exc:
                    raise SchemaError(f"[{key}]: {exc}") from exc
        else:
            raise SchemaError(f"unknown config key {key!r}")
    return cfg


def load_config(path: str | os.PathLike | None, overrides: Mapping[str, Any] | None = None) -> PipelineConfig:
    cfg = PipelineConfig()
    if path is not None:
        with open(path, "rb") as fh:
            try:
                data = tomli.load(fh)
            except tomli.TOMLDecodeError as exc:
                raise SchemaError(f"{path}: invalid TOML ({exc})") from exc
        cfg = merge(cfg, data)
    if overrides:
        cfg = merge(cfg, overrides)
    return cfg
