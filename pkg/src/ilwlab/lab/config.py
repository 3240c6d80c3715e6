"""Run configuration: one JSON document per experiment, unknown keys rejected."""

from __future__ import annotations

import json
from enum import Enum
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import (BaseModel, ConfigDict, Field, ValidationError,
                      field_validator, model_validator)
from pydantic.alias_generators import to_camel

from ..errors import ConfigError
from ..spectral import (Grid, SpectralField, forward, galilean_reduce, l2_norm,
                        random_field)


class Experiment(str, Enum):
    CONVERGE_SHALLOW = "converge-shallow"
    TAIL_TRACK = "tail-track"
    ALPHA_CONSERVE = "alpha-conserve"
    NF_VERIFY = "nf-verify"
    SYMBOL_TABLE = "symbol-table"


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", alias_generator=to_camel,
                              populate_by_name=True, frozen=True)


class InitialData(_Model):
    """``cos``: ``amplitude cos(x)``; ``bump``: a mean-removed periodic
    Gaussian of width ``width``; ``random``: seeded band-limited noise scaled
    to L2 norm ``amplitude``."""

    profile: Literal["cos", "bump", "random"] = "cos"
    amplitude: float = 1.0
    seed: Optional[int] = None
    band: int = 8
    width: float = 0.5

    @model_validator(mode="after")
    def _check(self):
        if self.profile == "random" and self.seed is None:
            raise ValueError("random initial data needs a seed")
        if self.band < 1:
            raise ValueError("band must be positive")
        if not self.width > 0:
            raise ValueError("width must be positive")
        return self

    def build(self, grid: Grid) -> SpectralField:
        """Mean-zero initial field on ``grid`` (the mean is removed by the
        Galilean reduction)."""
        if self.profile == "cos":
            f = forward(self.amplitude * np.cos(grid.x), grid)
        elif self.profile == "bump":
            y = np.angle(np.exp(1j * (grid.x - np.pi)))
            f = forward(self.amplitude * np.exp(-(y / self.width) ** 2), grid)
        else:
            rng = np.random.default_rng(self.seed)
            f = random_field(grid, rng, band=min(self.band, grid.dealias_cut))
            n = l2_norm(f)
            f = f * (self.amplitude / n) if n > 0 else f
        reduced, _ = galilean_reduce(f)
        return reduced


class ProbeConfig(_Model):
    s: float = -0.25
    mu: float = 4.0
    N: float = Field(32.0, alias="N")

    @model_validator(mode="after")
    def _check(self):
        if not -0.5 < self.s < 0:
            raise ValueError("probe needs -1/2 < s < 0")
        if not (self.mu > 0 and self.N > 0):
            raise ValueError("probe mu and N must be positive")
        return self


class NfConfig(_Model):
    K: float = Field(1.0, alias="K")
    delta: Optional[float] = None
    lattice_cut: Optional[int] = None
    max_gen: int = 3
    samples: int = 4
    verify_times: int = 5

    @model_validator(mode="after")
    def _check(self):
        if not self.K >= 1:
            raise ValueError("K must be >= 1")
        if not 1 <= self.max_gen <= 4:
            raise ValueError("maxGen must lie in 1..4")
        if self.samples < 1 or self.verify_times < 1:
            raise ValueError("samples and verifyTimes must be positive")
        return self


class RunConfig(_Model):
    experiment: Experiment
    modes: int = 128
    horizon: float = 0.5
    dt: float = 1e-3
    record_every: int = 10
    initial_data: InitialData = InitialData()
    delta_grid: list[float] = Field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])
    probe: Optional[ProbeConfig] = None
    nf: Optional[NfConfig] = None
    kappa: float = 5.0
    split_cutoff: float = 8.0
    perturbation: float = 0.0
    xi_max: int = 64
    output_dir: str = "lab-output"
    threads: int = 1

    @field_validator("modes")
    @classmethod
    def _modes(cls, v):
        if v < 8 or v % 2:
            raise ValueError("modes must be an even integer >= 8")
        return v

    @field_validator("delta_grid")
    @classmethod
    def _deltas(cls, v):
        if not v:
            raise ValueError("deltaGrid must not be empty")
        if any(not d > 0 for d in v):
            raise ValueError("deltaGrid entries must be positive")
        if any(b >= a for a, b in zip(v, v[1:])):
            raise ValueError("deltaGrid must be strictly decreasing")
        return v

    @model_validator(mode="after")
    def _check(self):
        for name in ("horizon", "dt", "kappa", "split_cutoff"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{to_camel(name)} must be positive")
        if self.dt > self.horizon:
            raise ValueError("dt must not exceed horizon")
        if self.record_every < 1 or self.threads < 1 or self.xi_max < 1:
            raise ValueError("recordEvery, threads and xiMax must be positive")
        if self.perturbation < 0:
            raise ValueError("perturbation must be non-negative")
        if self.experiment is Experiment.TAIL_TRACK and self.probe is None:
            raise ValueError("tail-track needs a probe")
        if self.experiment is Experiment.NF_VERIFY and self.nf is None:
            raise ValueError("nf-verify needs nf parameters")
        return self

    @property
    def grid(self) -> Grid:
        return Grid(self.modes)

    def echo(self) -> dict:
        return self.model_dump(mode="json", by_alias=True)


def parse_config(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return parse_config(data)
