"""JSON run configuration validated against the shipped schema."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from ..exceptions import UsageError
from ..inference.chains import SamplerConfig
from ..model import PriorSpec


def load_schema(name: str) -> dict:
    """A JSON schema shipped in ``extmix/schemas``."""
    text = resources.files("extmix").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class RunConfig:
    """Prior overrides, sampler settings, scenario and predictive-check options."""

    prior: dict = field(default_factory=dict)
    sampler: dict = field(default_factory=dict)
    scenario: dict = field(default_factory=dict)
    ppc: dict = field(default_factory=dict)

    def sampler_config(self, seed: int) -> SamplerConfig:
        return SamplerConfig.from_dict({**self.sampler, "seed": seed})

    def prior_for(self, data) -> PriorSpec:
        """Default data-driven prior with the configured entries replaced."""
        base = PriorSpec.default(data)
        if not self.prior:
            return base
        over = {k: (np.asarray(v, dtype=float) if isinstance(v, list) else v)
                for k, v in self.prior.items()}
        return replace(base, **over)


def load_config(path: Optional[str]) -> RunConfig:
    """Read and validate a configuration file; ``None`` gives all defaults.

    Raises
    ------
    UsageError
        If the file does not match the schema.
    """
    if path is None:
        return RunConfig()
    raw = json.loads(Path(path).read_text())
    try:
        jsonschema.validate(raw, load_schema("config"))
    except jsonschema.ValidationError as exc:
        raise UsageError(f"invalid configuration {path}: {exc.message}") from None
    return RunConfig(raw.get("prior", {}), raw.get("sampler", {}), raw.get("scenario", {}),
                     raw.get("ppc", {}))
