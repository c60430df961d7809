"""Run configuration: pydantic models, desk defaults and the JSON loader.

Every section rejects unknown keys. Nothing is read from the environment;
a run is fully described by its config document plus the CLI flags.
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError

logger = logging.getLogger(__name__)


# ===============================
# Desk-scale lattice
# ===============================
DESK_D = 1
DESK_L = 4
DESK_T = 4
DESK_SPACING = 1.0

# ===============================
# Model defaults (filled cosine band, exponential interaction)
# ===============================
DEFAULT_DISPERSION = "cosine"
DEFAULT_DISPERSION_PARAMS = [-2.0, -1.0]
DEFAULT_GAP = 1.0
DEFAULT_SMOOTHNESS = 4
DEFAULT_INTERACTION = "exponential"
DEFAULT_INTERACTION_PARAMS = [1.0, 1.0]
DEFAULT_COUPLING = 0.05
DEFAULT_COUNTERTERM_TERMS = 20

# ===============================
# Truncation and run options
# ===============================
DEFAULT_R = 1
DEFAULT_R0 = 1
DEFAULT_DELTA_MAX = 4
DEFAULT_LAMBDA_ORDER = 2
DEFAULT_M_MAX = 6
DEFAULT_EPSILON = 1.0
DEFAULT_LAMBDAS = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1]
DEFAULT_OUT = "reports"

MODES = ("verify", "bounds", "greens", "scaling")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LatticeConfig(_Section):
    d: int = Field(DESK_D, ge=1)
    L: int = Field(DESK_L, ge=1)
    T: int = Field(DESK_T, ge=1)
    dx: Union[float, List[float]] = DESK_SPACING
    dt: float = Field(DESK_SPACING, gt=0)

    @field_validator("dx")
    @classmethod
    def _positive_spacing(cls, v):
        values = v if isinstance(v, list) else [v]
        if not values or any(x <= 0 for x in values):
            raise ValueError("spacings must be positive")
        return v

    @model_validator(mode="after")
    def _spacing_per_axis(self):
        if isinstance(self.dx, list) and len(self.dx) != self.d:
            raise ValueError(f"dx needs {self.d} entries, got {len(self.dx)}")
        return self


class DispersionConfig(_Section):
    type: Literal["constant", "cosine", "quadratic"] = DEFAULT_DISPERSION
    params: List[float] = Field(default_factory=lambda: list(DEFAULT_DISPERSION_PARAMS))
    mu: float = Field(DEFAULT_GAP, gt=0)
    r: int = Field(4, ge=0)


class ChiConfig(_Section):
    inner: float = Field(1.0, ge=0)
    outer: float = Field(2.0, gt=0)
    smoothness: int = Field(DEFAULT_SMOOTHNESS, ge=0)

    @model_validator(mode="after")
    def _ordered(self):
        if not self.inner < self.outer:
            raise ValueError("chi needs inner < outer")
        return self


class CutoffConfig(_Section):
    type: Literal["unit", "plateau"] = "unit"
    inner: float = Field(1.0, ge=0)
    outer: float = Field(2.0, gt=0)
    smoothness: int = Field(DEFAULT_SMOOTHNESS, ge=0)
    chi: Optional[ChiConfig] = None

    @model_validator(mode="after")
    def _ordered(self):
        if self.type == "plateau" and not self.inner < self.outer:
            raise ValueError("plateau cutoff needs inner < outer")
        return self


class CountertermConfig(_Section):
    """Counterterm de(k) subtracted from the dispersion; expanded as a geometric series in the bounds report."""

    type: Literal["constant", "cosine"] = "constant"
    params: List[float] = Field(default_factory=lambda: [0.0])
    n_max: int = Field(DEFAULT_COUNTERTERM_TERMS, ge=0)


class InteractionConfig(_Section):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    type: Literal["exponential", "onsite", "zero"] = DEFAULT_INTERACTION
    params: List[float] = Field(default_factory=lambda: list(DEFAULT_INTERACTION_PARAMS))
    coupling: float = Field(DEFAULT_COUPLING, alias="lambda")

    @model_validator(mode="after")
    def _param_count(self):
        needed = {"exponential": 2, "onsite": 1, "zero": 0}[self.type]
        if len(self.params) < needed:
            raise ValueError(f"{self.type} interaction needs {needed} parameters")
        if self.type == "exponential" and self.params[1] <= 0:
            raise ValueError("interaction range must be positive")
        return self


class TruncationConfig(_Section):
    r: int = Field(DEFAULT_R, ge=0)
    r0: int = Field(DEFAULT_R0, ge=0)
    delta_max: int = Field(DEFAULT_DELTA_MAX, ge=0)
    lambda_order: int = Field(DEFAULT_LAMBDA_ORDER, ge=1)
    m_max: int = Field(DEFAULT_M_MAX, ge=2)


class RunConfig(_Section):
    mode: Literal["verify", "bounds", "greens", "scaling"] = "verify"
    seed: int = Field(0, ge=0)
    epsilon: float = Field(DEFAULT_EPSILON, gt=0)
    out: str = DEFAULT_OUT
    format: Literal["json", "csv"] = "json"
    lambdas: List[float] = Field(default_factory=lambda: list(DEFAULT_LAMBDAS))

    @field_validator("lambdas")
    @classmethod
    def _positive_lambdas(cls, v):
        if any(x <= 0 for x in v):
            raise ValueError("scaling couplings must be positive")
        return v


class ChecksConfig(_Section):
    suites: Optional[List[str]] = None
    pairs: int = Field(50, ge=1)
    leibniz_pairs: int = Field(100, ge=1)
    semigroup_samples: int = Field(20, ge=1)
    pointwise_samples: int = Field(1000, ge=1)
    rg_samples: int = Field(20, ge=1)
    # mu in the hypothesis c <= c^2 / mu of the derivative bound; None uses the body of c
    rg_mu: Optional[float] = Field(None, gt=0)


class FermiRGConfig(_Section):
    lattice: LatticeConfig = Field(default_factory=LatticeConfig)
    dispersion: DispersionConfig = Field(default_factory=DispersionConfig)
    cutoff: CutoffConfig = Field(default_factory=CutoffConfig)
    counterterm: Optional[CountertermConfig] = None
    interaction: InteractionConfig = Field(default_factory=InteractionConfig)
    truncation: TruncationConfig = Field(default_factory=TruncationConfig)
    run: RunConfig = Field(default_factory=RunConfig)
    checks: ChecksConfig = Field(default_factory=ChecksConfig)

    @model_validator(mode="after")
    def _dimensions_agree(self):
        counts = {"constant": (1,), "cosine": (2, self.lattice.d + 1), "quadratic": (2,)}
        expected = counts[self.dispersion.type]
        if len(self.dispersion.params) not in expected:
            raise ValueError(f"{self.dispersion.type} dispersion takes {expected} parameters")
        if self.counterterm is not None and len(self.counterterm.params) not in counts[self.counterterm.type]:
            raise ValueError(f"{self.counterterm.type} counterterm takes {counts[self.counterterm.type]} parameters")
        return self


def _error_path(exc: ValidationError):
    first = exc.errors()[0]
    return ".".join(str(part) for part in first["loc"]), first["msg"]


def validate_config(data) -> FermiRGConfig:
    try:
        return FermiRGConfig.model_validate(data)
    except ValidationError as exc:
        path, msg = _error_path(exc)
        raise ConfigError(msg, path=path) from exc


def load_config(path=None) -> FermiRGConfig:
    """Read and validate a JSON config; ``None`` gives the desk defaults."""
    if path is None:
        return FermiRGConfig()
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    cfg = validate_config(data)
    logger.info("✅ Loaded config %s", path)
    return cfg


def config_digest(cfg: FermiRGConfig) -> str:
    canonical = json.dumps(cfg.model_dump(mode="json", by_alias=True), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
