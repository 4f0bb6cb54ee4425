"""
Configuration for the cone blow-up lab.

Numerical defaults live in LabConfig; grid sizes come from ResolutionPresets;
JSON experiment files are validated against the pydantic models below.
"""

import math
from dataclasses import dataclass, asdict
from typing import Any, ClassVar, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


@dataclass
class LabConfig:
    """Core numerical parameters shared by every experiment."""

    # Newton
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    positivity_floor: float = 1e-14

    # Eigen solves
    eigen_tol: float = 1e-8
    eigen_max_iter: int = 500
    resolvent_terms: int = 10
    resolvent_tail_tol: float = 1e-5

    # Expansion
    blend_band: float = 0.1
    exhaustion_cells: int = 4
    exhaustion_levels: int = 6
    cauchy_tol: float = 1e-5

    # Domain solves
    bracket_gap_tol: float = 0.01
    excluded_inner_cells: int = 3

    # PASS thresholds
    exponent_fraction: float = 0.9
    counterexample_threshold: float = 0.01

    # Reproducibility
    seed: int = 0

    def to_dict(self) -> Dict[str, Any]:
        """Convert config to dictionary."""
        return asdict(self)


class ResolutionPresets:
    """Grid sizes for the different run scales."""

    QUICK = {
        "profile_N": 64,
        "eigen_N": 96,
        "sphere_n_theta": 24,
        "sphere_n_phi": 24,
        "meridian_n_s": 40,
        "meridian_n_theta": 20,
    }

    STANDARD = {
        "profile_N": 256,
        "eigen_N": 256,
        "sphere_n_theta": 64,
        "sphere_n_phi": 64,
        "meridian_n_s": 160,
        "meridian_n_theta": 64,
    }

    FINE = {
        "profile_N": 512,
        "eigen_N": 512,
        "sphere_n_theta": 256,
        "sphere_n_phi": 256,
        "meridian_n_s": 512,
        "meridian_n_theta": 512,
    }

    @classmethod
    def get_config(cls, level: str) -> Dict[str, int]:
        """Get grid sizes for a resolution level."""
        configs = {
            "quick": cls.QUICK,
            "standard": cls.STANDARD,
            "fine": cls.FINE,
        }
        return configs.get(level, cls.STANDARD)


# ======================================================================
# Experiment parameter schemas
# ======================================================================

_STD = ResolutionPresets.STANDARD


class _Params(BaseModel):
    model_config = ConfigDict(extra="forbid")

    # field name -> ResolutionPresets key
    preset_fields: ClassVar[Dict[str, str]] = {}

    def with_resolution(self, N: int) -> "_Params":
        """Return a copy with every grid-size field replaced by N."""
        updates = {name: N for name in ("N", "n_theta", "n_phi", "n_s") if name in type(self).model_fields}
        return self.model_copy(update=updates)

    def with_preset(self, level: str) -> "_Params":
        """Return a copy with grid sizes taken from a resolution preset."""
        sizes = ResolutionPresets.get_config(level)
        return self.model_copy(update={name: sizes[key] for name, key in self.preset_fields.items()})


def _check_angle(value: float) -> float:
    if not 0.0 < value <= math.pi:
        raise ValueError(f"angle must lie in (0, pi], got {value}")
    return value


def _check_map_spec(value: str) -> str:
    if value in ("identity", "example5") or value.startswith("example1:"):
        return value
    raise ValueError(f"unknown map spec '{value}' (use identity, example1:<c>, example5)")


class WedgeParams(_Params):
    preset_fields: ClassVar[Dict[str, str]] = {"N": "profile_N"}

    alpha: float = math.pi / 2
    N: int = _STD["profile_N"]
    extrapolate: bool = True
    residual_tol: float = 1e-5
    exact_tol: float = 1e-6
    slope_tol: float = 5e-3
    order_band: List[float] = Field(default_factory=lambda: [3.6, 4.4])

    check_alpha = field_validator("alpha")(_check_angle)


class CapParams(_Params):
    preset_fields: ClassVar[Dict[str, str]] = {"N": "profile_N"}

    n: int = Field(3, ge=3)
    alpha: float = math.pi / 3
    N: int = _STD["profile_N"]
    extrapolate: bool = True
    residual_tol: float = 1e-5
    exact_tol: float = 1e-5
    slope_tol: float = 5e-3
    order_band: List[float] = Field(default_factory=lambda: [3.6, 4.4])

    check_alpha = field_validator("alpha")(_check_angle)


class SphereParams(_Params):
    preset_fields: ClassVar[Dict[str, str]] = {"n_theta": "sphere_n_theta", "n_phi": "sphere_n_phi"}

    kind: Literal["cap", "lune"] = "lune"
    alpha: float = math.pi / 2
    n_theta: int = _STD["sphere_n_theta"]
    n_phi: int = _STD["sphere_n_phi"]
    extrapolate: bool = False
    residual_tol: float = 1e-5
    slope_tol: float = 5e-3
    lune_tol: float = 1e-4

    check_alpha = field_validator("alpha")(_check_angle)


class EigenParams(_Params):
    preset_fields: ClassVar[Dict[str, str]] = {"N": "eigen_N"}

    n: int = Field(3, ge=3)
    alpha: float = math.pi / 2
    N: int = _STD["eigen_N"]
    k: int = Field(10, ge=1)
    m: int = Field(0, ge=0)
    alpha_sweep: List[float] = Field(default_factory=list)
    hemisphere_tol: float = 1e-3


class CoeffParams(_Params):
    preset_fields: ClassVar[Dict[str, str]] = {"N": "eigen_N"}

    n: int = Field(3, ge=3)
    alpha: float = math.pi / 2
    N: int = _STD["eigen_N"]
    n_phi: int = 32
    map: str = "example5"
    k: int = Field(10, ge=1)
    band: float = 0.1
    residual_tol: float = 1e-5
    linearity_tol: float = 1e-8

    check_map = field_validator("map")(_check_map_spec)


class BallParams(_Params):
    n: int = Field(3, ge=3)
    s: float = Field(1.0, gt=0)
    N: int = 512
    exact_tol: float = 1e-6


class SolveParams(_Params):
    preset_fields: ClassVar[Dict[str, str]] = {"n_s": "meridian_n_s", "n_theta": "meridian_n_theta"}

    alpha: float = math.pi / 3
    map: str = "example1:0.05"
    r_in: float = Field(1e-3, gt=0)
    r_out: float = Field(1.0, gt=0)
    n_s: int = _STD["meridian_n_s"]
    n_theta: int = _STD["meridian_n_theta"]
    eps_scale: float = Field(0.1, ge=0)
    gap_tol: float = 0.01
    residual_tol: float = 1e-5

    check_alpha = field_validator("alpha")(_check_angle)
    check_map = field_validator("map")(_check_map_spec)

    @model_validator(mode="after")
    def check_radii(self):
        if self.r_in >= self.r_out:
            raise ValueError("r_in must be smaller than r_out")
        return self


class Theorem1Params(SolveParams):
    exponent_fraction: float = 0.9
    theoretical_exponent: float = 1.0
    min_window_decades: float = 0.5
    noise_floor: float = 1e-10


class Theorem2Params(Theorem1Params):
    map: str = "example1:0.05"
    alpha: float = math.pi / 2
    k: int = Field(10, ge=1)
    ambiguity_band: float = 0.05
    supersolution_slack: float = 1e-3


class Example51Params(_Params):
    preset_fields: ClassVar[Dict[str, str]] = {"N": "profile_N"}

    z_list: List[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0, 10.0, 50.0])
    k_list: List[float] = Field(default_factory=lambda: [0.1 * i for i in range(1, 10)])
    s_values: List[float] = Field(default_factory=lambda: [1e-2, 1e-3])
    N: int = _STD["profile_N"]
    ratio_threshold: float = 0.01
    homogeneity_tol: float = 1e-6


class Example52Params(_Params):
    N: int = 128
    n_phi: int = 32
    k: int = Field(10, ge=1)
    band_fraction: float = 0.1
    slope_tol: float = 0.2
    band_ratio_threshold: float = 0.1


class BarrierParams(_Params):
    preset_fields: ClassVar[Dict[str, str]] = {"N": "profile_N"}

    n: int = Field(3, ge=3)
    cone_angles: List[float] = Field(default_factory=lambda: [math.pi / 2, math.pi / 3])
    maps: List[str] = Field(default_factory=lambda: ["identity", "example1:0.05"])
    B_values: List[float] = Field(default_factory=lambda: [1.0, 10.0, 100.0, 1000.0])
    radius_start: float = 0.1
    halvings: int = 6
    samples: int = 400
    N: int = _STD["profile_N"]


PARAMS_MODELS = {
    "wedge": WedgeParams,
    "cap": CapParams,
    "sphere": SphereParams,
    "eigen": EigenParams,
    "coeff": CoeffParams,
    "ball": BallParams,
    "solve": SolveParams,
    "thm1": Theorem1Params,
    "thm2": Theorem2Params,
    "ex51": Example51Params,
    "ex52": Example52Params,
    "barrier": BarrierParams,
}

ExperimentName = Literal[
    "wedge", "cap", "sphere", "eigen", "coeff", "ball", "solve",
    "thm1", "thm2", "ex51", "ex52", "barrier",
]


class ExperimentEntry(BaseModel):
    """One experiment of a config file."""

    model_config = ConfigDict(extra="forbid")

    name: ExperimentName
    params: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_params(self):
        self.typed_params()
        return self

    def typed_params(self, resolution: Optional[Union[int, str]] = None) -> _Params:
        """
        Validate params against the schema of this experiment.

        Args:
            resolution: Grid size N for every grid field, or a preset name
        """
        params = PARAMS_MODELS[self.name](**self.params)
        if isinstance(resolution, str):
            params = params.with_preset(resolution)
        elif resolution is not None:
            params = params.with_resolution(resolution)
        return params


class ExperimentConfig(BaseModel):
    """A JSON experiment file."""

    model_config = ConfigDict(extra="forbid")

    output_dir: str = "./experiments/results"
    seed: int = 0
    resolution: Optional[Union[int, Literal["quick", "standard", "fine"]]] = None
    experiments: List[ExperimentEntry] = Field(default_factory=list)

    @classmethod
    def default_suite(cls) -> "ExperimentConfig":
        """Every experiment once, with default params."""
        return cls(experiments=[ExperimentEntry(name=name) for name in PARAMS_MODELS])


# Default configuration
DEFAULT_CONFIG = LabConfig()
