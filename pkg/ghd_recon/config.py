"""
Fit configuration.

Contains FitConfig, the JSON-serializable hyperparameter document of a
reconstruction.
"""

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional

from .exceptions import ConfigError, MissingConfigFieldError
from .types import DiceMethod, LaplacianKind, Parameterization, PathLike, Quadrature


@dataclass(frozen=True)
class FitConfig:
    """
    Hyperparameters of a GHD fit.

    Learning rates and translations are in units of the canonical mesh's
    bounding-box diagonal, so one step of size ``learning_rate`` moves a
    vertex by at most about that fraction of the mesh size.
    """

    # basis
    num_modes: int = 36
    laplacian_kind: str = LaplacianKind.MIXED.value
    norm_weight: float = 0.1
    unw_weight: float = 0.05
    normalize_laplacian: bool = True
    parameterization: str = Parameterization.GHD.value

    # occupancy
    quadrature: str = Quadrature.FACET.value
    frozen_geometry: bool = False
    beta_start: float = 10.0
    beta_end: float = 1000.0
    beta_ramp_iterations: int = 200

    # optimizer
    iterations: int = 400
    learning_rate: float = 0.02
    final_lr_fraction: float = 0.1
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    tolerance: float = 1e-5
    tolerance_window: int = 20

    # loss
    thickness_weight: float = 0.01
    min_thickness: float = 4.0
    normal_weight: float = 1.0
    volume_weight: float = 0.0
    target_volume: Optional[float] = None
    incompressibility_weight: float = 0.0

    # sampling
    n_fg: int = 20000
    n_bg: int = 20000
    bg_band: Optional[float] = None
    jitter: bool = True
    seed: int = 0

    # rigid stage
    rigid_iterations: int = 200
    rigid_rotation_lr: float = 0.02
    rigid_translation_lr: float = 0.01
    rigid_scale: bool = False
    rigid_restarts: int = 8
    rigid_samples: int = 2000
    rigid_patience: int = 50

    # evaluation
    dice_method: str = DiceMethod.PARITY.value
    eval_beta: float = 1000.0
    eval_samples: int = 10000
    eval_spacing: float = 0.5  # mm, voxel size for mesh-vs-mesh Dice
    fail_on_nonconvergence: bool = True

    def __post_init__(self) -> None:
        for name in ("num_modes", "beta_ramp_iterations", "tolerance_window", "rigid_restarts", "rigid_samples"):
            if getattr(self, name) < 1:
                raise ConfigError(name, f"must be at least 1, got {getattr(self, name)}")
        for name in ("iterations", "rigid_iterations", "n_fg", "n_bg", "rigid_patience"):
            if getattr(self, name) < 0:
                raise ConfigError(name, f"must be non-negative, got {getattr(self, name)}")
        for name in (
            "beta_start", "beta_end", "learning_rate", "adam_eps", "tolerance", "min_thickness",
            "rigid_rotation_lr", "rigid_translation_lr", "eval_beta", "eval_samples", "eval_spacing",
        ):
            if not getattr(self, name) > 0:
                raise ConfigError(name, f"must be positive, got {getattr(self, name)}")
        for name in ("thickness_weight", "normal_weight", "volume_weight", "incompressibility_weight",
                     "norm_weight", "unw_weight"):
            if getattr(self, name) < 0:
                raise ConfigError(name, f"must be non-negative, got {getattr(self, name)}")
        if not 0 < self.final_lr_fraction <= 1:
            raise ConfigError("final_lr_fraction", f"must lie in (0, 1], got {self.final_lr_fraction}")
        for name in ("adam_beta1", "adam_beta2"):
            if not 0 <= getattr(self, name) < 1:
                raise ConfigError(name, f"must lie in [0, 1), got {getattr(self, name)}")
        if self.bg_band is not None and self.bg_band <= 0:
            raise ConfigError("bg_band", f"must be positive, got {self.bg_band}")
        if self.volume_weight > 0 and self.target_volume is None:
            raise ConfigError("target_volume", "required when volume_weight is positive")
        for name, enum in (
            ("laplacian_kind", LaplacianKind),
            ("parameterization", Parameterization),
            ("quadrature", Quadrature),
            ("dice_method", DiceMethod),
        ):
            value = getattr(self, name)
            try:
                object.__setattr__(self, name, enum(value).value)
            except ValueError:
                choices = ", ".join(item.value for item in enum)
                raise ConfigError(name, f'unknown value "{value}" (expected one of {choices})')

    @classmethod
    def field_names(cls) -> List[str]:
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def from_dict(cls, data: Dict[str, Any], strict: bool = False) -> "FitConfig":
        """
        Build a config from a mapping.

        Args:
            data: Field values
            strict: Require every field to be present

        Raises:
            ConfigError: When a field is unknown or invalid
            MissingConfigFieldError: When strict and a field is absent
        """
        if not isinstance(data, dict):
            raise ConfigError("<document>", "must be a JSON object")
        names = cls.field_names()
        for key in data:
            if key not in names:
                raise ConfigError(key, "unknown field")
        if strict:
            for name in names:
                if name not in data:
                    raise MissingConfigFieldError(name)
        try:
            return cls(**data)
        except TypeError as error:
            raise ConfigError("<document>", str(error))

    @classmethod
    def load(cls, path: PathLike, strict: bool = True) -> "FitConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as error:
            raise ConfigError("<document>", f"{path}: invalid JSON: {error}")
        return cls.from_dict(data, strict=strict)

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, path: PathLike) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    def replace(self, **overrides: Any) -> "FitConfig":
        """Copy with some fields overridden; ``None`` values are ignored."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        unknown = [k for k in changes if k not in self.field_names()]
        if unknown:
            raise ConfigError(unknown[0], "unknown field")
        return dataclasses.replace(self, **changes)
