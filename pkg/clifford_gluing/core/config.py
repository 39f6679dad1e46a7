from pathlib import Path

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True, extra="ignore")

    PROJECT_NAME: str = "Clifford Gluing"
    API_V1_STR: str = "/api/v1"
    LOG_LEVEL: str = "INFO"

    # Weierstrass tower sampling
    TOWER_RESOLUTION: int = 128  # radial samples of the fundamental sector
    TOWER_ANGULAR_RESOLUTION: int = 64
    NEWTON_MAX_ITER: int = 50
    NEWTON_TOL: float = 1e-12

    # Surface assembly
    MESH_RESOLUTION: int = 16  # samples across one quarter period of a tower
    ASSEMBLY_STRICT: bool = False  # refuse desk-scale regimes where a_m <= R_k
    REGION_B: float = 5.0  # extent constant b of the toral regions
    GROUP_ENUMERATION_BOUND: int = 1_000_000

    # Spectral analysis
    HEMISPHERE_EPS: float = 1e-3
    SHOOTING_RTOL: float = 1e-10
    STRIP_MODE_CUTOFF: int = 64

    # Linear algebra
    CONDITION_LIMIT: float = 1e12

    # Export
    STEREO_POLE: list[float] = [0.0, 0.0, 0.0, -1.0]  # projection pole for OBJ export

    SEED: int = 0

    @model_validator(mode="after")
    def validate_numerics(self) -> "Settings":
        """
        Reject settings that would make every numerical check meaningless.

        Ensures:
        - Tolerances and resolutions are strictly positive
        - The stereographic pole is a unit vector of R^4
        """
        for name in ("NEWTON_TOL", "SHOOTING_RTOL", "HEMISPHERE_EPS", "CONDITION_LIMIT", "REGION_B"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("TOWER_RESOLUTION", "TOWER_ANGULAR_RESOLUTION", "MESH_RESOLUTION", "NEWTON_MAX_ITER"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if len(self.STEREO_POLE) != 4 or abs(sum(c * c for c in self.STEREO_POLE) - 1.0) > 1e-9:
            raise ValueError("STEREO_POLE must be a unit vector with 4 components")
        return self


settings = Settings()


class RunConfig(BaseModel):
    """
    Parameters of one CLI run, read from a plain-text ``key=value`` file.

    Unknown keys are rejected so a typo never silently falls back to a default.
    Command-line flags override values coming from the file.
    """

    model_config = ConfigDict(extra="forbid")

    seed: int = Field(default_factory=lambda: settings.SEED, ge=0)
    resolution: int = Field(default_factory=lambda: settings.MESH_RESOLUTION, ge=16)
    tower_resolution: int = Field(default_factory=lambda: settings.TOWER_RESOLUTION, ge=8)
    hausdorff_factor: float = Field(default=2.0, gt=0)  # symmetry residual bound in units of h
    m_list: list[int] = Field(default_factory=lambda: [4, 8, 16])
    eps: float = Field(default_factory=lambda: settings.HEMISPHERE_EPS, gt=0, lt=1)
    strip_x: float = Field(default=8.0, gt=0)
    strip_y: float = Field(default=0.5, gt=0)
    region_b: float = Field(default_factory=lambda: settings.REGION_B, gt=0)
    perturb_iters: int = Field(default=10, ge=1)
    out_dir: str = "out"

    @field_validator("m_list", mode="before")
    @classmethod
    def split_m_list(cls, value):
        if isinstance(value, str):
            return [int(part) for part in value.replace(",", " ").split()]
        return value

    @field_validator("m_list")
    @classmethod
    def check_m_list(cls, value: list[int]) -> list[int]:
        if any(m < 1 for m in value):
            raise ValueError("m_list entries must be positive")
        return value

    @classmethod
    def from_file(cls, path: str | Path | None, **overrides) -> "RunConfig":
        """
        Load a run configuration and apply flag overrides.

        Args:
            path: Config file with ``key=value`` lines and ``#`` comments, or None.
            **overrides: Values from command-line flags; None entries are ignored.

        Returns:
            Validated RunConfig.

        Raises:
            FileNotFoundError: If the path does not exist.
            pydantic.ValidationError: On unknown keys or invalid values.
        """
        values: dict = {}
        if path is not None:
            path = Path(path)
            if not path.exists():
                raise FileNotFoundError(f"Config file not found: {path}")
            values.update({key: val for key, val in dotenv_values(path).items() if val is not None})
        values.update({key: val for key, val in overrides.items() if val is not None})
        return cls(**values)
