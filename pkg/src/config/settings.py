from pathlib import Path

from dotenv import load_dotenv
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):

    # Output
    output_dir: Path = Path("results")
    record_trajectories: bool = True

    # Batch execution
    default_seeds: list[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4])
    workers: int = Field(1, ge=1)

    # Console
    log_level: str = "INFO"

    model_config = SettingsConfigDict(
        env_prefix="GBPSTACK_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
        case_sensitive=False
    )


def load_env(path: Path = Path(".env")) -> bool:
    """Export .env into the process environment so spawned sweep workers see it too."""
    return load_dotenv(path, override=False)


load_env()
settings = Settings()
